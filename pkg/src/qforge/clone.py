"""Preservation, polymorphisms, term composition, and projectivity tests.

The clone of an algebra is explored breadth-first at a fixed arity:
round 0 holds the projections, and each later round composes every basic
operation with already-found tables.  Searches over the clone (projectivity
witnesses, partially specified tables) consume rounds lazily and stop at a
configurable budget, reporting "not found within budget" rather than a hard
no.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence, Union

from .errors import BudgetError, ValidationError
from .model import Algebra, Domain, OpTable, Relation, Structure, projection

#: candidate-table spaces larger than this are refused by polymorphisms()
POLY_ENUM_CAP = 200_000


# ---------------------------------------------------------------------------
# term trees


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class App:
    op: str
    args: tuple["TermTree", ...]


TermTree = Union[Var, App]


def format_term(term: TermTree) -> str:
    if isinstance(term, Var):
        return f"x{term.index}"
    inner = ",".join(format_term(a) for a in term.args)
    return f"{term.op}({inner})"


def parse_term(text: str) -> TermTree:
    """Parse the `s(s(x0,x1),x2)` text form."""
    pos = 0

    def skip_ws():
        nonlocal pos
        while pos < len(text) and text[pos].isspace():
            pos += 1

    def parse_node() -> TermTree:
        nonlocal pos
        skip_ws()
        start = pos
        while pos < len(text) and (text[pos].isalnum() or text[pos] == "_"):
            pos += 1
        name = text[start:pos]
        if not name:
            raise ValidationError(f"bad term syntax at position {start} in {text!r}")
        skip_ws()
        if pos < len(text) and text[pos] == "(":
            pos += 1
            args = [parse_node()]
            skip_ws()
            while pos < len(text) and text[pos] == ",":
                pos += 1
                args.append(parse_node())
                skip_ws()
            if pos >= len(text) or text[pos] != ")":
                raise ValidationError(f"unbalanced parentheses in term {text!r}")
            pos += 1
            return App(name, tuple(args))
        if name.startswith("x") and name[1:].isdigit():
            return Var(int(name[1:]))
        raise ValidationError(f"bare name {name!r} is neither a variable nor an application")

    node = parse_node()
    skip_ws()
    if pos != len(text):
        raise ValidationError(f"trailing input in term {text!r}")
    return node


def eval_term(term: TermTree, algebra: Algebra, args: Sequence[int]) -> int:
    if isinstance(term, Var):
        if term.index >= len(args):
            raise ValidationError(f"variable x{term.index} unbound for {len(args)} arguments")
        return args[term.index]
    op = algebra.op(term.op)
    if op.arity != len(term.args):
        raise ValidationError(
            f"operation {term.op!r} has arity {op.arity}, applied to {len(term.args)} terms"
        )
    return op.apply([eval_term(a, algebra, args) for a in term.args])


def term_min_arity(term: TermTree) -> int:
    if isinstance(term, Var):
        return term.index + 1
    return max((term_min_arity(a) for a in term.args), default=0)


def flatten_term(term: TermTree, algebra: Algebra, arity: Optional[int] = None) -> OpTable:
    """Tabulate a term into an OpTable of the given arity."""
    if arity is None:
        arity = term_min_arity(term)
    if arity < term_min_arity(term):
        raise ValidationError(f"term needs arity >= {term_min_arity(term)}")
    size = algebra.domain.size
    table = tuple(
        eval_term(term, algebra, args)
        for args in itertools.product(range(size), repeat=arity)
    )
    return OpTable(arity, algebra.domain, table)


# ---------------------------------------------------------------------------
# preservation and polymorphisms


def preserves(op: OpTable, rel: Relation) -> bool:
    """True iff coordinatewise application of op maps rel-tuples into rel."""
    if op.domain != rel.domain:
        raise ValidationError("operation and relation domains differ")
    tuples = sorted(rel.tuples())
    if not tuples or op.arity == 0:
        # empty relation: nothing to map; 0-ary op: constant must lie in rel rows
        if op.arity == 0 and tuples:
            const = op.apply(())
            return rel.contains((const,) * rel.arity) if rel.arity else True
        return True
    for combo in itertools.product(tuples, repeat=op.arity):
        image = tuple(op.apply(col) for col in zip(*combo))
        if not rel.contains(image):
            return False
    return True


def polymorphisms(struct: Structure, k: int, enum_cap: int = POLY_ENUM_CAP) -> list[OpTable]:
    """All k-ary operations preserving every relation and fixing every constant.

    Cost is size**(size**k) candidate tables, so this refuses (BudgetError)
    beyond the cap: on a 3-element domain that means k <= 2, on a 2-element
    domain k <= 4.
    """
    size = struct.domain.size
    n_tables = size ** (size**k)
    if n_tables > enum_cap:
        raise BudgetError(
            f"{n_tables} candidate tables exceed the enumeration cap {enum_cap}"
        )
    rels = [rel.to_tuples() for rel in struct.relations.values()]
    consts = sorted(set(struct.constants.values()))
    diag_index = [sum(a * size**j for j in range(k)) for a in range(size)]
    found = []
    for raw in itertools.product(range(size), repeat=size**k):
        if any(raw[diag_index[c]] != c for c in consts):
            continue
        op = OpTable(k, struct.domain, raw)
        if all(preserves(op, rel) for rel in rels):
            found.append(op)
    found.sort(key=lambda o: o.table)
    return found


# ---------------------------------------------------------------------------
# clone closure at a fixed arity


@dataclass
class CloneBudget:
    """Caps for clone exploration: composition rounds and raw work."""

    depth: int = 4
    max_tables: int = 20_000
    max_compositions: int = 300_000


@dataclass
class CloneClosure:
    tables: dict[tuple, TermTree]
    exhausted: bool  # True when stopped by budget instead of fixpoint
    rounds: int = 0


def _closure_run(algebra: Algebra, arity: int, budget: CloneBudget):
    """Shared driver: yields per-round {table: term} dicts, then finally a
    ("done", exhausted, rounds) marker instead of a dict."""
    size = algebra.domain.size
    known: dict[tuple, TermTree] = {
        projection(algebra.domain, arity, i).table: Var(i) for i in range(arity)
    }
    yield dict(known)

    basics = list(algebra.ops.items())
    compositions = 0
    entries = size**arity
    for depth in range(1, budget.depth + 1):
        new: dict[tuple, TermTree] = {}
        current = list(known.items())
        over_budget = False
        for name, op in basics:
            r = op.arity
            for combo in itertools.product(current, repeat=r):
                compositions += 1
                if compositions > budget.max_compositions or (
                    len(known) + len(new) >= budget.max_tables
                ):
                    over_budget = True
                    break
                tables = [c[0] for c in combo]
                if r == 0:
                    composed = (op.apply(()),) * entries
                else:
                    composed = tuple(
                        op.apply([t[i] for t in tables]) for i in range(entries)
                    )
                if composed not in known and composed not in new:
                    new[composed] = App(name, tuple(c[1] for c in combo))
            if over_budget:
                break
        known.update(new)
        if new:
            yield new
        if over_budget:
            yield ("done", True, depth)
            return
        if not new:
            yield ("done", False, depth - 1)
            return
    yield ("done", True, budget.depth)


def clone_rounds(
    algebra: Algebra, arity: int, budget: Optional[CloneBudget] = None
) -> Iterator[dict[tuple, TermTree]]:
    """Yield {table: witness term} per round; round 0 is the projections.

    Stops at the closure fixpoint or at the budget, whichever first.  The
    witness term for a table is the first one found (shallowest).
    """
    for item in _closure_run(algebra, arity, budget or CloneBudget()):
        if isinstance(item, dict):
            yield item


def clone_closure(
    algebra: Algebra, arity: int, budget: Optional[CloneBudget] = None
) -> CloneClosure:
    """Fixpoint of composing basic ops with projections and found tables.

    ``exhausted`` is set when the budget cut the search (the table set is
    then a lower approximation of the clone at this arity).
    """
    tables: dict[tuple, TermTree] = {}
    exhausted, rounds = False, 0
    for item in _closure_run(algebra, arity, budget or CloneBudget()):
        if isinstance(item, dict):
            tables.update(item)
        else:
            _, exhausted, rounds = item
    return CloneClosure(tables=tables, exhausted=exhausted, rounds=rounds)


# ---------------------------------------------------------------------------
# alpha-beta projectivity and the EGP test


@dataclass(frozen=True)
class ProjectivityWitness:
    """Least coordinate carrying the two-subset projectivity, or None."""

    alpha: frozenset
    beta: frozenset
    coord: Optional[int]  # 0-based


def _check_cover(domain: Domain, alpha: Iterable[int], beta: Iterable[int]):
    alpha, beta = frozenset(alpha), frozenset(beta)
    full = frozenset(domain.elements())
    if not alpha or not beta or alpha == full or beta == full:
        raise ValidationError("alpha and beta must be nonempty strict subsets")
    if alpha | beta != full:
        raise ValidationError("alpha and beta must cover the domain")
    return alpha, beta


def is_alpha_beta_projective(
    op: OpTable, alpha: Iterable[int], beta: Iterable[int]
) -> ProjectivityWitness:
    """Find the least coordinate i with: x_i in alpha forces the value into
    alpha, and x_i in beta forces it into beta."""
    alpha, beta = _check_cover(op.domain, alpha, beta)
    for i in range(op.arity):
        ok = True
        for args, value in op.rows():
            if args[i] in alpha and value not in alpha:
                ok = False
                break
            if args[i] in beta and value not in beta:
                ok = False
                break
        if ok:
            return ProjectivityWitness(alpha, beta, i)
    return ProjectivityWitness(alpha, beta, None)


def covering_pairs(domain: Domain) -> Iterator[tuple[frozenset, frozenset]]:
    """Covering pairs of strict subsets in canonical order: ascending bitmask,
    smaller mask first within the pair."""
    n = domain.size
    full = (1 << n) - 1

    def members(mask):
        return frozenset(i for i in range(n) if mask >> i & 1)

    for a in range(1, full):
        for b in range(a + 1, full):
            if a | b == full:
                yield members(a), members(b)


def egp_test(algebra: Algebra) -> Optional[tuple[frozenset, frozenset]]:
    """First covering pair making every basic operation projective, else None.

    None means no such pair exists, which on the powers side shows up as
    polynomial growth of generating sets; a pair is the exponential-growth
    witness.  Checking basic operations suffices because the projectivity
    property is preserved under composition.
    """
    for alpha, beta in covering_pairs(algebra.domain):
        if all(
            is_alpha_beta_projective(op, alpha, beta).coord is not None
            for op in algebra.ops.values()
        ):
            return alpha, beta
    return None


# ---------------------------------------------------------------------------
# essential relations


def tilde_relation(rel: Relation) -> Relation:
    """Conjunction of the n drop-one existential projections of rel."""
    if rel.arity < 1:
        raise ValidationError("tilde requires arity >= 1")
    n = rel.arity
    tuples = rel.tuples()
    projs = []
    for i in range(n):
        projs.append({t[:i] + t[i + 1 :] for t in tuples})
    members = []
    for t in itertools.product(rel.domain.elements(), repeat=n):
        if all(t[:i] + t[i + 1 :] in projs[i] for i in range(n)):
            members.append(t)
    return Relation.from_tuples(rel.domain, n, members)


def essential_tuples(rel: Relation) -> list[tuple[int, ...]]:
    """Tuples outside rel whose every coordinate can be repaired into rel."""
    if rel.arity < 1:
        raise ValidationError("essential tuples require arity >= 1")
    out = []
    elements = list(rel.domain.elements())
    for t in itertools.product(elements, repeat=rel.arity):
        if rel.contains(t):
            continue
        if all(
            any(rel.contains(t[:i] + (b,) + t[i + 1 :]) for b in elements)
            for i in range(rel.arity)
        ):
            out.append(t)
    return out


def is_essential(rel: Relation) -> bool:
    """A relation is essential iff it has an essential tuple, i.e. it is not
    the conjunction of its lower-arity projections."""
    return bool(essential_tuples(rel))


def check_lemma_micro(rel: Relation) -> bool:
    """On domain 3: if rel is preserved by the semilattice operation, no
    essential tuple may start (2, 2, ...).  Returns whether that holds (a
    False is a bug detector, not an expected outcome)."""
    if rel.domain.size != 3 or rel.arity < 2:
        raise ValidationError("the check is about arity >= 2 relations on domain 3")
    if not preserves(semilattice_s(rel.domain), rel):
        return True
    return not any(t[0] == 2 and t[1] == 2 for t in essential_tuples(rel))


# ---------------------------------------------------------------------------
# named operations: the semilattice s, the 4-ary switchable r, and the
# near-unanimity-like families used by collapsibility certificates


def semilattice_s(domain: Optional[Domain] = None) -> OpTable:
    """Binary idempotent operation sending every off-diagonal pair to 2."""
    domain = domain or Domain(3)
    if domain.size != 3:
        raise ValidationError("the semilattice-without-unit operation lives on domain 3")
    return OpTable(
        2,
        domain,
        tuple(2 if x != y else x for x, y in itertools.product(range(3), repeat=2)),
        idempotent=True,
    )


_SWITCHABLE_SPECIAL = {(0, 1, 1, 1): 1, (1, 0, 1, 1): 1, (0, 0, 0, 1): 0, (0, 0, 1, 0): 0}


def switchable_r(domain: Optional[Domain] = None) -> OpTable:
    """The 4-ary idempotent operation with rows 0111,1011 -> 1 and
    0001,0010 -> 0, everything else off the diagonal -> 2."""
    domain = domain or Domain(3)
    if domain.size != 3:
        raise ValidationError("this operation lives on domain 3")
    table = []
    for t in itertools.product(range(3), repeat=4):
        if len(set(t)) == 1:
            table.append(t[0])
        else:
            table.append(_SWITCHABLE_SPECIAL.get(t, 2))
    return OpTable(4, domain, tuple(table), idempotent=True)


def _family_table(arity: int, special, fallback: int) -> OpTable:
    domain = Domain(3)
    table = []
    for t in itertools.product(range(3), repeat=arity):
        if len(set(t)) == 1:
            table.append(t[0])
        else:
            v = special(t)
            table.append(v if v is not None else fallback)
    return OpTable(arity, domain, tuple(table), idempotent=True)


def build_f_a_n(n: int) -> OpTable:
    """Arity n+1 (n >= 3): all-0 -> 0, all-1 -> 1, exactly one 1 among 0s -> 0,
    everything else -> 2."""
    if n < 3:
        raise ValidationError("n must be >= 3")

    def special(t):
        if all(v in (0, 1) for v in t) and t.count(1) == 1:
            return 0
        return None

    return _family_table(n + 1, special, 2)


def build_f_b_n(n: int) -> OpTable:
    """Mirror of build_f_a_n with 0 and 1 swapped."""
    if n < 3:
        raise ValidationError("n must be >= 3")

    def special(t):
        if all(v in (0, 1) for v in t) and t.count(0) == 1:
            return 1
        return None

    return _family_table(n + 1, special, 2)


def build_f_hat_a_n(n: int) -> OpTable:
    """Arity n+2 (n >= 2): all-0 -> 0, all-1 -> 1, first coordinate 1 with
    exactly one more 1 among the rest -> 0, everything else -> 2.

    The displayed catch-all is read as 2, the absorbing element.
    """
    if n < 2:
        raise ValidationError("n must be >= 2")

    def special(t):
        if all(v in (0, 1) for v in t) and t[0] == 1 and t[1:].count(1) == 1:
            return 0
        return None

    return _family_table(n + 2, special, 2)


def build_f_hat_b_n(n: int) -> OpTable:
    """Mirror of build_f_hat_a_n with 0 and 1 swapped."""
    if n < 2:
        raise ValidationError("n must be >= 2")

    def special(t):
        if all(v in (0, 1) for v in t) and t[0] == 0 and t[1:].count(0) == 1:
            return 1
        return None

    return _family_table(n + 2, special, 2)


# ---------------------------------------------------------------------------
# slice-surjective operations


def _as_source_element(source) -> int:
    if isinstance(source, int):
        return source
    source = set(source)
    if len(source) != 1:
        raise ValidationError("the source must be a single element")
    return source.pop()


def is_slice_surjective(op: OpTable, source) -> bool:
    """Idempotent op whose every slice fixing one coordinate to the source
    value is surjective onto the domain."""
    a = _as_source_element(source)
    return is_generalized_slice_surjective(op, (a,) * op.arity)


def is_generalized_slice_surjective(op: OpTable, z: Sequence[int]) -> bool:
    """Idempotent op with: fixing coordinate i to z_i, the slice image is the
    whole domain, for every i."""
    if len(z) != op.arity:
        raise ValidationError(f"z must have length {op.arity}")
    if not op.check_idempotent():
        return False
    size = op.domain.size
    full = set(range(size))
    for i, zi in enumerate(z):
        image = set()
        for args in itertools.product(range(size), repeat=op.arity - 1):
            image.add(op.apply(args[:i] + (zi,) + args[i:]))
            if image == full:
                break
        if image != full:
            return False
    return True


# ---------------------------------------------------------------------------
# witness searches over the clone


def find_pairwise_witnesses(
    algebra: Algebra,
    spec: Sequence[tuple[Sequence[int], Iterable[int]]],
    budget: Optional[CloneBudget] = None,
) -> Optional[TermTree]:
    """Search the clone for a term whose table meets every (args, allowed
    outputs) row.  Rows share one arity.  None means not found within budget."""
    if not spec:
        raise ValidationError("empty specification")
    arities = {len(args) for args, _ in spec}
    if len(arities) != 1:
        raise ValidationError("specification rows must share one arity")
    arity = arities.pop()
    rows = [(tuple(args), {out} if isinstance(out, int) else set(out)) for args, out in spec]
    for new in clone_rounds(algebra, arity, budget):
        for table, term in new.items():
            op = OpTable(arity, algebra.domain, table)
            if all(op.apply(args) in allowed for args, allowed in rows):
                return term
    return None


@dataclass(frozen=True)
class PinnedTermPair:
    p: TermTree
    r3: TermTree
    regime: int  # 1 or 2


_PINNED_ROWS = {
    1: (
        [((0, 1), 0), ((0, 2), 2)],
        [((0, 0, 1), 0), ((0, 1, 0), 0), ((0, 1, 1), 2)],
    ),
    2: (
        [((0, 1), 1), ((2, 1), 2)],
        [((1, 0, 1), 1), ((1, 1, 0), 1), ((1, 0, 0), 2)],
    ),
}


def find_pinned_term_pair(
    algebra: Algebra, budget: Optional[CloneBudget] = None
) -> Optional[PinnedTermPair]:
    """Bounded search for the binary/ternary term pair of either regime.

    Returns the first witnesses found, or None when neither regime shows up
    within the budget (inconclusive, not a proof of absence).
    """
    if algebra.domain.size != 3:
        raise ValidationError("the condition is about 3-element algebras")
    for regime, (p_spec, r3_spec) in _PINNED_ROWS.items():
        p = find_pairwise_witnesses(algebra, p_spec, budget)
        if p is None:
            continue
        r3 = find_pairwise_witnesses(algebra, r3_spec, budget)
        if r3 is not None:
            return PinnedTermPair(p=p, r3=r3, regime=regime)
    return None
