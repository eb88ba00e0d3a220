"""The two-subset gadget relations, their DNF encodings, and the canon tests.

Everything is parameterized by a covering pair (alpha, beta) of strict
subsets of the domain.  The block gadgets are disjunctions of a fixed base
relation over consecutive variable blocks, so their DNF encodings grow
linearly in the block count while the tuple encodings grow exponentially;
builders above the materialization threshold return DNF-backed relations
only.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import BudgetError, ValidationError
from .model import (
    And,
    ConstEq,
    Domain,
    ENC_DNF,
    ENC_TUPLES,
    OpTable,
    Or,
    Relation,
    Structure,
)

TUPLE_ENCODING_MAX_K = 3


@dataclass(frozen=True)
class AlphaBeta:
    """A covering pair of strict subsets of the domain."""

    alpha: frozenset
    beta: frozenset

    @classmethod
    def of(cls, alpha: Iterable[int], beta: Iterable[int]) -> "AlphaBeta":
        return cls(frozenset(alpha), frozenset(beta))

    def validate(self, domain: Domain, need_overlap: bool = False) -> None:
        full = frozenset(domain.elements())
        if not self.alpha or not self.beta:
            raise ValidationError("alpha and beta must be nonempty")
        if not (self.alpha < full and self.beta < full):
            raise ValidationError("alpha and beta must be strict subsets")
        if self.alpha | self.beta != full:
            raise ValidationError("alpha and beta must cover the domain")
        if need_overlap and not self.alpha & self.beta:
            raise ValidationError("this construction needs alpha and beta to intersect")

    def overlap(self) -> frozenset:
        return self.alpha & self.beta


def _block_dnf(ab: AlphaBeta, block_vars: list[tuple[int, ...]], width: int):
    """One DNF disjunct list: all width-tuples over alpha, then over beta,
    per block, matching the displayed enumeration."""
    disjuncts = []
    for positions in block_vars:
        for side in (sorted(ab.alpha), sorted(ab.beta)):
            for values in itertools.product(side, repeat=width):
                disjuncts.append(
                    And(tuple(ConstEq(p, v) for p, v in zip(positions, values)))
                )
    return Or(tuple(disjuncts))


def _block_relation(
    domain: Domain, ab: AlphaBeta, k: int, width: int, encoding: str
) -> Relation:
    ab.validate(domain)
    if k < 1:
        raise ValidationError("block count must be >= 1")
    arity = width * k
    blocks = [tuple(range(i * width, (i + 1) * width)) for i in range(k)]
    if encoding == ENC_DNF:
        return Relation.from_dnf(domain, arity, _block_dnf(ab, blocks, width))
    if encoding == ENC_TUPLES:
        if k > TUPLE_ENCODING_MAX_K:
            raise BudgetError(
                f"tuple encoding materializes {domain.size}**{arity} assignments; "
                f"use DNF beyond k={TUPLE_ENCODING_MAX_K}"
            )
        base = _side_tuples(ab, width)
        members = [
            t
            for t in itertools.product(domain.elements(), repeat=arity)
            if any(tuple(t[p] for p in block) in base for block in blocks)
        ]
        return Relation.from_tuples(domain, arity, members)
    raise ValidationError(f"unsupported gadget encoding {encoding!r}")


def _side_tuples(ab: AlphaBeta, width: int) -> frozenset:
    out = set(itertools.product(sorted(ab.alpha), repeat=width))
    out |= set(itertools.product(sorted(ab.beta), repeat=width))
    return frozenset(out)


def build_rho(domain: Domain, ab: AlphaBeta, encoding: str = ENC_TUPLES) -> Relation:
    """Binary: both coordinates in alpha, or both in beta."""
    return _block_relation(domain, ab, 1, 2, encoding)


def build_rho_prime(domain: Domain, ab: AlphaBeta, encoding: str = ENC_TUPLES) -> Relation:
    """Ternary: all three coordinates in alpha, or all in beta."""
    return _block_relation(domain, ab, 1, 3, encoding)


def build_sigma_k(
    domain: Domain, ab: AlphaBeta, k: int, encoding: str = ENC_TUPLES
) -> Relation:
    """Arity 2k: some pair block (x_i, y_i) lies in the binary base relation."""
    return _block_relation(domain, ab, k, 2, encoding)


def build_tau_k(
    domain: Domain, ab: AlphaBeta, k: int, encoding: str = ENC_TUPLES
) -> Relation:
    """Arity 3k: some triple block (x_i, y_i, z_i) lies in the ternary base."""
    return _block_relation(domain, ab, k, 3, encoding)


def verify_pp_definition(domain: Domain, ab: AlphaBeta, k: int) -> bool:
    """Check that the 3k-ary triple gadget equals the conjunction of 3**k
    instances of the 2k-ary pair gadget, one per way of picking two variables
    out of every block.

    Brute force over all domain**(3k) assignments; capped at k <= 2.
    """
    if k > 2:
        raise BudgetError("pp-definition verification enumerates 3^(3k) assignments; k <= 2")
    sigma = build_sigma_k(domain, ab, k, ENC_DNF)
    tau = build_tau_k(domain, ab, k, ENC_DNF)
    pair_choices = [(0, 1), (1, 2), (0, 2)]
    conjuncts = []
    for choice in itertools.product(pair_choices, repeat=k):
        positions = []
        for i, (a, b) in enumerate(choice):
            positions.extend((3 * i + a, 3 * i + b))
        conjuncts.append(tuple(positions))
    for t in itertools.product(domain.elements(), repeat=3 * k):
        phi = all(sigma.contains(tuple(t[p] for p in pos)) for pos in conjuncts)
        if phi != tau.contains(t):
            return False
    return True


def build_Z(domain: Optional[Domain] = None) -> Relation:
    """The binary universal-variable gadget on domain 3."""
    domain = domain or Domain(3)
    if domain.size != 3:
        raise ValidationError("this gadget lives on domain 3")
    return Relation.from_tuples(domain, 2, [(0, 0), (2, 1), (2, 2), (0, 2)])


def build_R(domain: Optional[Domain] = None) -> Relation:
    """Not-all-equal over {0,2}: all {0,2}-triples except the two constants."""
    domain = domain or Domain(3)
    if domain.size != 3:
        raise ValidationError("this gadget lives on domain 3")
    members = [t for t in itertools.product((0, 2), repeat=3) if len(set(t)) > 1]
    return Relation.from_tuples(domain, 3, members)


def build_nu_for_sigma(domain: Domain, ab: AlphaBeta, m: int) -> OpTable:
    """(3m+1)-ary near-unanimity operation: tuples where all coordinates but
    one agree map to the repeated value; every other tuple maps to the least
    element of alpha-intersect-beta."""
    ab.validate(domain, need_overlap=True)
    if m < 1:
        raise ValidationError("m must be >= 1")
    arity = 3 * m + 1
    if domain.size**arity > 3**9:
        raise BudgetError(f"near-unanimity table of arity {arity} over budget")
    catch_all = min(ab.overlap())
    table = []
    for t in itertools.product(domain.elements(), repeat=arity):
        counts = {v: t.count(v) for v in set(t)}
        majority = [v for v, c in counts.items() if c >= arity - 1]
        table.append(majority[0] if majority else catch_all)
    return OpTable(arity, domain, tuple(table), idempotent=True)


# ---------------------------------------------------------------------------
# existentially trivial languages and canons


def is_existentially_trivial(struct: Structure) -> Optional[int]:
    """Least element substitutable into any coordinate of any tuple of every
    relation without leaving it, or None.  Declared constants do not take
    part (they surface as equality atoms and are eliminated separately)."""
    for c in struct.domain.elements():
        if all(_canon_ok(rel, c) for rel in struct.relations.values()):
            return c
    return None


def _canon_ok(rel: Relation, c: int) -> bool:
    for t in rel.tuples():
        for i in range(rel.arity):
            if not rel.contains(t[:i] + (c,) + t[i + 1 :]):
                return False
    return True


def proj_single(rel: Relation, i: int) -> frozenset:
    """Unary projection to coordinate i.

    DNF-backed relations are projected syntactically (per-disjunct class
    analysis), so this never materializes them.
    """
    if not 0 <= i < rel.arity:
        raise ValidationError(f"coordinate {i} out of range")
    if rel.encoding == ENC_DNF:
        out = set()
        for disjunct in _dnf_disjunct_classes(rel):
            if disjunct is not None:
                out |= disjunct.values[i]
        return frozenset(out)
    return frozenset(t[i] for t in rel.tuples())


def proj_pair(rel: Relation, i: int, j: int) -> frozenset:
    """Binary projection to coordinates (i, j), syntactic on DNF."""
    for c in (i, j):
        if not 0 <= c < rel.arity:
            raise ValidationError(f"coordinate {c} out of range")
    if rel.encoding == ENC_DNF:
        out = set()
        for disjunct in _dnf_disjunct_classes(rel):
            if disjunct is None:
                continue
            vi, vj = disjunct.values[i], disjunct.values[j]
            if i == j or disjunct.roots[i] == disjunct.roots[j]:
                out |= {(v, v) for v in vi & vj}
            else:
                out |= set(itertools.product(sorted(vi), sorted(vj)))
        return frozenset(out)
    return frozenset((t[i], t[j]) for t in rel.tuples())


@dataclass
class _DisjunctClasses:
    values: list  # per coordinate: allowed value set
    roots: list  # per coordinate: equality-class representative


def _dnf_disjunct_classes(rel: Relation):
    """Per satisfiable disjunct: allowed values and equality classes of the
    coordinates; unsatisfiable disjuncts yield None."""
    from .model import And as AndNode, ConstEq as CE, Or as OrNode, VarEq as VE

    node = rel.formula
    disjuncts = node.parts if isinstance(node, OrNode) else (node,)
    full = frozenset(rel.domain.elements())
    for d in disjuncts:
        lits = d.parts if isinstance(d, AndNode) else (d,)
        parent = list(range(rel.arity))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        forced: dict[int, int] = {}
        sat = True
        for lit in lits:
            if isinstance(lit, VE):
                parent[find(lit.left)] = find(lit.right)
            elif not isinstance(lit, CE):
                raise ValidationError("DNF disjunct contains a non-literal")
        for lit in lits:
            if isinstance(lit, CE):
                root = find(lit.var)
                if forced.get(root, lit.value) != lit.value:
                    sat = False
                    break
                forced[root] = lit.value
        if not sat:
            yield None
            continue
        roots = [find(i) for i in range(rel.arity)]
        values = [
            frozenset((forced[r],)) if r in forced else full for r in roots
        ]
        yield _DisjunctClasses(values, roots)


@dataclass
class Reduction:
    """Forcings stripped from one relation: ("const", coord, value) and
    ("eq", coord, coord) entries, in the order they were applied."""

    name: str
    forcings: list
    residual: Relation


@dataclass
class AlmostTrivialVerdict:
    trivial: bool
    canon: Optional[int]
    reductions: list


def is_almost_existentially_trivial(struct: Structure) -> AlmostTrivialVerdict:
    """Strip forced-constant and forced-equal coordinates from every relation
    (detected through 1- and 2-coordinate projections), then look for a
    common canon of the residual relations."""
    reductions = []
    residuals = {}
    for name, rel in struct.relations.items():
        forcings = []
        coords = list(range(rel.arity))  # residual position -> original coord
        current = rel
        changed = True
        while changed and current.arity > 0:
            changed = False
            for i in range(current.arity):
                values = proj_single(current, i)
                if len(values) == 1:
                    forcings.append(("const", coords[i], next(iter(values))))
                    current = _drop_coordinate(current, i)
                    del coords[i]
                    changed = True
                    break
            if changed:
                continue
            for i, j in itertools.combinations(range(current.arity), 2):
                pairs = proj_pair(current, i, j)
                if pairs and all(a == b for a, b in pairs):
                    forcings.append(("eq", coords[i], coords[j]))
                    current = _drop_coordinate(current, j)
                    del coords[j]
                    changed = True
                    break
        reductions.append(Reduction(name, forcings, current))
        residuals[name] = current
    residual_struct = Structure(struct.domain, residuals)
    canon = is_existentially_trivial(residual_struct)
    return AlmostTrivialVerdict(canon is not None, canon, reductions)


def _drop_coordinate(rel: Relation, i: int) -> Relation:
    return Relation.from_tuples(
        rel.domain, rel.arity - 1, {t[:i] + t[i + 1 :] for t in rel.tuples()}
    )
