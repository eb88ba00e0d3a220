"""Three-element classification: congruences, permutational factors, and the
NP / co-NP-complete / Pi2p-hard decision tree.

The tree: no covering pair makes every basic operation projective -> "NP";
a pair exists and no factor is permutational -> "coNP-complete"; a pair
exists and some factor is permutational -> "Pi2p-hard".  "Not collapsible"
is an unbounded statement, so verdict evidence only ever carries bounded
negative results with their explicit (k, m) budgets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional

from . import clone, powers
from .errors import ValidationError
from .model import Algebra, Domain, OpTable, Structure


@dataclass(frozen=True)
class Partition:
    """Disjoint nonempty blocks covering the domain, in canonical order."""

    blocks: tuple[frozenset, ...]

    @classmethod
    def of(cls, blocks: Iterable[Iterable[int]]) -> "Partition":
        normalized = tuple(sorted((frozenset(b) for b in blocks), key=min))
        return cls(normalized)

    def validate(self, domain: Domain) -> None:
        seen: set = set()
        for b in self.blocks:
            if not b:
                raise ValidationError("empty block")
            if seen & b:
                raise ValidationError("blocks overlap")
            seen |= b
        if seen != set(domain.elements()):
            raise ValidationError("blocks do not cover the domain")

    def block_of(self, x: int) -> int:
        for i, b in enumerate(self.blocks):
            if x in b:
                return i
        raise ValidationError(f"{x} not in any block")


def all_partitions(domain: Domain) -> list[Partition]:
    elements = list(domain.elements())
    out = []

    def grow(idx: int, blocks: list):
        if idx == len(elements):
            out.append(Partition.of([frozenset(b) for b in blocks]))
            return
        x = elements[idx]
        for b in blocks:
            b.add(x)
            grow(idx + 1, blocks)
            b.remove(x)
        blocks.append({x})
        grow(idx + 1, blocks)
        blocks.pop()

    grow(0, [])
    return sorted(out, key=lambda p: [sorted(b) for b in p.blocks])


# ---------------------------------------------------------------------------
# subalgebras, congruences, quotients


def subalgebras(algebra: Algebra) -> list[frozenset]:
    """Nonempty subsets closed under every basic operation."""
    out = []
    elements = list(algebra.domain.elements())
    for r in range(1, len(elements) + 1):
        for subset in itertools.combinations(elements, r):
            sub = frozenset(subset)
            if all(
                op.apply(args) in sub
                for op in algebra.ops.values()
                for args in itertools.product(subset, repeat=op.arity)
            ):
                out.append(sub)
    return out


def is_congruence(algebra: Algebra, part: Partition) -> bool:
    """Compatibility with every operation, checked on single-coordinate moves
    (full compatibility follows by stepping coordinates and transitivity)."""
    part.validate(algebra.domain)
    block = {x: part.block_of(x) for x in algebra.domain.elements()}
    for op in algebra.ops.values():
        for args, value in op.rows():
            for i in range(op.arity):
                for b in algebra.domain.elements():
                    if block[b] == block[args[i]] and b != args[i]:
                        other = op.apply(args[:i] + (b,) + args[i + 1 :])
                        if block[other] != block[value]:
                            return False
    return True


def congruences(algebra: Algebra) -> list[Partition]:
    return [p for p in all_partitions(algebra.domain) if is_congruence(algebra, p)]


def quotient(algebra: Algebra, part: Partition) -> Algebra:
    """Algebra on the blocks; requires a congruence (tables are then
    independent of the chosen representatives)."""
    if not is_congruence(algebra, part):
        raise ValidationError("partition is not a congruence")
    reps = [min(b) for b in part.blocks]
    block = {x: part.block_of(x) for x in algebra.domain.elements()}
    qdom = Domain(len(part.blocks))
    ops = {}
    for name, op in algebra.ops.items():
        table = tuple(
            block[op.apply([reps[a] for a in args])]
            for args in itertools.product(range(qdom.size), repeat=op.arity)
        )
        ops[name] = OpTable(op.arity, qdom, table)
    return Algebra(qdom, ops)


def induced(algebra: Algebra, subset: frozenset) -> Algebra:
    """Restriction to a subalgebra, reindexed to 0..len-1 by element order."""
    elements = sorted(subset)
    index = {x: i for i, x in enumerate(elements)}
    sdom = Domain(len(elements))
    ops = {}
    for name, op in algebra.ops.items():
        table = []
        for args in itertools.product(elements, repeat=op.arity):
            value = op.apply(args)
            if value not in subset:
                raise ValidationError(f"{sorted(subset)} is not closed under {name!r}")
            table.append(index[value])
        ops[name] = OpTable(op.arity, sdom, tuple(table))
    return Algebra(sdom, ops)


# ---------------------------------------------------------------------------
# permutational algebras (G-sets) and their factors


def is_gset(algebra: Algebra) -> bool:
    """More than one element, and every operation acts as a permutation
    applied to a single coordinate."""
    size = algebra.domain.size
    if size < 2:
        return False
    for op in algebra.ops.values():
        if op.arity == 0:
            return False
        witnessed = False
        for i in range(op.arity):
            mapping: dict[int, int] = {}
            consistent = True
            for args, value in op.rows():
                if mapping.setdefault(args[i], value) != value:
                    consistent = False
                    break
            if consistent and sorted(mapping.values()) == list(range(size)):
                witnessed = True
                break
        if not witnessed:
            return False
    return True


@dataclass(frozen=True)
class GsetWitness:
    subalgebra: frozenset
    partition: Partition  # of the subalgebra's reindexed domain


def has_gset_factor(algebra: Algebra) -> Optional[GsetWitness]:
    """Search every subalgebra, then every congruence of the induced algebra,
    for a permutational quotient."""
    for sub in subalgebras(algebra):
        inner = induced(algebra, sub)
        for part in congruences(inner):
            if is_gset(quotient(inner, part)):
                return GsetWitness(sub, part)
    return None


# ---------------------------------------------------------------------------
# bounded collapsibility evidence and the gap verdict


@dataclass
class GapReport:
    """Bounded evidence for "no permutational factor and not collapsible".

    ``collapse_failures`` maps each probed k to the least m where the
    at-least-(m-k)-equal tuples fail to generate, or None when no failure
    showed up within the budget (which leaves the verdict negative).
    """

    is_gap_evidence: bool
    gset: Optional[GsetWitness]
    collapse_failures: dict
    k_max: int
    m_max: int
    inconclusive: bool = False


def is_gap_algebra(
    algebra: Algebra,
    k_max: int = 1,
    m_max: int = 5,
    budget: Optional[powers.PowersBudget] = None,
) -> GapReport:
    if algebra.domain.size != 3:
        raise ValidationError("gap verdicts are about 3-element algebras")
    if not algebra.is_idempotent():
        raise ValidationError("gap verdicts are about idempotent algebras")
    gset = has_gset_factor(algebra)
    failures = {}
    inconclusive = False
    for k in range(1, k_max + 1):
        verdicts = powers.is_k_collapsible(algebra, k, m_max, budget=budget)["union"]
        failures[k] = verdicts.first_failure()
        if verdicts.inconclusive():
            inconclusive = True
    evidence = gset is None and all(m is not None for m in failures.values())
    return GapReport(evidence, gset, failures, k_max, m_max, inconclusive)


# ---------------------------------------------------------------------------
# the classifier


@dataclass
class Verdict3:
    """Complexity class with the evidence that drove the decision."""

    klass: str  # "NP" | "coNP-complete" | "Pi2p-hard"
    egp_pair: Optional[tuple[frozenset, frozenset]]
    gset: Optional[GsetWitness]
    switch_evidence: Optional[powers.PerLengthVerdict] = None

    def as_report(self) -> dict:
        out = {"class": self.klass}
        if self.egp_pair is not None:
            out["alpha"] = sorted(self.egp_pair[0])
            out["beta"] = sorted(self.egp_pair[1])
        if self.gset is not None:
            out["gset_subalgebra"] = sorted(self.gset.subalgebra)
            out["gset_partition"] = [sorted(b) for b in self.gset.partition.blocks]
        if self.switch_evidence is not None:
            out["switch_k"] = self.switch_evidence.k
            out["switch_generates"] = {
                str(m): v for m, v in self.switch_evidence.verdicts.items()
            }
        return out


def classify3(
    algebra: Algebra,
    switch_k: int = 2,
    switch_m_max: int = 4,
    budget: Optional[powers.PowersBudget] = None,
) -> Verdict3:
    """Decision tree for 3-element idempotent algebras.

    The positive branch attaches a bounded switching probe as evidence; the
    other branches attach the covering pair and, for the hard branch, the
    permutational factor.
    """
    if algebra.domain.size != 3:
        raise ValidationError("the classifier is for 3-element algebras")
    if not algebra.is_idempotent():
        raise ValidationError("the classifier is for idempotent algebras")
    pair = clone.egp_test(algebra)
    if pair is None:
        evidence = powers.is_k_switchable(algebra, switch_k, switch_m_max, budget)
        return Verdict3("NP", None, None, evidence)
    gset = has_gset_factor(algebra)
    if gset is None:
        return Verdict3("coNP-complete", pair, None)
    return Verdict3("Pi2p-hard", pair, gset)


# ---------------------------------------------------------------------------
# collapsibility certificates from the near-unanimity-like families


@dataclass
class CollapseCertificate:
    """A family member preserving every relation of the finite reduct, with
    its derived source: arity-1 collapsing starts from that singleton."""

    family: str
    n: int
    op: OpTable
    source: int
    collapse_parameter: int


def collapsibility_certificates(
    delta: Structure, algebra: Optional[Algebra] = None
) -> Optional[CollapseCertificate]:
    """Try the four operation families at the arity suggested by the reduct;
    return the first preserving every relation, or None.

    When an algebra is supplied, the reduct is first checked to be invariant
    under it (a sanity guard, not part of the search).
    """
    if algebra is not None:
        for name, rel in delta.relations.items():
            for op_name, op in algebra.ops.items():
                if not clone.preserves(op, rel):
                    raise ValidationError(
                        f"relation {name!r} is not invariant under {op_name!r}"
                    )
    max_arity = max((rel.arity for rel in delta.relations.values()), default=1)
    n_flat = max(3, max_arity)
    n_hat = max(2, max_arity - 1)
    candidates = [
        ("f_a_n", n_flat, clone.build_f_a_n(n_flat), 1),
        ("f_b_n", n_flat, clone.build_f_b_n(n_flat), 0),
        ("f_hat_a_n", n_hat, clone.build_f_hat_a_n(n_hat), 1),
        ("f_hat_b_n", n_hat, clone.build_f_hat_b_n(n_hat), 0),
    ]
    for family, n, op, source in candidates:
        if all(clone.preserves(op, rel) for rel in delta.relations.values()):
            return CollapseCertificate(family, n, op, source, op.arity - 1)
    return None
