"""Bundled 3-element algebras used across tests, samples and the benchmark
verbs: the semilattice-without-unit, its extension by the 4-ary switchable
operation, and the bare projection algebra."""

from __future__ import annotations

from .clone import switchable_r, semilattice_s
from .model import Algebra, Domain, projection


def semilattice_algebra() -> Algebra:
    d = Domain(3)
    return Algebra(d, {"s": semilattice_s(d)}, idempotent=True)


def switchable_algebra() -> Algebra:
    d = Domain(3)
    return Algebra(d, {"r": switchable_r(d), "s": semilattice_s(d)}, idempotent=True)


def projections_algebra(arity: int = 2) -> Algebra:
    d = Domain(3)
    ops = {f"e{i}": projection(d, arity, i) for i in range(arity)}
    return Algebra(d, ops, idempotent=True)
