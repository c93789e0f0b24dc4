"""Instrumented query layer for value and independence oracles.

Every oracle access made by an algorithm goes through one of the three batch
functions below.  A batch is one adaptive round: all of its inputs are fixed
before any output is returned, so queries inside a batch cannot depend on each
other.  Rounds and queries are tallied on a :class:`RunLedger`.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "TOL",
    "RunLedger",
    "SubmodularOracle",
    "IndependenceSystem",
    "DomainError",
    "NegativeValueError",
    "as_set",
    "value_batch",
    "marginal_batch",
    "feasible_batch",
    "extension_batch",
]

# absolute tolerance for comparing real values
TOL = 1e-9

EMPTY: frozenset = frozenset()


class DomainError(ValueError):
    """An element outside the ground set was passed to an oracle."""


class NegativeValueError(ArithmeticError):
    """A value oracle returned f(S) < 0 while non-negativity checks were on."""


def as_set(items: Iterable[int], n: int) -> frozenset:
    """Validate ``items`` against a ground set of size ``n`` and freeze them."""
    s = frozenset(int(e) for e in items)
    for e in s:
        if e < 0 or e >= n:
            raise DomainError(f"element {e} outside ground set [0, {n})")
    return s


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SUBOPT_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class RunLedger:
    """Counters for one algorithm run.

    Value and independence accounting are kept apart: a round of value queries
    and a round of feasibility queries are charged to different counters.
    """

    value_queries: int = 0
    value_rounds: int = 0
    indep_queries: int = 0
    indep_rounds: int = 0
    # whether this run has already paid for f(empty set)
    empty_charged: bool = field(default=False, repr=False, compare=False)

    def snapshot(self) -> dict:
        return {"value_queries": self.value_queries, "value_rounds": self.value_rounds,
                "indep_queries": self.indep_queries, "indep_rounds": self.indep_rounds}

    def charge_value(self, queries: int) -> None:
        # a batch fully answered from cache never reached the oracle
        if queries > 0:
            self.value_queries += queries
            self.value_rounds += 1

    def charge_indep(self, queries: int) -> None:
        if queries > 0:
            self.indep_queries += queries
            self.indep_rounds += 1


class SubmodularOracle:
    """Base class for non-negative submodular set functions over ``range(n)``.

    Subclasses implement :meth:`evaluate`.  They may override
    :meth:`evaluate_many` or :meth:`marginals` with vectorised versions; the
    batch layer only ever calls those three methods.
    """

    #: raise NegativeValueError when a query returns f(S) < -TOL
    check_nonnegative = False

    def __init__(self, n: int):
        if n < 0:
            raise ValueError("ground set size must be non-negative")
        self.n = int(n)
        self._f_empty: float | None = None

    def evaluate(self, S: frozenset) -> float:
        raise NotImplementedError

    def evaluate_many(self, sets: Sequence[frozenset]) -> list[float]:
        threads = _threads()
        if threads > 1 and len(sets) > 1:
            with ThreadPoolExecutor(threads) as pool:
                return list(pool.map(self.evaluate, sets))
        return [self.evaluate(S) for S in sets]

    def marginals(self, base: frozenset, candidates: Sequence[int]) -> tuple[float, list[float]]:
        """Return ``(f(base), [f(e | base) for e in candidates])``.

        Candidates are guaranteed not to be members of ``base``.
        """
        vals = self.evaluate_many([base] + [base | {e} for e in candidates])
        fb = vals[0]
        return fb, [v - fb for v in vals[1:]]

    def __call__(self, S: Iterable[int]) -> float:
        """Unmetered evaluation, for verification code and tests."""
        return self.evaluate(as_set(S, self.n))


class IndependenceSystem:
    """Base class for downward-closed families of feasible sets over ``range(n)``."""

    #: declared system parameter (p-system / p-extendible)
    p: int = 1

    def __init__(self, n: int):
        self.n = int(n)

    def is_feasible(self, S: frozenset) -> bool:
        raise NotImplementedError

    def is_feasible_many(self, sets: Sequence[frozenset]) -> list[bool]:
        return [self.is_feasible(S) for S in sets]

    def extensions_feasible(self, base: frozenset, candidates: Sequence[int]) -> list[bool]:
        """Verdicts for ``base + {e}`` for each candidate.

        Same answers as :meth:`is_feasible_many` on the explicit unions;
        subclasses vectorise it.
        """
        return self.is_feasible_many([base | {e} for e in candidates])

    def rank_bound(self) -> int:
        return self.n

    def __call__(self, S: Iterable[int]) -> bool:
        return self.is_feasible(as_set(S, self.n))


def _check_values(oracle: SubmodularOracle, values: Sequence[float]) -> None:
    if oracle.check_nonnegative:
        for v in values:
            if v < -TOL:
                raise NegativeValueError(f"{type(oracle).__name__} returned {v!r}")


def _empty_value(oracle: SubmodularOracle, ledger: RunLedger) -> tuple[float, int]:
    """f(empty set) and the number of queries to charge for it (0 or 1).

    The value is computed once per oracle; each ledger pays for it once, so
    a run's counts do not depend on what earlier runs asked.
    """
    if oracle._f_empty is None:
        oracle._f_empty = float(oracle.evaluate(EMPTY))
    if ledger.empty_charged:
        return oracle._f_empty, 0
    ledger.empty_charged = True
    return oracle._f_empty, 1


def value_batch(oracle: SubmodularOracle, sets: Sequence[Iterable[int]], ledger: RunLedger) -> list[float]:
    """Evaluate ``f`` on every set in ``sets`` as one adaptive round."""
    if len(sets) == 0:
        raise ValueError("empty batch")
    frozen = [as_set(S, oracle.n) for S in sets]
    todo = [i for i, S in enumerate(frozen) if S]
    out = [0.0] * len(frozen)
    queries = 0
    if len(todo) < len(frozen):
        fe, queries = _empty_value(oracle, ledger)
        for i, S in enumerate(frozen):
            if not S:
                out[i] = fe
    if todo:
        vals = oracle.evaluate_many([frozen[i] for i in todo])
        for i, v in zip(todo, vals):
            out[i] = float(v)
        queries += len(todo)
    _check_values(oracle, out)
    ledger.charge_value(queries)
    return out


def marginal_batch(
    oracle: SubmodularOracle,
    base: Iterable[int],
    candidates: Sequence[int],
    ledger: RunLedger,
    *,
    with_base: bool = False,
):
    """Marginal gains ``f(e | base)`` for every candidate, as one adaptive round.

    The base value costs one query unless the base is empty and ``f(empty)`` is
    already cached.  Candidates already in ``base`` get 0 without a query.
    With ``with_base=True`` returns ``(f(base), gains)``.
    """
    base = as_set(base, oracle.n)
    cands = [int(e) for e in candidates]
    for e in cands:
        if e < 0 or e >= oracle.n:
            raise DomainError(f"element {e} outside ground set [0, {oracle.n})")
    fresh = sorted(set(e for e in cands if e not in base))
    if not base:
        fb, queries = _empty_value(oracle, ledger)
        if fresh:
            singles = oracle.evaluate_many([frozenset((e,)) for e in fresh])
            gains = {e: float(v) - fb for e, v in zip(fresh, singles)}
            _check_values(oracle, singles)
        else:
            gains = {}
        queries += len(fresh)
    else:
        fb, g = oracle.marginals(base, fresh)
        fb = float(fb)
        gains = {e: float(v) for e, v in zip(fresh, g)}
        queries = 1 + len(fresh)
        if oracle.check_nonnegative:
            _check_values(oracle, [fb] + [fb + v for v in g])
    ledger.charge_value(queries)
    out = [gains.get(e, 0.0) for e in cands]
    return (fb, out) if with_base else out


def feasible_batch(system: IndependenceSystem, sets: Sequence[Iterable[int]], ledger: RunLedger) -> list[bool]:
    """Membership verdicts for every set in ``sets``, as one independence round."""
    if len(sets) == 0:
        raise ValueError("empty batch")
    frozen = [as_set(S, system.n) for S in sets]
    out = [bool(v) for v in system.is_feasible_many(frozen)]
    ledger.charge_indep(len(frozen))
    return out


def extension_batch(system: IndependenceSystem, base: Iterable[int], candidates: Sequence[int],
                    ledger: RunLedger) -> list[bool]:
    """Feasibility of ``base + {e}`` for every candidate, as one independence round.

    Equivalent to :func:`feasible_batch` on the explicit unions and charged
    identically (one query per candidate).
    """
    base = as_set(base, system.n)
    cands = [int(e) for e in candidates]
    if not cands:
        raise ValueError("empty batch")
    for e in cands:
        if e < 0 or e >= system.n:
            raise DomainError(f"element {e} outside ground set [0, {system.n})")
    out = [bool(v) for v in system.extensions_feasible(base, cands)]
    ledger.charge_indep(len(cands))
    return out


def indicator(S: Iterable[int], n: int) -> np.ndarray:
    x = np.zeros(n, dtype=bool)
    idx = list(S)
    if idx:
        x[idx] = True
    return x
