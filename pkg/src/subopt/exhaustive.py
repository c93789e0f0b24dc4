"""Brute-force optima and Monte-Carlo estimates for verification.

Nothing here touches a :class:`~subopt.oracle.RunLedger`; oracles are
evaluated directly so that checking an algorithm does not pollute its cost
accounting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .constraints import Unconstrained
from .oracle import IndependenceSystem, SubmodularOracle

__all__ = [
    "MAX_BRUTE_FORCE",
    "BruteForceResult",
    "MonteCarloEstimate",
    "brute_force_opt",
    "estimate_expected_value",
    "quarter_sampling_check",
]

MAX_BRUTE_FORCE = 22


@dataclass(frozen=True)
class BruteForceResult:
    opt_set: frozenset
    opt_value: float
    feasible_count: int
    visited: int


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    stderr: float
    trials: int
    seed_base: int
    reference: float | None = None

    def at_least(self, bound: float, sigmas: float = 3.0) -> bool:
        """``mean >= bound - sigmas * stderr``."""
        return self.mean >= bound - sigmas * self.stderr


def brute_force_opt(oracle: SubmodularOracle, system: IndependenceSystem | None = None,
                    pool: Iterable[int] | None = None) -> BruteForceResult:
    """Enumerate every subset of ``pool`` and return the best feasible one.

    Subsets are visited in increasing bitmask order over the sorted pool, and
    only a strictly better value replaces the incumbent, so ties go to the
    earliest mask (the empty set first).
    """
    pool = sorted(set(range(oracle.n) if pool is None else pool))
    if len(pool) > MAX_BRUTE_FORCE:
        raise ValueError(f"refusing to enumerate 2^{len(pool)} subsets (limit {MAX_BRUTE_FORCE})")
    system = Unconstrained(oracle.n) if system is None else system
    best, best_val = None, -math.inf
    feasible = visited = 0
    for mask in range(1 << len(pool)):
        visited += 1
        S = frozenset(pool[i] for i in range(len(pool)) if mask >> i & 1)
        if not system.is_feasible(S):
            continue
        feasible += 1
        v = oracle.evaluate(S)
        if v > best_val:
            best, best_val = S, v
    return BruteForceResult(best, float(best_val), feasible, visited)


def _aggregate(values, trials, seed_base, reference=None) -> MonteCarloEstimate:
    x = np.asarray(values, dtype=float)
    se = float(x.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return MonteCarloEstimate(float(x.mean()), se, trials, seed_base, reference)


def estimate_expected_value(runner: Callable[[int], float], trials: int,
                            seed_base: int = 0) -> MonteCarloEstimate:
    """Mean and standard error of ``runner(seed)`` over ``seed_base .. seed_base + trials - 1``."""
    if trials < 1:
        raise ValueError("need at least one trial")
    return _aggregate([runner(seed_base + i) for i in range(trials)], trials, seed_base)


def quarter_sampling_check(oracle: SubmodularOracle, trials: int = 2000,
                           seed_base: int = 0) -> MonteCarloEstimate:
    """Estimate ``E[f(U)]`` for a uniformly random subset ``U``.

    ``reference`` on the result is a quarter of the unconstrained optimum,
    the value the mean should not fall below.
    """
    if oracle.n > 20:
        raise ValueError("quarter-sampling check needs the exact optimum; n <= 20")
    opt = brute_force_opt(oracle).opt_value
    vals = []
    for i in range(trials):
        rng = np.random.default_rng(seed_base + i)
        U = frozenset(np.flatnonzero(rng.random(oracle.n) < 0.5).tolist())
        vals.append(oracle.evaluate(U))
    return _aggregate(vals, trials, seed_base, opt / 4.0)
