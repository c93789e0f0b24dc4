"""Greedy-family comparators that only need an independence oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .oracle import IndependenceSystem, RunLedger, SubmodularOracle, extension_batch, marginal_batch

__all__ = ["GreedyConfig", "greedy", "repeated_greedy", "sample_greedy", "greedy_with_value"]


@dataclass(frozen=True)
class GreedyConfig:
    sample_probability: float | None = None
    iterations: int | None = None

    def resolve(self, p: int) -> "GreedyConfig":
        """Fill unset fields with ``1/(p+1)`` and ``ceil(sqrt(p)) + 1``."""
        prob = 1.0 / (p + 1) if self.sample_probability is None else self.sample_probability
        its = math.isqrt(p - 1) + 2 if self.iterations is None else self.iterations
        if not 0.0 <= prob <= 1.0:
            raise ValueError("sample probability must lie in [0, 1]")
        if its < 1:
            raise ValueError("iterations must be >= 1")
        return GreedyConfig(prob, its)


def greedy_with_value(oracle: SubmodularOracle, system: IndependenceSystem, pool: Iterable[int],
                      ledger: RunLedger) -> tuple[frozenset, float]:
    """Greedy returning ``(S, f(S))``; ``f(S)`` comes from the last marginal round."""
    S: frozenset = frozenset()
    remaining = sorted(set(pool))
    fS = None
    while remaining:
        fS, gains = marginal_batch(oracle, S, remaining, ledger, with_base=True)
        ok = extension_batch(system, S, remaining, ledger)
        best, best_gain = None, 0.0
        for e, g, good in zip(remaining, gains, ok):
            # ties broken towards the lowest id by strict comparison in id order
            if good and g > best_gain:
                best, best_gain = e, g
        if best is None:
            break
        S = S | {best}
        fS = fS + best_gain
        # once infeasible, always infeasible for supersets
        remaining = [e for e, good in zip(remaining, ok) if good and e != best]
    if fS is None:
        fS, _ = marginal_batch(oracle, S, [], ledger, with_base=True)
    return S, fS


def greedy(oracle: SubmodularOracle, system: IndependenceSystem, pool: Iterable[int] | None = None,
           ledger: RunLedger | None = None) -> frozenset:
    """Add the feasible element of largest positive marginal until none remains.

    One value round per accepted element plus a final round that finds no
    improvement, so the adaptivity grows linearly with the solution size.
    """
    ledger = RunLedger() if ledger is None else ledger
    pool = range(oracle.n) if pool is None else pool
    return greedy_with_value(oracle, system, pool, ledger)[0]


def repeated_greedy(oracle: SubmodularOracle, system: IndependenceSystem, iterations: int | None = None,
                    ledger: RunLedger | None = None, pool: Iterable[int] | None = None) -> frozenset:
    """Run greedy, remove its solution from the pool, repeat; keep the best.

    ``iterations`` defaults to ``ceil(sqrt(p)) + 1``.
    """
    iterations = GreedyConfig(iterations=iterations).resolve(system.p).iterations
    ledger = RunLedger() if ledger is None else ledger
    remaining = set(range(oracle.n) if pool is None else pool)
    best, best_val = frozenset(), -math.inf
    for _ in range(iterations):
        S, fS = greedy_with_value(oracle, system, remaining, ledger)
        if fS > best_val:
            best, best_val = S, fS
        remaining -= S
        if not remaining:
            break
    return best


def sample_greedy(oracle: SubmodularOracle, system: IndependenceSystem, sample_probability: float | None,
                  rng: np.random.Generator, ledger: RunLedger | None = None) -> frozenset:
    """Greedy over an element-wise random subsample of the ground set.

    ``sample_probability`` defaults to ``1/(p+1)``.
    """
    prob = GreedyConfig(sample_probability=sample_probability).resolve(system.p).sample_probability
    ledger = RunLedger() if ledger is None else ledger
    keep = rng.random(oracle.n) < prob
    return greedy_with_value(oracle, system, np.flatnonzero(keep).tolist(), ledger)[0]
