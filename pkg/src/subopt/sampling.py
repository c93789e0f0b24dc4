"""Adaptive-sampling maximisation under p-system and p-extendible constraints.

The building blocks, from the inside out:

``rand_sequence``
    random maximal feasible extension of a solution inside a candidate set,
    using only the independence oracle.
``binary_search_eta``
    longest prefix of such a sequence that keeps the thresholded candidate set
    from shrinking by more than a ``(1 - epsilon)`` factor.
``rand_sampling``
    threshold-decreasing loop that adds uniformly subsampled prefixes.
``rep_sampling``
    ``m`` repetitions of ``rand_sampling`` on disjoint pools, each paired with
    a uniformly subsampled copy; returns the best of the ``2m`` sets.

All value-oracle traffic goes through :func:`subopt.oracle.marginal_batch` and
friends, so the ledger counts adaptive rounds exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .oracle import (
    IndependenceSystem,
    RunLedger,
    SubmodularOracle,
    extension_batch,
    feasible_batch,
    marginal_batch,
    value_batch,
)

__all__ = [
    "SamplingParams",
    "RunResult",
    "MonotonicityError",
    "substream",
    "prefix_feasible_max",
    "rand_sequence",
    "unif_sampling",
    "threshold_candidates",
    "first_below",
    "binary_search_eta",
    "rand_sampling",
    "rep_sampling",
    "preset_p_system",
    "preset_p_extendible",
]

Trace = Callable[[dict], None]


class MonotonicityError(RuntimeError):
    """Candidate-set sizes grew along a sequence prefix.

    Cannot happen for a submodular oracle over a downward-closed system.
    """


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent counter-based generator for ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SamplingParams:
    epsilon: float
    m: int
    phi1: float
    phi2: float
    seed: int = 0
    lam: float | None = None

    def validate(self) -> "SamplingParams":
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")
        for name in ("phi1", "phi2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.lam is not None and self.lam <= 0:
            raise ValueError("lambda must be positive")
        return self

    def bind(self, p: int) -> "SamplingParams":
        """Fix ``lam = epsilon * (p + 1) / m`` for a system parameter ``p``."""
        if p < 1:
            raise ValueError("system parameter p must be >= 1")
        return replace(self, lam=self.epsilon * (p + 1) / self.m)


def _ceil_sqrt_half(q: int) -> int:
    """Exact ``ceil(sqrt(q / 2))`` for a non-negative integer ``q``."""
    c = math.isqrt(q // 2)
    while 2 * c * c < q:
        c += 1
    while c > 0 and 2 * (c - 1) * (c - 1) >= q:
        c -= 1
    return c


def preset_p_system(p: int, epsilon: float, seed: int = 0) -> SamplingParams:
    """``m = 1 + ceil(sqrt((p + 1) / 2))``, ``phi1 = 1``, ``phi2 = 1/2``."""
    if int(p) != p or p < 1:
        raise ValueError("p must be an integer >= 1")
    m = 1 + _ceil_sqrt_half(int(p) + 1)
    return SamplingParams(epsilon, m, 1.0, 0.5, seed).validate().bind(int(p))


def preset_p_extendible(p: int, epsilon: float, seed: int = 0) -> SamplingParams:
    """``m = 1``, ``phi1 = 1/(p + 1)``, ``phi2 = 1``."""
    if int(p) != p or p < 1:
        raise ValueError("p must be an integer >= 1")
    return SamplingParams(epsilon, 1, 1.0 / (p + 1), 1.0, seed).validate().bind(int(p))


@dataclass
class RunResult:
    solution: frozenset
    value: float
    ledger: RunLedger
    per_iteration: list = field(default_factory=list)
    omegas: list = field(default_factory=list)
    lambdas: list = field(default_factory=list)
    params: SamplingParams | None = None


# -- independence-only subroutines -------------------------------------------

def prefix_feasible_max(sequence: Sequence[int], S: Iterable[int], system: IndependenceSystem,
                        ledger: RunLedger) -> int:
    """Largest ``j`` with ``S + sequence[:j]`` feasible.

    Binary search over the prefix length; downward closure makes prefix
    feasibility monotone.  One single-query independence round per probe.
    """
    S = frozenset(S)
    lo, hi = 0, len(sequence)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        (ok,) = feasible_batch(system, [S.union(sequence[:mid])], ledger)
        if ok:
            lo = mid
        else:
            hi = mid - 1
    return lo


def rand_sequence(X: Iterable[int], S: Iterable[int], system: IndependenceSystem,
                  rng: np.random.Generator, ledger: RunLedger) -> list[int]:
    """Random sequence ``A`` such that ``S + A`` is maximal feasible within ``S + X``.

    Repeatedly shuffles the surviving candidates, keeps the longest feasible
    prefix and drops candidates that can no longer be added.  Issues no
    value queries.
    """
    S = frozenset(S)
    X = sorted(set(X) - S)
    A: list[int] = []
    while X:
        order = [X[i] for i in rng.permutation(len(X))]
        eta = prefix_feasible_max(order, S.union(A), system, ledger)
        A.extend(order[:eta])
        current = S.union(A)
        rest = [e for e in X if e not in current]
        if not rest:
            break
        ok = extension_batch(system, current, rest, ledger)
        X = [e for e, good in zip(rest, ok) if good]
    return A


def unif_sampling(A: Sequence[int], phi: float, rng: np.random.Generator) -> list[int]:
    """Keep each element of ``A`` independently with probability ``phi``."""
    if not 0.0 <= phi <= 1.0:
        raise ValueError("phi must lie in [0, 1]")
    A = list(A)
    keep = rng.random(len(A)) < phi
    return [e for e, k in zip(A, keep) if k]


# -- value-oracle subroutines ------------------------------------------------

def _filter(oracle, system, base: frozenset, pool: Sequence[int], delta: float, ledger):
    """Thresholded candidate set w.r.t. ``base``: one value round + one independence round.

    Returns ``(f(base), members)``.
    """
    cand = [e for e in pool if e not in base]
    if not cand:
        fb, _ = marginal_batch(oracle, base, [], ledger, with_base=True)
        return fb, []
    fb, gains = marginal_batch(oracle, base, cand, ledger, with_base=True)
    ok = extension_batch(system, base, cand, ledger)
    return fb, [e for e, g, good in zip(cand, gains, ok) if good and g >= delta]


def threshold_candidates(oracle: SubmodularOracle, system: IndependenceSystem, S: Iterable[int],
                         delta: float, pool: Iterable[int], ledger: RunLedger) -> frozenset:
    """``{e in pool : f(e | S) >= delta and S + e feasible}``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return frozenset(_filter(oracle, system, frozenset(S), sorted(pool), delta, ledger)[1])


def first_below(size_at: Callable[[int], int], t: int, threshold: float,
                on_probe: Callable[[int, int], None] | None = None) -> int:
    """Minimal ``j`` in ``1..t`` with ``size_at(j) < threshold``, or ``t + 1``.

    ``size_at`` must be non-increasing in ``j``.  ``t + 1`` is never probed.
    """
    lo, hi = 1, t + 1
    while lo < hi:
        mid = (lo + hi) // 2
        size = size_at(mid)
        if on_probe is not None:
            on_probe(mid, size)
        if size < threshold:
            hi = mid
        else:
            lo = mid + 1
    return lo


def _eta_search(oracle, system, S: frozenset, seq: Sequence[int], X: Sequence[int], delta: float,
                epsilon: float, ledger):
    """Binary search for the shrink index; returns ``(eta, X_eta, f(S + seq[:eta-1]))``."""
    probes: dict[int, tuple[float, list[int]]] = {}

    def probe(j: int) -> tuple[float, list[int]]:
        if j not in probes:
            base = S.union(seq[: j - 1])
            probes[j] = _filter(oracle, system, base, X, delta, ledger)
        return probes[j]

    seen: dict[int, int] = {}

    def check(j: int, size: int) -> None:
        seen[j] = size
        for i, s in seen.items():
            if (i < j and s < size) or (i > j and s > size):
                raise MonotonicityError(
                    f"|X_{i}| = {s} and |X_{j}| = {size} violate prefix monotonicity")

    t = len(seq)
    eta = first_below(lambda j: len(probe(j)[1]), t, (1.0 - epsilon) * len(X), check)
    fb, X_eta = probe(eta)
    if eta not in seen:
        check(eta, len(X_eta))
    return eta, X_eta, fb


def binary_search_eta(oracle: SubmodularOracle, system: IndependenceSystem, S: Iterable[int],
                      sequence: Sequence[int], X: Iterable[int], delta: float, epsilon: float,
                      ledger: RunLedger) -> int:
    """Smallest ``j`` such that fewer than ``(1 - epsilon)|X|`` candidates survive the prefix ``a_1..a_{j-1}``.

    Returns ``len(sequence) + 1`` when no prefix shrinks the candidate set
    enough.  Each probe costs one value round and one independence round.
    """
    X = sorted(X)
    if not X:
        raise ValueError("candidate set must be non-empty")
    return _eta_search(oracle, system, frozenset(S), list(sequence), X, delta, epsilon, ledger)[0]


def _rand_sampling(oracle, pool, system, lam, epsilon, phi1, rng, ledger, trace=None, tag=0,
                   debug=False):
    """Core loop; returns ``(S, f(S) or None if not yet queried)``."""
    pool = sorted(set(pool))
    if not pool:
        return frozenset(), None
    f0, gains = marginal_batch(oracle, frozenset(), pool, ledger, with_base=True)
    ok = extension_batch(system, frozenset(), pool, ledger)
    best = None
    for e, g, good in zip(pool, gains, ok):
        if good and (best is None or g > best):
            best = g
    if best is None or best <= 0:
        return frozenset(), f0

    delta = best
    delta0 = lam * delta
    X = [e for e, g, good in zip(pool, gains, ok) if good and g >= delta]
    S: frozenset = frozenset()
    fS: float | None = f0
    level = 0
    while delta >= delta0:
        if trace is not None:
            trace({"event": "level", "iteration": tag, "level": level, "delta": delta,
                   "x_size": len(X), "s_size": len(S), "ledger": ledger.snapshot()})
        step = 0
        while X:
            seq = rand_sequence(X, S, system, rng, ledger)
            eta, X_eta, f_prefix = _eta_search(oracle, system, S, seq, X, delta, epsilon, ledger)
            prefix = seq[: eta - 1]
            A = unif_sampling(prefix, phi1, rng)
            if trace is not None:
                trace({"event": "inner", "iteration": tag, "level": level, "step": step,
                       "delta": delta, "x_size": len(X), "x": sorted(X), "t": len(seq), "eta": eta,
                       "a_size": len(A), "added": sorted(A), "x_next_size": len(X_eta),
                       "ledger": ledger.snapshot()})
            if A:
                fS = f_prefix if len(A) == len(prefix) else None
                S = S.union(A)
                if debug:
                    assert system.is_feasible(S), "infeasible intermediate solution"
            X = X_eta
            step += 1
        delta *= 1.0 - epsilon
        if delta < delta0:
            break
        fS, X = _filter(oracle, system, S, pool, delta, ledger)
        level += 1
    return S, fS


def rand_sampling(oracle: SubmodularOracle, pool: Iterable[int], system: IndependenceSystem,
                  lam: float, epsilon: float, phi1: float, rng: np.random.Generator,
                  ledger: RunLedger, trace: Trace | None = None, debug: bool = False) -> frozenset:
    """Threshold-sampling pass over ``pool``; returns a feasible set.

    The threshold starts at the best feasible singleton value and decays by
    ``(1 - epsilon)`` down to ``lam`` times that value.  At each threshold,
    random feasible sequences are drawn from the candidates whose marginal
    clears the threshold, and the prefix before the candidate set collapses
    is added after independent ``phi1``-subsampling.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    return _rand_sampling(oracle, pool, system, lam, epsilon, phi1, rng, ledger, trace, 0, debug)[0]


def rep_sampling(oracle: SubmodularOracle, system: IndependenceSystem, params: SamplingParams,
                 ledger: RunLedger | None = None, *, p: int | None = None,
                 pool: Iterable[int] | None = None, trace: Trace | None = None,
                 debug: bool = False) -> RunResult:
    """Repeated sampling: best of ``m`` disjoint threshold-sampling solutions and their subsamples.

    ``p`` overrides ``system.p`` when computing ``lam``; an explicit
    ``params.lam`` takes precedence over both.
    """
    params.validate()
    if params.lam is None:
        params = params.bind(system.p if p is None else p)
    if params.lam >= 1.0:
        warnings.warn(f"lambda = {params.lam:g} >= 1 leaves at most one threshold level",
                      RuntimeWarning, stacklevel=2)
    ledger = RunLedger() if ledger is None else ledger
    remaining = set(range(oracle.n)) if pool is None else set(pool)

    omegas, lambdas, known = [], [], []
    for j in range(params.m):
        S, fS = _rand_sampling(oracle, remaining, system, params.lam, params.epsilon, params.phi1,
                               substream(params.seed, j, 0), ledger, trace, j, debug)
        Lam = frozenset(unif_sampling(sorted(S), params.phi2, substream(params.seed, j, 1)))
        omegas.append(S)
        lambdas.append(Lam)
        known.append(fS)
        remaining -= S

    # Λ_j values and any Ω_j value not already seen, in one round
    need = []
    for j in range(params.m):
        if known[j] is None:
            need.append(omegas[j])
        if lambdas[j] != omegas[j]:
            need.append(lambdas[j])
    vals = dict(zip(need, value_batch(oracle, need, ledger))) if need else {}
    per_iteration = []
    for j in range(params.m):
        fo = known[j] if known[j] is not None else vals[omegas[j]]
        fl = fo if lambdas[j] == omegas[j] else vals[lambdas[j]]
        per_iteration.append((fo, fl))

    best_j, best_val, best_set = 0, -math.inf, frozenset()
    for j, (fo, fl) in enumerate(per_iteration):
        if fo > best_val:
            best_j, best_val, best_set = j, fo, omegas[j]
        if fl > best_val:
            best_j, best_val, best_set = j, fl, lambdas[j]
    (value,) = value_batch(oracle, [best_set], ledger)
    if debug:
        assert system.is_feasible(best_set)
    return RunResult(best_set, value, ledger, per_iteration, omegas, lambdas, params)
