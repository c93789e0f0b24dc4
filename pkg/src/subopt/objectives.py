"""Concrete submodular objectives.

Log-determinant (DPP summarisation), Gaussian entropy (D-optimal station
selection), graph cut, weighted coverage and modular weights.  All objects are
immutable after construction.
"""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np
import scipy.linalg as la

from .oracle import SubmodularOracle

__all__ = [
    "ENTROPY_CONST",
    "logdet_psd",
    "nonnegative_shift",
    "LogDetObjective",
    "EntropyObjective",
    "CutObjective",
    "CoverageObjective",
    "ModularObjective",
    "ZeroObjective",
    "ConstantObjective",
]

# per-station constant of the Gaussian entropy, (1 + ln 2 pi) / 2
ENTROPY_CONST = 0.5 * (1.0 + math.log(2.0 * math.pi))


def logdet_psd(M: np.ndarray, jitter: float = 0.0) -> float:
    """log det of a symmetric PSD matrix via Cholesky.

    On a failed factorisation the diagonal jitter is added, then grown by
    decades; as a last resort eigenvalues are clipped at the jitter floor.
    Never raises for square input.  The empty matrix has log det 0.
    """
    k = M.shape[0]
    if k == 0:
        return 0.0
    try:
        C = la.cholesky(M, lower=True, check_finite=False)
        return 2.0 * float(np.sum(np.log(np.diag(C))))
    except la.LinAlgError:
        pass
    jit = jitter if jitter > 0 else 1e-12
    di = np.diag_indices(k)
    for _ in range(8):
        A = M.copy()
        A[di] += jit
        try:
            C = la.cholesky(A, lower=True, check_finite=False)
            return 2.0 * float(np.sum(np.log(np.diag(C))))
        except la.LinAlgError:
            jit *= 10.0
    w = np.linalg.eigvalsh(M)
    return float(np.sum(np.log(np.maximum(w, jitter if jitter > 0 else 1e-12))))


def nonnegative_shift(M: np.ndarray, exact_limit: int = 14) -> float:
    """Smallest per-element shift ``s >= 0`` with ``logdet(M_S) + s|S| >= 0`` for all S.

    Exact by enumeration up to ``exact_limit`` elements; above that the
    eigenvalue bound ``-ln lambda_min`` is returned, which is sufficient but
    usually larger than needed.
    """
    n = M.shape[0]
    if n == 0:
        return 0.0
    if n <= exact_limit:
        worst = 0.0
        for size in range(1, n + 1):
            for S in itertools.combinations(range(n), size):
                idx = np.array(S)
                v = logdet_psd(M[np.ix_(idx, idx)])
                worst = max(worst, -v / size)
        return worst
    lam = float(np.linalg.eigvalsh(M)[0])
    return max(0.0, -math.log(max(lam, 1e-300)))


class _PSDObjective(SubmodularOracle):
    """Shared machinery for objectives built on ``logdet`` of principal submatrices."""

    def __init__(self, M, *, jitter: float | None = None, fast_marginals: bool = True):
        M = np.array(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("matrix must be square")
        if not np.allclose(M, M.T, atol=1e-9, rtol=0):
            raise ValueError("matrix must be symmetric")
        super().__init__(M.shape[0])
        M = 0.5 * (M + M.T)
        M.setflags(write=False)
        self.matrix = M
        n = max(self.n, 1)
        self.jitter = 1e-9 * float(np.trace(M)) / n if jitter is None else float(jitter)
        self.fast_marginals = fast_marginals

    def _logdet(self, S) -> float:
        if not S:
            return 0.0
        idx = np.fromiter(sorted(S), dtype=np.intp, count=len(S))
        return logdet_psd(self.matrix[np.ix_(idx, idx)], self.jitter)

    def _logdet_gains(self, base, candidates):
        """Return ``(logdet(M_base), [log of Schur complements])`` or ``None``.

        Cached-Cholesky path for marginals; ``None`` when the base factor does
        not exist without jitter, in which case callers use direct evaluation.
        """
        idx = np.fromiter(sorted(base), dtype=np.intp, count=len(base))
        try:
            C = la.cholesky(self.matrix[np.ix_(idx, idx)], lower=True, check_finite=False)
        except la.LinAlgError:
            return None
        base_ld = 2.0 * float(np.sum(np.log(np.diag(C))))
        if not candidates:
            return base_ld, np.zeros(0)
        cand = np.asarray(candidates, dtype=np.intp)
        B = la.solve_triangular(C, self.matrix[np.ix_(idx, cand)], lower=True, check_finite=False)
        schur = self.matrix[cand, cand] - np.einsum("ij,ij->j", B, B)
        out = np.empty(len(cand))
        ok = schur > 1e-10 * np.maximum(self.matrix[cand, cand], 1e-300)
        out[ok] = np.log(schur[ok])
        for i in np.flatnonzero(~ok):
            out[i] = self._logdet(base | {int(cand[i])}) - base_ld
        return base_ld, out


class LogDetObjective(_PSDObjective):
    """``f(S) = log det L_S + shift * |S|`` for a PSD kernel ``L``.

    ``shift`` is a modular offset chosen so that the instance is non-negative
    (see :func:`nonnegative_shift`); it does not affect submodularity.

    >>> f = LogDetObjective([[2.0, 1.0], [1.0, 2.0]])
    >>> round(f([0, 1]), 4)
    1.0986
    """

    def __init__(self, L, shift: float = 0.0, **kw):
        super().__init__(L, **kw)
        self.shift = float(shift)

    @property
    def kernel(self) -> np.ndarray:
        return self.matrix

    def evaluate(self, S) -> float:
        return self._logdet(S) + self.shift * len(S)

    def marginals(self, base, candidates):
        if self.fast_marginals:
            res = self._logdet_gains(base, candidates)
            if res is not None:
                ld, g = res
                return ld + self.shift * len(base), list(g + self.shift)
        return super().marginals(base, candidates)


class EntropyObjective(_PSDObjective):
    """Differential entropy of a Gaussian restricted to the stations in ``S``.

    ``H(S) = (1 + ln 2 pi)/2 * |S| + 1/2 * ln det Sigma_S``.  Non-monotone
    once a new station is nearly determined by those already chosen.
    """

    def __init__(self, cov, **kw):
        super().__init__(cov, **kw)

    @property
    def covariance(self) -> np.ndarray:
        return self.matrix

    def evaluate(self, S) -> float:
        return ENTROPY_CONST * len(S) + 0.5 * self._logdet(S)

    def marginals(self, base, candidates):
        if self.fast_marginals:
            res = self._logdet_gains(base, candidates)
            if res is not None:
                ld, g = res
                return ENTROPY_CONST * len(base) + 0.5 * ld, list(ENTROPY_CONST + 0.5 * g)
        return super().marginals(base, candidates)


class CutObjective(SubmodularOracle):
    """Weighted undirected cut: total weight of edges with one endpoint in S."""

    def __init__(self, n: int, edges: Sequence[tuple[int, int, float]]):
        super().__init__(n)
        W = np.zeros((n, n))
        for u, v, w in edges:
            u, v, w = int(u), int(v), float(w)
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) outside vertex range")
            if not math.isfinite(w) or w < 0:
                raise ValueError(f"edge ({u}, {v}) has invalid weight {w}")
            W[u, v] += w
            W[v, u] += w
        W.setflags(write=False)
        self.weights = W
        self.degree = W.sum(axis=1)
        self.edges = [(int(u), int(v), float(w)) for u, v, w in edges]

    def evaluate(self, S) -> float:
        if not S:
            return 0.0
        x = np.zeros(self.n)
        x[list(S)] = 1.0
        return float(x @ self.weights @ (1.0 - x))

    def marginals(self, base, candidates):
        x = np.zeros(self.n)
        x[list(base)] = 1.0
        fb = float(x @ self.weights @ (1.0 - x))
        if not candidates:
            return fb, []
        cand = np.asarray(candidates, dtype=np.intp)
        inside = self.weights[cand] @ x
        return fb, list(self.degree[cand] - 2.0 * inside)


class CoverageObjective(SubmodularOracle):
    """Weighted coverage ``f(S) = w(union of items covered by S)``.

    ``covers[e]`` lists the universe items covered by element ``e``.
    """

    def __init__(self, covers: Sequence[Sequence[int]], weights: Sequence[float] | None = None,
                 universe: int | None = None):
        super().__init__(len(covers))
        lists = [np.unique(np.asarray(c, dtype=np.intp)) for c in covers]
        top = max((int(c.max()) + 1 for c in lists if c.size), default=0)
        if universe is None:
            universe = top if weights is None else len(weights)
        if top > universe:
            raise ValueError("cover lists reference items outside the universe")
        if weights is None:
            weights = np.ones(universe)
        w = np.asarray(weights, dtype=float)
        if w.shape != (universe,) or np.any(w < 0):
            raise ValueError("universe weights must be non-negative, one per item")
        self.universe = universe
        self.item_weights = w
        self.indptr = np.zeros(self.n + 1, dtype=np.intp)
        self.indptr[1:] = np.cumsum([c.size for c in lists])
        self.indices = np.concatenate(lists) if lists else np.zeros(0, dtype=np.intp)
        self._rows = np.repeat(np.arange(self.n), np.diff(self.indptr))

    def items(self, e: int) -> np.ndarray:
        return self.indices[self.indptr[e]:self.indptr[e + 1]]

    def _covered(self, S) -> np.ndarray:
        cov = np.zeros(self.universe, dtype=bool)
        for e in S:
            cov[self.items(e)] = True
        return cov

    def evaluate(self, S) -> float:
        return float(self.item_weights[self._covered(S)].sum())

    def marginals(self, base, candidates):
        cov = self._covered(base)
        fb = float(self.item_weights[cov].sum())
        if not candidates:
            return fb, []
        free = np.where(cov, 0.0, self.item_weights)
        gains = np.bincount(self._rows, weights=free[self.indices], minlength=self.n)
        return fb, gains[np.asarray(candidates, dtype=np.intp)].tolist()


class ModularObjective(SubmodularOracle):
    """``f(S) = sum of w_e over S`` with non-negative weights."""

    def __init__(self, weights: Sequence[float]):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or np.any(w < 0):
            raise ValueError("modular weights must be a non-negative vector")
        super().__init__(w.size)
        self.weights = w

    def evaluate(self, S) -> float:
        return float(sum(self.weights[e] for e in sorted(S)))

    def marginals(self, base, candidates):
        return self.evaluate(base), [float(self.weights[e]) for e in candidates]


class ConstantObjective(SubmodularOracle):
    """``f(S) = c`` for every S."""

    def __init__(self, n: int, c: float = 0.0):
        super().__init__(n)
        if c < 0:
            raise ValueError("constant must be non-negative")
        self.c = float(c)

    def evaluate(self, S) -> float:
        return self.c


def ZeroObjective(n: int) -> ConstantObjective:
    return ConstantObjective(n, 0.0)
