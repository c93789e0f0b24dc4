"""Independence systems exposing a system parameter ``p`` and a rank bound."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .oracle import IndependenceSystem

__all__ = [
    "Unconstrained",
    "UniformMatroid",
    "PartitionMatroid",
    "MatroidIntersection",
    "GroupCapSystem",
    "estimate_p",
    "enumerate_feasible_masks",
]


class Unconstrained(IndependenceSystem):
    """Every subset is feasible."""

    p = 1

    def is_feasible(self, S) -> bool:
        return True

    def rank_bound(self) -> int:
        return self.n

    def __repr__(self):
        return f"Unconstrained(n={self.n})"


class UniformMatroid(IndependenceSystem):
    """``|S| <= k``."""

    p = 1

    def __init__(self, n: int, k: int):
        super().__init__(n)
        if k < 0:
            raise ValueError("cardinality cap must be non-negative")
        self.k = int(k)

    def is_feasible(self, S) -> bool:
        return len(S) <= self.k

    def rank_bound(self) -> int:
        return min(self.k, self.n)

    def extensions_feasible(self, base, candidates):
        return [len(base) + (e not in base) <= self.k for e in candidates]

    def __repr__(self):
        return f"UniformMatroid(n={self.n}, k={self.k})"


class PartitionMatroid(IndependenceSystem):
    """At most ``caps[j]`` elements from each disjoint block ``blocks[j]``.

    Elements outside every block are unconstrained.
    """

    p = 1

    def __init__(self, n: int, blocks: Sequence[Sequence[int]], caps: Sequence[int]):
        super().__init__(n)
        if len(blocks) != len(caps):
            raise ValueError("one cap per block required")
        self.block_of = np.full(n, -1, dtype=np.intp)
        for j, block in enumerate(blocks):
            for e in block:
                if not 0 <= e < n:
                    raise ValueError(f"block {j} element {e} outside ground set")
                if self.block_of[e] >= 0:
                    raise ValueError(f"element {e} appears in more than one block")
                self.block_of[e] = j
        if any(c < 0 for c in caps):
            raise ValueError("block caps must be non-negative")
        self.blocks = [sorted(int(e) for e in b) for b in blocks]
        self.caps = [int(c) for c in caps]

    def is_feasible(self, S) -> bool:
        if not S:
            return True
        b = self.block_of[list(S)]
        b = b[b >= 0]
        if b.size == 0:
            return True
        counts = np.bincount(b, minlength=len(self.caps))
        return bool(np.all(counts <= self.caps))

    def _counts(self, base) -> np.ndarray:
        b = self.block_of[list(base)] if base else np.zeros(0, dtype=np.intp)
        return np.bincount(b[b >= 0], minlength=len(self.caps))

    def extensions_feasible(self, base, candidates):
        counts = self._counts(base)
        caps = np.asarray(self.caps)
        if np.any(counts > caps):
            return [False] * len(candidates)
        out = []
        for e in candidates:
            b = self.block_of[e]
            out.append(bool(e in base or b < 0 or counts[b] < caps[b]))
        return out

    def rank_bound(self) -> int:
        free = int(np.sum(self.block_of < 0))
        return free + sum(min(c, len(b)) for b, c in zip(self.blocks, self.caps))

    def __repr__(self):
        return f"PartitionMatroid(n={self.n}, caps={self.caps})"


class MatroidIntersection(IndependenceSystem):
    """Sets feasible in every member matroid; ``p`` is the number of members."""

    def __init__(self, matroids: Sequence[IndependenceSystem]):
        if not matroids:
            raise ValueError("need at least one matroid")
        n = matroids[0].n
        if any(M.n != n for M in matroids):
            raise ValueError("member matroids must share a ground set")
        super().__init__(n)
        self.matroids = list(matroids)
        self.p = len(self.matroids)

    def is_feasible(self, S) -> bool:
        return all(M.is_feasible(S) for M in self.matroids)

    def rank_bound(self) -> int:
        return min(M.rank_bound() for M in self.matroids)

    def extensions_feasible(self, base, candidates):
        out = [True] * len(candidates)
        for M in self.matroids:
            out = [a and b for a, b in zip(out, M.extensions_feasible(base, candidates))]
        return out

    def __repr__(self):
        return f"MatroidIntersection({self.matroids!r})"


def estimate_p(groups: Sequence[Sequence[int]], caps: Sequence[int]) -> int:
    """Number of groups holding more elements than their cap, floored at 1."""
    return max(1, sum(1 for g, k in zip(groups, caps) if len(set(g)) > k))


class GroupCapSystem(IndependenceSystem):
    """``|S & V_i| <= k_i`` for possibly overlapping groups ``V_i``.

    ``p`` defaults to :func:`estimate_p`.  Groups that can never bind do not
    count towards it.
    """

    def __init__(self, n: int, groups: Sequence[Sequence[int]], caps: Sequence[int],
                 p: int | None = None):
        super().__init__(n)
        if len(groups) != len(caps):
            raise ValueError("one cap per group required")
        for i, g in enumerate(groups):
            for e in g:
                if not 0 <= e < n:
                    raise ValueError(f"group {i} element {e} outside ground set")
        if any(c < 0 for c in caps):
            raise ValueError("group caps must be non-negative")
        self.groups = [sorted(set(int(e) for e in g)) for g in groups]
        self.caps = [int(c) for c in caps]
        self.p = estimate_p(self.groups, self.caps) if p is None else int(p)
        self._member = np.zeros((len(self.groups), n), dtype=bool)
        for i, g in enumerate(self.groups):
            self._member[i, g] = True
        self._caps = np.asarray(self.caps)
        self._rank = None

    def is_feasible(self, S) -> bool:
        if not S or not self.groups:
            return True
        counts = self._member[:, list(S)].sum(axis=1)
        return bool(np.all(counts <= self._caps))

    def extensions_feasible(self, base, candidates):
        if not self.groups:
            return [True] * len(candidates)
        counts = self._member[:, list(base)].sum(axis=1) if base else np.zeros(len(self.groups), dtype=np.intp)
        if np.any(counts > self._caps):
            return [False] * len(candidates)
        cand = np.asarray(candidates, dtype=np.intp)
        full = counts >= self._caps
        blocked = np.any(self._member[:, cand] & full[:, None], axis=0)
        inside = np.array([e in base for e in candidates], dtype=bool)
        return (inside | ~blocked).tolist()

    def greedy_fill(self) -> list[int]:
        """A maximal feasible set built by scanning elements in index order."""
        counts = np.zeros(len(self.groups), dtype=np.intp)
        out = []
        for e in range(self.n):
            col = self._member[:, e]
            if np.all(counts[col] < self._caps[col]):
                counts[col] += 1
                out.append(e)
        return out

    def _exact_rank(self) -> int:
        # all 2^n subsets in chunks: group counts are bit-matrix products
        best = 0
        member = self._member.T.astype(np.int32)
        step = 1 << 16
        for start in range(0, 1 << self.n, step):
            m = np.arange(start, min(start + step, 1 << self.n), dtype=np.int64)
            bits = ((m[:, None] >> np.arange(self.n)) & 1).astype(np.int32)
            ok = np.all(bits @ member <= self._caps, axis=1)
            if ok.any():
                best = max(best, int(bits[ok].sum(axis=1).max()))
        return best

    def rank_bound(self) -> int:
        """Exact by enumeration for ``n <= 20``, else ``p`` times a greedy maximal set."""
        if self._rank is None:
            if not self.groups:
                self._rank = self.n
            elif self.n <= 20:
                self._rank = self._exact_rank()
            else:
                self._rank = min(self.n, self.p * len(self.greedy_fill()))
        return self._rank

    def __repr__(self):
        return f"GroupCapSystem(n={self.n}, groups={len(self.groups)}, p={self.p})"


def enumerate_feasible_masks(system: IndependenceSystem, assume_closed: bool = True) -> np.ndarray:
    """Boolean array over all ``2**n`` bitmasks: is the encoded set feasible?

    With ``assume_closed`` a set is only checked when every subset obtained by
    dropping one element is feasible; pass ``False`` to query every mask.
    """
    n = system.n
    if n > 22:
        raise ValueError("enumeration limited to n <= 22")
    N = 1 << n
    ok = np.zeros(N, dtype=bool)
    ok[0] = system.is_feasible(frozenset())
    if not assume_closed:
        for m in range(1, N):
            ok[m] = system.is_feasible(frozenset(i for i in range(n) if m >> i & 1))
        return ok
    if not ok[0]:
        return ok
    popcount = np.array([bin(m).count("1") for m in range(N)])
    for size in range(1, n + 1):
        for m in np.flatnonzero(popcount == size):
            m = int(m)
            bits = [i for i in range(n) if m >> i & 1]
            if all(ok[m ^ (1 << i)] for i in bits):
                ok[m] = system.is_feasible(frozenset(bits))
    return ok
