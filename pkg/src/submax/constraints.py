"""Hereditary set systems: cardinality, partition and graphic matroids, and
intersections of matroids (used as p-systems)."""

from __future__ import annotations

from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import ContractViolation, DomainError, InvalidConfiguration, PreconditionError

__all__ = [
    "Constraint",
    "Matroid",
    "PartitionMatroid",
    "UniformMatroid",
    "GraphicMatroid",
    "PSystem",
    "CallbackConstraint",
    "is_independent",
    "matroid_rank",
    "exchange_bijection",
    "in_matroid_polytope",
    "matroid_decomposition",
    "POLYTOPE_TOL",
]

POLYTOPE_TOL = 1e-9


def _members(S: Iterable[int]) -> list[int]:
    return sorted({int(e) for e in S})


def _marks(n: int, S: list[int]) -> np.ndarray:
    out = np.zeros(n, dtype=bool)
    out[S] = True
    return out


class Constraint:
    """Base class for hereditary independence systems on ``{0, ..., n-1}``."""

    kind = "hereditary"
    n: int

    def _check_range(self, S: Sequence[int]) -> None:
        if S and (S[0] < 0 or S[-1] >= self.n):
            raise PreconditionError(f"set {list(S)} not contained in the ground set of size {self.n}")

    def is_independent(self, S: Iterable[int]) -> bool:
        ms = _members(S)
        self._check_range(ms)
        return self._independent(ms)

    def _independent(self, S: list[int]) -> bool:
        raise NotImplementedError

    def addable(self, S: Iterable[int], cands: Sequence[int]) -> np.ndarray:
        """Mask of candidates ``e`` (not in ``S``) for which ``S + e`` is independent.

        ``S`` is assumed independent.
        """
        base = _members(S)
        inside = set(base)
        return np.array([e not in inside and self._independent(sorted(base + [int(e)]))
                         for e in cands], dtype=bool)

    @cached_property
    def k(self) -> int:
        """Size of the largest independent set."""
        return _max_independent_size(self)

    @property
    def is_matroid(self) -> bool:
        return False


def _max_independent_size(c: Constraint, limit: int = 20) -> int:
    if c.n > limit:
        raise PreconditionError(f"exact k needs n <= {limit} for a generic constraint")
    best = 0

    def dfs(start: int, chosen: list[int]):
        nonlocal best
        best = max(best, len(chosen))
        if len(chosen) + c.n - start <= best:
            return
        for e in range(start, c.n):
            chosen.append(e)
            if c._independent(chosen):
                dfs(e + 1, chosen)
            chosen.pop()

    dfs(0, [])
    return best


class Matroid(Constraint):
    """A matroid; ``rank`` is computed greedily."""

    @property
    def is_matroid(self) -> bool:
        return True

    def rank(self, S: Iterable[int]) -> int:
        chosen: list[int] = []
        ms = _members(S)
        self._check_range(ms)
        for e in ms:
            if self.addable(chosen, [e])[0]:
                chosen.append(e)
        return len(chosen)

    @cached_property
    def k(self) -> int:
        return self.rank(range(self.n))

    def max_weight_independent(self, weights) -> list[int]:
        """Greedy maximum-weight independent set over positive weights."""
        w = np.asarray(weights, dtype=float)
        order = sorted((e for e in range(self.n) if w[e] > 0), key=lambda e: (-w[e], e))
        chosen: list[int] = []
        for e in order:
            if self.addable(chosen, [e])[0]:
                chosen.append(e)
        return sorted(chosen)


class PartitionMatroid(Matroid):
    """At most ``capacities[j]`` elements from block ``j``.

    Elements outside every block are unconstrained.
    """

    kind = "partition-matroid"

    def __init__(self, n: int, blocks: Sequence[Iterable[int]], capacities: Sequence[int]):
        if len(blocks) != len(capacities):
            raise InvalidConfiguration("one capacity per block is required")
        self.n = int(n)
        self.block_of = np.full(self.n, -1, dtype=np.int64)
        self.blocks: list[list[int]] = []
        for j, blk in enumerate(blocks):
            ms = _members(blk)
            if ms and (ms[0] < 0 or ms[-1] >= self.n):
                raise InvalidConfiguration(f"block {j} has elements outside [0, {self.n})")
            if np.any(self.block_of[ms] >= 0):
                raise InvalidConfiguration(f"block {j} overlaps an earlier block")
            self.block_of[ms] = j
            self.blocks.append(ms)
        self.capacities = np.asarray(capacities, dtype=np.int64)
        if np.any(self.capacities < 0):
            raise InvalidConfiguration("block capacities must be >= 0")

    def _counts(self, S: Sequence[int]) -> np.ndarray:
        b = self.block_of[np.asarray(S, dtype=np.int64)]
        return np.bincount(b[b >= 0], minlength=len(self.blocks))

    def _independent(self, S):
        if not S:
            return True
        return bool(np.all(self._counts(S) <= self.capacities))

    def addable(self, S, cands):
        base = _members(S)
        cands = np.asarray(cands, dtype=np.int64)
        room = self.capacities - (self._counts(base) if base else 0)
        b = self.block_of[cands]
        ok = np.where(b >= 0, room[np.maximum(b, 0)] > 0 if len(self.blocks) else True, True)
        if base:
            ok &= ~_marks(self.n, base)[cands]
        return ok

    def rank(self, S):
        ms = _members(S)
        self._check_range(ms)
        if not ms:
            return 0
        b = self.block_of[np.asarray(ms)]
        free = int(np.sum(b < 0))
        counts = np.bincount(b[b >= 0], minlength=len(self.blocks))
        return free + int(np.minimum(counts, self.capacities).sum())

    def groups(self) -> list[tuple[list[int], int]]:
        """Blocks with capacities; every unconstrained element is its own block of capacity 1."""
        out = [(blk, int(c)) for blk, c in zip(self.blocks, self.capacities)]
        out.extend(([e], 1) for e in np.flatnonzero(self.block_of < 0).tolist())
        return out


class UniformMatroid(PartitionMatroid):
    """Cardinality constraint ``|S| <= k``."""

    kind = "cardinality"

    def __init__(self, n: int, k: int):
        if k < 0:
            raise InvalidConfiguration(f"cardinality bound must be >= 0, got {k}")
        super().__init__(n, [range(n)], [k])
        self.bound = int(k)

    def _independent(self, S):
        return len(S) <= self.bound

    def addable(self, S, cands):
        base = _members(S)
        cands = np.asarray(cands, dtype=np.int64)
        if len(base) >= self.bound:
            return np.zeros(cands.size, dtype=bool)
        return ~_marks(self.n, base)[cands] if base else np.ones(cands.size, dtype=bool)

    def rank(self, S):
        ms = _members(S)
        self._check_range(ms)
        return min(len(ms), self.bound)


class _UnionFind:
    def __init__(self):
        self.parent: dict[int, int] = {}

    def find(self, a: int) -> int:
        p = self.parent.setdefault(a, a)
        while p != self.parent[p]:
            self.parent[p] = self.parent[self.parent[p]]
            p = self.parent[p]
        self.parent[a] = p
        return p

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True


class GraphicMatroid(Matroid):
    """Elements are edges of a multigraph; independent sets are forests."""

    kind = "graphic-matroid"

    def __init__(self, edges: Sequence[tuple[int, int]]):
        self.edges = [(int(u), int(v)) for u, v in edges]
        self.n = len(self.edges)

    def _forest(self, S) -> _UnionFind | None:
        uf = _UnionFind()
        for e in S:
            u, v = self.edges[e]
            if not uf.union(u, v):
                return None
        return uf

    def _independent(self, S):
        return self._forest(S) is not None

    def addable(self, S, cands):
        base = _members(S)
        uf = self._forest(base)
        if uf is None:
            raise PreconditionError("addable called on a dependent set")
        inside = set(base)
        out = np.zeros(len(cands), dtype=bool)
        for j, e in enumerate(cands):
            u, v = self.edges[int(e)]
            out[j] = int(e) not in inside and uf.find(u) != uf.find(v)
        return out


class PSystem(Constraint):
    """Intersection of ``p`` matroids on a common ground set."""

    kind = "p-system"

    def __init__(self, members: Sequence[Matroid]):
        if not members:
            raise InvalidConfiguration("a p-system needs at least one member matroid")
        ns = {m.n for m in members}
        if len(ns) != 1:
            raise InvalidConfiguration("member matroids disagree on the ground set size")
        self.members = list(members)
        self.n = ns.pop()
        self.p = len(self.members)

    def _independent(self, S):
        return all(m._independent(S) for m in self.members)

    def addable(self, S, cands):
        ok = np.ones(len(cands), dtype=bool)
        for m in self.members:
            ok &= m.addable(S, cands)
        return ok

    @cached_property
    def k(self) -> int:
        if self.n <= 20:
            return _max_independent_size(self)
        return min(m.k for m in self.members)


class CallbackConstraint(Constraint):
    """Wraps a user independence predicate.  Heredity is trusted, not verified."""

    def __init__(self, n: int, predicate: Callable[[list[int]], bool], kind: str = "hereditary"):
        self.n = int(n)
        self.predicate = predicate
        self.kind = kind

    def _independent(self, S):
        return not S or bool(self.predicate(list(S)))


def is_independent(c: Constraint, S: Iterable[int]) -> bool:
    return c.is_independent(S)


def matroid_rank(mat: Matroid, S: Iterable[int]) -> int:
    return mat.rank(S)


def exchange_bijection(mat: Matroid, B1: Iterable[int], B2: Iterable[int]) -> dict[int, int]:
    """Bijection ``pi: B1 -> B2`` with ``B1 - e + pi(e)`` independent for all ``e``.

    ``B1`` and ``B2`` must be bases of the matroid restricted to their union.
    Common elements are fixed; the remaining pairing is the index-sorted one
    when that is valid, and otherwise a perfect matching of the exchange graph.
    """
    b1, b2 = _members(B1), _members(B2)
    if len(b1) != len(b2) or not mat.is_independent(b1) or not mat.is_independent(b2):
        raise PreconditionError("exchange_bijection needs two independent sets of equal size")
    if mat.rank(set(b1) | set(b2)) != len(b1):
        raise PreconditionError("sets are not bases of the matroid restricted to their union")
    common = set(b1) & set(b2)
    d1 = [e for e in b1 if e not in common]
    d2 = [e for e in b2 if e not in common]
    pi = {e: e for e in common}

    def ok(e, f):
        return mat._independent(sorted(set(b1) - {e} | {f}))

    if all(ok(e, f) for e, f in zip(d1, d2)):
        pi.update(zip(d1, d2))
        return pi
    rows, cols = [], []
    for i, e in enumerate(d1):
        for j, f in enumerate(d2):
            if ok(e, f):
                rows.append(i)
                cols.append(j)
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(d1), len(d2)))
    match = maximum_bipartite_matching(graph, perm_type="column")
    if np.any(match < 0):
        raise ContractViolation("exchange graph has no perfect matching; constraint is not a matroid")
    pi.update((d1[i], d2[int(match[i])]) for i in range(len(d1)))
    for e, f in pi.items():
        if not ok(e, f):
            raise ContractViolation(f"exchange {e} -> {f} is not independent")
    return pi


def _level_set_check(mat: Matroid, x: np.ndarray, tol: float) -> None:
    if x.size and (x.min() < -tol or x.max() > 1 + tol):
        raise DomainError("coordinates outside [0, 1]")
    for v in np.unique(x[x > 0]):
        level = np.flatnonzero(x >= v)
        if x[level].sum() > mat.rank(level.tolist()) + tol:
            raise DomainError("point violates a rank inequality on one of its level sets")


def _stacking_decomposition(mat: PartitionMatroid, x: np.ndarray, tol: float):
    groups = mat.groups()
    starts = np.zeros(mat.n)
    for blk, cap in groups:
        blk = [e for e in blk if x[e] > 0]
        total = float(x[blk].sum()) if blk else 0.0
        if total > cap + tol:
            raise DomainError(f"block mass {total:.12g} exceeds capacity {cap}")
        if total > cap:
            x[blk] *= cap / total
        starts[blk] = np.concatenate([[0.0], np.cumsum(x[blk])[:-1]]) if blk else []
    supp = np.flatnonzero(x > 0)
    ends = starts[supp] + x[supp]
    cuts = np.unique(np.concatenate([[0.0, 1.0], np.mod(starts[supp], 1.0), np.mod(ends, 1.0)]))
    cuts = cuts[(cuts >= 0.0) & (cuts <= 1.0)]
    pieces = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        width = hi - lo
        if width <= 1e-13:
            continue
        theta = 0.5 * (lo + hi)
        # e is picked when some theta + t (t integer) falls inside [start, end)
        t = np.ceil(starts[supp] - theta)
        hit = supp[theta + t < ends]
        if hit.size:
            pieces.append((float(width), hit.tolist()))
    return _merge_equal_sets(pieces)


def _merge_equal_sets(pieces):
    acc: dict[tuple[int, ...], float] = {}
    for w, s in pieces:
        key = tuple(s)
        acc[key] = acc.get(key, 0.0) + w
    return [(w, list(s)) for s, w in sorted(acc.items(), key=lambda kv: (-kv[1], kv[0]))]


def _lp_decomposition(mat: Matroid, x: np.ndarray, tol: float, max_iter: int = 500):
    supp = np.flatnonzero(x > 0)
    if supp.size == 0:
        return []
    pos = {int(e): i for i, e in enumerate(supp)}
    columns = [[int(e)] for e in supp]
    # seed with greedy bases of the level sets, which often suffice
    order = supp[np.lexsort((supp, -x[supp]))]
    chosen: list[int] = []
    for e in order.tolist():
        if mat.addable(chosen, [e])[0]:
            chosen.append(e)
            columns.append(sorted(chosen))
    seen = {tuple(c) for c in columns}
    b = x[supp]
    for _ in range(max_iter):
        A = np.zeros((supp.size, len(columns)))
        for j, col in enumerate(columns):
            A[[pos[e] for e in col], j] = 1.0
        res = linprog(np.ones(len(columns)), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
        if res.status != 0:
            raise DomainError(f"decomposition LP failed: {res.message}")
        y = res.eqlin.marginals
        w = np.zeros(mat.n)
        w[supp] = y
        cand = mat.max_weight_independent(w)
        if w[cand].sum() <= 1.0 + 1e-10 or tuple(cand) in seen:
            break
        seen.add(tuple(cand))
        columns.append(cand)
    lam = res.x
    if lam.sum() > 1.0 + tol:
        raise DomainError(f"point outside the matroid polytope (needs total weight {lam.sum():.12g})")
    keep = lam > 1e-14
    sub = A[:, keep]
    polished, *_ = np.linalg.lstsq(sub, b, rcond=None)
    if np.all(polished > 0) and np.max(np.abs(sub @ polished - b)) < np.max(np.abs(sub @ lam[keep] - b)):
        lam_keep = polished
    else:
        lam_keep = lam[keep]
    cols_keep = [columns[j] for j in np.flatnonzero(keep)]
    return _merge_equal_sets(list(zip(lam_keep.tolist(), cols_keep)))


def matroid_decomposition(mat: Matroid, x, tol: float = POLYTOPE_TOL) -> list[tuple[float, list[int]]]:
    """Write ``x`` as ``sum_i lambda_i 1_{I_i}`` with independent ``I_i`` and ``sum lambda_i <= 1``.

    Raises :class:`DomainError` when ``x`` is outside the matroid polytope.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (mat.n,):
        raise DomainError(f"expected a vector of length {mat.n}")
    if x.size and (x.min() < -tol or x.max() > 1 + tol):
        raise DomainError("coordinates outside [0, 1]")
    x = np.clip(x, 0.0, 1.0)
    if isinstance(mat, PartitionMatroid):
        return _stacking_decomposition(mat, x, tol)
    _level_set_check(mat, x, tol)
    return _lp_decomposition(mat, x, tol)


def in_matroid_polytope(mat: Matroid, x, tol: float = POLYTOPE_TOL) -> bool:
    try:
        matroid_decomposition(mat, x, tol)
    except DomainError:
        return False
    return True
