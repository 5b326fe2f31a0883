"""Submodular objectives and their continuous extensions.

Every oracle evaluates sets in batches through :meth:`SubmodularOracle.values`,
which takes a sorted column index array ``cols`` and a boolean matrix whose
rows are subsets of ``cols``.  The value of a row depends only on the row and
on ``cols``; algorithms that need bit-for-bit reproducible comparisons across
different inputs (the consistency property) rely on this by keeping ``cols``
independent of their input set.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .core import ElementSet
from .errors import DomainError, InvalidConfiguration, SizeRefusal

__all__ = [
    "SubmodularOracle",
    "GreedyState",
    "ModularFunction",
    "CoverageFunction",
    "FacilityLocationFunction",
    "GraphCutFunction",
    "TabulatedOracle",
    "ContractedOracle",
    "FractionalPoint",
    "InstanceSpec",
    "marginal_gain",
    "lovasz_exact",
    "multilinear_estimate",
    "multilinear_exact_small",
    "MAX_EXACT_FRACTIONAL",
]

MAX_EXACT_FRACTIONAL = 20
_EMPTY_COLS = np.empty(0, dtype=np.int64)


def _as_cols(members: Iterable[int]) -> np.ndarray:
    return np.asarray(sorted({int(e) for e in members}), dtype=np.int64)


class GreedyState:
    """Incrementally maintained set ``S`` with fast marginal gains.

    The generic implementation re-evaluates ``f`` per candidate; concrete
    oracles override it with O(degree) updates.
    """

    def __init__(self, f: "SubmodularOracle", members: Iterable[int] = ()):
        self.f = f
        self.members: set[int] = set()
        self.value = f.value(())
        for e in members:
            self.add(e)

    def gains(self, cands: Sequence[int]) -> np.ndarray:
        out = np.empty(len(cands))
        base = self.value
        for j, e in enumerate(cands):
            out[j] = 0.0 if e in self.members else self.f.value(self.members | {int(e)}) - base
        return out

    def add(self, e: int) -> None:
        e = int(e)
        if e in self.members:
            return
        self.members.add(e)
        self.value = self.f.value(self.members)


class SubmodularOracle(ABC):
    """Value oracle for a set function ``f : 2^V -> R``."""

    n: int
    monotone: bool = False

    @abstractmethod
    def values(self, cols: np.ndarray, masks: np.ndarray) -> np.ndarray:
        """Evaluate ``f`` on each row of ``masks`` (a subset of ``cols``)."""

    def value(self, S: Iterable[int]) -> float:
        cols = _as_cols(S)
        return float(self.values(cols, np.ones((1, cols.size), dtype=bool))[0])

    def values_full(self, masks: np.ndarray) -> np.ndarray:
        masks = np.atleast_2d(np.asarray(masks, dtype=bool))
        return self.values(np.arange(self.n, dtype=np.int64), masks)

    def sample_gains(self, cols: np.ndarray, masks: np.ndarray,
                     cands: Sequence[int], base: np.ndarray | None = None) -> np.ndarray:
        """``f(R_i + e) - f(R_i)`` for every candidate ``e`` and row ``R_i``.

        Returns an array of shape ``(len(cands), len(masks))``.  Each row is
        computed from ``(cols, masks, e)`` alone.
        """
        cols = np.asarray(cols, dtype=np.int64)
        masks = np.asarray(masks, dtype=bool)
        if base is None:
            base = self.values(cols, masks)
        out = np.empty((len(cands), masks.shape[0]))
        for j, e in enumerate(cands):
            pos = int(np.searchsorted(cols, e))
            if pos < cols.size and cols[pos] == e:
                with_e = masks.copy()
                with_e[:, pos] = True
                out[j] = self.values(cols, with_e) - base
            else:
                cols2 = np.insert(cols, pos, e)
                with_e = np.insert(masks, pos, True, axis=1)
                out[j] = self.values(cols2, with_e) - base
        return out

    def state(self, members: Iterable[int] = ()) -> GreedyState:
        return GreedyState(self, members)


class ModularFunction(SubmodularOracle):
    """``f(S) = offset + sum_{e in S} w_e``."""

    def __init__(self, weights, offset: float = 0.0):
        self.weights = np.asarray(weights, dtype=float)
        if not np.all(np.isfinite(self.weights)):
            raise InvalidConfiguration("modular weights must be finite")
        self.offset = float(offset)
        self.n = self.weights.size
        self.monotone = bool(np.all(self.weights >= 0))

    def values(self, cols, masks):
        masks = np.asarray(masks, dtype=bool)
        if masks.shape[1] == 0:
            return np.full(masks.shape[0], self.offset)
        return (masks * self.weights[cols]).sum(axis=1) + self.offset

    def state(self, members=()):
        return _ModularState(self, members)


class _ModularState(GreedyState):
    def __init__(self, f, members=()):
        self.f = f
        self.members = set()
        self._inside = np.zeros(f.n, dtype=bool)
        self.value = f.offset
        for e in members:
            self.add(e)

    def gains(self, cands):
        cands = np.asarray(cands, dtype=np.int64)
        out = self.f.weights[cands]
        if self.members:
            out[self._inside[cands]] = 0.0
        return out

    def add(self, e):
        e = int(e)
        if e not in self.members:
            self.members.add(e)
            self._inside[e] = True
            self.value += self.f.weights[e]


class CoverageFunction(SubmodularOracle):
    """Weighted coverage: ``f(S)`` is the weight of items covered by ``S``."""

    def __init__(self, sets: Sequence[Iterable[int]], item_weights=None):
        rows, cols = [], []
        for e, items in enumerate(sets):
            its = sorted({int(i) for i in items})
            rows.extend([e] * len(its))
            cols.extend(its)
        self.n = len(sets)
        n_items = (max(cols) + 1) if cols else 0
        if item_weights is None:
            item_weights = np.ones(n_items)
        self.item_weights = np.asarray(item_weights, dtype=float)
        if self.item_weights.size < n_items:
            raise InvalidConfiguration("item weight vector shorter than the item universe")
        if np.any(self.item_weights < 0) or not np.all(np.isfinite(self.item_weights)):
            raise InvalidConfiguration("coverage item weights must be finite and >= 0")
        self.incidence = sp.csr_matrix(
            (np.ones(len(rows), dtype=np.int32), (rows, cols)),
            shape=(self.n, self.item_weights.size))
        self.monotone = True

    def items_of(self, e: int) -> np.ndarray:
        a = self.incidence
        return a.indices[a.indptr[e]:a.indptr[e + 1]]

    def values(self, cols, masks):
        masks = np.asarray(masks, dtype=bool)
        if masks.shape[1] == 0:
            return np.zeros(masks.shape[0])
        sub = self.incidence[cols]
        items = np.unique(sub.indices)
        if items.size == 0:
            return np.zeros(masks.shape[0])
        dense = sub[:, items].toarray()
        covered = (masks.astype(np.int32) @ dense) > 0
        return (covered * self.item_weights[items]).sum(axis=1)

    def state(self, members=()):
        return _CoverageState(self, members)


class _CoverageState(GreedyState):
    def __init__(self, f, members=()):
        self.f = f
        self.members = set()
        self.covered = np.zeros(f.item_weights.size, dtype=bool)
        self.value = 0.0
        for e in members:
            self.add(e)

    def gains(self, cands):
        cands = np.asarray(cands, dtype=np.int64)
        free = self.f.item_weights * ~self.covered
        return self.f.incidence[cands] @ free

    def add(self, e):
        e = int(e)
        if e in self.members:
            return
        self.members.add(e)
        items = self.f.items_of(e)
        new = items[~self.covered[items]]
        self.value += float(self.f.item_weights[new].sum())
        self.covered[items] = True


class FacilityLocationFunction(SubmodularOracle):
    """``f(S) = sum_u max_{e in S} sim[u, e]`` with ``f(empty) = 0``.

    ``sim`` has one row per client and one column per element.
    """

    def __init__(self, sim):
        sim = np.asarray(sim, dtype=float)
        if sim.ndim != 2:
            raise InvalidConfiguration("similarity matrix must be two-dimensional")
        if np.any(sim < 0) or not np.all(np.isfinite(sim)):
            raise InvalidConfiguration("similarities must be finite and >= 0")
        self.sim = sim
        self.sim_t = np.ascontiguousarray(sim.T)
        self.n = sim.shape[1]
        self.monotone = True

    def values(self, cols, masks):
        masks = np.asarray(masks, dtype=bool)
        best = np.zeros((masks.shape[0], self.sim.shape[0]))
        for j, e in enumerate(cols):
            np.maximum(best, masks[:, j:j + 1] * self.sim_t[e][None, :], out=best)
        return best.sum(axis=1)

    def state(self, members=()):
        return _FacilityState(self, members)


class _FacilityState(GreedyState):
    def __init__(self, f, members=()):
        self.f = f
        self.members = set()
        self.best = np.zeros(f.sim.shape[0])
        self.value = 0.0
        for e in members:
            self.add(e)

    def gains(self, cands):
        cands = np.asarray(cands, dtype=np.int64)
        return np.maximum(self.f.sim_t[cands] - self.best[None, :], 0.0).sum(axis=1)

    def add(self, e):
        e = int(e)
        if e in self.members:
            return
        self.members.add(e)
        np.maximum(self.best, self.f.sim_t[e], out=self.best)
        self.value = float(self.best.sum())


class GraphCutFunction(SubmodularOracle):
    """Undirected weighted cut ``f(S) = sum of w_uv over edges leaving S``.

    Elements are vertices.  Non-negative and, in general, non-monotone.
    """

    def __init__(self, n: int, edges: Iterable[tuple[int, int, float]]):
        us, vs, ws = [], [], []
        for u, v, w in edges:
            u, v, w = int(u), int(v), float(w)
            if not (0 <= u < n and 0 <= v < n):
                raise InvalidConfiguration(f"edge ({u}, {v}) outside vertex range [0, {n})")
            if u == v:
                raise InvalidConfiguration(f"self-loop on vertex {u}")
            if w < 0 or not math.isfinite(w):
                raise InvalidConfiguration(f"edge ({u}, {v}) has invalid weight {w}")
            us.append(u)
            vs.append(v)
            ws.append(w)
        self.n = int(n)
        self.eu = np.asarray(us, dtype=np.int64)
        self.ev = np.asarray(vs, dtype=np.int64)
        self.ew = np.asarray(ws, dtype=float)
        self.adjacency = sp.csr_matrix(
            (np.concatenate([self.ew, self.ew]),
             (np.concatenate([self.eu, self.ev]), np.concatenate([self.ev, self.eu]))),
            shape=(self.n, self.n))
        self.monotone = self.ew.size == 0

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return list(zip(self.eu.tolist(), self.ev.tolist(), self.ew.tolist()))

    def values(self, cols, masks):
        masks = np.asarray(masks, dtype=bool)
        B = masks.shape[0]
        if cols.size == 0 or self.ew.size == 0:
            return np.zeros(B)
        pu = np.searchsorted(cols, self.eu).clip(max=cols.size - 1)
        pv = np.searchsorted(cols, self.ev).clip(max=cols.size - 1)
        hit_u = cols[pu] == self.eu
        hit_v = cols[pv] == self.ev
        touch = np.flatnonzero(hit_u | hit_v)
        if touch.size == 0:
            return np.zeros(B)
        in_u = masks[:, pu[touch]] & hit_u[touch][None, :]
        in_v = masks[:, pv[touch]] & hit_v[touch][None, :]
        return ((in_u ^ in_v) * self.ew[touch]).sum(axis=1)

    def state(self, members=()):
        return _CutState(self, members)


class _CutState(GreedyState):
    def __init__(self, f, members=()):
        self.f = f
        self.members = set()
        self.inside = np.zeros(f.n, dtype=bool)
        self.value = 0.0
        for e in members:
            self.add(e)

    def gains(self, cands):
        cands = np.asarray(cands, dtype=np.int64)
        sign = 1.0 - 2.0 * self.inside
        out = self.f.adjacency[cands] @ sign
        out[self.inside[cands]] = 0.0
        return out

    def add(self, e):
        e = int(e)
        if e in self.members:
            return
        self.value += float(self.gains([e])[0])
        self.members.add(e)
        self.inside[e] = True


class TabulatedOracle(SubmodularOracle):
    """Exhaustive value table of another oracle, indexed by bitmask.

    Lookups are exact, so every comparison an algorithm makes is independent
    of evaluation order.  Intended for desk-scale instances (``n <= 22``).
    """

    MAX_N = 22

    def __init__(self, base: SubmodularOracle, chunk: int = 1 << 15):
        if base.n > self.MAX_N:
            raise SizeRefusal(f"refusing to tabulate 2^{base.n} subsets (limit 2^{self.MAX_N})")
        self.base = base
        self.n = base.n
        self.monotone = base.monotone
        total = 1 << self.n
        table = np.empty(total)
        shifts = np.arange(self.n, dtype=np.int64)
        cols = np.arange(self.n, dtype=np.int64)
        for start in range(0, total, chunk):
            idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
            masks = ((idx[:, None] >> shifts[None, :]) & 1).astype(bool)
            table[start:start + idx.size] = base.values(cols, masks)
        self.table = table
        self._pow = (np.int64(1) << np.arange(self.n, dtype=np.int64))

    def bits_of(self, cols, masks) -> np.ndarray:
        masks = np.asarray(masks, dtype=np.int64)
        if masks.shape[1] == 0:
            return np.zeros(masks.shape[0], dtype=np.int64)
        return masks @ self._pow[np.asarray(cols, dtype=np.int64)]

    def values(self, cols, masks):
        return self.table[self.bits_of(cols, masks)]

    def value(self, S):
        b = 0
        for e in S:
            b |= 1 << int(e)
        return float(self.table[b])

    def sample_gains(self, cols, masks, cands, base=None):
        bits = self.bits_of(cols, masks)
        ebits = self._pow[np.asarray(cands, dtype=np.int64)]
        return self.table[bits[None, :] | ebits[:, None]] - self.table[bits][None, :]

    def state(self, members=()):
        return _TableState(self, members)


class _TableState(GreedyState):
    def __init__(self, f, members=()):
        self.f = f
        self.members = set()
        self.bits = 0
        for e in members:
            self.add(e)

    @property
    def value(self):
        return float(self.f.table[self.bits])

    def gains(self, cands):
        ebits = self.f._pow[np.asarray(cands, dtype=np.int64)]
        return self.f.table[self.bits | ebits] - self.f.table[self.bits]

    def add(self, e):
        e = int(e)
        self.members.add(e)
        self.bits |= 1 << e


class ContractedOracle(SubmodularOracle):
    """``g(A) = f(base_set | A) - f(base_set)``; non-negative and monotone when ``f`` is."""

    def __init__(self, f: SubmodularOracle, base_set: Iterable[int]):
        self.f = f
        self.base_cols = _as_cols(base_set)
        self.n = f.n
        self.monotone = f.monotone
        self.offset = f.value(self.base_cols.tolist())

    def values(self, cols, masks):
        masks = np.asarray(masks, dtype=bool)
        cols = np.asarray(cols, dtype=np.int64)
        extra = np.setdiff1d(self.base_cols, cols)
        if extra.size:
            merged = np.concatenate([cols, extra])
            order = np.argsort(merged, kind="stable")
            full = np.concatenate([masks, np.ones((masks.shape[0], extra.size), bool)], axis=1)
            cols, masks = merged[order], full[:, order]
        else:
            masks = masks.copy()
            masks[:, np.searchsorted(cols, self.base_cols)] = True
        return self.f.values(cols, masks) - self.offset

    def state(self, members=()):
        return _ContractedState(self, members)


class _ContractedState(GreedyState):
    def __init__(self, g, members=()):
        self.g = g
        self.inner = g.f.state(g.base_cols.tolist())
        self.members = set()
        for e in members:
            self.add(e)

    @property
    def value(self):
        return self.inner.value - self.g.offset

    def gains(self, cands):
        return self.inner.gains(cands)

    def add(self, e):
        self.members.add(int(e))
        self.inner.add(e)


class FractionalPoint:
    """A point of ``[0, 1]^V`` stored by its support."""

    __slots__ = ("n", "index", "coords")

    def __init__(self, n: int, index=(), coords=()):
        index = np.asarray(index, dtype=np.int64)
        coords = np.asarray(coords, dtype=float)
        if index.shape != coords.shape:
            raise DomainError("index and coordinate arrays differ in length")
        if coords.size and (np.any(~np.isfinite(coords)) or coords.min() < 0.0 or coords.max() > 1.0):
            raise DomainError("fractional point coordinates must lie in [0, 1]")
        if index.size and (index.min() < 0 or index.max() >= n):
            raise DomainError("fractional point support outside the ground set")
        order = np.argsort(index, kind="stable")
        index, coords = index[order], coords[order]
        if index.size > 1 and np.any(np.diff(index) == 0):
            raise DomainError("duplicate coordinates in fractional point")
        keep = coords > 0.0
        self.n = int(n)
        self.index = index[keep]
        self.coords = coords[keep]

    @classmethod
    def from_dense(cls, x) -> "FractionalPoint":
        x = np.asarray(x, dtype=float)
        if x.size and (np.any(~np.isfinite(x)) or x.min() < 0.0 or x.max() > 1.0):
            raise DomainError("fractional point coordinates must lie in [0, 1]")
        idx = np.flatnonzero(x > 0)
        return cls(x.size, idx, x[idx])

    @classmethod
    def zeros(cls, n: int) -> "FractionalPoint":
        return cls(n)

    @classmethod
    def indicator(cls, S: Iterable[int], n: int) -> "FractionalPoint":
        idx = _as_cols(S)
        return cls(n, idx, np.ones(idx.size))

    def dense(self) -> np.ndarray:
        out = np.zeros(self.n)
        out[self.index] = self.coords
        return out

    def support(self) -> ElementSet:
        return ElementSet(self.index.tolist(), self.n)

    def __getitem__(self, e: int) -> float:
        pos = int(np.searchsorted(self.index, e))
        if pos < self.index.size and self.index[pos] == e:
            return float(self.coords[pos])
        return 0.0

    def scale(self, c: float) -> "FractionalPoint":
        return FractionalPoint(self.n, self.index, self.coords * c)

    def join(self, other: "FractionalPoint") -> "FractionalPoint":
        return FractionalPoint.from_dense(np.maximum(self.dense(), other.dense()))

    def meet(self, other: "FractionalPoint") -> "FractionalPoint":
        return FractionalPoint.from_dense(np.minimum(self.dense(), other.dense()))

    def is_integral(self) -> bool:
        return bool(np.all(self.coords == 1.0))

    def __eq__(self, other):
        if not isinstance(other, FractionalPoint):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.index, other.index)
                and np.array_equal(self.coords, other.coords))

    def __repr__(self):
        body = ", ".join(f"{e}: {v:.4g}" for e, v in zip(self.index.tolist(), self.coords.tolist()))
        return f"FractionalPoint(n={self.n}, {{{body}}})"


def _as_point(x, n: int) -> FractionalPoint:
    if isinstance(x, FractionalPoint):
        return x
    arr = np.asarray(x, dtype=float)
    if arr.shape != (n,):
        raise DomainError(f"expected a vector of length {n}, got shape {arr.shape}")
    return FractionalPoint.from_dense(arr)


def marginal_gain(f: SubmodularOracle, S: Iterable[int], e: int) -> float:
    """``f(S + e) - f(S)``, and 0 when ``e`` is already in ``S``."""
    members = set(int(a) for a in S)
    if not 0 <= e < f.n:
        raise DomainError(f"element {e} outside ground set of size {f.n}")
    if e in members:
        return 0.0
    return f.value(members | {int(e)}) - f.value(members)


def lovasz_exact(f: SubmodularOracle, x) -> float:
    """Exact Lovasz extension by integrating over the distinct coordinate levels."""
    x = _as_point(x, f.n)
    if x.index.size == 0:
        return f.value(())
    order = np.argsort(-x.coords, kind="stable")
    idx, vals = x.index[order], x.coords[order]
    levels = np.unique(vals)[::-1]
    total = (1.0 - levels[0]) * f.value(())
    for j, v in enumerate(levels):
        nxt = levels[j + 1] if j + 1 < levels.size else 0.0
        members = idx[vals >= v]
        total += (v - nxt) * f.value(members.tolist())
    return float(total)


def multilinear_estimate(f: SubmodularOracle, x, ell: int, thresholds) -> float:
    """Average of ``f(R_i)`` with ``R_i = {e : thresholds[i, e] < x_e}``.

    ``thresholds`` is an array with at least ``ell`` rows and ``n`` columns of
    values in ``[0, 1)``.
    """
    if ell < 1:
        raise InvalidConfiguration("sample count must be >= 1")
    x = _as_point(x, f.n)
    thr = np.asarray(thresholds, dtype=float)
    if thr.ndim != 2 or thr.shape[0] < ell or thr.shape[1] != f.n:
        raise InvalidConfiguration(f"thresholds must have shape (>= {ell}, {f.n})")
    masks = thr[:ell, x.index] < x.coords[None, :]
    return float(f.values(x.index, masks).mean())


def multilinear_exact_small(f: SubmodularOracle, x) -> float:
    """Exact multilinear extension by enumerating the fractional coordinates."""
    x = _as_point(x, f.n)
    frac = x.coords < 1.0
    q = int(frac.sum())
    if q > MAX_EXACT_FRACTIONAL:
        raise SizeRefusal(f"{q} fractional coordinates; exact enumeration limited to "
                          f"{MAX_EXACT_FRACTIONAL}")
    cols = x.index
    if q == 0:
        return f.value(cols.tolist())
    p = x.coords[frac]
    codes = np.arange(1 << q, dtype=np.int64)
    sub = ((codes[:, None] >> np.arange(q)[None, :]) & 1).astype(bool)
    weights = np.prod(np.where(sub, p[None, :], 1.0 - p[None, :]), axis=1)
    masks = np.ones((codes.size, cols.size), dtype=bool)
    masks[:, frac] = sub
    return float(weights @ f.values(cols, masks))


@dataclass
class InstanceSpec:
    """Declarative description of one of the shipped objective families.

    ``payload`` by kind:

    * ``coverage``: ``{"sets": [[item, ...], ...], "item_weights": [...]}``
    * ``facility-location``: ``{"similarity": clients x n matrix}``
    * ``graph-cut``: ``{"edges": [(u, v, w), ...]}``
    * ``modular``: ``{"weights": [...]}``
    """

    kind: str
    n: int
    payload: dict = field(default_factory=dict)

    KINDS = ("coverage", "facility-location", "graph-cut", "modular")

    def build(self) -> SubmodularOracle:
        if self.kind == "coverage":
            sets = self.payload["sets"]
            if len(sets) != self.n:
                raise InvalidConfiguration(f"coverage payload has {len(sets)} sets for n={self.n}")
            return CoverageFunction(sets, self.payload.get("item_weights"))
        if self.kind == "facility-location":
            f = FacilityLocationFunction(self.payload["similarity"])
            if f.n != self.n:
                raise InvalidConfiguration(f"similarity matrix has {f.n} columns for n={self.n}")
            return f
        if self.kind == "graph-cut":
            return GraphCutFunction(self.n, self.payload["edges"])
        if self.kind == "modular":
            w = np.asarray(self.payload["weights"], dtype=float)
            if w.size != self.n:
                raise InvalidConfiguration(f"{w.size} weights for n={self.n}")
            if np.any(w < 0):
                raise InvalidConfiguration("modular weights must be >= 0")
            return ModularFunction(w)
        raise InvalidConfiguration(f"unknown objective kind {self.kind!r}")
