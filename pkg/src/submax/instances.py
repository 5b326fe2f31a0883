"""Synthetic instance generators.

All generators take a ``numpy.random.Generator`` (or an int seed) and return an
:class:`~submax.functions.InstanceSpec`, which can be built into an oracle or
written to disk with :func:`submax.formats.write_instance`.
"""

from __future__ import annotations

import numpy as np

from .constraints import GraphicMatroid, PartitionMatroid
from .errors import InvalidConfiguration
from .functions import InstanceSpec

__all__ = [
    "random_coverage",
    "random_facility",
    "random_graph_cut",
    "random_modular",
    "random_partition_matroid",
    "random_graphic_matroid",
    "trap_coverage",
    "generate",
]


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def random_coverage(n: int, rng=0, items: int | None = None, density: float = 0.2,
                    weighted: bool = True) -> InstanceSpec:
    """Each element covers every item independently with probability ``density``."""
    rng = _rng(rng)
    items = items if items is not None else max(2 * n, 4)
    if not 0.0 < density <= 1.0:
        raise InvalidConfiguration(f"density must lie in (0, 1], got {density}")
    inc = rng.random((n, items)) < density
    sets = [np.flatnonzero(row).tolist() for row in inc]
    w = (rng.integers(1, 10, size=items) if weighted else np.ones(items)).astype(float)
    return InstanceSpec("coverage", n, {"sets": sets, "item_weights": w.tolist()})


def random_facility(n: int, rng=0, clients: int | None = None) -> InstanceSpec:
    """Similarities from points on the unit square: ``exp(-4 * dist)``."""
    rng = _rng(rng)
    clients = clients if clients is not None else max(n, 4)
    pts = rng.random((n, 2))
    cl = rng.random((clients, 2))
    d = np.linalg.norm(cl[:, None, :] - pts[None, :, :], axis=2)
    sim = np.round(np.exp(-4.0 * d), 6)
    return InstanceSpec("facility-location", n, {"similarity": sim})


def random_graph_cut(n: int, rng=0, p: float = 0.4, max_weight: int = 5) -> InstanceSpec:
    """Erdos-Renyi graph with integer edge weights in ``[1, max_weight]``."""
    rng = _rng(rng)
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                edges.append((u, v, float(rng.integers(1, max_weight + 1))))
    return InstanceSpec("graph-cut", n, {"edges": edges})


def random_modular(n: int, rng=0, max_weight: float = 1.0) -> InstanceSpec:
    rng = _rng(rng)
    return InstanceSpec("modular", n, {"weights": (rng.random(n) * max_weight).tolist()})


def random_partition_matroid(n: int, blocks: int, capacity: int = 1, rng=0) -> PartitionMatroid:
    """Elements shuffled into ``blocks`` near-equal blocks of the given capacity."""
    rng = _rng(rng)
    perm = rng.permutation(n)
    parts = [sorted(int(e) for e in perm[i::blocks]) for i in range(blocks)]
    return PartitionMatroid(n, parts, [capacity] * blocks)


def random_graphic_matroid(n: int, vertices: int, rng=0) -> GraphicMatroid:
    """``n`` random edges (parallel edges allowed, no loops) on ``vertices`` vertices."""
    rng = _rng(rng)
    if vertices < 2:
        raise InvalidConfiguration("a graphic matroid needs at least two vertices")
    edges = []
    while len(edges) < n:
        u, v = (int(a) for a in rng.choice(vertices, size=2, replace=False))
        edges.append((min(u, v), max(u, v)))
    return GraphicMatroid(edges)


def trap_coverage(gadgets: int, delta: float = 0.1, rng=None) -> tuple[InstanceSpec, PartitionMatroid]:
    """Coverage instance on which Greedy under a partition matroid loses half of OPT.

    Gadget ``i`` has elements ``a_i, a'_i`` in one capacity-1 block and ``b_i``
    in another.  ``a_i`` covers ``u_i`` plus a small item of weight ``delta``,
    ``a'_i`` covers ``v_i`` and ``b_i`` covers ``u_i``.  Greedy takes ``a_i``
    and then ``b_i`` is worthless, while ``{a'_i, b_i}`` is worth twice as much.
    With ``rng`` given, element ids are shuffled.
    """
    n = 3 * gadgets
    perm = np.arange(n) if rng is None else _rng(rng).permutation(n)
    sets: list[list[int]] = [[] for _ in range(n)]
    weights: list[float] = []
    blocks: list[list[int]] = []
    for i in range(gadgets):
        a, a2, b = (int(perm[3 * i + j]) for j in range(3))
        u, v, d = len(weights), len(weights) + 1, len(weights) + 2
        weights += [1.0, 1.0, delta]
        sets[a] = [u, d]
        sets[a2] = [v]
        sets[b] = [u]
        blocks += [sorted([a, a2]), [b]]
    spec = InstanceSpec("coverage", n, {"sets": sets, "item_weights": weights})
    return spec, PartitionMatroid(n, blocks, [1] * len(blocks))


_GENERATORS = {
    "coverage": random_coverage,
    "facility-location": random_facility,
    "graph-cut": random_graph_cut,
    "modular": random_modular,
}


def generate(kind: str, n: int, seed: int = 0, **params) -> InstanceSpec:
    if kind not in _GENERATORS:
        raise InvalidConfiguration(f"unknown objective kind {kind!r}; expected one of {sorted(_GENERATORS)}")
    if n < 1:
        raise InvalidConfiguration(f"n must be >= 1, got {n}")
    return _GENERATORS[kind](n, np.random.default_rng(seed), **params)
