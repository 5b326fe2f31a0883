"""Sequential building blocks: Greedy, descending-thresholds Greedy, the
discretized continuous greedy with sampled weights, and swap rounding.

Every algorithm breaks ties towards the smallest element index and evaluates
marginal gains in a way that does not depend on which other elements are in
its input.  Both are needed for the consistency property the parallel
framework relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .constraints import Constraint, Matroid, PSystem, UniformMatroid, matroid_decomposition
from .core import ElementSet, RandomnessVector, RandomStream
from .errors import DomainError, InvalidConfiguration, SizeRefusal
from .functions import MAX_EXACT_FRACTIONAL, FractionalPoint, SubmodularOracle

__all__ = [
    "AlgOutput",
    "DCGreedyState",
    "greedy",
    "greedy_sequence",
    "dthresh_greedy",
    "greedy_step",
    "dc_greedy",
    "swap_rounding",
    "decompose_fractional",
    "default_ell",
    "steps_for",
    "SequentialAlgorithm",
    "greedy_plugin",
    "dthresh_plugin",
    "dcgreedy_plugin",
    "greedy_alpha",
    "ELL_CONSTANT",
]

ELL_CONSTANT = 4.0


@dataclass(frozen=True)
class AlgOutput:
    sol: ElementSet
    rel: ElementSet


@dataclass(frozen=True)
class DCGreedyState:
    """Snapshot after step ``t``: the point ``x(t)``, the chosen set and the update."""

    t: int
    x: FractionalPoint
    W: ElementSet
    y: FractionalPoint


def _sorted_array(N: Iterable[int]) -> np.ndarray:
    if isinstance(N, ElementSet):
        return N.array()
    return np.asarray(sorted({int(e) for e in N}), dtype=np.int64)


def _empty(n: int) -> AlgOutput:
    e = ElementSet((), n)
    return AlgOutput(e, e)


def greedy_sequence(f: SubmodularOracle, c: Constraint, N: Iterable[int],
                    limit: int | None = None) -> list[int]:
    """Elements chosen by Greedy, in the order they were picked."""
    alive = _sorted_array(N)
    state = f.state()
    picked: list[int] = []
    while alive.size and (limit is None or len(picked) < limit):
        alive = alive[c.addable(picked, alive)]
        if not alive.size:
            break
        gains = state.gains(alive)
        j = int(np.argmax(gains))
        if gains[j] <= 0:
            break
        e = int(alive[j])
        picked.append(e)
        state.add(e)
        alive = np.delete(alive, j)
    return picked


def greedy(f: SubmodularOracle, c: Constraint, N: Iterable[int]) -> AlgOutput:
    """Standard Greedy; ``rel = sol``."""
    sol = ElementSet(greedy_sequence(f, c, N), f.n)
    return AlgOutput(sol, sol)


def dthresh_greedy(f: SubmodularOracle, c: Constraint, N: Iterable[int], eps: float) -> AlgOutput:
    """Descending-thresholds Greedy with thresholds ``d, d(1-eps), ...`` down to ``(eps/|N|) d``."""
    if not 0.0 < eps <= 1.0:
        raise InvalidConfiguration(f"eps must lie in (0, 1], got {eps}")
    alive = _sorted_array(N)
    if alive.size == 0:
        return _empty(f.n)
    state = f.state()
    d = float(np.max(state.gains(alive)))
    picked: list[int] = []
    k = c.k
    if d > 0:
        w = d
        stop = eps / alive.size * d
        while w >= stop and alive.size and len(picked) < k:
            alive = alive[c.addable(picked, alive)]
            if not alive.size:
                break
            # gains only shrink during a pass, so the prefilter loses nothing
            gains = state.gains(alive)
            pre = alive[gains >= w]
            before = len(picked)
            for e in pre.tolist():
                if len(picked) == k:
                    break
                if c.addable(picked, [e])[0] and state.gains([e])[0] >= w:
                    picked.append(e)
                    state.add(e)
            if pre.size:
                # earlier picks were already removed by the addable filter
                new = picked[before:]
                if len(new) == 1:
                    alive = alive[alive != new[0]]
                elif new:
                    alive = np.setdiff1d(alive, new, assume_unique=True)
                w *= 1.0 - eps
            else:
                # passes above the best remaining gain select nothing
                top = float(gains.max())
                w *= 1.0 - eps
                while w > top and w >= stop:
                    w *= 1.0 - eps
    sol = ElementSet(picked, f.n)
    return AlgOutput(sol, sol)


def steps_for(eps: float) -> int:
    """``1/eps`` as an integer; ``eps`` must be the reciprocal of one."""
    if not 0.0 < eps <= 1.0:
        raise InvalidConfiguration(f"eps must lie in (0, 1], got {eps}")
    steps = round(1.0 / eps)
    if abs(steps * eps - 1.0) > 1e-9:
        raise InvalidConfiguration(f"1/eps must be an integer, got eps={eps}")
    return steps


def default_ell(s: int, n: int, eps: float, C: float = ELL_CONSTANT) -> int:
    return max(1, math.ceil(C * max(s, 1) * math.log(max(n, 2)) / eps ** 2))


def _loops_per_step(mat: Constraint) -> int:
    return mat.k + 1


def _exact_weights(f: SubmodularOracle, cols: np.ndarray, probs: np.ndarray,
                   cands: np.ndarray) -> np.ndarray:
    frac = probs < 1.0
    q = int(frac.sum())
    if q > MAX_EXACT_FRACTIONAL:
        raise SizeRefusal(f"exact weights over {q} fractional coordinates")
    codes = np.arange(1 << q, dtype=np.int64)
    sub = ((codes[:, None] >> np.arange(q)[None, :]) & 1).astype(bool)
    pf = probs[frac]
    pr = np.prod(np.where(sub, pf[None, :], 1.0 - pf[None, :]), axis=1)
    masks = np.ones((codes.size, cols.size), dtype=bool)
    masks[:, frac] = sub
    return f.sample_gains(cols, masks, cands) @ pr


def greedy_step(f: SubmodularOracle, mat: Matroid, N: Iterable[int], x: FractionalPoint,
                eps: float, b: RandomnessVector | None, t: int) -> tuple[FractionalPoint, ElementSet]:
    """One step of the discretized continuous greedy (``t`` is 1-based).

    Weights are estimated from ``b.ell`` samples of ``R ~ x + y`` drawn from
    the thresholds of ``b`` at flattened index ``(t-1)(rank+1) + loop``, where
    ``loop`` counts iterations within this step.  With ``b=None`` the weights
    are computed exactly by enumeration (small supports only).  Elements with
    weight exactly 0 are still accepted.
    """
    loops = _loops_per_step(mat)
    D = _sorted_array(N)
    z = x.dense()
    W: list[int] = []
    for loop in range(loops):
        D = D[mat.addable(W, D)]
        if not D.size:
            break
        cols = np.flatnonzero(z > 0)
        if b is None:
            w = _exact_weights(f, cols, z[cols], D)
        else:
            masks = b.sample_masks((t - 1) * loops + loop, cols, z[cols])
            w = f.sample_gains(cols, masks, D).mean(axis=1)
        j = int(np.argmax(w))
        if w[j] < 0:
            break
        e = int(D[j])
        W.append(e)
        z[e] += eps * (1.0 - z[e])
        D = np.delete(D, j)
    inc = np.asarray(sorted(W), dtype=np.int64)
    xd = x.dense()
    y = FractionalPoint(f.n, inc, eps * (1.0 - xd[inc]))
    return y, ElementSet(W, f.n)


def dc_greedy(f: SubmodularOracle, mat: Matroid, N: Iterable[int], eps: float,
              b: RandomnessVector | None, trace: list | None = None,
              stream: RandomStream | None = None) -> AlgOutput:
    """Discretized continuous greedy followed by swap rounding.

    ``rel`` is the support of the final point and ``sol`` its rounding,
    drawn from ``b``'s stream so the output is a function of ``(N, b)``.
    With ``b=None`` weights are exact and the rounding uses ``stream``.
    """
    steps = steps_for(eps)
    N = _sorted_array(N)
    if N.size == 0:
        return _empty(f.n)
    if b is not None and b.max_steps < steps * _loops_per_step(mat):
        raise InvalidConfiguration(
            f"randomness sized for {b.max_steps} draws, {steps * _loops_per_step(mat)} needed")
    x = FractionalPoint.zeros(f.n)
    for t in range(1, steps + 1):
        y, W = greedy_step(f, mat, N, x, eps, b, t)
        xd = x.dense()
        xd[y.index] += y.coords
        x = FractionalPoint.from_dense(xd)
        if trace is not None:
            trace.append(DCGreedyState(t, x, W, y))
    rel = x.support()
    if b is not None:
        stream = b.stream
    elif stream is None:
        stream = RandomStream(0)
    rounded = swap_rounding(mat, x, stream.child("swap"))
    return AlgOutput(_complete(f, mat, rounded, rel), rel)


def _complete(f: SubmodularOracle, mat: Matroid, S: ElementSet, pool: ElementSet) -> ElementSet:
    # rounding may leave room; fill it from the support while gains are positive
    picked = list(S)
    state = f.state(picked)
    alive = np.setdiff1d(pool.array(), S.array())
    while alive.size:
        alive = alive[mat.addable(picked, alive)]
        if not alive.size:
            break
        gains = state.gains(alive)
        j = int(np.argmax(gains))
        if gains[j] <= 0:
            break
        picked.append(int(alive[j]))
        state.add(alive[j])
        alive = np.delete(alive, j)
    return ElementSet(picked, f.n)


def decompose_fractional(mat: Matroid, x) -> list[tuple[float, ElementSet]]:
    """Convex combination of independent sets summing to ``x``; residual mass sits on the empty set."""
    if isinstance(x, FractionalPoint):
        x = x.dense()
    terms = matroid_decomposition(mat, x)
    return [(w, ElementSet(s, mat.n)) for w, s in terms]


def swap_rounding(mat: Matroid, x, stream: RandomStream, terms=None) -> ElementSet:
    """Round a point of the matroid polytope to an independent set.

    Each set of the decomposition is padded with dummy elements (negative
    ids) to a base of the rank-truncated sum of the matroid and a free
    matroid; bases are then merged pairwise by symmetric exchanges.
    ``terms`` may carry a precomputed decomposition of ``x`` for repeated draws.
    """
    if isinstance(x, FractionalPoint):
        x = x.dense()
    x = np.asarray(x, dtype=float)
    if terms is None:
        terms = matroid_decomposition(mat, x)
    if not terms:
        return ElementSet((), mat.n)
    support = np.flatnonzero(x > 0).tolist()
    r = mat.rank(support)
    bases = []
    for w, s in terms:
        bases.append((w, set(s) | {-(i + 1) for i in range(r - len(s))}))
    rest = 1.0 - sum(w for w, _ in terms)
    if rest > 1e-15:
        bases.append((rest, {-(i + 1) for i in range(r)}))
    rng = stream.generator()

    def indep(B: set[int]) -> bool:
        return mat._independent(sorted(e for e in B if e >= 0))

    w_acc, cur = bases[0]
    cur = set(cur)
    for w, B in bases[1:]:
        other = set(B)
        while cur != other:
            i = min(cur - other)
            for j in sorted(other - cur):
                if indep(cur - {i} | {j}) and indep(other - {j} | {i}):
                    break
            else:
                raise DomainError("no symmetric exchange found; constraint is not a matroid")
            if rng.random() < w_acc / (w_acc + w):
                other = other - {j} | {i}
            else:
                cur = cur - {i} | {j}
        w_acc += w
    return ElementSet([e for e in cur if e >= 0], mat.n)


@dataclass
class SequentialAlgorithm:
    """A sequential algorithm packaged for the parallel framework.

    ``run(N, b)`` must be deterministic and consistent; ``s`` bounds
    ``|sol | rel|`` and ``alpha`` is its declared approximation ratio.
    ``make_b`` draws a fresh randomness vector from a stream; deterministic
    algorithms leave it unset and receive ``None``.
    """

    name: str
    run: Callable[[ElementSet, RandomnessVector | None], AlgOutput]
    s: int
    alpha: float
    constraint: Constraint
    randomized: bool = False
    make_b: Callable[[RandomStream], RandomnessVector] | None = field(default=None, repr=False)

    def draw_b(self, stream: RandomStream) -> RandomnessVector | None:
        return self.make_b(stream) if self.make_b is not None else None

    def __call__(self, N: Iterable[int], b: RandomnessVector | None = None) -> AlgOutput:
        return self.run(N, b)


def greedy_alpha(c: Constraint, monotone: bool = True) -> float:
    """Declared approximation of Greedy for monotone objectives."""
    if isinstance(c, UniformMatroid):
        return 1.0 - 1.0 / math.e
    if isinstance(c, PSystem):
        return 1.0 / (c.p + 1)
    if c.is_matroid:
        return 0.5
    return 1.0 / (c.k + 1) if c.k else 1.0


def greedy_plugin(f: SubmodularOracle, c: Constraint, alpha: float | None = None) -> SequentialAlgorithm:
    return SequentialAlgorithm(
        "greedy", lambda N, b=None: greedy(f, c, N), s=c.k,
        alpha=greedy_alpha(c, f.monotone) if alpha is None else alpha, constraint=c)


def dthresh_plugin(f: SubmodularOracle, c: Constraint, eps: float,
                   alpha: float | None = None) -> SequentialAlgorithm:
    if alpha is None:
        alpha = max(greedy_alpha(c, f.monotone) - eps, 1e-3)
    return SequentialAlgorithm(
        "dthresh", lambda N, b=None: dthresh_greedy(f, c, N, eps), s=c.k, alpha=alpha, constraint=c)


def dcgreedy_plugin(f: SubmodularOracle, mat: Matroid, eps: float, ell: int | None = None,
                    alpha: float | None = None, ell_constant: float = ELL_CONSTANT) -> SequentialAlgorithm:
    """DCGreedy with sampled weights; ``s = rank/eps`` and a fresh ``b`` per call."""
    if not mat.is_matroid:
        raise InvalidConfiguration("dc_greedy needs a matroid constraint")
    steps = steps_for(eps)
    rank = mat.k
    if ell is None:
        ell = default_ell(rank, f.n, eps, ell_constant)
    if alpha is None:
        alpha = (1.0 - 1.0 / math.e) if f.monotone else 1.0 / math.e
    max_steps = steps * (rank + 1)

    def make_b(stream: RandomStream) -> RandomnessVector:
        return RandomnessVector(stream, f.n, ell, max_steps)

    return SequentialAlgorithm(
        "dcgreedy", lambda N, b: dc_greedy(f, mat, N, eps, b), s=max(1, rank * steps),
        alpha=alpha, constraint=mat, randomized=True, make_b=make_b)
