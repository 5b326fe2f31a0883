"""Exhaustive ground truth for desk-scale instances.

Brute-force optima, exact inclusion probabilities over the subset lattice,
the consistency check for plug-in algorithms, and exact checks of the
inequalities the analysis rests on.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .constraints import Constraint
from .core import ElementSet, GroundSet, RandomStream, partition_uniform, sample_subset
from .errors import SizeRefusal
from .functions import (FractionalPoint, SubmodularOracle, TabulatedOracle, lovasz_exact,
                        multilinear_exact_small)
from .sequential import AlgOutput, greedy

__all__ = [
    "OracleReport",
    "brute_force_opt",
    "feasible_sets",
    "inclusion_probability_exact",
    "union_membership_frequency",
    "check_consistency",
    "lemma_battery",
    "dichotomy_check",
    "strong_greedy_margin",
    "submodularity_violations",
    "ParityTieGreedy",
    "MAX_BRUTE_FORCE",
    "lovasz_identity_violations",
    "MAX_INCLUSION",
]

MAX_BRUTE_FORCE = 22
MAX_INCLUSION = 14

Alg = Callable[..., AlgOutput]


@dataclass
class OracleReport:
    opt_set: list[int] | None = None
    opt_value: float | None = None
    probabilities: dict[int, float] = field(default_factory=dict)
    passed: bool = True
    failures: list[dict] = field(default_factory=list)
    margins: dict[str, float] = field(default_factory=dict)
    trials: int = 0

    def fail(self, **counterexample) -> None:
        self.passed = False
        self.failures.append(counterexample)

    def to_dict(self) -> dict:
        return asdict(self)


def feasible_sets(c: Constraint, N: Iterable[int]) -> list[tuple[int, ...]]:
    """All independent subsets of ``N`` in lexicographic order of their member lists."""
    items = sorted({int(e) for e in N})
    out: list[tuple[int, ...]] = []

    def dfs(start: int, chosen: list[int]):
        out.append(tuple(chosen))
        for j in range(start, len(items)):
            chosen.append(items[j])
            if c.is_independent(chosen):
                dfs(j + 1, chosen)
            chosen.pop()

    dfs(0, [])
    return out


def brute_force_opt(f: SubmodularOracle, c: Constraint, N: Iterable[int]) -> tuple[ElementSet, float]:
    """Exact maximizer over independent subsets of ``N``; ties go to the lexicographically first."""
    items = sorted({int(e) for e in N})
    if len(items) > MAX_BRUTE_FORCE:
        raise SizeRefusal(f"brute force over {len(items)} elements (limit {MAX_BRUTE_FORCE})")
    sets = feasible_sets(c, items)
    cols = np.asarray(items, dtype=np.int64)
    pos = {e: i for i, e in enumerate(items)}
    values = np.empty(len(sets))
    chunk = 1 << 14
    for start in range(0, len(sets), chunk):
        block = sets[start:start + chunk]
        masks = np.zeros((len(block), cols.size), dtype=bool)
        for r, S in enumerate(block):
            masks[r, [pos[e] for e in S]] = True
        values[start:start + len(block)] = f.values(cols, masks)
    j = int(np.argmax(values))
    return ElementSet(sets[j], f.n), float(values[j])


def _call(alg: Alg, N, b):
    return alg(N, b) if b is not None else alg(N)


def inclusion_probability_exact(alg: Alg, C_hat: Iterable[int], e: int, ground: GroundSet, m: float,
                                b=None) -> float:
    """``Pr_{X ~ V(1/m)}[e in rel(C_hat | X | {e})]`` by summing over the subset lattice.

    Elements of ``C_hat`` and ``e`` itself are always present, so only the
    remaining elements are enumerated.
    """
    C = set(int(a) for a in C_hat)
    free = [a for a in range(ground.n) if a not in C and a != e]
    if ground.n > MAX_INCLUSION:
        raise SizeRefusal(f"exact inclusion probability needs n <= {MAX_INCLUSION}")
    p = 1.0 / m
    total = mass = 0.0
    for code in range(1 << len(free)):
        X = [free[j] for j in range(len(free)) if code >> j & 1]
        w = p ** len(X) * (1.0 - p) ** (len(free) - len(X))
        mass += w
        if e in _call(alg, sorted(C | set(X) | {e}), b).rel:
            total += w
    if abs(mass - 1.0) > 1e-9:
        raise AssertionError(f"subset lattice mass {mass} != 1")
    return min(1.0, total)


def union_membership_frequency(alg: Alg, C_hat: Iterable[int], e: int, ground: GroundSet, m: int,
                               g: int, trials: int, stream: RandomStream, b=None) -> float:
    """Empirical ``Pr[e in union of rel(C_hat | X_i)]`` over ``g`` independent ``m``-partitions."""
    C = ElementSet(C_hat, ground)
    hits = 0
    for t in range(trials):
        found = False
        for j in range(g):
            parts = partition_uniform(ground, m, stream.child("trial", t).child("group", j))
            for X in parts:
                if e in X and e in _call(alg, X | C, b).rel:
                    found = True
                    break
            if found:
                break
        hits += found
    return hits / trials


def check_consistency(alg, ground: GroundSet, trials: int, stream: RandomStream,
                      density: tuple[float, float] = (0.2, 0.7)) -> OracleReport:
    """Random ``A``; ``B`` = elements individually rejected; compare the outputs on ``A`` and ``A | B``.

    ``alg`` is a :class:`~submax.sequential.SequentialAlgorithm` or any
    callable ``(N, b) -> AlgOutput`` (``b`` is drawn with ``alg.draw_b`` when
    available).
    """
    rep = OracleReport()
    draw = getattr(alg, "draw_b", None)
    for t in range(trials):
        ts = stream.child("trial", t)
        lo, hi = density
        p = lo + (hi - lo) * float(ts.child("density").generator().random())
        A = sample_subset(ground, p, ts.child("A"))
        b = draw(ts.child("b")) if draw is not None else None
        base = alg(A, b)
        B = [e for e in range(ground.n) if e not in A and alg(A.add(e), b).rel == base.rel]
        joined = alg(A | B, b)
        rep.trials += 1
        if joined.sol != base.sol or joined.rel != base.rel:
            rep.fail(trial=t, A=list(A), B=B, sol_A=list(base.sol), sol_AB=list(joined.sol),
                     rel_A=list(base.rel), rel_AB=list(joined.rel))
    return rep


class ParityTieGreedy:
    """Deliberately inconsistent Greedy: ties go to the largest index when ``|N|`` is odd.

    Used as a negative control for :func:`check_consistency`.
    """

    def __init__(self, f: SubmodularOracle, c: Constraint):
        self.f, self.c = f, c

    def __call__(self, N, b=None) -> AlgOutput:
        items = sorted(int(e) for e in N)
        flip = len(items) % 2 == 1
        state = self.f.state()
        picked: list[int] = []
        alive = np.asarray(items, dtype=np.int64)
        while alive.size:
            alive = alive[self.c.addable(picked, alive)]
            if not alive.size:
                break
            gains = state.gains(alive)
            top = np.flatnonzero(gains == gains.max())
            j = int(top[-1] if flip else top[0])
            if gains[j] <= 0:
                break
            picked.append(int(alive[j]))
            state.add(alive[j])
            alive = np.delete(alive, j)
        sol = ElementSet(picked, self.f.n)
        return AlgOutput(sol, sol)


def submodularity_violations(f: SubmodularOracle, tol: float = 1e-9) -> dict[str, int]:
    """Exhaustive count of negative values, submodularity and (if flagged) monotonicity violations."""
    table = f.table if isinstance(f, TabulatedOracle) else TabulatedOracle(f).table
    n = f.n
    full = np.arange(1 << n, dtype=np.int64)
    out = {"negative": int(np.sum(table < -tol)), "submodular": 0, "monotone": 0}
    for i in range(n):
        bi = 1 << i
        A = full[(full & bi) == 0]
        gain_i = table[A | bi] - table[A]
        if f.monotone:
            out["monotone"] += int(np.sum(gain_i < -tol))
        for j in range(i + 1, n):
            bj = 1 << j
            A2 = A[(A & bj) == 0]
            lhs = table[A2 | bi] + table[A2 | bj]
            rhs = table[A2 | bi | bj] + table[A2]
            out["submodular"] += int(np.sum(lhs < rhs - tol))
    return out


def strong_greedy_margin(f: SubmodularOracle, c: Constraint, gamma: float,
                         N: Iterable[int] | None = None, greedy_alg=None) -> float:
    """``min_S f(G) - gamma f(G | S)`` over all feasible ``S``, where ``G`` is Greedy's output."""
    items = list(range(f.n)) if N is None else sorted(N)
    G = (greedy_alg or (lambda M: greedy(f, c, M).sol))(items)
    fg = f.value(G)
    return min(fg - gamma * f.value(set(G) | set(S)) for S in feasible_sets(c, items))


def lemma_battery(instances: Sequence[tuple[SubmodularOracle, Constraint]], stream: RandomStream,
                  samples: int = 30, tol: float = 1e-9) -> OracleReport:
    """Exact checks of three inequalities on each ``(f, c)`` instance (``n <= 12``).

    * restricted to ``OPT``, ``f`` is monotone;
    * ``E[f(R | S)] >= p f(T | S) + (1 - p) f(S)`` for ``R`` drawn from ``T`` with rates ``>= p``;
    * ``F(x v 1_S) >= (1 - max_e x_e) f(S)``.
    """
    rep = OracleReport(margins={"opt_monotone": np.inf, "sampled_union": np.inf, "join_bound": np.inf})
    for idx, (f, c) in enumerate(instances):
        if f.n > 12:
            raise SizeRefusal("lemma battery instances must have n <= 12")
        opt, _ = brute_force_opt(f, c, range(f.n))
        O = list(opt)
        for r in range(len(O) + 1):
            for X in itertools.combinations(O, r):
                for e in O:
                    if e in X:
                        continue
                    margin = f.value(set(X) | {e}) - f.value(X)
                    rep.margins["opt_monotone"] = min(rep.margins["opt_monotone"], margin)
                    if margin < -tol:
                        rep.fail(lemma="opt_monotone", instance=idx, X=list(X), e=e, margin=margin)
        gen = stream.child("instance", idx).generator()
        for _ in range(samples):
            T = [e for e in O if gen.random() < 0.6]
            S = [e for e in O if gen.random() < 0.4]
            p = float(gen.random())
            x = np.zeros(f.n)
            x[T] = p + (1.0 - p) * gen.random(len(T))
            x[S] = 1.0
            lhs = multilinear_exact_small(f, FractionalPoint.from_dense(x))
            rhs = p * f.value(set(T) | set(S)) + (1.0 - p) * f.value(S)
            rep.margins["sampled_union"] = min(rep.margins["sampled_union"], lhs - rhs)
            if lhs < rhs - tol:
                rep.fail(lemma="sampled_union", instance=idx, T=T, S=S, p=p, margin=lhs - rhs)

            Sx = [e for e in range(f.n) if gen.random() < 0.4]
            a = float(gen.random())
            y = a * gen.random(f.n)
            y[int(gen.integers(f.n))] = a
            joined = np.maximum(y, 0.0)
            joined[Sx] = 1.0
            lhs = multilinear_exact_small(f, FractionalPoint.from_dense(joined))
            rhs = (1.0 - a) * f.value(Sx)
            rep.margins["join_bound"] = min(rep.margins["join_bound"], lhs - rhs)
            if lhs < rhs - tol:
                rep.fail(lemma="join_bound", instance=idx, S=Sx, a=a, margin=lhs - rhs)
        rep.trials += 1
    return rep


def dichotomy_check(alg, f: SubmodularOracle, ground: GroundSet, C_hat: Iterable[int], m: int, g: int,
                    eps: float, alpha: float, opt: Iterable[int], b=None) -> dict:
    """Exact evaluation of the two alternatives for one run from pool ``C_hat``.

    (1) ``E[f(sol(C_hat | X_1))] >= (1 - eps)^2 alpha f(OPT)``, or
    (2) ``E[f(C_r & OPT)] - f(C_hat & OPT) >= (eps / 2) f(OPT)``.

    Expectations enumerate every assignment of the non-pool elements to the
    ``m`` machines of a group; the ``g`` groups are combined by convolving the
    distribution of ``OPT`` elements newly reached.
    """
    C = sorted(set(int(a) for a in C_hat))
    free = [e for e in range(ground.n) if e not in set(C)]
    if m ** len(free) > 1 << 20:
        raise SizeRefusal("too many machine assignments to enumerate")
    O = sorted(set(int(a) for a in opt))
    new_opt = [e for e in O if e not in set(C)]
    bit = {e: 1 << i for i, e in enumerate(new_opt)}
    f_opt = f.value(O)
    p1 = 1.0 / m
    e_sol = 0.0
    group_dist = np.zeros(1 << len(new_opt))
    for labels in itertools.product(range(m), repeat=len(free)):
        reached = 0
        w = p1 ** len(free)
        for i in range(m):
            X = [e for e, lab in zip(free, labels) if lab == i]
            out = _call(alg, sorted(set(C) | set(X)), b)
            if i == 0:
                e_sol += w * f.value(out.sol)
            for e in out.rel:
                reached |= bit.get(e, 0)
        group_dist[reached] += w
    dist = np.zeros_like(group_dist)
    dist[0] = 1.0
    for _ in range(g):
        nxt = np.zeros_like(dist)
        for a in np.flatnonzero(dist):
            for c in np.flatnonzero(group_dist):
                nxt[a | c] += dist[a] * group_dist[c]
        dist = nxt
    base = [e for e in O if e in set(C)]
    f_base = f.value(base)
    e_pool = sum(dist[mask] * f.value(base + [e for e in new_opt if mask & bit[e]])
                 for mask in np.flatnonzero(dist))
    cond1 = e_sol >= (1 - eps) ** 2 * alpha * f_opt - 1e-12
    cond2 = e_pool - f_base >= eps / 2 * f_opt - 1e-12
    return {"expected_sol": e_sol, "expected_pool_gain": e_pool - f_base, "f_opt": f_opt,
            "first": bool(cond1), "second": bool(cond2), "holds": bool(cond1 or cond2)}


def lovasz_identity_violations(f: SubmodularOracle, tol: float = 1e-9) -> int:
    """Count sets ``S`` with ``|f^-(1_S) - f(S)| > tol`` (exhaustive)."""
    bad = 0
    for code in range(1 << f.n):
        S = [e for e in range(f.n) if code >> e & 1]
        if abs(lovasz_exact(f, FractionalPoint.indicator(S, f.n)) - f.value(S)) > tol:
            bad += 1
    return bad
