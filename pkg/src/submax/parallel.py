"""The ParallelAlg framework on a simulated MPC cluster, with resource accounting.

A run partitions the ground set independently within each of ``g`` groups of
``m`` machines.  Machine ``i`` of group ``j`` runs the plugged-in algorithm on
its part together with the pool ``C``; the pool then absorbs every relevant
set and the incumbent keeps the best solution seen.  Stream paths are
``("run", r) / ("group", j) / ("partition" | ("machine", i))`` in both the
duplicated and the sequential-sub-run variants, so the two produce identical
results for a given seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from .constraints import Constraint
from .core import ElementSet, GroundSet, RandomStream, partition_uniform
from .errors import ContractViolation, InvalidConfiguration
from .functions import SubmodularOracle
from .sequential import SequentialAlgorithm

__all__ = [
    "ParallelConfig",
    "MachineRecord",
    "RunRecord",
    "RunTranscript",
    "Budgets",
    "ResourceReport",
    "parallel_alg",
    "parallel_alg_nodup",
    "resource_report",
    "TRANSCRIPT_SCHEMA_VERSION",
]

TRANSCRIPT_SCHEMA_VERSION = 1


@dataclass
class ParallelConfig:
    """Cluster shape and schedule.

    ``g`` and ``R`` default to ``ceil(c_g / (eps * alpha))`` and
    ``ceil(c_R / eps)``.  Explicit values below those minimums are rejected
    unless ``enforce_minimums`` is off.  ``final_round`` defaults to whether
    the plug-in is randomized.
    """

    eps: float
    m: int
    g: int | None = None
    R: int | None = None
    duplicate_dataset: bool = True
    alpha_hint: float | None = None
    c_g: float = 2.0
    c_R: float = 7.0
    final_round: bool | None = None
    enforce_minimums: bool = True

    def resolve(self, alg: SequentialAlgorithm) -> tuple[int, int, float, bool]:
        if not 0.0 < self.eps < 1.0:
            raise InvalidConfiguration(f"eps must lie in (0, 1), got {self.eps}")
        if self.m < 1:
            raise InvalidConfiguration(f"machine count must be >= 1, got {self.m}")
        alpha = alg.alpha if self.alpha_hint is None else self.alpha_hint
        if not 0.0 < alpha <= 1.0:
            raise InvalidConfiguration(f"alpha must lie in (0, 1], got {alpha}")
        g_min = math.ceil(self.c_g / (self.eps * alpha) - 1e-9)
        r_min = math.ceil(self.c_R / self.eps - 1e-9)
        g = g_min if self.g is None else self.g
        R = r_min if self.R is None else self.R
        if g < 1 or R < 1:
            raise InvalidConfiguration("group and run counts must be >= 1")
        if self.enforce_minimums and (g < g_min or R < r_min):
            raise InvalidConfiguration(
                f"g={g}, R={R} below the minimums g>={g_min}, R>={r_min} "
                "(set enforce_minimums=false to allow)")
        final = alg.randomized if self.final_round is None else self.final_round
        return g, R, alpha, final


@dataclass
class MachineRecord:
    run: int
    group: int
    machine: int
    sample_size: int
    input_size: int
    sol_size: int
    rel_size: int
    sol_value: float
    words_sent: int
    space: int


@dataclass
class RunRecord:
    run: int
    sub_run: int | None
    pool: list[int]
    incumbent: list[int]
    incumbent_value: float
    machines: list[MachineRecord] = field(default_factory=list)


@dataclass
class RunTranscript:
    n: int
    m: int
    g: int
    R: int
    eps: float
    alpha: float
    s: int
    algorithm: str
    duplicate_dataset: bool
    final_round: bool
    runs: list[RunRecord] = field(default_factory=list)
    final: MachineRecord | None = None
    output: list[int] = field(default_factory=list)
    output_value: float = 0.0

    @property
    def rounds(self) -> int:
        return len(self.runs) + (1 if self.final_round else 0)

    def machine_records(self) -> list[MachineRecord]:
        out = [rec for run in self.runs for rec in run.machines]
        if self.final is not None:
            out.append(self.final)
        return out

    def round_words(self) -> list[int]:
        totals = [sum(r.words_sent for r in run.machines) for run in self.runs]
        if self.final is not None:
            totals.append(self.final.words_sent)
        return totals

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = TRANSCRIPT_SCHEMA_VERSION
        d["rounds"] = self.rounds
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def _machine(alg, f, c, N, b, *, run, group, machine, sample_size, extra_words, best_size):
    out = alg(N, b)
    if not c.is_independent(out.sol):
        raise ContractViolation(
            f"{alg.name} returned an infeasible solution {list(out.sol)} (run {run}, machine {machine})")
    if len(out.sol | out.rel) > alg.s:
        raise ContractViolation(
            f"{alg.name} returned {len(out.sol | out.rel)} elements, above its declared s={alg.s}")
    value = f.value(out.sol)
    rec = MachineRecord(
        run=run, group=group, machine=machine, sample_size=sample_size, input_size=len(N),
        sol_size=len(out.sol), rel_size=len(out.rel), sol_value=value,
        words_sent=sample_size + len(out.rel) * extra_words + len(out.sol) + 1,
        space=len(N) + best_size)
    return out, value, rec


def _run_group(alg, f, c, ground, run_stream, gi, m, pool, best_size, peers):
    parts = partition_uniform(ground, m, run_stream.child("group", gi).child("partition"))
    results = []
    for i, X in enumerate(parts):
        b = alg.draw_b(run_stream.child("group", gi).child("machine", i))
        out, value, rec = _machine(
            alg, f, c, X | pool, b, run=0, group=gi, machine=i, sample_size=len(X),
            extra_words=peers, best_size=best_size)
        results.append((out, value, rec))
    return results


def _execute(alg, f, c, ground, cfg, stream, duplicate):
    g, R, alpha, final = cfg.resolve(alg)
    n = ground.n
    transcript = RunTranscript(
        n=n, m=cfg.m, g=g, R=R, eps=cfg.eps, alpha=alpha, s=alg.s, algorithm=alg.name,
        duplicate_dataset=duplicate, final_round=final)
    pool = ElementSet((), ground)
    best = ElementSet((), ground)
    best_value = f.value(())
    if n == 0:
        transcript.output_value = best_value
        return best, transcript
    # pool elements go to every other machine that is active in the same round
    peers = g * cfg.m - 1 if duplicate else cfg.m - 1
    for r in range(1, R + 1):
        run_stream = stream.child("run", r)
        batch = []
        records: list[list[MachineRecord]] = []
        for gi in range(g):
            res = _run_group(alg, f, c, ground, run_stream, gi, cfg.m, pool, len(best), peers)
            for _, _, rec in res:
                rec.run = r
            batch.extend(res)
            records.append([rec for _, _, rec in res])
        start_pool, start_best, start_value = list(pool), list(best), best_value
        for out, value, _ in batch:
            if value > best_value:
                best, best_value = out.sol, value
        for out, _, _ in batch:
            pool = pool | out.rel
        if duplicate:
            transcript.runs.append(RunRecord(
                run=r, sub_run=None, pool=list(pool), incumbent=list(best),
                incumbent_value=best_value, machines=[x for grp in records for x in grp]))
        else:
            # updates are applied at the barrier after the last sub-run
            for gi, grp in enumerate(records):
                last = gi == g - 1
                transcript.runs.append(RunRecord(
                    run=r, sub_run=gi, pool=list(pool) if last else start_pool,
                    incumbent=list(best) if last else start_best,
                    incumbent_value=best_value if last else start_value, machines=grp))
    if final:
        b = alg.draw_b(stream.child("final"))
        out, value, rec = _machine(
            alg, f, c, pool, b, run=R + 1, group=0, machine=0, sample_size=0,
            extra_words=0, best_size=len(best))
        transcript.final = rec
        if value > best_value:
            best, best_value = out.sol, value
    transcript.output = list(best)
    transcript.output_value = best_value
    return best, transcript


def parallel_alg(alg: SequentialAlgorithm, f: SubmodularOracle, c: Constraint, ground: GroundSet,
                 cfg: ParallelConfig, stream: RandomStream) -> tuple[ElementSet, RunTranscript]:
    """Run ParallelAlg; returns the output set and the full transcript."""
    return _execute(alg, f, c, ground, cfg, stream, duplicate=True)


def parallel_alg_nodup(alg: SequentialAlgorithm, f: SubmodularOracle, c: Constraint,
                       ground: GroundSet, cfg: ParallelConfig,
                       stream: RandomStream) -> tuple[ElementSet, RunTranscript]:
    """Single group of ``m`` machines; each run is split into ``g`` sequential sub-runs.

    Pool and incumbent change only after the last sub-run of a run, so the
    output matches :func:`parallel_alg` on the same stream.
    """
    return _execute(alg, f, c, ground, cfg, stream, duplicate=False)


@dataclass
class Budgets:
    c_R: float = 7.0
    c_S: float = 4.0
    c_C: float = 4.0


@dataclass
class ResourceReport:
    rounds: int
    max_space: int
    max_machine_words: int
    max_round_words: int
    machines: int
    round_budget: float
    space_budget: float
    round_words_budget: float
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ok"] = self.ok
        return d


def resource_report(t: RunTranscript, n: int, s: int, eps: float, alpha: float,
                    budgets: Budgets | None = None) -> ResourceReport:
    """Measured rounds, space and communication against the configured budgets."""
    budgets = budgets or Budgets()
    recs = t.machine_records()
    scale = eps * alpha
    rep = ResourceReport(
        rounds=t.rounds,
        max_space=max((r.space for r in recs), default=0),
        max_machine_words=max((r.words_sent for r in recs), default=0),
        max_round_words=max(t.round_words(), default=0),
        machines=t.g * t.m if t.duplicate_dataset else t.m,
        round_budget=budgets.c_R / eps + 1,
        space_budget=budgets.c_S * math.sqrt(n * max(s, 1)) / scale,
        round_words_budget=budgets.c_C * n / scale,
    )
    if rep.rounds > rep.round_budget:
        rep.violations.append(f"rounds {rep.rounds} > {rep.round_budget:.1f}")
    if rep.max_space > rep.space_budget:
        rep.violations.append(f"machine space {rep.max_space} > {rep.space_budget:.1f}")
    if rep.max_machine_words > rep.space_budget:
        rep.violations.append(f"machine words {rep.max_machine_words} > {rep.space_budget:.1f}")
    if rep.max_round_words > rep.round_words_budget:
        rep.violations.append(f"round words {rep.max_round_words} > {rep.round_words_budget:.1f}")
    return rep
