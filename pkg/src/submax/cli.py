"""Command-line experiment runner.

``submax run --config cfg.json`` loads instances, runs the selected pipeline
once per seed and writes a JSON results file.  ``submax validate`` checks a
config without running it and ``submax gen`` writes synthetic instances.
The config format is documented in ``docs/formats.md``.

Exit codes: 0 on success, 2 on configuration or parse errors, 3 when a run
violates a contract (infeasible output, or a budget flag under
``--strict-budgets``).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import __version__
from .constraints import Constraint, UniformMatroid
from .core import ElementSet, GroundSet, RandomStream
from .errors import ContractViolation, InvalidConfiguration, SubmaxError
from .formats import constraint_to_dict, load_json, parse_constraint, read_instance, write_instance
from .functions import InstanceSpec, SubmodularOracle, TabulatedOracle
from .instances import generate, trap_coverage
from .parallel import Budgets, ParallelConfig, parallel_alg, parallel_alg_nodup, resource_report
from .sequential import dcgreedy_plugin, dthresh_greedy, dthresh_plugin, greedy, greedy_plugin
from .testoracle import MAX_BRUTE_FORCE, brute_force_opt
from .tworound import (TwoRoundConfig, dcgreedy_stage, fast_matroid_sequential, greedy_stage,
                       two_round_cardinality, two_round_nonmonotone)

log = logging.getLogger("submax")

RESULTS_SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_CONTRACT = 0, 2, 3

ALGORITHMS = ("greedy", "dthresh", "dcgreedy", "tworound", "fastmatroid", "cardinality2r")
PLUGINS = ("greedy", "dthresh", "dcgreedy")
NEEDS_INTEGRAL_EPS = ("dcgreedy", "fastmatroid", "parallel:dcgreedy")


def round_eps(eps: float) -> float:
    """Largest ``1/q`` with integer ``q`` that does not exceed ``eps``."""
    if not 0.0 < eps <= 1.0:
        raise InvalidConfiguration(f"eps must lie in (0, 1], got {eps}")
    q = math.ceil(1.0 / eps - 1e-9)
    return 1.0 / q


@dataclass
class ExperimentConfig:
    instances: list[dict]
    constraint: dict
    algorithm: str
    seeds: list[int]
    eps: float = 0.25
    eps_requested: float = 0.25
    m: int = 2
    g: int | None = None
    R: int | None = None
    ell: int | None = None
    duplicate_dataset: bool = True
    second_stage: str | None = None
    oracle_checks: bool = False
    strict_budgets: bool = False
    tabulate: bool = False
    transcripts: bool = False
    budgets: dict = field(default_factory=dict)
    output: str | None = None
    csv: str | None = None
    base_dir: str = "."

    def identity(self) -> dict:
        """The fields that determine results; hashed into every row."""
        return {
            "instances": self.instances, "constraint": self.constraint, "algorithm": self.algorithm,
            "eps": self.eps, "m": self.m, "g": self.g, "R": self.R, "ell": self.ell,
            "duplicate_dataset": self.duplicate_dataset, "second_stage": self.second_stage,
            "oracle_checks": self.oracle_checks, "strict_budgets": self.strict_budgets,
            "tabulate": self.tabulate, "transcripts": self.transcripts, "budgets": self.budgets,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.identity(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


_KNOWN_KEYS = {"instance", "instances", "constraint", "algorithm", "seeds", "seed_count", "eps", "m",
               "g", "R", "ell", "duplicate_dataset", "second_stage", "oracle_checks",
               "strict_budgets", "tabulate", "transcripts", "budgets", "output", "csv"}


def _check_algorithm(name: str) -> None:
    if name.startswith("parallel:"):
        plugin = name.split(":", 1)[1]
        if plugin not in PLUGINS:
            raise InvalidConfiguration(f"unknown plug-in {plugin!r}; expected one of {PLUGINS}")
    elif name not in ALGORITHMS:
        raise InvalidConfiguration(
            f"unknown algorithm {name!r}; expected one of {ALGORITHMS} or parallel:<plugin>")


def config_from_dict(raw: dict, base_dir: str = ".", seed_count: int | None = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise InvalidConfiguration("config must be a JSON object")
    unknown = sorted(set(raw) - _KNOWN_KEYS)
    if unknown:
        raise InvalidConfiguration(f"unknown config keys {unknown}")
    for key in ("algorithm", "constraint"):
        if key not in raw:
            raise InvalidConfiguration(f"config is missing {key!r}")
    if "instance" in raw and "instances" in raw:
        raise InvalidConfiguration("give either 'instance' or 'instances', not both")
    instances = raw.get("instances", [raw["instance"]] if "instance" in raw else None)
    if not instances:
        raise InvalidConfiguration("config names no instance")
    for inst in instances:
        if not isinstance(inst, dict) or "kind" not in inst:
            raise InvalidConfiguration("each instance needs a 'kind'")
        if ("path" in inst) == ("generate" in inst):
            raise InvalidConfiguration("each instance needs exactly one of 'path' or 'generate'")
        if "path" in inst and not (Path(base_dir) / inst["path"]).exists():
            raise InvalidConfiguration(f"instance file {inst['path']} does not exist")
    cons = raw["constraint"]
    if not isinstance(cons, dict) or not ("kind" in cons or set(cons) == {"path"}):
        raise InvalidConfiguration("constraint must be an object with 'kind', or {'path': file}")
    if "path" in cons and not (Path(base_dir) / cons["path"]).exists():
        raise InvalidConfiguration(f"constraint file {cons['path']} does not exist")
    algorithm = raw["algorithm"]
    _check_algorithm(algorithm)

    if seed_count is not None:
        seeds = list(range(seed_count))
    elif "seeds" in raw:
        seeds = [int(s) for s in raw["seeds"]]
    else:
        seeds = list(range(int(raw.get("seed_count", 1))))
    if not seeds:
        raise InvalidConfiguration("at least one seed is required")
    if len(set(seeds)) != len(seeds):
        raise InvalidConfiguration("seeds must be distinct")

    eps_req = float(raw.get("eps", 0.25))
    eps = round_eps(eps_req) if algorithm in NEEDS_INTEGRAL_EPS else eps_req
    if eps != eps_req:
        log.warning("eps rounded down from %g to 1/%d", eps_req, round(1 / eps))
    m = int(raw.get("m", 2))
    if m < 1:
        raise InvalidConfiguration(f"machine count must be >= 1, got {m}")
    for key in ("g", "R", "ell"):
        if raw.get(key) is not None and int(raw[key]) < 1:
            raise InvalidConfiguration(f"{key} must be >= 1, got {raw[key]}")
    second = raw.get("second_stage")
    if second not in (None, "greedy", "dcgreedy"):
        raise InvalidConfiguration(f"second_stage must be 'greedy' or 'dcgreedy', got {second!r}")
    budgets = raw.get("budgets", {})
    bad = sorted(set(budgets) - {"c_R", "c_S", "c_C"})
    if bad:
        raise InvalidConfiguration(f"unknown budget constants {bad}")
    return ExperimentConfig(
        instances=instances, constraint=raw["constraint"], algorithm=algorithm, seeds=seeds,
        eps=eps, eps_requested=eps_req, m=m,
        g=None if raw.get("g") is None else int(raw["g"]),
        R=None if raw.get("R") is None else int(raw["R"]),
        ell=None if raw.get("ell") is None else int(raw["ell"]),
        duplicate_dataset=bool(raw.get("duplicate_dataset", True)), second_stage=second,
        oracle_checks=bool(raw.get("oracle_checks", False)),
        strict_budgets=bool(raw.get("strict_budgets", False)),
        tabulate=bool(raw.get("tabulate", False)), transcripts=bool(raw.get("transcripts", False)),
        budgets=dict(budgets), output=raw.get("output"), csv=raw.get("csv"), base_dir=base_dir)


def load_config(path, seed_count: int | None = None) -> ExperimentConfig:
    path = Path(path)
    return config_from_dict(load_json(path), str(path.parent), seed_count)


def load_instance(inst: dict, constraint: dict, base_dir: str = ".",
                  tabulate: bool = False) -> tuple[SubmodularOracle, Constraint, GroundSet]:
    """Oracle, constraint and ground set for one instance entry of a config."""
    kind = inst["kind"]
    if "generate" in inst:
        params = dict(inst["generate"])
        try:
            n = int(params.pop("n"))
        except KeyError:
            raise InvalidConfiguration("generated instance needs 'n'") from None
        seed = int(params.pop("seed", 0))
        try:
            spec = generate(kind, n, seed, **params)
        except TypeError as exc:
            raise InvalidConfiguration(f"bad generator parameters for {kind}: {exc}") from None
    else:
        spec = read_instance(Path(base_dir) / inst["path"], kind)
    f = spec.build()
    if set(constraint) == {"path"}:
        constraint = load_json(Path(base_dir) / constraint["path"])
    c = parse_constraint(constraint, spec.n)
    if tabulate and f.n <= TabulatedOracle.MAX_N:
        f = TabulatedOracle(f)
    return f, c, GroundSet(spec.n)


def _require_matroid(c: Constraint, name: str) -> None:
    if not c.is_matroid:
        raise InvalidConfiguration(f"{name} needs a matroid constraint, got {c.kind}")


def _plugin(name: str, f, c, cfg: ExperimentConfig):
    if name == "greedy":
        return greedy_plugin(f, c)
    if name == "dthresh":
        return dthresh_plugin(f, c, cfg.eps)
    _require_matroid(c, "dcgreedy")
    return dcgreedy_plugin(f, c, cfg.eps, ell=cfg.ell)


def _run_pipeline(cfg: ExperimentConfig, f, c, ground: GroundSet, seed: int) -> tuple[ElementSet, dict]:
    stream = RandomStream(seed)
    V = ground.full()
    extra: dict[str, Any] = {}
    name = cfg.algorithm
    if name == "greedy":
        return greedy(f, c, V).sol, extra
    if name == "dthresh":
        return dthresh_greedy(f, c, V, cfg.eps).sol, extra
    if name == "dcgreedy":
        alg = _plugin("dcgreedy", f, c, cfg)
        return alg(V, alg.draw_b(stream.child("b"))).sol, extra
    if name.startswith("parallel:"):
        alg = _plugin(name.split(":", 1)[1], f, c, cfg)
        pcfg = ParallelConfig(eps=cfg.eps, m=cfg.m, g=cfg.g, R=cfg.R,
                              duplicate_dataset=cfg.duplicate_dataset, enforce_minimums=False)
        g, R, alpha, _ = pcfg.resolve(alg)
        g_min = math.ceil(pcfg.c_g / (cfg.eps * alpha) - 1e-9)
        r_min = math.ceil(pcfg.c_R / cfg.eps - 1e-9)
        if g < g_min or R < r_min:
            log.warning("g=%d, R=%d below the guarantee minimums g>=%d, R>=%d", g, R, g_min, r_min)
        run = parallel_alg if cfg.duplicate_dataset else parallel_alg_nodup
        S, transcript = run(alg, f, c, ground, pcfg, stream)
        report = resource_report(transcript, ground.n, alg.s, cfg.eps, alpha, Budgets(**cfg.budgets))
        extra["resources"] = report.to_dict()
        extra["schedule"] = {"g": g, "R": R, "alpha": alpha, "s": alg.s}
        if cfg.transcripts:
            extra["transcript"] = transcript.to_dict()
        if cfg.strict_budgets and not report.ok:
            raise ContractViolation(f"seed {seed}: budget violations {report.violations}")
        return S, extra
    if name == "tworound":
        if cfg.second_stage == "greedy":
            stage = greedy_stage
        elif cfg.second_stage == "dcgreedy" or c.is_matroid:
            _require_matroid(c, "the dcgreedy second stage")
            stage = dcgreedy_stage(round_eps(cfg.eps), cfg.ell)
        else:
            stage = greedy_stage
        return two_round_nonmonotone(f, c, ground, TwoRoundConfig(cfg.m, stage), stream, extra), extra
    if name == "fastmatroid":
        _require_matroid(c, "fastmatroid")
        S = fast_matroid_sequential(f, c, cfg.eps, stream, report=extra)
        extra.pop("first_stage_seconds", None)
        return S, extra
    if name == "cardinality2r":
        if not isinstance(c, UniformMatroid):
            raise InvalidConfiguration("cardinality2r needs a cardinality constraint")
        return two_round_cardinality(f, c.bound, cfg.m, cfg.eps, stream, report=extra), extra
    raise InvalidConfiguration(f"unknown algorithm {name!r}")


def run_seed(cfg: ExperimentConfig, index: int, seed: int) -> tuple[dict, float]:
    """One result row plus its wall time (kept out of the row for reproducibility)."""
    f, c, ground = load_instance(cfg.instances[index], cfg.constraint, cfg.base_dir, cfg.tabulate)
    t0 = time.perf_counter()
    S, extra = _run_pipeline(cfg, f, c, ground, seed)
    wall = time.perf_counter() - t0
    feasible = c.is_independent(S)
    row = {
        "instance": index, "seed": seed, "config_hash": cfg.config_hash(), "version": __version__,
        "value": f.value(S), "feasible": feasible, "solution": list(S), **extra,
    }
    if not feasible:
        raise ContractViolation(f"seed {seed}: infeasible output {list(S)}")
    return row, wall


def _stats(xs: list[float]) -> dict:
    return {"mean": statistics.fmean(xs), "std": statistics.pstdev(xs) if len(xs) > 1 else 0.0,
            "min": min(xs), "max": max(xs), "count": len(xs)}


def _jobs(cfg: ExperimentConfig) -> list[tuple[int, int]]:
    return [(i, s) for i in range(len(cfg.instances)) for s in cfg.seeds]


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> tuple[dict, dict]:
    """Run every (instance, seed) pair; returns the results document and the timing sidecar."""
    work = _jobs(cfg)
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_seed, cfg, i, s) for i, s in work]
            out = [fut.result() for fut in futures]
    else:
        out = [run_seed(cfg, i, s) for i, s in work]
    rows = [r for r, _ in out]
    instances = []
    for i, inst in enumerate(cfg.instances):
        mine = [r for r in rows if r["instance"] == i]
        entry: dict[str, Any] = {"index": i, "spec": inst, "value": _stats([r["value"] for r in mine])}
        if cfg.oracle_checks:
            f, c, ground = load_instance(inst, cfg.constraint, cfg.base_dir, cfg.tabulate)
            if ground.n <= MAX_BRUTE_FORCE:
                opt_set, opt = brute_force_opt(f, c, ground.full())
                entry["opt"] = {"value": opt, "set": list(opt_set)}
                for r in mine:
                    r["ratio"] = r["value"] / opt if opt > 0 else 1.0
                entry["ratio"] = _stats([r["ratio"] for r in mine])
            else:
                entry["opt"] = None
                log.warning("instance %d: n=%d above the brute-force ceiling %d; ratios skipped",
                            i, ground.n, MAX_BRUTE_FORCE)
        instances.append(entry)
    doc: dict[str, Any] = {
        "schema_version": RESULTS_SCHEMA_VERSION,
        "version": __version__,
        "config_hash": cfg.config_hash(),
        "config": {**cfg.identity(), "seeds": cfg.seeds, "eps_requested": cfg.eps_requested},
        "rows": rows,
        "instances": instances,
        "aggregate": {"value": _stats([r["value"] for r in rows])},
    }
    if cfg.oracle_checks and all("ratio" in r for r in rows):
        doc["aggregate"]["ratio"] = _stats([r["ratio"] for r in rows])
    timing = {"config_hash": cfg.config_hash(),
              "rows": [{"instance": i, "seed": s, "wall_seconds": w} for (i, s), (_, w) in zip(work, out)],
              "total_seconds": sum(w for _, w in out)}
    return doc, timing


def write_results(doc: dict, timing: dict, out: Path, csv_path: Path | None = None) -> None:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    Path(str(out) + ".timing.json").write_text(json.dumps(timing, sort_keys=True, indent=2) + "\n",
                                               encoding="utf-8")
    if csv_path is not None:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["instance", "seed", "value", "feasible", "ratio", "rounds", "config_hash"])
            for r in doc["rows"]:
                writer.writerow([r["instance"], r["seed"], repr(r["value"]), r["feasible"],
                                 repr(r["ratio"]) if "ratio" in r else "",
                                 r.get("resources", {}).get("rounds", ""), r["config_hash"]])


def _setup_logging() -> None:
    level = os.environ.get("SUBMAX_LOG", "WARNING").upper()
    if level.isdigit():
        numeric = int(level)
    else:
        numeric = logging.getLevelName(level)
        if not isinstance(numeric, int):
            numeric = logging.WARNING
    logging.basicConfig(level=numeric, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _cmd_run(args) -> int:
    cfg = load_config(args.config, args.seed_count)
    if args.strict_budgets:
        cfg.strict_budgets = True
    if args.oracle_checks:
        cfg.oracle_checks = True
    out = args.out or cfg.output
    if out is None:
        raise InvalidConfiguration("no output path: pass --out or set 'output'")
    out = Path(out) if args.out else Path(cfg.base_dir) / out
    csv_path = args.csv or (Path(cfg.base_dir) / cfg.csv if cfg.csv else None)
    log.info("running %s on %d instance(s) x %d seed(s)", cfg.algorithm, len(cfg.instances), len(cfg.seeds))
    doc, timing = run_experiment(cfg, args.jobs)
    write_results(doc, timing, out, csv_path)
    agg = doc["aggregate"]
    line = f"{cfg.algorithm}: mean value {agg['value']['mean']:.6g} over {agg['value']['count']} run(s)"
    if "ratio" in agg:
        line += f", mean ratio {agg['ratio']['mean']:.4f}"
    if cfg.eps != cfg.eps_requested:
        line += f" (eps rounded to {cfg.eps:.6g})"
    print(line)
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    for inst in cfg.instances:
        f, c, ground = load_instance(inst, cfg.constraint, cfg.base_dir)
        if cfg.algorithm in ("dcgreedy", "fastmatroid", "parallel:dcgreedy"):
            _require_matroid(c, cfg.algorithm)
        if cfg.algorithm == "cardinality2r" and not isinstance(c, UniformMatroid):
            raise InvalidConfiguration("cardinality2r needs a cardinality constraint")
        print(f"ok: {inst['kind']} n={ground.n}, constraint {c.kind}, algorithm {cfg.algorithm}")
    if cfg.eps != cfg.eps_requested:
        print(f"note: eps rounded down from {cfg.eps_requested:g} to {cfg.eps:.6g}")
    return EXIT_OK


def _cmd_gen(args) -> int:
    if args.kind == "trap-coverage":
        if args.n % 3:
            raise InvalidConfiguration("trap-coverage needs n divisible by 3")
        spec, mat = trap_coverage(args.n // 3, delta=args.delta, rng=args.seed)
        write_instance(spec, args.out)
        cpath = args.constraint_out or str(args.out) + ".constraint.json"
        Path(cpath).write_text(json.dumps(constraint_to_dict(mat), indent=2) + "\n", encoding="utf-8")
        print(f"wrote coverage instance n={spec.n} to {args.out} and its constraint to {cpath}")
        return EXIT_OK
    params: dict[str, Any] = {}
    if args.kind == "coverage":
        params = {k: v for k, v in (("items", args.items), ("density", args.density)) if v is not None}
    elif args.kind == "facility-location" and args.clients is not None:
        params = {"clients": args.clients}
    elif args.kind == "graph-cut" and args.density is not None:
        params = {"p": args.density}
    if args.max_weight is not None and args.kind in ("graph-cut", "modular"):
        params["max_weight"] = int(args.max_weight) if args.kind == "graph-cut" else args.max_weight
    spec: InstanceSpec = generate(args.kind, args.n, args.seed, **params)
    write_instance(spec, args.out)
    print(f"wrote {args.kind} instance n={spec.n} to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="submax", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"submax {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--seed-count", type=int, help="use seeds 0..N-1 instead of the config's seeds")
    r.add_argument("--jobs", type=int, default=1, help="seeds run concurrently (default 1)")
    r.add_argument("--out", help="results JSON path (overrides the config)")
    r.add_argument("--csv", help="also write a CSV summary")
    r.add_argument("--strict-budgets", action="store_true", help="fail on any resource budget flag")
    r.add_argument("--oracle-checks", action="store_true", help="record value/OPT ratios by brute force")
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("validate", help="check a config and its instances")
    v.add_argument("--config", required=True)
    v.set_defaults(func=_cmd_validate)

    gparser = sub.add_parser("gen", help="write a synthetic instance")
    gparser.add_argument("--kind", required=True,
                         choices=["coverage", "facility-location", "graph-cut", "modular", "trap-coverage"])
    gparser.add_argument("--n", type=int, required=True)
    gparser.add_argument("--seed", type=int, default=0)
    gparser.add_argument("--items", type=int, help="coverage: number of items")
    gparser.add_argument("--density", type=float, help="coverage: item density; graph-cut: edge probability")
    gparser.add_argument("--clients", type=int, help="facility-location: number of clients")
    gparser.add_argument("--max-weight", type=float, help="graph-cut and modular: largest weight")
    gparser.add_argument("--delta", type=float, default=0.1, help="trap-coverage: bait weight")
    gparser.add_argument("--constraint-out", help="trap-coverage: where to write the partition matroid")
    gparser.add_argument("--out", required=True)
    gparser.set_defaults(func=_cmd_gen)
    return p


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except (SubmaxError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
