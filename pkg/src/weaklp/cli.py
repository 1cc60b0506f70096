"""Reproducible experiment runner.

Exit codes: 0 all verdicts pass, 1 config or execution error, 2 verdict
failure, 3 inconclusive (unconverged estimates).  For a fixed config and
seed the CSV and JSON outputs are byte-identical whatever --workers is;
wall-clock timings go to a sidecar timings.json outside that contract.
"""
from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .errors import ConsistencyError, InvalidParameterError, PreconditionError
from .experiments import ConfigError, run_experiment
from .reporting import Report, write_csv

EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_FAIL = 2
EXIT_INCONCLUSIVE = 3


def _load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _resolve_workers(args):
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get("WEAKLP_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"WEAKLP_WORKERS must be an integer, got {env!r}")
    return 1


def _finish(report: Report, out: Path, timings, verbose):
    report.write(out / "report.json")
    (out / "timings.json").write_text(json.dumps(timings, sort_keys=True, indent=2) + "\n")
    code = report.worst_exit_code()
    if verbose:
        for key, v in sorted(report.verdicts.items()):
            state = v["pass"] if isinstance(v["pass"], str) else ("pass" if v["pass"] else "FAIL")
            print(f"{key}: {state} (tolerance {v['tolerance']})")
        print(f"report: {out / 'report.json'}")
    return code


def _cmd_run(args):
    cfg = _load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    workers = _resolve_workers(args)
    seed = args.seed if args.seed is not None else cfg.get("seed")
    t0 = time.perf_counter()
    report = run_experiment(cfg, out, workers, seed)
    timings = {"total_s": time.perf_counter() - t0}
    return _finish(report, out, timings, args.verbose)


def _cmd_sweep(args):
    cfg = _load_config(args.config)
    sweep = cfg.get("sweep")
    if not isinstance(sweep, dict) or not sweep:
        raise ConfigError("config field 'sweep' must be a non-empty object of parameter lists")
    base_seed = args.seed if args.seed is not None else cfg.get("seed")
    if base_seed is None:
        raise ConfigError("config field 'seed' is required")
    keys = sorted(sweep)
    grids = [sweep[k] for k in keys]
    if any(not isinstance(g, list) or not g for g in grids):
        raise ConfigError("config field 'sweep.*' entries must be non-empty lists")
    jobs = list(itertools.product(*grids))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    workers = _resolve_workers(args)

    def run_job(item):
        idx, combo = item
        job_cfg = json.loads(json.dumps({k: v for k, v in cfg.items() if k != "sweep"}))
        for key, val in zip(keys, combo):
            node = job_cfg
            parts = key.split(".")
            for part in parts[:-1]:
                node = node.setdefault(part, {})
            node[parts[-1]] = val
        job_out = out / f"job_{idx:03d}"
        job_out.mkdir(parents=True, exist_ok=True)
        report = run_experiment(job_cfg, job_out, 1, int(base_seed) ^ idx)
        report.write(job_out / "report.json")
        return report

    t0 = time.perf_counter()
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run_job, enumerate(jobs)))
    else:
        reports = [run_job(it) for it in enumerate(jobs)]

    rows = []
    worst = EXIT_PASS
    for idx, (combo, rep) in enumerate(zip(jobs, reports)):
        worst = max(worst, rep.worst_exit_code())
        for key, v in sorted(rep.verdicts.items()):
            state = v["pass"] if isinstance(v["pass"], str) else ("pass" if v["pass"] else "fail")
            rows.append((idx, ";".join(f"{k}={c}" for k, c in zip(keys, combo)),
                         key, state, "" if v["observed"] is None else v["observed"],
                         v["tolerance"]))
    write_csv(out / "sweep.csv",
              ["job", "parameters", "verdict", "state", "observed", "tolerance"], rows)
    agg = Report("sweep", cfg, int(base_seed))
    agg.results["jobs"] = len(jobs)
    agg.results["exit_codes"] = [r.worst_exit_code() for r in reports]
    agg.add_verdict("sweep:all", worst == EXIT_PASS, 0, observed=worst,
                    detail="worst exit code across jobs")
    agg.write(out / "report.json")
    (out / "timings.json").write_text(
        json.dumps({"total_s": time.perf_counter() - t0}, sort_keys=True, indent=2) + "\n"
    )
    if args.verbose:
        print(f"{len(jobs)} jobs, worst exit {worst}")
    return worst


def _cmd_constants(args):
    cfg = {"experiment": "constants", "seed": 0, "params": {}}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = run_experiment(cfg, out, _resolve_workers(args), 0)
    return _finish(report, out, {"total_s": 0.0}, args.verbose)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="weaklp",
        description="Numerical verification experiments for weak-Lp difference-quotient norms",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        if config_required:
            p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="worker threads (fallback: WEAKLP_WORKERS env, then 1)")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--verbose", action="store_true")

    common(sub.add_parser("run", help="run one experiment config"))
    common(sub.add_parser("sweep", help="cartesian sweep over config parameter lists"))
    common(sub.add_parser("constants", help="dump the sphere-constant table"), config_required=False)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_constants(args)
    except (ConfigError, InvalidParameterError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ConsistencyError as exc:
        print(f"internal consistency error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
