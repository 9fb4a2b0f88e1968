"""Command-line runner: ``tmslab {twobody,stm3,fermi21,kvb,report}``.

Settings are merged in the order defaults, ``--config`` file, environment
(``TMSLAB_OUT``, ``TMSLAB_THREADS``), explicit flags.  Each lab writes
``<out>/<id>/record.json`` together with ``series_*.csv`` and ``plot_*.svg``.
The exit status is 0 when every check passes, 1 when a check fails, 2 for
configuration errors and 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .config import (
    COMMANDS,
    TOLERANCE_DEFAULTS,
    ConfigError,
    ExperimentConfig,
    apply_environment,
    load_config,
)
from .errors import FitFailure, NotBracketedError, NumericalFailure
from .records import read_record, write_outputs
from .suites import run_suite

__all__ = ["main", "run", "build_parser", "config_from_args", "collect_records"]

log = logging.getLogger("tmslab")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

_FLAG_FIELDS = {"grid_n": "grid_n", "p_min": "p_min", "p_max": "p_max", "alpha": "alpha", "lam": "lam",
                "mass": "mass", "ell": "ell", "levels": "levels", "out": "out", "threads": "threads",
                "seed": "seed", "experiment_id": "experiment_id"}


def collect_records(out_dir):
    """Records found under ``out_dir/*/record.json``, sorted by experiment id."""
    paths = sorted(Path(out_dir).glob("*/record.json"))
    return [read_record(p) for p in paths]


def _report(cfg: ExperimentConfig):
    records = collect_records(cfg.out)
    if not records:
        raise ConfigError(f"no records under {cfg.out}")
    rows = []
    for r in records:
        failed = sorted(k for k, c in r.checks.items() if not c["passed"])
        rows.append((r.experiment_id, r.inputs.get("command", ""), len(r.checks), len(failed), " ".join(failed)))
    path = Path(cfg.out) / "summary.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("experiment_id", "command", "checks", "failed", "failed_checks"))
        w.writerows(rows)
    width = max(len(r[0]) for r in rows)
    print(f"{'experiment':<{width}}  command   checks  failed")
    for eid, cmd, n, nf, names in rows:
        print(f"{eid:<{width}}  {cmd:<8}  {n:>6}  {nf:>6}  {names}")
    return records


def run(config: ExperimentConfig):
    """Execute the configured suite and write its outputs; returns the list of records."""
    if config.command == "report":
        return _report(config)
    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        outcome = run_suite(config, pool)
    outcome.record.runtime = {"wall_time_s": round(time.perf_counter() - t0, 3), "threads": config.threads}
    d = write_outputs(outcome.record, outcome.series, outcome.plots, config.out)
    log.info("wrote %s", d)
    return [outcome.record]


def _common_flags():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="INI configuration file")
    p.add_argument("--id", dest="experiment_id", help="experiment id (output subdirectory)")
    p.add_argument("--grid-n", type=int, help="number of radial nodes")
    p.add_argument("--p-min", type=float, help="lower momentum cutoff")
    p.add_argument("--p-max", type=float, help="upper momentum cutoff")
    p.add_argument("--alpha", type=float, help="extension parameter (inverse scattering length)")
    p.add_argument("--lambda", dest="lam", type=float, help="reference shift lambda > 0")
    p.add_argument("--mass", type=float, help="mass of the third particle (fermions have mass 1)")
    p.add_argument("--ell", help="comma-separated angular sectors")
    p.add_argument("--levels", type=int, help="number of three-boson levels")
    p.add_argument("--seed", type=int, help="seed of the random test samples")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="worker threads for parameter sweeps")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser():
    parent = _common_flags()
    parser = argparse.ArgumentParser(
        prog="tmslab",
        description="Zero-range three-body experiments. Thresholds can be overridden with --tol-<name> VALUE.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "twobody": "two-body point interaction: parameters, shell asymptotics, bound state",
        "stm3": "three bosons: level cascade and log-periodic charges",
        "fermi21": "2+1 fermions: sector operators, mapping norms, mass criticality",
        "kvb": "extension theory bounds on the two-body family",
        "report": "summarise the records found in the output directory",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[parent], help=helps[name])
        names = ", ".join(sorted(TOLERANCE_DEFAULTS[name])) or "none"
        sp.description = f"{helps[name]}. Tolerances: {names}."
    return parser


_TOL_RE = re.compile(r"^--tol-([a-z0-9_/-]+)(?:=(.*))?$")


def _parse_tolerances(extra, parser):
    tols = {}
    it = iter(extra)
    for tok in it:
        m = _TOL_RE.match(tok)
        if not m:
            parser.error(f"unrecognized argument {tok}")
        value = m.group(2)
        if value is None:
            value = next(it, None)
            if value is None:
                parser.error(f"{tok} needs a value")
        try:
            tols[m.group(1).replace("-", "_")] = float(value)
        except ValueError:
            parser.error(f"{tok}: {value!r} is not a number")
    return tols


def config_from_args(argv=None, environ=None) -> ExperimentConfig:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    tols = _parse_tolerances(extra, parser)
    kw = load_config(args.config, args.command) if args.config is not None else {"command": args.command}
    cfg = apply_environment(ExperimentConfig(**kw), environ)
    changes = {}
    for attr, fld in _FLAG_FIELDS.items():
        v = getattr(args, attr)
        if v is not None:
            changes[fld] = tuple(int(x) for x in v.split(",")) if attr == "ell" else v
    if tols:
        changes["tolerances"] = {**kw.get("tolerances", {}), **tols}
    return dataclasses.replace(cfg, **changes) if changes else cfg


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    logging.basicConfig(level=logging.INFO if ("-v" in argv or "--verbose" in argv) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(argv)
        records = run(cfg)
    except (ValueError, OSError) as exc:
        print(f"tmslab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, FitFailure, NotBracketedError) as exc:
        print(f"tmslab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if cfg.command != "report":
        r = records[0]
        for name, c in r.checks.items():
            print(f"{'PASS' if c['passed'] else 'FAIL'}  {name}  value={c['value']}  threshold={c['threshold']}"
                  + (f"  ({c['detail']})" if c["detail"] else ""))
        for k, v in r.scalars.items():
            print(f"      {k} = {v}")
    return EXIT_OK if all(r.passed for r in records) else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
