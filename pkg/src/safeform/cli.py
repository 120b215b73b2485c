"""Command-line front end: validate, run and plot scenarios.

Subcommands
-----------
check   validate a scenario file and list every violated invariant
run     simulate a scenario and write an output bundle
plot    render the standard plots from an output bundle
batch   run several scenarios back to back

An output bundle is a directory holding:

- ``trajectory.csv``  one row per (step, agent):
  t, agent_id, px, py, vx, vy, ux, uy, nominal_ux, nominal_uy, qp_status,
  qp_slack
- ``metrics.csv``     one row per step:
  t, e_f, min_pair_dist, min_h_ext, min_h_int, connected, num_edges,
  all_leaders_in_region
- ``events.csv``      t, kind, detail
- ``summary.json``    headline numbers (final e_f, t_f, min margins, counts)
- ``scenario.yaml``   the resolved scenario actually simulated, overrides
  applied

Scenario files are YAML mirroring the ``Scenario`` dataclass; see the shipped
files under ``safeform/scenarios/`` for the schema.  All units are SI.

Exit codes: 0 success, 1 validation failure, 2 runtime safety/connectivity
abort, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import yaml

from . import sim
from .errors import ScenarioError, SimulationError
from .scenario_io import (
    ScenarioFormatError,
    available_scenarios,
    load_scenario,
    save_scenario,
)
from .sim import _STATUS_NAMES, TrajectoryLog
from .world import Scenario

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_ABORT = 2
EXIT_IO = 3


def _fmt(x: float) -> str:
    """Shortest exact decimal form; reruns must be byte-identical."""
    return repr(float(x))


def write_bundle(out_dir: Path, log: TrajectoryLog) -> dict:
    """Write all tables for a (possibly aborted) run; returns summary dict."""
    out_dir.mkdir(parents=True, exist_ok=True)
    sc = log.scenario
    n_rows = log.n_rows
    n = sc.n_agents
    leaders = [a.id for a in sc.agents if a.is_leader]

    with open(out_dir / "trajectory.csv", "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["t", "agent_id", "px", "py", "vx", "vy", "ux", "uy",
                    "nominal_ux", "nominal_uy", "qp_status", "qp_slack"])
        for k in range(n_rows):
            t = _fmt(log.t[k])
            for i in range(n):
                w.writerow([
                    t, i,
                    _fmt(log.positions[k, i, 0]), _fmt(log.positions[k, i, 1]),
                    _fmt(log.velocities[k, i, 0]), _fmt(log.velocities[k, i, 1]),
                    _fmt(log.controls[k, i, 0]), _fmt(log.controls[k, i, 1]),
                    _fmt(log.nominal_controls[k, i, 0]),
                    _fmt(log.nominal_controls[k, i, 1]),
                    _STATUS_NAMES[log.qp_status[k, i]],
                    _fmt(log.qp_slack[k, i]),
                ])

    from .kernels import S_EF, S_MIN_HEXT, S_MIN_HINT, S_MIN_PAIR

    with open(out_dir / "metrics.csv", "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["t", "e_f", "min_pair_dist", "min_h_ext", "min_h_int",
                    "connected", "num_edges", "all_leaders_in_region"])
        for k in range(n_rows):
            inreg = all(log.in_region[k, i] for i in leaders)
            w.writerow([
                _fmt(log.t[k]),
                _fmt(log.scalars[k, S_EF]),
                _fmt(log.scalars[k, S_MIN_PAIR]),
                _fmt(log.scalars[k, S_MIN_HEXT]),
                _fmt(log.scalars[k, S_MIN_HINT]),
                int(log.connected[k]),
                len(log.edges[k]),
                int(inreg),
            ])

    with open(out_dir / "events.csv", "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["t", "kind", "detail"])
        for e in log.events:
            w.writerow([_fmt(e.t), e.kind, e.detail])

    summary = log.summary()
    clean = {k: (None if isinstance(v, float) and not math.isfinite(v) else v)
             for k, v in summary.items()}
    with open(out_dir / "summary.json", "w", encoding="utf-8") as f:
        json.dump(clean, f, indent=2, sort_keys=True)
        f.write("\n")

    save_scenario(sc, out_dir / "scenario.yaml")
    return summary


def _print_summary(summary: dict) -> None:
    ef0, eft = summary["formation_error_initial"], summary["formation_error_final"]
    print(f"scenario:          {summary['scenario']} "
          f"({summary['n_agents']} agents, backend {summary['backend']})")
    print(f"steps:             {summary['steps']} x dt={summary['dt']} "
          f"-> t_final={summary['t_final']}")
    print(f"formation error:   {ef0:.6g} -> {eft:.6g}")
    print(f"region entry t_f:  {summary['t_f']}")
    print(f"min pair distance: {summary['min_pair_dist']:.6g}")
    print(f"min barrier h:     external {summary['min_h_ext']:.6g}, "
          f"internal {summary['min_h_int']:.6g}")
    print(f"max |u|_inf:       {summary['max_control_inf']:.6g}")
    print(f"filtered steps:    {summary['filtered_steps']}, "
          f"relaxed QPs: {summary['relaxed_qp_events']}, "
          f"edge losses: {summary['edge_loss_events']}")
    print(f"connected:         {summary['connected_throughout']}")
    if summary["aborted"]:
        print(f"ABORTED:           {summary['aborted']}")


def _load(args: argparse.Namespace) -> Scenario:
    overrides = list(args.override or [])
    if getattr(args, "dt", None) is not None:
        overrides.append(f"dt={args.dt}")
    if getattr(args, "duration", None) is not None:
        overrides.append(f"duration={args.duration}")
    return load_scenario(args.scenario, overrides)


def cmd_check(args: argparse.Namespace) -> int:
    try:
        scenario = _load(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        print(f"parse error{where}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ScenarioFormatError, ValueError) as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    violations, warnings = scenario.validate()
    for msg in warnings:
        print(f"warning: {msg}")
    for msg in violations:
        print(f"violation: {msg}")
    if violations:
        print(f"{scenario.name}: {len(violations)} violation(s)")
        return EXIT_VALIDATION
    print(f"{scenario.name}: ok "
          f"({scenario.n_agents} agents, {len(scenario.obstacles)} obstacles, "
          f"duration {scenario.duration})")
    return EXIT_OK


def _run_one(scenario: Scenario, out_dir: Path, backend: str | None) -> int:
    try:
        log = sim.run(scenario, backend=backend)
    except SimulationError as exc:
        log = exc.log
        if log is not None:
            write_bundle(out_dir, log)
            _print_summary(log.summary())
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    write_bundle(out_dir, log)
    _print_summary(log.summary())
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = _load(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except yaml.YAMLError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ScenarioFormatError, ValueError) as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    violations, warnings = scenario.validate()
    for msg in warnings:
        print(f"warning: {msg}")
    if violations:
        for msg in violations:
            print(f"violation: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    out_dir = Path(args.out) if args.out else Path("runs") / scenario.name
    try:
        return _run_one(scenario, out_dir, args.backend)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def cmd_plot(args: argparse.Namespace) -> int:
    from . import plots

    bundle = Path(args.bundle)
    missing = [name for name in ("scenario.yaml", "trajectory.csv", "metrics.csv")
               if not (bundle / name).is_file()]
    if missing:
        print(f"error: {bundle} is not a run bundle; missing {', '.join(missing)}",
              file=sys.stderr)
        return EXIT_IO
    try:
        written = plots.render_bundle(bundle)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in written:
        print(path)
    return EXIT_OK


def cmd_batch(args: argparse.Namespace) -> int:
    out_root = Path(args.out) if args.out else Path("runs")
    worst = EXIT_OK
    for source in args.scenarios:
        try:
            overrides = list(args.override or [])
            if args.dt is not None:
                overrides.append(f"dt={args.dt}")
            if args.duration is not None:
                overrides.append(f"duration={args.duration}")
            scenario = load_scenario(source, overrides)
        except FileNotFoundError as exc:
            print(f"error: {exc}", file=sys.stderr)
            worst = max(worst, EXIT_IO)
            continue
        except (yaml.YAMLError, ScenarioFormatError, ValueError) as exc:
            print(f"invalid scenario {source}: {exc}", file=sys.stderr)
            worst = max(worst, EXIT_VALIDATION)
            continue
        violations, _ = scenario.validate()
        if violations:
            for msg in violations:
                print(f"violation ({source}): {msg}", file=sys.stderr)
            worst = max(worst, EXIT_VALIDATION)
            continue
        print(f"=== {scenario.name}")
        try:
            code = _run_one(scenario, out_root / scenario.name, args.backend)
        except OSError as exc:
            print(f"i/o error: {exc}", file=sys.stderr)
            code = EXIT_IO
        worst = max(worst, code)
    return worst


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="safeform",
        description="Safe-region formation control simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="dot-path scenario override, e.g. params.c2=0.06 "
                            "(repeatable)")
        p.add_argument("--dt", type=float, default=None,
                       help="integration step override")
        p.add_argument("--duration", type=float, default=None,
                       help="simulated duration override")
        p.add_argument("--seed", type=int, default=None,
                       help="reserved; the simulator is deterministic")

    p_check = sub.add_parser("check", help="validate a scenario file")
    p_check.add_argument("scenario",
                         help="scenario file path or shipped scenario name "
                              f"({', '.join(available_scenarios())})")
    common(p_check)
    p_check.set_defaults(func=cmd_check)

    p_run = sub.add_parser("run", help="simulate a scenario, write a bundle")
    p_run.add_argument("scenario", help="scenario file path or shipped name")
    p_run.add_argument("--out", default=None,
                       help="bundle directory (default runs/<name>)")
    p_run.add_argument("--backend", choices=("cython", "python"), default=None,
                       help="force a compute backend (default: fastest available)")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_plot = sub.add_parser("plot", help="render plots from a run bundle")
    p_plot.add_argument("bundle", help="bundle directory written by 'run'")
    p_plot.set_defaults(func=cmd_plot)

    p_batch = sub.add_parser("batch", help="run several scenarios")
    p_batch.add_argument("scenarios", nargs="+",
                         help="scenario file paths or shipped names")
    p_batch.add_argument("--out", default=None,
                         help="root output directory (default runs/)")
    p_batch.add_argument("--backend", choices=("cython", "python"), default=None)
    common(p_batch)
    p_batch.set_defaults(func=cmd_batch)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
