"""Command-line interface.

Subcommands:

* ``simulate <scenario> [--out DIR] [--dt S] [--stride N] [--strict]`` -
  closed-loop run; writes trajectory CSV, a text report, and figures.
* ``audit <scenario> --window H1:H2 [--strict]`` - run and audit one window.
* ``sweep <scenario> --param NAME --values V1 V2 ...`` - tradeoff sweep.
* ``check <scenario>`` - validators only.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 audit failure (with ``--strict``).  The output directory defaults to
``./hvacopt_out`` and can also be set with the HVACOPT_OUT environment
variable (the flag wins).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

from .audit import audit_window, report, sweep, sweep_report
from .errors import ConfigError, HvacOptError, NonStationaryWindowError
from .scenario import EVENT_KEYS, check_scenario, load_scenario
from .simulate import run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_AUDIT = 4


def _out_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get("HVACOPT_OUT")
    return Path(env) if env else Path("hvacopt_out")


def _load(path: str):
    try:
        return load_scenario(path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _apply_overrides(scenario, args):
    changes = {}
    if getattr(args, "dt", None) is not None:
        changes["dt_seconds"] = args.dt
    if getattr(args, "stride", None) is not None:
        changes["stride"] = args.stride
    if not changes:
        return scenario
    try:
        return dataclasses.replace(scenario, **changes)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def cmd_simulate(args) -> int:
    scenario = _apply_overrides(_load(args.scenario), args)
    out = _out_dir(args)
    artifact = run(scenario, out_dir=out, write_csv=True)
    text = report(artifact)
    print(text)
    (out / f"{scenario.name}_report.txt").parent.mkdir(parents=True, exist_ok=True)
    (out / f"{scenario.name}_report.txt").write_text(text + "\n", encoding="utf-8")
    if artifact.failed:
        print(f"numerical failure: {artifact.failure}", file=sys.stderr)
        return EXIT_NUMERICAL
    from .figures import render_artifact

    paths = render_artifact(artifact, out)
    print(f"wrote {artifact.csv_path}")
    for p in paths:
        print(f"wrote {p}")
    if args.strict and any(a.stationary and not a.passed for a in artifact.audits):
        print("audit failure under --strict", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


def cmd_audit(args) -> int:
    scenario = _apply_overrides(_load(args.scenario), args)
    try:
        h1, h2 = (float(x) for x in args.window.split(":"))
    except ValueError:
        print("error: --window must look like H1:H2", file=sys.stderr)
        return EXIT_CONFIG
    artifact = run(scenario, out_dir=None, write_csv=False)
    if artifact.failed:
        print(f"numerical failure: {artifact.failure}", file=sys.stderr)
        return EXIT_NUMERICAL
    try:
        result = audit_window(scenario, artifact.table, (h1, h2))
    except NonStationaryWindowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not result.stationary:
        print(f"window {h1:g}:{h2:g} non-stationary ({result.reason}); no verdict")
        return EXIT_OK
    verdict = "pass" if result.passed else "FAIL"
    print(
        f"window {h1:g}:{h2:g} {verdict}: gap T={result.gap_temps:.3e} "
        f"m={result.gap_flows:.3e} duals={result.gap_duals:.3e} "
        f"|T-Z|={result.temp_target_gap:.3e}"
    )
    if result.kkt is not None:
        print(
            f"  kkt: stationarity={result.kkt.stationarity_residual:.3e} "
            f"complementarity={result.kkt.complementarity_residual:.3e} "
            f"primal={result.kkt.primal_violation:.3e} tight={result.kkt.tight}"
        )
    if args.strict and not result.passed:
        return EXIT_AUDIT
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario = _load(args.scenario)
    if args.param not in EVENT_KEYS:
        print(f"error: --param must be one of {EVENT_KEYS}", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_dir(args)
    points = sweep(scenario, args.param, args.values, out_dir=out)
    text = sweep_report(points, args.param)
    print(text)
    (out / f"{scenario.name}_sweep_{args.param}.txt").write_text(text + "\n", encoding="utf-8")
    from .figures import render_tradeoff

    p = render_tradeoff(points, args.param, out, scenario.name)
    print(f"wrote {p}")
    if any(pt.artifact.failed for pt in points):
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_check(args) -> int:
    scenario = _load(args.scenario)
    try:
        findings = check_scenario(scenario)
    except ConfigError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{scenario.name}: configuration valid")
    for f in findings:
        print(f"  {f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hvacopt",
        description="Building thermal simulation with online HVAC flow optimization",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario closed loop")
    sim.add_argument("scenario")
    sim.add_argument("--out", help="output directory (default ./hvacopt_out or $HVACOPT_OUT)")
    sim.add_argument("--dt", type=float, help="override controller/plant step (s)")
    sim.add_argument("--stride", type=int, help="override CSV logging stride (ticks)")
    sim.add_argument("--strict", action="store_true", help="exit 4 when an audit fails")
    sim.set_defaults(func=cmd_simulate)

    aud = sub.add_parser("audit", help="run and audit one quasi-steady window")
    aud.add_argument("scenario")
    aud.add_argument("--window", required=True, help="H1:H2 in hours")
    aud.add_argument("--out", help=argparse.SUPPRESS)
    aud.add_argument("--dt", type=float, help=argparse.SUPPRESS)
    aud.add_argument("--stride", type=int, help=argparse.SUPPRESS)
    aud.add_argument("--strict", action="store_true")
    aud.set_defaults(func=cmd_audit)

    sw = sub.add_parser("sweep", help="tradeoff sweep over one context parameter")
    sw.add_argument("scenario")
    sw.add_argument("--param", required=True)
    sw.add_argument("--values", required=True, nargs="+", type=float)
    sw.add_argument("--out")
    sw.set_defaults(func=cmd_sweep)

    chk = sub.add_parser("check", help="validate a scenario without running it")
    chk.add_argument("scenario")
    chk.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_CONFIG
    except HvacOptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
