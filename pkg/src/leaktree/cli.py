"""Command-line entry point: ``leaktree {simulate,localize,sweep,noise,validate}``.

Exit codes: 0 success, 1 usage or parse error, 2 model infeasibility or
failed inversion, 3 no leak detected.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path

import numpy as np

from . import io as files
from .errors import LeakTreeError, NoLeakDetectedError, ScenarioError
from .forward import LeakSpec, add_noise, measurements_of, solve_with_leak, solve_no_leak
from .localization import localize_tree
from .uncertainty import NoiseSpec, confidence_interval, mc_experiment

EXIT_OK, EXIT_USAGE, EXIT_MODEL, EXIT_NO_LEAK = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _seed(args, sc):
    seed = args.seed if args.seed is not None else sc.seed
    if seed is None:
        raise UsageError("this command draws random numbers; pass --seed or set seed in the scenario")
    return seed


def _require(sc, *parts):
    for name in parts:
        if getattr(sc, name) is None:
            raise UsageError(f"scenario has no [{name}] section")


def cmd_simulate(args) -> int:
    sc = files.load_scenario(args.scenario)
    _require(sc, "boundary")
    if not args.out:
        raise UsageError("simulate needs --out for the measurement file")
    snapshots, reports = [], []
    seed = _seed(args, sc) if sc.noise is not None else None
    for idx, bc in enumerate(sc.snapshot_boundaries()):
        if sc.leak is None:
            state = solve_no_leak(sc.network, bc, sc.constants)
        else:
            state = solve_with_leak(sc.network, bc, sc.leak, sc.constants)
        meas = measurements_of(state, label=str(idx))
        if sc.noise is not None:
            meas = add_noise(meas, sc.noise.sigma_head, sc.noise.sigma_flow, [seed, idx])
        snapshots.append(meas)
        reports.append(dict(files.state_report(state), snapshot=str(idx), source_head=bc.head))
    Path(args.out).write_text(files.format_measurements(snapshots))
    state_path = Path(args.out).with_suffix(".state.json")
    state_path.write_text(files.to_json(reports) + "\n")
    for r in reports:
        leak = r["leak"]
        demand = f"{leak['demand']:.6g} m^3/s" if leak else "none"
        print(f"snapshot {r['snapshot']}: source head {r['source_head']:g} m, leak demand {demand}", file=sys.stderr)
    return EXIT_OK


def cmd_localize(args) -> int:
    sc = files.load_scenario(args.scenario)
    if not args.measurements:
        raise UsageError("localize needs --measurements")
    try:
        text = Path(args.measurements).read_text()
    except OSError as exc:
        raise ScenarioError([f"{args.measurements}: {exc.strerror}"]) from None
    snaps = files.parse_measurements(text, sc.network)
    if not snaps:
        raise ScenarioError([f"{args.measurements}: no readings"])
    second = snaps[1] if len(snaps) > 1 else None
    res = localize_tree(sc.network, snaps[0], second, consts=sc.constants)
    pipe = sc.network.pipes[res.pipe]
    record = {
        "pipe": res.pipe,
        "start": pipe.start,
        "end": pipe.end,
        "from_vertex": res.from_vertex,
        "x": res.x,
        "x_from_start": res.x_from(pipe.start),
        "beta": res.beta,
        "constant": res.constant,
        "sigma_x": res.sigma_x,
        "ci_low": None,
        "ci_high": None,
        "junction_proximate": res.junction_proximate,
    }
    if res.sigma_x is not None:
        # the reported position averages one estimate per snapshot used
        ci = confidence_interval(res.x, res.sigma_x, 1 if second is None else 2, args.level)
        record["ci_low"], record["ci_high"] = ci.lo, ci.hi
    if args.format == "json":
        text = files.to_json(dict(record, diagnostics=res.diagnostics)) + "\n"
    else:
        text = _csv_text(list(record), [["" if v is None else v for v in record.values()]])
    _emit(text, args.out)
    summary = f"leak on pipe {res.pipe} ({pipe.start}-{pipe.end}), {res.x:.3f} m from vertex {res.from_vertex}"
    if res.beta is not None:
        summary += f", exponent {res.beta:.4g}, constant {res.constant:.4g}"
    if res.sigma_x is not None:
        summary += f", sigma_x {res.sigma_x:.3g} m"
    print(summary, file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args) -> int:
    sc = files.load_scenario(args.scenario)
    _require(sc, "boundary", "leak")
    if len(sc.network.pipes) != 1:
        raise UsageError("sweep needs a single-pipe scenario")
    if not args.step or args.step <= 0:
        raise UsageError("--step must be a positive distance")
    pipe = sc.network.pipes[0]
    length = pipe.length
    count = int(math.floor(length / args.step * (1 + 1e-12))) + 1
    positions = [min(k * args.step, length) for k in range(count)]
    rows, worst = [], 0.0
    for x in positions:
        leak = LeakSpec(0, x, sc.leak.constant, sc.leak.exponent)
        state = solve_with_leak(sc.network, sc.boundary, leak, sc.constants)
        res = localize_tree(sc.network, measurements_of(state), consts=sc.constants)
        est = res.x_from(pipe.start)
        worst = max(worst, abs(est - x))
        rows.append([repr(x), repr(est), repr(abs(est - x)), int(res.junction_proximate)])
    _emit(_csv_text(["true_x", "estimated_x", "abs_error", "junction_proximate"], rows), args.out)
    print(f"{len(rows)} positions, max |x_hat - x| = {worst:.3g} m", file=sys.stderr)
    return EXIT_OK


def cmd_noise(args) -> int:
    sc = files.load_scenario(args.scenario)
    _require(sc, "boundary", "leak", "noise")
    seed = _seed(args, sc)
    levels = [int(v) for v in args.levels.split(",")] if args.levels else [2**k for k in range(9)]
    if any(n < 1 for n in levels):
        raise UsageError("--levels must be positive integers")
    noise = NoiseSpec.uniform(sc.noise.sigma_head, sc.noise.sigma_flow)
    rows = mc_experiment(sc.network, sc.boundary, sc.leak, noise, levels, args.trials, seed, consts=sc.constants)
    header = ["n", "mse", "predicted", "coverage", "bias", "variance", "trials"]
    if args.format == "json":
        text = files.to_json([dict(zip(header, (r.n, r.mse, r.predicted, r.coverage, r.bias, r.variance, r.trials)))
                              for r in rows]) + "\n"
    else:
        text = _csv_text(header, [[r.n, repr(r.mse), repr(r.predicted), repr(r.coverage), repr(r.bias),
                                   repr(r.variance), r.trials] for r in rows])
    _emit(text, args.out)
    if len(rows) > 1:
        slope = np.polyfit(np.log([r.n for r in rows]), np.log([r.mse for r in rows]), 1)[0]
        print(f"log-log slope of MSE vs N: {slope:.3f}", file=sys.stderr)
    return EXIT_OK


def cmd_validate(args) -> int:
    sc = files.load_scenario(args.scenario)
    print(f"ok: {sc.network.num_vertices} vertices, {len(sc.network.pipes)} pipes, "
          f"{len(sc.network.leaves)} leaves")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="leaktree", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", required=True, help="scenario TOML file")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        return p

    p = common(sub.add_parser("simulate", help="solve a scenario and write leaf measurements"))
    p.add_argument("--seed", type=int, help="seed for measurement noise")
    p.set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("localize", help="locate a leak from a measurement file"))
    p.add_argument("--measurements", required=True, help="measurement CSV")
    p.add_argument("--level", type=float, default=0.95, help="confidence level for noisy readings")
    p.set_defaults(func=cmd_localize, format="json")

    p = common(sub.add_parser("sweep", help="inject leaks along a single pipe and re-locate them"))
    p.add_argument("--step", type=float, required=True, help="spacing of injected leaks in meters")
    p.set_defaults(func=cmd_sweep)

    p = common(sub.add_parser("noise", help="Monte Carlo MSE and interval coverage against N"))
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--levels", help="comma-separated snapshot counts, default 1,2,4,...,256")
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("--scenario", required=True)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NoLeakDetectedError as exc:
        print(f"no leak detected: {exc}", file=sys.stderr)
        return EXIT_NO_LEAK
    except LeakTreeError as exc:
        print(f"model error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
