"""Command-line front end: ``fracdyn <subcommand> [flags]``.

Every subcommand writes plain CSV (header row, 17 significant digits) to
``--output`` or standard output.  When ``--output`` is a file, a key/value
manifest describing the run is written next to it as ``<output>.manifest``
(or to ``--manifest``).

Exit codes: 0 success, 1 usage or input error, 2 domain event (divergence,
required NSPO not found, kernel bound violated).
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    DEFAULT_MAX_PERIOD,
    DEFAULT_SETTLE,
    DEFAULT_TAIL,
    DEFAULT_TOLERANCE,
    SweepSpec,
    analyze,
    classify_window,
    run_sweep,
)
from .kernel import DEFAULT_CAPACITY, build_kernel, growth_bound_violations
from .lyapunov import finite_time_exponent, lyapunov_exponent
from .maps import Family, MapSpec
from .simulator import ControlSchedule, SimConfig, Trajectory, simulate
from .zero_one import Estimator, Test01Config, discard_transient, run_test01

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN = 0, 1, 2
KERNEL_Q_GRID = (0.1, 0.25, 0.5, 0.8, 1.0)


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


# -- argument groups ---------------------------------------------------------

def _system_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("system")
    g.add_argument("--map", choices=[f.value for f in Family], default="gompertz")
    g.add_argument("--r", type=float, default=1.0, help="bifurcation parameter")
    g.add_argument("--p", type=float, default=None, help="power exponent (gompertz; default 2/3)")
    g.add_argument("--q", type=float, default=0.8, help="fractional order, 0 < q <= 1")
    g.add_argument("--x0", type=float, default=0.3, help="initial condition")
    g.add_argument("--steps", type=int, default=1000)
    g.add_argument("--scheme", choices=["fractional", "map"], default="fractional",
                   help="'map' iterates x(n+1) = f(x(n)) instead of the fractional sum")
    g.add_argument("--divergence-threshold", type=float, default=1e6)


def _control_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("impulsive control")
    g.add_argument("--control", choices=["none", "mult", "add"], default="none",
                   help="impulse type (a gamma sweep defaults to mult)")
    g.add_argument("--gamma", type=float, default=0.0)
    g.add_argument("--delta", type=int, default=1)
    g.add_argument("--n-star", type=int, default=500)


def _output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("-o", "--output", type=Path, default=None, help="CSV file (default stdout)")
    p.add_argument("--manifest", type=Path, default=None,
                   help="manifest path (default <output>.manifest)")


def _config(args) -> SimConfig:
    try:
        spec = MapSpec(Family(args.map), args.r, args.p)
        config = SimConfig(spec, args.q, args.x0, args.steps, args.divergence_threshold, args.scheme)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if config.steps > DEFAULT_CAPACITY * 10:
        raise UsageError(f"--steps above {DEFAULT_CAPACITY * 10} is not supported")
    return config


def _control(args) -> ControlSchedule:
    try:
        return ControlSchedule(args.control, args.gamma, args.delta, args.n_star)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# -- output ------------------------------------------------------------------

class Run:
    """Collects outputs of one invocation and writes the manifest."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        self.args = args
        self.started = time.perf_counter()
        self.outputs: list[str] = []
        self.inputs: list[str] = []

    @contextmanager
    def csv_out(self, path: Path | None, header: list[str]):
        if path is None:
            handle = sys.stdout
        else:
            path.parent.mkdir(parents=True, exist_ok=True)
            handle = open(path, "w", newline="")
            self.outputs.append(str(path))
        try:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            yield writer
        finally:
            if path is not None:
                handle.close()
            else:
                handle.flush()

    def write_manifest(self) -> None:
        target = self.args.manifest
        if target is None:
            if not self.outputs:
                return
            target = Path(self.outputs[0] + ".manifest")
        lines = [
            f"subcommand = {self.command}",
            f"version = {__version__}",
            f"numpy = {np.__version__}",
        ]
        for key, value in sorted(vars(self.args).items()):
            if key in ("func", "manifest", "output"):
                continue
            lines.append(f"param.{key} = {value}")
        lines.append(f"inputs = {','.join(self.inputs)}")
        lines.append(f"outputs = {','.join(self.outputs)}")
        lines.append(f"duration_seconds = {time.perf_counter() - self.started:.6f}")
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text("\n".join(lines) + "\n")


def _report_divergence(traj: Trajectory) -> int:
    print(f"diverged at step {traj.diverged_at}: {traj.reason}", file=sys.stderr)
    return EXIT_DOMAIN


def _write_series(run: Run, traj: Trajectory, extra: dict[str, np.ndarray] | None = None) -> None:
    extra = extra or {}
    mask = traj.impulse_mask()
    with run.csv_out(run.args.output, ["step", "x", "impulse_fired", *extra]) as w:
        for n, x in enumerate(traj.samples):
            w.writerow([n, fmt(x), fmt(bool(mask[n])), *(fmt(col[n]) for col in extra.values())])


# -- subcommands -------------------------------------------------------------

def cmd_simulate(args, run: Run) -> int:
    config, control = _config(args), _control(args)
    traj = simulate(config, None, control)
    _write_series(run, traj)
    return EXIT_OK if traj.completed else _report_divergence(traj)


def cmd_lyapunov(args, run: Run) -> int:
    config, control = _config(args), _control(args)
    kernel = build_kernel(config.q, config.steps) if config.scheme == "fractional" else None
    traj = simulate(config, kernel, control)
    if not traj.completed:
        return _report_divergence(traj)
    state = lyapunov_exponent(traj, kernel, derivative_at=args.derivative_at)
    running = state.running_lambda()
    with run.csv_out(args.output, ["n", "a", "lambda_running"]) as w:
        for n in range(1, state.n + 1):
            w.writerow([n, fmt(state.a[n]), fmt(running[n - 1])])
    summary = [f"lambda = {fmt(state.lambda_)}"]
    if args.window_start is not None:
        summary.append(f"lambda_window = {fmt(finite_time_exponent(state, args.window_start))}")
    if state.clamped:
        summary.append(f"clamped = {state.clamped}")
    if state.truncated_at is not None:
        summary.append(f"truncated_at = {state.truncated_at}")
    print("\n".join(summary), file=sys.stderr)
    return EXIT_OK


def read_series(path: Path, column: str | None) -> np.ndarray:
    """Read one numeric column from a CSV file.

    Accepts a bare one-value-per-line file or a CSV with a header row; with a
    header the column is ``column``, else ``x``, else the only column.
    """
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    rows = [(i, row) for i, row in enumerate(csv.reader(io.StringIO(text)), start=1) if row]
    if not rows:
        raise InputError(f"{path}: no data")
    index = 0
    first = rows[0][1]
    try:
        [float(v) for v in first]
        has_header = False
    except ValueError:
        has_header = True
    if has_header:
        header = [h.strip() for h in first]
        wanted = column or ("x" if "x" in header else None)
        if wanted is None and len(header) == 1:
            wanted = header[0]
        if wanted not in header:
            raise InputError(f"{path}:1: column {wanted or '?'} not found in header {header}")
        index = header.index(wanted)
        rows = rows[1:]
    elif column is not None:
        raise InputError(f"{path}: --column given but the file has no header row")
    values = []
    for line, row in rows:
        try:
            values.append(float(row[index]))
        except (ValueError, IndexError):
            raise InputError(f"{path}:{line}: malformed value {row!r}") from None
    return np.asarray(values)


def cmd_zero_one(args, run: Run) -> int:
    if args.input is not None:
        series = read_series(args.input, args.column)
        run.inputs.append(str(args.input))
        transient = 0.0 if args.transient is None else args.transient
    else:
        traj = simulate(_config(args), None, _control(args))
        if not traj.completed:
            return _report_divergence(traj)
        series = traj.samples
        transient = 0.2 if args.transient is None else args.transient
    try:
        config = Test01Config(c_count=args.c_count, n_cut=args.n_cut, estimator=args.estimator)
        result = run_test01(discard_transient(series, transient), config)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    print(fmt(result.K))
    if args.pq_out is not None:
        p, q = result.pq_path
        with run.csv_out(args.pq_out, ["n", "p", "q"]) as w:
            for n in range(p.size):
                w.writerow([n + 1, fmt(p[n]), fmt(q[n])])
    if args.m_out is not None:
        with run.csv_out(args.m_out, ["n", "M"]) as w:
            for n, m in enumerate(result.M_curve, start=1):
                w.writerow([n, fmt(m)])
    return EXIT_OK


def cmd_bifurcate(args, run: Run) -> int:
    if args.axis == "gamma" and args.control == "none":
        # sweeping the impulse strength implies impulses; multiplicative unless told otherwise
        args.control = "mult"
    config, control = _config(args), _control(args)
    try:
        spec = SweepSpec(
            axis=args.axis, lo=args.lo, hi=args.hi, grid_count=args.grid,
            config=config, control=control, transient_cut=args.transient_cut,
            settle=args.settle, tail_points=args.tail_points,
            tolerance=args.tolerance, max_period=args.max_period,
        )
        rows = run_sweep(spec, workers=args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    header = ["param", "tail_index", "x", "le", "K", "diverged", "nspo_period"]
    with run.csv_out(args.output, header) as w:
        for row in rows:
            period = row.nspo.period if row.nspo.found else None
            if row.tail.size == 0:
                w.writerow([fmt(row.param_value), "", "", "", "", fmt(row.diverged), ""])
                continue
            for i, x in enumerate(row.tail):
                w.writerow([fmt(row.param_value), i, fmt(x), fmt(row.le), fmt(row.K),
                            fmt(row.diverged), fmt(period)])
    found = sum(r.nspo.found for r in rows)
    print(f"grid points = {len(rows)}; diverged = {sum(r.diverged for r in rows)}; "
          f"nspo = {found}", file=sys.stderr)
    return EXIT_OK


def cmd_control(args, run: Run) -> int:
    config, control = _config(args), _control(args)
    if control.mode.value == "none":
        raise UsageError("control needs --control mult or --control add")
    result = analyze(config, control, tolerance=args.tolerance, max_period=args.max_period,
                     settle=args.settle)
    traj = result.trajectory
    members = np.zeros(len(traj.samples), dtype=bool)
    if result.nspo.found:
        members[-result.nspo.period:] = True
    _write_series(run, traj, {"nspo_member": members})
    if not traj.completed:
        return _report_divergence(traj)
    summary = {
        "nspo_found": result.nspo.found,
        "nspo_period": result.nspo.period,
        "closing_error": result.nspo.closing_error,
        "K": result.K,
        "lambda_window": result.le,
        "lambda_full": result.lambda_full,
        "window": classify_window(result).value,
    }
    out = sys.stdout if args.output is not None else sys.stderr
    for key, value in summary.items():
        print(f"{key} = {value if isinstance(value, str) else fmt(value)}", file=out)
    if args.require_nspo and not result.nspo.found:
        print("no NSPO found", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


def cmd_validate_kernel(args, run: Run) -> int:
    qs = args.q or list(KERNEL_Q_GRID)
    if args.n < 1:
        raise UsageError("--n must be positive")
    status = EXIT_OK
    with run.csv_out(args.output, ["q", "n", "violations", "worst_ratio"]) as w:
        for q in qs:
            try:
                table = build_kernel(q, args.n)
            except ValueError as exc:
                raise UsageError(str(exc)) from exc
            count, worst = growth_bound_violations(table)
            w.writerow([fmt(q), args.n, count, fmt(worst)])
            if count:
                status = EXIT_DOMAIN
    return status


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fracdyn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="integrate one trajectory; CSV step,x,impulse_fired")
    _system_args(p)
    _control_args(p)
    _output_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("lyapunov", help="tangent sequence and exponent; CSV n,a,lambda_running")
    _system_args(p)
    _control_args(p)
    p.add_argument("--derivative-at", choices=["previous", "current"], default="previous")
    p.add_argument("--window-start", type=int, default=None,
                   help="also report the local exponent from this step to the end")
    _output_args(p)
    p.set_defaults(func=cmd_lyapunov)

    p = sub.add_parser("zero-one", help="0-1 test; prints K")
    p.add_argument("--input", type=Path, default=None, help="CSV series (else simulate inline)")
    p.add_argument("--column", default=None)
    p.add_argument("--transient", type=float, default=None,
                   help="leading fraction to drop (default 0 for --input, 0.2 inline)")
    p.add_argument("--c-count", type=int, default=100)
    p.add_argument("--n-cut", type=int, default=None, help="default N/10")
    p.add_argument("--estimator", choices=[e.value for e in Estimator], default="correlation")
    p.add_argument("--pq-out", type=Path, default=None)
    p.add_argument("--m-out", type=Path, default=None)
    _system_args(p)
    _control_args(p)
    p.add_argument("--manifest", type=Path, default=None)
    p.set_defaults(func=cmd_zero_one, output=None)

    p = sub.add_parser("bifurcate", help="parameter sweep; CSV param,tail_index,x,le,K,diverged,nspo_period")
    p.add_argument("--axis", choices=["r", "p", "q", "gamma"], required=True)
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--grid", type=int, default=201)
    p.add_argument("--transient-cut", type=float, default=0.5)
    p.add_argument("--settle", type=float, default=DEFAULT_SETTLE)
    p.add_argument("--tail-points", type=int, default=DEFAULT_TAIL)
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    p.add_argument("--max-period", type=int, default=DEFAULT_MAX_PERIOD)
    p.add_argument("--workers", type=int, default=None, help="default FRACDYN_THREADS or cores")
    _system_args(p)
    _control_args(p)
    _output_args(p)
    p.set_defaults(func=cmd_bifurcate)

    p = sub.add_parser("control", help="single control experiment with NSPO summary")
    _system_args(p)
    _control_args(p)
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    p.add_argument("--max-period", type=int, default=DEFAULT_MAX_PERIOD)
    p.add_argument("--settle", type=float, default=DEFAULT_SETTLE)
    p.add_argument("--require-nspo", action="store_true", help="exit 2 when no NSPO is found")
    _output_args(p)
    p.set_defaults(func=cmd_control)

    p = sub.add_parser("validate-kernel", help="check |S(n) - n^q/q| <= 1/q for all n")
    p.add_argument("--q", type=float, action="append", default=None,
                   help="order to check (repeatable; default 0.1,0.25,0.5,0.8,1)")
    p.add_argument("--n", type=int, default=100_000)
    _output_args(p)
    p.set_defaults(func=cmd_validate_kernel)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    run = Run(args.command, args)
    try:
        code = args.func(args, run)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"fracdyn {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"fracdyn {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    run.write_manifest()
    return code


if __name__ == "__main__":
    sys.exit(main())
