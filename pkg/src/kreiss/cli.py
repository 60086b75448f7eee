"""Command-line front end.

Exit status: 0 on success, 1 on usage or input errors, 2 on numerical or
infeasibility errors.
"""

import argparse
import csv
import os
import sys
import time

import numpy as np

from . import fixtures as fx
from .errors import KreissError, ParseError
from .io import ReportRecord, SystemFile, dump, format_table, load, serialize
from .nlsim import NonlinearSystem, simulate
from .sysmodel import StateSpace, close_loop
from .transient import (
    h2_norm,
    kreiss_constant,
    numerical_abscissa,
    spectral_abscissa,
    transient_growth,
    worst_case_energy,
)

QUANTITIES = ("K", "Kr", "M0", "M0r", "omega", "Omega", "alpha", "h2", "wc_energy")
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv_list(conv):
    def f(text):
        try:
            return [conv(t) for t in text.split(",") if t.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list {text!r}") from None
    return f


def _workers(n):
    return n if n and n > 0 else (os.cpu_count() or 1)


def _load_input(spec):
    """A file path or a fixture name."""
    if os.path.exists(spec):
        return load(spec)
    try:
        kind, blocks = fx.fixture(spec)
    except KeyError:
        raise UsageError(f"{spec!r} is neither a file nor a fixture name") from None
    return SystemFile(kind, blocks)


def _loop_data(sf, controller):
    """``(A, J)`` of the analyzed loop; ``J`` restricts to plant states."""
    if sf.kind == "plant":
        plant = sf.to_statespace()
        if controller is None:
            return plant.A, np.eye(plant.n_states)
        if np.any(plant.D != 0):
            raise UsageError("closing a controller needs a plant with D = 0")
        plant = StateSpace(plant.A, plant.B, plant.C, plant.D)
        sys_cl = close_loop(plant, controller)
        return sys_cl.A, sys_cl.B
    if sf.kind == "controller":
        raise UsageError("cannot analyze a controller file on its own")
    A = sf["A"]
    J = sf.blocks.get("J", np.eye(A.shape[0]))
    return A, J


def _quantity(q, A, J, tol, workers):
    t0 = time.perf_counter()
    N = A.shape[0]
    eye = np.eye(N)
    data = {}
    if q in ("K", "Kr"):
        rep = kreiss_constant(A, eye if q == "K" else J, tol=tol, workers=workers)
        value = rep.value
        data = {"delta_star": rep.delta_star, "omega_star": rep.omega_star}
    elif q in ("M0", "M0r"):
        prof = transient_growth(A, eye if q == "M0" else J)
        value = prof.peak
        data = {"t_peak": prof.t_peak, "horizon": prof.horizon, "certified": prof.certified}
    elif q == "omega":
        value = numerical_abscissa(A)
    elif q == "Omega":
        value = numerical_abscissa(J.T @ A @ J)
    elif q == "alpha":
        value = spectral_abscissa(A)
    elif q == "h2":
        value = h2_norm(StateSpace(A, J, J.T, np.zeros((J.shape[1], J.shape[1]))))
    else:
        value, v = worst_case_energy(A, J)
        data = {"vertex": "[" + ",".join(f"{x:+.0f}" for x in v) + "]"}
    return ReportRecord(q, float(value), tol, time.perf_counter() - t0, data)


def _emit(records, out, headers, rows):
    lines = [r.to_line() for r in records]
    print("\n".join(lines))
    print()
    print(format_table(headers, rows))
    if out:
        with open(out, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def cmd_analyze(args):
    sf = _load_input(args.input)
    K = None
    if args.controller:
        ksf = _load_input(args.controller)
        if ksf.kind != "controller":
            raise UsageError(f"{args.controller} is not a controller file")
        K = ksf.to_controller()
    A, J = _loop_data(sf, K)
    recs = [_quantity(q, A, J, args.tol, _workers(args.workers)) for q in args.quantity]
    _emit(recs, args.out, ["quantity", "value", "time [s]"],
          [[r.quantity, f"{r.value:.6g}", f"{r.wall_time:.2f}"] for r in recs])
    return EXIT_OK


def cmd_bench_grcar(args):
    rows, recs = [], []
    for n in args.sizes:
        if n < 2:
            raise UsageError("Grcar sizes must be at least 2")
        t0 = time.perf_counter()
        rep = kreiss_constant(fx.grcar(n), tol=args.tol, workers=_workers(args.workers))
        dt = time.perf_counter() - t0
        recs.append(ReportRecord("K", rep.value, args.tol, dt, {"n": n}))
        rows.append([n, f"{rep.value:.4e}", f"{dt:.2f}"])
    print(format_table(["n", "estimate", "cpu [s]"], rows))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "estimate", "cpu"])
            for r in recs:
                w.writerow([r.data["n"], repr(r.value), f"{r.wall_time:.3f}"])
    return EXIT_OK


def _table2_row(plant, K):
    sys_cl = close_loop(plant, K)
    A, J = sys_cl.A, sys_cl.B
    t0 = time.perf_counter()
    M0 = transient_growth(A, J).peak
    Kr = kreiss_constant(A, J).value
    Om = numerical_abscissa(J.T @ A @ J)
    return M0, Kr, Om, time.perf_counter() - t0


def cmd_table2(args):
    plant = fx.example_plant()
    rows, recs = [], []
    for name in fx.CONTROLLER_NAMES:
        M0, Kr, Om, dt = _table2_row(plant, fx.example_controller(name))
        rows.append([name, f"{M0:.4g}", f"{Kr:.4g}", f"{Om:.4g}", f"{dt:.2f}"])
        recs.append((name, M0, Kr, Om, dt))
    print(format_table(["controller", "M0r", "Kr", "Omega", "cpu [s]"], rows))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["controller", "M0r", "Kr", "Omega", "cpu"])
            for name, M0, Kr, Om, dt in recs:
                w.writerow([name, repr(M0), repr(Kr), repr(Om), f"{dt:.3f}"])
    return EXIT_OK


def cmd_synthesize(args):
    from .synth import DiskRegion, SynthesisProblem, scenario_loop

    sf = _load_input(args.input)
    if sf.kind != "plant":
        raise UsageError("synthesize needs a plant file")
    plant = sf.to_statespace()
    if np.any(plant.D != 0):
        raise UsageError("synthesis plants must have D = 0")
    try:
        region = DiskRegion(args.decay, args.radius)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    problem = SynthesisProblem(plant, args.order, args.method, region, restarts=args.restarts,
                               seed=args.seed)
    t0 = time.perf_counter()
    res = scenario_loop(problem, workers=_workers(args.workers))
    cpu = time.perf_counter() - t0
    M0, Kr, Om, _ = _table2_row(plant, res.controller)
    recs = [
        ReportRecord("objective", res.certified, problem.tol, cpu,
                     {"method": args.method, "restart": res.restart,
                      "scenarios": len(res.history.scenarios)}),
        ReportRecord("M0r", M0, 1e-6, 0.0),
        ReportRecord("Kr", Kr, 1e-4, 0.0),
        ReportRecord("Omega", Om, 0.0, 0.0),
    ]
    if args.out:
        comment = "\n".join(r.to_line() for r in recs)
        dump(SystemFile.from_controller(res.controller), args.out, comment=comment)
    else:
        print(serialize(SystemFile.from_controller(res.controller)))
    _emit(recs, None, ["M0r", "Kr", "Omega", "cpu [s]"],
          [[f"{M0:.4g}", f"{Kr:.4g}", f"{Om:.4g}", f"{cpu:.1f}"]])
    return EXIT_OK


def cmd_simulate(args):
    sysnl = NonlinearSystem.default(R=args.R)
    K = fx.nl_controller() if args.loop == "closed" else None
    x0s = args.x0 if args.x0 is not None else list(fx.NL_INITIAL_X2)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
    rows = []
    for a in x0s:
        try:
            tr = simulate(sysnl, K, [0.0, a], T=args.horizon)
        except KreissError as exc:
            raise type(exc)(f"x0=[0, {a:g}]: {exc}") from None
        if args.out:
            tr.to_csv(os.path.join(args.out, f"{args.loop}_x2_{a:.3e}.csv"))
        rows.append([f"{a:.3e}", tr.classification, f"{np.max(tr.norms):.4g}",
                     f"{tr.norms[-1]:.3e}", "yes" if tr.is_monotone() else "no"])
    print(format_table(["x2(0)", "terminal", "max |x|", "|x(T)|", "monotone"], rows))
    return EXIT_OK


def cmd_fixtures(args):
    if args.action == "list":
        rows = [[name, kind, " ".join(f"{k}:{v.shape[0]}x{v.shape[1]}" for k, v in b.items())]
                for name, (kind, b) in fx.catalog().items()]
        print(format_table(["name", "kind", "blocks"], rows))
        print(f"\nchecksum {fx.checksum()}")
        return EXIT_OK
    if not args.name:
        raise UsageError("fixtures dump needs a fixture name")
    try:
        kind, blocks = fx.fixture(args.name)
    except KeyError as exc:
        raise UsageError(str(exc)) from None
    sf = SystemFile(kind, blocks)
    if args.out:
        dump(sf, args.out, comment=f"fixture {args.name}")
    else:
        sys.stdout.write(serialize(sf, comment=f"fixture {args.name}"))
    return EXIT_OK


def build_parser():
    p = _Parser(prog="kreiss", description="Kreiss constant analysis and transient-growth "
                "mitigating controller synthesis.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, tol=1e-4):
        sp.add_argument("--tol", type=float, default=tol, help="relative tolerance")
        sp.add_argument("--workers", type=int, default=0,
                        help="parallel workers (default: all CPUs)")
        sp.add_argument("--out", help="output path")

    a = sub.add_parser("analyze", help="compute analysis quantities")
    a.add_argument("input", help="system file or fixture name")
    a.add_argument("--controller", help="controller file or fixture to close with a plant")
    a.add_argument("--quantity", type=_csv_list(str), default=["K"],
                   help=f"comma-separated subset of {','.join(QUANTITIES)}")
    common(a)
    a.set_defaults(func=cmd_analyze)

    b = sub.add_parser("bench-grcar", help="Kreiss constants of Grcar matrices")
    b.add_argument("--sizes", type=_csv_list(int), default=[10, 20, 30, 50])
    common(b)
    b.set_defaults(func=cmd_bench_grcar)

    s = sub.add_parser("synthesize", help="fixed-order controller synthesis")
    s.add_argument("input", help="plant file or fixture name")
    s.add_argument("--method", choices=("kreiss", "numabs", "h2match", "wcenergy"),
                   default="kreiss")
    s.add_argument("--order", type=int, default=0)
    s.add_argument("--restarts", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--decay", type=float, default=1e-3)
    s.add_argument("--radius", type=float, default=100.0)
    common(s, tol=1e-2)
    s.set_defaults(func=cmd_synthesize)

    t = sub.add_parser("table2", help="analyze the four printed controllers")
    common(t)
    t.set_defaults(func=cmd_table2)

    m = sub.add_parser("simulate", help="simulate the nonlinear example")
    m.add_argument("--loop", choices=("open", "closed"), default="open")
    m.add_argument("--x0", type=_csv_list(float), default=None,
                   help="comma-separated x2(0) amplitudes")
    m.add_argument("--horizon", type=float, default=2000.0)
    m.add_argument("--R", type=float, default=25.0)
    m.add_argument("--out", help="directory for trajectory CSV files")
    m.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fixtures", help="list or dump embedded fixtures")
    f.add_argument("action", choices=("list", "dump"))
    f.add_argument("name", nargs="?")
    f.add_argument("--out")
    f.set_defaults(func=cmd_fixtures)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if "quantity" in args and args.command == "analyze":
        bad = [q for q in args.quantity if q not in QUANTITIES]
        if bad:
            parser.error(f"unknown quantity {bad[0]!r}; choose from {', '.join(QUANTITIES)}")
    if "order" in args and args.command == "synthesize":
        if args.order < 0 or args.restarts < 1:
            parser.error("order must be >= 0 and restarts >= 1")
    try:
        return args.func(args)
    except (UsageError, ParseError, OSError) as exc:
        print(f"kreiss: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (KreissError, np.linalg.LinAlgError) as exc:
        print(f"kreiss: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
