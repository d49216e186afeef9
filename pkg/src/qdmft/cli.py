"""Command-line front end.

All energies are in units of t*, all times in units of 1/t*. Every command
writes its data files (CSV, optionally JSON) to ``--out`` together with one
``manifest.json`` listing them.

Exit codes: 0 success, 1 usage error, 2 numerical failure (fit or
convergence), 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    FrequencyGrid,
    curve_to_csv,
    curve_to_json,
    dyson_self_energy,
    spectral_function,
)
from .dmft import DmftConfig, run, sweep_to_csv, sweep_z
from .errors import (
    BracketingError,
    DegenerateGroundStateError,
    DmftError,
    DomainError,
    FitError,
    SingularityError,
)
from .interferometry import measure_green_series
from .params import SiamParams
from .trotter import fidelity_series

MANIFEST_SCHEMA = "qdmft.manifest/1"
MANIFEST_NAME = "manifest.json"
UNITS_NOTE = "energies in units of t*, times in units of 1/t*"
EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_INVARIANT = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("Trotter step counts must be positive integers")
    return values


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonneg_float(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {text}")
    return value


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


class _Outputs:
    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files: list[str] = []

    def write(self, name: str, text: str):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        if name.endswith(".csv"):
            text = f"# {UNITS_NOTE}; manifest: {MANIFEST_NAME}\n" + text
        (self.out_dir / name).write_text(text, newline="\n")
        self.files.append(name)

    def manifest(self, command: str, params: dict, seed: int | None, started: float):
        doc = {
            "schema": MANIFEST_SCHEMA,
            "command": command,
            "parameters": params,
            "seed": seed,
            "tool_version": __version__,
            "outputs": self.files,
            "wall_clock_seconds": round(time.perf_counter() - started, 3),
        }
        self.out_dir.mkdir(parents=True, exist_ok=True)
        (self.out_dir / MANIFEST_NAME).write_text(json.dumps(doc, indent=2) + "\n", newline="\n")


def _params_from(args) -> SiamParams:
    return SiamParams(args.u, args.mu, args.eps_c, args.v, args.t_star)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_fidelity(args, out: _Outputs) -> dict:
    params = _params_from(args)
    for n in args.trotter_steps:
        times, fx = fidelity_series(params, args.tau_max, n, "xy")
        _, fc = fidelity_series(params, args.tau_max, n, "cz", optimize_pairs=args.optimize_pairs)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tau", "fidelity_xy", "fidelity_cz"])
        for row in zip(times, fx, fc):
            w.writerow([_fmt(x) for x in row])
        out.write(f"fidelity_N{n}.csv", buf.getvalue())
    return {**params.to_dict(), "tau_max": args.tau_max, "trotter_steps": args.trotter_steps,
            "optimize_pairs": args.optimize_pairs}


def cmd_green(args, out: _Outputs) -> dict:
    params = _params_from(args)
    n_points = args.n_points or args.trotter_steps
    series = measure_green_series(params, args.tau_max, n_points, args.method, args.trotter_steps,
                                  shots=args.shots, seed=args.seed)
    exact = measure_green_series(params, args.tau_max, n_points, "exact")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau", "re_igr", "im_igr", "re_exact", "im_exact"])
    for t, z, e in zip(series.times, series.values, exact.values):
        w.writerow([_fmt(t), _fmt(z.real), _fmt(z.imag), _fmt(e.real), _fmt(e.imag)])
    out.write(f"green_{args.method}.csv", buf.getvalue())
    out.write(f"green_{args.method}.json", series.to_json() + "\n")
    return {**params.to_dict(), "method": args.method, "trotter_steps": args.trotter_steps,
            "tau_max": args.tau_max, "n_points": n_points, "shots": args.shots}


def _loop_config(args, u: float, method: str, n_steps: int) -> DmftConfig:
    return DmftConfig(u, t_star=args.t_star, method=method, n_steps=n_steps, tau_max=args.tau_max,
                      n_points=args.n_points, v_tol=args.v_tol, max_iter=args.max_iter,
                      mixing=args.mixing, accelerate=not args.no_accelerate)


def cmd_spectral(args, out: _Outputs) -> dict:
    grid0 = FrequencyGrid(np.linspace(args.omega_min, args.omega_max, args.n_omega), 0.0)
    grid_eta = FrequencyGrid(grid0.omegas, args.eta)
    summary = []
    for u in args.u_values:
        res = run(_loop_config(args, u, args.method, args.trotter_steps))
        params = SiamParams.half_filled(u, res.v_final, args.t_star)
        se0 = dyson_self_energy(res.final_fit, params, grid0, allow_poles=True)
        a = spectral_function(se0, params)
        tag = f"U{u:g}"
        out.write(f"spectral_{tag}.csv", curve_to_csv(grid0.omegas, a))
        out.write(f"spectral_{tag}.json", curve_to_json(grid0.omegas, a, params, res.final_fit, 0.0) + "\n")
        if args.eta > 0:
            se = dyson_self_energy(res.final_fit, params, grid_eta, allow_poles=True)
            out.write(f"self_energy_{tag}.csv", curve_to_csv(grid_eta.omegas, se.values))
        out.write(f"dmft_{tag}.json", res.to_json() + "\n")
        summary.append({"u": u, "phase": res.phase, "z": res.z_final, "v": res.v_final})
    return {"u_values": args.u_values, "method": args.method, "trotter_steps": args.trotter_steps,
            "eta": args.eta, "omega_min": args.omega_min, "omega_max": args.omega_max,
            "n_omega": args.n_omega, "results": summary}


def cmd_sweep_z(args, out: _Outputs) -> dict:
    runs = [("exact", None)] if args.method in ("exact", "all") else []
    if args.method != "exact":
        methods = ("xy",) if args.method == "all" else (args.method,)
        runs += [(m, n) for m in methods for n in args.trotter_steps]
    for method, n in runs:
        # the exact method ignores the step count except as the default number of samples
        n_eff = n or max(args.trotter_steps)
        results = sweep_z(_loop_config(args, args.u_values[0], method, n_eff), args.u_values)
        name = "sweep_exact.csv" if method == "exact" else f"sweep_{method}_N{n}.csv"
        out.write(name, sweep_to_csv(results))
        failed = [r for r in results if r.phase == "failed"]
        if failed and args.strict:
            raise DmftError(f"{len(failed)} sweep points failed: {failed[0].error}")
    return {"u_values": args.u_values, "method": args.method, "trotter_steps": args.trotter_steps,
            "tau_max": args.tau_max}


def cmd_selftest(args, out: _Outputs | None) -> int:
    from .acceptance import run_all

    results = run_all(args.only)
    width = max(len(r.title) for r in results)
    print(f"{'#':>3}  {'criterion':<{width}}  result  time(s)  detail")
    for r in results:
        print(f"{r.number:>3}  {r.title:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.seconds:7.1f}  {r.detail}")
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else EXIT_NUMERICAL


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_model_flags(p, u=4.0, v=1.0, mu=2.0):
    p.add_argument("--u", type=_nonneg_float, default=u, help="on-site interaction U (t*)")
    p.add_argument("--v", type=_nonneg_float, default=v, help="hybridization V (t*)")
    p.add_argument("--mu", type=float, default=mu, help="chemical potential (t*)")
    p.add_argument("--eps-c", type=float, default=0.0, help="bath level eps_c (t*)")


def _add_common(p, trotter_default, trotter_type=_positive_int):
    p.add_argument("--t-star", type=float, default=1.0, help="energy unit t* (default 1)")
    p.add_argument("--tau-max", type=_nonneg_float, default=6.0, help="largest time (1/t*)")
    p.add_argument("--trotter-steps", type=trotter_type, default=trotter_default,
                   help="Trotter steps over tau-max (constant step size)")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="seed for shot sampling")


def _add_loop_flags(p):
    p.add_argument("--n-points", type=_positive_int, default=None, help="time samples (default: trotter steps)")
    p.add_argument("--v-tol", type=float, default=1e-4, help="convergence threshold on V (t*)")
    p.add_argument("--max-iter", type=_positive_int, default=100)
    p.add_argument("--mixing", type=float, default=1.0, help="damping factor in (0, 1]")
    p.add_argument("--no-accelerate", action="store_true", help="plain fixed-point iteration")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qdmft", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fidelity", help="state fidelity of Trotterized evolution of c^dag|GS>")
    _add_model_flags(p)
    _add_common(p, [6, 12, 18, 24], _int_list)
    p.add_argument("--optimize-pairs", action="store_true",
                   help="use optimized odd/even step pairs for the CZ column")

    p = sub.add_parser("green", help="retarded impurity Green function i G^R(tau)")
    _add_model_flags(p)
    _add_common(p, 24)
    p.add_argument("--method", choices=("xy", "cz", "exact"), default="xy")
    p.add_argument("--n-points", type=_positive_int, default=None, help="time samples (default: trotter steps)")
    p.add_argument("--shots", type=_positive_int, default=None, help="measurements per expectation value")

    p = sub.add_parser("spectral", help="self-consistent lattice spectral function at half filling")
    p.add_argument("--u", dest="u_values", type=_float_list, default=[5.0, 8.0], help="comma-separated U values (t*)")
    _add_common(p, 24)
    _add_loop_flags(p)
    p.add_argument("--method", choices=("xy", "cz", "exact"), default="xy")
    p.add_argument("--eta", type=_nonneg_float, default=0.01, help="broadening for the self-energy curve (t*)")
    p.add_argument("--omega-min", type=float, default=-8.0)
    p.add_argument("--omega-max", type=float, default=8.0)
    p.add_argument("--n-omega", type=_positive_int, default=1601)

    p = sub.add_parser("sweep-z", help="self-consistent quasiparticle weight versus U")
    p.add_argument("--u", dest="u_values", type=_float_list,
                   default=[float(x) for x in np.arange(1, 17) * 0.5], help="comma-separated U values (t*)")
    _add_common(p, [24, 36, 48], _int_list)
    _add_loop_flags(p)
    p.add_argument("--method", choices=("xy", "cz", "exact", "all"), default="all",
                   help="'all' runs the exact method and XY for every Trotter step count")
    p.add_argument("--strict", action="store_true", help="exit with status 2 if any point fails")

    p = sub.add_parser("selftest", help="run the acceptance suite")
    p.add_argument("--only", type=_int_list, default=None, help="comma-separated criterion numbers")
    return parser


COMMANDS = {"fidelity": cmd_fidelity, "green": cmd_green, "spectral": cmd_spectral, "sweep-z": cmd_sweep_z}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "selftest":
            unknown = [n for n in (args.only or []) if n > 12]
            if unknown:
                parser.error(f"unknown criteria {unknown}")
            return cmd_selftest(args, None)
        started = time.perf_counter()
        out = _Outputs(args.out)
        params = COMMANDS[args.command](args, out)
        out.manifest(args.command, params, getattr(args, "seed", None), started)
        return EXIT_OK
    except DomainError as exc:
        print(f"qdmft: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FitError, DmftError, BracketingError, SingularityError, DegenerateGroundStateError) as exc:
        print(f"qdmft: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except AssertionError as exc:
        print(f"qdmft: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
