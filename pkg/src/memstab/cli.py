"""Command-line interface.

Exit codes: 0 success (or Stable for ``classify``), 1 input error,
2 unstable verdict from ``classify``, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from memstab import dispersion, simulator, stability
from memstab._csvio import write_rows
from memstab.chain_trick import HyperbolicityError
from memstab.kernel_model import (
    KernelError,
    KernelSpec,
    UnsupportedOrderError,
    eval_gamma,
    eval_kernel,
    in_convex_region,
    in_monotone_region,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_UNSTABLE = 2
EXIT_NUMERIC = 3

# labelled reference points of the k=2 region map
SAMPLE_POINTS = {
    "point1": (0.8, 2.0),
    "point2": (0.6, 1.5),
    "point3": (0.4, 1.0),
    "point4": (0.2, 0.5),
}


class InputError(ValueError):
    pass


def _parse_floats(text: str, name: str) -> list[float]:
    if text.strip() == "":
        return []
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise InputError(f"{name}: expected a comma-separated list of numbers, got {text!r}") from None


def load_spec(args) -> KernelSpec:
    """Build the kernel from ``--spec`` and inline flags; inline flags win."""
    data = {}
    if getattr(args, "spec", None):
        try:
            text = Path(args.spec).read_text()
        except OSError as exc:
            raise InputError(f"spec: cannot read {args.spec}: {exc}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"spec: malformed JSON ({exc})") from None
        if not isinstance(data, dict):
            raise InputError("spec: expected a JSON object")
    if getattr(args, "theta", None) is not None:
        data["theta"] = _parse_floats(args.theta, "theta")
        data.pop("k", None)
    if getattr(args, "tau", None) is not None:
        data["tau"] = args.tau
    if not data:
        raise InputError("theta: provide --spec or --theta")
    try:
        return KernelSpec.from_dict(data)
    except KernelError as exc:
        raise InputError(str(exc)) from None


def _out(args):
    return getattr(args, "out", None)


def cmd_classify(args) -> int:
    spec = load_spec(args)
    verdict = stability.classify(spec)
    print(verdict.to_json(indent=2))
    return EXIT_OK if verdict.is_stable else EXIT_UNSTABLE


def cmd_spectrum(args) -> int:
    spec = load_spec(args)
    spec_ = dispersion.spectrum(
        spec,
        xi_min=args.xi_min,
        xi_max=args.xi_max,
        n_points=args.points,
        log_spacing=args.log,
    )
    result = spec_.to_csv(_out(args))
    if result is not None:
        sys.stdout.write(result)
    if args.envelope_out:
        spec_.envelope_to_csv(args.envelope_out)
    return EXIT_OK


def _parse_grid(text: str):
    parts = text.lower().split("x")
    try:
        if len(parts) == 3:
            e2, e3, res = float(parts[0]), float(parts[1]), int(parts[2])
            return e2, e3, res, res
        if len(parts) == 4:
            return float(parts[0]), float(parts[1]), int(parts[2]), int(parts[3])
    except ValueError:
        pass
    raise InputError(f"grid: expected ETA2MAXxETA3MAXxRES or ETA2MAXxETA3MAXxN2xN3, got {text!r}")


def region_rows(eta2_max=1.2, eta3_max=3.0, n2=200, n3=200):
    """Rows of the k=2 region map; the node whose cell holds a reference point is labelled."""
    if n2 < 1 or n3 < 1:
        raise InputError("grid: resolution must be positive")
    e2 = np.linspace(0.0, eta2_max, n2) if n2 > 1 else np.array([0.0])
    e3 = np.linspace(0.0, eta3_max, n3) if n3 > 1 else np.array([0.0])
    g2, g3 = np.meshgrid(e2, e3, indexing="ij")
    g2, g3 = g2.ravel(), g3.ravel()
    in_s = stability.in_stable_region(g2, g3)
    in_m = in_monotone_region(g2, g3)
    in_c = in_convex_region(g2, g3)
    verdict = stability.classify_k2_analytic(g2, g3)
    labels = np.full(g2.size, "", dtype=object)
    h2 = eta2_max / (n2 - 1) if n2 > 1 else 0.0
    h3 = eta3_max / (n3 - 1) if n3 > 1 else 0.0
    for name, (p2, p3) in SAMPLE_POINTS.items():
        i = np.argmin((g2 - p2) ** 2 + (g3 - p3) ** 2)
        if abs(g2[i] - p2) <= h2 / 2 + 1e-12 and abs(g3[i] - p3) <= h3 / 2 + 1e-12:
            labels[i] = name
    return zip(g2.tolist(), g3.tolist(), in_s.tolist(), in_m.tolist(), in_c.tolist(), verdict.tolist(), labels.tolist())


REGION_HEADER = ["eta2", "eta3", "in_S", "in_M", "in_C", "verdict", "sample_point"]


def cmd_regions(args) -> int:
    if args.theta is not None or args.spec:
        spec = load_spec(args)
        if spec.k != 2:
            raise UnsupportedOrderError(f"region maps exist only for k=2, got k={spec.k}")
    e2, e3, n2, n3 = _parse_grid(args.grid)
    result = write_rows(_out(args), REGION_HEADER, region_rows(e2, e3, n2, n3))
    if result is not None:
        sys.stdout.write(result)
    return EXIT_OK


def _cosine_data(n_modes):
    def init(x, length):
        out = np.zeros_like(x)
        for n in range(1, n_modes + 1):
            out += np.cos(2 * np.pi * n * x / length + 0.7 * n)
        return out / n_modes

    return init


def cmd_simulate(args) -> int:
    spec = load_spec(args)
    length = args.length
    if args.initial == "modes":
        init = _cosine_data(args.modes)
        initial = lambda x: init(x, length)  # noqa: E731
    else:
        initial = lambda x: np.exp(-((x - length / 2) ** 2) / (2 * (length / 20) ** 2))  # noqa: E731
    result = simulator.simulate_physical(
        spec, length, args.modes, initial, args.t_end, n_snapshots=args.snapshots, dt=args.dt
    )
    text = result.snapshots_to_csv(_out(args))
    if text is not None:
        sys.stdout.write(text)
    if args.rates_out:
        result.rates_to_csv(args.rates_out)
    return EXIT_OK


def cmd_verify_equivalence(args) -> int:
    spec = load_spec(args)
    dt = args.dt if args.dt is not None else 1e-3
    err, mode, memory = simulator.equivalence_error(spec, args.xi, t_end=args.t_end, dt=dt)
    stride = max(1, len(mode.times) // args.samples)
    rows = (
        (float(t), float(a.real), float(a.imag), float(b.real), float(b.imag))
        for t, a, b in zip(mode.times[::stride], mode.u[::stride], memory.u[::stride])
    )
    header = ["t", "u_system_re", "u_system_im", "u_memory_re", "u_memory_im"]
    if _out(args):
        write_rows(args.out, header, rows)
    summary = {"xi": args.xi, "t_end": args.t_end, "dt": dt, "relative_error": err}
    print(json.dumps(summary))
    return EXIT_OK


def cmd_kernel(args) -> int:
    t = np.linspace(0.0, args.t_max, args.points)
    shapes = [int(s) for s in _parse_floats(args.shapes, "shapes")] if args.shapes else []
    columns = [eval_gamma(j, args.tau or 1.0, t) for j in shapes]
    header = ["t"] + [f"g{j}" for j in shapes]
    if args.theta is not None or args.spec:
        spec = load_spec(args)
        columns.append(eval_kernel(spec, t))
        header.append("g")
    if not columns:
        raise InputError("shapes: give --shapes and/or a kernel")
    rows = zip(t.tolist(), *[c.tolist() for c in columns])
    text = write_rows(_out(args), header, rows)
    if text is not None:
        sys.stdout.write(text)
    return EXIT_OK


def _add_spec_args(p):
    p.add_argument("--spec", help="JSON file {\"k\": int, \"theta\": [...], \"tau\": float}")
    p.add_argument("--theta", help="comma-separated weights theta_1..theta_{k+1}; overrides --spec")
    p.add_argument("--tau", type=float, help="time scale; overrides --spec")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="memstab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="stability verdict as JSON")
    _add_spec_args(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("spectrum", help="branch-tracked spectrum CSV")
    _add_spec_args(p)
    p.add_argument("--xi-min", type=float, default=1e-3, help="smallest wavenumber (default 1e-3)")
    p.add_argument("--xi-max", type=float, default=1e3, help="largest wavenumber (default 1e3)")
    p.add_argument("--points", type=int, default=2000, help="number of wavenumbers (default 2000)")
    p.add_argument("--log", action=argparse.BooleanOptionalAction, default=True, help="log-spaced grid (default on)")
    p.add_argument("--out", help="spectrum CSV path (default stdout)")
    p.add_argument("--envelope-out", help="envelope CSV path")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("regions", help="k=2 region map CSV")
    _add_spec_args(p)
    p.add_argument("--grid", default="1.2x3x200", help="ETA2MAXxETA3MAXxRES or ETA2MAXxETA3MAXxN2xN3 (default 1.2x3x200)")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_regions)

    p = sub.add_parser("simulate", help="periodic-domain modal simulation")
    _add_spec_args(p)
    p.add_argument("--length", type=float, default=16.0, help="period L of the domain (default 16)")
    p.add_argument("--modes", type=int, default=12, help="highest Fourier index n (default 12)")
    p.add_argument("--t-end", type=float, default=100.0, help="final time (default 100)")
    p.add_argument("--dt", type=float, help="step size (default: half the per-mode bound)")
    p.add_argument("--snapshots", type=int, default=11, help="number of output times (default 11)")
    p.add_argument("--initial", choices=["modes", "bump"], default="modes", help="initial field (default modes)")
    p.add_argument("--out", help="snapshot CSV (x, t, u)")
    p.add_argument("--rates-out", help="per-mode rate CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify-equivalence", help="chain-trick system vs memory quadrature")
    _add_spec_args(p)
    p.add_argument("--xi", type=float, default=1.0, help="wavenumber (default 1)")
    p.add_argument("--t-end", type=float, default=10.0, help="final time (default 10)")
    p.add_argument("--dt", type=float, help="step size (default 1e-3)")
    p.add_argument("--samples", type=int, default=1000, help="approximate number of CSV rows (default 1000)")
    p.add_argument("--out", help="trajectory CSV path")
    p.set_defaults(func=cmd_verify_equivalence)

    p = sub.add_parser("kernel", help="sample Gamma densities and/or a kernel")
    _add_spec_args(p)
    p.add_argument("--shapes", default="1,2,3,4", help="Gamma shape indices to sample (default 1,2,3,4)")
    p.add_argument("--t-max", type=float, default=10.0, help="last sample time (default 10)")
    p.add_argument("--points", type=int, default=501, help="number of samples (default 501)")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_kernel)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (InputError, KernelError, UnsupportedOrderError, HyperbolicityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (dispersion.RootFindingError, simulator.NonFiniteError, simulator.StepSizeError, ArithmeticError) as exc:
        print(f"numerical failure in {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
