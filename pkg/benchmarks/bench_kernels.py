"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N] [--quick]

Each kernel is run on identical inputs by every available backend. The
best-of-``repeat`` wall time is reported along with the speedup over the
fallback and the largest difference between the backends' outputs.
"""

import argparse
import time

import numpy as np

from memstab import _kernels, dispersion
from memstab.kernel_model import KernelSpec, eval_kernel
from memstab.simulator import modal_matrix


def best_time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def max_gap(a, b):
    """Largest distance from an entry of ``a`` to the nearest entry in the same row of ``b``."""
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    if a.shape[1] > 16:  # trajectories: entries correspond index by index
        return float(np.max(np.abs(a - b)))
    return float(np.max(np.min(np.abs(a[:, :, None] - b[:, None, :]), axis=2)))


def aberth_case(n_xi):
    spec = KernelSpec((1.0, 0.6, 1.5, 0.2, 0.1))
    xi = np.geomspace(1e-2, 1e2, n_xi)
    coeffs = np.ascontiguousarray(dispersion._shifted_coefficients(spec.theta, xi), dtype=complex)
    start = np.ascontiguousarray(dispersion._companion_roots(coeffs))
    # nudge the starts so every row needs a few sweeps
    start = np.ascontiguousarray(start * (1 + 1e-4))
    return lambda impl: impl.aberth_polish(coeffs, start)[0]


def modal_case(nsteps):
    mat = np.ascontiguousarray(modal_matrix(KernelSpec((1.0, 0.4, 1.0)), 2.0))
    w0 = np.array([1, 0, 0, 0], dtype=complex)
    return lambda impl: impl.modal_rk4(mat, w0, 1e-3, nsteps, 100)[0]


def memory_case(nsteps):
    spec = KernelSpec((1.0, 0.4, 1.0))
    dt = 1e-3
    lags = dt * np.arange(nsteps + 2)
    g_int = np.ascontiguousarray(eval_kernel(spec, lags))
    g_half = np.ascontiguousarray(eval_kernel(spec, lags[:-1] + dt / 2))
    return lambda impl: impl.memory_rk4(g_int, g_half, 1.0, 1.0 + 0j, dt, nsteps)[0]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = parser.parse_args(argv)

    scale = 0.1 if args.quick else 1.0
    cases = [
        ("aberth_polish", f"{int(20000 * scale)} polynomials of degree 7", aberth_case(int(20000 * scale))),
        ("modal_rk4", f"{int(200000 * scale)} steps, 4x4 system", modal_case(int(200000 * scale))),
        ("memory_rk4", f"{int(5000 * scale)} steps, full history", memory_case(int(5000 * scale))),
    ]
    names = sorted(_kernels.BACKENDS, key=lambda n: n != "python")
    if "cython" not in names:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':<15}{'size':<34}" + "".join(f"{n + ' [s]':>14}" for n in names) + f"{'speedup':>10}{'max diff':>12}")
    for label, size, case in cases:
        timings, outputs = [], []
        for name in names:
            elapsed, out = best_time(lambda: case(_kernels.get_backend(name)), args.repeat)
            timings.append(elapsed)
            outputs.append(np.asarray(out))
        speedup = timings[0] / timings[-1] if len(names) > 1 else float("nan")
        diff = max_gap(outputs[0], outputs[-1])
        print(f"{label:<15}{size:<34}" + "".join(f"{t:>14.4f}" for t in timings) + f"{speedup:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
