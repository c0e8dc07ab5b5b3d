"""Time-domain checks of the spectral predictions.

Each Fourier mode ``e^{i xi x}`` evolves independently. ``integrate_mode``
steps the local chain-trick system; ``integrate_memory_quadrature`` steps the
original memory equation with a quadrature of the full history and serves as
an independent oracle for the chain trick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.signal import argrelmax

from memstab import _kernels, dispersion
from memstab._csvio import write_rows
from memstab.chain_trick import build_system
from memstab.kernel_model import KernelSpec, eval_kernel


class StepSizeError(ValueError):
    pass


class NonFiniteError(ArithmeticError):
    """The solution overflowed; ``time`` is when it happened."""

    def __init__(self, message, time):
        super().__init__(message)
        self.time = time


@dataclass(frozen=True)
class ModalState:
    xi: float
    w: np.ndarray
    t: float


@dataclass(frozen=True)
class SimResult:
    times: np.ndarray
    u: np.ndarray
    fitted_rate: float
    final: ModalState | None = None

    @property
    def amplitude(self) -> np.ndarray:
        return np.abs(self.u)


def fit_rate(times, amplitude, window: float = 0.5) -> float:
    """Least-squares slope of ``log(amplitude)`` over the trailing ``window`` fraction.

    When the signal oscillates (a complex-conjugate pair dominates) the fit
    uses only the local maxima, which sit on the exponential envelope.
    """
    times = np.asarray(times, dtype=float)
    amp = np.asarray(amplitude, dtype=float)
    start = int(len(times) * (1 - window))
    t, a = times[start:], amp[start:]
    keep = a > 0
    t, a = t[keep], a[keep]
    if len(t) < 2:
        return float("nan")
    log_a = np.log(a)
    peaks = argrelmax(log_a)[0]
    if len(peaks) >= 3:
        t, log_a = t[peaks], log_a[peaks]
    slope = np.polyfit(t, log_a, 1)[0]
    return float(slope)


def max_stable_dt(spec: KernelSpec, xi: float) -> float:
    """Step bound ``0.5 / (sqrt(theta_1) |xi| + 1)`` tied to the wave speeds."""
    theta1 = spec.normalized().theta[0]
    return 0.5 / (math.sqrt(theta1) * abs(xi) + 1)


def modal_matrix(spec: KernelSpec, xi: float) -> np.ndarray:
    """``M`` in ``dW/dt = M W`` for the Fourier mode ``xi``: ``-(i xi A0^{-1} A1 + A0^{-1} B)``."""
    m = build_system(spec)
    a0_inv = np.linalg.inv(m.a0)
    return -(1j * xi * a0_inv @ m.a1 + a0_inv @ m.b)


def _steps(t_end: float, dt: float) -> int:
    n = int(round(t_end / dt))
    if n < 1:
        raise StepSizeError("t_end must be at least one step")
    return n


def integrate_mode(
    spec: KernelSpec,
    xi: float,
    w0=None,
    t_end: float = 50.0,
    dt: float | None = None,
    n_samples: int = 2000,
    window: float = 0.5,
) -> SimResult:
    """RK4 integration of one Fourier mode of the chain-trick system.

    ``w0`` defaults to ``(1, 0, ..., 0)``: unit temperature mode with zero
    auxiliary fields, i.e. zero history.
    """
    spec = spec.normalized()
    bound = max_stable_dt(spec, xi)
    if dt is None:
        dt = bound / 2
    if dt <= 0 or dt > bound * (1 + 1e-12):
        raise StepSizeError(f"dt={dt} violates 0 < dt <= {bound:.6g}")
    size = spec.k + 2
    if w0 is None:
        w0 = np.zeros(size, dtype=complex)
        w0[0] = 1.0
    w0 = np.ascontiguousarray(w0, dtype=complex)
    if w0.shape != (size,):
        raise ValueError(f"w0 must have length {size}")
    nsteps = _steps(t_end, dt)
    stride = max(1, nsteps // n_samples)
    mat = np.ascontiguousarray(modal_matrix(spec, xi))
    u, w, blowup = _kernels.modal_rk4(mat, w0, float(dt), nsteps, stride)
    if blowup >= 0:
        raise NonFiniteError(f"mode xi={xi} overflowed", time=blowup * dt)
    times = dt * stride * np.arange(len(u))
    rate = fit_rate(times, np.abs(u), window)
    return SimResult(times, np.asarray(u), rate, ModalState(float(xi), np.asarray(w), nsteps * dt))


def integrate_memory_quadrature(
    spec: KernelSpec,
    xi: float,
    u0: complex = 1.0,
    t_end: float = 10.0,
    dt: float = 1e-3,
    window: float = 0.5,
) -> SimResult:
    """RK4 for ``u' = -xi^2 int_0^t g(t-s) u(s) ds`` with zero history before ``t = 0``.

    The history integral is a uniform trapezoid over all past steps, so the
    cost is quadratic in the number of steps.
    """
    if dt <= 0:
        raise StepSizeError("dt must be positive")
    spec = spec.normalized()
    nsteps = _steps(t_end, dt)
    lags = dt * np.arange(nsteps + 2)
    g_int = np.ascontiguousarray(eval_kernel(spec, lags), dtype=float)
    g_half = np.ascontiguousarray(eval_kernel(spec, lags[:-1] + 0.5 * dt), dtype=float)
    u, blowup = _kernels.memory_rk4(g_int, g_half, float(xi) ** 2, complex(u0), float(dt), nsteps)
    if blowup >= 0:
        raise NonFiniteError(f"memory integration at xi={xi} overflowed", time=blowup * dt)
    times = dt * np.arange(nsteps + 1)
    u = np.asarray(u)
    return SimResult(times, u, fit_rate(times, np.abs(u), window))


def equivalence_error(spec: KernelSpec, xi: float, t_end: float = 10.0, dt: float = 1e-3, u0: complex = 1.0):
    """Relative gap at ``t_end`` between the chain-trick system and the memory quadrature.

    The gap is scaled by the largest ``|u|`` the system trajectory reaches, so
    an oscillation that happens to pass near zero at ``t_end`` does not
    inflate it.
    """
    size = spec.k + 2
    w0 = np.zeros(size, dtype=complex)
    w0[0] = u0
    nsteps = _steps(t_end, dt)
    mode = integrate_mode(spec, xi, w0, t_end=t_end, dt=dt, n_samples=nsteps)
    memory = integrate_memory_quadrature(spec, xi, u0, t_end=t_end, dt=dt)
    scale = np.max(np.abs(mode.u))
    return float(abs(mode.u[-1] - memory.u[-1]) / scale), mode, memory


@dataclass(frozen=True)
class PhysicalResult:
    """``u[i, :]`` is the field at ``times[i]`` on grid ``x``.

    Per-mode arrays ``mode_index``, ``xi``, ``fitted_rate`` and
    ``predicted_rate`` share one index. Rates belong to the unit mode, so
    they are reported whether or not the initial data excite it.
    """

    x: np.ndarray
    times: np.ndarray
    u: np.ndarray
    mode_index: np.ndarray
    xi: np.ndarray
    fitted_rate: np.ndarray
    predicted_rate: np.ndarray

    @property
    def growing_modes(self) -> np.ndarray:
        return self.mode_index[self.fitted_rate > 0]

    def snapshots_to_csv(self, target=None):
        rows = ((float(x), float(t), float(val)) for t, row in zip(self.times, self.u) for x, val in zip(self.x, row))
        return write_rows(target, ["x", "t", "u"], rows)

    def rates_to_csv(self, target=None):
        rows = zip(
            self.mode_index.tolist(), self.xi.tolist(), self.fitted_rate.tolist(), self.predicted_rate.tolist()
        )
        return write_rows(target, ["n", "xi", "fitted_rate", "predicted_rate"], rows)


def simulate_physical(
    spec: KernelSpec,
    domain_length: float,
    n_modes: int,
    initial_u: Callable[[np.ndarray], np.ndarray] | np.ndarray,
    t_end: float,
    n_x: int | None = None,
    n_snapshots: int = 11,
    dt: float | None = None,
) -> PhysicalResult:
    """Spectral solution on the periodic domain ``[0, L)`` with zero initial history.

    Modes ``xi_n = 2 pi n / L`` for ``n = 0..n_modes`` are evolved one by one;
    negative ``n`` follow by conjugation since the data are real.
    """
    if n_modes < 2:
        raise ValueError("n_modes must be at least 2")
    spec = spec.normalized()
    if callable(initial_u):
        n_x = n_x or 4 * n_modes + 4
        x = domain_length * np.arange(n_x) / n_x
        samples = np.asarray(initial_u(x), dtype=float)
    else:
        samples = np.asarray(initial_u, dtype=float)
        n_x = samples.size
        x = domain_length * np.arange(n_x) / n_x
    if n_x <= 2 * n_modes:
        raise ValueError(f"need more than {2 * n_modes} samples to resolve {n_modes} modes")
    coeffs = np.fft.rfft(samples) / n_x
    times = np.linspace(0.0, t_end, n_snapshots)
    field = np.zeros((n_snapshots, n_x))
    index = np.arange(n_modes + 1)
    xis = 2 * np.pi * index / domain_length
    fitted = np.empty(n_modes + 1)
    predicted = dispersion.envelope(spec, xis)
    size = spec.k + 2
    for n, xi in zip(index, xis):
        c = coeffs[n]
        dt_n = dt if dt is not None else max_stable_dt(spec, xi) / 2
        steps = _steps(t_end, dt_n)
        w0 = np.zeros(size, dtype=complex)
        w0[0] = 1.0
        try:
            res = integrate_mode(spec, xi, w0, t_end=t_end, dt=dt_n, n_samples=steps)
        except NonFiniteError as exc:
            raise NonFiniteError(f"mode n={n}: {exc}", exc.time) from exc
        except StepSizeError as exc:
            raise StepSizeError(f"mode n={n}: {exc}") from exc
        fitted[n] = res.fitted_rate
        at = np.clip(np.rint(times / dt_n).astype(int), 0, len(res.u) - 1)
        modal = c * res.u[at]
        weight = 1.0 if n == 0 else 2.0
        field += weight * np.real(modal[:, None] * np.exp(1j * xi * x)[None, :])
    return PhysicalResult(x, times, field, index, xis, fitted, predicted)
