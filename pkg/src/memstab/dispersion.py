"""Dispersion relation of the chain-trick system and its roots.

Plane waves ``W e^{lambda t + mu x}`` exist iff ``p(lambda, mu) = 0`` with

    p(lambda, mu) = lambda (lambda+1)^{k+1} - mu^2 sum_j theta_j (lambda+1)^{k+1-j}.

Fourier modes use ``mu = i xi``. Roots are computed in ``y = lambda + 1``,
where the polynomial is ``y^{k+2} - y^{k+1} + xi^2 sum_j theta_j y^{k+1-j}``:
real, sparse, and with the multiple root of ``xi = 0`` sitting exactly at 0.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from memstab import _kernels
from memstab._csvio import write_rows
from memstab.kernel_model import KernelSpec

DEFAULT_RESIDUAL_TOL = 1e-9


class RootFindingError(ArithmeticError):
    def __init__(self, message, xi=None, worst_residual=None):
        super().__init__(message)
        self.xi = xi
        self.worst_residual = worst_residual


def residual_tolerance() -> float:
    """Root residual tolerance, overridable through ``MEMSTAB_TOL``."""
    raw = os.environ.get("MEMSTAB_TOL")
    return float(raw) if raw else DEFAULT_RESIDUAL_TOL


def eval_p(spec: KernelSpec, lam, mu):
    theta = spec.normalized().theta
    k = len(theta) - 1
    lam = np.asarray(lam, dtype=complex)
    mu = np.asarray(mu, dtype=complex)
    y = lam + 1
    acc = np.zeros(np.broadcast(lam, mu).shape, dtype=complex)
    # Horner in y for sum_j theta_j y^{k+1-j}
    for weight in theta:
        acc = acc * y + weight
    out = lam * y ** (k + 1) - mu**2 * acc
    return complex(out) if out.ndim == 0 else out


def lambda_coefficients(spec: KernelSpec, mu) -> np.ndarray:
    """Coefficients of ``p(., mu)`` in powers of lambda, highest first (monic)."""
    theta = spec.normalized().theta
    k = len(theta) - 1
    one_plus = np.poly1d([1.0, 1.0])
    poly = np.poly1d([1.0, 0.0]) * one_plus ** (k + 1)
    tail = np.poly1d([0.0])
    for j, weight in enumerate(theta, start=1):
        tail = tail + weight * one_plus ** (k + 1 - j)
    coeffs = poly.coeffs.astype(complex)
    tc = (complex(mu) ** 2 * tail).coeffs.astype(complex)
    coeffs[len(coeffs) - len(tc):] -= tc
    return coeffs


@dataclass(frozen=True)
class DispersionPolynomial:
    spec: KernelSpec

    def __call__(self, lam, mu):
        return eval_p(self.spec, lam, mu)

    @property
    def degree(self) -> int:
        return self.spec.k + 2

    def coefficients(self, mu) -> np.ndarray:
        return lambda_coefficients(self.spec, mu)


def _shifted_coefficients(theta, xi) -> np.ndarray:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    k = len(theta) - 1
    c = np.zeros((xi.size, k + 3))
    c[:, 0] = 1.0
    c[:, 1] = -1.0
    c[:, 2:] = (xi**2)[:, None] * np.asarray(theta)[None, :]
    return c


def _companion_roots(coeffs: np.ndarray) -> np.ndarray:
    """Roots of monic rows ``coeffs`` (highest degree first) via batched companion matrices."""
    n, d1 = coeffs.shape
    d = d1 - 1
    if d == 0:
        return np.zeros((n, 0), dtype=complex)
    comp = np.zeros((n, d, d), dtype=coeffs.dtype)
    comp[:, 0, :] = -coeffs[:, 1:]
    if d > 1:
        idx = np.arange(d - 1)
        comp[:, idx + 1, idx] = 1.0
    return np.linalg.eigvals(comp).astype(complex)


def _horner(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    """``|p(z)|`` row by row; ``coeffs`` highest degree first."""
    acc = np.zeros_like(z)
    with np.errstate(over="ignore", invalid="ignore"):
        for c in coeffs.T:
            acc = acc * z + c[:, None]
    return np.abs(acc)


def solve_monic(coeffs: np.ndarray) -> np.ndarray:
    """Roots of a batch of monic polynomials, exact zero roots deflated, Aberth-polished."""
    coeffs = np.atleast_2d(np.asarray(coeffs))
    n, d1 = coeffs.shape
    d = d1 - 1
    out = np.zeros((n, d), dtype=complex)
    trailing = np.zeros(n, dtype=int)
    for t in range(d):
        trailing += np.all(coeffs[:, d1 - 1 - t:] == 0, axis=1)
    for t in np.unique(trailing):
        rows = np.flatnonzero(trailing == t)
        reduced = coeffs[rows, : d1 - t]
        if d - t > 0:
            approx = _companion_roots(reduced)
            reduced = np.ascontiguousarray(reduced, dtype=complex)
            polished, _ = _kernels.aberth_polish(reduced, np.ascontiguousarray(approx))
            # keep the eigenvalue estimate wherever polishing did not help
            # (e.g. coincident starting points, which Aberth cannot separate)
            worse = ~np.isfinite(polished) | (_horner(reduced, polished) > _horner(reduced, approx))
            out[np.ix_(rows, np.arange(d - t))] = np.where(worse, approx, polished)
        # remaining columns stay exactly 0
    return out


def _sort_roots(roots: np.ndarray) -> np.ndarray:
    order = np.lexsort((roots.imag, -roots.real), axis=-1)
    return np.take_along_axis(roots, order, axis=-1)


def _check_residuals(spec, xi, roots, tol):
    k = spec.k
    lam = roots
    res = np.abs(eval_p(spec, lam, 1j * np.asarray(xi)[:, None]))
    bound = tol * (1 + np.abs(lam)) ** (k + 2)
    bad = ~(res <= bound)  # NaN counts as failure
    if bad.any():
        row = int(np.argmax((res / bound).max(axis=1)))
        raise RootFindingError(
            f"root residual {res[row].max():.3g} exceeds tolerance at xi={xi[row]:.17g}",
            xi=float(xi[row]),
            worst_residual=float(res[row].max()),
        )


def roots_batch(spec: KernelSpec, xi) -> np.ndarray:
    """Roots of ``p(., i xi)`` for every ``xi``; shape ``(len(xi), k+2)``, sorted by descending real part."""
    spec = spec.normalized()
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    y = solve_monic(_shifted_coefficients(spec.theta, xi))
    lam = y - 1.0
    _check_residuals(spec, xi, lam, residual_tolerance())
    return _sort_roots(lam)


def roots_at(spec: KernelSpec, xi: float) -> np.ndarray:
    return roots_batch(spec, [xi])[0]


def envelope(spec: KernelSpec, xi) -> np.ndarray:
    """``max Re lambda`` over ``Lambda(xi)`` without branch tracking."""
    return roots_batch(spec, xi).real.max(axis=1)


def default_grid(xi_min: float = 1e-3, xi_max: float = 1e3, n_points: int = 2000, include_zero: bool = True):
    grid = np.geomspace(xi_min, xi_max, n_points)
    return np.concatenate([[0.0], grid]) if include_zero else grid


def track_branches(root_sets: np.ndarray) -> np.ndarray:
    """Reorder each row so column ``b`` follows one continuous branch.

    Consecutive rows are paired by the assignment minimizing the summed
    distance between matched roots.
    """
    tracked = np.array(root_sets, dtype=complex, copy=True)
    for i in range(1, tracked.shape[0]):
        prev = tracked[i - 1]
        cost = np.abs(prev[:, None] - tracked[i][None, :])
        _, cols = linear_sum_assignment(cost)
        tracked[i] = tracked[i][cols]
    return tracked


@dataclass(frozen=True)
class Spectrum:
    """Branch-tracked ``Lambda(xi)``: ``branches[i, b]`` is branch ``b`` at ``xi_grid[i]``."""

    xi_grid: np.ndarray
    branches: np.ndarray

    @property
    def envelope(self) -> np.ndarray:
        return self.branches.real.max(axis=1)

    def unstable_window(self):
        """``(xi_lo, xi_hi)`` spanning grid points with positive envelope and ``xi != 0``, or None."""
        mask = (self.envelope > 0) & (self.xi_grid != 0)
        if not mask.any():
            return None
        hits = self.xi_grid[mask]
        return float(hits.min()), float(hits.max())

    def to_csv(self, target=None):
        rows = (
            (float(x), b, float(lam.real), float(lam.imag))
            for x, row in zip(self.xi_grid, self.branches)
            for b, lam in enumerate(row)
        )
        return write_rows(target, ["xi", "branch_index", "re_lambda", "im_lambda"], rows)

    def envelope_to_csv(self, target=None):
        rows = zip(self.xi_grid.tolist(), self.envelope.tolist())
        return write_rows(target, ["xi", "max_re"], rows)


def spectrum(
    spec: KernelSpec,
    xi_min: float = 1e-3,
    xi_max: float = 1e3,
    n_points: int = 2000,
    log_spacing: bool = True,
    include_zero: bool | None = None,
) -> Spectrum:
    """Sweep ``Lambda(xi)`` over a grid and track branches.

    With ``log_spacing`` the grid is geometric (``xi_min > 0`` required) and
    ``xi = 0`` is prepended unless ``include_zero`` is False.
    """
    if not (0 <= xi_min < xi_max):
        raise ValueError("need 0 <= xi_min < xi_max")
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    if log_spacing:
        if xi_min <= 0:
            raise ValueError("log spacing needs xi_min > 0")
        grid = default_grid(xi_min, xi_max, n_points, include_zero is not False)
    else:
        grid = np.linspace(xi_min, xi_max, n_points)
        if include_zero and xi_min > 0:
            grid = np.concatenate([[0.0], grid])
    roots = roots_batch(spec, grid)
    return Spectrum(grid, track_branches(roots))


def slow_branch_expansion(spec: KernelSpec) -> float:
    """Diffusivity of the branch through 0: ``lambda_0(xi) = -(sum theta) xi^2 + o(xi^2)``."""
    return float(sum(spec.normalized().theta))


def slow_branch_root(spec: KernelSpec, xi: float) -> complex:
    """The root of ``p(., i xi)`` closest to 0."""
    roots = roots_at(spec, xi)
    return complex(roots[np.argmin(np.abs(roots))])


@dataclass(frozen=True)
class FastBranchLimit:
    speed: float
    damping: float


def fast_branch_limit(spec: KernelSpec) -> FastBranchLimit:
    """Asymptotics ``lambda ~ +-i sqrt(theta_1) xi + damping`` of the two wave-like branches."""
    theta = spec.normalized().theta
    t1 = theta[0]
    t2 = theta[1] if len(theta) > 1 else 0.0
    return FastBranchLimit(speed=float(np.sqrt(t1)), damping=-(t1 - t2) / (2 * t1))


def fast_branches(spec: KernelSpec, xi: float) -> np.ndarray:
    """The two roots of largest modulus at ``xi``."""
    roots = roots_at(spec, xi)
    return roots[np.argsort(-np.abs(roots))[:2]]


def slow_branch_limits(spec: KernelSpec) -> np.ndarray:
    """Roots of ``Q``: the limits of the k bounded branches as ``xi -> inf``."""
    from memstab.stability import build_Q

    q = build_Q(spec)
    if len(q) == 1:
        return np.zeros(0, dtype=complex)
    monic = (q[::-1] / q[-1])[None, :]
    return _sort_roots(solve_monic(monic)[0])
