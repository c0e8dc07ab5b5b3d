"""Stability criteria for the memory equation with Gamma-combination kernels.

High frequencies are stable iff ``theta_2 < theta_1`` and the polynomial
``Q(x) = sum_j theta_j (1+x)^{k+1-j}`` is Hurwitz. Intermediate frequencies
are decided by purely imaginary roots ``lambda = i zeta`` of the dispersion
relation, which reduce to positive roots of a polynomial in ``s = zeta^2``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from math import comb

import numpy as np
from numpy.polynomial import polynomial as P

from memstab import dispersion
from memstab.kernel_model import (
    KernelSpec,
    UnsupportedOrderError,
    in_convex_region,
    in_monotone_region,
)


class NotStableError(ArithmeticError):
    """The spectrum touches or crosses the closed right half-plane at some ``xi != 0``."""

    def __init__(self, message, xi=None, window=None):
        super().__init__(message)
        self.xi = xi
        self.window = window


class StabilityClass(str, enum.Enum):
    STABLE = "Stable"
    HIGH_FREQ_UNSTABLE = "HighFreqUnstable"
    INTERMEDIATE_UNSTABLE = "IntermediateUnstable"


# -- polynomial Q and the Routh-Hurwitz test ---------------------------------


def q_coefficients(theta, form: str = "hfpoly") -> list:
    """Coefficients ``q_0..q_k`` of ``Q``; arithmetic follows the input type.

    ``form="hfpoly"`` sums ``C(k+1-j, l) theta_j`` over ``j = 1..k+1-l``;
    ``form="shifted"`` sums ``C(j, l) theta_{k+1-j}`` over ``j = l..k``.
    Both are the same polynomial written in two index conventions.
    """
    theta = list(theta)
    k = len(theta) - 1
    if form == "hfpoly":
        return [sum(comb(k + 1 - j, ell) * theta[j - 1] for j in range(1, k + 2 - ell)) for ell in range(k + 1)]
    if form == "shifted":
        return [sum(comb(j, ell) * theta[k - j] for j in range(ell, k + 1)) for ell in range(k + 1)]
    raise ValueError(f"unknown form {form!r}")


def build_Q(spec: KernelSpec) -> np.ndarray:
    """``(q_0, ..., q_k)`` in ascending powers of x."""
    return np.array(q_coefficients(spec.normalized().theta), dtype=float)


@dataclass(frozen=True)
class HurwitzReport:
    q_coeffs: tuple
    routh_array: tuple
    is_strict_hurwitz: bool
    marginal: bool = False

    @property
    def first_column(self) -> tuple:
        return tuple(row[0] for row in self.routh_array)


def routh_hurwitz(coeffs) -> HurwitzReport:
    """Routh array of the polynomial with ascending coefficients ``coeffs``.

    Strict Hurwitz iff every first-column entry is strictly positive after
    making the leading coefficient positive. An exactly zero first-column
    entry stops the array and is reported as ``marginal`` (not strict).
    Works with floats or exact types such as :class:`fractions.Fraction`.
    """
    coeffs = list(coeffs)
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    if coeffs[-1] == 0:
        raise ValueError("zero polynomial")
    if coeffs[-1] < 0:
        coeffs = [-c for c in coeffs]
    desc = coeffs[::-1]
    n = len(desc) - 1
    width = n // 2 + 1
    zero = desc[0] * 0

    def pad(row):
        return list(row) + [zero] * (width - len(row))

    rows = [pad(desc[0::2])]
    if n >= 1:
        rows.append(pad(desc[1::2]))
    marginal = False
    while len(rows) < n + 1:
        upper, lower = rows[-2], rows[-1]
        if lower[0] == 0:
            marginal = True
            break
        new = [(lower[0] * upper[j + 1] - upper[0] * lower[j + 1]) / lower[0] for j in range(width - 1)]
        rows.append(pad(new))
    if rows[-1][0] == 0:
        marginal = True
    strict = (not marginal) and all(row[0] > 0 for row in rows)
    return HurwitzReport(tuple(coeffs), tuple(tuple(row) for row in rows), strict, marginal)


@dataclass(frozen=True)
class HighFrequencyCheck:
    stable: bool
    theta2_below_theta1: bool
    hurwitz: HurwitzReport
    marginal: bool

    def __bool__(self):
        return self.stable

    def trace(self) -> dict:
        return {
            "theta2_below_theta1": self.theta2_below_theta1,
            "Q_coefficients": [float(q) for q in self.hurwitz.q_coeffs],
            "Q_strict_hurwitz": self.hurwitz.is_strict_hurwitz,
        }


def high_freq_stable(spec: KernelSpec) -> HighFrequencyCheck:
    theta = spec.normalized().theta
    t2 = theta[1] if len(theta) > 1 else 0.0
    below = t2 < theta[0]
    report = routh_hurwitz(build_Q(spec))
    return HighFrequencyCheck(
        stable=below and report.is_strict_hurwitz,
        theta2_below_theta1=below,
        hurwitz=report,
        marginal=(t2 == theta[0]) or report.marginal,
    )


def sufficient_stable_anyk(spec: KernelSpec) -> bool:
    """``sum_{j>=2} theta_j < theta_1``: stability for every k (sufficient only)."""
    theta = spec.normalized().theta
    return sum(theta[1:]) < theta[0]


def sharp_stable_k2(spec: KernelSpec) -> bool:
    if spec.k != 2:
        raise UnsupportedOrderError(f"sharp criterion needs k=2, got k={spec.k}")
    t1, t2, t3 = spec.normalized().theta
    return t2 < t1 and (3 * t3 < 2 * t1 or (2 * t2 + t3) ** 2 + 8 * (t3 - t1) ** 2 < 8 * t1**2)


# -- purely imaginary crossings ------------------------------------------------


def _binomial_part(j: int, parity: int) -> np.ndarray:
    """Ascending s-coefficients of Re((1-i zeta)^j) (parity 0) or Im((1-i zeta)^j)/zeta (parity 1)."""
    out = np.zeros(j // 2 + 1)
    for m in range(parity, j + 1, 2):
        if parity == 0:
            out[m // 2] += comb(j, m) * (-1) ** (m // 2)
        else:
            out[(m - 1) // 2] += comb(j, m) * (-1) ** ((m + 1) // 2)
    return out


def _cleared_sum(theta, parity: int) -> np.ndarray:
    k = len(theta) - 1
    acc = np.zeros(1)
    for j, weight in enumerate(theta, start=1):
        term = P.polymul(P.polypow([1.0, 1.0], k + 1 - j), _binomial_part(j, parity))
        acc = P.polyadd(acc, weight * term)
    return acc


def crossing_polynomial(spec: KernelSpec) -> np.ndarray:
    """Ascending coefficients of ``sum_j theta_j (1+s)^{k+1-j} Re((1-i zeta)^j)`` in ``s = zeta^2``.

    Its positive roots are the ``zeta^2`` at which ``i zeta`` can solve the
    dispersion relation for some real ``xi``.
    """
    return P.polytrim(_cleared_sum(spec.normalized().theta, 0))


def crossing_xi2(spec: KernelSpec, s):
    """``xi^2`` paired with a root ``s`` of the crossing polynomial (may be non-positive)."""
    theta = spec.normalized().theta
    k = len(theta) - 1
    s = np.asarray(s, dtype=float)
    denom = P.polyval(s, _cleared_sum(theta, 1))
    return -((1 + s) ** (k + 1)) / denom


@dataclass(frozen=True)
class Crossing:
    """``lambda = +-i zeta`` solves the dispersion relation at ``xi = +-xi``; ``s = zeta^2``."""

    zeta: float
    xi: float
    s: float

    def to_dict(self) -> dict:
        return {"zeta": self.zeta, "xi": self.xi, "s": self.s}


def crossing_search(spec: KernelSpec, s_max: float = 1e6, imag_tol: float = 1e-8) -> list[Crossing]:
    """All imaginary-axis crossings with ``0 < s <= s_max``, sorted by ``xi``.

    The crossing equation is polynomial in ``s``, so every real root is found
    irrespective of ``s_max``; the bound only limits what is reported.
    """
    coeffs = crossing_polynomial(spec)
    if len(coeffs) < 2:
        return []
    monic = (coeffs[::-1] / coeffs[-1])[None, :]
    roots = dispersion.solve_monic(monic)[0]
    out = []
    for r in roots:
        if abs(r.imag) > imag_tol * (1 + abs(r)):
            continue
        s = float(r.real)
        if not (0 < s <= s_max):
            continue
        xi2 = float(crossing_xi2(spec, s))
        if xi2 > 0:
            out.append(Crossing(zeta=float(np.sqrt(s)), xi=float(np.sqrt(xi2)), s=s))
    return sorted(out, key=lambda c: c.xi)


# -- dissipation constant ------------------------------------------------------


def estimate_c0(spec: KernelSpec, grid: dispersion.Spectrum | None = None, xi_floor: float = 1e-3) -> float:
    """Largest ``c0`` with ``max Re Lambda(xi) <= -c0 xi^2/(1+xi^2)`` on the grid.

    Grid points below ``xi_floor`` are left to the small-frequency expansion,
    whose limit ``sum theta`` bounds the ratio there.
    """
    if grid is None:
        grid = dispersion.spectrum(spec)
    xi = grid.xi_grid
    env = grid.envelope
    nonzero = xi != 0
    bad = nonzero & (env >= 0)
    if bad.any():
        raise NotStableError(
            f"envelope >= 0 at xi={xi[bad][0]:.6g}",
            xi=float(xi[bad][0]),
            window=(float(xi[bad].min()), float(xi[bad].max())),
        )
    use = xi >= xi_floor
    if not use.any():
        raise ValueError("grid has no points at or above xi_floor")
    ratio = -env[use] * (1 + xi[use] ** 2) / xi[use] ** 2
    return float(ratio.min())


# -- k = 2 parameter regions ---------------------------------------------------


def in_stable_region(eta2, eta3):
    """Closure of the k=2 stability region in (eta2, eta3)."""
    eta2 = np.asarray(eta2, dtype=float)
    eta3 = np.asarray(eta3, dtype=float)
    strip = (eta2 >= 0) & (eta2 <= 1)
    return strip & ((eta3 <= 2 / 3) | ((2 * eta2 + eta3) ** 2 / 8 + (eta3 - 1) ** 2 <= 1))


@dataclass(frozen=True)
class RegionMembership:
    """Membership flags; plain bools for scalar input, boolean arrays otherwise."""

    in_S: bool | np.ndarray
    in_M: bool | np.ndarray
    in_C: bool | np.ndarray


def region_membership_k2(eta2, eta3) -> RegionMembership:
    flags = [np.asarray(f(eta2, eta3)) for f in (in_stable_region, in_monotone_region, in_convex_region)]
    if flags[0].ndim == 0:
        flags = [bool(f) for f in flags]
    return RegionMembership(*flags)


def classify_k2_analytic(eta2, eta3) -> np.ndarray:
    """Verdict labels on (eta2, eta3) arrays from the closed-form k=2 conditions."""
    eta2 = np.asarray(eta2, dtype=float)
    eta3 = np.asarray(eta3, dtype=float)
    stable = (eta2 < 1) & ((3 * eta3 < 2) | ((2 * eta2 + eta3) ** 2 + 8 * (eta3 - 1) ** 2 < 8))
    out = np.where(stable, StabilityClass.STABLE.value, StabilityClass.INTERMEDIATE_UNSTABLE.value)
    return np.where(eta2 >= 1, StabilityClass.HIGH_FREQ_UNSTABLE.value, out)


# -- orchestration -------------------------------------------------------------


@dataclass
class StabilityVerdict:
    cls: StabilityClass
    c0: float | None = None
    crossings: list[Crossing] = field(default_factory=list)
    unstable_window: tuple[float, float] | None = None
    marginal: bool = False
    criteria_trace: dict = field(default_factory=dict)

    @property
    def is_stable(self) -> bool:
        return self.cls is StabilityClass.STABLE

    def to_dict(self) -> dict:
        out = {"class": self.cls.value}
        if self.c0 is not None:
            out["c0"] = self.c0
        if self.crossings:
            out["crossings"] = [c.to_dict() for c in self.crossings]
        if self.unstable_window is not None:
            out["unstable_window"] = list(self.unstable_window)
        out["marginal"] = self.marginal
        out["trace"] = self.criteria_trace
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def classify(spec: KernelSpec, grid: dispersion.Spectrum | None = None) -> StabilityVerdict:
    """Classify a kernel as stable, high-frequency unstable, or Turing-type unstable.

    Theorem-backed shortcuts are tried first (high-frequency test, the
    ``sum_{j>=2} theta_j < theta_1`` condition, the sharp k=2 condition);
    otherwise imaginary-axis crossings and a spectrum sweep decide.
    """
    spec = spec.normalized()
    hf = high_freq_stable(spec)
    trace = {"slow_branch_coefficient": dispersion.slow_branch_expansion(spec), **hf.trace()}
    if not hf:
        trace["decided_by"] = "high-frequency test: theta_2 < theta_1 and Q strictly Hurwitz"
        return StabilityVerdict(StabilityClass.HIGH_FREQ_UNSTABLE, marginal=hf.marginal, criteria_trace=trace)

    sufficient = sufficient_stable_anyk(spec)
    trace["sum_theta_j_below_theta1"] = sufficient
    sharp = None
    if spec.k == 2:
        sharp = sharp_stable_k2(spec)
        trace["sharp_k2_condition"] = sharp

    if sufficient or sharp:
        trace["decided_by"] = "sum_{j>=2} theta_j < theta_1" if sufficient else "sharp k=2 condition"
        trace["c0_source"] = "numerical estimate on spectrum grid"
        if grid is None:
            grid = dispersion.spectrum(spec)
        try:
            c0 = estimate_c0(spec, grid)
        except NotStableError as exc:
            trace["c0_failure_xi"] = exc.xi
            c0 = None
        return StabilityVerdict(StabilityClass.STABLE, c0=c0, criteria_trace=trace)

    crossings = crossing_search(spec)
    if grid is None:
        grid = dispersion.spectrum(spec)
    window = grid.unstable_window()
    trace["crossing_count"] = len(crossings)
    trace["grid_positive_envelope"] = window is not None
    if sharp is False or crossings or window is not None:
        if sharp is False:
            trace["decided_by"] = "sharp k=2 condition"
        else:
            trace["decided_by"] = "imaginary-axis crossing search and spectrum sweep"
        marginal = window is None
        if window is None and crossings:
            window = (crossings[0].xi, crossings[-1].xi)
        return StabilityVerdict(
            StabilityClass.INTERMEDIATE_UNSTABLE,
            crossings=crossings,
            unstable_window=window,
            marginal=marginal,
            criteria_trace=trace,
        )

    trace["decided_by"] = "no crossings and negative spectrum envelope (numerical, not theorem-backed)"
    try:
        c0 = estimate_c0(spec, grid)
    except NotStableError as exc:
        trace["c0_failure_xi"] = exc.xi
        return StabilityVerdict(
            StabilityClass.INTERMEDIATE_UNSTABLE, unstable_window=exc.window, marginal=True, criteria_trace=trace
        )
    trace["c0_source"] = "numerical estimate on spectrum grid"
    return StabilityVerdict(StabilityClass.STABLE, c0=c0, criteria_trace=trace)
