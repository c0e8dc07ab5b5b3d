"""Memory kernels built from Gamma densities with integer shapes.

A kernel is ``g(t) = sum_j theta_j g(t; j, tau)`` for shapes ``j = 1..k+1``
and a single scale ``tau``, where

    g(t; j, tau) = t**(j-1) exp(-t/tau) / ((j-1)! tau**j).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class KernelError(ValueError):
    """Invalid kernel parameters or evaluation domain."""


class UnsupportedOrderError(ValueError):
    """Raised by routines that only exist for a specific number of shapes."""


def _factorial(n: int) -> float:
    out = 1.0
    for i in range(2, n + 1):
        out *= i
    return out


def rescale_time(t, tau: float):
    """Map physical time to time measured in units of ``tau``."""
    if tau <= 0:
        raise KernelError(f"tau must be positive, got {tau}")
    return np.asarray(t, dtype=float) / tau if np.ndim(t) else float(t) / tau


@dataclass(frozen=True)
class KernelSpec:
    """Weights ``theta = (theta_1, ..., theta_{k+1})`` and scale ``tau``.

    The weights must satisfy ``theta_1 > 0`` and ``theta_j >= 0``.
    """

    theta: tuple[float, ...]
    tau: float = 1.0

    def __post_init__(self):
        theta = tuple(float(x) for x in self.theta)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "tau", float(self.tau))
        if len(theta) == 0:
            raise KernelError("theta: at least one weight is required")
        if not all(math.isfinite(x) for x in theta):
            raise KernelError("theta: weights must be finite")
        if theta[0] <= 0:
            raise KernelError(f"theta: theta_1 must be positive, got {theta[0]}")
        if any(x < 0 for x in theta[1:]):
            raise KernelError("theta: weights theta_j must be non-negative")
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise KernelError(f"tau: must be positive, got {self.tau}")

    @property
    def k(self) -> int:
        return len(self.theta) - 1

    @property
    def weights(self) -> np.ndarray:
        return np.array(self.theta)

    def normalized(self) -> "KernelSpec":
        """Equivalent spec with ``tau = 1`` (time measured in units of ``tau``).

        Substituting ``t -> t/tau`` in the memory equation multiplies every
        weight by ``tau``.
        """
        if self.tau == 1.0:
            return self
        return KernelSpec(tuple(self.tau * x for x in self.theta), 1.0)

    def eta(self) -> "EtaCoordinates":
        return EtaCoordinates(tuple(x / self.theta[0] for x in self.theta[1:]))

    @classmethod
    def from_eta(cls, eta: Sequence[float], theta1: float = 1.0) -> "KernelSpec":
        return cls((theta1,) + tuple(theta1 * e for e in eta))

    def to_dict(self) -> dict:
        return {"k": self.k, "theta": list(self.theta), "tau": self.tau}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "KernelSpec":
        if not isinstance(data, dict):
            raise KernelError("spec: expected a JSON object")
        if "theta" not in data:
            raise KernelError("theta: missing field")
        theta = data["theta"]
        if not isinstance(theta, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in theta
        ):
            raise KernelError("theta: expected a list of numbers")
        tau = data.get("tau", 1.0)
        if not isinstance(tau, (int, float)) or isinstance(tau, bool):
            raise KernelError("tau: expected a number")
        if "k" in data:
            k = data["k"]
            if not isinstance(k, int) or isinstance(k, bool) or k < 0:
                raise KernelError("k: expected a non-negative integer")
            if len(theta) != k + 1:
                raise KernelError(f"k: theta has {len(theta)} entries but k={k} requires {k + 1}")
        return cls(tuple(theta), tau)

    @classmethod
    def from_json(cls, text: str) -> "KernelSpec":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise KernelError(f"spec: malformed JSON ({exc})") from None
        return cls.from_dict(data)


@dataclass(frozen=True)
class EtaCoordinates:
    """Weight ratios ``eta_j = theta_{j+1} / theta_1`` for ``j = 1..k``."""

    eta: tuple[float, ...]

    def __getitem__(self, shape: int) -> float:
        # indexed by Gamma shape, eta[2] == theta_2/theta_1
        return self.eta[shape - 2]


def eval_gamma(j: int, tau: float, t):
    """Gamma density of integer shape ``j`` and scale ``tau`` at ``t >= 0``."""
    if int(j) != j or j < 1:
        raise KernelError(f"shape j must be a positive integer, got {j}")
    if tau <= 0:
        raise KernelError(f"tau must be positive, got {tau}")
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise KernelError("t must be non-negative")
    j = int(j)
    s = arr / tau
    with np.errstate(over="ignore", under="ignore"):
        val = s ** (j - 1) * np.exp(-s) / (_factorial(j - 1) * tau)
    return float(val) if arr.ndim == 0 else val


def eval_kernel(spec: KernelSpec, t):
    """Evaluate ``g(t) = sum_j theta_j g(t; j, tau)``."""
    out = 0.0
    for j, weight in enumerate(spec.theta, start=1):
        if weight:
            out = out + weight * eval_gamma(j, spec.tau, t)
    if np.ndim(t) and np.isscalar(out):
        out = np.full(np.shape(t), out)
    return out


def total_mass(spec: KernelSpec) -> float:
    """Integral of the kernel over ``[0, inf)``; each Gamma density has unit mass."""
    return float(sum(spec.theta))


def in_monotone_region(eta2, eta3):
    """Closed region of (eta2, eta3) where the k=2 kernel is non-increasing."""
    eta2 = np.asarray(eta2, dtype=float)
    eta3 = np.asarray(eta3, dtype=float)
    strip = (eta2 >= 0) & (eta2 <= 1) & (eta3 >= 0)
    return strip & ((eta2 - eta3 >= 0) | (eta2**2 + (eta3 - 1) ** 2 <= 1))


def in_convex_region(eta2, eta3):
    """Closed region of (eta2, eta3) where the k=2 kernel is convex."""
    eta2 = np.asarray(eta2, dtype=float)
    eta3 = np.asarray(eta3, dtype=float)
    base = (eta2 >= 0) & (eta3 >= 0) & (2 * eta2 - eta3 <= 1)
    return base & ((eta2 - 2 * eta3 >= 0) | (2 * eta2**2 + 4 * (eta3 - 0.5) ** 2 <= 1))


@dataclass(frozen=True)
class ShapeReport:
    monotone_decreasing: bool
    convex: bool


def classify_shape_k2(spec: KernelSpec) -> ShapeReport:
    """Monotonicity and convexity of a k=2 kernel via its (eta2, eta3) coordinates."""
    if spec.k != 2:
        raise UnsupportedOrderError(f"shape classification needs k=2, got k={spec.k}")
    eta = spec.eta()
    return ShapeReport(
        monotone_decreasing=bool(in_monotone_region(eta[2], eta[3])),
        convex=bool(in_convex_region(eta[2], eta[3])),
    )
