"""Local hyperbolic system equivalent to the memory equation.

With ``psi_j = int_{-inf}^t g_j(t-s) d_x u(s) ds`` the memory equation becomes

    A0 dW/dt + A1 dW/dx + B W = 0,   W = (u, psi_1, ..., psi_{k+1}),

since each ``psi_j`` obeys ``psi_j' = psi_{j-1} - psi_j`` with ``psi_0 = d_x u``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import gammaincc

from memstab.kernel_model import KernelSpec, eval_gamma


class HyperbolicityError(ValueError):
    """The principal part ``A0^{-1} A1`` is not diagonalizable with real spectrum.

    ``case`` is ``"degenerate"`` for ``theta_1 == 0`` (eigenvalue 0 with
    algebraic multiplicity k+2 but geometric multiplicity k) and
    ``"complex"`` for ``theta_1 < 0``.
    """

    def __init__(self, message, case):
        super().__init__(message)
        self.case = case


class InsufficientHistoryError(ValueError):
    pass


def _weights(spec_or_theta) -> tuple[float, ...]:
    if isinstance(spec_or_theta, KernelSpec):
        return spec_or_theta.normalized().theta
    return tuple(float(x) for x in spec_or_theta)


@dataclass(frozen=True)
class SystemMatrices:
    a0: np.ndarray
    a1: np.ndarray
    b: np.ndarray

    @property
    def size(self) -> int:
        return self.a0.shape[0]

    @property
    def theta(self) -> np.ndarray:
        return self.a1[0, 1:].copy()

    def to_json(self) -> str:
        return json.dumps({"a0": self.a0.tolist(), "a1": self.a1.tolist(), "b": self.b.tolist()})

    def pencil(self, lam, mu) -> np.ndarray:
        """``lam A0 + mu A1 + B``, the matrix whose determinant is the dispersion polynomial."""
        return lam * self.a0 + mu * self.a1 + self.b


def build_system(spec: KernelSpec | Sequence[float]) -> SystemMatrices:
    """Matrices of the first-order system for a kernel with weights ``theta``.

    Accepts a :class:`KernelSpec` (normalized to ``tau = 1``) or a raw weight
    sequence, which is not validated so degenerate cases can be studied.
    """
    theta = _weights(spec)
    n = len(theta) + 1
    a0 = np.eye(n)
    a1 = np.zeros((n, n))
    a1[0, 1:] = theta
    a1[1, 0] = 1.0
    b = np.eye(n)
    b[0, 0] = 0.0
    for row in range(2, n):
        b[row, row - 1] = -1.0
    return SystemMatrices(a0, a1, b)


@dataclass(frozen=True)
class EigenStructure:
    """Eigen-decomposition of ``A0^{-1} A1``.

    ``eigenvectors`` holds columns ordered as ``(-sqrt(theta_1), +sqrt(theta_1),
    0, ..., 0)`` and is left unnormalized.
    """

    wave_speeds: tuple[float, float]
    zero_multiplicity: int
    eigenvectors: np.ndarray

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([self.wave_speeds[0], self.wave_speeds[1]] + [0.0] * self.zero_multiplicity)

    def diagonalize(self, m: SystemMatrices) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(D, E)`` with ``D = C^{-1} A0^{-1} A1 C`` and ``E = C^{-1} A0^{-1} B C``."""
        c = self.eigenvectors
        c_inv = np.linalg.inv(c)
        a0_inv = np.linalg.inv(m.a0)
        return c_inv @ a0_inv @ m.a1 @ c, c_inv @ a0_inv @ m.b @ c


def eigen_structure(m: SystemMatrices, spec: KernelSpec | None = None) -> EigenStructure:
    theta = m.theta if spec is None else np.array(_weights(spec))
    k = len(theta) - 1
    t1 = float(theta[0])
    if t1 == 0:
        raise HyperbolicityError(
            f"theta_1 = 0: eigenvalue 0 has algebraic multiplicity {k + 2} "
            f"but geometric multiplicity {k}; not diagonalizable",
            case="degenerate",
        )
    if t1 < 0:
        raise HyperbolicityError(f"theta_1 = {t1} < 0: wave speeds are imaginary", case="complex")
    kappa = math.sqrt(t1)
    n = k + 2
    vecs = np.zeros((n, n))
    for col, sign in enumerate((-1.0, 1.0)):
        vecs[0, col] = 1.0
        vecs[1, col] = sign / kappa
    for i in range(2, k + 2):
        # kernel of A1: u = 0, sum theta_j psi_j = 0
        col = i
        vecs[1, col] = -theta[i - 1]
        vecs[i, col] = t1
    return EigenStructure((-kappa, kappa), k, vecs)


@dataclass(frozen=True)
class ChainResidual:
    """Quadrature check of the chain ODEs ``psi_j' = psi_{j-1} - psi_j``.

    ``psi`` has rows ``psi_0 .. psi_{k+1}`` sampled at ``times``;
    ``residuals[j-1]`` is the sup over ``times`` of the ODE defect for ``psi_j``.
    """

    times: np.ndarray
    psi: np.ndarray
    residuals: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max())


def chain_trick_residual(
    spec: KernelSpec,
    psi0: Callable[[np.ndarray], np.ndarray],
    t_history: float,
    t_end: float,
    h: float,
    tail_tol: float = 1e-10,
) -> ChainResidual:
    """Compute ``psi_j = T_j psi0`` by trapezoidal quadrature and measure the ODE defect.

    ``psi0`` is sampled on ``[-t_history, t_end]`` with step ``h``; history
    before ``-t_history`` is dropped, so the Gamma tail beyond ``t_history``
    must carry mass below ``tail_tol``. The derivative uses second-order
    finite differences on ``[0, t_end]``.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    spec = spec.normalized()
    shapes = spec.k + 1
    tail = float(gammaincc(shapes, t_history))
    if tail > tail_tol:
        raise InsufficientHistoryError(
            f"history length {t_history} leaves Gamma({shapes}) tail mass {tail:.3g} > {tail_tol:g}"
        )
    n_hist = int(round(t_history / h))
    n_fwd = int(round(t_end / h))
    s = h * np.arange(-n_hist, n_fwd + 1)
    samples = np.asarray(psi0(s))
    lags = h * np.arange(s.size)
    out_idx = np.arange(n_hist, s.size)
    psi = [samples[out_idx]]
    for j in range(1, shapes + 1):
        gj = eval_gamma(j, 1.0, lags)
        conv = fftconvolve(samples, gj)[: s.size]
        # trapezoid: halve the two end-point terms of each rectangle sum
        trap = conv - 0.5 * gj * samples[0] - 0.5 * gj[0] * samples
        psi.append(h * trap[out_idx])
    psi = np.array(psi)
    times = s[out_idx]
    residuals = np.empty(shapes)
    for j in range(1, shapes + 1):
        deriv = np.gradient(psi[j], h, edge_order=2)
        residuals[j - 1] = np.max(np.abs(deriv - (psi[j - 1] - psi[j])))
    return ChainResidual(times, psi, residuals)
