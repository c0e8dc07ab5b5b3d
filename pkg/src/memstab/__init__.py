"""Stability of heat conduction with memory kernels built from Gamma densities."""

from memstab._kernels import BACKEND
from memstab.chain_trick import build_system, chain_trick_residual, eigen_structure
from memstab.dispersion import (
    eval_p,
    fast_branch_limit,
    roots_at,
    slow_branch_expansion,
    slow_branch_limits,
    spectrum,
)
from memstab.kernel_model import KernelSpec, classify_shape_k2, eval_gamma, eval_kernel, total_mass
from memstab.stability import (
    StabilityClass,
    build_Q,
    classify,
    crossing_search,
    estimate_c0,
    high_freq_stable,
    region_membership_k2,
    routh_hurwitz,
    sharp_stable_k2,
    sufficient_stable_anyk,
)

__all__ = [
    "BACKEND",
    "KernelSpec",
    "StabilityClass",
    "build_Q",
    "build_system",
    "chain_trick_residual",
    "classify",
    "classify_shape_k2",
    "crossing_search",
    "eigen_structure",
    "estimate_c0",
    "eval_gamma",
    "eval_kernel",
    "eval_p",
    "fast_branch_limit",
    "high_freq_stable",
    "region_membership_k2",
    "roots_at",
    "routh_hurwitz",
    "sharp_stable_k2",
    "slow_branch_expansion",
    "slow_branch_limits",
    "spectrum",
    "sufficient_stable_anyk",
    "total_mass",
]
