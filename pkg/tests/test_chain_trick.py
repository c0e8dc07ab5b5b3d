import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from memstab.chain_trick import (
    HyperbolicityError,
    InsufficientHistoryError,
    build_system,
    chain_trick_residual,
    eigen_structure,
)
from memstab.kernel_model import KernelSpec

thetas = st.integers(0, 6).flatmap(
    lambda k: st.tuples(st.floats(0.01, 5), *[st.floats(0, 5) for _ in range(k)])
)


class TestBuildSystem:
    def test_exponential_kernel_is_two_by_two(self):
        m = build_system(KernelSpec((0.7,)))
        assert np.array_equal(m.a1, [[0, 0.7], [1, 0]])
        assert np.array_equal(m.b, np.diag([0.0, 1.0]))
        assert np.array_equal(m.a0, np.eye(2))

    def test_k1_layout(self):
        m = build_system(KernelSpec((1.0, 1.0)))
        assert np.array_equal(m.a1[0], [0, 1, 1])
        assert m.b[1, 1] == m.b[2, 2] == 1 and m.b[2, 1] == -1

    @given(thetas)
    def test_structural_pattern(self, theta):
        m = build_system(KernelSpec(theta))
        n = len(theta) + 1
        assert m.size == n
        assert np.array_equal(m.a0, np.eye(n))
        a1 = np.zeros((n, n))
        a1[0, 1:] = theta
        a1[1, 0] = 1
        assert np.array_equal(m.a1, a1)
        assert np.array_equal(np.diag(m.b), [0] + [1] * (n - 1))
        assert np.array_equal(np.diag(m.b, -1), [0] + [-1] * (n - 2))
        assert np.count_nonzero(m.b) == (n - 1) + (n - 2)

    def test_tau_is_normalized(self):
        assert np.allclose(build_system(KernelSpec((1.0, 0.5), tau=2.0)).theta, [2.0, 1.0])

    def test_json_export(self):
        data = json.loads(build_system(KernelSpec((1.0, 0.4))).to_json())
        assert set(data) == {"a0", "a1", "b"} and len(data["a1"]) == 3

    @settings(max_examples=200)
    @given(thetas, st.floats(-3, 3))
    def test_principal_determinant(self, theta, lam):
        m = build_system(KernelSpec(theta))
        k = len(theta) - 1
        det = np.linalg.det(m.a1 - lam * m.a0)
        closed = (-lam) ** k * (lam**2 - theta[0])
        assert det == pytest.approx(closed, rel=1e-10, abs=1e-10)

    def test_k2_determinant_example(self):
        m = build_system(KernelSpec((1, 0.4, 1.0)))
        for lam in (0.3, 1.7, -2.0):
            assert np.linalg.det(m.a1 - lam * m.a0) == pytest.approx(lam**2 * (lam**2 - 1), abs=1e-12)


class TestEigenStructure:
    def test_pure_exponential_family(self):
        es = eigen_structure(build_system(KernelSpec((1, 0, 0))))
        assert es.wave_speeds == (-1.0, 1.0) and es.zero_multiplicity == 2

    def test_k0(self):
        es = eigen_structure(build_system(KernelSpec((4.0,))))
        assert es.wave_speeds == (-2.0, 2.0) and es.zero_multiplicity == 0

    def test_k1_eigenvector_against_numeric_solver(self):
        m = build_system(KernelSpec((0.25, 0.1)))
        es = eigen_structure(m)
        assert np.allclose(es.eigenvectors[:, 1], [1, 2, 0])
        vals, vecs = np.linalg.eig(np.linalg.solve(m.a0, m.a1))
        numeric = vecs[:, np.argmin(np.abs(vals - 0.5))]
        numeric = numeric / numeric[0]
        assert np.allclose(numeric, [1, 2, 0], atol=1e-12)

    @given(thetas)
    def test_diagonalizes_principal_part(self, theta):
        m = build_system(theta)
        es = eigen_structure(m)
        c = es.eigenvectors
        assert np.linalg.matrix_rank(c) == len(theta) + 1
        d, _ = es.diagonalize(m)
        assert np.allclose(d, np.diag(es.eigenvalues), atol=1e-10 * max(1, theta[0]))
        # columns really are eigenvectors of A1
        assert np.allclose(m.a1 @ c, c * es.eigenvalues, atol=1e-10 * max(theta))

    def test_degenerate_and_complex_cases(self):
        with pytest.raises(HyperbolicityError) as info:
            eigen_structure(build_system([0.0, 0.5]))
        assert info.value.case == "degenerate"
        with pytest.raises(HyperbolicityError) as info:
            eigen_structure(build_system([-1.0, 0.5]))
        assert info.value.case == "complex"

    def test_degenerate_multiplicities(self):
        # theta_1 = 0: eigenvalue 0 of multiplicity k+2 with a k-dimensional eigenspace
        theta = [0.0, 0.5, 0.3]
        a1 = build_system(theta).a1
        assert np.allclose(np.linalg.eigvals(a1), 0, atol=1e-5)
        assert a1.shape[0] - np.linalg.matrix_rank(a1) == len(theta) - 1


class TestChainResidual:
    def test_constant_history(self):
        spec = KernelSpec((1.0, 0.4, 1.0))
        # trapezoid end error is h^2/12 times the jump of g_1' at 0
        res = chain_trick_residual(spec, np.ones_like, t_history=40, t_end=5, h=2e-4)
        assert np.allclose(res.psi, 1.0, atol=1e-8)
        assert res.max_residual <= 1e-8

    def test_fourier_mode_multiplier(self):
        spec = KernelSpec((1.0, 0.5, 0.2, 0.1))
        res = chain_trick_residual(spec, lambda t: np.exp(1j * t), t_history=60, t_end=5, h=1e-3)
        for j in range(1, 5):
            expected = (1 + 1j) ** (-j) * np.exp(1j * res.times)
            assert np.max(np.abs(res.psi[j] - expected)) < 1e-6

    def test_cosine_first_stage(self):
        spec = KernelSpec((1.0,))
        res = chain_trick_residual(spec, np.cos, t_history=40, t_end=6, h=1e-3)
        expected = (np.cos(res.times) + np.sin(res.times)) / 2
        assert np.max(np.abs(res.psi[1] - expected)) < 1e-6

    def test_residual_vanishes_with_h(self):
        spec = KernelSpec((1.0, 0.3, 0.6))
        coarse = chain_trick_residual(spec, np.sin, 40, 5, 1e-2).max_residual
        fine = chain_trick_residual(spec, np.sin, 40, 5, 5e-3).max_residual
        assert fine <= coarse / 2 + 1e-12

    def test_short_history_rejected(self):
        with pytest.raises(InsufficientHistoryError):
            chain_trick_residual(KernelSpec((1.0, 1.0)), np.ones_like, t_history=5, t_end=1, h=1e-2)


def test_chain_with_zero_input_decays():
    # psi_j' = psi_{j-1} - psi_j with psi_0 = 0: a Jordan block at -1
    k = 4
    mat = -np.eye(k + 1) + np.eye(k + 1, k=-1)
    start = np.random.default_rng(1).uniform(-1, 1, k + 1)
    norms = [np.linalg.norm(expm(mat * t) @ start) for t in (40.0, 60.0)]
    assert norms[1] < 1e-20
    rate = np.log(norms[1] / norms[0]) / 20
    # t^k e^{-t} growth of the polynomial factor shifts the rate by k log(1.5)/20
    assert rate == pytest.approx(-1 + k * np.log(1.5) / 20, abs=0.02)
