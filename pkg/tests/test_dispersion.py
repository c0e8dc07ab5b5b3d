import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memstab import dispersion
from memstab.chain_trick import build_system
from memstab.dispersion import (
    DispersionPolynomial,
    RootFindingError,
    envelope,
    eval_p,
    fast_branch_limit,
    fast_branches,
    roots_at,
    roots_batch,
    slow_branch_expansion,
    slow_branch_limits,
    slow_branch_root,
    spectrum,
    track_branches,
)
from memstab.kernel_model import KernelSpec

spec_strategy = st.integers(0, 6).flatmap(
    lambda k: st.tuples(st.floats(0.05, 3), *[st.floats(0, 3) for _ in range(k)]).map(KernelSpec)
)


def multiset_close(a, b, tol=1e-6):
    a, b = list(np.asarray(a)), list(np.asarray(b))
    if len(a) != len(b):
        return False
    for x in a:
        j = int(np.argmin([abs(x - y) for y in b]))
        if abs(x - b[j]) > tol:
            return False
        b.pop(j)
    return True


class TestEvalP:
    def test_exponential_kernel_form(self):
        spec = KernelSpec((0.7,))
        for lam, mu in [(0.3 + 1j, 2.0), (-1.5, 0.4j)]:
            assert eval_p(spec, lam, mu) == pytest.approx(lam * (lam + 1) - 0.7 * mu**2)

    @given(spec_strategy)
    def test_trivial_roots_at_zero_frequency(self, spec):
        assert eval_p(spec, 0, 0) == 0
        assert eval_p(spec, -1, 0) == 0

    def test_determinant_example(self):
        spec = KernelSpec((1, 0.4, 1.0))
        det = np.linalg.det(build_system(spec).pencil(1j, 1j))
        assert abs(eval_p(spec, 1j, 1j) - det) <= 1e-12

    @settings(max_examples=200)
    @given(spec_strategy, st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=3))
    def test_equals_pencil_determinant(self, spec, lam, mu):
        det = np.linalg.det(build_system(spec).pencil(lam, mu))
        scale = max(1.0, abs(det))
        assert abs(eval_p(spec, lam, mu) - det) <= 1e-10 * scale

    @given(spec_strategy, st.complex_numbers(max_magnitude=3), st.floats(-5, 5))
    def test_coefficients_agree_with_evaluator(self, spec, lam, xi):
        poly = DispersionPolynomial(spec)
        coeffs = poly.coefficients(1j * xi)
        assert len(coeffs) == poly.degree + 1 and coeffs[0] == 1
        direct = poly(lam, 1j * xi)
        assert np.polyval(coeffs, lam) == pytest.approx(direct, rel=1e-9, abs=1e-9)

    def test_zero_frequency_polynomial(self):
        spec = KernelSpec((1.0, 0.3, 0.2))
        lam = np.linspace(-2, 1, 7)
        assert np.allclose(eval_p(spec, lam, 0), lam * (lam + 1) ** 3)


class TestRoots:
    def test_zero_frequency(self):
        spec = KernelSpec((1.0, 0.4, 1.0))
        assert multiset_close(roots_at(spec, 0.0), [0, -1, -1, -1])

    def test_quadratic_formula(self):
        r = roots_at(KernelSpec((1.0,)), 0.1)
        assert multiset_close(r, [-0.5 + np.sqrt(0.24), -0.5 - np.sqrt(0.24)], tol=1e-13)

    @settings(max_examples=100, deadline=None)
    @given(spec_strategy, st.floats(0, 1e3))
    def test_residual_contract_and_trace(self, spec, xi):
        r = roots_at(spec, xi)
        k = spec.k
        assert len(r) == k + 2
        res = np.abs(eval_p(spec, r, 1j * xi))
        assert np.all(res <= 1e-9 * (1 + np.abs(r)) ** (k + 2))
        # coefficient of lambda^{k+1} does not depend on xi
        assert r.sum().real == pytest.approx(-(k + 1), abs=1e-8 * (1 + np.abs(r).max()))
        assert abs(r.sum().imag) <= 1e-8 * (1 + np.abs(r).max())

    @given(spec_strategy, st.floats(0.01, 100))
    def test_conjugation_symmetry(self, spec, xi):
        r = roots_at(spec, xi)
        assert multiset_close(r, np.conj(r), tol=1e-6 * (1 + np.abs(r).max()))
        assert multiset_close(r, roots_at(spec, -xi), tol=1e-9 * (1 + np.abs(r).max()))

    def test_matches_companion_of_lambda_coefficients(self):
        # independent route: numpy roots in the lambda basis
        spec = KernelSpec((1.0, 0.4, 1.0))
        r = roots_at(spec, 1.0)
        oracle = np.roots(DispersionPolynomial(spec).coefficients(1j))
        assert multiset_close(r, oracle, tol=1e-10)
        assert r.real.max() < 0

    def test_right_half_plane_count_by_argument_principle(self):
        # closed contour: up the line Re = 1e-3, then clockwise back along a radius-20 arc
        spec = KernelSpec((1.0, 0.6, 1.5))
        xi = 1.6
        line = 1e-3 + 1j * np.linspace(-20, 20, 40001)
        arc = 1e-3 + 20 * np.exp(1j * np.linspace(np.pi / 2, -np.pi / 2, 20001))
        turns = 0.0
        for path in (line, arc):
            turns += np.sum(np.diff(np.unwrap(np.angle(eval_p(spec, path, 1j * xi))))) / (2 * np.pi)
        n_right = int(round(-turns))
        assert n_right == int(np.sum(roots_at(spec, xi).real > 1e-3)) == 2

    def test_sorted_descending_real_part(self):
        r = roots_batch(KernelSpec((1.0, 0.2, 0.3)), [0.5, 5.0])
        assert np.all(np.diff(r.real, axis=1) <= 0)

    def test_tolerance_env_override(self, monkeypatch):
        monkeypatch.setenv("MEMSTAB_TOL", "1e-300")
        with pytest.raises(RootFindingError) as info:
            roots_batch(KernelSpec((1.0, 0.3)), [1.0, 2.0])
        assert info.value.worst_residual is not None and info.value.xi in (1.0, 2.0)
        monkeypatch.setenv("MEMSTAB_TOL", "1e-9")
        assert roots_batch(KernelSpec((1.0, 0.3)), [1.0]).shape == (1, 3)

    def test_tau_normalization(self):
        spec = KernelSpec((0.5, 0.2), tau=2.0)
        assert multiset_close(roots_at(spec, 1.3), roots_at(KernelSpec((1.0, 0.4)), 1.3), tol=1e-12)


class TestSpectrum:
    def test_envelope_at_zero_frequency(self):
        sp = spectrum(KernelSpec((1.0, 0.3, 0.8)))
        assert sp.xi_grid[0] == 0 and sp.envelope[0] == 0.0
        assert len(sp.xi_grid) == 2001

    def test_pure_exponential_family_negative(self):
        sp = spectrum(KernelSpec((1.0, 0.0, 0.0)), 0.0, 10.0, 500, log_spacing=False)
        assert np.all(sp.envelope[1:] < 0)
        assert sp.unstable_window() is None

    def test_unstable_window_for_turing_point(self):
        sp = spectrum(KernelSpec((1.0, 0.6, 1.5)))
        window = sp.unstable_window()
        assert window is not None
        assert 1.2 < window[0] < window[1] < 2.3
        small, large = sp.xi_grid < 0.5, sp.xi_grid > 5
        assert np.all(sp.envelope[small & (sp.xi_grid > 0)] < 0) and np.all(sp.envelope[large] < 0)

    def test_branches_are_root_sets(self):
        spec = KernelSpec((1.0, 0.5, 0.4, 0.2))
        sp = spectrum(spec, 1e-2, 1e2, 200)
        for xi, row in zip(sp.xi_grid[::37], sp.branches[::37]):
            assert multiset_close(row, roots_at(spec, xi), tol=1e-9 * (1 + abs(xi)))

    def test_branch_tracking_is_continuous(self):
        sp = spectrum(KernelSpec((1.0, 0.4, 1.0)), 1e-2, 1e2, 2000)
        jumps = np.abs(np.diff(sp.branches, axis=0))
        scale = 1 + np.abs(sp.branches[1:])
        assert np.max(jumps / scale) < 0.05

    def test_track_branches_undoes_permutation(self):
        a = np.array([[0, 1, 2], [0.1, 1.1, 2.1], [0.2, 1.2, 2.2]], dtype=complex)
        shuffled = a.copy()
        shuffled[1] = a[1][[2, 0, 1]]
        shuffled[2] = a[2][[1, 2, 0]]
        assert np.array_equal(track_branches(shuffled), a)

    def test_csv_headers(self):
        sp = spectrum(KernelSpec((1.0,)), 0.1, 1.0, 3)
        lines = sp.to_csv().splitlines()
        assert lines[0] == "xi,branch_index,re_lambda,im_lambda"
        assert len(lines) == 1 + 4 * 2
        assert sp.envelope_to_csv().splitlines()[0] == "xi,max_re"

    @pytest.mark.parametrize(
        "kwargs", [dict(xi_min=1.0, xi_max=0.5), dict(n_points=1), dict(xi_min=0.0, log_spacing=True)]
    )
    def test_invalid_grids(self, kwargs):
        with pytest.raises(ValueError):
            spectrum(KernelSpec((1.0,)), **kwargs)


class TestAsymptotics:
    def test_slow_branch_examples(self):
        assert slow_branch_expansion(KernelSpec((1, 0, 0))) == 1
        assert slow_branch_expansion(KernelSpec((1, 0.4, 1.0))) == pytest.approx(2.4)
        assert slow_branch_expansion(KernelSpec((0.3,))) == pytest.approx(0.3)
        lam0 = slow_branch_root(KernelSpec((1, 0, 0)), 1e-3)
        assert lam0.real / 1e-6 == pytest.approx(-1, abs=1e-4)

    @settings(max_examples=50, deadline=None)
    @given(spec_strategy, st.sampled_from([1e-2, 3e-3, 1e-3]))
    def test_small_frequency_slope(self, spec, xi):
        lam0 = slow_branch_root(spec, xi)
        assert abs(lam0 / xi**2 + slow_branch_expansion(spec)) <= 10 * xi * max(1, sum(spec.theta)) ** 2

    def test_fast_branch_examples(self):
        assert fast_branch_limit(KernelSpec((1.0, 0.0))).damping == -0.5
        assert fast_branch_limit(KernelSpec((2.0, 2.0))).damping == 0.0
        lim = fast_branch_limit(KernelSpec((1, 0.4, 1.0)))
        assert lim.damping == pytest.approx(-0.3) and lim.speed == 1.0
        fast = fast_branches(KernelSpec((1, 0.4, 1.0)), 1e3)
        assert np.all(np.abs(fast.real + 0.3) < 1e-2)
        assert np.allclose(np.abs(fast.imag) / 1e3, 1.0, rtol=1e-3)

    def test_slow_limits_examples(self):
        k1 = slow_branch_limits(KernelSpec((2.0, 0.5)))
        assert k1 == pytest.approx([-1 - 0.25])
        double = slow_branch_limits(KernelSpec((1.0, 0.0, 0.0)))
        assert np.allclose(double, [-1, -1], atol=1e-6)
        pair = slow_branch_limits(KernelSpec((1.0, 0.4, 1.0)))
        assert pair.mean().real == pytest.approx(-1.2, abs=1e-12)
        # real roots: only the mean equals -1 - theta_2/(2 theta_1)
        real_pair = slow_branch_limits(KernelSpec((1.0, 3.0, 0.1)))
        assert np.all(np.abs(real_pair.imag) < 1e-12)
        assert real_pair.mean().real == pytest.approx(-1 - 1.5, abs=1e-12)
        assert slow_branch_limits(KernelSpec((1.0,))).size == 0

    @pytest.mark.parametrize("theta", [(1.0, 0.4, 1.0), (1.0, 0.2, 0.3, 0.1), (0.8, 0.5), (1.0, 0.0, 0.0, 0.0, 0.5)])
    def test_branches_converge_at_large_frequency(self, theta):
        spec = KernelSpec(theta)
        r = roots_at(spec, 1e4)
        order = np.argsort(np.abs(r))
        bounded, fast = r[order[: spec.k]], r[order[spec.k:]]
        assert np.all(np.abs(fast.real - fast_branch_limit(spec).damping) < 1e-2)
        assert multiset_close(bounded, slow_branch_limits(spec), tol=1e-2)

    def test_envelope_function_matches_spectrum(self):
        spec = KernelSpec((1.0, 0.3))
        xi = np.array([0.1, 1.0, 10.0])
        assert np.allclose(envelope(spec, xi), dispersion.roots_batch(spec, xi).real.max(axis=1))
