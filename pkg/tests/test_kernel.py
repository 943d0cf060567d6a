import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from roadfront.errors import KernelOverflow, UnderresolvedKernel
from roadfront.kernel import PROFILES, Kernel, apply_J, unit_profile


@pytest.mark.parametrize("profile", PROFILES)
def test_unit_profile_has_unit_mass_and_compact_support(profile):
    mass, _ = integrate.quad(lambda s: unit_profile(profile, s), -1, 1, epsabs=0, epsrel=1e-12,
                             points=[0.0], limit=200)
    assert abs(mass - 1) <= 1e-10
    assert unit_profile(profile, np.array([1.0, 1.5, -3.0])).tolist() == [0.0, 0.0, 0.0]


def test_eval_closed_form_values():
    assert Kernel("epanechnikov", 1.0).eval(0.0) == 0.75
    for profile in PROFILES:
        assert Kernel(profile, 2.0).eval(3.0) == 0.0


@pytest.mark.parametrize("profile", PROFILES)
def test_eval_even_nonnegative_and_rescaled(profile):
    x = np.linspace(-3, 3, 301)
    k = Kernel(profile, 1.7)
    vals = k.eval(x)
    assert np.array_equal(vals, k.eval(-x))
    assert vals.min() >= 0
    assert np.allclose(vals, unit_profile(profile, x / 1.7) / 1.7, rtol=0, atol=0)


def test_invalid_kernel_rejected():
    with pytest.raises(ValueError):
        Kernel("gaussian", 1.0)
    with pytest.raises(ValueError):
        Kernel("epanechnikov", 0.0)


@pytest.mark.parametrize("profile", PROFILES)
def test_phi_matches_doubled_order_oracle(profile):
    k = Kernel(profile, 1.3)
    a = np.array([0.1, 0.7, 2.0, 5.0, 13.0])
    assert np.allclose(k.phi(a), k.phi(a, order=128), rtol=1e-10, atol=0)


def test_phi_basic_identities():
    k = Kernel("epanechnikov", 1.0)
    assert k.phi(0.0) == 0.0
    assert k.phi(2.0) == k.phi(-2.0)


def test_phi_matches_adaptive_quadrature_of_definition():
    k = Kernel("triangular", 0.8)
    a = 3.1
    ref, _ = integrate.quad(lambda x: k.eval(x) * math.expm1(a * x), -0.8, 0.8, points=[0.0],
                            epsabs=0, epsrel=1e-13)
    assert abs(k.phi(a) - ref) <= 1e-12 * ref


def _sandwich_lower(k, a, delta, inner=0.5):
    # K vanishes at the support edge, so the minimum is taken on [1 - delta, 1 - inner*delta]
    kmin = float(unit_profile(k.profile, np.linspace(1 - delta, 1 - inner * delta, 2001)).min())
    return delta * kmin * (0.5 * math.exp((1 - delta) * a * k.L) - 1)


def test_phi_sandwich_example():
    k = Kernel("epanechnikov", 1.0)
    lo = _sandwich_lower(k, 2.0, 0.5, inner=0.0)
    assert lo < k.phi(2.0) < math.e**2 - 1
    assert 0 < _sandwich_lower(k, 2.0, 0.5) < k.phi(2.0)


@pytest.mark.parametrize("delta", [0.25, 0.5])
@pytest.mark.parametrize("profile", PROFILES)
def test_phi_sandwich_on_samples(profile, delta):
    k = Kernel(profile, 1.0)
    for a in np.linspace(0.1, 30, 40):
        val = k.phi(a)
        assert _sandwich_lower(k, a, delta) <= val <= math.expm1(a * k.L)


@pytest.mark.parametrize("profile", PROFILES)
def test_phi_even_nonnegative_and_strictly_convex(profile):
    L = 0.6
    k = Kernel(profile, L)
    a = np.linspace(-20 / L, 20 / L, 81)
    vals = k.phi(a)
    assert np.array_equal(vals, k.phi(-a))
    assert vals.min() >= 0
    h = 1e-3
    pts = np.linspace(-10, 10, 50)
    second = k.phi(pts + h) - 2 * k.phi(pts) + k.phi(pts - h)
    assert (second > 0).all()


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-40, 40), L=st.floats(0.05, 5.0))
def test_phi_scaling_law(a, L):
    k, k1 = Kernel("bump", L), Kernel("bump", 1.0)
    assert math.isclose(k.phi(a), k1.phi(a * L), rel_tol=1e-9, abs_tol=1e-300)


def test_phi_overflow_guard():
    k = Kernel("epanechnikov", 2.0)
    k.phi(250.0)
    with pytest.raises(KernelOverflow):
        k.phi(250.1)
    with pytest.raises(KernelOverflow):
        k.phi_second(-300.0)


def test_second_moment_closed_forms():
    assert Kernel("epanechnikov").second_moment() == 0.2
    assert Kernel("triangular").second_moment() == 1 / 6
    ref, _ = integrate.quad(lambda s: s * s * unit_profile("bump", s), -1, 1, epsabs=0, epsrel=1e-12)
    assert abs(Kernel("bump").second_moment() - ref) <= 1e-10


@pytest.mark.parametrize("profile", PROFILES)
def test_phi_second_at_zero_is_scaled_moment(profile):
    for L in (1.0, 0.3, 2.5):
        k = Kernel(profile, L)
        assert abs(k.phi_second(0.0) - L * L * k.second_moment()) <= 1e-10 * L * L
    assert abs(Kernel(profile, 1.0).phi_second(0.0) - Kernel(profile).second_moment()) <= 1e-10


def test_phi_second_epanechnikov_value():
    assert abs(Kernel("epanechnikov", 1.0).phi_second(0.0) - 0.2) <= 1e-12


@pytest.mark.parametrize("profile", PROFILES)
def test_phi_derivatives_match_finite_differences(profile):
    k = Kernel(profile, 1.0)
    h = 1e-4
    for a in (-6.0, -0.5, 0.3, 1.0, 4.0, 9.0):
        fd2 = (k.phi(a + h) - 2 * k.phi(a) + k.phi(a - h)) / h**2
        assert abs(k.phi_second(a) - fd2) <= 1e-5 * k.phi_second(a)
        fd1 = (k.phi(a + h) - k.phi(a - h)) / (2 * h)
        assert abs(k.phi_prime(a) - fd1) <= 1e-7 * max(1.0, abs(k.phi_prime(a)))


def test_phi_second_positive_everywhere():
    k = Kernel("triangular", 1.0)
    assert (k.phi_second(np.linspace(-100, 100, 201)) > 0).all()


@pytest.mark.parametrize("profile", PROFILES)
def test_weights_even_unit_sum(profile):
    w = Kernel(profile, 1.0).weights(0.1)
    assert abs(w.sum() - 1) <= 1e-15
    assert np.array_equal(w, w[::-1])
    assert w.min() >= 0


def test_underresolved_kernel_rejected():
    k = Kernel("epanechnikov", 1.0)
    k.weights(0.49)
    with pytest.raises(UnderresolvedKernel):
        k.weights(0.5)
    with pytest.raises(UnderresolvedKernel):
        apply_J(k, np.zeros(20), 0.6)


@pytest.mark.parametrize("boundary", ["periodic", "neumann"])
def test_apply_J_annihilates_constants(boundary):
    k = Kernel("bump", 1.0)
    out = apply_J(k, np.full(200, 3.7), 0.05, boundary)
    assert np.abs(out).max() <= 1e-12


def test_apply_J_zero_outside_loses_mass_at_edges_only():
    k = Kernel("epanechnikov", 1.0)
    out = apply_J(k, np.ones(200), 0.1, "zero")
    assert np.abs(out[20:-20]).max() <= 1e-12
    assert out[0] < 0


def test_apply_J_periodic_conserves_mass():
    rng = np.random.default_rng(11)
    k = Kernel("triangular", 1.0)
    for _ in range(5):
        u = rng.random(300)
        assert abs(apply_J(k, u, 0.07, "periodic").sum()) <= 1e-12


def test_apply_J_nonnegative_at_global_minimum():
    u = np.zeros(101)
    u[40] = 1.0
    u += np.linspace(0, 0.01, 101)
    out = apply_J(Kernel("epanechnikov", 1.0), u, 0.1, "periodic")
    assert out[np.argmin(u)] >= 0


def test_apply_J_preserves_order_for_unit_step():
    rng = np.random.default_rng(3)
    k = Kernel("epanechnikov", 1.0)
    for _ in range(20):
        u = rng.random(150)
        w = u + rng.random(150)
        lhs = u + apply_J(k, u, 0.1, "periodic")
        rhs = w + apply_J(k, w, 0.1, "periodic")
        assert (lhs <= rhs).all()


def test_apply_J_matches_direct_convolution():
    k = Kernel("epanechnikov", 1.0)
    dx = 0.1
    x = dx * np.arange(200)
    u = np.sin(2 * np.pi * x / 20.0)
    w = k.weights(dx)
    n = (len(w) - 1) // 2
    direct = sum(w[n + m] * (np.roll(u, -m) - u) for m in range(-n, n + 1))
    assert np.allclose(apply_J(k, u, dx, "periodic"), direct, atol=1e-14)


def test_apply_J_does_not_alias_input():
    u = np.linspace(0, 1, 50)
    before = u.copy()
    out = apply_J(Kernel("epanechnikov", 1.0), u, 0.1, "neumann")
    assert out is not u
    assert np.array_equal(u, before)


def test_apply_J_symmetric_input_gives_symmetric_output():
    x = 0.05 * np.arange(-100, 101)
    u = np.exp(-x * x)
    for boundary in ("periodic", "neumann", "zero"):
        out = apply_J(Kernel("bump", 1.0), u, 0.05, boundary)
        assert np.array_equal(out, out[::-1])
