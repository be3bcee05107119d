import numpy as np
import pytest
from numpy.testing import assert_allclose

from gmfilter.errors import InputError
from gmfilter.filtering import a_minus_mu, estimate_functional, estimate_single_value, solve_filter
from gmfilter.increments import IncrementSpec, expand_increment_coeffs
from gmfilter.lift import index_single_value, lift_coefficients, single_value_coefficients
from gmfilter.operators import fourier_blocks
from gmfilter.oracles import oracle_finite_window
from gmfilter.psarima import PSARIMAModel
from gmfilter.spectral import SpectralDensityGrid, density_from_psarima, from_increment_density


def t2_densities(M=1024):
    spec = IncrementSpec.from_lists([1], period=2)
    sig = PSARIMAModel(ar=[[1.0, -0.5], [1.0, 0.3, -0.2]], ma=[[1.0, 0.4], [1.0]], sigma2=[1.0, 2.0])
    noi = PSARIMAModel(ar=[[1.0, -0.3], [1.0]], ma=[[1.0], [1.0, 0.5]], sigma2=[0.5, 0.3])
    f = from_increment_density(spec, density_from_psarima(sig, M))
    return spec, f, density_from_psarima(noi, M), [1.0, 0.7, -0.3, 0.2, 0.5]


def test_a_minus_mu_trivial_spec():
    spec = IncrementSpec.from_lists([1], R=[0])
    a = lift_coefficients([1.0, 2.0, 3.0], 1)
    assert_allclose(a_minus_mu(a, spec), a.blocks)


def test_a_minus_mu_polynomial_identity(rng):
    spec = IncrementSpec.from_lists([1, 3], R=[1, 1], period=2)
    a = lift_coefficients(rng.standard_normal(9), 2)
    e = expand_increment_coeffs(spec).as_array()
    n = len(e) - 1
    out = a_minus_mu(a, spec)
    for z in np.exp(1j * rng.uniform(-np.pi, np.pi, 5)) * 0.9:
        lhs = np.polyval(out[::-1], z)
        rhs = z ** n * np.polyval(e[::-1], 1 / z) * np.polyval(a.blocks[::-1], z)
        assert_allclose(lhs, rhs, rtol=1e-12)


def test_a_minus_mu_single_value():
    spec = IncrementSpec.from_lists([1, 2], R=[1, 1], period=3)
    e = expand_increment_coeffs(spec).as_array()
    n = len(e) - 1
    M = 7
    N, p = index_single_value(M, 3)
    out = a_minus_mu(single_value_coefficients(M, 3), spec)
    expected = np.zeros_like(out)
    for m in range(N - n, N + 1):
        expected[m + n, p - 1] = e[N - m]
    assert_allclose(out, expected)


def test_zero_noise(toy):
    spec, f, _, a = toy
    sol = solve_filter(f, SpectralDensityGrid.zeros(1, f.M), a, spec)
    assert_allclose(sol.h, 0.0, atol=1e-14)
    assert_allclose(sol.c, 0.0, atol=1e-14)
    assert abs(sol.delta) < 1e-14


def test_homogeneity(toy):
    spec, f, g, a = toy
    base = solve_filter(f, g, a, spec)
    for c in (0.1, 7.0):
        sol = solve_filter(f.scaled(c), g.scaled(c), a, spec)
        assert_allclose(sol.h, base.h, atol=1e-12)
        assert_allclose(sol.delta, c * base.delta, rtol=1e-10)


def test_forms_and_oracle_t1(toy):
    spec, f, g, a = toy
    sol = solve_filter(f, g, a, spec)
    assert sol.consistency() < 1e-6
    assert abs(oracle_finite_window(f, g, spec, a, W=200) - sol.delta) / sol.delta < 1e-2
    assert sol.tap_report.max_imag < 1e-10


def test_forms_and_oracle_t2():
    spec, f, g, a = t2_densities()
    sol = solve_filter(f, g, a, spec)
    assert sol.consistency() < 1e-6
    assert abs(oracle_finite_window(f, g, spec, a, W=200) - sol.delta) / sol.delta < 1e-2


def test_oracle_properties(toy):
    spec, f, g, a = toy
    mses = [oracle_finite_window(f, g, spec, a, W) for W in (1, 5, 20, 60)]
    assert np.all(np.diff(mses) <= 1e-12)
    assert abs(oracle_finite_window(f, SpectralDensityGrid.zeros(1, f.M), spec, a, 10)) < 1e-12


def test_characteristic_matches_oracle_taps(toy):
    spec, f, g, a = toy
    sol = solve_filter(f, g, a, spec)
    _, w = oracle_finite_window(f, g, spec, a, W=120, return_weights=True)
    K = min(20, sol.taps.shape[0])
    assert_allclose(np.real(w[:K, 0]), np.real(sol.taps[:K, 0]), atol=1e-6)


def test_estimate_functional_trivial(toy):
    spec, f, g, a = toy
    sol = solve_filter(f, g, a, spec)
    hist = np.random.default_rng(0).standard_normal(300)
    plug = hist[::-1][:3] @ np.array(a)
    assert_allclose(estimate_functional(hist, sol, taps=np.zeros_like(sol.taps)), plug)
    assert estimate_functional(np.zeros(300), sol) == 0.0
    with pytest.raises(InputError):
        estimate_functional(np.zeros(3), sol)


def test_single_value():
    spec, f, g, _ = t2_densities(512)
    hist = np.random.default_rng(1).standard_normal(400)
    est, sol = estimate_single_value(hist, 3, spec, f, g)
    ref = solve_filter(f, g, [0.0, 0.0, 0.0, 1.0], spec)
    assert_allclose(sol.delta, ref.delta, rtol=1e-12)
    assert_allclose(est, estimate_functional(hist, ref), rtol=1e-12)
    N, p = index_single_value(3, 2)
    ops = fourier_blocks(f, g, spec, 1, nq=1)
    # Delta carries the 2 pi of the Fourier coefficient normalization
    assert_allclose(sol.q_term, 2 * np.pi * ops.Q[p - 1, p - 1].real, rtol=1e-10)
    zero = SpectralDensityGrid.zeros(2, 512)
    est0, sol0 = estimate_single_value(hist, 3, spec, f, zero)
    assert abs(sol0.delta) < 1e-14
    assert_allclose(est0, hist[-4], atol=1e-12)


def test_fixed_truncation(toy):
    spec, f, g, a = toy
    assert solve_filter(f, g, a, spec, L=16).L == 16
    with pytest.raises(InputError):
        solve_filter(f, g, a, IncrementSpec.from_lists([1], period=2))
