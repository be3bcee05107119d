import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad

from gmfilter.errors import InputError, NumericalError
from gmfilter.increments import IncrementSpec, beta_at, chi_at
from gmfilter.psarima import PSARIMAModel
from gmfilter.spectral import (SpectralDensityGrid, check_minimality, combined_density, density_from_psarima,
                               fractional_density, from_increment_density, hermitian_inverse, midpoint_grid,
                               structural_cov, to_increment_density)

SPEC1 = IncrementSpec.from_lists([1])


def random_density(rng, M, T):
    A = rng.standard_normal((M, T, T)) + 1j * rng.standard_normal((M, T, T))
    return SpectralDensityGrid(A @ np.conj(np.swapaxes(A, 1, 2)) + 0.1 * np.eye(T))


def test_grid_basics():
    lam = midpoint_grid(8)
    assert_allclose(lam, -np.pi + (np.arange(8) + 0.5) * 2 * np.pi / 8)
    d = SpectralDensityGrid.constant(np.eye(2) / (2 * np.pi), 64)
    assert_allclose(d.integral(), np.eye(2), atol=1e-14)
    assert_allclose(d.covariance([0, 1, 5]), [np.eye(2), np.zeros((2, 2)), np.zeros((2, 2))], atol=1e-14)


def test_grid_rejects_non_psd():
    with pytest.raises(InputError):
        SpectralDensityGrid(np.tile(np.diag([1.0, -1.0]), (16, 1, 1)))
    with pytest.raises(InputError):
        SpectralDensityGrid(np.tile(np.array([[1.0, 1.0], [0.0, 1.0]]), (16, 1, 1)))


def test_serialization_roundtrip(tmp_path, rng):
    d = random_density(rng, 32, 2)
    for name in ("d.json", "d.npz"):
        d.save(str(tmp_path / name))
        assert_allclose(SpectralDensityGrid.load(str(tmp_path / name)).values, d.values)
    (tmp_path / "bad.json").write_text('{"T": 2, "M_grid": ')
    with pytest.raises(InputError):
        SpectralDensityGrid.load(str(tmp_path / "bad.json"))
    with pytest.raises(InputError):
        SpectralDensityGrid.from_dict({"T": 2, "M_grid": 3, "re": [[1.0]]})


def test_combined_density(rng):
    f = random_density(rng, 64, 2)
    zero = SpectralDensityGrid.zeros(2, 64)
    spec = IncrementSpec.from_lists([1], period=2)
    assert_allclose(combined_density(f, zero, spec).values, f.values)
    g = SpectralDensityGrid.constant(np.eye(1), 64)
    p = combined_density(SpectralDensityGrid.zeros(1, 64), g, SPEC1)
    for m in (3, 20, 50):
        assert_allclose(p.values[m, 0, 0], f.lambdas[m] ** 2)
    g2 = random_density(rng, 64, 2)
    assert_allclose(combined_density(f.scaled(3.0), g2.scaled(3.0), spec).values,
                    3.0 * combined_density(f, g2, spec).values)


def test_increment_form_roundtrip(rng):
    spec = IncrementSpec.from_lists([1, 2], R=[1, 1])
    f = random_density(rng, 128, 1)
    back = from_increment_density(spec, to_increment_density(spec, f))
    assert_allclose(back.values, f.values, rtol=1e-12)
    ratio = np.abs(chi_at(spec, f.lambdas)) ** 2 / np.abs(beta_at(spec, f.lambdas)) ** 2
    assert_allclose(to_increment_density(spec, f).values[:, 0, 0], ratio * f.values[:, 0, 0].real)


def test_fractional_density():
    base = SpectralDensityGrid.constant(np.eye(1) / (2 * np.pi), 256)
    integer = IncrementSpec.from_lists([1], R=[1], D=[0.0])
    assert_allclose(fractional_density(integer, base).values, base.values)
    spec = IncrementSpec.from_lists([1], R=[0], D=[0.3])
    lam = base.lambdas
    out = fractional_density(spec, base).values[:, 0, 0].real
    assert_allclose(out, np.abs(1 - np.exp(1j * lam)) ** (-0.6) / (2 * np.pi), rtol=1e-12)
    near = np.argsort(np.abs(lam))[:2]
    assert np.all(out[near] > 10 * out[len(lam) // 4])
    with pytest.raises(InputError):
        fractional_density(spec, SpectralDensityGrid.zeros(1, 256))


def test_minimality_examples():
    zero = SpectralDensityGrid.zeros(1, 1024)
    one = SpectralDensityGrid.from_function(lambda lam: np.ones((len(lam), 1, 1)), 1024)
    assert not check_minimality(zero, one, SPEC1, ridge=0.0).finite
    f = SpectralDensityGrid.from_function(lambda lam: (np.abs(1 - np.exp(-1j * lam)) ** -2)[:, None, None], 1024)
    rep = check_minimality(f, one, SPEC1)
    assert rep.finite
    rep3 = check_minimality(f.scaled(3.0), one.scaled(3.0), SPEC1)
    assert_allclose(rep3.value, rep.value / 3.0, rtol=1e-12)


def test_hermitian_inverse(rng):
    p = random_density(rng, 16, 3).values
    assert_allclose(hermitian_inverse(p) @ p, np.broadcast_to(np.eye(3), p.shape), atol=1e-10)
    with pytest.raises(NumericalError):
        hermitian_inverse(np.zeros((4, 2, 2)))


def test_structural_cov(rng):
    f = SpectralDensityGrid.from_function(lambda lam: (np.abs(1 - np.exp(-1j * lam)) ** -2 / (2 * np.pi)
                                                       * np.abs(lam) ** 2)[:, None, None], 2048)
    D = structural_cov(SPEC1, f, np.arange(-3, 4))
    assert_allclose(D[:, 0, 0], np.eye(1, 7, 3)[0], atol=1e-12)
    spec2 = IncrementSpec.from_lists([1], period=2)
    fr = random_density(rng, 256, 2)
    assert_allclose(structural_cov(spec2, fr, -4, [2], [1]), np.conj(structural_cov(spec2, fr, 4, [1], [2])).T,
                    atol=1e-12)
    assert_allclose(structural_cov(spec2, SpectralDensityGrid.zeros(2, 64), 2), 0.0)


def test_density_from_psarima():
    white = PSARIMAModel(ar=[[1.0]], ma=[[1.0]], sigma2=[2.0])
    assert_allclose(density_from_psarima(white, 64).values, 2.0 / (2 * np.pi))
    phi, theta, s2 = 0.6, 0.4, 1.5
    arma = PSARIMAModel(ar=[[1.0, -phi]], ma=[[1.0, theta]], sigma2=[s2])
    d = density_from_psarima(arma, 256)
    z = np.exp(-1j * d.lambdas)
    assert_allclose(d.values[:, 0, 0], s2 * np.abs(1 + theta * z) ** 2 / (2 * np.pi * np.abs(1 - phi * z) ** 2))
    r0 = quad(lambda x: s2 * abs(1 + theta * np.exp(-1j * x)) ** 2 / (2 * np.pi * abs(1 - phi * np.exp(-1j * x)) ** 2),
              -np.pi, np.pi)[0]
    assert_allclose(d.integral()[0, 0].real, r0, rtol=1e-10)
    periodic = PSARIMAModel(ar=[[1.0, -0.5], [1.0, 0.3, -0.2]], ma=[[1.0, 0.4], [1.0]], sigma2=[1.0, 2.0])
    v = density_from_psarima(periodic, 128).values
    assert_allclose(v, np.conj(np.swapaxes(v, 1, 2)), atol=1e-14)
    assert np.min(np.linalg.eigvalsh(v)) > 0
