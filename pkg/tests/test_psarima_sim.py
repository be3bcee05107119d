import numpy as np
import pytest
from numpy.testing import assert_allclose

from gmfilter.errors import InputError, NumericalError
from gmfilter.filtering import solve_filter
from gmfilter.increments import IncrementSpec, apply_increment
from gmfilter.psarima import PSARIMAModel, check_ar_invertible
from gmfilter.simulate import SimConfig, frame_mean_drift, monte_carlo_mse, simulate_from_density, simulate_psarima
from gmfilter.spectral import SpectralDensityGrid, density_from_psarima, from_increment_density, structural_cov

SPEC2 = IncrementSpec.from_lists([1], period=2)
MODEL2 = PSARIMAModel(ar=[[1.0, -0.5], [1.0, 0.3, -0.2]], ma=[[1.0, 0.4], [1.0]], sigma2=[1.0, 2.0],
                      integration=SPEC2)


def batch_stderr(prod, batches=40):
    b = len(prod) // batches
    means = prod[: b * batches].reshape(batches, b, *prod.shape[1:]).mean(axis=1)
    return means.std(axis=0, ddof=1) / np.sqrt(batches)


def test_model_validation():
    with pytest.raises(InputError):
        PSARIMAModel(ar=[[1.0]], ma=[[1.0], [1.0]], sigma2=[1.0])
    with pytest.raises(NumericalError):
        check_ar_invertible(PSARIMAModel(ar=[[1.0, -1.2]], ma=[[1.0]], sigma2=[1.0]))
    m = PSARIMAModel.from_dict(MODEL2.to_dict())
    assert m.T == 2


def test_simulate_white_noise():
    cfg = SimConfig(PSARIMAModel(ar=[[1.0]], ma=[[1.0]], sigma2=[4.0]), length=20000, seed=7)
    x = simulate_psarima(cfg)
    assert_allclose(x.var(), 4.0, rtol=0.05)
    assert abs(np.mean(x[1:] * x[:-1])) < 3 * 4.0 / np.sqrt(len(x))
    assert_allclose(simulate_psarima(cfg), x)


def test_psarima_increments_match_structural_cov():
    x = simulate_psarima(SimConfig(MODEL2, length=2 * 10_000, seed=3))
    inc = apply_increment(x.reshape(-1, 2), SPEC2)
    f = from_increment_density(SPEC2, density_from_psarima(MODEL2, 4096, "forward"))
    for lag in range(4):
        prod = inc[lag:, :, None] * inc[: len(inc) - lag, None, :]
        sample = prod.mean(axis=0)
        assert np.all(np.abs(sample - structural_cov(SPEC2, f, lag).real) <= 3 * batch_stderr(prod) + 1e-12)
    assert frame_mean_drift(inc) < 3.0


def test_simulate_from_density_white():
    f = SpectralDensityGrid.constant(np.eye(2) / (2 * np.pi), 256)
    x = simulate_from_density(f, 200, seed=1, count=100)
    frames = x.reshape(-1, 2)
    assert_allclose(frames.T @ frames / len(frames), np.eye(2), atol=0.05)
    assert_allclose(simulate_from_density(f, 50, seed=4).frames, simulate_from_density(f, 50, seed=4).frames)


def test_simulate_from_density_autocov():
    f = density_from_psarima(PSARIMAModel(ar=[[1.0, -0.6]], ma=[[1.0, 0.3]], sigma2=[1.0]), 512)
    x = simulate_from_density(f, 100, seed=2, count=4000)[:, :, 0]
    R = f.covariance(np.arange(11))[:, 0, 0].real
    for lag in range(11):
        prod = x[:, 50 + lag] * x[:, 50]
        assert abs(prod.mean() - R[lag]) <= 3 * prod.std(ddof=1) / np.sqrt(len(prod))


def test_monte_carlo_zero_noise_and_scaling(toy):
    spec, f, g, a = toy
    zero = SpectralDensityGrid.zeros(1, f.M)
    sol = solve_filter(f, g.scaled(1e-30), a, spec)
    mc0 = monte_carlo_mse(sol, f, zero, replications=200)
    assert mc0.mse < 1e-20
    sol = solve_filter(f, g, a, spec)
    small = monte_carlo_mse(sol, f, g, replications=1000, seed=1)
    large = monte_carlo_mse(sol, f, g, replications=4000, seed=2)
    assert_allclose(small.stderr / large.stderr, 2.0, rtol=0.25)
    assert abs(large.z_score) < 3.0 and large.orthogonality_ok
    assert monte_carlo_mse(sol, f, g, replications=1500, seed=5).mse == monte_carlo_mse(sol, f, g, 1500, seed=5).mse
