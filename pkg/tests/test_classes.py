import numpy as np
import pytest
from numpy.testing import assert_allclose

from gmfilter.classes import KINDS, DensityClass, check_pair, compile_class
from gmfilter.errors import InputError, UnsupportedError
from gmfilter.increments import IncrementSpec, increment_ratio
from gmfilter.spectral import SpectralDensityGrid, midpoint_grid

M = 64


def base_density(T):
    lam = midpoint_grid(M)
    G = np.zeros((M, T, T), dtype=complex)
    for t in range(T):
        G[:, t, t] = (1.0 + 0.5 * np.cos(lam + t)) / (2 * np.pi)
    if T > 1:
        G[:, 0, 1] = 0.1 * np.exp(1j * lam) / (2 * np.pi)
        G[:, 1, 0] = np.conj(G[:, 0, 1])
    return SpectralDensityGrid(G)


def make_class(kind, T):
    spec = IncrementSpec.from_lists([1], period=T)
    ratio = increment_ratio(spec, midpoint_grid(M))
    G = base_density(T)
    Gv = np.asarray(G.values)
    B = np.eye(T) + (0.3 * (np.ones((T, T)) - np.eye(T)))
    fam = kind.split("_")[0]
    w = ratio if fam == "D0" else np.ones(M)
    mean = np.mean(w[:, None, None] * Gv, axis=0)
    tr = float(np.real(np.trace(mean)))
    diag = np.real(np.diag(mean)).tolist()
    trB = float(np.real(np.trace(B @ mean)))
    params = {
        "D0_1": {"P": mean}, "D0_2": {"p": tr}, "D0_3": {"p_k": diag}, "D0_4": {"B1": B, "p": trB},
        "DVU_1": {"Q": mean}, "DVU_2": {"q": tr}, "DVU_3": {"q_k": diag}, "DVU_4": {"B2": B, "q": trB},
        "Deps_1": {"q": tr}, "Deps_2": {"q_k": diag}, "Deps_3": {"B2": B, "q": trB}, "Deps_4": {"Q": mean},
    }[kind]
    if fam == "DVU":
        params.update(V=G.scaled(0.5), U=G.scaled(2.0))
    if fam == "Deps":
        params.update(eps=0.25, g1=G)
    cls = DensityClass(kind, params)
    return cls, compile_class(cls, T, M, ratio), Gv


def frob(a, b):
    return float(np.real(np.einsum("mij,mji->", a, b)))


def random_psd(rng, T, scale):
    Z = rng.standard_normal((M, T, T)) + 1j * rng.standard_normal((M, T, T))
    return scale * np.einsum("mij,mkj->mik", Z, np.conj(Z))


@pytest.mark.parametrize("T", [1, 2])
@pytest.mark.parametrize("kind", KINDS)
def test_projection(kind, T):
    rng = np.random.default_rng(hash(kind) % 1000 + T)
    cls, cc, Gv = make_class(kind, T)
    assert cc.contains(Gv)
    assert_allclose(cc.project(Gv), Gv, atol=1e-9)
    Y = random_psd(rng, T, 0.3) - 0.05 * random_psd(rng, T, 1.0)
    X = cc.project(Y)
    assert cc.contains(X)
    assert_allclose(cc.project(X), X, atol=1e-8)
    # variational inequality of the Euclidean projection
    scale = np.sum(np.abs(Y - X) ** 2) ** 0.5
    for smooth in (True, False):
        Z = cc.sample(rng, smooth)
        assert cc.contains(Z)
        assert frob(Y - X, Z - X) <= 1e-6 * scale * np.sum(np.abs(Z - X) ** 2) ** 0.5 + 1e-12


@pytest.mark.parametrize("T", [1, 2])
@pytest.mark.parametrize("kind", KINDS)
def test_lmo_is_maximal(kind, T):
    rng = np.random.default_rng(7)
    cls, cc, Gv = make_class(kind, T)
    grad = random_psd(rng, T, 1.0)
    S = cc.lmo(grad)
    if S is None:
        pytest.skip("no linear oracle for this class")
    assert cc.contains(S, tol=1e-6)
    best = frob(grad, S)
    for i in range(10):
        assert frob(grad, cc.sample(rng, i % 2 == 0)) <= best + 1e-9 * abs(best)


def test_contamination_zero_forces_g1():
    rng = np.random.default_rng(3)
    cls, _, Gv = make_class("Deps_4", 2)
    cc = compile_class(DensityClass("Deps_4", {**cls.params, "eps": 0.0}), 2, M, np.ones(M))
    assert_allclose(cc.project(random_psd(rng, 2, 1.0)), Gv, atol=1e-8)


def test_d0_moment_attained():
    cls, cc, Gv = make_class("D0_2", 1)
    X = cc.project(3.0 * Gv)
    assert_allclose(cc.moments(X), cc.b, rtol=1e-10)


def test_validation():
    with pytest.raises(InputError):
        DensityClass("D0_9", {})
    with pytest.raises(InputError):
        DensityClass("DVU_2", {"q": 1.0})
    G = base_density(1)
    with pytest.raises(InputError):
        DensityClass("Deps_1", {"eps": 1.0, "g1": G, "q": 1.0})
    with pytest.raises(InputError):
        compile_class(DensityClass("DVU_2", {"V": G.scaled(2.0), "U": G, "q": 1.0}), 1, M, np.ones(M))
    with pytest.raises(InputError):  # moment outside the band range
        compile_class(DensityClass("DVU_2", {"V": G.scaled(0.5), "U": G.scaled(2.0), "q": 100.0}), 1, M, np.ones(M))
    with pytest.raises(InputError):
        compile_class(DensityClass("DVU_2", {"V": base_density(2), "U": base_density(2), "q": 1.0}), 1, M, np.ones(M))


def test_pairs():
    G = base_density(1)
    f2 = DensityClass("D0_2", {"p": 1.0})
    g2 = DensityClass("DVU_2", {"V": G, "U": G, "q": 1.0})
    check_pair(f2, g2)
    with pytest.raises(UnsupportedError):
        check_pair(DensityClass("D0_1", {"P": np.eye(1)}), g2)
    with pytest.raises(UnsupportedError):
        check_pair(g2, f2)
    with pytest.raises(UnsupportedError):
        check_pair(None, f2)
