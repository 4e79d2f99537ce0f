import numpy as np
import pytest

from lowps import (
    DerivativeUndefinedError,
    LowRankFactors,
    NotStableError,
    PreconditionError,
    build_reduced,
    dmu_domega,
    dmu_dphi,
    mu,
    mu_many,
    mu_via_gep,
    mu_via_qep,
    power_norms,
    transient_constants,
)
from lowps.oracle import dense_power_norms, dense_sigma_min

from conftest import gaussian_factors, normal_factors, rank_one


def test_reduced_matrix_hand_example():
    e1 = np.eye(3)[:, :1]
    m = build_reduced(LowRankFactors(e1, e1), 2).m
    np.testing.assert_allclose(m, [[2, 2], [1, 3]], atol=1e-14)


def test_reduced_matrix_at_origin(rng):
    f = gaussian_factors(20, 3, rng)
    red = build_reduced(f, 0)
    assert np.abs(red.m[:3]).max() == 0
    assert abs(np.min(red.eigenvalues().real)) < 1e-12


def test_reduced_spectrum_is_real(rng):
    f = gaussian_factors(100, 5, rng)
    lam = build_reduced(f, 0.3 + 0.4j).eigenvalues()
    assert np.all(np.abs(lam.imag) <= 1e-10 * np.abs(lam).max())
    a = f.dense()
    z = 0.3 + 0.4j
    h = a.conj().T @ a - np.conj(z) * a - z * a.conj().T
    smallest = np.linalg.eigvalsh(h)[0]
    assert abs(min(np.min(lam.real) - abs(z) ** 2, 0) - min(smallest, 0)) < 1e-10


def test_mu_zero_matrix():
    f = LowRankFactors(np.eye(4)[:, :1], np.zeros((4, 1)))
    for z in [0, 1j, -2 + 0.5j]:
        assert abs(mu(f, z) - abs(z)) < 1e-14


def test_mu_rank_one_closed_form():
    f = rank_one()
    assert abs(mu(f, 1) - 0.5) < 1e-14
    for z in [0.1, 0.5 + 0.2j, 2j, -1]:
        assert abs(mu(f, z) - min(abs(z - 0.5), abs(z))) < 1e-12


def test_mu_matches_dense(rng):
    f = gaussian_factors(200, 8, rng)
    zs = rng.uniform(-2, 2, 50) + 1j * rng.uniform(-2, 2, 50)
    got = mu_many(f, zs)
    want = [dense_sigma_min(f.dense(), z) for z in zs]
    np.testing.assert_allclose(got, want, rtol=1e-8, atol=1e-12)


def test_routes_agree(rng):
    f = gaussian_factors(100, 5, rng)
    fo = f.orthonormalized()
    np.testing.assert_allclose(fo.dense(), f.dense(), atol=1e-13)
    for z in [0.2 + 0.1j, -0.7j, 1.3]:
        ref = mu(f, z)
        assert abs(mu_via_gep(f, z) - ref) <= 1e-9 * ref
        assert abs(mu_via_qep(fo, z) - ref) <= 1e-9 * ref
    half = rank_one().orthonormalized()
    assert abs(mu_via_qep(half, 1) - 0.5) < 1e-12
    assert mu_via_qep(f.orthonormalized(), 0) < 1e-7


def test_qep_requires_orthonormal_u(rng):
    with pytest.raises(PreconditionError):
        mu_via_qep(gaussian_factors(10, 2, rng), 0.5)


def test_unitary_invariance(rng):
    f = gaussian_factors(30, 3, rng)
    q, _ = np.linalg.qr(rng.standard_normal((30, 30)) + 1j * rng.standard_normal((30, 30)))
    g = LowRankFactors(q @ f.u, q @ f.v)
    assert abs(mu(f, 0.4 - 0.2j) - mu(g, 0.4 - 0.2j)) < 1e-12


def test_invalid_factors():
    with pytest.raises(PreconditionError):
        LowRankFactors(np.ones((3, 3)), np.ones((3, 3)))
    with pytest.raises(PreconditionError):
        LowRankFactors(np.full((4, 1), np.nan), np.ones((4, 1)))
    with pytest.raises(PreconditionError):
        LowRankFactors(np.ones((4, 1)), np.ones((5, 1)))


def test_dphi_rank_one():
    f = rank_one()
    phi = 0.3
    # |e^{i phi} - 0.5|^2 = 1.25 - cos(phi)
    want = np.sin(phi) / (2 * np.sqrt(1.25 - np.cos(phi)))
    assert abs(dmu_dphi(f, 1.0, phi) - want) < 1e-10


def test_dphi_finite_difference(rng):
    f = gaussian_factors(100, 5, rng)
    h = 1e-5
    fd = (mu(f, np.exp(1j * (1 + h))) - mu(f, np.exp(1j * (1 - h)))) / (2 * h)
    got = dmu_dphi(f, 1.0, 1.0)
    assert abs(got - fd) <= 1e-5 * abs(fd)


def test_domega_finite_difference(rng):
    f = gaussian_factors(60, 4, rng)
    a, w, h = 0.3, 0.7, 1e-5
    fd = (mu(f, a + 1j * (w + h)) - mu(f, a + 1j * (w - h))) / (2 * h)
    assert abs(dmu_domega(f, a, w) - fd) <= 1e-5 * abs(fd)


def test_domega_symmetric_instance(rng):
    f = gaussian_factors(40, 3, rng, complex_=False)
    assert abs(dmu_domega(f, 0.2, 0.0)) < 1e-10


def test_derivative_tie_is_rejected():
    # at phi = pi both branches of min(|z - 0.5|, |z|) equal 1 ... only one is an eigenvalue of M,
    # but a double eigenvalue appears for the zero matrix with r = 2 at any point
    f = LowRankFactors(np.eye(5)[:, :2], np.zeros((5, 2)))
    with pytest.raises(DerivativeUndefinedError):
        dmu_dphi(f, 1.0, 0.4)


def test_power_norms_rank_one():
    np.testing.assert_allclose(power_norms(rank_one(), 8), 0.5 ** np.arange(1, 9), rtol=1e-13)


def test_power_norms_normal(rng):
    f = normal_factors(30, [0.9, 0.9, 0.9], rng)
    np.testing.assert_allclose(power_norms(f, 10), 0.9 ** np.arange(1, 11), rtol=1e-12)


def test_power_norms_dense(rng):
    f = gaussian_factors(100, 5, rng)
    np.testing.assert_allclose(power_norms(f, 20), dense_power_norms(f.dense(), 20), rtol=1e-10)


def test_transient_constants():
    tc = transient_constants(rank_one())
    assert abs(tc.p - 1) < 1e-14
    assert abs(tc.s - 2) < 1e-10


def test_transient_constants_nonnormal():
    u = np.eye(6)[:, :2]
    core = np.array([[0.5, 4.0], [0.0, 0.5]])
    f = LowRankFactors(u, u @ core.conj().T)
    tc = transient_constants(f)
    assert tc.p >= 1 and tc.p >= tc.norms.max() - 1e-12 and tc.s >= tc.p


def test_transient_constants_unstable():
    with pytest.raises(NotStableError):
        transient_constants(rank_one(1.2))
