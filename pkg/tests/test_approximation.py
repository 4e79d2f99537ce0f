import numpy as np
import pytest

from lowps import PreconditionError
from lowps.approximation import (
    as_operator,
    check_adjoint,
    contains,
    contains_many,
    gaussian_alpha,
    gaussian_rangefinder,
    kreiss_perturbation_bound,
    localization_from_truncation,
    membership_via_qep,
    perturbation_inclusion,
    randomized_localization,
    srtt_alpha,
    truncate_svd,
)
from lowps.oracle import dense_sigma_min_many


def _decaying(d, rng, rate=0.5):
    q1, _ = np.linalg.qr(rng.standard_normal((d, d)))
    q2, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return q1 @ np.diag(rate ** np.arange(d)) @ q2.T


def test_truncate_diag():
    ts = truncate_svd(np.diag([3.0, 2.0, 1.0]), 2)
    assert ts.tail_norm == pytest.approx(1.0)
    loc = localization_from_truncation(ts)
    assert loc.inflation == pytest.approx(1.0)
    assert membership_via_qep(ts, 3.0, 0.0)
    assert contains(loc, 3.0, 0.0)


def test_truncate_norm(rng):
    a = rng.standard_normal((100, 100))
    ts = truncate_svd(a, 10)
    s = np.linalg.svd(a, compute_uv=False)
    assert abs(np.linalg.norm(a - ts.factors().dense(), 2) - s[10]) < 1e-10 * s[0]


def test_rank_l_exact(rng):
    a = rng.standard_normal((40, 3)) @ rng.standard_normal((3, 40)) / 40
    ts = truncate_svd(a, 3)
    assert ts.tail_norm < 1e-12
    zs = rng.uniform(-1, 1, 200) + 1j * rng.uniform(-1, 1, 200)
    loc = localization_from_truncation(ts)
    mask = contains_many(loc, zs, 0.1)
    dense = dense_sigma_min_many(a, zs) <= 0.1
    assert np.array_equal(mask, dense)


def test_far_point_excluded(rng):
    a = rng.standard_normal((30, 30)) / 30
    loc = localization_from_truncation(truncate_svd(a, 4))
    far = np.linalg.norm(a, 2) + 0.1 + loc.inflation + 1
    assert not contains(loc, far, 0.1)


def test_qep_membership_agrees(rng):
    a = _decaying(50, rng, 0.7)
    ts = truncate_svd(a, 5)
    loc = localization_from_truncation(ts)
    zs = rng.uniform(-1.5, 1.5, 300) + 1j * rng.uniform(-1.5, 1.5, 300)
    for z in zs:
        assert contains(loc, z, 0.05) == membership_via_qep(ts, z, 0.05)


def test_truncate_bad_rank():
    with pytest.raises(PreconditionError):
        truncate_svd(np.eye(3), 3)


def test_adjoint_check(rng):
    assert check_adjoint(as_operator(rng.standard_normal((20, 20)))) < 1e-12


def test_rangefinder_exact_rank(rng):
    a = rng.standard_normal((60, 4)) @ rng.standard_normal((4, 60))
    q, est = gaussian_rangefinder(a, 6, seed=1)
    assert est <= 1e-10 * np.linalg.norm(a, 2)
    assert np.allclose(q.conj().T @ q, np.eye(6), atol=1e-12)


def test_rangefinder_identity():
    _, est = gaussian_rangefinder(np.eye(50), 10, seed=2)
    assert abs(est - 1) < 1e-8


def test_rangefinder_residual_estimate(rng):
    a = _decaying(80, rng)
    q, est = gaussian_rangefinder(a, 8, seed=3)
    true = np.linalg.norm(a - q @ (q.conj().T @ a), 2)
    assert true / 10 <= est <= 10 * true


def test_alpha_constants():
    assert gaussian_alpha([], 2, 6, 0.2) == 0.0
    want = (1 + np.sqrt(2 / 3)) + np.e * np.sqrt(6) / 4
    assert gaussian_alpha([1.0], 2, 6, 1.0) == pytest.approx(want, rel=1e-14)
    assert gaussian_alpha([1.0], 2, 6, 1.0) == pytest.approx(3.4810, abs=1e-4)
    assert srtt_alpha(0.0, 100, 25) == 0.0
    assert srtt_alpha(1.0, 50, 50) == pytest.approx(4.0)
    assert srtt_alpha(0.5, 100, 25) == pytest.approx(3.5)
    with pytest.raises(PreconditionError):
        gaussian_alpha([1.0], 5, 6, 0.5)


def test_randomized_exact_rank(rng):
    a = rng.standard_normal((60, 3)) @ rng.standard_normal((3, 60))
    loc = randomized_localization(a, 3, 6, 0.2, seed=4)
    assert loc.info["sigma_next"] < 1e-8 * np.linalg.norm(a, 2)
    assert loc.inflation < 1e-8 * np.linalg.norm(a, 2)
    assert loc.confidence == pytest.approx(0.8)


def test_randomized_deterministic(rng):
    a = _decaying(50, rng)
    one = randomized_localization(a, 4, 8, 0.2, seed=11)
    two = randomized_localization(a, 4, 8, 0.2, seed=11)
    assert np.array_equal(one.factors.u, two.factors.u)
    assert np.array_equal(one.factors.v, two.factors.v)
    assert one.inflation == two.inflation


def test_randomized_contains_pseudospectrum(rng):
    a = _decaying(60, rng, 0.8)
    zs = rng.uniform(-1, 1, 400) + 1j * rng.uniform(-1, 1, 400)
    inside = dense_sigma_min_many(a, zs) <= 0.1
    for mode in ("estimated", "certified"):
        loc = randomized_localization(a, 5, 10, 0.2, seed=5, mode=mode)
        assert np.all(contains_many(loc, zs[inside], 0.1))


def test_perturbation_helpers():
    assert perturbation_inclusion(0.1, 0.05) == pytest.approx(0.15)
    assert perturbation_inclusion(0.1, 0.0) == 0.1
    assert kreiss_perturbation_bound(2.0, 0.5, 0.0) == 0.0
    assert kreiss_perturbation_bound(2.0, 0.5, 0.25) == pytest.approx(1.0)
    with pytest.raises(PreconditionError):
        kreiss_perturbation_bound(2.0, 0.5, 0.5)
