"""Localizing the pseudospectra of a general matrix through a low-rank surrogate.

If ``||A - U V^*|| <= s`` then every z with ``sigma_min(zI - A) <= eps`` also has
``mu_{U,V}(z) <= s + eps``, so the cheap reduced evaluation gives an outer
set.  The surrogate comes from a truncated SVD (``s`` known exactly) or from
a Gaussian rangefinder (``s`` known with a stated probability).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from .errors import ConvergenceError, PreconditionError
from .lowrank import LowRankFactors, mu, mu_many

BLOCK = 32
COLLAPSE_TOL = 1e-12
RESIDUAL_FLOOR = 1e-10


@dataclass(frozen=True)
class TruncatedSvd:
    u_l: np.ndarray
    sigma_l: np.ndarray
    v_l: np.ndarray
    tail_norm: float

    @property
    def l(self) -> int:
        return self.sigma_l.size

    def factors(self) -> LowRankFactors:
        return LowRankFactors(self.u_l, self.v_l * self.sigma_l)


@dataclass(frozen=True)
class LocalizationSet:
    """Outer set ``{z : mu_factors(z) <= inflation + eps}``."""

    factors: LowRankFactors
    inflation: float
    confidence: float = 1.0
    info: dict = field(default_factory=dict)


def truncate_svd(a, l: int) -> TruncatedSvd:
    a = np.asarray(a, dtype=complex)
    d = min(a.shape)
    if not 1 <= l < d:
        raise PreconditionError(f"need 1 <= l < {d}, got l={l}")
    try:
        u, s, vh = np.linalg.svd(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"SVD failed: {exc}") from exc
    return TruncatedSvd(u[:, :l], s[:l], vh[:l].conj().T, float(s[l]))


def localization_from_truncation(ts: TruncatedSvd) -> LocalizationSet:
    return LocalizationSet(ts.factors(), ts.tail_norm, 1.0, {"mode": "truncated", "l": ts.l})


def contains(loc: LocalizationSet, z: complex, epsilon: float) -> bool:
    return bool(mu(loc.factors, z) <= loc.inflation + epsilon)


def contains_many(loc: LocalizationSet, zs, epsilon: float) -> np.ndarray:
    return mu_many(loc.factors, zs) <= loc.inflation + epsilon


def membership_via_qep(ts: TruncatedSvd, z: complex, epsilon: float) -> bool:
    """Same predicate as :func:`contains`, through the r x r quadratic problem.

    With orthonormal ``U_l`` and ``V = V_l Sigma_l`` the test reads
    ``min(lambda_min, 0) <= (sigma_{l+1} + eps)^2 - |z|^2``.
    """
    z = complex(z)
    r = ts.l
    v = ts.v_l * ts.sigma_l
    uv = ts.u_l.conj().T @ v
    vu = uv.conj().T
    vv = v.conj().T @ v
    a2 = abs(z) ** 2
    c1 = z * uv + np.conj(z) * vu - vv
    c0 = a2 * (vu @ uv - vv)
    companion = np.block([[np.zeros((r, r)), np.eye(r)], [-c0, -c1]])
    try:
        lam = np.linalg.eigvals(companion).real.min()
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"quadratic eigensolve failed at z={z!r}: {exc}") from exc
    lhs = np.sqrt(max(min(lam, 0.0) + a2, 0.0))
    return bool(lhs <= ts.tail_norm + epsilon)


def as_operator(a) -> LinearOperator:
    """Wrap a dense array (or anything scipy understands) as a LinearOperator."""
    if isinstance(a, LinearOperator):
        return a
    return aslinearoperator(np.asarray(a) if not hasattr(a, "matvec") else a)


def check_adjoint(op: LinearOperator, seed=0, probes: int = 3) -> float:
    """Relative mismatch of ``<A w, y>`` and ``<w, A^* y>`` on random probes."""
    rng = np.random.default_rng(seed)
    m, n = op.shape
    w = rng.standard_normal((n, probes)) + 1j * rng.standard_normal((n, probes))
    y = rng.standard_normal((m, probes)) + 1j * rng.standard_normal((m, probes))
    lhs = np.sum(np.conj(y) * op.matmat(w), axis=0)
    rhs = np.sum(np.conj(op.rmatmat(y)) * w, axis=0)
    return float(np.max(np.abs(lhs - rhs) / (np.abs(lhs) + np.abs(rhs) + 1e-300)))


def _apply_blocked(f, x: np.ndarray, block: int = BLOCK) -> np.ndarray:
    cols = [f(x[:, j:j + block]) for j in range(0, x.shape[1], block)]
    return np.hstack(cols)


def _power_norm(apply, apply_adj, n: int, rng, iters: int) -> float:
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        y = apply(x)
        est = float(np.linalg.norm(y))
        if est == 0.0:
            return 0.0
        x = apply_adj(y)
        x /= np.linalg.norm(x)
    return float(np.linalg.norm(apply(x)))


def _rangefinder_once(op: LinearOperator, k: int, rng, power_iters: int):
    m, n = op.shape
    omega = rng.standard_normal((n, k))
    y = _apply_blocked(op.matmat, omega)
    q, r = np.linalg.qr(y)
    diag = np.abs(np.diag(r))
    collapsed = bool(diag.min() <= COLLAPSE_TOL * max(diag.max(), 1e-300))

    def resid(x):
        ax = op.matvec(x)
        return ax - q @ (q.conj().T @ ax)

    def resid_adj(y_):
        return op.rmatvec(y_ - q @ (q.conj().T @ y_))

    est = _power_norm(resid, resid_adj, n, rng, power_iters)
    norm_a = _power_norm(op.matvec, op.rmatvec, n, rng, power_iters)
    return q, est, norm_a, collapsed


def gaussian_rangefinder(op, k: int, seed=None, power_iters: int = 5) -> tuple[np.ndarray, float]:
    """Orthonormal ``Q`` (d x k) from a Gaussian sketch, and an estimate of ``||(I - QQ^*) A||``.

    The estimate comes from ``power_iters`` power iterations on the residual
    operator, so it is itself random (and a lower bound in expectation).
    Rank collapse is tolerated when the range has been captured; otherwise the
    sketch is redrawn once from a child seed before giving up.
    """
    op = as_operator(op)
    m, n = op.shape
    if not 1 <= k < min(m, n):
        raise PreconditionError(f"need 1 <= k < d, got k={k}")
    ss = np.random.SeedSequence(seed)
    for child in [ss] + ss.spawn(1):
        rng = np.random.default_rng(child)
        q, est, norm_a, collapsed = _rangefinder_once(op, k, rng, power_iters)
        if not collapsed or est <= RESIDUAL_FLOOR * max(norm_a, 1e-300):
            return q, est
    raise ConvergenceError("Gaussian sketch lost rank twice; try a smaller k")


def gaussian_alpha(sigmas_tail, l: int, k: int, delta: float) -> float:
    """Markov-type bound on ``||(I - QQ^*) A||`` for a Gaussian sketch with k columns.

    ``sigmas_tail`` holds ``sigma_{l+1}, sigma_{l+2}, ...`` in descending order.
    """
    if not l < k - 1:
        raise PreconditionError(f"need l < k - 1, got l={l}, k={k}")
    if not 0.0 < delta <= 1.0:
        raise PreconditionError("delta must lie in (0, 1]")
    tail = np.asarray(sigmas_tail, dtype=float)
    if tail.size == 0:
        return 0.0
    first = (1.0 + np.sqrt(l / (k - l - 1))) * tail[0]
    rest = np.e * np.sqrt(k) / (k - l) * np.sqrt(np.sum(tail**2))
    return float((first + rest) / delta)


def srtt_alpha(sigma_l1: float, d: int, k: int) -> float:
    """Error constant for subsampled randomized trigonometric sketches (fails with probability O(1/l))."""
    if not 1 <= k <= d:
        raise PreconditionError("need 1 <= k <= d")
    return float((1.0 + 3.0 * np.sqrt(d / k)) * sigma_l1)


def srtt_confidence(l: int, c: float = 1.0) -> float:
    """``1 - c/l``; ``c`` is an order constant, not a certified value."""
    return float(max(0.0, 1.0 - c / l))


def randomized_localization(
    op, l: int, k: int, delta: float, seed=None, mode: str = "estimated", power_iters: int = 5
) -> LocalizationSet:
    """Outer set from a Gaussian rangefinder, valid with probability at least ``1 - delta``.

    ``mode="estimated"`` bounds the sketch residual by the larger of
    :func:`gaussian_alpha` on the computed singular values of ``Q^*A`` and the
    power-iteration residual estimate.  ``mode="certified"`` needs a dense
    matrix and uses its true singular values in :func:`gaussian_alpha`.
    """
    if mode not in ("estimated", "certified"):
        raise PreconditionError(f"unknown mode {mode!r}")
    dense = None if isinstance(op, LinearOperator) else np.asarray(op)
    op = as_operator(op)
    m, n = op.shape
    if not l < k < min(m, n):
        raise PreconditionError(f"need l < k < d, got l={l}, k={k}")
    q, resid_est = gaussian_rangefinder(op, k, seed, power_iters)
    b = _apply_blocked(op.rmatmat, q).conj().T  # Q^* A
    uh, sh, vh = np.linalg.svd(b, full_matrices=False)
    factors = LowRankFactors(q @ uh[:, :l], vh[:l].conj().T * sh[:l])
    s_next = float(sh[l]) if sh.size > l else 0.0
    if mode == "certified":
        if dense is None:
            raise PreconditionError("certified mode needs a dense matrix")
        tail = np.linalg.svd(dense, compute_uv=False)[l:]
        alpha = gaussian_alpha(tail, l, k, delta)
    else:
        alpha = max(gaussian_alpha(sh[l:], l, k, delta), resid_est)
    return LocalizationSet(
        factors, s_next + alpha, 1.0 - delta,
        {"mode": f"randomized-{mode}", "l": l, "k": k, "sigma_next": s_next,
         "alpha": alpha, "residual_estimate": resid_est},
    )


def perturbation_inclusion(epsilon: float, gap_norm: float) -> float:
    """Level at which the pseudospectrum of B contains the eps-pseudospectrum of A."""
    if epsilon < 0 or gap_norm < 0:
        raise PreconditionError("epsilon and gap must be nonnegative")
    return float(epsilon + gap_norm)


def kreiss_perturbation_bound(kappa_a: float, delta_a: float, gap_norm: float) -> float:
    """Relative bound ``|kappa(A) - kappa(B)| <= kappa(A) * gap / (delta(A) - gap)``."""
    if gap_norm < 0 or kappa_a < 1.0:
        raise PreconditionError("need gap >= 0 and kappa(A) >= 1")
    if gap_norm >= delta_a:
        raise PreconditionError("bound inapplicable: ||A - B|| must be below the distance to instability")
    return float(gap_norm / (delta_a - gap_norm))
