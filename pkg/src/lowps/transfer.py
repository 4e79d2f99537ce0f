"""Pseudospectra of transfer operators learned from a single trajectory.

The estimator is kernel reduced-rank regression with a Gaussian kernel.  Its
pseudospectrum, either in the RKHS or in L^2 of the invariant law, reduces
to the same 2r x 2r eigenproblem as :mod:`lowps.lowrank`; all that changes is
how the three r x r Gram blocks are assembled from the fitted coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
from scipy.linalg import expm, solve_continuous_lyapunov
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs
from scipy.spatial.distance import cdist, pdist

from .boundary import pseudospectral_radius
from .errors import ConvergenceError, NotStableError, PreconditionError
from .grid import GridSpec
from .lowrank import Gram, mu, mu_many

DENSE_FIT_MAX_N = 1500
NORMALIZATION_TOL = 1e-8


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray
    dt: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.states, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 3:
            raise PreconditionError("a trajectory needs at least 3 samples")
        if not np.isfinite(x).all():
            raise PreconditionError("trajectory contains NaN or Inf")
        object.__setattr__(self, "states", x)

    @property
    def n(self) -> int:
        return self.states.shape[0]


@dataclass(frozen=True)
class KernelConfig:
    """Gaussian kernel ``exp(-|x - y|^2 / (2 bandwidth^2))``; ``None`` means median heuristic."""

    bandwidth: float | None = None
    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind != "gaussian":
            raise PreconditionError(f"unsupported kernel {self.kind!r}")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise PreconditionError("bandwidth must be positive")

    def resolve(self, states: np.ndarray, seed=0, subsample: int = 1000) -> float:
        if self.bandwidth is not None:
            return float(self.bandwidth)
        return median_bandwidth(states, seed, subsample)


def median_bandwidth(states: np.ndarray, seed=0, subsample: int = 1000) -> float:
    x = np.asarray(states, dtype=float)
    if x.shape[0] > subsample:
        idx = np.random.default_rng(seed).choice(x.shape[0], subsample, replace=False)
        x = x[idx]
    med = float(np.median(pdist(x)))
    return med if med > 0 else 1.0


def simulate_logistic(n: int, noise_exponent: int = 20, seed=None, x0: float | None = None) -> Trajectory:
    """Noisy logistic map ``x <- (4 x (1 - x) + xi) mod 1``.

    ``xi`` has density proportional to ``cos(pi xi)^N`` on [-1/2, 1/2] and is
    drawn by rejection from the uniform law (the density peaks at 1).
    """
    N = int(noise_exponent)
    if N < 2 or N % 2:
        raise PreconditionError("noise exponent must be an even integer >= 2")
    if n < 3:
        raise PreconditionError("need n >= 3")
    rng = np.random.default_rng(seed)
    noise = logistic_noise(n - 1, N, rng)
    x = np.empty(n)
    x[0] = rng.uniform() if x0 is None else x0
    for t in range(n - 1):
        x[t + 1] = np.mod(4.0 * x[t] * (1.0 - x[t]) + noise[t], 1.0)
    return Trajectory(x[:, None], None, {"generator": "logistic", "N": N, "seed": seed})


def logistic_noise(size: int, N: int, rng) -> np.ndarray:
    out = np.empty(0)
    while out.size < size:
        m = max(2 * (size - out.size), 64) * max(1, int(np.sqrt(N)))
        xi = rng.uniform(-0.5, 0.5, m)
        keep = rng.uniform(size=m) <= np.cos(np.pi * xi) ** N
        out = np.concatenate([out, xi[keep]])
    return out[:size]


def ou_stationary_covariance(drift, sigma: float) -> np.ndarray:
    """Solution of ``A S + S A^T = -sigma^2 I``."""
    a = np.asarray(drift, dtype=float)
    return solve_continuous_lyapunov(a, -(sigma**2) * np.eye(a.shape[0]))


def ou_transition(drift, sigma: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact one-step map ``X' = Phi X + eta``, ``eta ~ N(0, Q)`` (Van Loan's block exponential)."""
    a = np.asarray(drift, dtype=float)
    k = a.shape[0]
    block = np.zeros((2 * k, 2 * k))
    block[:k, :k] = -a
    block[:k, k:] = sigma**2 * np.eye(k)
    block[k:, k:] = a.T
    g = expm(block * dt)
    phi = g[k:, k:].T
    q = phi @ g[:k, k:]
    return phi, (q + q.T) / 2.0


def simulate_ou(n: int, drift, sigma: float, dt: float = 0.1, seed=None) -> Trajectory:
    """``dX = A X dt + sigma dW`` sampled exactly every ``dt``, started from the stationary law."""
    a = np.asarray(drift, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise PreconditionError("drift must be square")
    if np.linalg.eigvals(a).real.max() >= 0:
        raise NotStableError("drift must have eigenvalues with negative real part")
    if not (sigma > 0 and dt > 0):
        raise PreconditionError("sigma and dt must be positive")
    rng = np.random.default_rng(seed)
    phi, q = ou_transition(a, sigma, dt)
    s_inf = ou_stationary_covariance(a, sigma)
    k = a.shape[0]
    x = np.empty((n, k))
    x[0] = rng.multivariate_normal(np.zeros(k), s_inf)
    chol = np.linalg.cholesky(q)
    eta = rng.standard_normal((n - 1, k)) @ chol.T
    for t in range(n - 1):
        x[t + 1] = phi @ x[t] + eta[t]
    return Trajectory(x, dt, {"generator": "ou", "drift": a.tolist(), "sigma": sigma, "seed": seed})


def gram_centered(traj: Trajectory, kernel: KernelConfig = KernelConfig(), seed=0) -> np.ndarray:
    """``J K J`` with ``K = (1/n) [k(x_i, x_j)]`` and ``J`` the projector orthogonal to constants."""
    x = traj.states
    n = x.shape[0]
    bw = kernel.resolve(x, seed)
    k = cdist(x, x, "sqeuclidean")
    k *= -1.0 / (2.0 * bw * bw)
    np.exp(k, out=k)
    k /= n
    # double centering in place
    row = k.mean(axis=1)
    k -= row[:, None]
    k -= row[None, :]
    k += row.mean()
    k += k.T
    k *= 0.5
    return k


def shift(x: np.ndarray) -> np.ndarray:
    """``E x``: rows move down by one and are scaled by ``sqrt(n/(n-1))``."""
    n = x.shape[0]
    out = np.zeros_like(x)
    out[1:] = x[:-1]
    out *= np.sqrt(n / (n - 1))
    return out


def shift_t(y: np.ndarray) -> np.ndarray:
    """``E^T y``."""
    n = y.shape[0]
    out = np.zeros_like(y)
    out[:-1] = y[1:]
    out *= np.sqrt(n / (n - 1))
    return out


@dataclass
class RrrModel:
    u_r: np.ndarray
    v_r: np.ndarray
    sigma_r: np.ndarray
    gamma: float
    gram_centered: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.u_r.shape[0]

    @property
    def r(self) -> int:
        return self.u_r.shape[1]

    @property
    def shift_scale(self) -> float:
        return float(np.sqrt(self.n / (self.n - 1)))

    def normalization_residuals(self) -> np.ndarray:
        kc = self.gram_centered
        w = kc @ (kc @ self.u_r) + self.gamma * (kc @ self.u_r)
        return np.abs(np.einsum("ij,ij->j", self.u_r, w) - 1.0)

    @cached_property
    def gram_h(self) -> Gram:
        """Gram blocks of the estimator as an operator on the RKHS."""
        u, v = self.u_r, self.v_r
        ev = shift(v)
        # (EV)^T K (EV) equals (V + gamma U)^T V Sigma^2 only for exact eigenvectors;
        # the direct product keeps the three blocks a consistent Gram triple
        vv = ev.T @ (self.gram_centered @ ev)
        return Gram(_sym(u.T @ v), _sym(vv), v.T @ ev)

    @cached_property
    def gram_l2(self) -> Gram:
        """Gram blocks of the estimator as an operator on L^2 of the invariant law."""
        v = self.v_r
        ev = shift(v)
        jev = ev - ev.mean(axis=0)
        return Gram(_sym(v.T @ v), _sym(ev.T @ jev), v.T @ ev)

    def gram(self, geometry: str) -> Gram:
        if geometry.upper() == "H":
            return self.gram_h
        if geometry.upper() in ("L2", "L²"):
            return self.gram_l2
        raise PreconditionError(f"unknown geometry {geometry!r}; use 'H' or 'L2'")

    def eigenvalues(self, geometry: str = "H") -> np.ndarray:
        return self.gram(geometry).eigenvalues()

    def summary(self) -> dict:
        return {
            "n": self.n,
            "r": self.r,
            "gamma": self.gamma,
            "sigma": self.sigma_r.tolist(),
            "normalization_residuals": self.normalization_residuals().tolist(),
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues("H")],
        }


def _sym(a: np.ndarray) -> np.ndarray:
    return (a + a.T) / 2.0


def _cholesky_shifted(kc: np.ndarray, gamma: float):
    n = kc.shape[0]
    jitter = 0.0
    for _ in range(3):
        try:
            return sla.cho_factor(kc + (gamma + jitter) * np.eye(n), lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            jitter = 1e-14 if jitter == 0.0 else jitter * 10
    raise ConvergenceError("K + gamma I is not numerically positive definite")


def fit_rrr(kc: np.ndarray, gamma: float, r: int, solver: str = "auto", seed=0) -> RrrModel:
    """Reduced-rank regression: ``E^T K E K u = s^2 (K + gamma I) u`` for the r largest ``s^2``.

    ``solver`` is ``"dense"`` (full QZ), ``"arnoldi"`` (ARPACK on the
    Cholesky-preconditioned operator) or ``"auto"`` (dense up to 1500 samples).
    """
    kc = np.asarray(kc, dtype=float)
    n = kc.shape[0]
    if gamma <= 0:
        raise PreconditionError("gamma must be positive")
    if not 1 <= r < n - 1:
        raise PreconditionError(f"need 1 <= r < n - 1, got r={r}")
    if solver == "auto":
        solver = "dense" if n <= DENSE_FIT_MAX_N else "arnoldi"
    if solver == "dense":
        lhs = _shift_sandwich(kc)
        w, vecs = sla.eig(lhs @ kc, kc + gamma * np.eye(n))
    elif solver == "arnoldi":
        cf = _cholesky_shifted(kc, gamma)

        def matvec(x):
            y = kc @ x
            y = shift_t(kc @ shift(y))
            return sla.cho_solve(cf, y, check_finite=False)

        op = LinearOperator((n, n), matvec=matvec, dtype=float)
        v0 = np.random.default_rng(seed).standard_normal(n)
        try:
            w, vecs = eigs(op, k=r + 2, which="LR", v0=v0, ncv=max(2 * r + 10, 40), tol=1e-12, maxiter=5000)
        except ArpackNoConvergence as exc:
            raise ConvergenceError(f"ARPACK did not converge: {exc}") from exc
    else:
        raise PreconditionError(f"unknown solver {solver!r}")
    ok = np.isfinite(w)
    w, vecs = w[ok], vecs[:, ok]
    order = np.argsort(-w.real)
    w, vecs = w[order], vecs[:, order]
    positive = w.real > 1e-14 * max(abs(w.real).max(initial=0.0), 1e-300)
    if positive[:r].sum() < r:
        raise PreconditionError(f"fewer than {r} positive eigenvalues; choose a smaller rank")
    s2 = w.real[:r]
    u = _realify(vecs[:, :r])
    w_norm = kc @ (kc @ u) + gamma * (kc @ u)
    u = u / np.sqrt(np.einsum("ij,ij->j", u, w_norm))
    model = RrrModel(u, kc @ u, np.sqrt(s2), float(gamma), kc)
    worst = float(model.normalization_residuals().max())
    if worst > NORMALIZATION_TOL:
        raise PreconditionError(
            f"rank {r} exceeds what the data resolves (normalization residual {worst:.1e}); choose a smaller rank"
        )
    return model


def _shift_sandwich(kc: np.ndarray) -> np.ndarray:
    """``E^T K E`` for symmetric K: the trailing block moves to the leading corner."""
    n = kc.shape[0]
    out = np.zeros_like(kc)
    out[:-1, :-1] = kc[1:, 1:]
    out *= n / (n - 1)
    return out


def _realify(vecs: np.ndarray) -> np.ndarray:
    """Real representatives of eigenvectors that are real up to a phase."""
    idx = np.argmax(np.abs(vecs), axis=0)
    phase = vecs[idx, np.arange(vecs.shape[1])]
    phase = phase / np.abs(phase)
    return np.real(vecs / phase)


def mu_h(model: RrrModel, z: complex) -> float:
    return mu(model.gram_h, z)


def mu_l2(model: RrrModel, z: complex) -> float:
    return mu(model.gram_l2, z)


@dataclass(frozen=True)
class KoopGrid:
    grid: GridSpec
    mu_h: np.ndarray
    mu_l2: np.ndarray


def koop_pseudospectrum_grid(model: RrrModel, grid: GridSpec) -> KoopGrid:
    zs = grid.points()
    return KoopGrid(grid, mu_many(model.gram_h, zs), mu_many(model.gram_l2, zs))


def koop_kreiss(model: RrrModel, geometry: str = "L2", eps_list=None) -> tuple[float, float, list]:
    """``max_eps (rho_eps - 1) / eps`` over ``eps_list``, at least 1.

    Returns the constant, the maximizing eps (``inf`` when the bound 1 wins),
    and the per-eps ratios.
    """
    g = model.gram(geometry)
    if eps_list is None:
        eps_list = np.geomspace(1e-3, 1.0, 30)
    ratios = []
    for eps in eps_list:
        rho, _, _ = pseudospectral_radius(g, float(eps))
        ratios.append((float(eps), (rho - 1.0) / float(eps)))
    best_eps, best = max(ratios, key=lambda t: t[1])
    if best < 1.0:
        return 1.0, float("inf"), ratios
    return float(best), best_eps, ratios
