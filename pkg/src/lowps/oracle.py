"""Dense reference computations.

Nothing here touches the reduced 2r x 2r formulas: every quantity is computed
from the explicit d x d matrix with full SVDs or explicit powers.  The cost is
O(d^3) per evaluation, so these routines are meant for validation at d <= a
few hundred and for the timing baseline of the benchmark.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq, minimize_scalar

from .errors import NotStableError, PreconditionError


def _dense(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise PreconditionError(f"expected a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise PreconditionError("matrix contains NaN or Inf")
    return a


def dense_sigma_min(a, z: complex) -> float:
    a = _dense(a)
    shifted = complex(z) * np.eye(a.shape[0]) - a
    return float(sla.svdvals(shifted, check_finite=False)[-1])


def dense_sigma_min_many(a, zs) -> np.ndarray:
    a = _dense(a)
    zs = np.asarray(zs, dtype=complex)
    out = np.empty(zs.size)
    eye = np.eye(a.shape[0])
    for i, z in enumerate(zs.ravel()):
        out[i] = sla.svdvals(z * eye - a, check_finite=False)[-1]
    return out.reshape(zs.shape)


def dense_pseudospectrum_grid(a, zs, eps_levels) -> dict[float, np.ndarray]:
    """Boolean masks ``sigma_min(zI - A) <= eps`` over the points ``zs``, one per level."""
    vals = dense_sigma_min_many(a, zs)
    return {float(e): vals <= e for e in eps_levels}


def _spectral_radius(a: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvals(a)).max())


def dense_circle_profile(a, rho: float, n: int = 10_000) -> tuple[np.ndarray, np.ndarray]:
    phis = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    return phis, dense_sigma_min_many(a, rho * np.exp(1j * phis))


def dense_distance_to_instability(a, n_angles: int = 100_000, polish_tol: float = 1e-12) -> tuple[float, float]:
    """``min_phi sigma_min(e^{i phi} I - A)`` and the minimizing angle.

    The unit circle is sampled at ``n_angles`` points and every local minimum
    among the ten smallest samples is polished by bounded Brent search.
    """
    a = _dense(a)
    if _spectral_radius(a) >= 1.0:
        raise NotStableError("matrix is not stable (spectral radius >= 1)")
    phis, vals = dense_circle_profile(a, 1.0, n_angles)
    step = phis[1] - phis[0]
    f = lambda p: dense_sigma_min(a, np.exp(1j * p))
    best_val, best_phi = float(vals.min()), float(phis[np.argmin(vals)])
    for i in np.argsort(vals)[:10]:
        res = minimize_scalar(
            f, bounds=(phis[i] - step, phis[i] + step), method="bounded",
            options={"xatol": polish_tol},
        )
        if res.fun < best_val:
            best_val, best_phi = float(res.fun), float(res.x)
    return best_val, float(np.mod(best_phi, 2 * np.pi))


def _refine_max(f, x0: np.ndarray, steps: np.ndarray, iters: int = 60) -> tuple[float, np.ndarray]:
    """Compass search maximizing ``f`` from ``x0`` with initial steps ``steps``."""
    x = np.array(x0, dtype=float)
    fx = f(x)
    steps = np.array(steps, dtype=float)
    for _ in range(iters):
        improved = False
        for k in range(len(x)):
            for sgn in (1.0, -1.0):
                trial = x.copy()
                trial[k] += sgn * steps[k]
                ft = f(trial)
                if ft > fx:
                    x, fx, improved = trial, ft, True
        if not improved:
            steps /= 2.0
            if steps.max() < 1e-10:
                break
    return fx, x


def dense_kreiss(a, radial_grid=None, angular_grid: int = 256) -> tuple[float, complex]:
    """``sup_{|z| > 1} (|z| - 1) / sigma_min(zI - A)`` from a polar grid plus refinement.

    Returns at least 1, the limit as ``|z| -> inf``.
    """
    a = _dense(a)
    if _spectral_radius(a) >= 1.0:
        raise NotStableError("matrix is not stable (spectral radius >= 1)")
    norm = float(np.linalg.norm(a, 2))
    if radial_grid is None:
        radial_grid = 1.0 + np.geomspace(1e-6, max(10.0 * norm, 1.0), 60)
    radial_grid = np.asarray(radial_grid, dtype=float)
    phis = np.linspace(0.0, 2 * np.pi, angular_grid, endpoint=False)
    rr, pp = np.meshgrid(radial_grid, phis, indexing="ij")
    zs = rr * np.exp(1j * pp)
    ratio = (rr - 1.0) / np.maximum(dense_sigma_min_many(a, zs), 1e-300)

    def f(x):
        # x = (log(|z| - 1), phi)
        s = np.exp(x[0])
        return s / max(dense_sigma_min(a, (1.0 + s) * np.exp(1j * x[1])), 1e-300)

    best, arg = 1.0, complex(np.inf)
    order = np.argsort(ratio.ravel())[::-1]
    seen = 0
    for idx in order:
        i, j = np.unravel_index(idx, ratio.shape)
        x0 = np.array([np.log(radial_grid[i] - 1.0), phis[j]])
        val, x = _refine_max(f, x0, np.array([0.25, phis[1] - phis[0]]))
        if val > best:
            best, arg = val, complex((1.0 + np.exp(x[0])) * np.exp(1j * x[1]))
        seen += 1
        if seen >= 5:
            break
    return float(best), arg


def dense_kreiss_continuous(a, n_re: int = 60, n_im: int = 241) -> tuple[float, complex]:
    """``sup_{Re z > 0} Re z / sigma_min(zI - A)``, at least 1."""
    a = _dense(a)
    if np.linalg.eigvals(a).real.max() >= 0.0:
        raise NotStableError("matrix is not continuous-time stable")
    norm = float(np.linalg.norm(a, 2))
    xs = np.geomspace(1e-6, max(10.0 * norm, 1.0), n_re)
    ys = np.linspace(-2 * norm - 1, 2 * norm + 1, n_im)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    ratio = xx / np.maximum(dense_sigma_min_many(a, xx + 1j * yy), 1e-300)

    def f(p):
        x = np.exp(p[0])
        return x / max(dense_sigma_min(a, complex(x, p[1])), 1e-300)

    best, arg = 1.0, complex(np.inf)
    for idx in np.argsort(ratio.ravel())[::-1][:5]:
        i, j = np.unravel_index(idx, ratio.shape)
        val, p = _refine_max(f, np.array([np.log(xs[i]), ys[j]]), np.array([0.25, ys[1] - ys[0]]))
        if val > best:
            best, arg = val, complex(np.exp(p[0]), p[1])
    return float(best), arg


def dense_power_norms(a, t_max: int) -> np.ndarray:
    a = _dense(a)
    out = np.empty(t_max)
    p = np.eye(a.shape[0], dtype=complex)
    for t in range(t_max):
        p = p @ a
        out[t] = np.linalg.norm(p, 2)
    return out


def _scan_roots(f, xs: np.ndarray, periodic: bool) -> list[float]:
    vals = np.array([f(x) for x in xs])
    roots = []
    n = len(xs)
    pairs = range(n) if periodic else range(n - 1)
    for i in pairs:
        j = (i + 1) % n
        if vals[i] == 0.0:
            roots.append(float(xs[i]))
        elif vals[i] * vals[j] < 0:
            lo, hi = xs[i], xs[j] if j > i else xs[j] + 2 * np.pi
            roots.append(float(brentq(f, lo, hi, xtol=1e-13)))
    return roots


def dense_circle_intersections(a, rho: float, epsilon: float, n: int = 10_000) -> np.ndarray:
    """Angles in [0, 2pi) where ``sigma_min(rho e^{i phi} I - A) = epsilon``, by scan and bisection."""
    a = _dense(a)
    f = lambda p: dense_sigma_min(a, rho * np.exp(1j * p)) - epsilon
    xs = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    return np.sort(np.mod(_scan_roots(f, xs, periodic=True), 2 * np.pi))


def dense_line_intersections(a, x: float, epsilon: float, n: int = 10_000, half_width: float | None = None) -> np.ndarray:
    """Values omega where ``sigma_min((x + i omega) I - A) = epsilon``."""
    a = _dense(a)
    if half_width is None:
        half_width = float(np.linalg.norm(a, 2)) + epsilon + 1.0
    f = lambda w: dense_sigma_min(a, complex(x, w)) - epsilon
    xs = np.linspace(-half_width, half_width, n)
    return np.sort(np.array(_scan_roots(f, xs, periodic=False)))


def dense_pseudospectral_radius(a, epsilon: float, n_angles: int = 720) -> float:
    """``max{|z| : sigma_min(zI - A) <= epsilon}`` via a radial root per angle plus polish."""
    a = _dense(a)
    top = float(np.linalg.norm(a, 2)) + epsilon

    def radial(phi):
        d = np.exp(1j * phi)
        g = lambda t: dense_sigma_min(a, t * d) - epsilon
        # outermost root: scan inward from a radius that is outside the set
        ts = np.linspace(top, 0.0, 200)
        prev = g(ts[0])
        if prev <= 0:
            return top
        for k in range(1, len(ts)):
            cur = g(ts[k])
            if cur <= 0:
                return brentq(g, ts[k], ts[k - 1], xtol=1e-14)
            prev = cur
        return 0.0

    phis = np.linspace(0.0, 2 * np.pi, n_angles, endpoint=False)
    vals = np.array([radial(p) for p in phis])
    i = int(np.argmax(vals))
    step = phis[1] - phis[0]
    res = minimize_scalar(lambda p: -radial(p), bounds=(phis[i] - step, phis[i] + step),
                          method="bounded", options={"xatol": 1e-12})
    return float(max(vals[i], -res.fun))


def dense_koopman_operators(kc, u_r, v_r, rank_tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Explicit n x n matrices whose sigma_min profiles are the H and L2 pseudospectra of an RRR fit.

    Both are built from an explicit shift matrix and a full eigendecomposition
    of the centered Gram matrix ``kc``.  The L2 one needs a pseudo-inverse
    square root, so it is only trustworthy when ``kc`` has a clean numerical
    rank (a small kernel bandwidth relative to the data spread).
    """
    kc = np.asarray(kc, dtype=float)
    n = kc.shape[0]
    e = np.zeros((n, n))
    e[np.arange(1, n), np.arange(n - 1)] = np.sqrt(n / (n - 1))
    w, q = np.linalg.eigh((kc + kc.T) / 2)
    w = np.clip(w, 0.0, None)
    keep = w > rank_tol * max(w.max(), 1e-300)
    half = (q * np.sqrt(w)) @ q.T
    inv_half = (q[:, keep] / np.sqrt(w[keep])) @ q[:, keep].T
    core = np.asarray(u_r) @ np.asarray(v_r).T @ e.T
    g_h = half @ core @ half
    g_l2 = half @ (half @ core @ inv_half) @ half
    return g_h, g_l2
