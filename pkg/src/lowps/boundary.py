"""Where the level set ``mu = eps`` crosses circles and lines, and the global
quantities built on top of that: pseudospectral radius and abscissa,
distance to instability, and the discrete and continuous Kreiss constants.

All solvers take a :class:`~lowps.lowrank.LowRankFactors` or a
:class:`~lowps.lowrank.Gram`; only the Gram blocks are used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq, minimize_scalar

from .errors import ConvergenceError, EigensolveError, IrregularPencilError, NotStableError, PreconditionError
from .lowrank import Gram, GramLike, as_gram, dmu_dphi, mu, mu_many

UNIT_TOL = 1e-6
REAL_TOL = 1e-6
VERIFY_TOL = 1e-7
MERGE_TOL = 1e-9
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class CircleIntersections:
    rho: float
    epsilon: float
    angles: np.ndarray
    residuals: np.ndarray


@dataclass(frozen=True)
class LineIntersections:
    a: float
    epsilon: float
    omegas: np.ndarray
    residuals: np.ndarray


@dataclass
class StabilityReport:
    value: float
    argpoint: complex
    iterations: int
    trace: list = field(default_factory=list)
    converged: bool = True
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        z = complex(self.argpoint)
        return {
            "value": float(self.value),
            "argpoint": [z.real, z.imag],
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "trace": [[float(a), float(b)] for a, b in self.trace],
            **{k: _jsonable(v) for k, v in self.extra.items()},
        }


def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, np.generic):
        return v.item()
    return v


def _merge(values: np.ndarray, residuals: np.ndarray, tol: float, period: float | None = None):
    if values.size == 0:
        return values, residuals
    order = np.argsort(values)
    values, residuals = values[order], residuals[order]
    keep_v, keep_r = [values[0]], [residuals[0]]
    for v, r in zip(values[1:], residuals[1:]):
        if v - keep_v[-1] <= tol:
            if r < keep_r[-1]:
                keep_v[-1], keep_r[-1] = v, r
        else:
            keep_v.append(v)
            keep_r.append(r)
    if period is not None and len(keep_v) > 1 and keep_v[0] + period - keep_v[-1] <= tol:
        if keep_r[-1] < keep_r[0]:
            keep_v[0], keep_r[0] = keep_v[-1] - period, keep_r[-1]
        keep_v.pop()
        keep_r.pop()
    return np.array(keep_v), np.array(keep_r)


def _circle_pencil(g: Gram, rho: float, eps: float):
    r = g.r
    eye = np.eye(r)
    s = rho**2 - eps**2
    lhs = np.block([[rho * g.uv, rho * g.uv @ g.uu], [g.vv, s * eye + g.vv @ g.uu]])
    rhs = np.block([[s * eye, rho**2 * g.uu], [np.zeros((r, r)), rho * g.vu]])
    return lhs, rhs


def _pencil_eigvals(lhs: np.ndarray, rhs: np.ndarray):
    """Generalized eigenvalues; ``None`` if the pencil looks singular."""
    try:
        ab = sla.eigvals(lhs, rhs, homogeneous_eigvals=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolveError(f"generalized eigensolve failed: {exc}") from exc
    alpha, beta = ab
    scale = max(np.abs(lhs).max(), np.abs(rhs).max(), 1e-300)
    if np.any((np.abs(alpha) < 1e-13 * scale) & (np.abs(beta) < 1e-13 * scale)):
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        return alpha / beta


def circle_intersections(
    factors: GramLike,
    rho: float,
    epsilon: float,
    unit_tol: float = UNIT_TOL,
    verify_tol: float = VERIFY_TOL,
) -> CircleIntersections:
    """Angles phi with ``mu(rho e^{i phi}) = epsilon``, sorted in [0, 2pi).

    Candidates come from the unit-modulus eigenvalues ``e^{-i phi}`` of a
    2r x 2r pencil; each is kept only if ``|mu - epsilon| <= verify_tol * (1 + epsilon)``.
    """
    if rho <= 0:
        raise PreconditionError("rho must be positive")
    if epsilon < 0:
        raise PreconditionError("epsilon must be nonnegative")
    g = as_gram(factors)
    eps = float(epsilon)
    lam = _pencil_eigvals(*_circle_pencil(g, rho, eps))
    if lam is None:
        eps = eps * (1.0 + 1e-12) + 1e-300
        lam = _pencil_eigvals(*_circle_pencil(g, rho, eps))
        if lam is None:
            raise IrregularPencilError(
                f"circle pencil is singular at rho={rho}, epsilon={epsilon}; try a nearby epsilon"
            )
    lam = lam[np.isfinite(lam)]
    lam = lam[np.abs(np.abs(lam) - 1.0) <= unit_tol]
    phis = np.mod(-np.angle(lam), TWO_PI)
    return _finish_circle(g, rho, float(epsilon), phis, verify_tol)


def _finish_circle(g, rho, eps, phis, verify_tol):
    res = np.zeros(0)
    if phis.size:
        res = np.abs(mu_many(g, rho * np.exp(1j * phis)) - eps)
        ok = res <= verify_tol * (1.0 + eps)
        phis, res = phis[ok], res[ok]
        f = lambda p: mu(g, rho * np.exp(1j * p)) - eps
        phis = np.array([_polish(f, p) if e > 1e-14 * (1.0 + eps) else p for p, e in zip(phis, res)])
        phis = np.mod(phis, TWO_PI)
        res = np.abs(mu_many(g, rho * np.exp(1j * phis)) - eps) if phis.size else res
    phis, res = _merge(phis, res, MERGE_TOL, period=TWO_PI)
    return CircleIntersections(float(rho), eps, phis, res)


def _polish(f, x0: float, h: float = 1e-7, steps: int = 3) -> float:
    """A few secant-Newton steps; keeps x0 unless the residual shrinks."""
    x, fx = x0, f(x0)
    for _ in range(steps):
        if fx == 0.0:
            break
        slope = (f(x + h) - f(x - h)) / (2 * h)
        if slope == 0.0 or not np.isfinite(slope):
            break
        step = fx / slope
        if abs(step) > 1e-5:
            break
        xn = x - step
        fn = f(xn)
        if abs(fn) >= abs(fx):
            break
        x, fx = xn, fn
    return x


def _line_companion(g: Gram, a: float, eps: float) -> np.ndarray:
    r = g.r
    eye = np.eye(r)
    zero = np.zeros((r, r))
    s = a * a - eps * eps
    b1 = np.block([[-1j * g.uv, zero], [zero, 1j * g.vu]])
    b0 = np.block([[s * eye - a * g.uv, eps * eps * g.uu], [g.vv, s * eye - a * g.vu]])
    n = 2 * r
    return np.block([[np.zeros((n, n)), np.eye(n)], [-b0, -b1]])


def _line_candidates(g: Gram, a: float, eps: float, real_tol: float) -> np.ndarray:
    try:
        w = np.linalg.eigvals(_line_companion(g, float(a), eps))
    except np.linalg.LinAlgError as exc:
        raise EigensolveError(f"line companion eigensolve failed: {exc}", complex(a)) from exc
    return w[np.abs(w.imag) <= real_tol * (1.0 + np.abs(w))].real


def _verified(g: Gram, a: float, eps: float, w: float, verify_tol: float) -> float | None:
    """Polished omega if ``a + i w`` passes the mu check, else ``None``."""
    f = lambda t: mu(g, complex(a, t)) - eps
    res = abs(f(w))
    if res > verify_tol * (1.0 + eps):
        return None
    return _polish(f, w) if res > 1e-14 * (1.0 + eps) else w


def line_intersections(
    factors: GramLike,
    a: float,
    epsilon: float,
    real_tol: float = REAL_TOL,
    verify_tol: float = VERIFY_TOL,
) -> LineIntersections:
    """Values omega with ``mu(a + i omega) = epsilon``, sorted ascending."""
    if epsilon < 0:
        raise PreconditionError("epsilon must be nonnegative")
    g = as_gram(factors)
    eps = float(epsilon)
    w = _line_candidates(g, a, eps, real_tol)
    kept = [v for v in (_verified(g, a, eps, t, verify_tol) for t in w) if v is not None]
    w = np.array(kept)
    res = np.abs(mu_many(g, a + 1j * w) - eps) if w.size else np.zeros(0)
    w, res = _merge(w, res, MERGE_TOL * (1.0 + np.abs(w).max(initial=0.0)))
    return LineIntersections(float(a), eps, w, res)


def _rotated(g: Gram, point: complex, direction: complex):
    direction = complex(direction) / abs(direction)
    proj = complex(point) * np.conj(direction)
    return g.scaled(-1j * direction), -proj.imag, proj.real


def line_hits(factors: GramLike, point: complex, direction: complex, epsilon: float) -> np.ndarray:
    """Parameters t with ``mu(point + t * direction) = epsilon``.

    The line is rotated onto a vertical one: with ``c = -i direction`` the
    Gram of ``(U, c V)`` turns the question into :func:`line_intersections`.
    """
    rg, a, offset = _rotated(as_gram(factors), point, direction)
    return line_intersections(rg, a, epsilon).omegas - offset


def _outer_hit(g: Gram, point: complex, direction: complex, eps: float, t_max: float) -> float:
    """Largest t in [0, t_max] with ``mu(point + t dir) = eps``, given ``mu(point) <= eps``."""
    rg, a, offset = _rotated(g, point, direction)
    ts = _line_candidates(rg, a, eps, REAL_TOL) - offset
    ts = np.sort(ts[(ts >= -1e-12) & (ts <= t_max * (1 + 1e-9))])[::-1]
    for t in ts:
        w = _verified(rg, a, eps, t + offset, VERIFY_TOL)
        if w is not None:
            return float(w - offset)
    # fall back on bracketing: mu(point) <= eps and mu(point + t_max dir) >= eps
    direction = complex(direction) / abs(direction)
    f = lambda t: mu(g, point + t * direction) - eps
    if f(t_max) <= 0:
        return t_max
    if f(0.0) > 0:
        return 0.0
    return float(brentq(f, 0.0, t_max, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def _arc_midpoints(angles: np.ndarray) -> np.ndarray:
    if angles.size == 0:
        return angles
    nxt = np.roll(angles, -1)
    gaps = np.mod(nxt - angles, TWO_PI)
    if angles.size == 1:
        gaps = np.array([TWO_PI])
    return np.mod(angles + gaps / 2.0, TWO_PI)


def pseudospectral_radius(
    factors: GramLike, epsilon: float, tol: float = 1e-12, max_iter: int = 100
) -> tuple[float, complex, list]:
    """``rho_eps = max{|z| : mu(z) <= eps}`` by criss-cross iteration.

    Returns the radius, the maximizing point, and the monotone trace of radii.
    """
    if epsilon <= 0:
        raise PreconditionError("epsilon must be positive")
    g = as_gram(factors)
    eps = float(epsilon)
    t_max = g.norm() + eps
    starts = np.concatenate([[0.0], np.angle(g.eigenvalues())])
    best_r, best_theta = -1.0, 0.0
    for theta in starts:
        t = _outer_hit(g, 0.0, np.exp(1j * theta), eps, t_max)
        if t > best_r:
            best_r, best_theta = t, float(theta)
    trace = [best_r]
    for _ in range(max_iter):
        hits = circle_intersections(g, best_r, eps)
        mids = _arc_midpoints(hits.angles)
        if mids.size:
            inside = mids[mu_many(g, best_r * np.exp(1j * mids)) < eps]
        else:
            inside = mids
        new_r, new_theta = best_r, best_theta
        for theta in inside:
            t = _outer_hit(g, 0.0, np.exp(1j * theta), eps, t_max)
            if t > new_r:
                new_r, new_theta = t, float(theta)
        improvement = new_r - best_r
        best_r, best_theta = new_r, new_theta
        trace.append(best_r)
        if improvement <= tol * max(1.0, best_r):
            return best_r, complex(best_r * np.exp(1j * best_theta)), trace
    raise ConvergenceError(f"pseudospectral radius did not converge in {max_iter} iterations")


def pseudospectral_abscissa(
    factors: GramLike, epsilon: float, tol: float = 1e-12, max_iter: int = 100
) -> tuple[float, complex, list]:
    """``alpha_eps = max{Re z : mu(z) <= eps}`` by criss-cross iteration."""
    if epsilon <= 0:
        raise PreconditionError("epsilon must be positive")
    g = as_gram(factors)
    eps = float(epsilon)
    t_max = 2.0 * (g.norm() + eps)
    starts = np.concatenate([[0.0], g.eigenvalues()])
    best_x, best_y = -np.inf, 0.0
    for z0 in starts:
        # horizontal line through the eigenvalue, started from its real part
        start = complex(z0.real, z0.imag)
        t = _outer_hit(g, start, 1.0, eps, t_max)
        if start.real + t > best_x:
            best_x, best_y = start.real + t, start.imag
    trace = [best_x]
    for _ in range(max_iter):
        hits = line_intersections(g, best_x, eps).omegas
        inside = []
        if hits.size >= 2:
            mids = (hits[:-1] + hits[1:]) / 2.0
            inside = mids[mu_many(g, best_x + 1j * mids) < eps]
        new_x, new_y = best_x, best_y
        for y in inside:
            t = _outer_hit(g, complex(best_x, y), 1.0, eps, t_max)
            if best_x + t > new_x:
                new_x, new_y = best_x + t, float(y)
        improvement = new_x - best_x
        best_x, best_y = new_x, new_y
        trace.append(best_x)
        if improvement <= tol * max(1.0, abs(best_x)):
            return best_x, complex(best_x, best_y), trace
    raise ConvergenceError(f"pseudospectral abscissa did not converge in {max_iter} iterations")


def _require_discrete_stable(g: Gram) -> None:
    if g.spectral_radius() >= 1.0:
        raise NotStableError("not asymptotically stable: spectral radius of V^*U >= 1")


def distance_to_instability(
    factors: GramLike, tol: float = 1e-12, max_iter: int = 200, n_scan: int = 64
) -> StabilityReport:
    """``min_phi mu(e^{i phi})`` by bisection on eps with circle intersections at rho = 1."""
    g = as_gram(factors)
    _require_discrete_stable(g)
    ev = g.eigenvalues()
    phis = np.concatenate([np.linspace(0.0, TWO_PI, n_scan, endpoint=False), np.mod(np.angle(ev), TWO_PI)])
    vals = mu_many(g, np.exp(1j * phis))
    i = int(np.argmin(vals))
    hi, arg = float(vals[i]), float(phis[i])
    lo = 0.0
    trace = [(0, hi)]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if hi - lo <= tol * max(1.0, hi):
            converged = True
            break
        mid = 0.5 * (lo + hi)
        hits = circle_intersections(g, 1.0, mid).angles
        if hits.size:
            cand = np.concatenate([hits, _arc_midpoints(hits)])
            cv = mu_many(g, np.exp(1j * cand))
            j = int(np.argmin(cv))
            if cv[j] < hi:
                hi, arg = float(cv[j]), float(cand[j])
            else:
                hi = min(hi, mid)
        else:
            lo = mid
        trace.append((it, hi))
    if not converged:
        raise ConvergenceError("distance to instability bisection did not converge")
    # local polish of the minimizing angle
    f = lambda p: mu(g, np.exp(1j * p))
    w = 1e-3
    res = minimize_scalar(f, bounds=(arg - w, arg + w), method="bounded", options={"xatol": 1e-13})
    if res.fun < hi:
        hi, arg = float(res.fun), float(res.x)
    arg = float(np.mod(arg, TWO_PI))
    try:
        slope = dmu_dphi(g, 1.0, arg)
    except PreconditionError:
        slope = float("nan")
    return StabilityReport(
        value=hi, argpoint=complex(np.exp(1j * arg)), iterations=it, trace=trace,
        converged=True, extra={"angle": arg, "dmu_dphi": slope},
    )


def _outer_maximize(ratio, scale: float, n_scan: int = 20, span=(1e-8, 1e4)):
    """Maximize ``ratio(eps)`` over a log-spaced bracket, then refine by bounded Brent."""
    scale = max(scale, 1e-300)
    logs = np.linspace(np.log(span[0] * scale), np.log(span[1] * scale), n_scan)
    vals = np.array([ratio(np.exp(t)) for t in logs])
    trace = [(float(np.exp(t)), float(v)) for t, v in zip(logs, vals)]
    k = int(np.argmax(vals))
    lo, hi = logs[max(k - 1, 0)], logs[min(k + 1, n_scan - 1)]
    cache = {}

    def neg(t):
        v = ratio(np.exp(t))
        cache[t] = v
        trace.append((float(np.exp(t)), float(v)))
        return -v

    res = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    best_t, best_v = (res.x, -res.fun) if -res.fun > vals[k] else (logs[k], vals[k])
    return float(np.exp(best_t)), float(best_v), trace, int(res.nfev) + n_scan


def kreiss_discrete(factors: GramLike, tol: float = 1e-12) -> StabilityReport:
    """``kappa = sup_eps (rho_eps - 1) / eps``, reported as at least 1."""
    g = as_gram(factors)
    _require_discrete_stable(g)
    points = {}

    def ratio(eps):
        r, z, _ = pseudospectral_radius(g, eps, tol=tol)
        points[eps] = z
        return (r - 1.0) / eps

    eps, val, trace, nfev = _outer_maximize(ratio, g.norm())
    if val < 1.0:
        return StabilityReport(1.0, complex(np.inf), nfev, trace, True, {"epsilon": float("inf")})
    return StabilityReport(val, points.get(eps, complex(np.nan)), nfev, trace, True, {"epsilon": eps})


def kreiss_continuous(factors: GramLike, tol: float = 1e-12) -> StabilityReport:
    """``kappa_c = sup_eps alpha_eps / eps``, reported as at least 1."""
    g = as_gram(factors)
    if g.eigenvalues().real.max() >= 0.0:
        raise NotStableError("not continuous-time stable: V^*U has an eigenvalue with Re >= 0")
    points = {}

    def ratio(eps):
        a, z, _ = pseudospectral_abscissa(g, eps, tol=tol)
        points[eps] = z
        return a / eps

    eps, val, trace, nfev = _outer_maximize(ratio, g.norm())
    if val < 1.0:
        return StabilityReport(1.0, complex(np.inf), nfev, trace, True, {"epsilon": float("inf")})
    return StabilityReport(val, points.get(eps, complex(np.nan)), nfev, trace, True, {"epsilon": eps})


def kreiss_transient_bounds(kappa: float, d: int | None = None) -> tuple[float, float]:
    """Bounds ``kappa <= p(A) <= e d kappa``; without ``d`` the upper bound is ``(e/2) kappa^2``."""
    if kappa < 1.0:
        raise PreconditionError("a Kreiss constant is at least 1")
    if d is None:
        return float(kappa), float(np.e / 2.0 * kappa**2)
    return float(kappa), float(np.e * d * kappa)
