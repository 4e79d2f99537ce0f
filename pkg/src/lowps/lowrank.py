"""Smallest singular values of ``zI - U V^*`` from 2r x 2r eigenproblems.

Everything in this module depends on the factors only through the three
r x r Gram blocks ``U^*U``, ``V^*V`` and ``U^*V``.  :class:`Gram` holds them;
once built, evaluating at a new shift costs O(r^3) regardless of ``d``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np
import scipy.linalg as sla

from .errors import (
    DerivativeUndefinedError,
    EigensolveError,
    NotStableError,
    PreconditionError,
)

IMAG_TOL = 1e-8
GAP_TOL = 1e-10
ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class LowRankFactors:
    """Factors of ``A = u @ v.conj().T`` with ``u``, ``v`` of shape (d, r), d > r."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = _as_column_matrix(self.u)
        v = _as_column_matrix(self.v)
        if u.shape != v.shape:
            raise PreconditionError(f"factor shapes differ: {u.shape} vs {v.shape}")
        d, r = u.shape
        if r < 1 or d <= r:
            raise PreconditionError(f"need d > r >= 1, got d={d}, r={r}")
        if not (np.isfinite(u).all() and np.isfinite(v).all()):
            raise PreconditionError("factors contain NaN or Inf")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def d(self) -> int:
        return self.u.shape[0]

    @property
    def r(self) -> int:
        return self.u.shape[1]

    @cached_property
    def gram(self) -> "Gram":
        return Gram.of(self)

    def dense(self) -> np.ndarray:
        return self.u @ self.v.conj().T

    def orthonormalized(self) -> "LowRankFactors":
        """Same matrix with ``U`` replaced by its Q factor and ``R`` folded into ``V``."""
        q, rr = np.linalg.qr(self.u)
        return LowRankFactors(q, self.v @ rr.conj().T)


def _as_column_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise PreconditionError(f"expected a matrix, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class Gram:
    """The blocks ``uu = U^*U``, ``vv = V^*V`` and ``uv = U^*V``.

    A Gram may also be assembled directly (e.g. for kernel estimators whose
    factors live in a function space); the ambient dimension is then taken to
    exceed ``r``.
    """

    uu: np.ndarray
    vv: np.ndarray
    uv: np.ndarray

    def __post_init__(self):
        blocks = [np.asarray(b, dtype=complex) for b in (self.uu, self.vv, self.uv)]
        r = blocks[0].shape[0]
        for b in blocks:
            if b.shape != (r, r):
                raise PreconditionError("Gram blocks must all be r x r")
        for name, b in zip(("uu", "vv", "uv"), blocks):
            object.__setattr__(self, name, b)

    @classmethod
    def of(cls, factors: LowRankFactors) -> "Gram":
        u, v = factors.u, factors.v
        uh = u.conj().T
        return cls(uh @ u, v.conj().T @ v, uh @ v)

    @property
    def r(self) -> int:
        return self.uu.shape[0]

    @property
    def vu(self) -> np.ndarray:
        return self.uv.conj().T

    def scaled(self, c: complex) -> "Gram":
        """Gram of the factors ``(U, c V)``, i.e. of the matrix ``conj(c) A``."""
        return Gram(self.uu, abs(c) ** 2 * self.vv, c * self.uv)

    def eigenvalues(self) -> np.ndarray:
        """Nonzero part of the spectrum of ``U V^*`` (the eigenvalues of ``V^*U``)."""
        return np.linalg.eigvals(self.vu)

    def spectral_radius(self) -> float:
        return float(np.abs(self.eigenvalues()).max())

    def norm(self) -> float:
        """Spectral norm of ``U V^*``."""
        return float(np.linalg.norm(_psd_sqrt(self.uu) @ _psd_sqrt(self.vv), 2))


GramLike = Union[LowRankFactors, Gram]


def as_gram(obj) -> Gram:
    if isinstance(obj, Gram):
        return obj
    if isinstance(obj, LowRankFactors):
        return obj.gram
    if isinstance(obj, tuple) and len(obj) == 2:
        return LowRankFactors(*obj).gram
    raise TypeError(f"cannot build Gram blocks from {type(obj).__name__}")


def _psd_sqrt(h: np.ndarray) -> np.ndarray:
    w, q = np.linalg.eigh((h + h.conj().T) / 2)
    return (q * np.sqrt(np.clip(w, 0.0, None))) @ q.conj().T


@dataclass(frozen=True)
class ReducedMatrix:
    """The 2r x 2r matrix whose smallest eigenvalue is ``sigma_min(zI - A)**2``."""

    m: np.ndarray
    z: complex

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.m)


@dataclass(frozen=True)
class EigenPair:
    lam: float
    right: np.ndarray
    left: np.ndarray
    gap: float


def build_reduced(factors: GramLike, z: complex) -> ReducedMatrix:
    g = as_gram(factors)
    z = complex(z)
    return ReducedMatrix(_shifted_stack(g, np.array([z]))[0] + abs(z) ** 2 * np.eye(2 * g.r), z)


def _shifted_stack(g: Gram, zs: np.ndarray) -> np.ndarray:
    """Stack of ``M(z) - |z|^2 I`` for every z in ``zs``."""
    r = g.r
    z = zs.reshape(-1, 1, 1)
    a2 = np.abs(z) ** 2
    out = np.empty((z.shape[0], 2 * r, 2 * r), dtype=complex)
    c = a2 * np.eye(r) - z * g.uv
    out[:, :r, :r] = -z * g.uv
    out[:, :r, r:] = c @ g.uu
    out[:, r:, :r] = g.vv
    out[:, r:, r:] = g.vv @ g.uu - np.conj(z) * g.vu
    return out


def _lambda_min_shifted(g: Gram, zs: np.ndarray) -> np.ndarray:
    stack = _shifted_stack(g, zs)
    try:
        ev = np.linalg.eigvals(stack)
    except np.linalg.LinAlgError as exc:
        raise EigensolveError(f"reduced eigensolve failed: {exc}", zs[0]) from exc
    scale = np.abs(stack).max(axis=(1, 2)) + np.abs(zs) ** 2 + 1.0
    imag = np.abs(ev.imag).max(axis=1)
    bad = imag > IMAG_TOL * scale
    if bad.any():
        i = int(np.argmax(bad))
        raise EigensolveError(
            f"reduced spectrum not real (imaginary residue {imag[i]:.3e})", complex(zs[i])
        )
    return ev.real.min(axis=1)


def mu_many(factors: GramLike, zs) -> np.ndarray:
    """``sigma_min(zI - U V^*)`` for an array of shifts (same shape out)."""
    g = as_gram(factors)
    zs = np.asarray(zs, dtype=complex)
    flat = zs.ravel()
    if flat.size == 0:
        return np.zeros(zs.shape)
    lam = np.minimum(_lambda_min_shifted(g, flat), 0.0)
    vals = np.sqrt(np.clip(lam + np.abs(flat) ** 2, 0.0, None))
    return vals.reshape(zs.shape)


def mu(factors: GramLike, z: complex) -> float:
    """``sigma_min(zI - U V^*)``.

    ``factors`` may be a :class:`LowRankFactors` (its Gram blocks are cached on
    the instance) or a prebuilt :class:`Gram`.
    """
    return float(mu_many(factors, np.array([complex(z)]))[0])


def mu_via_gep(factors: GramLike, z: complex) -> float:
    """Same value as :func:`mu`, from the Hermitian/Hermitian pencil form."""
    g = as_gram(factors)
    z = complex(z)
    r = g.r
    a2 = abs(z) ** 2
    eye = np.eye(r)
    lhs = np.block([[np.zeros((r, r)), eye], [eye, -g.uu]])
    rhs = np.block([[g.vv, a2 * eye - np.conj(z) * g.vu], [a2 * eye - z * g.uv, np.zeros((r, r))]])
    try:
        ev = sla.eigvals(rhs, lhs)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolveError(f"pencil solve failed: {exc}", z) from exc
    ev = ev[np.isfinite(ev)]
    lam = min(float(ev.real.min()), a2)
    return float(np.sqrt(max(lam, 0.0)))


def mu_via_qep(factors: GramLike, z: complex) -> float:
    """Same value as :func:`mu` from the r x r quadratic eigenproblem.

    Requires ``U^*U = I``; use :meth:`LowRankFactors.orthonormalized` first.
    """
    g = as_gram(factors)
    r = g.r
    if np.abs(g.uu - np.eye(r)).max() > ORTHO_TOL:
        raise PreconditionError("quadratic form needs orthonormal U (U^*U = I)")
    z = complex(z)
    a2 = abs(z) ** 2
    c1 = z * g.uv + np.conj(z) * g.vu - g.vv
    c0 = a2 * (g.vu @ g.uv - g.vv)
    companion = np.block([[np.zeros((r, r)), np.eye(r)], [-c0, -c1]])
    try:
        ev = np.linalg.eigvals(companion)
    except np.linalg.LinAlgError as exc:
        raise EigensolveError(f"quadratic eigensolve failed: {exc}", z) from exc
    lam = min(float(ev.real.min()), 0.0)
    return float(np.sqrt(max(lam + a2, 0.0)))


def min_eigenpair(factors: GramLike, z: complex, gap_tol: float = GAP_TOL) -> EigenPair:
    """Smallest eigenvalue of the reduced matrix with unit right/left eigenvectors."""
    g = as_gram(factors)
    red = build_reduced(g, z)
    w, vl, vr = sla.eig(red.m, left=True, right=True)
    order = np.argsort(w.real)
    i = order[0]
    gap = float(w.real[order[1]] - w.real[i]) if len(order) > 1 else np.inf
    scale = np.linalg.norm(red.m, 2)
    if gap <= gap_tol * max(scale, 1.0):
        raise DerivativeUndefinedError(
            f"smallest reduced eigenvalue is not simple at z={complex(z)!r} (gap {gap:.2e})"
        )
    x = vr[:, i] / np.linalg.norm(vr[:, i])
    y = vl[:, i] / np.linalg.norm(vl[:, i])
    return EigenPair(float(w.real[i]), x, y, gap)


def _derivative(g: Gram, z: complex, dz: complex, da2: float, gap_tol: float) -> float:
    pair = min_eigenpair(g, z, gap_tol)
    if pair.lam <= 0.0:
        raise DerivativeUndefinedError(f"mu vanishes at z={z!r}; derivative is singular")
    r = g.r
    x1, x2 = pair.right[:r], pair.right[r:]
    y1, y2 = pair.left[:r], pair.left[r:]
    w = x1 + g.uu @ x2
    # y^* (dM) x with dM the derivative of the reduced matrix along the path
    num = (
        da2 * (np.vdot(y1, w) + np.vdot(y2, x2))
        - dz * np.vdot(y1, g.uv @ w)
        - np.conj(dz) * np.vdot(y2, g.vu @ x2)
    )
    ratio = num / np.vdot(pair.left, pair.right)
    value = ratio.real / (2.0 * np.sqrt(pair.lam))
    if abs(ratio.imag) > 1e-8 * (abs(ratio.real) + 1.0):
        raise EigensolveError(f"derivative has imaginary residue {ratio.imag:.2e}", z)
    return float(value)


def dmu_dphi(factors: GramLike, rho: float, phi: float, gap_tol: float = GAP_TOL) -> float:
    """Derivative of ``mu(rho * exp(i phi))`` with respect to the angle."""
    if rho <= 0:
        raise PreconditionError("rho must be positive")
    z = rho * np.exp(1j * phi)
    return _derivative(as_gram(factors), z, 1j * z, 0.0, gap_tol)


def dmu_domega(factors: GramLike, a: float, omega: float, gap_tol: float = GAP_TOL) -> float:
    """Derivative of ``mu(a + i omega)`` with respect to ``omega``."""
    z = complex(a, omega)
    return _derivative(as_gram(factors), z, 1j, 2.0 * omega, gap_tol)


def power_norms(factors: GramLike, t_max: int) -> np.ndarray:
    """``||A^t||`` for t = 1..t_max via ``A^t = U (V^*U)^(t-1) V^*``."""
    if t_max < 1:
        raise PreconditionError("t_max must be >= 1")
    if isinstance(factors, LowRankFactors):
        ru = np.linalg.qr(factors.u, mode="r")
        rv = np.linalg.qr(factors.v, mode="r")
        core = factors.gram.vu
    else:
        g = as_gram(factors)
        ru, rv, core = _psd_sqrt(g.uu), _psd_sqrt(g.vv), g.vu
    out = np.empty(t_max)
    power = np.eye(core.shape[0], dtype=complex)
    rv_h = rv.conj().T
    for t in range(t_max):
        out[t] = np.linalg.norm(ru @ power @ rv_h, 2)
        power = power @ core
    return out


@dataclass(frozen=True)
class TransientConstants:
    p: float
    s: float
    ell: int
    norms: np.ndarray


def transient_constants(factors: GramLike, tol: float = 1e-12, t_cap: int = 100_000) -> TransientConstants:
    """Peak ``p = sup_t ||A^t||`` and sum ``s = sum_t ||A^t||`` (t >= 0).

    ``ell`` is the first t >= 1 with ``||A^t|| < 1``.  The series is cut once
    the geometric tail bound built from ``||A^ell||`` drops below ``tol * s``.
    """
    g = as_gram(factors)
    if g.spectral_radius() >= 1.0:
        raise NotStableError("not asymptotically stable: spectral radius >= 1")
    chunk = 64
    norms: list[float] = []
    ell = None
    while True:
        start = len(norms)
        if start >= t_cap:
            break
        more = power_norms(factors, min(start + chunk, t_cap))
        norms = list(more)
        chunk *= 2
        arr = np.asarray(norms)
        if ell is None:
            below = np.nonzero(arr < 1.0)[0]
            if below.size:
                ell = int(below[0]) + 1
        if ell is None:
            continue
        q = arr[ell - 1]
        total = 1.0 + arr.sum()
        # every later power is bounded by one of the last ell terms times q^k
        tail = arr[-ell:].sum() * q / (1.0 - q)
        if tail <= tol * total:
            break
    arr = np.asarray(norms)
    if ell is None:
        raise NotStableError("no power with norm below 1 within the iteration cap")
    return TransientConstants(
        p=float(max(1.0, arr.max())), s=float(1.0 + arr.sum()), ell=ell, norms=arr
    )
