"""Automorphism families of C^k and their evaluation.

Every map works on batches of shape (N, k).  Besides the plain complex
evaluation each map also acts on the *scaled* representation
z = exp(L) * U, with L a real per-row log scale and U a complex mantissa
vector kept in a safe floating range.  That form never overflows or
underflows, so orbits can run for as long as a doubly exponential schedule
needs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .logscalar import LogScalar

SAFE_HI = 2.0**60
SAFE_LO = 2.0**-60


# ---------------------------------------------------------------------------
# scaled representation helpers


def renormalize(L: np.ndarray, U: np.ndarray):
    """Pull the mantissa back into [SAFE_LO, SAFE_HI] where needed."""
    m = np.max(np.abs(U), axis=1)
    bad = (m > SAFE_HI) | ((m < SAFE_LO) & (m > 0))
    if np.any(bad):
        L = np.array(L, dtype=float)
        U = U.copy()
        # exact power-of-two rescaling; dividing by a subnormal max would overflow
        _, e = np.frexp(m[bad])
        L[bad] += e * math.log(2.0)
        sub = U[bad]
        U[bad] = np.ldexp(sub.real, -e[:, None]) + 1j * np.ldexp(sub.imag, -e[:, None])
    return L, U


def to_scaled(Z):
    Z = np.array(Z, dtype=np.complex128, ndmin=2)
    if not np.all(np.isfinite(Z)):
        raise ValueError("non-finite input")
    return renormalize(np.zeros(Z.shape[0]), Z)


def log_sup_scaled(L: np.ndarray, U: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return L + np.log(np.max(np.abs(U), axis=1))


def from_scaled(L: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Back to plain complex numbers; huge values become inf, tiny ones 0."""
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        return np.exp(L)[:, None] * U


def _combine(L, comps):
    """Assemble output coordinates from monomial terms.

    comps[i] is a list of (log_coef, unit_coef, degree, mantissa) and the
    i-th output equals sum unit_coef * exp(log_coef + degree*L) * mantissa.
    """
    logs = []
    for comp in comps:
        for lc, _, deg, _ in comp:
            logs.append(lc + deg * L)
    Lp = np.max(np.stack(logs), axis=0)
    out = np.zeros((L.shape[0], len(comps)), dtype=np.complex128)
    with np.errstate(under="ignore"):
        for i, comp in enumerate(comps):
            for lc, uc, deg, mant in comp:
                out[:, i] += uc * np.exp(lc + deg * L - Lp) * mant
    return renormalize(Lp, out)


def _log_unit(c: complex):
    c = complex(c)
    return math.log(abs(c)), c / abs(c)


# ---------------------------------------------------------------------------
# map variants


class MapSpec:
    """Common interface; subclasses are frozen dataclasses."""

    k: int

    def apply(self, Z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inverse(self, W: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def apply_scaled(self, L, U):
        raise NotImplementedError

    def inverse_scaled(self, L, U):
        raise NotImplementedError(f"{type(self).__name__} has no scaled inverse")

    fixes_origin = True

    def diag_origin(self):
        """Diagonal of the derivative at 0 as LogScalars, or None if not diagonal."""
        return None

    def linear_origin(self) -> np.ndarray:
        """Derivative at the origin as a plain matrix (may underflow)."""
        raise NotImplementedError

    def tangent(self, Z, V):
        """Derivative at Z applied to V (batch)."""
        raise NotImplementedError

    # certificates used by the basin classifier
    def capture_ok(self, c: float) -> bool:
        raise TypeError(f"{type(self).__name__} carries no capture certificate")

    def escape_ok(self, R: float) -> bool:
        raise TypeError(f"{type(self).__name__} carries no escape certificate")


def _check_finite_inverse(Z):
    if not np.all(np.isfinite(Z)):
        raise ValueError("inverse out of range")
    return Z


@dataclass(frozen=True)
class EtaStep(MapSpec):
    """(eta z_k, z_2^d + eta z_1, ..., z_k^d + eta z_{k-1})."""

    k: int
    d: int
    eta: LogScalar

    def __post_init__(self):
        object.__setattr__(self, "eta", LogScalar.coerce(self.eta))
        if not 2 <= self.k <= 8:
            raise ValueError("k must lie in 2..8")
        if self.d < 2:
            raise ValueError("d must be at least 2")
        if self.eta.is_zero:
            raise ValueError("eta must be nonzero")

    def apply(self, Z):
        e = self.eta.to_complex()
        out = np.empty_like(Z)
        with np.errstate(all="ignore"):
            out[:, 0] = e * Z[:, -1]
            out[:, 1:] = Z[:, 1:] ** self.d + e * Z[:, :-1]
        return out

    def inverse(self, W):
        e = self.eta.to_complex()
        if e == 0 or not math.isfinite(1.0 / abs(e)):
            raise ValueError("inverse out of range")
        Z = np.empty_like(W)
        with np.errstate(all="ignore"):
            Z[:, -1] = W[:, 0] / e
            for i in range(self.k - 1, 0, -1):
                Z[:, i - 1] = (W[:, i] - Z[:, i] ** self.d) / e
        return _check_finite_inverse(Z)

    def apply_scaled(self, L, U):
        le, ue = self.eta.log_modulus, self.eta.unit
        comps = [[(le, ue, 1, U[:, -1])]]
        for i in range(1, self.k):
            comps.append([(0.0, 1.0, self.d, U[:, i] ** self.d), (le, ue, 1, U[:, i - 1])])
        return _combine(L, comps)

    def tangent(self, Z, V):
        e = self.eta.to_complex()
        out = np.empty_like(V)
        out[:, 0] = e * V[:, -1]
        out[:, 1:] = self.d * Z[:, 1:] ** (self.d - 1) * V[:, 1:] + e * V[:, :-1]
        return out

    def linear_origin(self):
        e = self.eta.to_complex()
        M = np.zeros((self.k, self.k), dtype=np.complex128)
        M[0, -1] = e
        for i in range(1, self.k):
            M[i, i - 1] = e
        return M

    def capture_ok(self, c):
        # |w| < c  =>  |F(w)| <= c^d + |eta| c <= c
        return self.eta.log_modulus <= math.log1p(-(c ** (self.d - 1)))

    def escape_ok(self, R):
        # |z^d + eta w| > |z| (|z|^{d-1} - |eta|) > |z| needs R^{d-1} > 1 + |eta|
        return R ** (self.d - 1) > 1.0 + self.eta.modulus


@dataclass(frozen=True)
class ShiftLike(MapSpec):
    """(z_2, ..., z_k, delta (z_{k-nu+1}^d - z_1))."""

    k: int
    nu: int
    d: int
    delta: complex

    def __post_init__(self):
        object.__setattr__(self, "delta", complex(self.delta))
        if not 2 <= self.k <= 8:
            raise ValueError("k must lie in 2..8")
        if not 1 <= self.nu <= self.k - 1:
            raise ValueError("nu must lie in 1..k-1")
        if self.d < 2:
            raise ValueError("d must be at least 2")
        if self.delta == 0:
            raise ValueError("delta must be nonzero")

    @property
    def lead(self) -> int:
        """0-based index of the coordinate raised to the d-th power."""
        return self.k - self.nu

    def apply(self, Z):
        out = np.empty_like(Z)
        with np.errstate(all="ignore"):
            out[:, :-1] = Z[:, 1:]
            out[:, -1] = self.delta * (Z[:, self.lead] ** self.d - Z[:, 0])
        return out

    def inverse(self, W):
        Z = np.empty_like(W)
        with np.errstate(all="ignore"):
            Z[:, 1:] = W[:, :-1]
            Z[:, 0] = W[:, self.lead - 1] ** self.d - W[:, -1] / self.delta
        return _check_finite_inverse(Z)

    def apply_scaled(self, L, U):
        ld, ud = _log_unit(self.delta)
        comps = [[(0.0, 1.0, 1, U[:, i + 1])] for i in range(self.k - 1)]
        comps.append([(ld, ud, self.d, U[:, self.lead] ** self.d), (ld, -ud, 1, U[:, 0])])
        return _combine(L, comps)

    def inverse_scaled(self, L, U):
        ld, ud = _log_unit(1.0 / self.delta)
        comps = [[(0.0, 1.0, self.d, U[:, self.lead - 1] ** self.d), (ld, -ud, 1, U[:, -1])]]
        comps += [[(0.0, 1.0, 1, U[:, i - 1])] for i in range(1, self.k)]
        return _combine(L, comps)

    def linear_origin(self):
        M = np.zeros((self.k, self.k), dtype=np.complex128)
        for i in range(self.k - 1):
            M[i, i + 1] = 1.0
        M[-1, 0] = -self.delta
        return M

    def tangent(self, Z, V):
        out = np.empty_like(V)
        out[:, :-1] = V[:, 1:]
        out[:, -1] = self.delta * (self.d * Z[:, self.lead] ** (self.d - 1) * V[:, self.lead] - V[:, 0])
        return out

    def capture_ok(self, c):
        # every new coordinate is at most |delta| (c^d + c) = q c, so after
        # k steps the sup-norm has shrunk by q < 1
        return abs(self.delta) * (c ** (self.d - 1) + 1.0) < 1.0

    def escape_ok(self, R):
        return R ** (self.d - 1) >= 2.0 and R * abs(self.delta) / 2.0 > 1.0


@dataclass(frozen=True)
class HenonF(MapSpec):
    """(alpha z_1 + z_2^2, beta z_2)."""

    alpha: complex
    beta: complex
    k: int = field(default=2, init=False)

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))
        if self.alpha == 0 or self.beta == 0:
            raise ValueError("alpha and beta must be nonzero")

    def apply(self, Z):
        with np.errstate(all="ignore"):
            return np.stack([self.alpha * Z[:, 0] + Z[:, 1] ** 2, self.beta * Z[:, 1]], axis=1)

    def inverse(self, W):
        with np.errstate(all="ignore"):
            z2 = W[:, 1] / self.beta
            z1 = (W[:, 0] - z2**2) / self.alpha
        return _check_finite_inverse(np.stack([z1, z2], axis=1))

    def apply_scaled(self, L, U):
        la, ua = _log_unit(self.alpha)
        lb, ub = _log_unit(self.beta)
        comps = [[(la, ua, 1, U[:, 0]), (0.0, 1.0, 2, U[:, 1] ** 2)], [(lb, ub, 1, U[:, 1])]]
        return _combine(L, comps)

    def diag_origin(self):
        return (LogScalar.from_complex(self.alpha), LogScalar.from_complex(self.beta))

    def linear_origin(self):
        return np.diag([self.alpha, self.beta])

    def tangent(self, Z, V):
        return np.stack([self.alpha * V[:, 0] + 2 * Z[:, 1] * V[:, 1], self.beta * V[:, 1]], axis=1)


@dataclass(frozen=True)
class HenonG(MapSpec):
    """(beta z_1, alpha z_2 + z_1^kdeg)."""

    alpha: complex
    beta: complex
    kdeg: int = 2
    k: int = field(default=2, init=False)

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))
        if self.alpha == 0 or self.beta == 0:
            raise ValueError("alpha and beta must be nonzero")
        if self.kdeg < 2:
            raise ValueError("kdeg must be at least 2")

    def apply(self, Z):
        with np.errstate(all="ignore"):
            return np.stack([self.beta * Z[:, 0], self.alpha * Z[:, 1] + Z[:, 0] ** self.kdeg], axis=1)

    def inverse(self, W):
        with np.errstate(all="ignore"):
            z1 = W[:, 0] / self.beta
            z2 = (W[:, 1] - z1**self.kdeg) / self.alpha
        return _check_finite_inverse(np.stack([z1, z2], axis=1))

    def apply_scaled(self, L, U):
        la, ua = _log_unit(self.alpha)
        lb, ub = _log_unit(self.beta)
        comps = [[(lb, ub, 1, U[:, 0])], [(la, ua, 1, U[:, 1]), (0.0, 1.0, self.kdeg, U[:, 0] ** self.kdeg)]]
        return _combine(L, comps)

    def diag_origin(self):
        return (LogScalar.from_complex(self.beta), LogScalar.from_complex(self.alpha))

    def linear_origin(self):
        return np.diag([self.beta, self.alpha])

    def tangent(self, Z, V):
        return np.stack(
            [self.beta * V[:, 0], self.alpha * V[:, 1] + self.kdeg * Z[:, 0] ** (self.kdeg - 1) * V[:, 0]], axis=1
        )


@dataclass(frozen=True)
class CoordinateSwap(MapSpec):
    """Exchange coordinates i and j (1-based)."""

    k: int
    i: int
    j: int

    def __post_init__(self):
        if not (1 <= self.i <= self.k and 1 <= self.j <= self.k):
            raise ValueError("swap indices out of range")

    def _perm(self):
        p = list(range(self.k))
        p[self.i - 1], p[self.j - 1] = p[self.j - 1], p[self.i - 1]
        return p

    def apply(self, Z):
        return Z[:, self._perm()]

    inverse = apply

    def apply_scaled(self, L, U):
        return L, U[:, self._perm()]

    inverse_scaled = apply_scaled

    def diag_origin(self):
        if self.i != self.j:
            return None
        return tuple(LogScalar(0.0) for _ in range(self.k))

    def linear_origin(self):
        return np.eye(self.k, dtype=np.complex128)[self._perm()]

    def tangent(self, Z, V):
        return V[:, self._perm()]


@dataclass(frozen=True)
class AffineTranslate(MapSpec):
    """Add C to coordinate `axis` (1-based)."""

    k: int
    axis: int
    C: complex

    fixes_origin = property(lambda self: self.C == 0)

    def __post_init__(self):
        object.__setattr__(self, "C", complex(self.C))
        if not 1 <= self.axis <= self.k:
            raise ValueError("axis out of range")

    def apply(self, Z):
        out = Z.copy()
        out[:, self.axis - 1] += self.C
        return out

    def inverse(self, W):
        out = W.copy()
        out[:, self.axis - 1] -= self.C
        return out

    def apply_scaled(self, L, U):
        if self.C == 0:
            return L, U
        lc, uc = _log_unit(self.C)
        comps = [[(0.0, 1.0, 1, U[:, i])] for i in range(self.k)]
        comps[self.axis - 1].append((lc, uc, 0, np.ones(L.shape[0])))
        return _combine(L, comps)

    def diag_origin(self):
        if self.C != 0:
            raise ValueError("map does not fix the origin")
        return tuple(LogScalar(0.0) for _ in range(self.k))

    def linear_origin(self):
        return np.eye(self.k, dtype=np.complex128)

    def tangent(self, Z, V):
        return V.copy()


@dataclass(frozen=True)
class Scaling(MapSpec):
    """l_C(z) = C z."""

    k: int
    C: LogScalar

    def __post_init__(self):
        object.__setattr__(self, "C", LogScalar.coerce(self.C))
        if self.C.is_zero:
            raise ValueError("C must be nonzero")

    def apply(self, Z):
        with np.errstate(all="ignore"):
            return self.C.to_complex() * Z

    def inverse(self, W):
        with np.errstate(all="ignore"):
            return _check_finite_inverse(self.C.inverse().to_complex() * W)

    def apply_scaled(self, L, U):
        return L + self.C.log_modulus, U * self.C.unit

    def inverse_scaled(self, L, U):
        return L - self.C.log_modulus, U / self.C.unit

    def diag_origin(self):
        return tuple(self.C for _ in range(self.k))

    def linear_origin(self):
        return self.C.to_complex() * np.eye(self.k, dtype=np.complex128)

    def tangent(self, Z, V):
        return self.C.to_complex() * V


@dataclass(frozen=True, eq=False)
class Linear(MapSpec):
    """z -> A z for an invertible complex matrix A."""

    matrix: np.ndarray
    condition_number: float = field(init=False)
    k: int = field(init=False)

    def __post_init__(self):
        A = np.array(self.matrix, dtype=np.complex128)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("matrix must be square")
        A.setflags(write=False)
        cond = float(np.linalg.cond(A))
        if not np.isfinite(cond) or cond > 1e14:
            raise ValueError(f"matrix is not invertible (condition number {cond:.3g})")
        object.__setattr__(self, "matrix", A)
        object.__setattr__(self, "condition_number", cond)
        object.__setattr__(self, "k", A.shape[0])

    def apply(self, Z):
        with np.errstate(all="ignore"):
            return Z @ self.matrix.T

    def inverse(self, W):
        return _check_finite_inverse(np.linalg.solve(self.matrix, W.T).T)

    def apply_scaled(self, L, U):
        return renormalize(L, U @ self.matrix.T)

    def inverse_scaled(self, L, U):
        return renormalize(L, np.linalg.solve(self.matrix, U.T).T)

    def diag_origin(self):
        A = self.matrix
        if np.any(A - np.diag(np.diag(A))):
            return None
        return tuple(LogScalar.from_complex(c) for c in np.diag(A))

    def linear_origin(self):
        return self.matrix.copy()

    def tangent(self, Z, V):
        return V @ self.matrix.T


@dataclass(frozen=True)
class Composite(MapSpec):
    """parts[-1] o ... o parts[0]: the first part is applied first."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise ValueError("empty composite")
        if len({p.k for p in parts}) != 1:
            raise ValueError("dimension mismatch inside composite")
        object.__setattr__(self, "parts", parts)

    @property
    def k(self):
        return self.parts[0].k

    @property
    def fixes_origin(self):
        return all(p.fixes_origin for p in self.parts)

    def apply(self, Z):
        for p in self.parts:
            Z = p.apply(Z)
        return Z

    def inverse(self, W):
        for p in reversed(self.parts):
            W = p.inverse(W)
        return W

    def apply_scaled(self, L, U):
        for p in self.parts:
            L, U = p.apply_scaled(L, U)
        return L, U

    def diag_origin(self):
        acc = None
        for p in self.parts:
            dg = p.diag_origin()
            if dg is None:
                return None
            acc = dg if acc is None else tuple(a * b for a, b in zip(acc, dg))
        return acc

    def linear_origin(self):
        M = np.eye(self.k, dtype=np.complex128)
        for p in self.parts:
            M = p.linear_origin() @ M
        return M

    def tangent(self, Z, V):
        for p in self.parts:
            V = p.tangent(Z, V)
            Z = p.apply(Z)
        return V


def henon_word(alpha, beta, p: int, q: int, kdeg: int = 2) -> MapSpec:
    """H_{p,q} = F^p o G^q as a single composite map (G applied first)."""
    if p < 0 or q < 0:
        raise ValueError("p and q must be nonnegative")
    parts = (HenonG(alpha, beta, kdeg),) * q + (HenonF(alpha, beta),) * p
    if not parts:
        return Scaling(2, LogScalar(0.0))
    return Composite(parts)


# ---------------------------------------------------------------------------
# module-level entry points


def _dispatch(fn, m: MapSpec, z):
    arr = np.asarray(z, dtype=np.complex128)
    single = arr.ndim == 1
    Z = arr[None, :] if single else arr
    if Z.shape[1] != m.k:
        raise ValueError(f"dimension mismatch: map has k={m.k}, point has k={Z.shape[1]}")
    out = fn(Z)
    return out[0] if single else out


def apply(m: MapSpec, z):
    """Image of a point (or batch) under m; overflow shows up as inf entries."""
    return _dispatch(m.apply, m, z)


def apply_inverse(m: MapSpec, z):
    return _dispatch(m.inverse, m, z)
