"""Points of C^k, sup-norms, polydiscs and the escape filtration.

A point is a 1-D complex128 array of length k (2 <= k <= 8).  Batches are
2-D arrays of shape (N, k).  Axis indices in the public API are 1-based,
matching the usual z_1, ..., z_k labelling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

K_MIN, K_MAX = 2, 8

INTERIOR, PLUS, MINUS = "Interior", "Plus", "Minus"
# integer codes used by the batch routines
REGION_CODES = {INTERIOR: 0, PLUS: 1, MINUS: 2}


def as_point(z, k: int | None = None) -> np.ndarray:
    """Coerce to a complex vector and check its dimension."""
    arr = np.asarray(z, dtype=np.complex128)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {arr.shape}")
    if not K_MIN <= arr.shape[0] <= K_MAX:
        raise ValueError(f"dimension {arr.shape[0]} outside {K_MIN}..{K_MAX}")
    if k is not None and arr.shape[0] != k:
        raise ValueError(f"dimension mismatch: expected {k}, got {arr.shape[0]}")
    return arr


def as_batch(Z, k: int | None = None) -> np.ndarray:
    arr = np.asarray(Z, dtype=np.complex128)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"expected shape (N, k), got {arr.shape}")
    if k is not None and arr.shape[1] != k:
        raise ValueError(f"dimension mismatch: expected {k}, got {arr.shape[1]}")
    return arr


def is_overflowed(z) -> bool:
    """True when any entry is inf or nan (the overflow marker)."""
    return not bool(np.all(np.isfinite(np.asarray(z))))


def sup_norm(z) -> float | np.ndarray:
    """max_i |z_i|; works on a single point or along the last axis of a batch."""
    arr = np.asarray(z, dtype=np.complex128)
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite input")
    out = np.max(np.abs(arr), axis=-1)
    return float(out) if arr.ndim == 1 else out


def dominant_axes(A: np.ndarray) -> np.ndarray:
    """1-based index of the largest modulus per row, ties to the largest index.

    A holds moduli (real, nonnegative), shape (N, k).
    """
    k = A.shape[-1]
    return k - np.argmax(A[..., ::-1], axis=-1)


def in_polydisc(z, c: float):
    """Strict membership in the polydisc of polyradius (c, ..., c)."""
    if not c > 0:
        raise ValueError("c must be positive")
    arr = np.asarray(z, dtype=np.complex128)
    out = np.all(np.abs(arr) < c, axis=-1)
    return bool(out) if arr.ndim == 1 else out


@dataclass(frozen=True)
class FiltrationSpec:
    """Radius R and the axes whose V_i make up V+ (the rest make up V-)."""

    k: int
    R: float
    plus_axes: frozenset

    def __post_init__(self):
        object.__setattr__(self, "plus_axes", frozenset(int(i) for i in self.plus_axes))
        if not K_MIN <= self.k <= K_MAX:
            raise ValueError(f"k must lie in {K_MIN}..{K_MAX}")
        if not self.R > 1:
            raise ValueError("R must exceed 1")
        full = set(range(1, self.k + 1))
        if not self.plus_axes or not self.plus_axes < full:
            raise ValueError("plus_axes must be a nonempty proper subset of 1..k")

    @classmethod
    def standard(cls, k: int, R: float) -> "FiltrationSpec":
        """V+ = V_2 u ... u V_k and V- = V_1, the filtration of the eta-step maps."""
        return cls(k, R, frozenset(range(2, k + 1)))

    @classmethod
    def shift_like(cls, k: int, nu: int, R: float) -> "FiltrationSpec":
        """V+_R = union of V_i for i = k-nu+1..k."""
        return cls(k, R, frozenset(range(k - nu + 1, k + 1)))

    @property
    def minus_axes(self) -> frozenset:
        return frozenset(range(1, self.k + 1)) - self.plus_axes

    def plus_mask(self) -> np.ndarray:
        """Boolean lookup indexed by 1-based axis."""
        m = np.zeros(self.k + 1, dtype=bool)
        m[list(self.plus_axes)] = True
        return m


@dataclass(frozen=True)
class RegionTag:
    region: str
    dominant_axis: int | None = None

    def __post_init__(self):
        if self.region not in REGION_CODES:
            raise ValueError(f"unknown region {self.region!r}")
        if (self.dominant_axis is None) != (self.region == INTERIOR):
            raise ValueError("dominant_axis present iff region is not Interior")


def classify_moduli(log_sup: np.ndarray, axes: np.ndarray, f: FiltrationSpec) -> np.ndarray:
    """Region codes from log sup-norms and dominant axes (batch form)."""
    codes = np.zeros(log_sup.shape, dtype=np.int8)
    outside = log_sup >= np.log(f.R)
    plus = f.plus_mask()[axes]
    codes[outside & plus] = REGION_CODES[PLUS]
    codes[outside & ~plus] = REGION_CODES[MINUS]
    return codes


def classify_filtration_batch(Z, f: FiltrationSpec):
    """Return (codes, axes) for a batch; codes use REGION_CODES."""
    Z = as_batch(Z, f.k)
    if not np.all(np.isfinite(Z)):
        raise ValueError("non-finite input")
    A = np.abs(Z)
    axes = dominant_axes(A)
    sup = A.max(axis=1)
    # compare raw moduli so that sup-norm == R lands outside exactly
    codes = np.where(sup >= f.R, np.where(f.plus_mask()[axes], 1, 2), 0).astype(np.int8)
    return codes, axes


def classify_filtration(z, f: FiltrationSpec) -> RegionTag:
    z = as_point(z)
    if z.shape[0] != f.k:
        raise ValueError(f"dimension mismatch: point has k={z.shape[0]}, filtration k={f.k}")
    codes, axes = classify_filtration_batch(z[None, :], f)
    code = int(codes[0])
    if code == 0:
        return RegionTag(INTERIOR)
    return RegionTag(PLUS if code == 1 else MINUS, int(axes[0]))
