"""Escape-rate potentials psi_n, their envelopes, and Green functions of shift-like maps.

psi_n(z) = d^-n log max(|F(n)(z)|_inf, |eta_n|) is evaluated from the scaled
orbit, so the depth is limited only by how large d^n can get as a float.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import maps as M
from .geometry import as_batch
from .logscalar import LogScalar
from .sequences import MapSequence, iterate_scaled

LOG2 = math.log(2.0)
DEFAULT_TOL = 1e-9
DEFAULT_MARGIN = 1e-3
STREAK = 3


@dataclass(frozen=True)
class PotentialEstimate:
    value: float
    depth_used: int
    cauchy_gap: float
    converged: bool
    envelope_value: float


@dataclass(frozen=True)
class GreenParams:
    block: int
    n_max: int = 30
    tolerance: float = DEFAULT_TOL
    log_plus_floor: float = 0.0

    def __post_init__(self):
        if self.block < 1:
            raise ValueError("block must be at least 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


def envelope_tail(d: int, n: int) -> float:
    """sum_{j>=n} d^-(j+1) log 2 = log 2 / (d^n (d-1))."""
    return LOG2 / (float(d) ** n * (d - 1))


def _need_eta(s: MapSequence):
    if not s.is_eta:
        raise TypeError("potential needs an eta schedule")


def log_phi_trajectory(s: MapSequence, Z, n: int) -> np.ndarray:
    """log phi_j for j = 0..n, shape (N, n+1)."""
    _need_eta(s)
    Z = as_batch(Z, s.k)
    out = np.empty((Z.shape[0], n + 1))
    for j, L, U in iterate_scaled(s, Z, n):
        if j == 0:
            continue
        out[:, j - 1] = np.maximum(M.log_sup_scaled(L, U), s.eta(j - 1).log_modulus)
    return out


def psi_trajectory(s: MapSequence, Z, n: int) -> np.ndarray:
    """psi_j for j = 0..n, shape (N, n+1)."""
    lp = log_phi_trajectory(s, Z, n)
    scale = float(s.d) ** -np.arange(n + 1)
    return lp * scale


def phi_n(s: MapSequence, z, n: int) -> LogScalar:
    """max(|F(n)(z)|_inf, |eta_n|) as a LogScalar (modulus only)."""
    return LogScalar(float(log_phi_trajectory(s, z, n)[0, -1]))


def psi_n(s: MapSequence, z, n: int) -> float:
    return float(psi_trajectory(s, z, n)[0, -1])


def psi_envelope(s: MapSequence, z, n: int) -> float:
    return psi_n(s, z, n) + envelope_tail(s.d, n)


def _first_streak(gaps: np.ndarray, tol: float, streak: int = STREAK):
    """Index (into the trajectory) where `streak` consecutive gaps fell below tol.

    gaps[:, i] = |psi_{i+1} - psi_i|.  Returns -1 where it never happens.
    """
    ok = gaps < tol
    N, m = ok.shape
    run = np.zeros(N, dtype=int)
    where = np.full(N, -1)
    for i in range(m):
        run = np.where(ok[:, i], run + 1, 0)
        hit = (run >= streak) & (where < 0)
        where[hit] = i + 1
    return where


@dataclass
class PotentialBatch:
    """Column form of many PotentialEstimates."""

    value: np.ndarray
    depth: np.ndarray
    gap: np.ndarray
    converged: np.ndarray
    envelope: np.ndarray

    def estimate(self, i: int) -> PotentialEstimate:
        return PotentialEstimate(float(self.value[i]), int(self.depth[i]), float(self.gap[i]),
                                 bool(self.converged[i]), float(self.envelope[i]))


def psi_limit_batch(s: MapSequence, Z, tol: float = DEFAULT_TOL, n_max: int | None = None) -> PotentialBatch:
    if not tol > 0:
        raise ValueError("tol must be positive")
    n_max = s.n_max if n_max is None else n_max
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    traj = psi_trajectory(s, Z, n_max)
    gaps = np.abs(np.diff(traj, axis=1))
    where = _first_streak(gaps, tol)
    converged = where >= 0
    depth = np.where(converged, where, n_max)
    rows = np.arange(traj.shape[0])
    value = traj[rows, depth]
    gap = gaps[rows, depth - 1]
    env = value + LOG2 / (float(s.d) ** depth * (s.d - 1))
    return PotentialBatch(value, depth, gap, converged, env)


def psi_limit(s: MapSequence, z, tol: float = DEFAULT_TOL, n_max: int | None = None) -> PotentialEstimate:
    return psi_limit_batch(s, z, tol, n_max).estimate(0)


def psi_evaluator(s: MapSequence, tol: float = DEFAULT_TOL, n_max: int | None = None, fixed_depth: int | None = None):
    """Callable Z -> psi values; nan where the limit did not converge.

    With fixed_depth the evaluator returns psi_{fixed_depth}, an honest
    plurisubharmonic function on its own.
    """

    def ev(Z):
        if fixed_depth is not None:
            return psi_trajectory(s, Z, fixed_depth)[:, -1]
        b = psi_limit_batch(s, Z, tol, n_max)
        return np.where(b.converged, b.value, np.nan)

    return ev


def potential_csv(points: np.ndarray, batch: PotentialBatch) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    k = points.shape[1]
    w.writerow([f"z{i + 1}_{part}" for i in range(k) for part in ("re", "im")]
               + ["value", "depth", "gap", "converged"])
    for i in range(points.shape[0]):
        row = []
        for c in points[i]:
            row += [fmt(c.real), fmt(c.imag)]
        row += [fmt(batch.value[i]), int(batch.depth[i]), fmt(batch.gap[i]), int(bool(batch.converged[i]))]
        w.writerow(row)
    return buf.getvalue()


def fmt(x) -> str:
    """17 significant digits, the round-trip precision of a double."""
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# Green functions of shift-like maps


def _block_log_norms(step, Z, levels: int, block: int) -> np.ndarray:
    """log |T^(block*n)(z)|_inf for n = 0..levels, T given by its scaled step."""
    L, U = M.to_scaled(as_batch(Z))
    out = np.empty((L.shape[0], levels + 1))
    out[:, 0] = M.log_sup_scaled(L, U)
    for n in range(1, levels + 1):
        for _ in range(block):
            L, U = step(L, U)
        out[:, n] = M.log_sup_scaled(L, U)
    return out


def _green(step, S: M.ShiftLike, Z, gp: GreenParams) -> PotentialBatch:
    logs = _block_log_norms(step, Z, gp.n_max, gp.block)
    scale = float(S.d) ** -np.arange(gp.n_max + 1)
    traj = np.maximum(logs, gp.log_plus_floor) * scale
    gaps = np.abs(np.diff(traj, axis=1))
    where = _first_streak(gaps, gp.tolerance)
    converged = where >= 0
    depth = np.where(converged, where, gp.n_max)
    rows = np.arange(traj.shape[0])
    value = traj[rows, depth]
    return PotentialBatch(value, depth, gaps[rows, depth - 1], converged, value.copy())


def green_plus_batch(S: M.ShiftLike, Z, gp: GreenParams) -> PotentialBatch:
    """G+ = lim d^-n log+ |S^(block n)(z)|; the definition uses block = nu."""
    return _green(S.apply_scaled, S, Z, gp)


def green_minus_batch(S: M.ShiftLike, Z, gp: GreenParams) -> PotentialBatch:
    """G- = lim d^-n log+ |S^-(block n)(z)|; the definition uses block = k - nu."""
    return _green(S.inverse_scaled, S, Z, gp)


def green_plus(S: M.ShiftLike, z, gp: GreenParams | None = None) -> PotentialEstimate:
    gp = gp or GreenParams(block=S.nu)
    return green_plus_batch(S, z, gp).estimate(0)


def green_minus(S: M.ShiftLike, z, gp: GreenParams | None = None) -> PotentialEstimate:
    gp = gp or GreenParams(block=S.k - S.nu)
    return green_minus_batch(S, z, gp).estimate(0)


def green_floor_constant(S: M.ShiftLike) -> float:
    """delta~ with G+(z) >= log(delta~ |z|) on V+_R: (min(1, |delta|/2))^(1/(d-1))."""
    return min(1.0, abs(S.delta) / 2.0) ** (1.0 / (S.d - 1))


def green_growth_violations(S: M.ShiftLike, Z, n_hi: int, block: int, rel_tol: float = 1e-12) -> np.ndarray:
    """Per-sample count of levels n in 1..n_hi where

        log |S^(block n) z| >= (sum_{i<n} d^i) log(|delta|/2) + d^n log |z|

    fails.  rel_tol absorbs rounding in the log sums only.
    """
    logs = _block_log_norms(S.apply_scaled, Z, n_hi, block)
    d = float(S.d)
    n = np.arange(1, n_hi + 1)
    geom = (d**n - 1.0) / (d - 1.0)
    rhs = geom * math.log(abs(S.delta) / 2.0) + (d**n) * logs[:, :1]
    lhs = logs[:, 1:]
    slack = rel_tol * np.maximum(np.abs(rhs), 1.0)
    return np.sum(lhs < rhs - slack, axis=1)


def sample_shift_plus_region(rng: np.random.Generator, S: M.ShiftLike, R: float, n: int,
                             max_log10: float = 3.0) -> np.ndarray:
    """Random points of V+_R: a dominant coordinate among the last nu, modulus >= R."""
    k = S.k
    axes = rng.integers(k - S.nu, k, size=n)  # 0-based dominant axis
    top = R * 10.0 ** (max_log10 * rng.random(n))
    # a few exact-boundary points
    top[: max(1, n // 50)] = R
    r = top[:, None] * rng.random((n, k))
    Z = r * np.exp(2j * np.pi * rng.random((n, k)))
    Z[np.arange(n), axes] = top * np.exp(2j * np.pi * rng.random(n))
    return Z


def select_green_block(S: M.ShiftLike, Z, n_hi: int = 5, candidates=None):
    """First block size in candidates (default nu, then k - nu) with zero growth violations.

    Returns (block or None, {block: violation count}).
    """
    candidates = candidates or [S.nu, S.k - S.nu]
    counts = {}
    chosen = None
    for b in dict.fromkeys(candidates):
        v = int(np.sum(green_growth_violations(S, Z, n_hi, b) > 0))
        counts[b] = v
        if v == 0 and chosen is None:
            chosen = b
    return chosen, counts


# ---------------------------------------------------------------------------
# subaveraging


@dataclass(frozen=True)
class SubaverageReport:
    margin: float
    circle_mean: float
    center_value: float


def subaverage_check(evaluator, center, direction, radius: float, m: int = 64) -> SubaverageReport:
    """Circle mean minus center value along the complex line center + zeta*direction."""
    if m < 16:
        raise ValueError("need at least 16 circle samples")
    c = np.asarray(center, dtype=np.complex128)
    v = np.asarray(direction, dtype=np.complex128)
    nv = np.max(np.abs(v))
    if nv == 0:
        raise ValueError("direction must be nonzero")
    theta = 2 * np.pi * np.arange(m) / m
    pts = c[None, :] + radius * np.exp(1j * theta)[:, None] * v[None, :]
    vals = np.asarray(evaluator(pts), dtype=float)
    c0 = float(np.asarray(evaluator(c[None, :]), dtype=float)[0])
    if np.any(np.isnan(vals)) or math.isnan(c0):
        raise ValueError("insufficient convergence")
    mean = float(np.mean(vals))
    return SubaverageReport(mean - c0, mean, c0)


