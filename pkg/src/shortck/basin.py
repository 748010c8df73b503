"""Classification of points as attracted / escaped / undecided, and slice rendering.

Attraction is declared when an iterate enters the capture polydisc at a step
from which every later map provably keeps that polydisc invariant.  Escape is
declared when an iterate enters V+ at a step from which every later map
satisfies the filtration inequality |z^d + eta w| > |z|.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import maps as M
from .geometry import FiltrationSpec, as_batch, as_point, dominant_axes
from .potentials import DEFAULT_MARGIN, DEFAULT_TOL, fmt, psi_limit_batch
from .sequences import MapSequence, uniform_polydisc

UNDECIDED, ATTRACTED, ESCAPED = 0, 1, 2
KIND_NAMES = {UNDECIDED: "Undecided", ATTRACTED: "Attracted", ESCAPED: "Escaped"}
PGM_LEVELS = {ATTRACTED: 0, UNDECIDED: 128, ESCAPED: 255}


@dataclass(frozen=True)
class ClassifyParams:
    R: float
    c_in: float = 0.5
    n_max: int = 60
    margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        if not 0 < self.c_in < 1 < self.R:
            raise ValueError("need 0 < c_in < 1 < R")
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")


def default_radius(s: MapSequence) -> float:
    """max(2, 1 + sup|eta| + 0.1) for eta schedules; the shift-like analogue otherwise."""
    m0 = s.map_at(0)
    if s.is_eta:
        sup_eta = max(s.eta(n).modulus for n in range(s.n_max + 1))
        return max(2.0, 1.0 + sup_eta + 0.1)
    if isinstance(m0, M.ShiftLike):
        return 1.1 * max(2.0 ** (1.0 / (m0.d - 1)), 2.0 / abs(m0.delta))
    raise TypeError("classification needs an eta schedule or a shift-like sequence")


def default_params(s: MapSequence, c_in: float = 0.5, n_max: int | None = None) -> ClassifyParams:
    return ClassifyParams(default_radius(s), c_in, s.n_max if n_max is None else n_max)


def filtration_for(s: MapSequence, R: float) -> FiltrationSpec:
    m0 = s.map_at(0)
    if isinstance(m0, M.ShiftLike):
        return FiltrationSpec.shift_like(m0.k, m0.nu, R)
    return FiltrationSpec.standard(s.k, R)


def certificates(s: MapSequence, p: ClassifyParams):
    """cap[j], esc[j]: whether capture / escape may be declared at state j.

    Both need the property for every map F_m with m >= j (checked up to the
    sequence's n_max; the tower schedules are monotone beyond it).
    """
    if p.n_max > s.n_max:
        raise ValueError(f"classifier n_max {p.n_max} exceeds sequence n_max {s.n_max}")
    maps = [s.map_at(m) for m in range(s.n_max + 1)]
    cap_each = np.array([mp.capture_ok(p.c_in) for mp in maps])
    esc_each = np.array([mp.escape_ok(p.R) for mp in maps])
    # suffix-all
    cap = np.flip(np.logical_and.accumulate(np.flip(cap_each)))
    esc = np.flip(np.logical_and.accumulate(np.flip(esc_each)))
    return cap[: p.n_max + 1], esc[: p.n_max + 1]


@dataclass
class ClassBatch:
    kind: np.ndarray
    step: np.ndarray
    axis: np.ndarray

    def orbit_class(self, i: int) -> "OrbitClass":
        kd = int(self.kind[i])
        if kd == ATTRACTED:
            return OrbitClass("Attracted", int(self.step[i]))
        if kd == ESCAPED:
            return OrbitClass("Escaped", int(self.step[i]), int(self.axis[i]))
        return OrbitClass("Undecided")


@dataclass(frozen=True)
class OrbitClass:
    kind: str
    step: int | None = None
    axis: int | None = None


def classify_points(s: MapSequence, Z, p: ClassifyParams) -> ClassBatch:
    Z = as_batch(Z, s.k)
    N = Z.shape[0]
    kind = np.zeros(N, dtype=np.int8)
    step = np.full(N, -1, dtype=np.int64)
    axis = np.zeros(N, dtype=np.int64)
    cap, esc = certificates(s, p)
    plus = filtration_for(s, p.R).plus_mask()
    logR, logc = math.log(p.R), math.log(p.c_in)
    idx = np.arange(N)
    L, U = M.to_scaled(Z)
    for j in range(p.n_max + 1):
        A = np.abs(U)
        with np.errstate(divide="ignore"):
            logsup = L + np.log(A.max(axis=1))
        done = np.zeros(idx.shape[0], dtype=bool)
        if cap[j]:
            hit = logsup < logc
            kind[idx[hit]] = ATTRACTED
            step[idx[hit]] = j
            done |= hit
        if esc[j]:
            ax = dominant_axes(A)
            hit = (logsup >= logR) & plus[ax] & ~done
            kind[idx[hit]] = ESCAPED
            step[idx[hit]] = j
            axis[idx[hit]] = ax[hit]
            done |= hit
        if np.any(done):
            keep = ~done
            idx, L, U = idx[keep], L[keep], U[keep]
        if idx.size == 0 or j == p.n_max:
            break
        L, U = s.map_at(j).apply_scaled(L, U)
    return ClassBatch(kind, step, axis)


def classify_point(s: MapSequence, z, p: ClassifyParams) -> OrbitClass:
    z = as_point(z, s.k)
    return classify_points(s, z[None, :], p).orbit_class(0)


# ---------------------------------------------------------------------------
# Omega_{n,c}


def omega_levels(s: MapSequence, Z, n_hi: int, c: float) -> np.ndarray:
    """inside[:, n] = F(n)(z) in the polydisc of radius c, for n = 0..n_hi."""
    if not c > 0:
        raise ValueError("c must be positive")
    Z = as_batch(Z, s.k)
    out = np.zeros((Z.shape[0], n_hi + 1), dtype=bool)
    L, U = M.to_scaled(Z)
    logc = math.log(c)
    for n in range(n_hi + 1):
        L, U = s.map_at(n).apply_scaled(L, U)
        out[:, n] = M.log_sup_scaled(L, U) < logc
    return out


def omega_membership(s: MapSequence, z, n: int, c: float):
    arr = np.asarray(z, dtype=np.complex128)
    res = omega_levels(s, arr, n, c)[:, n]
    return bool(res[0]) if arr.ndim == 1 else res


def claim_threshold(s: MapSequence, c: float) -> int | None:
    """Smallest n0 with F_m(polydisc(c)) inside polydisc(c) for all n0 < m <= n_max."""
    ok = [s.map_at(m).capture_ok(c) for m in range(s.n_max + 1)]
    n0 = None
    for n in range(s.n_max, -1, -1):
        if all(ok[n + 1:]):
            n0 = n
        else:
            break
    return n0


@dataclass
class NestedUnionReport:
    violations: int
    per_level: dict
    members_per_level: int
    claim_n_lo: int | None
    empirical_n_lo: int | None
    witnesses: list = field(default_factory=list)


def nested_union_check(s: MapSequence, c: float, n_lo: int, n_hi: int, samples: int = 1000,
                       seed: int = 0, R: float | None = None, batch: int = 20000,
                       max_tries: int = 10**6) -> NestedUnionReport:
    """Count members of Omega_{n,c} that fall outside Omega_{n+1,c}, n_lo <= n <= n_hi.

    Members come from rejection sampling in the polydisc of radius 2R.
    """
    if not 0 <= n_lo <= n_hi < s.n_max:
        raise ValueError("need 0 <= n_lo <= n_hi < n_max")
    R = default_radius(s) if R is None else R
    rng = np.random.default_rng(seed)
    levels = range(n_lo, n_hi + 1)
    viol = {n: 0 for n in levels}
    count = {n: 0 for n in levels}
    witnesses = []
    tries = 0
    while min(count.values()) < samples:
        if tries >= max_tries and min(count.values()) == 0:
            raise RuntimeError(f"sampler failure: no member found in {max_tries} tries")
        if tries >= 1000 * max_tries:
            raise RuntimeError(f"sampler failure: fewer than {samples} members in {tries} tries")
        Z = uniform_polydisc(rng, batch, s.k, 2 * R)
        tries += batch
        inside = omega_levels(s, Z, n_hi + 1, c)
        for n in levels:
            rows = np.nonzero(inside[:, n])[0][: samples - count[n]]
            count[n] += rows.size
            bad = rows[~inside[rows, n + 1]]
            viol[n] += int(bad.size)
            witnesses += [(n, Z[i]) for i in bad[:3]]
    empirical = None
    for n in sorted(levels, reverse=True):
        if viol[n] == 0:
            empirical = n
        else:
            break
    return NestedUnionReport(sum(viol.values()), viol, samples, claim_threshold(s, c), empirical, witnesses)


# ---------------------------------------------------------------------------
# slices


@dataclass(frozen=True, eq=False)
class GridSpec:
    base: np.ndarray
    dir_u: np.ndarray
    dir_v: np.ndarray
    width: int = 200
    height: int = 200
    window: tuple = (-1.5, 1.5, -1.5, 1.5)

    def __post_init__(self):
        for name in ("base", "dir_u", "dir_v"):
            object.__setattr__(self, name, as_point(getattr(self, name)))
        if not self.base.shape == self.dir_u.shape == self.dir_v.shape:
            raise ValueError("base and directions must share a dimension")
        if self.width < 2 or self.height < 2:
            raise ValueError("pixel counts must be at least 2")
        real = np.stack([np.concatenate([v.real, v.imag]) for v in (self.dir_u, self.dir_v)])
        if np.linalg.matrix_rank(real) < 2:
            raise ValueError("dir_u and dir_v must be linearly independent")
        u0, u1, v0, v1 = self.window
        if not (u0 < u1 and v0 < v1):
            raise ValueError("window extents must be increasing")

    def axes(self):
        u0, u1, v0, v1 = self.window
        return np.linspace(u0, u1, self.width), np.linspace(v1, v0, self.height)

    def points(self) -> np.ndarray:
        """Shape (height*width, k), row-major with row 0 at v_max."""
        u, v = self.axes()
        V, Uu = np.meshgrid(v, u, indexing="ij")
        P = self.base[None, None, :] + Uu[..., None] * self.dir_u + V[..., None] * self.dir_v
        return P.reshape(-1, self.base.shape[0])

    def describe(self):
        def cv(z):
            return [[float(c.real), float(c.imag)] for c in z]

        return {"base": cv(self.base), "dir_u": cv(self.dir_u), "dir_v": cv(self.dir_v),
                "width": self.width, "height": self.height, "window": list(self.window)}


@dataclass
class Raster:
    kind: np.ndarray
    step: np.ndarray
    axis: np.ndarray
    psi_values: np.ndarray | None
    psi_depth: np.ndarray | None
    psi_converged: np.ndarray | None
    meta: dict

    @property
    def shape(self):
        return self.kind.shape

    def orbit_class(self, i: int, j: int) -> OrbitClass:
        b = ClassBatch(self.kind[i:i + 1, j], self.step[i:i + 1, j], self.axis[i:i + 1, j])
        return b.orbit_class(0)

    def to_pgm(self) -> str:
        h, w = self.kind.shape
        lut = np.array([PGM_LEVELS[UNDECIDED], PGM_LEVELS[ATTRACTED], PGM_LEVELS[ESCAPED]])
        gray = lut[self.kind]
        lines = ["P2", f"{w} {h}", "255"]
        lines += [" ".join(str(int(x)) for x in row) for row in gray]
        return "\n".join(lines) + "\n"

    def psi_csv(self) -> str:
        if self.psi_values is None:
            raise ValueError("raster was rendered without psi")
        g = self.meta["grid"]
        u = np.linspace(g["window"][0], g["window"][1], g["width"])
        v = np.linspace(g["window"][3], g["window"][2], g["height"])
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["u", "v", "psi", "depth", "converged"])
        for i in range(self.kind.shape[0]):
            for j in range(self.kind.shape[1]):
                wr.writerow([fmt(u[j]), fmt(v[i]), fmt(self.psi_values[i, j]), int(self.psi_depth[i, j]),
                             int(bool(self.psi_converged[i, j]))])
        return buf.getvalue()

    def fractions(self) -> dict:
        n = self.kind.size
        return {KIND_NAMES[c]: float(np.sum(self.kind == c)) / n for c in KIND_NAMES}


def render_slice(s: MapSequence, g: GridSpec, p: ClassifyParams, also_psi: bool = False,
                 tol: float = DEFAULT_TOL, seed: int | None = None) -> Raster:
    if g.base.shape[0] != s.k:
        raise ValueError("grid dimension does not match the sequence")
    P = g.points()
    cb = classify_points(s, P, p)
    shape = (g.height, g.width)
    psi = depth = conv = None
    if also_psi:
        pb = psi_limit_batch(s, P, tol, p.n_max)
        psi, depth, conv = pb.value.reshape(shape), pb.depth.reshape(shape), pb.converged.reshape(shape)
    meta = {"grid": g.describe(), "sequence": s.describe(), "seed": seed,
            "params": {"R": p.R, "c_in": p.c_in, "n_max": p.n_max, "margin": p.margin}}
    return Raster(cb.kind.reshape(shape), cb.step.reshape(shape), cb.axis.reshape(shape), psi, depth, conv, meta)


def sign_coherence(r: Raster, margin: float = DEFAULT_MARGIN):
    """(agreeing, compared) over decided pixels with |psi| > margin."""
    if r.psi_values is None:
        raise ValueError("raster was rendered without psi")
    psi = r.psi_values
    decided = (r.kind != UNDECIDED) & r.psi_converged & (np.abs(psi) > margin)
    agree = decided & (((psi < 0) & (r.kind == ATTRACTED)) | ((psi > 0) & (r.kind == ESCAPED)))
    return int(agree.sum()), int(decided.sum())


# ---------------------------------------------------------------------------
# Kobayashi disc witness


def kobayashi_witness(s: MapSequence, pt, tangent, Rscale: float, p: ClassifyParams, m: int = 32):
    """Smallest n0 with p_{n0} + zeta*Rscale*xi_{n0} inside the capture polydisc for |zeta| <= 1.

    p_n is the orbit of pt and xi_n the pushed-forward tangent.  The n0 returned
    indexes orbit states (state 0 is pt itself).  The circle |zeta| = 1 is
    pulled back by the inverse maps and every sample must classify Attracted.
    """
    pt = as_point(pt, s.k)
    xi = as_point(tangent, s.k)
    if not np.any(xi):
        raise ValueError("tangent must be nonzero")
    if classify_point(s, pt, p).kind != "Attracted":
        raise ValueError("base point is not attracted")
    cap, _ = certificates(s, p)
    P, X = pt[None, :].copy(), xi[None, :].copy()
    n0 = None
    for j in range(p.n_max + 1):
        if cap[j] and np.all(np.abs(P[0]) + Rscale * np.abs(X[0]) < p.c_in):
            n0 = j
            break
        if j == p.n_max:
            break
        mp = s.map_at(j)
        X = mp.tangent(P, X)
        P = mp.apply(P)
    if n0 is None:
        raise RuntimeError("witness depth exceeded")
    theta = 2 * np.pi * np.arange(m) / m
    W = P + Rscale * np.exp(1j * theta)[:, None] * X
    verified = all(_pullback_attracted(s, w, n0, p, cap) for w in W)
    return n0, verified


def _mp_eta(mp, e):
    return mp.exp(mp.mpf(e.log_modulus)) * mp.expj(mp.mpf(e.phase))


def _mp_step(mp, mpmap, z, forward: bool):
    """One map or inverse map on a list of mpc entries (eta-step and shift-like only)."""
    k = len(z)
    if isinstance(mpmap, M.EtaStep):
        e, d = _mp_eta(mp, mpmap.eta), mpmap.d
        if forward:
            return [e * z[-1]] + [z[i] ** d + e * z[i - 1] for i in range(1, k)]
        out = [None] * k
        out[-1] = z[0] / e
        for i in range(k - 1, 0, -1):
            out[i - 1] = (z[i] - out[i] ** d) / e
        return out
    if isinstance(mpmap, M.ShiftLike):
        dl, d, lead = mp.mpc(mpmap.delta), mpmap.d, mpmap.lead
        if forward:
            return z[1:] + [dl * (z[lead] ** d - z[0])]
        return [z[lead - 1] ** d - z[-1] / dl] + z[:-1]
    raise TypeError("pullback verification needs eta-step or shift-like maps")


def _pullback_attracted(s, w, n0, p, cap, max_bits=1 << 18) -> bool:
    """Classify F(n0-1)^{-1}(w) with enough working precision to make the round trip exact.

    Backward orbits grow doubly exponentially and double precision loses the
    point after a step or two, so the pullback runs in multiprecision with the
    precision doubled until the forward image reproduces w to 1e-20.
    """
    import mpmath

    bits = 128
    while bits <= max_bits:
        with mpmath.workprec(bits):
            target = [mpmath.mpc(complex(x)) for x in w]
            z = list(target)
            for i in range(n0 - 1, -1, -1):
                z = _mp_step(mpmath, s.map_at(i), z, forward=False)
            states = [z]
            for i in range(n0):
                states.append(_mp_step(mpmath, s.map_at(i), states[-1], forward=True))
            err = max(abs(a - b) for a, b in zip(states[-1], target))
            if err < mpmath.mpf("1e-20"):
                for j, st in enumerate(states):
                    if cap[j] and max(abs(x) for x in st) < p.c_in:
                        return True
                return False
        bits *= 2
    raise RuntimeError("pullback needs more than the maximum working precision")


def boundary_bisect(s: MapSequence, z_in, z_out, p: ClassifyParams, iters: int = 60):
    """Bisect the segment [z_in, z_out] for the edge of the attracted set."""
    z_in, z_out = as_point(z_in, s.k), as_point(z_out, s.k)
    if classify_point(s, z_in, p).kind != "Attracted":
        raise ValueError("z_in is not attracted")
    if classify_point(s, z_out, p).kind == "Attracted":
        raise ValueError("z_out is attracted")
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if classify_point(s, z_in + mid * (z_out - z_in), p).kind == "Attracted":
            lo = mid
        else:
            hi = mid
    return z_in + lo * (z_out - z_in)


# ---------------------------------------------------------------------------
# filtration invariance


@dataclass
class FiltrationReport:
    samples: int
    R: float
    step_violations: int
    orbit_violations: int
    witnesses: list = field(default_factory=list)


def sample_plus_region(rng: np.random.Generator, f: FiltrationSpec, n: int, max_log10: float = 3.0) -> np.ndarray:
    """Random points of V+_R: a dominant coordinate on a V+ axis with modulus in [R, 10^max_log10 R]."""
    plus = np.array(sorted(f.plus_axes)) - 1
    axes = plus[rng.integers(0, plus.size, size=n)]
    top = f.R * 10.0 ** (max_log10 * rng.random(n))
    top[: max(1, n // 50)] = f.R
    # strictly below top so the chosen axis is dominant whatever the tie rule
    Z = top[:, None] * rng.random((n, f.k)) * np.exp(2j * np.pi * rng.random((n, f.k)))
    Z[np.arange(n), axes] = top * np.exp(2j * np.pi * rng.random(n))
    return Z


def _in_plus_scaled(L, U, f: FiltrationSpec) -> np.ndarray:
    A = np.abs(U)
    sup = A.max(axis=1)
    with np.errstate(divide="ignore"):
        outside = L + np.log(sup) >= math.log(f.R) - 1e-15
    return outside & f.plus_mask()[dominant_axes(A)]


def filtration_invariance_check(s: MapSequence, R: float, samples: int = 10**4, steps: int = 20,
                                seed: int = 0) -> FiltrationReport:
    """F_n(V+) inside V+ for one random map index per sample, and whole orbits staying in V+ for `steps` maps."""
    f = filtration_for(s, R)
    rng = np.random.default_rng(seed)
    Z = sample_plus_region(rng, f, samples)
    idx = rng.integers(0, s.n_max + 1, size=samples)
    step_bad = np.zeros(samples, dtype=bool)
    for n in np.unique(idx):
        rows = idx == n
        L, U = s.map_at(int(n)).apply_scaled(*M.to_scaled(Z[rows]))
        step_bad[rows] = ~_in_plus_scaled(L, U, f)
    L, U = M.to_scaled(Z)
    orbit_bad = np.zeros(samples, dtype=bool)
    for n in range(min(steps, s.n_max + 1)):
        L, U = s.map_at(n).apply_scaled(L, U)
        orbit_bad |= ~_in_plus_scaled(L, U, f)
    bad = step_bad | orbit_bad
    return FiltrationReport(samples, R, int(step_bad.sum()), int(orbit_bad.sum()), list(Z[bad][:5]))
