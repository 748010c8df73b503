"""Schedules of automorphisms and their composed orbits F(n) = F_n o ... o F_0."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import maps as M
from .geometry import as_point
from .logscalar import LogScalar

OVERFLOW_LOG = math.log(1e100)


# ---------------------------------------------------------------------------
# eta rules


@dataclass(frozen=True)
class PowerTower:
    """eta_n = a^(d^n)."""

    a: float

    def __post_init__(self):
        if not 0 < self.a < 1:
            raise ValueError("a must lie in (0,1)")

    def eta(self, n: int, d: int) -> LogScalar:
        return LogScalar(float(d) ** n * math.log(self.a))

    def describe(self):
        return {"rule": "power_tower", "a": self.a}


@dataclass(frozen=True)
class ShiftedTower:
    """eta_n = a^(2^n + 1); only defined for d = 2."""

    a: float

    def __post_init__(self):
        if not 0 < self.a < 1:
            raise ValueError("a must lie in (0,1)")

    def eta(self, n: int, d: int) -> LogScalar:
        if d != 2:
            raise ValueError("shifted tower requires d = 2")
        return LogScalar((2.0**n + 1.0) * math.log(self.a))

    def describe(self):
        return {"rule": "shifted_tower", "a": self.a}


@dataclass(frozen=True)
class Custom:
    """An explicit list of eta values.

    With extend=True the list continues by eta_{m+1} = eta_m^d, which keeps
    the doubly exponential decay the basin theory wants.
    """

    etas: tuple
    extend: bool = False

    def __post_init__(self):
        etas = tuple(LogScalar.coerce(e) for e in self.etas)
        if not etas:
            raise ValueError("empty eta list")
        object.__setattr__(self, "etas", etas)

    def eta(self, n: int, d: int) -> LogScalar:
        if n < len(self.etas):
            return self.etas[n]
        if not self.extend:
            raise IndexError(f"custom schedule has only {len(self.etas)} entries")
        return self.etas[-1] ** (float(d) ** (n - len(self.etas) + 1))

    @property
    def length(self):
        return None if self.extend else len(self.etas)

    def describe(self):
        return {
            "rule": "custom",
            "log_moduli": [e.log_modulus for e in self.etas],
            "phases": [e.phase for e in self.etas],
            "extend": self.extend,
        }


# ---------------------------------------------------------------------------
# generators


@dataclass(frozen=True)
class EtaSchedule:
    k: int
    d: int
    rule: object

    def __post_init__(self):
        if not 2 <= self.k <= 8:
            raise ValueError("k must lie in 2..8")
        if self.d < 2:
            raise ValueError("d must be at least 2")
        if isinstance(self.rule, ShiftedTower) and self.d != 2:
            raise ValueError("shifted tower requires d = 2")

    def eta(self, n: int) -> LogScalar:
        return self.rule.eta(n, self.d)

    def map_at(self, n: int) -> M.EtaStep:
        return M.EtaStep(self.k, self.d, self.eta(n))

    @property
    def length(self):
        return getattr(self.rule, "length", None)

    def describe(self):
        return {"generator": "eta_schedule", "k": self.k, "d": self.d, **self.rule.describe()}


@dataclass(frozen=True)
class ExplicitList:
    maps: tuple

    def __post_init__(self):
        maps = tuple(self.maps)
        if maps and len({m.k for m in maps}) != 1:
            raise ValueError("dimension mismatch in map list")
        object.__setattr__(self, "maps", maps)

    @property
    def k(self):
        return self.maps[0].k

    def map_at(self, n: int):
        return self.maps[n]

    @property
    def length(self):
        return len(self.maps)

    def describe(self):
        return {"generator": "explicit", "maps": [repr(m) for m in self.maps]}


@dataclass(frozen=True)
class HQSchedule:
    """H_{p(n), q(n)} = F^{p(n)} o G^{q(n)}, each word kept as a whole map."""

    alpha: complex
    beta: complex
    p: tuple
    q: tuple
    kdeg: int = 2
    k: int = field(default=2, init=False)

    def __post_init__(self):
        p, q = tuple(int(x) for x in self.p), tuple(int(x) for x in self.q)
        if len(p) != len(q):
            raise ValueError("p and q must have equal length")
        if any(x < 0 for x in p + q):
            raise ValueError("p(k), q(k) must be nonnegative")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    def map_at(self, n: int):
        return M.henon_word(self.alpha, self.beta, self.p[n], self.q[n], self.kdeg)

    @property
    def length(self):
        return len(self.p)

    def describe(self):
        return {"generator": "hq", "alpha": str(complex(self.alpha)), "beta": str(complex(self.beta)),
                "p": list(self.p), "q": list(self.q), "kdeg": self.kdeg}


@dataclass(frozen=True)
class MapSequence:
    generator: object
    n_max: int = 60

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be nonnegative")
        length = getattr(self.generator, "length", None)
        if length is not None and self.n_max > length - 1:
            object.__setattr__(self, "n_max", length - 1)

    @property
    def k(self) -> int:
        return self.generator.k

    @property
    def is_eta(self) -> bool:
        return isinstance(self.generator, EtaSchedule)

    @property
    def d(self) -> int:
        return self.generator.d

    def eta(self, n: int) -> LogScalar:
        if not self.is_eta:
            raise TypeError("eta is only defined for eta schedules")
        return self.generator.eta(n)

    def map_at(self, n: int):
        if n < 0:
            raise IndexError("negative map index")
        return self.generator.map_at(n)

    def with_n_max(self, n_max: int) -> "MapSequence":
        return MapSequence(self.generator, n_max)

    def describe(self):
        return {**self.generator.describe(), "n_max": self.n_max}


def power_tower(a: float, k: int = 3, d: int = 2, n_max: int = 60) -> MapSequence:
    return MapSequence(EtaSchedule(k, d, PowerTower(a)), n_max)


def shifted_tower(a: float, k: int = 3, n_max: int = 60) -> MapSequence:
    return MapSequence(EtaSchedule(k, 2, ShiftedTower(a)), n_max)


def autonomous(m, n_max: int = 60) -> MapSequence:
    """The constant sequence F_n = m for n = 0..n_max."""
    return MapSequence(ExplicitList((m,) * (n_max + 1)), n_max)


# ---------------------------------------------------------------------------
# orbits


@dataclass
class OrbitRecord:
    points: list
    overflow_at: int | None
    log_norms: list


def iterate_scaled(s: MapSequence, Z, n: int, start: int = 0):
    """Yield (j, L, U) for j = 0..n+1 where state j is F(start+j-1) applied to Z.

    State 0 is the seed itself.  Maps F_start, ..., F_{start+n} are used.
    """
    L, U = M.to_scaled(Z)
    yield 0, L, U
    for j in range(n + 1):
        L, U = s.map_at(start + j).apply_scaled(L, U)
        yield j + 1, L, U


def orbit(s: MapSequence, z, n: int) -> OrbitRecord:
    if n > s.n_max:
        raise ValueError(f"n={n} exceeds n_max={s.n_max}")
    z = as_point(z, s.k)
    points, log_norms, overflow_at = [], [], None
    for j, L, U in iterate_scaled(s, z[None, :], n):
        ln = float(M.log_sup_scaled(L, U)[0])
        log_norms.append(ln)
        if overflow_at is None:
            raw = M.from_scaled(L, U)[0]
            if ln > OVERFLOW_LOG or not np.all(np.isfinite(raw)):
                overflow_at = j
            else:
                points.append(raw)
    return OrbitRecord(points, overflow_at, log_norms)


def compose_segment(s: MapSequence, m: int, n: int, z):
    """F(m, n) = F_n o ... o F_{m+1}, the maps strictly after step m up to n.

    It satisfies F(n) = F(m, n) o F(m); m = -1 gives F(n) itself and m = n the
    identity.  Overflow shows up as inf entries.
    """
    if not -1 <= m <= n <= s.n_max:
        raise ValueError("need -1 <= m <= n <= n_max")
    arr = np.asarray(z, dtype=np.complex128)
    single = arr.ndim == 1
    Z = arr[None, :] if single else arr.copy()
    for i in range(m + 1, n + 1):
        Z = s.map_at(i).apply(Z)
    return Z[0] if single else Z


def compose_inverse(s: MapSequence, n: int, w):
    """F(n)^{-1} = F_0^{-1} o ... o F_n^{-1}."""
    arr = np.asarray(w, dtype=np.complex128)
    single = arr.ndim == 1
    W = arr[None, :] if single else arr.copy()
    for i in range(n, -1, -1):
        W = s.map_at(i).inverse(W)
    return W[0] if single else W


@dataclass(frozen=True)
class ScaledMatrix:
    """scale * pattern, for derivatives whose entries underflow doubles."""

    scale: LogScalar
    pattern: np.ndarray

    def to_array(self):
        return self.scale.to_complex() * self.pattern


def jacobian_origin(s: MapSequence, upto: int):
    """Derivative of F(upto) at the origin.

    Diagonal families give a list of k LogScalars.  Eta-step sequences give a
    ScaledMatrix: the product of the etas times a cyclic permutation pattern.
    """
    mats = [s.map_at(i) for i in range(upto + 1)]
    for mp in mats:
        if not mp.fixes_origin:
            raise ValueError("map does not fix the origin")
    if mats and all(isinstance(mp, M.EtaStep) for mp in mats):
        k = s.k
        P = np.zeros((k, k))
        P[0, -1] = 1.0
        for i in range(1, k):
            P[i, i - 1] = 1.0
        scale = LogScalar(0.0)
        for mp in mats:
            scale = scale * mp.eta
        return ScaledMatrix(scale, np.linalg.matrix_power(P, len(mats)).astype(np.complex128))
    acc = [LogScalar(0.0)] * s.k
    for mp in mats:
        dg = mp.diag_origin()
        if dg is None:
            raise ValueError(f"{type(mp).__name__} has no diagonal derivative at 0")
        acc = [a * b for a, b in zip(acc, dg)]
    return acc


# ---------------------------------------------------------------------------
# identity probes


def uniform_polydisc(rng: np.random.Generator, n: int, k: int, radius: float = 1.0) -> np.ndarray:
    """n points uniform in the polydisc of polyradius radius."""
    r = radius * np.sqrt(rng.random((n, k)))
    th = 2 * np.pi * rng.random((n, k))
    return r * np.exp(1j * th)


def conjugated_eta_step(a: float, n: int, k: int, Z):
    """Evaluate l_{a^(2^(n+1))} o F o l_{a^(-2^n)} with F the eta = a step map.

    The scalings act on the log scale only, so nothing over- or underflows.
    """
    Z = np.array(Z, dtype=np.complex128, ndmin=2)
    F = M.EtaStep(k, 2, LogScalar.from_complex(a))
    la = math.log(a)
    inner = M.Scaling(k, LogScalar(-(2.0**n) * la))
    outer = M.Scaling(k, LogScalar(2.0 ** (n + 1) * la))
    L, U = np.zeros(Z.shape[0]), Z.copy()
    L, U = inner.apply_scaled(L, U)
    L, U = F.apply_scaled(L, U)
    L, U = outer.apply_scaled(L, U)
    return M.from_scaled(L, U)


def scaling_conjugation_check(a: float, n: int, samples: int = 100, seed: int = 0, k: int = 3) -> float:
    """Max relative discrepancy between F_{eta_n} and its conjugated form."""
    if not 0 < a < 1:
        raise ValueError("a must lie in (0,1)")
    if not 0 <= n <= 40:
        raise ValueError("n must lie in 0..40")
    rng = np.random.default_rng(seed)
    Z = uniform_polydisc(rng, samples, k)
    direct = M.EtaStep(k, 2, ShiftedTower(a).eta(n, 2)).apply(Z)
    conj = conjugated_eta_step(a, n, k, Z)
    num = np.max(np.abs(direct - conj), axis=1)
    den = np.max(np.abs(direct), axis=1)
    rel = np.where(den > 0, num / np.where(den > 0, den, 1.0), num)
    return float(np.max(rel)) if rel.size else 0.0


@dataclass(frozen=True)
class FactorizationReport:
    max_residual: float
    mean_residual: float
    samples: int


def shift_factor_maps(F: M.EtaStep):
    """The shift factors S_1, ..., S_{k-1} of an eta-step map, read as maps of C^k.

    The printed factors have k-1 entries; here S_i(z) = (z_2, ..., z_k,
    eta z_1 + z_2^d) and the last one additionally multiplies its first entry
    by eta^k.
    """
    e = F.eta.to_complex()
    d, k = F.d, F.k

    def S(last: bool):
        def f(Z):
            out = np.empty_like(Z)
            out[:, :-1] = Z[:, 1:]
            out[:, -1] = e * Z[:, 0] + Z[:, 1] ** d
            if last:
                out[:, 0] = e**k * Z[:, 1]
            return out

        return f

    return [S(i == k - 1) for i in range(1, k)]


def shift_factorization_probe(F: M.EtaStep, samples: int = 100, seed: int = 0) -> FactorizationReport:
    """Residual ||F(z) - S_{k-1} o ... o S_1(z)|| on random points of the unit polydisc."""
    if not isinstance(F, M.EtaStep):
        raise TypeError("probe needs an EtaStep map")
    rng = np.random.default_rng(seed)
    Z = uniform_polydisc(rng, samples, F.k)
    W = Z
    for S in shift_factor_maps(F):
        W = S(W)
    res = np.max(np.abs(F.apply(Z) - W), axis=1)
    return FactorizationReport(float(res.max()), float(res.mean()), samples)
