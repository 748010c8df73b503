"""Boundary graphs over polydisc faces.

The basic object is the radial graph of |z^2 + alpha w| = 1, which has a
closed form.  Level sets |pi_j F(m,n)(z)| = level are then located along the
rays t xi e_j + (transverse point) by a sign scan followed by bisection, which
gives graphs over the faces P_j(R) = {|z_j| = 1, |z_i| <= R}.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import maps as M
from .basin import ATTRACTED, UNDECIDED, ClassifyParams, classify_points
from .logscalar import LogScalar
from .potentials import fmt
from .sequences import Custom, EtaSchedule, MapSequence, uniform_polydisc

SCAN_POINTS = 32
ROOT_TOL = 1e-10
C_SCAN = (0.9, 0.95, 0.99, 0.995, 0.999, 0.9995, 0.9999, 0.99999, 0.999999)


# ---------------------------------------------------------------------------
# the radial graph of |z^2 + alpha w| = 1


def phi_alpha(xi, w, alpha: float):
    """The t > 0 with |t^2 xi^2 + alpha w| = 1 (vectorized over xi, w).

    With c = Re(xi^2 conj(alpha w)) and a = |alpha w| the equation is
    u^2 + 2 c u + a^2 - 1 = 0 in u = t^2, whose positive root is
    -c + sqrt(c^2 + 1 - a^2); for c > 0 the rationalized form avoids cancellation.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    xi = np.asarray(xi, dtype=np.complex128)
    aw = alpha * np.asarray(w, dtype=np.complex128)
    a2 = np.abs(aw) ** 2
    if np.any(a2 >= 1):
        raise ValueError("graph breaks down: |alpha w| >= 1")
    c = np.real(xi**2 * np.conj(aw))
    root = np.sqrt(c * c + 1.0 - a2)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(c > 0, (1.0 - a2) / (c + root), root - c)
    t = np.sqrt(u)
    return float(t) if t.ndim == 0 else t


def phi_alpha_residual(xi, w, alpha: float):
    t = phi_alpha(xi, w, alpha)
    xi = np.asarray(xi, dtype=np.complex128)
    return np.abs(np.abs(t**2 * xi**2 + alpha * np.asarray(w)) - 1.0)


def alpha0_for(eps: float, R: float) -> float:
    """Sufficient alpha bound for sup|phi_alpha - 1| <= eps on the unit circle x closed disc(R).

    From 1 - |alpha w| <= phi^2 <= 1 + |alpha w| one gets |phi - 1| <= |alpha w| <= alpha R,
    so alpha R <= min(eps, 1)/2 is enough and also keeps |alpha w| <= 1/2.
    """
    if not (eps > 0 and R > 0):
        raise ValueError("eps and R must be positive")
    return min(eps, 1.0) / (2.0 * R)


def xi_w_grid(R: float, n_xi: int = 64, n_w: int = 32):
    """n_xi points on the unit circle times n_w points of the closed disc of radius R."""
    xi = np.exp(2j * np.pi * np.arange(n_xi) / n_xi)
    n_rad = max(2, int(round(math.sqrt(n_w / 2))))
    n_ang = n_w // n_rad
    rad = np.linspace(R / n_rad, R, n_rad)
    w = (rad[:, None] * np.exp(2j * np.pi * (np.arange(n_ang) + 0.5) / n_ang)[None, :]).ravel()
    return np.meshgrid(xi, w, indexing="ij")


@dataclass
class Alpha0Report:
    alpha: float
    sup_dev: float
    min_phi: float
    max_phi: float
    sup_dtheta: float
    passed: bool


def alpha0_grid_check(eps: float, R: float, alpha: float | None = None, n_xi: int = 64, n_w: int = 32) -> Alpha0Report:
    """C0 deviation of phi_alpha from 1 on a grid, plus a periodic difference estimate of d phi / d theta."""
    alpha = alpha0_for(eps, R) if alpha is None else alpha
    XI, W = xi_w_grid(R, n_xi, n_w)
    phi = phi_alpha(XI, W, alpha)
    dtheta = 2 * np.pi / n_xi
    deriv = (np.roll(phi, -1, axis=0) - np.roll(phi, 1, axis=0)) / (2 * dtheta)
    dev = float(np.max(np.abs(phi - 1.0)))
    return Alpha0Report(alpha, dev, float(phi.min()), float(phi.max()), float(np.max(np.abs(deriv))), dev <= eps)


# ---------------------------------------------------------------------------
# faces and graphs


@dataclass(frozen=True)
class FaceGrid:
    """Face P_j(R) sampled by angular_samples values of xi and a polar grid per transverse coordinate."""

    j: int
    R: float
    k: int = 3
    angular_samples: int = 16
    n_radial: int = 4
    n_angular: int = 4

    def __post_init__(self):
        if not 1 <= self.j <= self.k:
            raise ValueError("face axis out of range")
        if self.angular_samples < 16:
            raise ValueError("need at least 16 angular samples")
        if self.n_radial < 2 or self.n_angular < 1:
            raise ValueError("transverse grid too coarse")
        if not self.R > 1:
            raise ValueError("face radius must exceed 1")

    @property
    def others(self):
        """0-based indices of the transverse coordinates."""
        return [i for i in range(self.k) if i != self.j - 1]

    def xi_angles(self):
        return 2 * np.pi * np.arange(self.angular_samples) / self.angular_samples

    def coord_radii(self):
        return np.linspace(0.0, self.R, self.n_radial)

    def coord_angles(self):
        return 2 * np.pi * np.arange(self.n_angular) / self.n_angular

    def transverse_points(self) -> np.ndarray:
        """Shape (T, k-1); rows enumerate (radius, angle) per coordinate, last coordinate fastest."""
        one = (self.coord_radii()[:, None] * np.exp(1j * self.coord_angles())[None, :]).ravel()
        mesh = np.meshgrid(*([one] * (self.k - 1)), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def ray_bases(self):
        """(xi, base) with base having z_j = 0; shapes (A*T,) and (A*T, k)."""
        xi = np.exp(1j * self.xi_angles())
        T = self.transverse_points()
        A = xi.shape[0]
        base = np.zeros((A * T.shape[0], self.k), dtype=np.complex128)
        base[:, self.others] = np.tile(T, (A, 1))
        return np.repeat(xi, T.shape[0]), base

    def grid_shape(self):
        return (self.angular_samples,) + (self.n_radial, self.n_angular) * (self.k - 1)


@dataclass
class GraphFunction:
    face: FaceGrid
    values: np.ndarray  # shape (angular_samples, T)
    residual: np.ndarray
    derivative_estimates: np.ndarray | None = None
    level: float = 1.0

    def __post_init__(self):
        if not np.all(self.values > 0):
            raise ValueError("graph values must be positive")

    @property
    def continuity_modulus(self) -> float:
        """Largest jump between xi-adjacent samples."""
        return float(np.max(np.abs(np.roll(self.values, -1, axis=0) - self.values)))

    def _interpolator(self):
        f = self.face
        vals = self.values.reshape(f.grid_shape())
        axes = [np.append(f.xi_angles(), 2 * np.pi)]
        vals = np.concatenate([vals, vals[:1]], axis=0)
        for c in range(f.k - 1):
            axes.append(f.coord_radii())
            ax = 2 + 2 * c
            axes.append(np.append(f.coord_angles(), 2 * np.pi))
            vals = np.concatenate([vals, np.take(vals, [0], axis=ax)], axis=ax)
        return RegularGridInterpolator(axes, vals)

    def evaluate(self, W) -> np.ndarray:
        """Interpolated r at arbitrary points, using arg(w_j) and the transverse coordinates."""
        W = np.atleast_2d(np.asarray(W, dtype=np.complex128))
        f = self.face
        cols = [np.mod(np.angle(W[:, f.j - 1]), 2 * np.pi)]
        for i in f.others:
            r = np.abs(W[:, i])
            if np.any(r > f.R * (1 + 1e-12)):
                raise ValueError("point outside the face's transverse range")
            cols += [np.minimum(r, f.R), np.mod(np.angle(W[:, i]), 2 * np.pi)]
        return self._interpolator()(np.stack(cols, axis=1))

    def to_csv(self) -> str:
        f = self.face
        T = f.transverse_points()
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        head = ["axis", "xi_index"]
        for i in f.others:
            head += [f"z{i + 1}_re", f"z{i + 1}_im"]
        wr.writerow(head + ["r", "residual"])
        for a in range(self.values.shape[0]):
            for t in range(T.shape[0]):
                row = [f.j, a]
                for c in T[t]:
                    row += [fmt(c.real), fmt(c.imag)]
                wr.writerow(row + [fmt(self.values[a, t]), fmt(self.residual[a, t])])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# targets and ray roots


@dataclass(frozen=True)
class UnitFace:
    """The surface |w_j| = level."""

    level: float = 1.0


@dataclass(frozen=True)
class SegmentTarget:
    """The surface |pi_j F(m', n)(w)| = level for a segment of another sequence."""

    seq: MapSequence
    m: int
    n: int
    level: float = 1.0


def _segment_scaled(s: MapSequence, m: int, n: int, L, U):
    for i in range(m + 1, n + 1):
        L, U = s.map_at(i).apply_scaled(L, U)
    return L, U


def _log_abs(L, U, j):
    with np.errstate(divide="ignore"):
        return L + np.log(np.abs(U[:, j - 1]))


def make_indicator(s: MapSequence, m: int, n: int, j: int, target):
    """g(Z) = log|pi_j G(Z)| - log(target level) with G = F(m, n), or the analogue for graph targets."""
    if not -1 <= m <= n <= s.n_max:
        raise ValueError("need -1 <= m <= n <= n_max")

    def push(Z):
        return _segment_scaled(s, m, n, *M.to_scaled(Z))

    if isinstance(target, UnitFace):
        def g(Z):
            return _log_abs(*push(Z), j) - math.log(target.level)
    elif isinstance(target, SegmentTarget):
        def g(Z):
            L, U = push(Z)
            L, U = _segment_scaled(target.seq, target.m, target.n, L, U)
            return _log_abs(L, U, j) - math.log(target.level)
    elif isinstance(target, GraphFunction):
        if target.face.j != j:
            raise ValueError("graph target lives over a different face")

        def g(Z):
            W = M.from_scaled(*push(Z))
            out = np.full(W.shape[0], np.inf)
            ok = np.all(np.abs(W[:, target.face.others]) <= target.face.R, axis=1)
            with np.errstate(divide="ignore"):
                out[ok] = np.log(np.abs(W[ok, j - 1])) - np.log(target.evaluate(W[ok]))
            return out
    else:
        raise TypeError(f"unsupported target {type(target).__name__}")
    return g


class NotAGraph(ValueError):
    def __init__(self, node: int, changes: int):
        super().__init__(f"not a graph over this face: node {node} has {changes} sign changes")
        self.node = node
        self.changes = changes


def ray_roots(indicator, base: np.ndarray, xi: np.ndarray, j: int, t_max: float,
              scan: int = SCAN_POINTS, iters: int = 200):
    """Roots t in (0, t_max] of indicator(base + t xi e_j), one per ray.

    A uniform scan must show exactly one sign change (from negative to
    nonnegative); bisection then runs until the residual |indicator| falls
    below ROOT_TOL or the bracket stops shrinking.  Returns (t, residual).
    """
    N = base.shape[0]

    def at(t, rows=slice(None)):
        Z = base[rows].copy()
        Z[:, j - 1] = t * xi[rows]
        return indicator(Z)

    ts = np.linspace(0.0, t_max, scan)
    G = np.stack([at(np.full(N, t)) for t in ts], axis=1)
    sign = G >= 0
    changes = np.sum(sign[:, 1:] != sign[:, :-1], axis=1)
    bad = np.nonzero((changes != 1) | sign[:, 0])[0]
    if bad.size:
        i = int(bad[0])
        raise NotAGraph(i, int(changes[i]) if not sign[i, 0] else 0)
    idx = np.argmax(sign, axis=1)
    lo, hi = ts[idx - 1].copy(), ts[idx].copy()
    g_hi = G[np.arange(N), idx]
    best_t, best_r = hi.copy(), np.abs(g_hi)
    for _ in range(iters):
        todo = best_r >= ROOT_TOL
        if not np.any(todo):
            break
        mid = 0.5 * (lo + hi)
        active = todo & (mid > lo) & (mid < hi)
        if not np.any(active):
            break
        gm = np.full(N, np.nan)
        gm[active] = at(mid[active], active)
        up = active & (gm >= 0)
        dn = active & (gm < 0)
        hi[up], lo[dn] = mid[up], mid[dn]
        better = active & (np.abs(gm) < best_r)
        best_t[better], best_r[better] = mid[better], np.abs(gm[better])
    return best_t, best_r


def graph_pullback(s: MapSequence, m: int, n: int, face: FaceGrid, target=None,
                   derivatives: bool = True) -> GraphFunction:
    """Graph over the face of {z : target condition holds at F(m, n)(z)}."""
    target = UnitFace() if target is None else target
    g = make_indicator(s, m, n, face.j, target)
    xi, base = face.ray_bases()
    t, res = ray_roots(g, base, xi, face.j, face.R)
    shape = (face.angular_samples, -1)
    vals, res = t.reshape(shape), res.reshape(shape)
    deriv = None
    if derivatives:
        h = 2 * np.pi / face.angular_samples
        deriv = (np.roll(vals, -1, axis=0) - np.roll(vals, 1, axis=0)) / (2 * h)
    level = getattr(target, "level", 1.0)
    return GraphFunction(face, vals, res, deriv, level)


# ---------------------------------------------------------------------------
# stagewise construction


def stage_budget(eps: float, k: int, n: int) -> float:
    return eps / (k * 2.0 ** (n + 1))


def stage_sequence(alphas, k: int, extend: bool = True) -> MapSequence:
    alphas = [LogScalar.coerce(a) for a in alphas]
    n_max = len(alphas) - 1 if not extend else max(len(alphas) - 1, 60)
    return MapSequence(EtaSchedule(k, 2, Custom(tuple(alphas), extend=extend)), n_max)


@dataclass
class StageRecord:
    n: int
    alpha_n: LogScalar
    c_n: float
    graphs: dict
    c0_closeness: float
    c1_closeness: float | None
    level_gap: float
    alphas: list = field(default_factory=list)
    halvings: int = 0

    def summary(self) -> dict:
        return {"n": self.n, "log_alpha": self.alpha_n.log_modulus, "c": self.c_n,
                "c0_closeness": self.c0_closeness, "c1_closeness": self.c1_closeness,
                "level_gap": self.level_gap, "halvings": self.halvings,
                "max_residual": max(float(g.residual.max()) for g in self.graphs.values())}


def _stage_graphs(s: MapSequence, n: int, faces, level: float = 1.0):
    return {f.j: graph_pullback(s, -1, n, f, UnitFace(level)) for f in faces}


def _sup_distance(ga: dict, gb: dict) -> float:
    return max(float(np.max(np.abs(ga[j].values - gb[j].values))) for j in ga)


def _sup_derivative_distance(ga: dict, gb: dict) -> float:
    return max(float(np.max(np.abs(ga[j].derivative_estimates - gb[j].derivative_estimates))) for j in ga)


def _image_radius(s: MapSequence, n: int, faces) -> float:
    """Largest sup-norm of F(n) over the ray nodes (a stand-in for R_n)."""
    worst = 0.0
    for f in faces:
        xi, base = f.ray_bases()
        Z = base.copy()
        Z[:, f.j - 1] = f.R * xi
        L, U = M.to_scaled(np.concatenate([Z, base]))
        L, U = _segment_scaled(s, -1, n, L, U)
        worst = max(worst, float(np.max(M.log_sup_scaled(L, U))))
    return math.exp(min(worst, 700.0))


def stagewise_construct(k: int = 3, R: float = 5.0, eps: float = 0.1, N: int = 6,
                        angular_samples: int = 16, n_radial: int = 4, n_angular: int = 4,
                        use_c1: bool = False, max_halvings: int = 4000, log=None) -> list:
    """Stages 0..N-1 of the construction of a short domain with controlled boundary.

    Each stage halves alpha_n (starting from min(alpha0_for(budget, R_prev), alpha_{n-1}^2))
    until every graph r_j^n is within the stage budget eps/(k 2^(n+1)) of r_j^(n-1)
    in sampled C0 (and C1 when use_c1).  c_n is the first value of C_SCAN, not below
    c_{n-1}, whose level-c graphs lie within the budget of the level-1 graphs.
    """
    if R < 5:
        raise ValueError("R must be at least 5")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0,1)")
    if not 1 <= N <= 20:
        raise ValueError("N must lie in 1..20")
    faces = [FaceGrid(j, R, k, angular_samples, n_radial, n_angular) for j in range(2, k + 1)]
    prev = {f.j: GraphFunction(f, np.ones((f.angular_samples, f.transverse_points().shape[0])),
                               np.zeros((f.angular_samples, f.transverse_points().shape[0])),
                               np.zeros((f.angular_samples, f.transverse_points().shape[0])))
            for f in faces}
    records, alphas = [], []
    c_prev = 0.0
    for n in range(N):
        budget = stage_budget(eps, k, n)
        R_prev = R if n == 0 else _image_radius(stage_sequence(alphas, k, extend=False), n - 1, faces)
        alpha = LogScalar(math.log(alpha0_for(budget, R_prev)))
        if alphas:
            alpha = min(alpha, alphas[-1] ** 2, key=lambda a: a.log_modulus)
        halvings = 0
        while True:
            s = stage_sequence(alphas + [alpha], k, extend=False)
            try:
                graphs = _stage_graphs(s, n, faces)
                dist = _sup_distance(graphs, prev)
                d1 = _sup_derivative_distance(graphs, prev) if use_c1 else None
                ok = dist <= budget and (d1 is None or d1 <= budget)
            except NotAGraph:
                ok = False
            if ok:
                break
            halvings += 1
            alpha = alpha * LogScalar(-math.log(2.0))
            if halvings > max_halvings or not math.isfinite(alpha.log_modulus):
                raise RuntimeError(f"alpha underflow at stage {n}")
        c_n, gap = None, math.inf
        for c in C_SCAN:
            if c < c_prev:
                continue
            try:
                gap = _sup_distance(_stage_graphs(s, n, faces, c), graphs)
            except NotAGraph:
                continue
            if gap <= budget:
                c_n = c
                break
        if c_n is None:
            raise RuntimeError(f"no level c found at stage {n}")
        alphas.append(alpha)
        rec = StageRecord(n, alpha, c_n, graphs, dist, d1, gap, list(alphas), halvings)
        records.append(rec)
        if log:
            log(f"stage {n}: log alpha={alpha.log_modulus:.6g} c={c_n} drift={dist:.3g} budget={budget:.3g}")
        prev, c_prev = graphs, c_n
    return records


# ---------------------------------------------------------------------------
# sandwich


@dataclass
class SandwichReport:
    inner_checked: int
    inner_violations: int
    outer_checked: int
    outer_members: int
    outer_violations: int
    undecided: int
    cumulative_drift: float
    drift_bound: float
    corrected_inner_radius: float
    corrected_inner_violations: int
    witnesses: list = field(default_factory=list)


def sandwich_check(records: list, k: int, R: float, eps: float, samples: int = 10**4, seed: int = 0,
                   n_max: int = 60) -> SandwichReport:
    """Test disc(R) x polydisc(1) inside Omega cap polydisc(R) inside disc(R) x polydisc(1 + eps).

    Omega is the basin of the recorded alphas extended by squaring.  The inner
    set is sampled uniformly; the outer inclusion is tested on disc(R) x
    polydisc(min(R, 1 + 5 eps)), outside which the first coordinates already
    escape.  The corrected inner radius 1 - eps is also tested.
    """
    alphas = records[-1].alphas
    s = stage_sequence(alphas, k, extend=True).with_n_max(n_max)
    p = ClassifyParams(2.0, 0.5, n_max)
    rng = np.random.default_rng(seed)

    def sample(radius_tail):
        Z = uniform_polydisc(rng, samples, k, 1.0)
        Z[:, 0] *= R
        Z[:, 1:] *= radius_tail
        return Z

    inner = sample(1.0)
    kin = classify_points(s, inner, p).kind
    inner_bad = kin != ATTRACTED
    corrected = sample(1.0 - eps)
    kc = classify_points(s, corrected, p).kind
    outer = sample(min(R, 1.0 + 5 * eps))
    ko = classify_points(s, outer, p).kind
    members = ko == ATTRACTED
    outside = np.max(np.abs(outer[:, 1:]), axis=1) >= 1.0 + eps
    outer_bad = members & outside
    drift = sum(r.c0_closeness for r in records)
    und = int(np.sum(kin == UNDECIDED) + np.sum(ko == UNDECIDED) + np.sum(kc == UNDECIDED))
    wit = [inner[i] for i in np.nonzero(inner_bad)[0][:5]] + [outer[i] for i in np.nonzero(outer_bad)[0][:5]]
    return SandwichReport(samples, int(inner_bad.sum()), samples, int(members.sum()), int(outer_bad.sum()),
                          und, drift, eps / k, 1.0 - eps, int(np.sum(kc != ATTRACTED)), wit)


# ---------------------------------------------------------------------------
# defining functions


@dataclass
class BoundarySurface:
    """|z_j| = radius(z), radius depending on arg z_j and the transverse coordinates."""

    j: int
    radius: object
    k: int = 3

    def rho(self, Z) -> np.ndarray:
        return np.abs(Z[:, self.j - 1]) - self.radius(Z)


def cylinder_surfaces(k: int, axes=None) -> list:
    axes = range(2, k + 1) if axes is None else axes
    return [BoundarySurface(j, lambda Z: np.ones(Z.shape[0]), k) for j in axes]


def stage_surfaces(record: StageRecord, k: int, R: float) -> list:
    """Exact radius functions of a stage, by ray roots at each evaluation point."""
    s = stage_sequence(record.alphas, k, extend=False)
    out = []
    for j in record.graphs:
        g = make_indicator(s, -1, record.n, j, UnitFace())

        def radius(Z, g=g, j=j):
            Z = np.asarray(Z, dtype=np.complex128)
            xi = np.exp(1j * np.angle(Z[:, j - 1]))
            base = Z.copy()
            base[:, j - 1] = 0
            return ray_roots(g, base, xi, j, R)[0]

        out.append(BoundarySurface(j, radius, k))
    return out


def _real_derivatives(f, Z, h: float):
    """Gradient and Hessian in the real coordinates (x_1, y_1, ..., x_k, y_k) by central differences."""
    N, k = Z.shape
    n = 2 * k
    E = np.zeros((n, k), dtype=np.complex128)
    for a in range(k):
        E[2 * a, a] = 1.0
        E[2 * a + 1, a] = 1j
    f0 = f(Z)
    grad = np.empty((N, n))
    hess = np.empty((N, n, n))
    fp = np.empty((N, n))
    fm = np.empty((N, n))
    for a in range(n):
        fp[:, a] = f(Z + h * E[a])
        fm[:, a] = f(Z - h * E[a])
        grad[:, a] = (fp[:, a] - fm[:, a]) / (2 * h)
        hess[:, a, a] = (fp[:, a] - 2 * f0 + fm[:, a]) / h**2
    for a in range(n):
        for b in range(a + 1, n):
            v = (f(Z + h * (E[a] + E[b])) - f(Z + h * (E[a] - E[b])) - f(Z - h * (E[a] - E[b]))
                 + f(Z - h * (E[a] + E[b]))) / (4 * h * h)
            hess[:, a, b] = hess[:, b, a] = v
    return grad, hess


def complex_gradient(grad: np.ndarray) -> np.ndarray:
    """d rho / d z_a = (rho_x - i rho_y) / 2."""
    return 0.5 * (grad[:, 0::2] - 1j * grad[:, 1::2])


def complex_hessian(hess: np.ndarray) -> np.ndarray:
    """d^2 rho / dz_a dzbar_b from the real Hessian."""
    xx = hess[:, 0::2, 0::2]
    yy = hess[:, 1::2, 1::2]
    xy = hess[:, 0::2, 1::2]
    yx = hess[:, 1::2, 0::2]
    return 0.25 * ((xx + yy) + 1j * (xy - yx))


def levi_minimum(cg: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of the complex Hessian on the complex tangent {v : sum cg_a v_a = 0}."""
    out = np.empty(cg.shape[0])
    for i in range(cg.shape[0]):
        _, _, vh = np.linalg.svd(cg[i][None, :])
        B = vh[1:].conj().T
        Hh = 0.5 * (H[i] + H[i].conj().T)
        out[i] = float(np.linalg.eigvalsh(B.conj().T @ Hh @ B).min())
    return out


@dataclass
class DefiningFunctionReport:
    gradient_norms: np.ndarray
    levi_min_eigen: np.ndarray
    normal_hessian: np.ndarray
    wedge_gram_min: np.ndarray
    skipped: int
    degenerate_corners: int

    def __post_init__(self):
        if self.gradient_norms.size == 0:
            raise ValueError("no boundary samples survived")


def _sample_transverse(rng, n, k, j, R, inner=0.9):
    Z = uniform_polydisc(rng, n, k, inner)
    Z[:, 0] = uniform_polydisc(rng, n, 1, R)[:, 0]
    Z[:, j - 1] = np.exp(2j * np.pi * rng.random(n))
    return Z


def _project(surface: BoundarySurface, Z):
    xi = np.exp(1j * np.angle(Z[:, surface.j - 1]))
    Z = Z.copy()
    Z[:, surface.j - 1] = surface.radius(Z) * xi
    return Z


def defining_function_checks(surfaces, samples: int = 50, seed: int = 0, R: float = 5.0, h: float = 1e-4,
                             corner_pairs=None, surface_tol: float = 1e-6, wedge_floor: float = 1e-3):
    """Finite-difference calculus of rho = |z_j| - r on sampled boundary points.

    surfaces: list of BoundarySurface or a StageRecord (needs k and R; k taken from the graphs).
    corner_pairs: index pairs into surfaces for the wedge test (default: all distinct pairs).
    """
    if isinstance(surfaces, StageRecord):
        k = next(iter(surfaces.graphs.values())).face.k
        surfaces = stage_surfaces(surfaces, k, R)
    if not surfaces:
        raise ValueError("no surfaces given")
    rng = np.random.default_rng(seed)
    k = surfaces[0].k
    gnorm, levi, normal = [], [], []
    skipped = 0
    for surf in surfaces:
        Z = _project(surf, _sample_transverse(rng, samples, k, surf.j, R))
        on = np.abs(surf.rho(Z)) <= surface_tol
        skipped += int(np.sum(~on))
        Z = Z[on]
        if Z.shape[0] == 0:
            continue
        grad, hess = _real_derivatives(surf.rho, Z, h)
        cg = complex_gradient(grad)
        H = complex_hessian(hess)
        gnorm.append(np.linalg.norm(cg, axis=1))
        levi.append(levi_minimum(cg, H))
        normal.append(np.real(H[:, surf.j - 1, surf.j - 1]))
    pairs = corner_pairs
    if pairs is None:
        pairs = [(a, b) for a in range(len(surfaces)) for b in range(a + 1, len(surfaces))]
    wedge = []
    degenerate = 0
    for a, b in pairs:
        sa, sb = surfaces[a], surfaces[b]
        Z = _sample_transverse(rng, samples, k, sa.j, R)
        Z[:, sb.j - 1] = np.exp(2j * np.pi * rng.random(samples))
        for _ in range(8):
            Z = _project(sb, _project(sa, Z))
        on = (np.abs(sa.rho(Z)) <= surface_tol) & (np.abs(sb.rho(Z)) <= surface_tol)
        skipped += int(np.sum(~on))
        Z = Z[on]
        if Z.shape[0] == 0:
            continue
        ga = complex_gradient(_real_derivatives(sa.rho, Z, h)[0])
        gb = complex_gradient(_real_derivatives(sb.rho, Z, h)[0])
        stack = np.stack([ga, gb], axis=1)
        smin = np.linalg.svd(stack, compute_uv=False)[:, -1]
        degenerate += int(np.sum(smin < wedge_floor))
        wedge.append(smin)

    def cat(x):
        return np.concatenate(x) if x else np.zeros(0)

    return DefiningFunctionReport(cat(gnorm), cat(levi), cat(normal), cat(wedge), skipped, degenerate)

