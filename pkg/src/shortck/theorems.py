"""Executable checks of the region condition, the affine recursion, eta growth,
disjoint short domains, variety avoidance and the Fatou-Bieberbach inclusion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import maps as M
from .basin import ATTRACTED, UNDECIDED, ClassifyParams, classify_points, default_radius
from .geometry import FiltrationSpec, as_batch, classify_filtration_batch
from .logscalar import LogScalar
from .potentials import psi_limit_batch
from .sequences import Custom, EtaSchedule, MapSequence, ShiftedTower, uniform_polydisc

ALL_OF_C2 = "autonomous, basin is all of C^2"


# ---------------------------------------------------------------------------
# bounded rewriting and the region condition


def rewrite_bounded(p: int, q: int, M_bound: int) -> list:
    """Split H_{p,q} into words H_{a,b} with a, b <= M_bound.

    With p > M the leading M powers of F go into H_{M,q} and the remaining
    p - M = M N + R are grouped as N copies of H_{M,0} and one H_{R,0}:
    H_{p,q} = H_{R,0} o H_{M,0}^N o H_{M,q}.  The list is in application
    order reversed, i.e. outermost factor first.
    """
    if p < 0 or q < 0:
        raise ValueError("p and q must be nonnegative")
    if M_bound < 1:
        raise ValueError("M must be at least 1")
    if q > M_bound:
        raise ValueError("hypothesis violated: q exceeds M")
    if p <= M_bound:
        return [(p, q)]
    N, R = divmod(p - M_bound, M_bound)
    out = [(R, 0)] if R > 0 else []
    return out + [(M_bound, 0)] * N + [(M_bound, q)]


def word_log_diagonal(alpha, beta, p: int, q: int):
    """log moduli of the origin eigenvalues of H_{p,q}: (alpha^p beta^q, alpha^q beta^p)."""
    la, lb = math.log(abs(alpha)), math.log(abs(beta))
    return p * la + q * lb, q * la + p * lb


def term_log_ratio(alpha, beta, p: int, q: int) -> float:
    """2 log|lambda_2| - log|lambda_1| for H_{p,q}."""
    l1, l2 = word_log_diagonal(alpha, beta, p, q)
    return 2 * l2 - l1


def region_value(p: int, q: int, r: float) -> float:
    return (2.0 + 3.0 / (r - 2.0)) * p - q


@dataclass
class RegionTestResult:
    xi: float | None
    worst_k: int | None
    case_trace: list
    rewritten: list
    message: str = ""
    swapped: bool = False
    max_term: float | None = None


def region_test(p_seq, q_seq, alpha, beta, r: float, M_bound: int) -> RegionTestResult:
    p_seq = [int(x) for x in p_seq]
    q_seq = [int(x) for x in q_seq]
    if len(p_seq) != len(q_seq) or not p_seq:
        raise ValueError("p and q sequences must be nonempty and of equal length")
    a, b = abs(complex(alpha)), abs(complex(beta))
    if not (0 < a < 1 and 0 < b < 1):
        raise ValueError("need 0 < |alpha|, |beta| < 1")
    if not r > 2:
        raise ValueError("r must exceed 2")
    if not r * math.log(a) < math.log(b):
        raise ValueError("eigenvalue hypothesis violated")
    if all(q == 0 for q in q_seq):
        return RegionTestResult(None, None, [], [], ALL_OF_C2)
    swapped = False
    if max(q_seq) > M_bound:
        if max(p_seq) > M_bound:
            raise ValueError("hypothesis violated: neither p nor q is bounded by M")
        # the swap tau conjugates H_{p,q} to a map with the roles of p and q exchanged
        p_seq, q_seq, swapped = q_seq, p_seq, True

    eta = a**r / b
    xi_case1 = a
    xi_case2 = eta ** (1.0 / r)
    rewritten, trace = [], []
    needs_case2 = False
    region_fail = None
    for k, (p, q) in enumerate(zip(p_seq, q_seq)):
        if region_value(p, q, r) < 0 and region_fail is None:
            region_fail = k
        for pq in rewrite_bounded(p, q, M_bound):
            if pq == (0, 0):
                continue
            case = 1 if 2 * pq[0] - pq[1] >= 0 else 2
            needs_case2 |= case == 2
            rewritten.append(pq)
            trace.append((k, pq, case))
    if region_fail is not None:
        return RegionTestResult(None, region_fail, trace, rewritten,
                                f"region condition fails at k={region_fail}", swapped)
    xi = max(xi_case1, xi_case2) if needs_case2 else xi_case1
    logxi = math.log(xi)
    worst, worst_val = None, -math.inf
    for k, pq, _ in trace:
        v = term_log_ratio(a, b, *pq)
        if v > worst_val:
            worst, worst_val = k, v
    if worst_val > logxi or not xi < 1:
        return RegionTestResult(None, worst, trace, rewritten, "per-term bound fails", swapped, worst_val)
    return RegionTestResult(xi, worst, trace, rewritten, "ok", swapped, worst_val)


# ---------------------------------------------------------------------------
# affine recursion for the two-map schedules


@dataclass
class AffineOrbitResult:
    z0: complex
    orbit_bound: float
    steps_checked: int
    escaped_at: int | None = None


def prop12_hypothesis(alpha, beta, kdeg: int) -> bool:
    a, b = abs(complex(alpha)), abs(complex(beta))
    return a**kdeg < b <= a ** (kdeg - 1)


def _check_prop12(alpha, beta, kdeg, check_hypothesis):
    if kdeg < 2:
        raise ValueError("kdeg must be at least 2")
    if check_hypothesis and not prop12_hypothesis(alpha, beta, kdeg):
        raise ValueError("hypothesis violated: need |alpha|^k < |beta| <= |alpha|^(k-1)")


def _parse_choices(choices):
    out = []
    for c in choices:
        c = str(c).upper()
        if c not in ("F", "G"):
            raise ValueError(f"choice must be F or G, got {c!r}")
        out.append(c)
    return out


def affine_step(choice: str, alpha, beta, kdeg: int, x):
    alpha, beta = complex(alpha), complex(beta)
    if choice == "F":
        return beta / alpha**kdeg * x
    return x / alpha ** (kdeg - 1) + 1.0


def affine_inverse_step(choice: str, alpha, beta, kdeg: int, x):
    alpha, beta = complex(alpha), complex(beta)
    if choice == "F":
        return alpha**kdeg / beta * x
    return alpha ** (kdeg - 1) * (x - 1.0)


def inverse_contraction(alpha, beta, kdeg: int) -> dict:
    a, b = abs(complex(alpha)), abs(complex(beta))
    return {"F": a**kdeg / b, "G": a ** (kdeg - 1)}


def prop12_analytic_bound(alpha, beta, kdeg: int) -> float:
    """Radius B of a disc mapped into itself by both inverse steps.

    With rho the larger contraction factor, rho (B + 1) <= B gives B = rho / (1 - rho).
    Infinite when an inverse step fails to contract (the hypothesis is violated).
    """
    rho = max(inverse_contraction(alpha, beta, kdeg).values())
    if not rho < 1:
        return math.inf
    return rho / (1.0 - rho)


def prop12_recursion(choices, alpha, beta, kdeg: int, z0: complex, N: int | None = None,
                     check_hypothesis: bool = True) -> AffineOrbitResult:
    """Iterate X_{2,n+1} = A_n(X_{2,n}) for N steps (choices cycle if shorter)."""
    _check_prop12(alpha, beta, kdeg, check_hypothesis)
    ch = _parse_choices(choices)
    N = len(ch) if N is None else N
    x = complex(z0)
    bound = abs(x)
    escaped = None
    for n in range(N):
        x = affine_step(ch[n % len(ch)], alpha, beta, kdeg, x)
        m = abs(x)
        if not math.isfinite(m):
            escaped = n + 1
            bound = math.inf
            break
        bound = max(bound, m)
    return AffineOrbitResult(complex(z0), bound, N if escaped is None else escaped, escaped)


def prop12_find_z0(choices, alpha, beta, kdeg: int, depth: int, anchor: complex = 0.0,
                   check_hypothesis: bool = True):
    """z0 = A_1^{-1} o ... o A_depth^{-1}(anchor) and a bound on its distance to the bounded orbit seed.

    Returns (z0, error_bound) with error_bound = prod(contraction) * (|anchor| + B).
    """
    _check_prop12(alpha, beta, kdeg, check_hypothesis)
    ch = _parse_choices(choices)
    if depth > len(ch):
        raise ValueError("depth exceeds the number of choices")
    rho = inverse_contraction(alpha, beta, kdeg)
    x = complex(anchor)
    log_prod = 0.0
    for n in range(depth - 1, -1, -1):
        x = affine_inverse_step(ch[n], alpha, beta, kdeg, x)
        log_prod += math.log(rho[ch[n]])
    err = math.exp(log_prod) * (abs(anchor) + prop12_analytic_bound(alpha, beta, kdeg))
    return x, err


# ---------------------------------------------------------------------------
# eta growth


@dataclass
class EtaGrowthReport:
    violations: int
    indices: list
    margins: list


def eta_growth_check(M_factor: float, s: MapSequence, n_hi: int) -> EtaGrowthReport:
    """Check |eta_n| < (M |eta_0|)^(d^n) for n <= n_hi, in log space.

    margins[n] = d^n log(M |eta_0|) - log|eta_n| (positive means satisfied).
    """
    if not s.is_eta:
        raise TypeError("eta growth needs an eta schedule")
    if not M_factor > 1:
        raise ValueError("M must exceed 1")
    base = math.log(M_factor) + s.eta(0).log_modulus
    if not base < 0:
        raise ValueError("need M |eta_0| < 1")
    margins, bad = [], []
    for n in range(n_hi + 1):
        m = float(s.d) ** n * base - s.eta(n).log_modulus
        margins.append(m)
        if not m > 0:
            bad.append(n)
    return EtaGrowthReport(len(bad), bad, margins)


# ---------------------------------------------------------------------------
# disjoint short domains


@dataclass
class DisjointReport:
    domains: int
    samples: int
    dominant_axis: int
    members: list
    double_memberships: int
    undecided: int
    undecided_fraction: float
    replay_failures: int
    witnesses: list = field(default_factory=list)


def domain_transform(k: int, i: int, R: float, dominant: int) -> M.Composite:
    """A_{3(i-1)R} o phi_i: phi_i swaps the dominant axis with axis i, then z_k is translated."""
    parts = []
    if i != dominant:
        parts.append(M.CoordinateSwap(k, dominant, i))
    parts.append(M.AffineTranslate(k, k, 3 * (i - 1) * R))
    return M.Composite(tuple(parts))


def domain_preimage(Z, k: int, i: int, R: float, dominant: int) -> np.ndarray:
    return domain_transform(k, i, R, dominant).inverse(as_batch(Z, k))


def _dichotomy(P, R: float, axis: int):
    """Closed polydisc of radius R, or axis strictly dominant beyond R."""
    A = np.abs(P)
    in_closed = np.all(A <= R, axis=1)
    others = np.delete(A, axis - 1, axis=1).max(axis=1)
    dominant = (A[:, axis - 1] > R) & (A[:, axis - 1] > others)
    return in_closed, dominant


def base_containment(base: MapSequence, R: float, samples: int, seed: int, p: ClassifyParams,
                     candidates=None):
    """Axis D with every sampled base member in closed V_R or int(V_D).

    Returns (axis, failures per axis, members checked).
    """
    rng = np.random.default_rng(seed)
    k = base.k
    # strata: the full box, and one stretched axis at a time over the radius-R box
    Z = uniform_polydisc(rng, samples, k, R)
    parts = np.array_split(np.arange(samples), k + 1)
    Z[parts[0]] = uniform_polydisc(rng, parts[0].size, k, 8 * R)
    for ax in range(k):
        Z[parts[ax + 1], ax] = uniform_polydisc(rng, parts[ax + 1].size, 1, 8 * R)[:, 0]
    members = Z[classify_points(base, Z, p).kind == ATTRACTED]
    if members.shape[0] == 0:
        raise RuntimeError("sampler failure: no base members found")
    candidates = candidates or range(1, base.k + 1)
    failures = {}
    for D in candidates:
        inside, dom = _dichotomy(members, R, D)
        failures[D] = int(np.sum(~(inside | dom)))
    good = [D for D in candidates if failures[D] == 0]
    if not good:
        D = min(failures, key=failures.get)
        inside, dom = _dichotomy(members, R, D)
        wit = members[~(inside | dom)][0]
        raise RuntimeError(f"base containment fails; witness {wit.tolist()}")
    return good[0], failures, members.shape[0]


def disjoint_shorts(base: MapSequence, R: float | None = None, samples: int = 10**5, seed: int = 0,
                    n_classify: int = 200, dominant_axis: int | None = None) -> DisjointReport:
    k = base.k
    if k < 3:
        raise ValueError("need k >= 3")
    R = default_radius(base) if R is None else R
    p = ClassifyParams(R, 0.5, min(n_classify, base.n_max))
    if dominant_axis is None:
        dominant_axis, _, _ = base_containment(base, R, samples, seed + 1, p)
    rng = np.random.default_rng(seed)
    ndom = k - 1
    # half global, half pushed forward from the base box into a random domain, so members are not rare
    n_glob = samples // 2
    Z = uniform_polydisc(rng, samples, k, 8 * R)
    which = rng.integers(1, ndom + 1, size=samples - n_glob)
    W = uniform_polydisc(rng, samples - n_glob, k, R)
    for i in range(1, ndom + 1):
        rows = which == i
        Z[n_glob:][rows] = domain_transform(k, i, R, dominant_axis).apply(W[rows])
    member = np.zeros((ndom, samples), dtype=bool)
    undecided = np.zeros(samples, dtype=bool)
    for i in range(1, ndom + 1):
        kinds = classify_points(base, domain_preimage(Z, k, i, R, dominant_axis), p).kind
        member[i - 1] = kinds == ATTRACTED
        undecided |= kinds == UNDECIDED
    counts = member.sum(axis=0)
    double = counts >= 2
    # replay the case analysis on each member
    replay_fail = 0
    for i in range(1, ndom + 1):
        Zi = Z[member[i - 1]]
        inside, dom = _dichotomy(domain_preimage(Zi, k, i, R, i), R, i)
        ok = inside | dom
        for j in range(1, ndom + 1):
            if j == i:
                continue
            in_j, dom_j = _dichotomy(domain_preimage(Zi, k, j, R, j), R, j)
            ok &= ~(in_j | dom_j)
        replay_fail += int(np.sum(~ok))
    return DisjointReport(ndom, samples, dominant_axis, [int(c) for c in member.sum(axis=1)],
                          int(double.sum()), int(undecided.sum()), float(undecided.mean()), replay_fail,
                          [Z[i] for i in np.nonzero(double)[0][:5]])


# ---------------------------------------------------------------------------
# variety avoidance


@dataclass(frozen=True)
class VarietySets:
    epsilon: float
    R: float
    k: int = 3

    def __post_init__(self):
        if self.k < 3:
            raise ValueError("need k >= 3")
        if not 0 < self.epsilon < 1.0 / self.R:
            raise ValueError("need 0 < epsilon < 1/R")

    @property
    def shift(self) -> M.AffineTranslate:
        """A_R: add 2R to z_2."""
        return M.AffineTranslate(self.k, 2, 2 * self.R)

    def contains(self, Z) -> np.ndarray:
        """Membership in A_eps u B_eps."""
        Z = as_batch(Z, self.k)
        head = np.abs(Z[:, :2]).max(axis=1)
        tail = np.abs(Z[:, 2:]).max(axis=1)
        return (head < self.epsilon) | (head < self.epsilon * tail)


def sample_variety_sets(rng: np.random.Generator, vs: VarietySets, n: int) -> np.ndarray:
    """Half from A_eps, half from B_eps; the tail scale is log-uniform over [1e-3, 1e3 R]."""
    k = vs.k
    scale = 10.0 ** rng.uniform(-3, math.log10(1e3 * vs.R), size=n)
    tail = uniform_polydisc(rng, n, k - 2, 1.0) * scale[:, None]
    # put one tail coordinate on its maximal circle so the scale is attained
    idx = rng.integers(0, k - 2, size=n)
    tail[np.arange(n), idx] = scale * np.exp(2j * np.pi * rng.random(n))
    in_a = np.arange(n) < n // 2
    head_r = np.where(in_a, vs.epsilon, vs.epsilon * scale)
    head = uniform_polydisc(rng, n, 2, 1.0) * head_r[:, None]
    return np.concatenate([head, tail], axis=1)


def variety_avoidance_check(vs: VarietySets, f: FiltrationSpec, samples: int = 10**4, seed: int = 0,
                            sampler=None):
    """Count points of A_eps u B_eps whose image under A_R is not in V+.

    Returns (violations, witnesses).
    """
    rng = np.random.default_rng(seed)
    Z = (sampler or sample_variety_sets)(rng, vs, samples)
    if not np.all(vs.contains(Z)):
        raise ValueError("sampler produced points outside A_eps u B_eps")
    codes, _ = classify_filtration_batch(vs.shift.apply(Z), f)
    bad = codes != 1
    return int(bad.sum()), Z[bad][:5]


def basin_avoids_image(s: MapSequence, vs: VarietySets, p: ClassifyParams, samples: int = 1000, seed: int = 0):
    """Count basin members lying in A_R(A_eps u B_eps). Returns (landings, members checked)."""
    rng = np.random.default_rng(seed)
    members = []
    got, tries = 0, 0
    while got < samples:
        if tries > 10**7:
            raise RuntimeError("sampler failure: too few basin members")
        Z = uniform_polydisc(rng, 10000, s.k, p.R)
        tries += Z.shape[0]
        hit = Z[classify_points(s, Z, p).kind == ATTRACTED]
        members.append(hit)
        got += hit.shape[0]
    Zm = np.concatenate(members)[:samples]
    landed = vs.contains(vs.shift.inverse(Zm))
    return int(landed.sum()), Zm.shape[0]


def find_linear_map(k: int, epsilon: float, seed: int = 0, tries: int = 2000, probes: int = 256):
    """Random search for L with L({z1 = z2 = 0}) inside A_eps u B_eps.

    Candidates are identity plus a random perturbation whose size shrinks with
    each try.  The variety is a linear subspace, so testing the ratio
    |(Lv)'| / |(Lv)''| on random unit combinations of its basis suffices up to
    sampling.  Returns (matrix, worst ratio observed).
    """
    if k < 3:
        raise ValueError("need k >= 3")
    rng = np.random.default_rng(seed)
    basis = np.eye(k, dtype=np.complex128)[:, 2:]
    coeff = rng.normal(size=(probes, k - 2)) + 1j * rng.normal(size=(probes, k - 2))
    V = coeff @ basis.T
    for t in range(tries):
        size = 2.0 * 0.99**t
        L = np.eye(k) + size * (rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k)))
        try:
            M.Linear(L)
        except ValueError:
            continue
        W = V @ L.T
        ratio = float(np.max(np.abs(W[:, :2]).max(axis=1) / np.abs(W[:, 2:]).max(axis=1)))
        if ratio < epsilon:
            return L, ratio
    raise RuntimeError("no suitable linear map found")


# ---------------------------------------------------------------------------
# Fatou-Bieberbach domain inside the short domain


@dataclass
class InclusionReport:
    checked: int
    strict_violations: int
    equal_cases: int
    unconverged: int
    max_excess: float


def fb_inside_short(a: float, k: int = 3, d: int = 2, samples: int = 1000, seed: int = 0,
                    tol: float = 1e-6, n_max: int = 60) -> InclusionReport:
    """Scale attracted points of the autonomous map (eta = a) by a and check psi < log a.

    psi is the shifted-tower potential.  Values within tol of log a count as equal.
    """
    if not 0 < a < 1:
        raise ValueError("a must lie in (0,1)")
    if d != 2:
        raise ValueError("the shifted tower needs d = 2")
    auto = MapSequence(EtaSchedule(k, d, Custom((a,) * (n_max + 1))), n_max)
    p = ClassifyParams(max(2.0, 1.0 + a + 0.1), 0.5 if a <= 0.5 else (1 - a) * 0.99, n_max)
    rng = np.random.default_rng(seed)
    chunks, got = [], 0
    while got < samples:
        Z = uniform_polydisc(rng, 10000, k, p.R)
        hit = Z[classify_points(auto, Z, p).kind == ATTRACTED]
        chunks.append(hit)
        got += hit.shape[0]
    Zm = np.concatenate(chunks)[:samples]
    target = MapSequence(EtaSchedule(k, 2, ShiftedTower(a)), n_max)
    pb = psi_limit_batch(target, M.Scaling(k, LogScalar.from_complex(a)).apply(Zm), 1e-12, n_max)
    excess = pb.value - math.log(a)
    conv = pb.converged
    return InclusionReport(Zm.shape[0], int(np.sum(conv & (excess > tol))),
                           int(np.sum(conv & (np.abs(excess) <= tol))), int(np.sum(~conv)),
                           float(np.max(excess)))


__all__ = [n for n in dir() if not n.startswith("_")]
