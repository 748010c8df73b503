"""Command-line entry point: one config file in, rasters / tables / manifest out.

Exit codes: 0 when every checked invariant holds, 1 when violations were
found (listed in violations.csv), 2 on configuration or runtime errors.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import basin as B
from . import boundary as BD
from . import maps as M
from . import potentials as P
from . import theorems as T
from .config import ConfigError, RunConfig, parse_config
from .geometry import FiltrationSpec
from .potentials import fmt
from .sequences import autonomous, power_tower, shifted_tower, uniform_polydisc

EXIT_OK, EXIT_VIOLATIONS, EXIT_ERROR = 0, 1, 2


@dataclass
class Outcome:
    outputs: dict = field(default_factory=dict)  # file name -> text
    results: dict = field(default_factory=dict)
    violations: int = 0
    violation_header: list = field(default_factory=lambda: ["kind", "detail"])
    violation_rows: list = field(default_factory=list)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([fmt(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def _point_text(z) -> str:
    return " ".join(f"{fmt(c.real)}{'+' if c.imag >= 0 else '-'}{fmt(abs(c.imag))}j" for c in np.asarray(z))


def _clean(x):
    """JSON-safe copy: non-finite floats become strings, numpy scalars become Python ones."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_clean(x.real), _clean(x.imag)]
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def build_sequence(cfg: RunConfig):
    sq = cfg.sequence
    if sq["kind"] == "power_tower":
        return power_tower(sq["a"], sq["k"], sq["d"], sq["n_max"])
    if sq["kind"] == "shifted_tower":
        return shifted_tower(sq["a"], sq["k"], sq["n_max"])
    return autonomous(M.ShiftLike(sq["k"], sq["nu"], sq["d"], sq["delta"]), sq["n_max"])


def _need_eta(s, what):
    if not s.is_eta:
        raise ValueError(f"{what} needs kind = power_tower or shifted_tower")


# ---------------------------------------------------------------------------
# commands


def cmd_basin(cfg: RunConfig) -> Outcome:
    s = build_sequence(cfg)
    pr = cfg.parameters
    R = pr["R"] if pr["R"] is not None else B.default_radius(s)
    p = B.ClassifyParams(R, pr["c_in"], min(pr["classify_n_max"], s.n_max), pr["margin"])
    g = cfg.grid
    grid = B.GridSpec(np.array(g["base"]), np.array(g["dir_u"]), np.array(g["dir_v"]), g["width"], g["height"],
                      tuple(g["window"]))
    r = B.render_slice(s, grid, p, pr["also_psi"], pr["psi_tol"], cfg.seed)
    out = Outcome({"basin.pgm": r.to_pgm()})
    out.results = {"fractions": r.fractions(), "R": R}
    if pr["also_psi"]:
        out.outputs["psi.csv"] = r.psi_csv()
        agree, compared = B.sign_coherence(r, pr["margin"])
        ratio = agree / compared if compared else 1.0
        out.results.update(coherence_agree=agree, coherence_compared=compared, coherence=ratio)
        if ratio < pr["coherence_min"]:
            psi = r.psi_values
            decided = (r.kind != B.UNDECIDED) & r.psi_converged & (np.abs(psi) > pr["margin"])
            good = ((psi < 0) & (r.kind == B.ATTRACTED)) | ((psi > 0) & (r.kind == B.ESCAPED))
            bad = np.argwhere(decided & ~good)
            out.violations = int(bad.shape[0])
            out.violation_header = ["row", "col", "class", "psi"]
            out.violation_rows = [[int(i), int(j), B.KIND_NAMES[int(r.kind[i, j])], float(psi[i, j])] for i, j in bad]
    return out


def cmd_potential(cfg: RunConfig) -> Outcome:
    s = build_sequence(cfg)
    _need_eta(s, "potential")
    pr = cfg.parameters
    rng = np.random.default_rng(cfg.seed)
    n_hi = min(pr["n_hi"], s.n_max)
    Z = uniform_polydisc(rng, pr["samples"], s.k, pr["radius"])
    traj = P.psi_trajectory(s, Z, n_hi)
    env = traj + np.array([P.envelope_tail(s.d, n) for n in range(n_hi + 1)])
    rise = np.diff(env, axis=1)
    bad = np.argwhere(rise > pr["envelope_tol"])
    out = Outcome({"psi.csv": P.potential_csv(Z, P.psi_limit_batch(s, Z, pr["psi_tol"]))})
    rows = [["envelope", f"sample {i} level {n}: rise {fmt(rise[i, n])}"] for i, n in bad]
    centers = uniform_polydisc(rng, pr["subaverage_points"], s.k, pr["radius"])
    dirs = uniform_polydisc(rng, pr["subaverage_points"], s.k, 1.0)
    ev = P.psi_evaluator(s, pr["psi_tol"])
    margins = []
    for c, v in zip(centers, dirs):
        rep = P.subaverage_check(ev, c, v, pr["subaverage_radius"], pr["circle_samples"])
        margins.append(rep.margin)
        if rep.margin < -pr["subaverage_tol"]:
            rows.append(["subaverage", f"center {_point_text(c)}: margin {fmt(rep.margin)}"])
    out.outputs["subaverage.csv"] = csv_text(["index", "margin"], [[i, float(m)] for i, m in enumerate(margins)])
    out.results = {"envelope_violations": int(bad.shape[0]), "max_envelope_rise": float(rise.max()),
                   "min_subaverage_margin": float(min(margins)), "n_hi": n_hi}
    out.violations = len(rows)
    out.violation_rows = rows
    return out


def cmd_green(cfg: RunConfig) -> Outcome:
    sq = cfg.sequence
    if sq["kind"] != "shift_like":
        raise ValueError("green needs kind = shift_like")
    S = M.ShiftLike(sq["k"], sq["nu"], sq["d"], sq["delta"])
    pr = cfg.parameters
    rng = np.random.default_rng(cfg.seed)
    Z = P.sample_shift_plus_region(rng, S, pr["R"], pr["samples"])
    block, counts = P.select_green_block(S, Z, pr["n_hi"])
    out = Outcome(results={"block": block, "violations_per_block": counts})
    if block is None:
        out.violations = min(counts.values())
        out.violation_rows = [["green_growth", f"block {b}: {c} failing samples"] for b, c in counts.items()]
    else:
        batch = P.green_plus_batch(S, Z, P.GreenParams(block))
        out.outputs["green.csv"] = P.potential_csv(Z, batch)
    return out


def cmd_filtration(cfg: RunConfig) -> Outcome:
    s = build_sequence(cfg)
    pr = cfg.parameters
    if pr["R"] is not None:
        R = pr["R"]
    elif s.is_eta:
        R = 1.0 + max(s.eta(n).modulus for n in range(s.n_max + 1)) + 0.1
    else:
        R = B.default_radius(s)
    rep = B.filtration_invariance_check(s, R, pr["samples"], pr["steps"], cfg.seed)
    out = Outcome(results={"R": R, "step_violations": rep.step_violations, "orbit_violations": rep.orbit_violations})
    out.violations = rep.step_violations + rep.orbit_violations
    out.violation_rows = [["filtration", _point_text(z)] for z in rep.witnesses]
    return out


def cmd_region(cfg: RunConfig) -> Outcome:
    pr = cfg.parameters
    L = pr["length"]
    p = [pr["p"][i % len(pr["p"])] for i in range(L)]
    q = [pr["q"][i % len(pr["q"])] for i in range(L)]
    res = T.region_test(p, q, pr["alpha"], pr["beta"], pr["r"], pr["M"])
    out = Outcome(results={"xi": res.xi, "message": res.message, "worst_k": res.worst_k, "swapped": res.swapped,
                           "max_term_log_ratio": res.max_term})
    out.outputs["rewritten.csv"] = csv_text(["k", "p", "q", "case"], [[k, a, b, c] for k, (a, b), c in res.case_trace])
    if res.message not in ("ok", T.ALL_OF_C2):
        out.violations = 1
        out.violation_rows = [["region", res.message]]
    return out


def cmd_prop12(cfg: RunConfig) -> Outcome:
    pr = cfg.parameters
    rng = np.random.default_rng(cfg.seed)
    bound = T.prop12_analytic_bound(pr["alpha"], pr["beta"], pr["kdeg"])
    rows, table = [], []
    for i in range(pr["schedules"]):
        choices = ["F" if x else "G" for x in rng.integers(0, 2, size=pr["schedule_length"])]
        z0, err = T.prop12_find_z0(choices, pr["alpha"], pr["beta"], pr["kdeg"], min(pr["depth"], len(choices)))
        res = T.prop12_recursion(choices, pr["alpha"], pr["beta"], pr["kdeg"], z0, pr["N"])
        table.append([i, "".join(choices), float(z0.real), float(z0.imag), float(err), float(res.orbit_bound),
                      res.escaped_at if res.escaped_at is not None else ""])
        if not res.orbit_bound <= pr["bound_factor"] * bound:
            rows.append(["orbit", f"schedule {i}: sup {fmt(res.orbit_bound)}, escaped at {res.escaped_at}"])
    out = Outcome({"orbits.csv": csv_text(["schedule", "choices", "z0_re", "z0_im", "z0_error", "orbit_sup",
                                           "escaped_at"], table)})
    out.results = {"analytic_bound": bound}
    out.violations, out.violation_rows = len(rows), rows
    return out


def cmd_disjoint(cfg: RunConfig) -> Outcome:
    s = build_sequence(cfg)
    pr = cfg.parameters
    rep = T.disjoint_shorts(s, pr["R"], pr["samples"], cfg.seed, pr["n_classify"])
    out = Outcome(results={"domains": rep.domains, "dominant_axis": rep.dominant_axis, "members": rep.members,
                           "double_memberships": rep.double_memberships, "undecided": rep.undecided,
                           "undecided_fraction": rep.undecided_fraction, "replay_failures": rep.replay_failures})
    rows = [["double", _point_text(z)] for z in rep.witnesses]
    if rep.replay_failures:
        rows.append(["replay", f"{rep.replay_failures} members fail the case analysis"])
    if rep.undecided_fraction >= pr["undecided_max"]:
        rows.append(["undecided", f"fraction {fmt(rep.undecided_fraction)}"])
    out.violations = rep.double_memberships + rep.replay_failures + int(rep.undecided_fraction >= pr["undecided_max"])
    out.violation_rows = rows
    return out


def cmd_avoid(cfg: RunConfig) -> Outcome:
    s = build_sequence(cfg)
    pr = cfg.parameters
    k = cfg.sequence["k"]
    eps = pr["epsilon"] if pr["epsilon"] is not None else 0.5 / pr["R"]
    vs = T.VarietySets(eps, pr["R"], k)
    bad, wit = T.variety_avoidance_check(vs, FiltrationSpec.standard(k, pr["R"]), pr["samples"], cfg.seed)
    landed, checked = T.basin_avoids_image(s, vs, B.default_params(s), pr["basin_samples"], cfg.seed + 1)
    out = Outcome(results={"epsilon": eps, "filtration_violations": bad, "basin_landings": landed,
                           "basin_checked": checked})
    out.violation_rows = [["not_in_plus", _point_text(z)] for z in wit]
    if landed:
        out.violation_rows.append(["basin_landing", f"{landed} members"])
    out.violations = bad + landed
    return out


def cmd_fb(cfg: RunConfig) -> Outcome:
    sq, pr = cfg.sequence, cfg.parameters
    rep = T.fb_inside_short(sq["a"], sq["k"], 2, pr["samples"], cfg.seed, pr["tol"], sq["n_max"])
    out = Outcome(results={"checked": rep.checked, "strict_violations": rep.strict_violations,
                           "equal_cases": rep.equal_cases, "unconverged": rep.unconverged,
                           "max_excess": rep.max_excess})
    out.violations = rep.strict_violations + rep.unconverged
    if out.violations:
        out.violation_rows = [["inclusion", f"{rep.strict_violations} strict, {rep.unconverged} unconverged"]]
    return out


def cmd_eta(cfg: RunConfig) -> Outcome:
    s = build_sequence(cfg)
    _need_eta(s, "eta-check")
    pr = cfg.parameters
    rep = T.eta_growth_check(pr["M"], s, pr["n_hi"])
    out = Outcome({"margins.csv": csv_text(["n", "margin"], [[n, float(m)] for n, m in enumerate(rep.margins)])})
    out.results = {"violations": rep.violations, "min_margin": float(min(rep.margins))}
    out.violations = rep.violations
    out.violation_rows = [["eta_growth", f"n = {n}"] for n in rep.indices]
    return out


def cmd_boundary(cfg: RunConfig) -> Outcome:
    pr = cfg.parameters
    k = cfg.sequence["k"]
    eps, R = pr["eps"], pr["R"]
    alpha = pr["alpha"] if pr["alpha"] is not None else BD.alpha0_for(eps, R)
    rep = BD.alpha0_grid_check(eps, R, alpha, pr["n_xi"], pr["n_w"])
    XI, W = BD.xi_w_grid(R, pr["n_xi"], pr["n_w"])
    resid = BD.phi_alpha_residual(XI, W, alpha)
    zero = BD.phi_alpha(XI, W, 0.0)
    rows = []
    if resid.max() >= 1e-12:
        rows.append(["residual", f"max {fmt(resid.max())}"])
    if not np.all(zero == 1.0):
        rows.append(["alpha_zero", "phi_0 differs from 1"])
    if not rep.passed:
        rows.append(["c0_bound", f"sup |phi - 1| = {fmt(rep.sup_dev)}"])
    face = BD.FaceGrid(pr["face"], R, k, pr["angular_samples"])
    s = BD.stage_sequence([alpha], k, extend=False)
    g = BD.graph_pullback(s, -1, 0, face)
    xi, base = face.ray_bases()
    gap = float(np.max(np.abs(g.values.ravel() - BD.phi_alpha(xi, base[:, pr["face"] - 2], alpha))))
    if gap > 1e-9:
        rows.append(["pullback", f"max gap to closed form {fmt(gap)}"])
    out = Outcome({"graph.csv": g.to_csv()})
    out.results = {"alpha": alpha, "sup_dev": rep.sup_dev, "min_phi": rep.min_phi, "max_phi": rep.max_phi,
                   "sup_dtheta": rep.sup_dtheta, "max_residual": float(resid.max()), "pullback_gap": gap,
                   "continuity_modulus": g.continuity_modulus}
    out.violations, out.violation_rows = len(rows), rows
    return out


def _log_stage(msg: str):
    print(msg, file=sys.stderr)


def cmd_stagewise(cfg: RunConfig) -> Outcome:
    pr = cfg.parameters
    k = cfg.sequence["k"]
    recs = BD.stagewise_construct(k, pr["R"], pr["eps"], pr["N"], pr["angular_samples"], log=_log_stage)
    rep = BD.sandwich_check(recs, k, pr["R"], pr["eps"], pr["samples"], cfg.seed)
    out = Outcome({"stages.json": json.dumps(_clean([r.summary() for r in recs]), indent=2, sort_keys=True) + "\n"})
    for j, g in recs[-1].graphs.items():
        out.outputs[f"stage{recs[-1].n}_face{j}.csv"] = g.to_csv()
    out.results = {k2: v for k2, v in rep.__dict__.items() if k2 != "witnesses"}
    rows = [["sandwich", _point_text(z)] for z in rep.witnesses]
    drift_bad = rep.cumulative_drift > rep.drift_bound
    if drift_bad:
        rows.append(["drift", f"{fmt(rep.cumulative_drift)} > {fmt(rep.drift_bound)}"])
    out.violations = rep.inner_violations + rep.outer_violations + int(drift_bad)
    out.violation_rows = rows
    return out


def cmd_levi(cfg: RunConfig) -> Outcome:
    pr = cfg.parameters
    k = cfg.sequence["k"]
    recs = BD.stagewise_construct(k, pr["R"], pr["eps"], pr["N"], pr["angular_samples"], log=_log_stage)
    rep = BD.defining_function_checks(recs[-1], pr["samples"], cfg.seed, pr["R"])
    out = Outcome({
        "levi.csv": csv_text(["gradient_norm", "levi_min", "normal_hessian"],
                             [[float(a), float(b), float(c)] for a, b, c in
                              zip(rep.gradient_norms, rep.levi_min_eigen, rep.normal_hessian)]),
        "wedge.csv": csv_text(["wedge_min_singular"], [[float(w)] for w in rep.wedge_gram_min]),
    })
    out.results = {"min_gradient_norm": float(rep.gradient_norms.min()),
                   "max_gradient_norm": float(rep.gradient_norms.max()),
                   "min_levi": float(rep.levi_min_eigen.min()), "min_normal_hessian": float(rep.normal_hessian.min()),
                   "min_wedge": float(rep.wedge_gram_min.min()) if rep.wedge_gram_min.size else None,
                   "skipped": rep.skipped, "degenerate_corners": rep.degenerate_corners}
    out.violations = rep.degenerate_corners
    if out.violations:
        out.violation_rows = [["wedge", f"{rep.degenerate_corners} degenerate corners"]]
    return out


COMMAND_TABLE = {"basin": cmd_basin, "potential": cmd_potential, "green": cmd_green, "filtration": cmd_filtration,
                 "region-test": cmd_region, "prop12": cmd_prop12, "disjoint": cmd_disjoint,
                 "avoid-variety": cmd_avoid, "fb-inclusion": cmd_fb, "eta-check": cmd_eta,
                 "boundary": cmd_boundary, "stagewise": cmd_stagewise, "levi": cmd_levi}


# ---------------------------------------------------------------------------
# running and artifacts


def _write(path: str, text: str) -> str:
    data = text.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(data)
    return hashlib.sha256(data).hexdigest()


def run(cfg: RunConfig) -> int:
    """Execute a validated config, writing outputs, violations.csv and manifest.json to cfg.out_dir."""
    t0 = time.perf_counter()
    outcome = COMMAND_TABLE[cfg.command](cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    files = dict(outcome.outputs)
    files["config.ini"] = cfg.to_text(include_out_dir=False)
    if outcome.violations:
        files["violations.csv"] = csv_text(outcome.violation_header, outcome.violation_rows)
    stale = os.path.join(cfg.out_dir, "violations.csv")
    if not outcome.violations and os.path.exists(stale):
        os.remove(stale)
    digests = {name: _write(os.path.join(cfg.out_dir, name), text) for name, text in sorted(files.items())}
    code = EXIT_VIOLATIONS if outcome.violations else EXIT_OK
    manifest = {"tool": "shortck", "version": __version__, "config": cfg.resolved(), "outputs": digests,
                "violations": outcome.violations, "results": outcome.results, "exit_code": code}
    _write(os.path.join(cfg.out_dir, "manifest.json"),
           json.dumps(_clean(manifest), indent=2, sort_keys=True) + "\n")
    wall = time.perf_counter() - t0
    # wall-clock lives outside the manifest so that manifests stay byte-stable
    _write(os.path.join(cfg.out_dir, "timing.json"), json.dumps({"wall_clock_seconds": wall}) + "\n")
    print(f"{cfg.command}: {outcome.violations} violations, {wall:.2f}s, outputs in {cfg.out_dir}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="shortck", description="Numerical checks for short C^k basins.")
    ap.add_argument("--config", help="INI run configuration")
    ap.add_argument("--command", help="run this command with default settings (when no config is given)")
    ap.add_argument("--seed", help="unsigned 64-bit seed, overrides the config")
    ap.add_argument("--out-dir", help="output directory, overrides the config")
    ap.add_argument("--threads", help="worker threads (n or auto); results do not depend on it")
    args = ap.parse_args(argv)
    try:
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        elif args.command:
            text = f"[run]\ncommand = {args.command}\n"
        else:
            raise ConfigError("need --config or --command")
        overrides = []
        if args.seed is not None:
            overrides.append(("seed", args.seed))
        if args.out_dir is not None:
            overrides.append(("out_dir", args.out_dir))
        if args.threads is not None:
            overrides.append(("threads", args.threads))
        cfg = parse_config(text)
        if overrides:
            cfg = parse_config(_override(cfg.to_text(), overrides))
        return run(cfg)
    except (ConfigError, ValueError, TypeError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _override(text: str, pairs) -> str:
    lines = text.splitlines()
    for key, value in pairs:
        for i, line in enumerate(lines):
            if line.startswith(f"{key} ="):
                lines[i] = f"{key} = {value}"
    return "\n".join(lines) + "\n"


if __name__ == "__main__":
    sys.exit(main())
