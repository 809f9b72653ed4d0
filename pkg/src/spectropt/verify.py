"""Registry of numerical checks run by ``spectropt verify``.

Every check returns a verdict dict with ``passed`` and the raw numbers it
compared. Checks belong to groups so the suite can be filtered; oracle
constants can be overridden to confirm that a wrong reference value is caught.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import ConfigError
from .gamma import (
    RATIO_SLACK,
    RESOLVENT_C,
    TRUNCATION_C,
    Functional,
    cc_classify,
    halfspace_cut_check,
    resolvent_distance,
    resolvent_ratio,
    subsolution_audit,
    truncation_calibration_cases,
    truncation_distance_check,
)
from .grid import GeneralizedPotential, GridSpec, ScalarField, join_mask, rescale_field, rescale_potential, wedge
from .optimize import (
    PenaltyConfig,
    fixed_point_residual,
    halfline_mass_profile,
    isoperimetric_ratio,
    merit,
    optimize_lambda1_potential,
    optimize_lambdak_potential,
    optimize_spectral_torsion,
    radial_monotonicity_defect,
    spectral_torsion_gradient,
    spectral_torsion_objective,
    vanishing_point,
)
from .shapes import constant, disk, ellipse, interval, oscillator, random_potential, rectangle, square
from .spectrum import LINF_SLACK, eigen_domination_check, eigen_linf_check, eigen_scaling_check, eigs, spectral_gap_check
from .torsion import levelset_estimate_check, linf_torsion_bound_check, sup_norm_ratio, torsion_function

J01 = 2.404825557695773

ORACLES = {
    "interval_lambda": [math.pi**2 / 4, math.pi**2],
    "disk_lambda1": J01**2,
    "interval_torsion": 1.0 / 3.0,
    "disk_torsion": math.pi / 16,
    "oscillator_lambda": [1.0, 3.0, 5.0, 7.0],
    "disk_merit": J01**2 * math.sqrt(math.pi / 16),
    "linf_const": math.exp(1.0 / (8.0 * math.pi)),
    "truncation_C": TRUNCATION_C,
    "resolvent_C": RESOLVENT_C,
    # k = 1, p = 1/2, d = 1 optimum on GridSpec(1, 6, 2047)
    "fk_lambda1": 5.196043912810307,
}


@dataclass(frozen=True)
class Check:
    name: str
    groups: tuple
    run: Callable[[dict], dict]


def _rel(a, b):
    return abs(a - b) / abs(b)


# --- analytic oracles ------------------------------------------------------


def check_oracle_interval(o):
    lam = eigs(GeneralizedPotential.free(GridSpec(1, 1.0, 255)), 2).eigenvalues
    errs = [_rel(a, b) for a, b in zip(lam, o["interval_lambda"])]
    return {"passed": max(errs) <= 1e-3, "computed": list(lam), "oracle": o["interval_lambda"], "rel_err": errs, "tol": 1e-3}


def check_oracle_disk(o):
    lam = eigs(disk(GridSpec(2, 1.25, 127), 1.0), 1).eigenvalues[0]
    err = _rel(lam, o["disk_lambda1"])
    return {"passed": err <= 5e-3, "computed": lam, "oracle": o["disk_lambda1"], "rel_err": err, "tol": 5e-3}


def check_oracle_torsion(o):
    Pi = torsion_function(GeneralizedPotential.free(GridSpec(1, 1.0, 255))).P
    Pd = torsion_function(disk(GridSpec(2, 1.25, 127), 1.0)).P
    ei, ed = _rel(Pi, o["interval_torsion"]), _rel(Pd, o["disk_torsion"])
    return {
        "passed": ei <= 1e-3 and ed <= 1e-2,
        "interval": {"computed": Pi, "oracle": o["interval_torsion"], "rel_err": ei, "tol": 1e-3},
        "disk": {"computed": Pd, "oracle": o["disk_torsion"], "rel_err": ed, "tol": 1e-2},
    }


def check_oracle_oscillator(o):
    lam = eigs(oscillator(GridSpec(1, 8.0, 511)), 4).eigenvalues
    errs = [_rel(a, b) for a, b in zip(lam, o["oscillator_lambda"])]
    return {"passed": max(errs) <= 5e-3, "computed": list(lam), "oracle": o["oscillator_lambda"], "rel_err": errs, "tol": 5e-3}


# --- scaling identities ----------------------------------------------------


def _scaling_family():
    g1, g2 = GridSpec(1, 2.0, 127), GridSpec(2, 2.0, 63)
    return [
        ("interval", interval(g1, 1.0)),
        ("disk", disk(g2, 1.0)),
        ("oscillator", oscillator(g1, 1.0)),
        ("random-1d", random_potential(g1, 3)),
        ("random-2d", random_potential(g2, 5)),
    ]


def check_scaling_eigenvalues(o):
    errs = {name: eigen_scaling_check(pot, 3, 2) for name, pot in _scaling_family()}
    return {"passed": max(errs.values()) <= 1e-6, "max_rel_err": errs, "t": 2, "tol": 1e-6}


def check_scaling_torsion(o):
    out = {}
    for name, pot in _scaling_family():
        d = pot.grid.d
        rep, rep_t = torsion_function(pot), torsion_function(rescale_potential(pot, 2))
        eP = _rel(rep_t.P, 2 ** (d + 2) * rep.P)
        # w_t(x) = t^2 w(x / t) read on the scaled grid
        ref = rescale_field(rep.w, 2, power=2.0)
        ew = float(np.max(np.abs(rep_t.w.values - ref.values)) / np.max(np.abs(ref.values)))
        out[name] = {"P_rel_err": eP, "w_rel_err": ew}
    worst = max(max(v.values()) for v in out.values())
    return {"passed": worst <= 1e-6, "cases": out, "t": 2, "tol": 1e-6}


def check_scaling_mass(o):
    out = {}
    for name, pot in _scaling_family():
        if np.any(pot.vfin[~pot.inf_mask] == 0):
            pot = pot.with_vfin(pot.vfin + 0.5)
        d = pot.grid.d
        for p in (0.5, 1.5):
            M, Mt = pot.inverse_power_mass(p), rescale_potential(pot, 2).inverse_power_mass(p)
            out[f"{name}/p={p}"] = _rel(Mt, 2 ** (2 * p + d) * M)
    return {"passed": max(out.values()) <= 1e-6, "rel_err": out, "t": 2, "tol": 1e-6}


def check_scaling_merit(o):
    out = {}
    for name, pot in _scaling_family():
        pot = pot.with_vfin(pot.vfin + 0.5)
        for p in (None, 0.5):
            a, b = merit(pot, 2, p), merit(rescale_potential(pot, 2), 2, p)
            out[f"{name}/{'torsion' if p is None else 'mass'}"] = _rel(b, a)
    return {"passed": max(out.values()) <= 1e-6, "rel_err": out, "tol": 1e-6}


# --- explicit bounds -------------------------------------------------------


def _standard_family():
    fam = [
        ("interval", GeneralizedPotential.free(GridSpec(1, 1.0, 255))),
        ("disk", disk(GridSpec(2, 1.25, 63), 1.0)),
        ("oscillator", oscillator(GridSpec(1, 8.0, 511))),
    ]
    for s in range(10):
        grid = GridSpec(1, 3.0, 255) if s % 2 else GridSpec(2, 3.0, 47)
        fam.append((f"random-{s}", random_potential(grid, 100 + s)))
    return fam


def check_eigen_linf(o):
    rows, ok = [], True
    for name, pot in _standard_family():
        spec = eigs(pot, 4)
        for j, lhs, _ in eigen_linf_check(spec):
            rhs = o["linf_const"] * spec.eigenvalues[j - 1] ** (pot.grid.d / 4)
            good = lhs <= rhs * (1 + LINF_SLACK)
            ok &= bool(good)
            rows.append({"potential": name, "j": j, "lhs": lhs, "rhs": rhs, "ratio": lhs / rhs})
    return {"passed": ok, "slack": LINF_SLACK, "max_ratio": max(r["ratio"] for r in rows), "rows": rows}


def check_eigen_domination(o):
    rows = {}
    for name, pot in _standard_family():
        rows[name] = eigen_domination_check(pot, eigs(pot, 4))
    worst = max(max(v) for v in rows.values())
    return {"passed": worst <= 1 + LINF_SLACK, "max_ratio": worst, "ratios": rows, "slack": LINF_SLACK}


def check_torsion_linf(o):
    grid = GridSpec(2, 2.5, 127)
    ratios = {}
    for R in (0.5, 1.0, 2.0):
        lhs, rhs = linf_torsion_bound_check(torsion_function(disk(grid, R)).w)
        ratios[R] = lhs / rhs
    vals = list(ratios.values())
    spread = (max(vals) - min(vals)) / min(vals)
    return {"passed": spread <= 1e-2, "ratios": {str(k): v for k, v in ratios.items()}, "spread": spread, "tol": 1e-2}


def check_sup_norm_ratio(o):
    one = lambda g: ScalarField(g, np.ones(g.shape))  # noqa: E731
    grid = GridSpec(2, 2.5, 63)
    C = max(sup_norm_ratio(disk(grid, R), one(grid)) for R in (0.5, 1.0, 2.0))
    ratios = []
    for s in range(10):
        g = GridSpec(1, 3.0, 255) if s % 2 else GridSpec(2, 3.0, 47)
        pot = random_potential(g, 200 + s)
        f = np.abs(random_potential(g, 300 + s, masked=False).vfin)
        ratios.append(sup_norm_ratio(pot, ScalarField(g, f)))
    return {"passed": max(ratios) <= RATIO_SLACK * C, "C_disk": C, "ratios": ratios, "slack": RATIO_SLACK}


def check_levelset_stability(o):
    Cs = {}
    for n in (63, 127, 255):
        grid = GridSpec(2, 1.25, n)
        w = torsion_function(disk(grid, 1.0)).w
        Cs[n] = levelset_estimate_check(w, ScalarField(grid, np.ones(grid.shape)), math.inf)["C"]
    ref = Cs[255]
    spread = max(abs(c - ref) / ref for c in Cs.values())
    return {"passed": spread <= 0.1, "C": {str(k): v for k, v in Cs.items()}, "spread": spread, "tol": 0.1}


# --- inequality suite ------------------------------------------------------


def spectral_gap_pairs():
    g1, g2 = GridSpec(1, 2.0, 255), GridSpec(2, 2.0, 47)
    iv, dk = interval(g1, 1.0), disk(g2, 1.5)
    osc = oscillator(g1, 1.0)
    rnd = random_potential(g2, 7, masked=False)
    bump2 = np.exp(-(g2.radius() ** 2) / 0.2)
    return [
        ("interval v B_0.8", iv, join_mask(iv, g1.ball(0.8)), 1),
        ("interval + 0.1", iv, iv.with_vfin(iv.vfin + 0.1), 2),
        ("interval v B_0.5", iv, join_mask(iv, g1.ball(0.5)), 3),
        ("disk v B_1.0", dk, join_mask(dk, g2.ball(1.0)), 1),
        ("disk + bump", dk, dk.with_vfin(dk.vfin + 5 * bump2), 2),
        ("disk v cut", dk, join_mask(dk, g2.coords()[0] < 0.7), 3),
        ("oscillator + 1", osc, osc.with_vfin(osc.vfin + 1.0), 2),
        ("oscillator v B_2", osc, join_mask(osc, g1.ball(2.0)), 1),
        ("random + 2", rnd, rnd.with_vfin(rnd.vfin + 2.0), 2),
        ("identity", dk, dk, 2),
    ]


def check_spectral_gap(o):
    rows, ok = [], True
    for name, mu, nu, k in spectral_gap_pairs():
        lhs, rhs = spectral_gap_check(mu, nu, k)
        ok &= lhs <= rhs + 1e-10
        rows.append({"pair": name, "k": k, "lhs": lhs, "rhs": rhs})
    return {"passed": bool(ok), "rows": rows}


def halfspace_cuts():
    gd, g8, g1 = GridSpec(2, 1.5, 63), GridSpec(2, 8.0, 63), GridSpec(1, 2.0, 255)
    dk, flat = disk(gd, 1.0), constant(g8, 1.0)
    osc, rnd = oscillator(GridSpec(2, 4.0, 63), 1.0), random_potential(GridSpec(2, 3.0, 47), 11, masked=False)
    iv = interval(g1, 1.0)
    cases = [("disk", dk, t) for t in (0.0, 0.5, 0.9)]
    cases += [("vfin=1", flat, t) for t in (0.0, 1.0, 2.0)]
    cases += [("interval", iv, t) for t in (-0.5, 0.3)]
    cases += [("oscillator", osc, t) for t in (0.0, 1.0)]
    cases += [("random", rnd, t) for t in (-0.5, 0.5)]
    return cases


def check_halfspace(o):
    rows, ok = [], True
    for name, pot, t in halfspace_cuts():
        lhs, rhs = halfspace_cut_check(pot, t)
        ok &= lhs <= rhs + 1e-8
        rows.append({"potential": name, "t": t, "lhs": lhs, "rhs": rhs})
    return {"passed": bool(ok), "rows": rows}


def check_truncation(o):
    C = o["truncation_C"]
    cases = [(f"disk rho={p.grid.L}", p, R1, R2) for p, R1, R2 in truncation_calibration_cases()]
    flat = constant(GridSpec(2, 8.0, 63), 1.0)
    cases += [("vfin=1", flat, R1, math.inf) for R1 in (2.0, 3.0, 4.0)]
    osc = oscillator(GridSpec(2, 5.0, 63), 0.5)
    cases += [("oscillator", osc, 1.5, 3.0), ("oscillator", osc, 2.0, math.inf)]
    rows, ok = [], True
    for name, pot, R1, R2 in cases:
        lhs, rhs = truncation_distance_check(pot, R1, R2, C=C)
        ok &= lhs <= rhs
        rows.append({"potential": name, "R1": R1, "R2": R2, "lhs": lhs, "rhs": rhs})
    lhs_flat = [r["lhs"] for r in rows if r["potential"] == "vfin=1"]
    decreasing = all(a > b for a, b in zip(lhs_flat, lhs_flat[1:]))
    return {"passed": bool(ok and decreasing), "C": C, "flat_lhs_decreasing": decreasing, "rows": rows}


def check_resolvent(o):
    bound = o["resolvent_C"] * RATIO_SLACK
    grid = GridSpec(2, 2.5, 63)
    rows, ok = [], True
    for name, pot in (("disk 2", disk(grid, 2.0)), ("vfin=1", constant(grid, 1.0)), ("square", square(grid, 1.8))):
        for R in (0.8, 1.2, 1.6, 2.0):
            nu = join_mask(pot, grid.ball(R))
            ratio = resolvent_ratio(pot, nu)
            gap = float(np.max(np.abs(1 / eigs(pot, 3).eigenvalues - 1 / eigs(nu, 3).eigenvalues)))
            dist = resolvent_distance(pot, nu)
            ok &= ratio <= bound and dist >= gap - 1e-6
            rows.append({"potential": name, "R": R, "ratio": ratio, "distance": dist, "lambda_gap": gap})
    return {"passed": bool(ok), "bound": bound, "rows": rows}


# --- concentration compactness ---------------------------------------------


def _bump(grid, centre, scale=1.0):
    X = grid.coords()
    r2 = sum((x - c) ** 2 for x, c in zip(X, centre))
    return ScalarField(grid, np.exp(-r2 / (2 * (0.3 * scale) ** 2)) / scale**grid.d)


def cc_sequences(shift=(0, 0)):
    """Nine labelled sequences, three per class, optionally translated by a
    lattice vector ``shift`` (in nodes)."""
    g2, g1 = GridSpec(2, 8.0, 127), GridSpec(1, 8.0, 255)
    seqs = []
    for grid in (g2, g1, g2):
        sh = np.array(shift[: grid.d]) * grid.h
        d = grid.d
        z = np.zeros(d)
        step = np.eye(d)[0]
        seqs.append(("Concentration", [_bump(grid, z + sh + 0.8 * n * step) for n in range(6)]))
        seqs.append(("Vanishing", [_bump(grid, z + sh, scale=1.5**n) for n in range(6)]))
        seqs.append(("Dichotomy", [_bump(grid, z + sh - 0.5 * n * step) + _bump(grid, z + sh + 0.5 * n * step) for n in range(6)]))
    return seqs


def check_cc(o):
    R = 1.0
    rows, ok = [], True
    for shift in ((0, 0), (7, -5)):
        for i, (label, fields) in enumerate(cc_sequences(shift)):
            got = cc_classify(fields, R).label
            ok &= got == label
            rows.append({"sequence": i, "shift": list(shift), "expected": label, "got": got})
    return {"passed": bool(ok), "rows": rows}


# --- optimizers ------------------------------------------------------------


FK_GRID = GridSpec(1, 6.0, 511)


@lru_cache(maxsize=None)
def fk_run(seed: int):
    cfg = PenaltyConfig(k=1, p=0.5, max_iters=3000, seed=seed)
    return optimize_lambda1_potential(cfg, grid=FK_GRID)


@lru_cache(maxsize=None)
def lambdak_run():
    cfg = PenaltyConfig(k=2, p=0.5, m=1.0, max_iters=3000)
    return optimize_lambdak_potential(cfg, grid=GridSpec(1, 6.0, 255))


@lru_cache(maxsize=None)
def torsion_run(m: float = 1.0):
    cfg = PenaltyConfig(k=1, m=m, max_iters=3000)
    return optimize_spectral_torsion(cfg, grid=GridSpec(2, 3.0, 63))


def check_faber_krahn(o):
    runs = [fk_run(s) for s in (0, 1, 2)]
    lams = [r.lambda_trace[-1] for r in runs]
    spread = (max(lams) - min(lams)) / min(lams)
    r = runs[0]
    u = eigs(r.final, 1).eigenfunctions[0]
    resid = fixed_point_residual(r.final, u, 0.5)
    mass_err = abs(r.final.inverse_power_mass(0.5) - 1.0)
    mono = radial_monotonicity_defect(u)
    w = torsion_function(r.final).w
    vanish = [vanishing_point(halfline_mass_profile(w, e)) for e in (1.0, -1.0)]
    inside = all(v < FK_GRID.L for v in vanish)
    oracle_err = _rel(lams[0], o["fk_lambda1"])
    passed = (
        spread <= 1e-4 and resid <= 1e-6 and mono <= 1e-3 and mass_err <= 1e-8
        and r.support_radius < 0.9 * FK_GRID.L and inside and oracle_err <= 1e-3
    )
    return {
        "passed": bool(passed),
        "lambda1": lams,
        "seed_spread": spread,
        "fixed_point_residual": resid,
        "monotonicity_defect": mono,
        "mass_error": mass_err,
        "support_radius": r.support_radius,
        "vanishing_points": vanish,
        "fine_grid_oracle": o["fk_lambda1"],
        "oracle_rel_err": oracle_err,
    }


def check_kohler_jobin(o):
    grid = GridSpec(2, 1.5, 127)
    shapes = {
        "disk": disk(grid, 1.0),
        "square": square(grid, 1.0),
        "rectangle 2:1": rectangle(grid, 1.2, 0.6),
        "ellipse 1.5:1": ellipse(grid, 1.2, 0.8),
    }
    merits = {name: merit(pot, 1) for name, pot in shapes.items()}
    best = min(merits, key=merits.get)
    err = _rel(merits["disk"], o["disk_merit"])
    run = torsion_run()
    iso = isoperimetric_ratio(torsion_function(run.final).w)
    return {
        "passed": bool(best == "disk" and err <= 2e-2 and iso <= 1.05),
        "merits": merits,
        "disk_oracle": o["disk_merit"],
        "disk_rel_err": err,
        "optimizer_isoperimetric_ratio": iso,
    }


def check_audits(o):
    out = {}
    for name, rep in (("lambda1-mass", fk_run(0)), ("lambdak-mass", lambdak_run()), ("spectral-torsion", torsion_run())):
        out[name] = {"passed": bool(rep.audit.passed), "worst_violation": rep.audit.worst_violation,
                     "kkt_residual": rep.kkt_residual}
    return {"passed": all(v["passed"] for v in out.values()), "tol": 1e-6, "runs": out}


def _directions(grid, n, seed):
    rng = np.random.default_rng(seed)
    X = grid.coords()
    for _ in range(n):
        c = rng.uniform(-0.5, 0.5, grid.d) * grid.L
        s = rng.uniform(0.15, 0.35) * grid.L
        yield rng.choice([-1.0, 1.0]) * np.exp(-sum((x - ci) ** 2 for x, ci in zip(X, c)) / (2 * s**2))


def gradient_fd_rows(eps: float = 1e-5):
    """Directional derivatives of ``lambda_k + m P`` and ``lambda_k + m int V^-p``
    against central finite differences on 5 random directions each."""
    rows = []
    grid = GridSpec(2, 2.0, 31)
    pot = random_potential(grid, 21, masked=False)
    pot = pot.with_vfin(pot.vfin + 1.0)
    cfg = PenaltyConfig(k=2, p=0.5, m=1.0)
    g = spectral_torsion_gradient(pot, cfg).values
    for phi in _directions(grid, 5, 1):
        fp = spectral_torsion_objective(pot.with_vfin(pot.vfin + eps * phi), cfg)[0]
        fm = spectral_torsion_objective(pot.with_vfin(pot.vfin - eps * phi), cfg)[0]
        fd = (fp - fm) / (2 * eps)
        an = float(np.sum(g * phi) * grid.cell)
        rows.append({"functional": "lambda+torsion", "fd": fd, "analytic": an, "rel_err": _rel(fd, an)})
    f_mass = Functional("lambda+mass", k=2, m=1.0, p=0.5)
    spec = eigs(pot, 3)
    g = spec.eigenfunctions[1].values ** 2 - 0.5 * pot.vfin**-1.5
    for phi in _directions(grid, 5, 2):
        fd = (f_mass(pot.with_vfin(pot.vfin + eps * phi)) - f_mass(pot.with_vfin(pot.vfin - eps * phi))) / (2 * eps)
        an = float(np.sum(g * phi) * grid.cell)
        rows.append({"functional": "lambda+mass", "fd": fd, "analytic": an, "rel_err": _rel(fd, an)})
    return rows


def check_gradient_fd(o):
    rows = gradient_fd_rows()
    return {"passed": max(r["rel_err"] for r in rows) <= 1e-2, "tol": 1e-2, "rows": rows}


def wedge_wells():
    grid = GridSpec(2, 4.0, 95)
    X = grid.coords()
    left = GeneralizedPotential(grid, 2.0 * ((X[0] + 2.5) ** 2 + X[1] ** 2), ~grid.ball(0.6, (-2.5, 0.0)))
    right = GeneralizedPotential(grid, 1.0 + X[1] ** 2, ~grid.ball(0.5, (2.5, 0.0)))
    return left, right


def check_dichotomy_spectrum(o):
    left, right = wedge_wells()
    k = 6
    merged = eigs(wedge(left, right), k, method="dense").eigenvalues
    union = np.sort(np.concatenate([eigs(left, k).eigenvalues, eigs(right, k).eigenvalues]))[:k]
    err = float(np.max(np.abs(merged - union) / union))
    sep = 5.0 - 0.6 - 0.5
    return {"passed": err <= 1e-6, "merged": list(merged), "union": list(union), "max_rel_err": err,
            "gap": sep, "support_radii": [0.6, 0.5]}


CHECKS = (
    Check("oracle_interval", ("oracles",), check_oracle_interval),
    Check("oracle_disk", ("oracles",), check_oracle_disk),
    Check("oracle_torsion", ("oracles",), check_oracle_torsion),
    Check("oracle_oscillator", ("oracles",), check_oracle_oscillator),
    Check("scaling_eigenvalues", ("scaling",), check_scaling_eigenvalues),
    Check("scaling_torsion", ("scaling",), check_scaling_torsion),
    Check("scaling_mass", ("scaling",), check_scaling_mass),
    Check("merit_invariance", ("invariants",), check_scaling_merit),
    Check("eigen_linf", ("bounds",), check_eigen_linf),
    Check("eigen_domination", ("bounds",), check_eigen_domination),
    Check("torsion_linf", ("bounds",), check_torsion_linf),
    Check("sup_norm_ratio", ("bounds",), check_sup_norm_ratio),
    Check("levelset_stability", ("bounds",), check_levelset_stability),
    Check("spectral_gap", ("inequalities",), check_spectral_gap),
    Check("halfspace_cut", ("inequalities",), check_halfspace),
    Check("truncation", ("inequalities",), check_truncation),
    Check("resolvent", ("inequalities",), check_resolvent),
    Check("cc_classifier", ("cc",), check_cc),
    Check("faber_krahn", ("optimize",), check_faber_krahn),
    Check("kohler_jobin", ("optimize",), check_kohler_jobin),
    Check("subsolution_audits", ("optimize",), check_audits),
    Check("gradient_fd", ("optimize",), check_gradient_fd),
    Check("dichotomy_spectrum", ("optimize",), check_dichotomy_spectrum),
)


def select(filters=None) -> list[Check]:
    if not filters:
        return list(CHECKS)
    known = {c.name for c in CHECKS} | {g for c in CHECKS for g in c.groups}
    unknown = [f for f in filters if f not in known]
    if unknown:
        raise ConfigError(f"unknown check or group {unknown}; known: {sorted(known)}")
    return [c for c in CHECKS if c.name in filters or set(c.groups) & set(filters)]


def _run_one(args):
    check, oracles = args
    verdict = check.run(oracles)
    verdict["name"] = check.name
    verdict["groups"] = list(check.groups)
    verdict["passed"] = bool(verdict["passed"])
    return verdict


def run_checks(filters=None, oracles=None, jobs: int = 1) -> list[dict]:
    """Run the selected checks; verdicts come back in registry order."""
    o = dict(ORACLES)
    for key, val in (oracles or {}).items():
        if key not in ORACLES:
            raise ConfigError(f"unknown oracle {key!r}")
        o[key] = val
    checks = select(filters)
    if jobs <= 1:
        return [_run_one((c, o)) for c in checks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, [(c, o) for c in checks]))
