"""Acceptance criteria 1 to 10. Each test records one PASS/FAIL line, shown in
the pytest terminal summary (or printed when the module is run directly)."""

import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from spectropt import verify
from spectropt.gamma import (
    RATIO_SLACK,
    RESOLVENT_C,
    TRUNCATION_C,
    cc_classify,
    halfspace_cut_check,
    resolvent_ratio,
)
from spectropt.grid import GeneralizedPotential, GridSpec, join_mask, rescale_field, rescale_potential, wedge
from spectropt.optimize import (
    fixed_point_residual,
    halfline_mass_profile,
    isoperimetric_ratio,
    merit,
    radial_monotonicity_defect,
    vanishing_point,
)
from spectropt.shapes import disk, oscillator
from spectropt.spectrum import eigs, spectral_gap_check
from spectropt.torsion import torsion_function

J01 = 2.404825557695773
RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str):
    RESULTS[n] = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(RESULTS[n])
    assert ok, RESULTS[n]


def rel(a, b):
    return abs(a - b) / abs(b)


def test_criterion_01_analytic_oracles():
    iv = eigs(GeneralizedPotential.free(GridSpec(1, 1.0, 255)), 2).eigenvalues
    dk = eigs(disk(GridSpec(2, 1.25, 127), 1.0), 1).eigenvalues[0]
    Pi = torsion_function(GeneralizedPotential.free(GridSpec(1, 1.0, 255))).P
    Pd = torsion_function(disk(GridSpec(2, 1.25, 127), 1.0)).P
    osc = eigs(oscillator(GridSpec(1, 8.0, 511)), 4).eigenvalues
    errs = {
        "interval lambda": (max(rel(iv[0], math.pi**2 / 4), rel(iv[1], math.pi**2)), 1e-3),
        "disk lambda1": (rel(dk, J01**2), 5e-3),
        "interval P": (rel(Pi, 1 / 3), 1e-3),
        "disk P": (rel(Pd, math.pi / 16), 1e-2),
        "oscillator": (max(rel(a, b) for a, b in zip(osc, (1, 3, 5, 7))), 5e-3),
    }
    ok = all(e <= tol for e, tol in errs.values())
    record(1, ok, "analytic oracles, rel errs " + ", ".join(f"{k} {e:.1e}" for k, (e, _) in errs.items()))


def test_criterion_02_scaling_identities():
    worst = 0.0
    for _, pot in verify._scaling_family():
        d = pot.grid.d
        big = rescale_potential(pot, 2)
        lam, lam_t = eigs(pot, 3).eigenvalues, eigs(big, 3).eigenvalues
        worst = max(worst, float(np.max(np.abs(lam_t * 4 - lam) / lam)))
        r, rt = torsion_function(pot), torsion_function(big)
        worst = max(worst, rel(rt.P, 2 ** (d + 2) * r.P))
        ref = rescale_field(r.w, 2, power=2.0).values
        worst = max(worst, float(np.max(np.abs(rt.w.values - ref)) / np.max(np.abs(ref))))
        shifted = pot.with_vfin(pot.vfin + 0.5)
        for p in (0.5, 1.5):
            M = shifted.inverse_power_mass(p)
            worst = max(worst, rel(rescale_potential(shifted, 2).inverse_power_mass(p), 2 ** (2 * p + d) * M))
    record(2, worst <= 1e-6, f"scaling identities at t = 2, worst rel err {worst:.1e} (tol 1e-6)")


def test_criterion_03_eigenfunction_linf():
    worst, count = 0.0, 0
    for _, pot in verify._standard_family():
        spec = eigs(pot, 4)
        for lam, u in zip(spec.eigenvalues, spec.eigenfunctions):
            bound = 1.04059 * lam ** (pot.grid.d / 4) * 1.05
            worst = max(worst, float(np.max(np.abs(u.values))) / bound)
            count += 1
    record(3, worst <= 1.0, f"sup-norm bound on {count} eigenpairs, worst lhs/rhs {worst:.3f}")


def test_criterion_04_inequality_suite():
    t0 = time.perf_counter()
    gaps = [spectral_gap_check(mu, nu, k) for _, mu, nu, k in verify.spectral_gap_pairs()]
    okgap = len(gaps) == 10 and all(a <= b + 1e-10 for a, b in gaps)
    cuts = [halfspace_cut_check(pot, t) for _, pot, t in verify.halfspace_cuts()]
    okcut = len(cuts) == 12 and all(a <= b + 1e-8 for a, b in cuts)
    trunc = verify.check_truncation(verify.ORACLES)
    oktr = trunc["C"] == TRUNCATION_C and trunc["flat_lhs_decreasing"]
    oktr = oktr and all(r["lhs"] <= r["rhs"] for r in trunc["rows"])
    grid = GridSpec(2, 2.5, 63)
    ratios = [resolvent_ratio(disk(grid, 2.0), join_mask(disk(grid, 2.0), grid.ball(R))) for R in (0.8, 1.2, 1.6, 2.0)]
    okres = max(ratios) <= RESOLVENT_C * RATIO_SLACK
    elapsed = time.perf_counter() - t0
    ok = okgap and okcut and oktr and okres and elapsed < 120
    record(4, ok, f"inequalities: gap {okgap}, cuts {okcut}, truncation {oktr}, "
                  f"resolvent max ratio {max(ratios):.3f}, {elapsed:.1f} s")


def test_criterion_05_cc_classifier():
    right, total = 0, 0
    for shift in ((0, 0), (7, -5)):
        for label, fields in verify.cc_sequences(shift):
            right += cc_classify(fields, 1.0).label == label
            total += 1
    record(5, right == total == 18, f"concentration-compactness labels {right}/{total} (two translations)")


def test_criterion_06_faber_krahn():
    runs = [verify.fk_run(s) for s in (0, 1, 2)]
    lams = [r.lambda_trace[-1] for r in runs]
    spread = (max(lams) - min(lams)) / min(lams)
    r, L = runs[0], verify.FK_GRID.L
    u = eigs(r.final, 1).eigenfunctions[0]
    resid = fixed_point_residual(r.final, u, 0.5)
    mono = radial_monotonicity_defect(u)
    mass = abs(r.final.inverse_power_mass(0.5) - 1)
    w = torsion_function(r.final).w
    vanish = [vanishing_point(halfline_mass_profile(w, e)) for e in (1.0, -1.0)]
    ok = (spread <= 1e-4 and resid <= 1e-6 and mono <= 1e-3 and mass <= 1e-8
          and r.support_radius < 0.9 * L and max(vanish) < L)
    record(6, ok, f"potential Faber-Krahn lambda1 {lams[0]:.6f}, seed spread {spread:.1e}, residual {resid:.1e}, "
                  f"mass err {mass:.1e}, support {r.support_radius:.2f} < {0.9 * L}")


def test_criterion_07_kohler_jobin():
    t0 = time.perf_counter()
    res = verify.check_kohler_jobin(verify.ORACLES)
    merits = res["merits"]
    best = min(merits, key=merits.get)
    err = rel(merits["disk"], J01**2 * math.sqrt(math.pi / 16))
    iso = isoperimetric_ratio(torsion_function(verify.torsion_run().final).w)
    elapsed = time.perf_counter() - t0
    ok = best == "disk" and err <= 2e-2 and iso <= 1.05 and elapsed < 180
    record(7, ok, f"disk merit {merits['disk']:.4f} (rel err {err:.1e}) is smallest of {len(merits)}, "
                  f"optimizer isoperimetric ratio {iso:.4f}")


def test_criterion_08_audits_and_gradient():
    runs = (verify.fk_run(0), verify.lambdak_run(), verify.torsion_run())
    audits = [rep.audit.passed and rep.audit.tol <= 1e-6 for rep in runs]
    rows = verify.gradient_fd_rows()
    worst = max(r["rel_err"] for r in rows)
    ok = all(audits) and worst <= 1e-2 and len(rows) == 10
    record(8, ok, f"subsolution audits {sum(audits)}/3 pass, gradient vs finite differences worst rel err {worst:.1e}")


def test_criterion_09_dichotomy_spectrum():
    left, right = verify.wedge_wells()
    # support radii 0.6 and 0.5, centres 5 apart
    assert 5.0 - 0.6 - 0.5 >= 4 * 0.6
    assert not np.any(~left.inf_mask & ~right.inf_mask)
    k = 6
    merged = eigs(wedge(left, right), k, method="dense").eigenvalues
    union = np.sort(np.concatenate([eigs(left, k).eigenvalues, eigs(right, k).eigenvalues]))[:k]
    err = float(np.max(np.abs(merged - union) / union))
    record(9, err <= 1e-6, f"merged spectrum vs sorted union, rel err {err:.1e}")


@pytest.mark.slow
def test_criterion_10_cli_verify(tmp_path):
    def run(out):
        t0 = time.perf_counter()
        proc = subprocess.run([sys.executable, "-m", "spectropt.cli", "verify", "--out", str(out), "--jobs", "2"],
                              capture_output=True, text=True)
        return proc, time.perf_counter() - t0

    (p1, t1), (p2, _) = run(tmp_path / "a"), run(tmp_path / "b")
    same = all(
        f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()
        for f in [tmp_path / "a" / "report.json", *sorted((tmp_path / "a" / "checks").glob("*.json"))]
    )
    n = len(json.loads((tmp_path / "a" / "report.json").read_text())["checks"]) if p1.returncode == 0 else 0
    ok = p1.returncode == 0 and p2.returncode == 0 and t1 < 600 and same
    record(10, ok, f"verify exit {p1.returncode}, {n} checks in {t1:.1f} s, reports identical across runs: {same}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
