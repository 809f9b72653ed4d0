import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_pot
from spectropt.errors import ConfigError, PreconditionError
from spectropt.gamma import (
    FUNCTIONALS,
    RESOLVENT_C,
    TRUNCATION_C,
    Functional,
    cc_classify,
    fit_resolvent_constant,
    fit_truncation_constant,
    gamma_distance,
    halfspace_cut_check,
    perturbation_family,
    resolvent_calibration_cases,
    resolvent_distance,
    resolvent_ratio,
    subsolution_audit,
    truncation_calibration_cases,
    truncation_distance_check,
)
from spectropt.grid import GeneralizedPotential, GridSpec, ScalarField, join_mask, precedes
from spectropt.shapes import constant, disk, interval
from spectropt.spectrum import eigs
from spectropt.verify import cc_sequences

seeds = st.integers(0, 2**32 - 1)


def test_gamma_distance_oracles():
    g1 = GridSpec(1, 2.5, 511)
    d1 = gamma_distance(interval(g1, 1.0), interval(g1, 2.0))
    assert abs(d1 - 14 / 3) <= 5e-3 * 14 / 3
    g2 = GridSpec(2, 2.5, 127)
    d2 = gamma_distance(disk(g2, 1.0), disk(g2, 2.0))
    assert abs(d2 - 15 * math.pi / 8) <= 1e-2 * 15 * math.pi / 8
    assert gamma_distance(disk(g2, 1.0), disk(g2, 1.0)) == 0.0


@given(seeds)
def test_gamma_metric(seed):
    a, b, c = (random_pot(seed + i, d=2, n=9) for i in range(3))
    ab = gamma_distance(a, b)
    assert ab == gamma_distance(b, a)
    assert ab <= gamma_distance(a, c) + gamma_distance(c, b) + 1e-10
    assert gamma_distance(a, a) == 0.0


def test_truncation_examples():
    g = GridSpec(2, 4.0, 63)
    small = disk(g, 0.5)
    lhs, _ = truncation_distance_check(small, 1.2, 2.0)
    assert lhs == 0.0
    flat = constant(GridSpec(2, 8.0, 63), 1.0)
    lhs = [truncation_distance_check(flat, R1)[0] for R1 in (2.0, 3.0, 4.0, 7.0, 10.0)]
    assert all(a > b for a, b in zip(lhs, lhs[1:]))
    # past the farthest node (the box corner) the truncation changes nothing
    assert truncation_distance_check(flat, 11.3)[0] == 0.0
    with pytest.raises(PreconditionError):
        truncation_distance_check(flat, 0.5, 2.0)
    with pytest.raises(PreconditionError):
        truncation_distance_check(flat, 3.0, 2.0)


def test_truncation_constant_is_calibrated():
    C = fit_truncation_constant(truncation_calibration_cases())
    assert abs(C - TRUNCATION_C) <= 1e-3
    for pot, R1, R2 in truncation_calibration_cases():
        lhs, rhs = truncation_distance_check(pot, R1, R2)
        assert lhs <= rhs


def test_halfspace_examples():
    pot = disk(GridSpec(2, 1.5, 63), 1.0)
    lhs, rhs = halfspace_cut_check(pot, 1.2)
    assert lhs == 0.0 and abs(rhs) <= 1e-12
    lhs, rhs = halfspace_cut_check(pot, 0.5)
    assert lhs < rhs
    flat = constant(GridSpec(2, 8.0, 63), 1.0)
    for t in (0.0, 1.0, 2.0):
        lhs, rhs = halfspace_cut_check(flat, t)
        assert lhs <= rhs
    with pytest.raises(PreconditionError):
        halfspace_cut_check(pot, 2.0)


def test_resolvent_examples():
    g = GridSpec(2, 2.5, 47)
    pot = disk(g, 2.0)
    assert resolvent_distance(pot, pot) == 0.0
    ratios = []
    for R in (0.8, 1.2, 1.6):
        nu = join_mask(pot, g.ball(R))
        dist = resolvent_distance(pot, nu)
        gap = np.max(np.abs(1 / eigs(pot, 3).eigenvalues - 1 / eigs(nu, 3).eigenvalues))
        assert dist >= gap - 1e-6
        ratios.append(resolvent_ratio(pot, nu))
    assert max(ratios) <= 5 * RESOLVENT_C
    with pytest.raises(PreconditionError):
        resolvent_distance(join_mask(pot, g.ball(1.0)), pot)


def test_resolvent_constant_is_calibrated():
    assert abs(fit_resolvent_constant(resolvent_calibration_cases()) - RESOLVENT_C) <= 1e-3


def test_cc_constructed_sequences():
    for label, fields in cc_sequences():
        verdict = cc_classify(fields, 1.0)
        assert verdict.label == label
        if label == "Dichotomy":
            a, b = verdict.mass_fractions
            assert abs(a - 0.5) <= 0.05 and abs(b - 0.5) <= 0.05 and a + b <= 1 + 1e-9
            assert verdict.split_radius == 1.0
        if label == "Concentration":
            xs = [c[0] for c in verdict.centers]
            assert xs == sorted(xs)


@given(st.integers(-6, 6), st.integers(-6, 6))
def test_cc_translation_invariant(dx, dy):
    base = [cc_classify(f, 1.0).label for _, f in cc_sequences()]
    moved = [cc_classify(f, 1.0).label for _, f in cc_sequences((dx, dy))]
    assert base == moved


def test_cc_rejects_short_sequences():
    g = GridSpec(1, 2.0, 15)
    with pytest.raises(PreconditionError):
        cc_classify([g.zeros(), g.zeros()], 1.0)


def test_functionals():
    with pytest.raises(ConfigError):
        Functional("lambda+volume")
    pot = disk(GridSpec(2, 1.5, 31), 1.0).with_vfin(0.5)
    F = Functional("energy+torsion")
    assert abs(F(pot)) <= 1e-10
    assert set(FUNCTIONALS) == {"lambda+mass", "lambda+torsion", "energy+torsion", "energy+mass"}


def test_audit_examples():
    pot = disk(GridSpec(2, 1.5, 31), 1.0)
    audit = subsolution_audit(pot, Functional("energy+torsion"))
    assert len(audit.trials) == 13 and audit.passed
    assert all(abs(d) <= 1e-10 for _, d in audit.trials)
    # I_B1 need not be optimal for lambda_1 + P; the delta is only reported
    F = Functional("lambda+torsion")
    trunc = join_mask(pot, pot.grid.ball(0.5))
    assert math.isfinite(F(trunc) - F(pot))
    with pytest.raises(ConfigError):
        subsolution_audit(pot, "lambda+torsion")


def test_perturbation_family_dominates():
    pot = disk(GridSpec(2, 1.5, 31), 1.0)
    for _, nu in perturbation_family(pot):
        assert precedes(pot, nu)
