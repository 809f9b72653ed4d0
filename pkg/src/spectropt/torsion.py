"""Torsion functions, the resolvent, (Delta - mu)-harmonic replacement and the
infinity/decay estimates as computable diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .grid import (
    CG_TOL,
    GeneralizedPotential,
    ScalarField,
    assemble,
    cg,
    integrate,
    linf_norm,
    lp_norm,
    quadratic_form,
    solve,
    superlevel_measure,
)

SHELL_FRACTION = 0.05


@dataclass(frozen=True)
class TorsionReport:
    w: ScalarField
    P: float
    E: float
    boundary_shell_mass: float

    def to_dict(self) -> dict:
        return {"P": self.P, "E": self.E, "boundary_shell_mass": self.boundary_shell_mass}


def boundary_shell_mass(w: ScalarField, fraction: float = SHELL_FRACTION) -> float:
    """Integral of ``w`` over the outermost ``fraction`` of the box (at least
    the outermost layer of nodes)."""
    grid = w.grid
    depth = max(fraction * grid.L, grid.h * (1 + 1e-9))
    shell = np.zeros(grid.shape, dtype=bool)
    for x in grid.coords():
        shell |= grid.L - np.abs(x) <= depth
    return float(np.sum(w.values[shell]) * grid.cell)


def _ones(pot):
    return ScalarField(pot.grid, np.ones(pot.grid.shape))


def torsion_function(pot: GeneralizedPotential, tol: float = CG_TOL) -> TorsionReport:
    w = source_solution(pot, _ones(pot), tol)
    P = 0.5 * integrate(w)
    return TorsionReport(w=w, P=P, E=-P, boundary_shell_mass=boundary_shell_mass(w))


def torsion(pot: GeneralizedPotential, tol: float = CG_TOL) -> float:
    return torsion_function(pot, tol).P


def source_solution(pot: GeneralizedPotential, f: ScalarField, tol: float = CG_TOL) -> ScalarField:
    """``R_mu(f)``: solves ``(-Delta_h + vfin) u = f`` on the unmasked nodes."""
    if f.grid != pot.grid:
        raise PreconditionError("source and potential live on different grids")
    return solve(assemble(pot), f, tol)


resolvent_apply = source_solution


def energy_functional(pot: GeneralizedPotential, f: ScalarField, u: ScalarField) -> float:
    """``J_{mu,f}(u) = Q_mu(u)/2 - int f u``."""
    return 0.5 * quadratic_form(pot, u) - integrate(f * u)


def dirichlet_energy(pot: GeneralizedPotential, f: ScalarField, tol: float = CG_TOL) -> float:
    """``E_f(mu) = -1/2 int f R_mu(f)``."""
    if not np.any(f.values):
        return 0.0
    return -0.5 * integrate(f * source_solution(pot, f, tol))


def harmonic_replace(
    pot: GeneralizedPotential, u: ScalarField, ball_mask, tol: float = CG_TOL
) -> ScalarField:
    """Keep ``u`` outside the ball, solve ``(-Delta_h + vfin) h = 0`` inside."""
    ball_mask = np.asarray(ball_mask, dtype=bool)
    if np.any(u.values[pot.inf_mask] != 0.0):
        raise PreconditionError("boundary data must vanish on masked nodes")
    op = assemble(pot)
    inside_full = (ball_mask & ~pot.inf_mask).reshape(-1)
    inside = inside_full[op.free]
    if not np.any(inside):
        return u
    outer = op.restrict(u).copy()
    outer[inside] = 0.0
    rhs = -(op.matrix @ outer)[inside]
    A_ii = op.matrix[inside][:, inside]
    x = outer.copy()
    x[inside] = cg(A_ii.tocsr(), rhs, tol=tol)
    return op.extend(x)


def first_variation(pot: GeneralizedPotential, h: ScalarField, psi: ScalarField) -> float:
    """Discrete ``int grad h . grad psi + int h psi dmu`` (polarised form)."""
    op = assemble(pot)
    return float(op.restrict(psi) @ (op.matrix @ op.restrict(h)) * pot.grid.cell)


def decay_profile(w: ScalarField, radii, center=None) -> list[tuple[float, float]]:
    """Tail suprema ``sup_{|x| >= R} w`` for each R."""
    r = w.grid.radius(center)
    out = []
    for R in radii:
        tail = w.values[r >= R]
        out.append((float(R), float(tail.max()) if tail.size else 0.0))
    return out


def levelset_estimate_check(u: ScalarField, f: ScalarField, p: float, n_levels: int = 20) -> dict:
    """Empirical constant in ``|(u-t)^+|_inf <= C |f|_p |{u>t}|^(2/d-1/p)``.

    Thresholds are fractions of ``|u|_inf`` so the ratios are scale invariant.
    """
    d = u.grid.d
    if not p > d / 2:
        raise PreconditionError(f"need p > d/2, got p={p}")
    expo = 2.0 / d - (0.0 if p == math.inf else 1.0 / p)
    fnorm = lp_norm(f, p)
    M = linf_norm(u)
    ratios = []
    for s in np.linspace(0.0, 0.95, n_levels):
        t = s * M
        num = float(np.max(np.maximum(u.values - t, 0.0)))
        meas = superlevel_measure(u, t)
        den = fnorm * meas**expo
        if num == 0.0 or den == 0.0:
            continue
        ratios.append((float(t), num / den))
    return {
        "p": p,
        "exponent": expo,
        "ratios": ratios,
        "C": max((r for _, r in ratios), default=0.0),
    }


def linf_torsion_bound_check(w: ScalarField) -> tuple[float, float]:
    """``(|w|_inf, |w|_1^(2/(d+2)))``; their ratio is scale invariant."""
    d = w.grid.d
    return linf_norm(w), lp_norm(w, 1.0) ** (2.0 / (d + 2))


def sup_norm_ratio(pot: GeneralizedPotential, f: ScalarField, tol: float = CG_TOL) -> float:
    """``|R_mu f|_inf / (P^(2/(d+2)) |f|_inf)`` for the p = inf form of the
    sup-norm bound on source solutions."""
    d = pot.grid.d
    u = source_solution(pot, f, tol)
    P = torsion(pot, tol)
    den = P ** (2.0 / (d + 2)) * linf_norm(f)
    return linf_norm(u) / den if den > 0 else 0.0


TAIL_LIMIT = 0.25


def comparison_at_infinity(
    pot: GeneralizedPotential, f: ScalarField, tol: float = CG_TOL, slack: float = 1e-8
) -> float | None:
    """Smallest node radius R with ``R_mu(f) <= w_mu`` on every node ``|x| >= R``.

    ``f`` must decay: its sup outside the ball of radius L/2 is below 1/4.
    Sources bounded by 1 everywhere are accepted as well, since then the
    comparison holds globally.
    """
    grid = pot.grid
    r = grid.radius()
    tail = np.abs(f.values[r >= grid.L / 2])
    if tail.size and tail.max() >= TAIL_LIMIT and np.max(f.values) > 1.0:
        raise PreconditionError("source does not decay: sup outside B_{L/2} is >= 1/4")
    u = source_solution(pot, f, tol)
    w = torsion_function(pot, tol).w
    bad = u.values > w.values + slack
    if not np.any(bad):
        return 0.0
    r_bad = r[bad].max()
    candidates = np.unique(r[r > r_bad])
    return float(candidates[0]) if candidates.size else None


def centroid(w: ScalarField) -> tuple:
    """Mass centre of a nonnegative field."""
    total = np.sum(w.values)
    if total <= 0:
        return (0.0,) * w.grid.d
    return tuple(float(np.sum(x * w.values) / total) for x in w.grid.coords())


def support_radius(w: ScalarField, threshold: float | None = None) -> float:
    """Smallest R with ``w <= threshold`` outside ``B_R(centroid)``.

    The default threshold is ``1e-8 |w|_inf``.
    """
    top = linf_norm(w)
    if top == 0.0:
        return 0.0
    if threshold is None:
        threshold = 1e-8 * top
    r = w.grid.radius(centroid(w))
    above = w.values > threshold
    return float(r[above].max()) if np.any(above) else 0.0
