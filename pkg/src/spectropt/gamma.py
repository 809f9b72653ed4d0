"""The gamma distance between generalized potentials, truncation and cut
estimates, the resolvent distance, a concentration-compactness classifier and
numerical subsolution audits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import ConfigError, ConvergenceError, PreconditionError
from .grid import (
    CG_TOL,
    GeneralizedPotential,
    GridSpec,
    ScalarField,
    _same_grid,
    integrate,
    join_mask,
    linf_norm,
    precedes,
)
from .shapes import disk
from .spectrum import eigs
from .torsion import (
    centroid,
    dirichlet_energy,
    source_solution,
    support_radius,
    torsion_function,
)

# Constants of the truncation and resolvent estimates, fit on the disk
# calibration family (see fit_truncation_constant / fit_resolvent_constant).
TRUNCATION_C = 2.3861
RESOLVENT_C = 0.27124
# the resolvent ratio may exceed its calibrated value by this factor
RATIO_SLACK = 5.0


def gamma_distance(pot1: GeneralizedPotential, pot2: GeneralizedPotential, tol: float = CG_TOL) -> float:
    """L1 distance between the torsion functions."""
    _same_grid(pot1, pot2)
    w1 = torsion_function(pot1, tol).w
    w2 = torsion_function(pot2, tol).w
    return float(np.sum(np.abs(w1.values - w2.values)) * pot1.grid.cell)


# --- truncation by an annulus ---------------------------------------------


def truncation_distance_check(
    pot: GeneralizedPotential, R1: float, R2: float = math.inf, C: float | None = None, tol: float = CG_TOL
) -> tuple[float, float]:
    """``(d_gamma(mu, mu v I_{B_R1 u B_R2^c}), int_{B_2R2 \\ B_R1/2} w + C (R1^-2 + R2^-2))``.

    ``R2 = inf`` masks everything outside ``B_R1``.
    """
    if C is None:
        C = TRUNCATION_C
    if not (1.0 < R1 < R2):
        raise PreconditionError(f"need 1 < R1 < R2, got R1={R1}, R2={R2}")
    grid = pot.grid
    r = grid.radius()
    if R1 >= grid.L * math.sqrt(grid.d):
        raise PreconditionError("R1 lies outside the box")
    annulus = (r >= R1) & (r <= R2)
    lhs = gamma_distance(pot, join_mask(pot, ~annulus), tol)
    w = torsion_function(pot, tol).w
    region = (r >= R1 / 2) & (r < 2 * R2)
    tail = float(np.sum(w.values[region]) * grid.cell)
    rhs = tail + C * (R1**-2 + (0.0 if math.isinf(R2) else R2**-2))
    return lhs, rhs


def fit_truncation_constant(cases, tol: float = CG_TOL) -> float:
    """Smallest C making the truncation bound hold on ``(pot, R1, R2)`` cases."""
    need = 0.0
    for pot, R1, R2 in cases:
        lhs, tail = truncation_distance_check(pot, R1, R2, C=0.0, tol=tol)
        need = max(need, (lhs - tail) / (R1**-2 + (0.0 if math.isinf(R2) else R2**-2)))
    return need


# --- half-space cut --------------------------------------------------------


def _plane_integral(w: ScalarField, t: float) -> float:
    """Quadrature of ``w`` on ``{x_1 = t}`` with linear interpolation in x_1."""
    grid = w.grid
    ax = grid.axis
    # pad with the Dirichlet zeros at -L and L
    xs = np.concatenate([[-grid.L], ax, [grid.L]])
    vals = np.pad(w.values, [(1, 1)] + [(0, 0)] * (grid.d - 1))
    i = int(np.clip(np.searchsorted(xs, t) - 1, 0, len(xs) - 2))
    s = (t - xs[i]) / (xs[i + 1] - xs[i])
    line = (1 - s) * vals[i] + s * vals[i + 1]
    return float(np.sum(line) * grid.h ** (grid.d - 1))


def _gradient_energy_beyond(w: ScalarField, t: float) -> float:
    """Sum of squared differences over edges whose midpoint has ``x_1 > t``."""
    grid = w.grid
    h = grid.h
    padded = np.pad(w.values, 1)
    xs = np.concatenate([[-grid.L], grid.axis, [grid.L]])
    total = 0.0
    for a in range(grid.d):
        diff2 = np.diff(padded, axis=a) ** 2
        if a == 0:
            mid = 0.5 * (xs[:-1] + xs[1:])
        else:
            mid = xs
        keep = mid > t
        sl = (keep,) + (slice(None),) * (grid.d - 1)
        total += float(np.sum(diff2[sl]))
    return total / h**2 * grid.cell


def halfspace_cut_check(pot: GeneralizedPotential, t: float, tol: float = CG_TOL) -> tuple[float, float]:
    """``(d_gamma(mu, mu v I_H), sqrt(8 |w|_inf) int_{x_1=t} w - int_{x_1>t} |grad w|^2
    - int_{x_1>t} w^2 V + 2 int_{x_1>t} w)`` with ``H = {x_1 < t}``."""
    grid = pot.grid
    if not -grid.L < t < grid.L:
        raise PreconditionError(f"hyperplane x_1 = {t} misses the box")
    x1 = grid.coords()[0]
    beyond = x1 > t
    lhs = gamma_distance(pot, join_mask(pot, x1 < t), tol)
    w = torsion_function(pot, tol).w
    rhs = (
        math.sqrt(8 * linf_norm(w)) * _plane_integral(w, t)
        - _gradient_energy_beyond(w, t)
        - float(np.sum((w.values**2 * pot.vfin)[beyond]) * grid.cell)
        + 2 * float(np.sum(w.values[beyond]) * grid.cell)
    )
    return lhs, rhs


# --- resolvent distance ----------------------------------------------------


def resolvent_distance(
    pot1: GeneralizedPotential, pot2: GeneralizedPotential, tol: float = 1e-6, max_iters: int = 1000, seed: int = 0
) -> float:
    """L2 operator norm of ``R_1 - R_2`` for ``pot1 < pot2`` by power iteration.

    The difference is positive semidefinite for an ordered pair, so the
    Rayleigh quotient increases monotonically towards the norm.
    """
    if not precedes(pot1, pot2):
        raise PreconditionError("resolvent distance needs pot1 < pot2")
    grid = pot1.grid
    if pot1.equals(pot2):
        return 0.0
    rng = np.random.default_rng(seed)
    x = np.abs(rng.standard_normal(grid.shape)) * ~pot1.inf_mask
    x /= np.linalg.norm(x)
    est = 0.0
    solve_tol = min(CG_TOL, tol * 1e-3)
    for _ in range(max_iters):
        f = ScalarField(grid, x)
        y = (source_solution(pot1, f, solve_tol) - source_solution(pot2, f, solve_tol)).values
        new = float(np.sum(x * y))
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        if abs(new - est) <= tol * abs(new):
            return new
        est = new
        x = y / norm
    raise ConvergenceError("power iteration stagnated", residual=abs(new - est) / abs(new))


def resolvent_ratio(pot1: GeneralizedPotential, pot2: GeneralizedPotential, tol: float = 1e-6) -> float:
    """``|R_1 - R_2| / d_gamma^{1/d}``."""
    dg = gamma_distance(pot1, pot2)
    if dg == 0.0:
        return 0.0
    return resolvent_distance(pot1, pot2, tol) / dg ** (1.0 / pot1.grid.d)


def fit_resolvent_constant(cases, tol: float = 1e-6) -> float:
    """Largest ratio ``|R_mu - R_nu| / d_gamma^{1/d}`` over ``(mu, nu)`` cases."""
    return max(resolvent_ratio(a, b, tol) for a, b in cases)


def truncation_calibration_cases():
    grid = GridSpec(2, 4.0, 127)
    radii = [(1.2, math.inf), (1.2, 1.6), (1.4, 2.0), (1.8, 2.4), (2.5, math.inf)]
    return [(disk(grid, rho), R1, R2) for rho in (1.5, 2.0, 3.0) for R1, R2 in radii]


def resolvent_calibration_cases():
    grid = GridSpec(2, 2.5, 63)
    cases = []
    for rho in (1.0, 2.0):
        pot = disk(grid, rho)
        for R in (0.6, 0.9, 1.2, 1.6):
            if R < rho:
                cases.append((pot, join_mask(pot, grid.ball(R))))
    return cases


# --- concentration compactness ---------------------------------------------

LABELS = ("Concentration", "Vanishing", "Dichotomy")


@dataclass(frozen=True)
class CCVerdict:
    label: str
    centers: list
    split_radius: float | None = None
    mass_fractions: tuple | None = None
    per_field: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "centers": [list(c) for c in self.centers],
            "split_radius": self.split_radius,
            "mass_fractions": list(self.mass_fractions) if self.mass_fractions else None,
            "per_field": self.per_field,
        }


def _ball_masses(f: ScalarField, R: float) -> np.ndarray:
    grid = f.grid
    rad = int(math.floor(R / grid.h + 1e-9))
    offs = np.arange(-rad, rad + 1) * grid.h
    if grid.d == 1:
        kernel = (np.abs(offs) <= R + 1e-12).astype(float)
    else:
        ox, oy = np.meshgrid(offs, offs, indexing="ij")
        kernel = (ox**2 + oy**2 <= R**2 + 1e-12).astype(float)
    m = fftconvolve(f.values, kernel, mode="same") * grid.cell
    return np.maximum(m, 0.0)


def _classify_one(f: ScalarField, R: float, eps: float) -> dict:
    grid = f.grid
    total = integrate(f)
    if total <= 0:
        return {"label": "Vanishing", "max_fraction": 0.0}
    masses = _ball_masses(f, R)
    X = grid.coords()
    i1 = np.unravel_index(np.argmax(masses), grid.shape)
    x1 = tuple(float(x[i1]) for x in X)
    m1 = float(masses[i1]) / total
    out = {"max_fraction": m1, "center": x1}
    if m1 >= 1 - eps:
        out["label"] = "Concentration"
        return out
    if m1 < eps:
        out["label"] = "Vanishing"
        return out
    r1 = grid.radius(x1)
    far = r1 >= 4 * R
    if np.any(far):
        m_far = np.where(far, masses, -np.inf)
        i2 = np.unravel_index(np.argmax(m_far), grid.shape)
        m2 = float(masses[i2]) / total
        ring = float(np.sum(f.values[(r1 >= R) & (r1 < 2 * R)]) * grid.cell) / total
        if m2 >= eps and ring < eps:
            out.update(
                label="Dichotomy",
                second_center=tuple(float(x[i2]) for x in X),
                fractions=(m1, m2),
            )
            return out
    out["label"] = None
    return out


def cc_classify(fields, R: float, eps: float = 0.05) -> CCVerdict:
    """Trichotomy label for the tail (last third) of a sequence of
    nonnegative fields."""
    fields = list(fields)
    if len(fields) < 3:
        raise PreconditionError("need at least 3 fields to classify a sequence")
    if not R > 0 or not 0 < eps < 1:
        raise PreconditionError("need R > 0 and 0 < eps < 1")
    tail = fields[-math.ceil(len(fields) / 3):]
    per = [_classify_one(f, R, eps) for f in tail]
    labels = [p["label"] for p in per]
    counts = {lab: labels.count(lab) for lab in LABELS}
    label = max(LABELS, key=lambda lab: counts[lab])
    if counts[label] == 0:
        # nothing resolved: decide by how much a single ball holds
        label = "Concentration" if np.mean([p["max_fraction"] for p in per]) >= 0.5 else "Vanishing"
    chosen = [p for p in per if p["label"] == label]
    report = [{"label": p["label"], "max_fraction": p["max_fraction"]} for p in per]
    if label == "Concentration":
        return CCVerdict(label, [p["center"] for p in per], per_field=report)
    if label == "Dichotomy":
        last = chosen[-1]
        fr = tuple(float(np.mean([p["fractions"][i] for p in chosen])) for i in range(2))
        return CCVerdict(label, [last["center"], last["second_center"]], R, fr, report)
    return CCVerdict(label, [], per_field=report)


# --- subsolution audits ----------------------------------------------------

FUNCTIONALS = ("lambda+mass", "lambda+torsion", "energy+torsion", "energy+mass")


@dataclass(frozen=True, eq=False)
class Functional:
    """``F(mu) = first + m * second`` with first in {lambda_k, E_f} and second in
    {int V^-p, P}."""

    name: str
    k: int = 1
    m: float = 1.0
    p: float = 0.5
    f: ScalarField | None = None

    def __post_init__(self):
        if self.name not in FUNCTIONALS:
            raise ConfigError(f"unknown functional {self.name!r}; choose from {FUNCTIONALS}")

    def __call__(self, pot: GeneralizedPotential) -> float:
        first, second = self.name.split("+")
        if first == "lambda":
            a = float(eigs(pot, self.k).eigenvalues[-1])
        else:
            f = self.f if self.f is not None else ScalarField(pot.grid, np.ones(pot.grid.shape))
            a = dirichlet_energy(pot, f)
        if second == "mass":
            b = pot.inverse_power_mass(self.p)
        else:
            b = torsion_function(pot).P
        return a + self.m * b


@dataclass(frozen=True)
class SubsolutionAudit:
    base_objective: float
    trials: list
    worst_violation: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.worst_violation >= -self.tol

    def to_dict(self) -> dict:
        return {
            "base_objective": self.base_objective,
            "trials": [{"perturbation": d, "delta": v} for d, v in self.trials],
            "worst_violation": self.worst_violation,
            "tol": self.tol,
            "passed": self.passed,
        }


def perturbation_family(pot: GeneralizedPotential) -> list[tuple[str, GeneralizedPotential]]:
    """Deterministic competitors ``nu > mu`` scaled to the support of ``w_mu``:
    5 ball truncations, 4 half-space cuts and 4 bumps added to ``vfin``."""
    grid = pot.grid
    w = torsion_function(pot).w
    c = centroid(w)
    Rs = max(support_radius(w), 2 * grid.h)
    X = grid.coords()
    out = []
    for s in (0.5, 0.7, 0.85, 1.0, 1.2):
        out.append((f"ball R={s}*Rs", join_mask(pot, grid.ball(s * Rs, c))))
    for sign in (1, -1):
        for s in (0.5, 0.9):
            t = c[0] + sign * s * Rs
            keep = (X[0] < t) if sign > 0 else (X[0] > t)
            out.append((f"cut x1{'<' if sign > 0 else '>'}c1{'+' if sign > 0 else '-'}{s}*Rs", join_mask(pot, keep)))
    shifts = [(0.0,), (0.5,), (-0.5,), (0.25,)] if grid.d == 1 else [(0.0, 0.0), (0.5, 0.0), (-0.5, 0.0), (0.0, 0.5)]
    sigma = Rs / 4
    for sh in shifts:
        centre = [ci + si * Rs for ci, si in zip(c, sh)]
        bump = np.exp(-sum((x - ci) ** 2 for x, ci in zip(X, centre)) / (2 * sigma**2)) / Rs**2
        out.append((f"bump at c+{list(sh)}*Rs", pot.with_vfin(pot.vfin + bump)))
    return out


def subsolution_audit(pot: GeneralizedPotential, functional: Functional, tol: float = 1e-6) -> SubsolutionAudit:
    """Compare ``F(pot)`` with ``F`` on the competitor family; a competitor may
    not lower ``F`` by more than ``tol * max(1, |F(pot)|)``."""
    if not isinstance(functional, Functional):
        raise ConfigError("functional must be a Functional")
    base = functional(pot)
    trials = []
    for desc, nu in perturbation_family(pot):
        if nu.dof == 0:
            continue
        trials.append((desc, functional(nu) - base))
    worst = min((d for _, d in trials), default=0.0)
    scale = max(1.0, abs(base))
    return SubsolutionAudit(base, trials, worst / scale, tol)
