"""Optimal potentials: minimise ``lambda_k(V)`` under ``int V^-p = 1`` (or its
penalised form) and minimise ``lambda_k + m P``.

Three algorithms share one report type:

* k = 1: alternating minimisation between the ground state and the
  closed-form optimal potential for it;
* k >= 2: damped fixed point of the pointwise stationarity condition;
* spectral torsion: scaled projected gradient on ``vfin``.

Nodes whose potential diverges (eigenfunction below a floor, or ``vfin``
above a cap) are promoted to ``+inf``; that is how the bounded set of
finiteness of an optimum shows up on a grid.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConvergenceError, PreconditionError
from .gamma import Functional, SubsolutionAudit, subsolution_audit
from .grid import (
    GeneralizedPotential,
    GridSpec,
    ScalarField,
    _integer_factor,
    integrate,
    rescale_potential,
)
from .spectrum import eigen_gradient, eigs
from .torsion import centroid
from .torsion import support_radius as _support_radius
from .torsion import torsion_function

log = logging.getLogger(__name__)

U_FLOOR = 1e-8
G_FLOOR = 1e-12


@dataclass(frozen=True)
class PenaltyConfig:
    k: int = 1
    p: float = 0.5
    m: float = 1.0
    damping: float = 0.5
    max_iters: int = 500
    tol_obj: float = 1e-12
    v_cap: float | None = None
    seed: int = 0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError(f"k must be a positive integer, got {self.k}")
        if not self.p > 0:
            raise ConfigError(f"p must be positive, got {self.p}")
        if self.k >= 2 and not self.p < 1:
            raise ConfigError(f"p must lie in (0, 1) when k >= 2, got p={self.p}")
        if not self.m > 0:
            raise ConfigError(f"m must be positive, got {self.m}")
        if not 0 < self.damping <= 1:
            raise ConfigError(f"damping must lie in (0, 1], got {self.damping}")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")

    def cap(self, grid: GridSpec) -> float:
        return self.v_cap if self.v_cap is not None else 1e8 / grid.L**2


@dataclass(frozen=True, eq=False)
class OptReport:
    final: GeneralizedPotential
    objective_trace: list
    lambda_trace: list
    mass_or_torsion_trace: list
    support_radius: float
    kkt_residual: float
    audit: SubsolutionAudit | None
    converged: bool = True
    extras: dict = field(default_factory=dict)

    @property
    def box_limited(self) -> bool:
        return self.support_radius >= 0.9 * self.final.grid.L

    def to_dict(self) -> dict:
        return {
            "objective_trace": [float(x) for x in self.objective_trace],
            "lambda_trace": [float(x) for x in self.lambda_trace],
            "mass_or_torsion_trace": [float(x) for x in self.mass_or_torsion_trace],
            "support_radius": self.support_radius,
            "box_limited": self.box_limited,
            "kkt_residual": self.kkt_residual,
            "converged": self.converged,
            "audit": self.audit.to_dict() if self.audit else None,
            "extras": self.extras,
        }


support_radius = _support_radius


def initial_potential(grid: GridSpec, seed: int = 0, amplitude: float = 0.1) -> GeneralizedPotential:
    """``vfin = (1 + noise) / L^2`` with seeded uniform noise of the given amplitude."""
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-amplitude, amplitude, grid.shape)
    return GeneralizedPotential(grid, (1.0 + noise) / grid.L**2)


def merit(pot: GeneralizedPotential, k: int, p: float | None = None) -> float:
    """Scale-free figure ``lambda_k (int V^-p)^{2/(2p+d)}``, or ``lambda_k P^{2/(d+2)}``
    when ``p`` is None."""
    d = pot.grid.d
    lam = float(eigs(pot, k).eigenvalues[-1])
    if p is None:
        return lam * torsion_function(pot).P ** (2.0 / (d + 2))
    return lam * pot.inverse_power_mass(p) ** (2.0 / (2 * p + d))


# --- constraint <-> penalty ------------------------------------------------


def stationary_scale(lam: float, M: float, m: float, p: float | None, d: int) -> float:
    """Stationary point of ``t^-2 lam + m t^e M`` with ``e = 2p + d`` (or ``2 + d``
    for the torsion variant, ``p = None``, where ``M`` is the torsion)."""
    if not (lam > 0 and M > 0):
        raise PreconditionError("need positive lambda_k and mass")
    e = (2 * p + d) if p is not None else (2 + d)
    return (2 * lam / (m * e * M)) ** (1.0 / (e + 2))


def nearest_representable(t: float, max_factor: int = 64) -> float:
    """Closest factor of the form N or 1/N (in log distance)."""
    if t >= 1:
        cands = [max(1, math.floor(t)), math.ceil(t)]
        return float(min(cands, key=lambda N: abs(math.log(N / t))))
    cands = [max(1, math.floor(1 / t)), math.ceil(1 / t)]
    return 1.0 / min(cands, key=lambda N: abs(math.log(1 / (N * t))))


def rescale_to_constraint(
    pot: GeneralizedPotential, cfg: PenaltyConfig, target_mass: float | None = None, torsion: bool = False
) -> tuple[float, GeneralizedPotential | None, float]:
    """Returns ``(t_star, rescaled, t_used)``.

    Without ``target_mass`` ``t_star`` is the stationary scale of the
    penalised objective; with it, ``t_star`` moves the mass (or torsion) to the
    target. The potential is rescaled by ``t_star`` when that factor is
    representable on nested grids and by the nearest representable factor
    ``t_used`` otherwise.
    """
    d = pot.grid.d
    lam = float(eigs(pot, cfg.k).eigenvalues[-1])
    M = torsion_function(pot).P if torsion else pot.inverse_power_mass(cfg.p)
    e = (2 + d) if torsion else (2 * cfg.p + d)
    if target_mass is None:
        t_star = stationary_scale(lam, M, cfg.m, None if torsion else cfg.p, d)
    else:
        if not (M > 0 and lam > 0):
            raise PreconditionError("need positive lambda_k and mass")
        t_star = (target_mass / M) ** (1.0 / e)
    try:
        _integer_factor(t_star)
        t_used = t_star
    except PreconditionError:
        t_used = nearest_representable(t_star)
    if t_used == 1.0:
        return t_star, pot, t_used
    return t_star, rescale_potential(pot, t_used), t_used


def normalize_mass(pot: GeneralizedPotential, p: float, target: float = 1.0) -> GeneralizedPotential:
    """Multiply ``vfin`` by the scalar that puts ``int V^-p`` at ``target``."""
    M = pot.inverse_power_mass(p)
    if not M > 0 or math.isinf(M):
        raise PreconditionError("mass must be positive and finite to normalise")
    return pot.with_vfin(pot.vfin * (M / target) ** (1.0 / p))


# --- k = 1: alternating minimisation ---------------------------------------


def optimal_potential_for(u: ScalarField, p: float, mask=None) -> tuple[GeneralizedPotential, float]:
    """Minimiser of ``int V u^2`` under ``int V^-p = 1``: ``V = c |u|^{-2/(1+p)}`` with
    ``c = (int |u|^{2p/(1+p)})^{1/p}``; nodes with ``|u| <= U_FLOOR |u|_inf`` masked."""
    a = np.abs(u.values)
    floor = U_FLOOR * a.max()
    keep = a > floor
    if mask is not None:
        keep &= ~mask
    q = 2 * p / (p + 1)
    c = (np.sum(a[keep] ** q) * u.grid.cell) ** (1.0 / p)
    v = np.zeros(u.grid.shape)
    v[keep] = c * a[keep] ** (-2.0 / (1 + p))
    return GeneralizedPotential(u.grid, v, ~keep), c


def fixed_point_residual(pot: GeneralizedPotential, u: ScalarField, p: float) -> float:
    """``|V |u|^{2/(1+p)} - c|_inf / |V|_inf`` on ``{|u| > U_FLOOR |u|_inf}``."""
    a = np.abs(u.values)
    keep = (a > U_FLOOR * a.max()) & ~pot.inf_mask
    q = 2 * p / (p + 1)
    c = (np.sum(a[keep] ** q) * u.grid.cell) ** (1.0 / p)
    res = np.abs(pot.vfin[keep] * a[keep] ** (2.0 / (1 + p)) - c)
    return float(res.max() / pot.vfin[keep].max())


def optimize_lambda1_potential(
    cfg: PenaltyConfig, init: GeneralizedPotential | None = None, grid: GridSpec | None = None, audit: bool = True
) -> OptReport:
    """Minimise ``lambda_1(V)`` subject to ``int V^-p = 1``."""
    if cfg.k != 1:
        raise ConfigError("optimize_lambda1_potential needs k = 1")
    if init is None:
        if grid is None:
            raise PreconditionError("give an initial potential or a grid")
        init = initial_potential(grid, cfg.seed)
    grid = init.grid
    p, theta = cfg.p, cfg.damping
    v_cap = cfg.cap(grid)
    pot = normalize_mass(init, p)
    lam_trace, obj_trace, mass_trace = [], [], []
    converged = False
    for it in range(cfg.max_iters):
        spec = eigs(pot, 1)
        lam = float(spec.eigenvalues[0])
        u = spec.eigenfunctions[0]
        lam_trace.append(lam)
        obj_trace.append(lam)
        mass_trace.append(pot.inverse_power_mass(p))
        if it > 0 and abs(lam_trace[-2] - lam) <= cfg.tol_obj * lam:
            converged = True
            break
        target, c = optimal_potential_for(u, p, pot.inf_mask)
        mask = target.inf_mask | (target.vfin > v_cap)
        v = np.where(mask, 0.0, (1 - theta) * pot.vfin + theta * target.vfin)
        pot = normalize_mass(GeneralizedPotential(grid, v, mask), p)
    spec = eigs(pot, 1)
    u = spec.eigenfunctions[0]
    lam = float(spec.eigenvalues[0])
    _, c = optimal_potential_for(u, p, pot.inf_mask)
    eta = c ** (1 + p) / p
    w = torsion_function(pot).w
    extras = {
        "lambda": lam,
        "multiplier": eta,
        "eq_residual": fixed_point_residual(pot, u, p),
        "mass": pot.inverse_power_mass(p),
        "iterations": len(lam_trace),
    }
    rep = subsolution_audit(pot, Functional("lambda+mass", 1, eta, p)) if audit else None
    return OptReport(
        final=pot,
        objective_trace=obj_trace,
        lambda_trace=lam_trace,
        mass_or_torsion_trace=mass_trace,
        support_radius=support_radius(w),
        kkt_residual=extras["eq_residual"],
        audit=rep,
        converged=converged,
        extras=extras,
    )


# --- k >= 2: majorise-minimise fixed point --------------------------------
#
# By min-max, lambda_k(V') <= lambda_max(diag(lambda) + [int (V'-V) u_i u_j])
# over the first k eigenfunctions of V, with equality at V' = V. The bound is
# convex in V'; its dual over density matrices Z gives the weighted gradient
# g_Z = u^T Z u, and the pointwise minimiser (m p / g_Z)^{1/(1+p)} of
# g_Z V + m V^-p minimises the bound. Damped steps towards it therefore never
# increase lambda_k + m int V^-p. For k = 1 this is the alternating scheme.


def penalized_objective(pot: GeneralizedPotential, cfg: PenaltyConfig):
    spec = eigs(pot, cfg.k)
    lam = float(spec.eigenvalues[-1])
    mass = pot.inverse_power_mass(cfg.p)
    return lam + cfg.m * mass, lam, mass, spec


def _pointwise_min(g, m, p):
    """``argmin_v g v + m v^-p`` and the minimum value, ``+inf`` / 0 where g = 0."""
    live = g > G_FLOOR
    gs = np.where(live, g, 1.0)
    v = np.where(live, (m * p / gs) ** (1.0 / (1 + p)), np.inf)
    val = np.where(live, gs * v + m * v ** (-p), 0.0)
    return v, val, live


def majorizer_weights(pot: GeneralizedPotential, spec, pointwise):
    """Dual maximiser ``Z`` (k x k, PSD, unit trace) and the gradient ``g_Z``.

    ``pointwise(g, free)`` returns the minimiser, minimum value and live set of
    ``g V' + (penalty majorizer)(V')`` node by node on the unmasked nodes.
    """
    k = spec.k
    free = ~pot.inf_mask
    U = np.array([u.values[free] for u in spec.eigenfunctions])
    V = pot.vfin[free]
    cell = pot.grid.cell
    lam = spec.eigenvalues
    if k == 1:
        Z = np.ones((1, 1))
    else:
        def neg_dual(r):
            R = r.reshape(k, k)
            S = R @ R.T
            s = np.trace(S)
            Z = S / s
            g = np.einsum("ij,ix,jx->x", Z, U, U)
            v, val, live = pointwise(g, free)
            D = float(np.sum(np.diag(Z) * lam) - np.sum(V * g) * cell + np.sum(val) * cell)
            w = np.where(live, v, 0.0) - V
            G = np.diag(lam) + (U * w) @ U.T * cell
            grad_R = (2.0 / s) * (G - np.sum(G * Z) * np.eye(k)) @ R
            return -D, -grad_R.ravel()

        from scipy.optimize import minimize

        r0 = np.eye(k) * 0.1
        r0[k - 1, k - 1] = 1.0
        best = minimize(neg_dual, r0.ravel(), jac=True, method="L-BFGS-B", options={"gtol": 1e-13, "ftol": 1e-15, "maxiter": 500})
        R = best.x.reshape(k, k)
        Z = R @ R.T / np.trace(R @ R.T)
    g = np.zeros(pot.grid.shape)
    g[free] = np.einsum("ij,ix,jx->x", Z, U, U)
    return Z, ScalarField(pot.grid, g)


def kkt_residual(pot: GeneralizedPotential, g: ScalarField, cfg: PenaltyConfig) -> float:
    """``max |g - m p V^{-p-1}| / max g`` over unmasked nodes."""
    free = ~pot.inf_mask
    v = pot.vfin[free]
    with np.errstate(divide="ignore"):
        res = np.abs(g.values[free] - cfg.m * cfg.p * v ** (-cfg.p - 1))
    return float(res.max() / g.values[free].max())


def optimize_lambdak_potential(
    cfg: PenaltyConfig,
    init: GeneralizedPotential | None = None,
    grid: GridSpec | None = None,
    audit: bool = True,
    kkt_tol: float = 1e-6,
) -> OptReport:
    """Minimise ``lambda_k(V) + m int V^-p`` by damped steps towards the pointwise
    minimiser ``(m p / g)^{1/(1+p)}`` of ``g V + m V^-p``, ``g`` the majorizer
    gradient (for a degenerate top cluster a weighted mean of the ``u_j^2``)."""
    if cfg.k < 2:
        raise ConfigError("optimize_lambdak_potential needs k >= 2")
    if init is None:
        if grid is None:
            raise PreconditionError("give an initial potential or a grid")
        init = initial_potential(grid, cfg.seed)
    grid = init.grid
    p, m, k = cfg.p, cfg.m, cfg.k
    v_cap = cfg.cap(grid)
    pot = init
    F, lam, mass, spec = penalized_objective(pot, cfg)
    obj_trace, lam_trace, mass_trace = [F], [lam], [mass]
    theta = cfg.damping
    converged = False
    for it in range(cfg.max_iters):
        Z, g = majorizer_weights(pot, spec, lambda g, free: _pointwise_min(g, m, p))
        res = kkt_residual(pot, g, cfg)
        if res <= kkt_tol:
            converged = True
            break
        target, _, live = _pointwise_min(g.values, m, p)
        dead = ~live | pot.inf_mask
        target = np.where(dead, 0.0, target)
        while True:
            v = (1 - theta) * pot.vfin + theta * target
            mask = dead | (v > v_cap)
            trial = GeneralizedPotential(grid, np.where(mask, 0.0, v), mask)
            F_new, lam_new, mass_new, spec_new = penalized_objective(trial, cfg)
            if F_new <= F + cfg.tol_obj * abs(F) or theta < 1e-6:
                break
            theta *= 0.5
        if F_new > F + cfg.tol_obj * abs(F):
            log.info("fixed point stalled at iteration %d", it)
            break
        pot, F, lam, mass, spec = trial, F_new, lam_new, mass_new, spec_new
        obj_trace.append(F)
        lam_trace.append(lam)
        mass_trace.append(mass)
        theta = min(cfg.damping, 2 * theta)
    Z, g = majorizer_weights(pot, spec, lambda g, free: _pointwise_min(g, m, p))
    res = kkt_residual(pot, g, cfg)
    w = torsion_function(pot).w
    extras = {
        "lambda": lam,
        "mass": mass,
        "objective": F,
        "iterations": len(obj_trace) - 1,
        "eigenvalues": [float(x) for x in spec.eigenvalues],
        "weights": np.diag(Z).tolist(),
    }
    rep = subsolution_audit(pot, Functional("lambda+mass", k, m, p)) if audit else None
    return OptReport(
        final=pot,
        objective_trace=obj_trace,
        lambda_trace=lam_trace,
        mass_or_torsion_trace=mass_trace,
        support_radius=support_radius(w),
        kkt_residual=res,
        audit=rep,
        converged=converged,
        extras=extras,
    )


# --- spectral torsion: majorised multiplicative steps ----------------------


def spectral_torsion_objective(pot: GeneralizedPotential, cfg: PenaltyConfig):
    spec = eigs(pot, cfg.k)
    tor = torsion_function(pot)
    lam = float(spec.eigenvalues[-1])
    return lam + cfg.m * tor.P, lam, tor, spec


def spectral_torsion_gradient(pot: GeneralizedPotential, cfg: PenaltyConfig, spec=None, w=None) -> ScalarField:
    """``dF/dV = u_k^2 - (m/2) w^2`` (cluster mean of ``u^2`` when degenerate)."""
    if spec is None:
        spec = eigs(pot, cfg.k)
    if w is None:
        w = torsion_function(pot).w
    g = eigen_gradient(spec, cfg.k).values - 0.5 * cfg.m * w.values**2
    return ScalarField(pot.grid, np.where(pot.inf_mask, 0.0, g))


def optimize_spectral_torsion(
    cfg: PenaltyConfig,
    init: GeneralizedPotential | None = None,
    grid: GridSpec | None = None,
    audit: bool = True,
    max_relax: float = 8.0,
) -> OptReport:
    """Minimise ``lambda_k + m P`` over ``vfin >= 0``.

    Two tight upper bounds make this a majorise-minimise scheme. The
    eigenvalue is bounded by its min-max majorizer (linear in ``V'``) and the
    torsion by the complementary energy of the flux pair ``(grad w, V w)``:

        P(V') <= 1/2 int |grad w|^2 + 1/2 int V^2 w^2 / V'.

    The sum is separable and minimised by ``V' = V sqrt(m/2) w / sqrt(g)``, which
    cannot increase F. Stationary points satisfy ``g = (m/2) w^2`` wherever
    ``0 < V < inf``. The update is over-relaxed as ``V (ratio)^beta``; beta
    grows while F keeps falling and drops back to the safe value 1 otherwise.
    """
    if init is None:
        if grid is None:
            raise PreconditionError("give an initial potential or a grid")
        init = initial_potential(grid, cfg.seed)
    grid = init.grid
    m = cfg.m
    v_cap = cfg.cap(grid)
    v_floor = 1e-12 / grid.L**2
    pot = init
    F, lam, tor, spec = spectral_torsion_objective(pot, cfg)
    obj_trace, lam_trace, tor_trace = [F], [lam], [tor.P]
    state = [pot, F, lam, tor, spec]
    converged = failed = False
    iters_left = cfg.max_iters
    while True:
        ok, done, n = _mm_torsion_steps(state, cfg, iters_left, max_relax, v_floor, v_cap, obj_trace, lam_trace, tor_trace)
        iters_left -= n
        failed |= not ok
        if not _promote_nodes(state, cfg, obj_trace, lam_trace, tor_trace) or iters_left <= 0:
            converged = done
            break
    pot, F, lam, tor, spec = state
    _, g = majorizer_weights(pot, spec, _torsion_pointwise(pot, tor.w, m))
    grad = ScalarField(grid, np.where(pot.inf_mask, 0.0, g.values - 0.5 * m * tor.w.values**2))
    res = stationarity_residual(pot, grad, g, cfg)
    extras = {
        "lambda": lam,
        "torsion": tor.P,
        "objective": F,
        "iterations": len(obj_trace) - 1,
        "descent_failed": failed,
        "ball_witness_radius": ball_witness_radius(pot),
        "measure_indicator": measure_indicator(pot),
        "merit": lam * tor.P ** (2.0 / (grid.d + 2)),
    }
    rep = subsolution_audit(pot, Functional("lambda+torsion", cfg.k, m)) if audit else None
    return OptReport(
        final=pot,
        objective_trace=obj_trace,
        lambda_trace=lam_trace,
        mass_or_torsion_trace=tor_trace,
        support_radius=support_radius(tor.w),
        kkt_residual=res,
        audit=rep,
        converged=converged and not failed,
        extras=extras,
    )


def _torsion_pointwise(pot, w, m):
    """Pointwise minimiser of ``g V' + (m/2) V^2 w^2 / V'``: ``V' = V w sqrt(m/2) / sqrt(g)``."""
    def pointwise(g, free):
        a = pot.vfin[free] * w.values[free] * math.sqrt(m / 2)
        live = g > G_FLOOR
        gs = np.where(live, g, 1.0)
        v = np.where(live, a / np.sqrt(gs), np.inf)
        val = np.where(live, 2 * a * np.sqrt(gs), 0.0)
        return v, val, live

    return pointwise


def _mm_torsion_steps(state, cfg, max_iters, max_relax, v_floor, v_cap, obj_trace, lam_trace, tor_trace):
    """Majorised steps on ``state = [pot, F, lam, tor, spec]`` until the decrease
    stalls; returns ``(descended, converged, iterations)``."""
    pot, F, lam, tor, spec = state
    grid, m = pot.grid, cfg.m
    beta = 1.0
    ok, done, it = True, False, 0
    for it in range(1, max_iters + 1):
        _, g = majorizer_weights(pot, spec, _torsion_pointwise(pot, tor.w, m))
        gv = g.values
        live = ~pot.inf_mask & (gv > G_FLOOR)
        ratio = np.where(live, math.sqrt(m / 2) * tor.w.values / np.sqrt(np.where(live, gv, 1.0)), 0.0)
        while True:
            with np.errstate(divide="ignore", over="ignore"):
                v = pot.vfin * ratio**beta
            v = np.where(live, v, 0.0)
            v[v < v_floor] = 0.0
            mask = pot.inf_mask | ~live | (v > v_cap)
            trial = GeneralizedPotential(grid, np.where(mask, 0.0, v), mask)
            F_new, lam_new, tor_new, spec_new = spectral_torsion_objective(trial, cfg)
            if F_new <= F or beta == 1.0:
                break
            beta = 1.0
        if F_new > F + cfg.tol_obj * abs(F):
            ok = False
            log.info("majorised step failed to descend")
            break
        dF = F - F_new
        pot, F, lam, tor, spec = trial, F_new, lam_new, tor_new, spec_new
        obj_trace.append(F)
        lam_trace.append(lam)
        tor_trace.append(tor.P)
        beta = min(max_relax, 1.5 * beta)
        if dF <= cfg.tol_obj * abs(F):
            done = True
            break
    state[:] = [pot, F, lam, tor, spec]
    return ok, done, it


def _promote_nodes(state, cfg, obj_trace, lam_trace, tor_trace, max_candidates: int = 200) -> bool:
    """Mask finite nodes with ``V > 0`` when that lowers F (checked exactly).

    The majorised update only sends such nodes to ``+inf`` geometrically.
    """
    pot, F, *_ = state
    cand = np.flatnonzero((~pot.inf_mask & (pot.vfin > 0)).ravel())
    if cand.size == 0:
        return False
    cand = cand[np.argsort(-pot.vfin.ravel()[cand])][:max_candidates]
    gains = []
    for i in cand:
        mask = pot.inf_mask.copy().ravel()
        mask[i] = True
        trial = GeneralizedPotential(pot.grid, pot.vfin, mask.reshape(pot.grid.shape))
        if trial.dof < cfg.k:
            continue
        F_new = spectral_torsion_objective(trial, cfg)[0]
        if F_new < F:
            gains.append((F - F_new, i))
    if not gains:
        return False
    gains.sort(reverse=True)
    # all improving nodes at once, else the single best one
    for group in ([i for _, i in gains], [gains[0][1]]):
        mask = pot.inf_mask.copy().ravel()
        mask[group] = True
        trial = GeneralizedPotential(pot.grid, pot.vfin, mask.reshape(pot.grid.shape))
        F_new, lam, tor, spec = spectral_torsion_objective(trial, cfg)
        if F_new < F:
            state[:] = [trial, F_new, lam, tor, spec]
            obj_trace.append(F_new)
            lam_trace.append(lam)
            tor_trace.append(tor.P)
            return True
    return False


def stationarity_residual(pot, grad: ScalarField, g: ScalarField, cfg: PenaltyConfig) -> float:
    """``max |g - (m/2) w^2| / max g`` over nodes with ``0 < V < v_cap``."""
    interior = ~pot.inf_mask & (pot.vfin > 0) & (pot.vfin < cfg.cap(pot.grid))
    if not np.any(interior):
        return 0.0
    return float(np.max(np.abs(grad.values[interior])) / np.max(g.values))


def ball_witness_radius(pot: GeneralizedPotential) -> float:
    """Radius of the largest node ball around the torsion centroid free of
    masked nodes, a witness for ``I_{B_R} < mu``."""
    w = torsion_function(pot).w
    r = pot.grid.radius(centroid(w))
    return float(r[pot.inf_mask].min()) if np.any(pot.inf_mask) else math.inf


def measure_indicator(pot: GeneralizedPotential) -> float:
    """Fraction of unmasked nodes with ``vfin > 10 median``."""
    v = pot.vfin[~pot.inf_mask]
    med = np.median(v)
    if med == 0:
        return float(np.mean(v > 0))
    return float(np.mean(v > 10 * med))


def isoperimetric_ratio(w: ScalarField, level: float = 0.5) -> float:
    """``perimeter^2 / (4 pi area)`` of the superlevel set ``{w > level max w}``
    (largest component), from marching squares on the zero-padded field."""
    from skimage.measure import find_contours

    if w.grid.d != 2:
        raise PreconditionError("isoperimetric ratio needs a 2-d field")
    vals = np.pad(w.values, 1)
    top = vals.max()
    if top <= 0:
        raise PreconditionError("field has no positive part")
    best = None
    for c in find_contours(vals, level * top):
        if not np.allclose(c[0], c[-1]):
            continue
        seg = np.diff(c, axis=0)
        perim = float(np.sum(np.hypot(seg[:, 0], seg[:, 1])))
        area = 0.5 * abs(float(np.dot(c[:-1, 0], c[1:, 1]) - np.dot(c[1:, 0], c[:-1, 1])))
        if best is None or area > best[1]:
            best = (perim, area)
    if best is None or best[1] == 0:
        raise PreconditionError("no closed level curve found")
    return best[0] ** 2 / (4 * math.pi * best[1])


def halfline_mass_profile(w: ScalarField, direction=1.0, n_points: int | None = None) -> list[tuple[float, float]]:
    """``phi(t) = int_{x.e > t} w`` on a uniform grid of ``t`` covering the box."""
    grid = w.grid
    e = np.atleast_1d(np.asarray(direction, dtype=float))
    if e.size != grid.d or not np.linalg.norm(e) > 0:
        raise PreconditionError("direction must be a nonzero vector of length d")
    e = e / np.linalg.norm(e)
    proj = sum(x * ei for x, ei in zip(grid.coords(), e))
    reach = grid.L * math.sqrt(grid.d)
    ts = np.linspace(-reach - grid.h, reach + grid.h, n_points or 2 * grid.n + 3)
    order = np.argsort(proj.ravel())
    sorted_proj = proj.ravel()[order]
    # tail sums of w in order of increasing projection
    tail = np.concatenate([np.cumsum(w.values.ravel()[order][::-1])[::-1], [0.0]]) * grid.cell
    idx = np.searchsorted(sorted_proj, ts, side="right")
    return [(float(t), float(tail[i])) for t, i in zip(ts, idx)]


def vanishing_point(profile, threshold: float = 1e-10) -> float:
    """First ``t`` of a half-line profile with ``phi(t) <= threshold``."""
    for t, phi in profile:
        if phi <= threshold:
            return t
    return math.inf


def radial_monotonicity_defect(u: ScalarField) -> float:
    """Largest rise of ``|u|`` moving away from its peak node, relative to the
    peak (after angular averaging in 2-d). Zero for radially non-increasing u."""
    a = np.abs(u.values)
    top = a.max()
    if top == 0:
        return 0.0
    grid = u.grid
    if grid.d == 1:
        i = int(np.argmax(a))
        right = np.diff(a[i:])
        left = np.diff(a[: i + 1][::-1])
        rises = np.concatenate([right, left, [0.0]])
        return float(max(rises.max(), 0.0) / top)
    peak = np.unravel_index(np.argmax(a), grid.shape)
    centre = tuple(float(x[peak]) for x in grid.coords())
    r = grid.radius(centre)
    bins = np.floor(r / grid.h + 0.5).astype(int)
    counts = np.bincount(bins.ravel())
    sums = np.bincount(bins.ravel(), weights=a.ravel())
    prof = sums[counts > 0] / counts[counts > 0]
    return float(max(np.max(np.diff(prof), initial=0.0), 0.0) / top)
