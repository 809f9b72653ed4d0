"""Smallest eigenpairs of ``-Delta_h + vfin`` and the explicit eigenfunction
bounds built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, PreconditionError
from .grid import (
    CG_TOL,
    GeneralizedPotential,
    ScalarField,
    assemble,
    integrate,
    linf_norm,
    precedes,
    quadratic_form,
    rescale_potential,
)
from .torsion import source_solution, torsion_function

EIG_TOL = 1e-8
DENSE_MAX_DOF = 400
CLUSTER_GAP = 1e-6
# sup-norm constant exp(1/(8 pi)) and its square
LINF_CONST = math.exp(1.0 / (8.0 * math.pi))
GAP_CONST = math.exp(1.0 / (4.0 * math.pi))
LINF_SLACK = 0.05


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    eigenfunctions: tuple
    residuals: np.ndarray

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    @property
    def Lambda(self) -> np.ndarray:
        """Resolvent eigenvalues ``1/lambda_j``."""
        return 1.0 / self.eigenvalues

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "residuals": [float(x) for x in self.residuals],
        }


def _normalize(grid, vecs):
    vecs = vecs / math.sqrt(grid.cell)
    for j in range(vecs.shape[1]):
        i = np.argmax(np.abs(vecs[:, j]))
        if vecs[i, j] < 0:
            vecs[:, j] = -vecs[:, j]
    return vecs


def eigs(pot: GeneralizedPotential, k: int = 1, tol: float = EIG_TOL, method: str = "auto") -> Spectrum:
    """First ``k`` eigenpairs, eigenfunctions L2-normalised under the grid
    quadrature and signed so that their largest entry is positive.

    ``method="iterative"`` runs shift-invert Lanczos (ARPACK) followed by a
    Rayleigh-Ritz cleanup; ``"dense"`` calls LAPACK; ``"auto"`` picks dense
    on small problems.
    """
    op = assemble(pot)
    dof = op.dof
    if not 1 <= k <= dof:
        raise PreconditionError(f"need 1 <= k <= {dof}, got k={k}")
    if method not in ("auto", "iterative", "dense"):
        raise PreconditionError(f"unknown eigensolver method {method!r}")
    A = op.matrix
    dense = method == "dense" or (method == "auto" and dof <= DENSE_MAX_DOF) or k >= dof - 1
    if dense:
        vals, vecs = sla.eigh(A.toarray(), subset_by_index=[0, k - 1])
    else:
        v0 = np.random.default_rng(0).standard_normal(dof)
        try:
            _, vecs = spla.eigsh(A, k=k, sigma=0.0, which="LM", v0=v0, tol=tol * 1e-3)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(f"Lanczos did not converge for k={k}") from exc
        # Rayleigh-Ritz on the returned basis restores orthogonality inside
        # (near-)degenerate clusters
        Q, _ = np.linalg.qr(vecs)
        vals, Y = np.linalg.eigh(Q.T @ (A @ Q))
        vecs = Q @ Y
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    res = np.linalg.norm(A @ vecs - vecs * vals, axis=0)
    vecs = _normalize(pot.grid, vecs)
    # residual of the L2-normalised pair, in the grid L2 norm
    residuals = res
    bad = residuals > tol * np.maximum(np.abs(vals), 1.0)
    if np.any(bad):
        raise ConvergenceError(
            f"eigenpairs {np.flatnonzero(bad) + 1} exceed the residual tolerance",
            residual=float(residuals.max()),
        )
    funcs = tuple(op.extend(vecs[:, j]) for j in range(k))
    return Spectrum(np.asarray(vals, dtype=float), funcs, residuals)


def eigenvalues(pot: GeneralizedPotential, k: int = 1, tol: float = EIG_TOL) -> np.ndarray:
    return eigs(pot, k, tol).eigenvalues


def rayleigh(pot: GeneralizedPotential, u: ScalarField) -> float:
    norm2 = integrate(u * u)
    if norm2 == 0.0:
        raise PreconditionError("Rayleigh quotient of the zero field")
    return quadratic_form(pot, u) / norm2


def eigen_linf_check(spec: Spectrum, d: int | None = None) -> list[tuple[int, float, float]]:
    """``(j, |u_j|_inf, e^{1/(8 pi)} lambda_j^{d/4})`` per eigenpair.

    Callers compare with ``lhs <= rhs * (1 + LINF_SLACK)``.
    """
    if d is None:
        d = spec.eigenfunctions[0].grid.d
    return [
        (j + 1, linf_norm(u), LINF_CONST * lam ** (d / 4.0))
        for j, (lam, u) in enumerate(zip(spec.eigenvalues, spec.eigenfunctions))
    ]


def eigen_domination_check(pot: GeneralizedPotential, spec: Spectrum, tol: float = CG_TOL) -> list[float]:
    """Per eigenpair, ``max |u_j| / (e^{1/(8 pi)} lambda_j^{(d+4)/4} w)`` over nodes
    with ``w > 0``; the pointwise domination holds when this is <= 1."""
    d = pot.grid.d
    w = torsion_function(pot, tol).w.values
    pos = w > 0
    out = []
    for lam, u in zip(spec.eigenvalues, spec.eigenfunctions):
        bound = LINF_CONST * lam ** ((d + 4) / 4.0) * w[pos]
        out.append(float(np.max(np.abs(u.values[pos]) / bound)))
    return out


def eigen_scaling_check(pot: GeneralizedPotential, k: int, t: float, tol: float = EIG_TOL) -> float:
    """``max_j |lambda_j(V_t) t^2 - lambda_j(V)| / lambda_j(V)``."""
    base = eigs(pot, k, tol).eigenvalues
    if t == 1:
        return 0.0
    scaled = eigs(rescale_potential(pot, t), k, tol).eigenvalues
    return float(np.max(np.abs(scaled * t**2 - base) / base))


def cluster(spec: Spectrum, j: int, gap: float = CLUSTER_GAP) -> list[int]:
    """1-based indices of the eigenvalues chained to ``lambda_j`` by relative
    gaps below ``gap``."""
    lam = spec.eigenvalues
    lo = hi = j - 1
    while lo > 0 and lam[lo] - lam[lo - 1] <= gap * lam[lo]:
        lo -= 1
    while hi < len(lam) - 1 and lam[hi + 1] - lam[hi] <= gap * lam[hi]:
        hi += 1
    return list(range(lo + 1, hi + 2))


def eigen_gradient(spec: Spectrum, j: int, gap: float = CLUSTER_GAP) -> ScalarField:
    """``d lambda_j / d V = u_j^2``, averaged over a near-degenerate cluster.

    A cluster touching the last computed index may continue past it, so
    callers wanting ``lambda_k`` should request a few extra pairs.
    """
    if not 1 <= j <= spec.k:
        raise PreconditionError(f"index {j} outside 1..{spec.k}")
    idx = cluster(spec, j, gap)
    vals = np.mean([spec.eigenfunctions[i - 1].values ** 2 for i in idx], axis=0)
    return ScalarField(spec.eigenfunctions[0].grid, vals)


def spectral_gap_check(
    pot: GeneralizedPotential, pot_nu: GeneralizedPotential, k: int, tol: float = CG_TOL
) -> tuple[float, float]:
    """``(max_j Lambda_j(mu) - Lambda_j(nu), k^2 e^{1/(4 pi)} lambda_k(mu)^{(d+4)/2}
    int (R_mu(w_mu) - R_nu(w_mu)) w_mu)`` for an ordered pair ``mu < nu``."""
    if not precedes(pot, pot_nu):
        raise PreconditionError("gap check needs pot < pot_nu")
    d = pot.grid.d
    lam_mu = eigs(pot, k).eigenvalues
    lam_nu = eigs(pot_nu, k).eigenvalues
    lhs = float(np.max(1.0 / lam_mu - 1.0 / lam_nu))
    w = torsion_function(pot, tol).w
    diff = integrate((source_solution(pot, w, tol) - source_solution(pot_nu, w, tol)) * w)
    rhs = k**2 * GAP_CONST * lam_mu[-1] ** ((d + 4) / 2.0) * diff
    return lhs, float(rhs)
