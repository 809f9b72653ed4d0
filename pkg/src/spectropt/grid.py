"""Uniform box grids, scalar fields, generalized potentials and the discrete
Schrodinger operator.

A box ``[-L, L]^d`` carries ``n`` interior nodes per axis with spacing
``h = 2L / (n + 1)``; the box boundary holds an implicit homogeneous Dirichlet
condition. A generalized potential is a finite nonnegative field ``vfin`` plus
a boolean ``inf_mask`` marking nodes where the potential is ``+inf``. Masked
nodes are eliminated from the unknowns, which forces ``u = 0`` there.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, GridMismatchError, PreconditionError

CG_TOL = 1e-10


def _canonical_length(L: float) -> float:
    # 12 significant digits, so that rescaling by t and back by 1/t lands on
    # the same GridSpec.
    return float(f"{float(L):.12g}")


@dataclass(frozen=True)
class GridSpec:
    d: int
    L: float
    n: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise PreconditionError(f"unsupported dimension d={self.d}")
        if int(self.n) != self.n or self.n < 3:
            raise PreconditionError(f"need n >= 3 interior nodes, got {self.n}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise PreconditionError(f"box half-width must be positive, got {self.L}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "L", _canonical_length(self.L))

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.n + 1)

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def cell(self) -> float:
        """Quadrature weight h^d of a node."""
        return self.h**self.d

    @property
    def axis(self) -> np.ndarray:
        return -self.L + (np.arange(self.n) + 1) * self.h

    def coords(self) -> list[np.ndarray]:
        """Coordinate arrays, one per axis, each of shape ``self.shape``."""
        ax = self.axis
        if self.d == 1:
            return [ax.copy()]
        return list(np.meshgrid(ax, ax, indexing="ij"))

    def radius(self, center=None) -> np.ndarray:
        X = self.coords()
        if center is None:
            center = (0.0,) * self.d
        return np.sqrt(sum((x - c) ** 2 for x, c in zip(X, center)))

    def ball(self, R: float, center=None) -> np.ndarray:
        """Boolean array of nodes with ``|x - center| < R``."""
        return self.radius(center) < R

    def zeros(self) -> "ScalarField":
        return ScalarField(self, np.zeros(self.shape))

    def field(self, func) -> "ScalarField":
        """Sample ``func(*coords)`` on the nodes."""
        values = np.broadcast_to(np.asarray(func(*self.coords()), dtype=float), self.shape)
        return ScalarField(self, np.array(values))


def build_grid(d: int, L: float, n: int) -> GridSpec:
    return GridSpec(d, L, n)


def _frozen(values, shape) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(shape)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values, self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise PreconditionError("scalar field values must be finite")
        object.__setattr__(self, "values", vals)

    def _other(self, other):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise GridMismatchError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.grid, self.values / self._other(other))

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def __abs__(self):
        return ScalarField(self.grid, np.abs(self.values))

    def map(self, func) -> "ScalarField":
        return ScalarField(self.grid, func(self.values))

    def allclose(self, other: "ScalarField", rtol=1e-12, atol=0.0) -> bool:
        return np.allclose(self.values, self._other(other), rtol=rtol, atol=atol)


@dataclass(frozen=True, eq=False)
class GeneralizedPotential:
    """The measure ``V dx`` joined with ``I_Omega``: ``vfin`` where finite and
    ``inf_mask`` marking the complement of Omega."""

    grid: GridSpec
    vfin: np.ndarray
    inf_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        shape = self.grid.shape
        vfin = np.array(self.vfin, dtype=float)
        vfin = np.broadcast_to(vfin, shape).copy()
        mask = np.zeros(shape, dtype=bool) if self.inf_mask is None else np.array(self.inf_mask, dtype=bool)
        mask = np.broadcast_to(mask, shape).copy()
        if not np.all(np.isfinite(vfin)):
            raise PreconditionError("vfin must be finite; use inf_mask for +inf")
        if np.any(vfin < 0):
            raise PreconditionError("vfin must be nonnegative")
        vfin[mask] = 0.0
        vfin.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "vfin", vfin)
        object.__setattr__(self, "inf_mask", mask)

    @classmethod
    def free(cls, grid: GridSpec) -> "GeneralizedPotential":
        """Dirichlet Laplacian of the box."""
        return cls(grid, 0.0)

    @classmethod
    def domain(cls, grid: GridSpec, inside, vfin=0.0) -> "GeneralizedPotential":
        """``I_Omega`` for the node set ``inside`` (optionally with a finite part)."""
        return cls(grid, vfin, ~np.asarray(inside, dtype=bool))

    @property
    def free_nodes(self) -> np.ndarray:
        return ~self.inf_mask

    @property
    def dof(self) -> int:
        return int(np.count_nonzero(~self.inf_mask))

    def with_vfin(self, vfin) -> "GeneralizedPotential":
        return GeneralizedPotential(self.grid, vfin, self.inf_mask)

    def inverse_power_mass(self, p: float) -> float:
        """Quadrature of ``V^{-p}`` over finite nodes (masked nodes give 0)."""
        v = self.vfin[~self.inf_mask]
        with np.errstate(divide="ignore"):
            vals = np.power(v, -p)
        return float(np.sum(vals) * self.grid.cell)

    def equals(self, other: "GeneralizedPotential", rtol=0.0) -> bool:
        return (
            self.grid == other.grid
            and np.array_equal(self.inf_mask, other.inf_mask)
            and np.allclose(self.vfin, other.vfin, rtol=rtol, atol=0.0)
        )


def precedes(pot: GeneralizedPotential, other: GeneralizedPotential, atol=0.0) -> bool:
    """Partial order pot < other: every form of ``other`` dominates ``pot``."""
    _same_grid(pot, other)
    if np.any(pot.inf_mask & ~other.inf_mask):
        return False
    free = ~other.inf_mask
    return bool(np.all(pot.vfin[free] <= other.vfin[free] + atol))


def _same_grid(a, b):
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: {a.grid} vs {b.grid}")


# --- quadrature and norms -------------------------------------------------


def integrate(f: ScalarField) -> float:
    return float(np.sum(f.values) * f.grid.cell)


def lp_norm(f: ScalarField, p: float) -> float:
    if p == math.inf:
        return linf_norm(f)
    if not p > 0:
        raise PreconditionError("p must be positive")
    return float((np.sum(np.abs(f.values) ** p) * f.grid.cell) ** (1.0 / p))


def linf_norm(f: ScalarField) -> float:
    return float(np.max(np.abs(f.values)))


def superlevel_measure(f: ScalarField, t: float) -> float:
    return float(np.count_nonzero(f.values > t) * f.grid.cell)


def gradient_energy(f: ScalarField, pot: GeneralizedPotential | None = None) -> float:
    """Sum over grid edges of squared forward differences, boundary edges
    reaching the implicit zero."""
    if pot is not None:
        _check_vanishes(pot, f)
    grid = f.grid
    total = 0.0
    padded = np.pad(f.values, 1)
    for ax in range(grid.d):
        total += float(np.sum(np.diff(padded, axis=ax) ** 2))
    # pad() adds zero rows along the other axis too; their diffs are zero.
    return total / grid.h**2 * grid.cell


def quadratic_form(pot: GeneralizedPotential, f: ScalarField) -> float:
    _same_grid(pot, f)
    _check_vanishes(pot, f)
    return gradient_energy(f) + float(np.sum(pot.vfin * f.values**2) * f.grid.cell)


def _check_vanishes(pot: GeneralizedPotential, f: ScalarField):
    if np.any(f.values[pot.inf_mask] != 0.0):
        raise PreconditionError("field is nonzero on a masked node")


# --- operator assembly and the linear solver ------------------------------


@functools.lru_cache(maxsize=32)
def _laplacian(grid: GridSpec) -> sp.csr_matrix:
    n = grid.n
    ones = np.ones(n)
    T = sp.diags([-ones[:-1], 2 * ones, -ones[:-1]], [-1, 0, 1], format="csr")
    if grid.d == 1:
        A = T
    else:
        eye = sp.identity(n, format="csr")
        A = sp.kron(T, eye, format="csr") + sp.kron(eye, T, format="csr")
    A = (A / grid.h**2).tocsr()
    A.sort_indices()
    return A


@dataclass(frozen=True, eq=False)
class Operator:
    """``-Delta_h + vfin`` restricted to the unmasked nodes (flattened, C order)."""

    grid: GridSpec
    free: np.ndarray  # flat indices of unknowns
    matrix: sp.csr_matrix

    @property
    def dof(self) -> int:
        return self.free.size

    def restrict(self, f) -> np.ndarray:
        vals = f.values if isinstance(f, ScalarField) else np.asarray(f)
        return vals.reshape(-1)[self.free]

    def extend(self, x: np.ndarray) -> ScalarField:
        out = np.zeros(self.grid.size)
        out[self.free] = x
        return ScalarField(self.grid, out.reshape(self.grid.shape))

    def apply(self, f: ScalarField) -> ScalarField:
        return self.extend(self.matrix @ self.restrict(f))

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def assemble(pot: GeneralizedPotential) -> Operator:
    free = np.flatnonzero(~pot.inf_mask.reshape(-1))
    if free.size == 0:
        raise PreconditionError("every node is masked; the operator is empty")
    A = _laplacian(pot.grid)
    if free.size < pot.grid.size:
        A = A[free][:, free]
    A = (A + sp.diags(pot.vfin.reshape(-1)[free])).tocsr()
    return Operator(pot.grid, free, A)


def cg(A, b: np.ndarray, tol: float = CG_TOL, maxiter: int | None = None, x0=None) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients; stops on ``|r| <= tol |b|``."""
    if not tol > 0:
        raise PreconditionError("tol must be positive")
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    if maxiter is None:
        maxiter = 50 * b.size
    dinv = 1.0 / A.diagonal()
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x if x0 is not None else b.copy()
    z = dinv * r
    p = z.copy()
    rz = r @ z
    target = tol * bnorm
    rnorm = np.linalg.norm(r)
    for _ in range(maxiter):
        if rnorm <= target:
            return x
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rnorm = np.linalg.norm(r)
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    if rnorm <= target:
        return x
    raise ConvergenceError(f"CG hit the iteration cap {maxiter}", residual=rnorm / bnorm)


def solve(op: Operator, rhs: ScalarField, tol: float = CG_TOL, maxiter: int | None = None) -> ScalarField:
    if rhs.grid != op.grid:
        raise GridMismatchError("rhs lives on a different grid")
    return op.extend(cg(op.matrix, op.restrict(rhs), tol=tol, maxiter=maxiter))


# --- lattice operations on potentials -------------------------------------


def join(a: GeneralizedPotential, b: GeneralizedPotential) -> GeneralizedPotential:
    _same_grid(a, b)
    return GeneralizedPotential(a.grid, np.maximum(a.vfin, b.vfin), a.inf_mask | b.inf_mask)


def join_mask(pot: GeneralizedPotential, domain) -> GeneralizedPotential:
    """``pot v I_Omega`` where ``domain`` marks the nodes of Omega."""
    domain = np.asarray(domain, dtype=bool)
    if domain.shape != pot.grid.shape:
        raise GridMismatchError("domain mask has the wrong shape")
    return GeneralizedPotential(pot.grid, pot.vfin, pot.inf_mask | ~domain)


def wedge(a: GeneralizedPotential, b: GeneralizedPotential) -> GeneralizedPotential:
    """Harmonic combination ``1/V = 1/V1 + 1/V2``; +inf is neutral."""
    _same_grid(a, b)
    v1, v2 = a.vfin, b.vfin
    with np.errstate(divide="ignore", invalid="ignore"):
        both = np.where((v1 > 0) & (v2 > 0), v1 * v2 / (v1 + v2), 0.0)
    out = np.where(a.inf_mask, v2, np.where(b.inf_mask, v1, both))
    return GeneralizedPotential(a.grid, out, a.inf_mask & b.inf_mask)


def _integer_factor(t: float) -> tuple[int, bool]:
    """Return (N, grows) with t == N (grows) or t == 1/N."""
    if not t > 0:
        raise PreconditionError(f"scale factor must be positive, got {t}")
    for value, grows in ((t, True), (1.0 / t, False)):
        N = round(value)
        if N >= 1 and abs(value - N) <= 1e-12 * N:
            return int(N), grows
    raise PreconditionError(f"scale factor {t} is not an integer or the reciprocal of one")


def scaled_grid(grid: GridSpec, t: float) -> GridSpec:
    N, grows = _integer_factor(t)
    L = grid.L * N if grows else grid.L / N
    return GridSpec(grid.d, L, grid.n)


def rescale_potential(pot: GeneralizedPotential, t: float) -> GeneralizedPotential:
    """``V_t(x) = t^-2 V(x/t)`` on the grid of half-width ``tL``.

    The target grid keeps the node count, so node ``i`` of the new grid sits
    at ``t`` times node ``i`` of the old one and the map is exact.
    """
    N, grows = _integer_factor(t)
    factor = float(N) if grows else 1.0 / N
    return GeneralizedPotential(scaled_grid(pot.grid, t), pot.vfin / factor**2, pot.inf_mask)


def rescale_field(f: ScalarField, t: float, power: float = 0.0) -> ScalarField:
    """Transport ``x -> t^power f(x/t)`` to the scaled grid."""
    N, grows = _integer_factor(t)
    factor = float(N) if grows else 1.0 / N
    return ScalarField(scaled_grid(f.grid, t), f.values * factor**power)
