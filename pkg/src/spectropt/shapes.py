"""Built-in potentials: domains (interval, disk, square, rectangle, ellipse,
annulus) and smooth potentials (constant, oscillator).

Domains are described by a level-set function ``phi`` (negative inside).
Nodes outside are masked. With ``boundary="cut"`` every interior node whose
grid edge crosses the boundary gets the extra term ``(1/theta - 1)/h^2`` in
``vfin``, where ``theta*h`` is the distance along that edge to the zero of
``phi``. That is the exact energy of a linear profile vanishing on the true
boundary, so curved domains converge at O(h^2) instead of O(h).
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .grid import GeneralizedPotential, GridSpec

BOUNDARIES = ("cut", "staircase")


def _crossing_fraction(phi, origin, step, iters=60):
    """Fraction ``s`` in (0, 1] with phi(origin + s*step) = 0, by bisection.

    ``phi(origin) < 0 <= phi(origin + step)`` holds on every entry.
    """
    lo = np.zeros(origin[0].shape)
    hi = np.ones(origin[0].shape)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        val = phi(*[o + mid * s for o, s in zip(origin, step)])
        inside = val < 0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return hi


def level_set_domain(grid: GridSpec, phi, boundary: str = "cut", vfin=0.0) -> GeneralizedPotential:
    if boundary not in BOUNDARIES:
        raise ConfigError(f"unknown boundary treatment {boundary!r}")
    X = grid.coords()
    inside = np.asarray(phi(*X)) < 0
    v = np.broadcast_to(np.asarray(vfin, dtype=float), grid.shape).copy()
    if boundary == "cut":
        h = grid.h
        for ax in range(grid.d):
            for sign in (-1, 1):
                neighbour = np.zeros(grid.shape, dtype=bool)
                src = [slice(None)] * grid.d
                dst = [slice(None)] * grid.d
                if sign == 1:
                    src[ax], dst[ax] = slice(1, None), slice(None, -1)
                else:
                    src[ax], dst[ax] = slice(None, -1), slice(1, None)
                # neighbours past the box edge count as inside: the box
                # boundary is a full-length Dirichlet edge already
                neighbour[...] = True
                neighbour[tuple(dst)] = inside[tuple(src)]
                cut = inside & ~neighbour
                if not np.any(cut):
                    continue
                origin = [x[cut] for x in X]
                step = [np.full(origin[0].shape, sign * h if b == ax else 0.0) for b in range(grid.d)]
                theta = np.maximum(_crossing_fraction(phi, origin, step), 1e-8)
                v[cut] += (1.0 / theta - 1.0) / h**2
    return GeneralizedPotential(grid, v, ~inside)


def interval(grid: GridSpec, R: float = 1.0, center: float = 0.0, **kw) -> GeneralizedPotential:
    return ball(grid, R, (center,) if grid.d == 1 else (center, 0.0), **kw)


def ball(grid: GridSpec, R: float = 1.0, center=None, **kw) -> GeneralizedPotential:
    c = (0.0,) * grid.d if center is None else tuple(center)

    def phi(*x):
        return np.sqrt(sum((xi - ci) ** 2 for xi, ci in zip(x, c))) - R

    return level_set_domain(grid, phi, **kw)


disk = ball


def rectangle(grid: GridSpec, a: float, b: float, center=(0.0, 0.0), **kw) -> GeneralizedPotential:
    """Axis-aligned rectangle with half-sides ``a`` (x) and ``b`` (y)."""
    _need_2d(grid, "rectangle")
    cx, cy = center

    def phi(x, y):
        return np.maximum(np.abs(x - cx) - a, np.abs(y - cy) - b)

    return level_set_domain(grid, phi, **kw)


def square(grid: GridSpec, a: float, center=(0.0, 0.0), **kw) -> GeneralizedPotential:
    return rectangle(grid, a, a, center, **kw)


def ellipse(grid: GridSpec, a: float, b: float, center=(0.0, 0.0), **kw) -> GeneralizedPotential:
    _need_2d(grid, "ellipse")
    cx, cy = center

    def phi(x, y):
        # not a distance, but its zero set and sign are what the cut needs
        return np.sqrt(((x - cx) / a) ** 2 + ((y - cy) / b) ** 2) - 1.0

    return level_set_domain(grid, phi, **kw)


def annulus(grid: GridSpec, r_in: float, r_out: float, center=(0.0, 0.0), **kw) -> GeneralizedPotential:
    _need_2d(grid, "annulus")
    cx, cy = center

    def phi(x, y):
        r = np.sqrt((x - cx) ** 2 + (y - cy) ** 2)
        return np.maximum(r - r_out, r_in - r)

    return level_set_domain(grid, phi, **kw)


def constant(grid: GridSpec, c: float) -> GeneralizedPotential:
    return GeneralizedPotential(grid, float(c))


def oscillator(grid: GridSpec, omega: float = 1.0) -> GeneralizedPotential:
    """``V = omega^2 |x|^2``; eigenvalues of ``-Delta + V`` are ``omega (2j + d)``."""
    return GeneralizedPotential(grid, omega**2 * grid.radius() ** 2)


def random_potential(grid: GridSpec, seed: int = 0, n_bumps: int = 4, masked: bool | None = None) -> GeneralizedPotential:
    """Seeded smooth potential: a sum of Gaussian bumps of random height and
    width on a small floor, optionally masked outside a random ellipse (2-d)
    or interval (1-d) that contains the origin."""
    rng = np.random.default_rng(seed)
    X = grid.coords()
    L = grid.L
    v = np.full(grid.shape, rng.uniform(0.0, 1.0) / L**2)
    for _ in range(n_bumps):
        c = rng.uniform(-0.6 * L, 0.6 * L, grid.d)
        s = rng.uniform(0.1, 0.4) * L
        a = rng.uniform(0.0, 50.0) / L**2
        v = v + a * np.exp(-sum((x - ci) ** 2 for x, ci in zip(X, c)) / (2 * s**2))
    if masked is None:
        masked = bool(rng.integers(2))
    if not masked:
        return GeneralizedPotential(grid, v)
    semi = rng.uniform(0.5, 0.9, grid.d) * L
    shift = rng.uniform(-0.3, 0.3, grid.d) * semi
    inside = sum(((x - c) / a) ** 2 for x, c, a in zip(X, shift, semi)) < 1.0
    return GeneralizedPotential(grid, v, ~inside)


def _need_2d(grid, name):
    if grid.d != 2:
        raise ConfigError(f"{name} needs a 2-d grid")


def builtin(grid: GridSpec, kind: str, **params) -> GeneralizedPotential:
    """Look up a built-in shape by name (used by the CLI)."""
    table = {
        "interval": interval,
        "disk": disk,
        "ball": ball,
        "square": square,
        "rectangle": rectangle,
        "ellipse": ellipse,
        "annulus": annulus,
        "constant": constant,
        "oscillator": oscillator,
        "free": lambda g: GeneralizedPotential.free(g),
        "random": random_potential,
    }
    if kind not in table:
        raise ConfigError(f"unknown built-in shape {kind!r}; choose from {sorted(table)}")
    try:
        return table[kind](grid, **params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for shape {kind!r}: {exc}") from None
