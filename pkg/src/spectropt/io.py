"""JSON and CSV serialization of fields, potentials and small tables."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grid import GeneralizedPotential, GridSpec, ScalarField


def field_to_dict(f: ScalarField) -> dict:
    g = f.grid
    return {"d": g.d, "L": g.L, "n": g.n, "values": [float(x) for x in f.values.ravel()]}


def potential_to_dict(pot: GeneralizedPotential) -> dict:
    g = pot.grid
    return {
        "d": g.d,
        "L": g.L,
        "n": g.n,
        "values": [float(x) for x in pot.vfin.ravel()],
        "mask": [bool(x) for x in pot.inf_mask.ravel()],
    }


def _grid_of(data: dict) -> GridSpec:
    try:
        grid = GridSpec(int(data["d"]), float(data["L"]), int(data["n"]))
    except KeyError as exc:
        raise ConfigError(f"missing grid key {exc}") from None
    if len(data.get("values", [])) != grid.size:
        raise ConfigError(f"expected {grid.size} values, got {len(data.get('values', []))}")
    return grid


def field_from_dict(data: dict) -> ScalarField:
    grid = _grid_of(data)
    return ScalarField(grid, np.asarray(data["values"], dtype=float).reshape(grid.shape))


def potential_from_dict(data: dict) -> GeneralizedPotential:
    grid = _grid_of(data)
    vfin = np.asarray(data["values"], dtype=float).reshape(grid.shape)
    mask = data.get("mask")
    mask = np.zeros(grid.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool).reshape(grid.shape)
    return GeneralizedPotential(grid, vfin, mask)


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, non-finite floats as strings."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def load_potential(path) -> GeneralizedPotential:
    return potential_from_dict(read_json(path))


def save_potential(path, pot: GeneralizedPotential) -> Path:
    return write_json(path, potential_to_dict(pot))


def save_field(path, f: ScalarField) -> Path:
    return write_json(path, field_to_dict(f))


def load_field(path) -> ScalarField:
    return field_from_dict(read_json(path))


def field_to_csv(path, f: ScalarField, mask=None) -> Path:
    """Rows ``index, x, [y], value[, masked]``."""
    path = Path(path)
    g = f.grid
    X = [x.ravel() for x in g.coords()]
    vals = f.values.ravel()
    head = ["index", "x"] + (["y"] if g.d == 2 else []) + ["value"]
    if mask is not None:
        head.append("masked")
        mask = np.asarray(mask, dtype=bool).ravel()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(head)
        for i in range(g.size):
            row = [i] + [repr(float(x[i])) for x in X] + [repr(float(vals[i]))]
            if mask is not None:
                row.append(int(mask[i]))
            w.writerow(row)
    return path


def field_from_csv(path, grid: GridSpec) -> ScalarField:
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    vals = np.zeros(grid.size)
    for r in rows:
        vals[int(r["index"])] = float(r["value"])
    return ScalarField(grid, vals.reshape(grid.shape))


def write_table(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return path
