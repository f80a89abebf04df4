"""Grid masks for kinetic cylinders."""
from __future__ import annotations

from typing import Optional

import numpy as np

from .coeffs import cylinder_membership
from .errors import InputError
from .solver.grid import GridSpec


def default_center(grid: GridSpec):
    """Top of the time range, centre of the x and v boxes."""
    t0 = grid.t_extent[1]
    x0 = np.array([(lo + hi) / 2 for lo, hi in grid.x_extent])
    v0 = np.array([(lo + hi) / 2 for lo, hi in grid.v_extent])
    return t0, x0, v0


def cylinder_mask(grid: GridSpec, r: float, z0=None, b_v0=None, forward: bool = False) -> np.ndarray:
    """Boolean mask over ``grid.shape`` of cells whose centres lie in
    Q^b_r(z0); with b_v0 = None (zero drift) this is the plain cylinder
    (t0 - r^2, t0] x B_{r^3}(x0) x B_r(v0)."""
    if z0 is None:
        z0 = default_center(grid)
    t0, x0, v0 = z0
    d = grid.d
    x0 = np.atleast_1d(np.asarray(x0, dtype=float)).reshape(d)
    v0 = np.atleast_1d(np.asarray(v0, dtype=float)).reshape(d)
    b_v0 = np.zeros(d) if b_v0 is None else np.atleast_1d(np.asarray(b_v0, dtype=float)).reshape(d)
    T, X, V = grid.mesh()
    period = grid.x_lengths[0] if grid.periodic_x else None
    if period is not None and len(set(grid.x_lengths)) > 1:
        raise InputError("periodic cylinders need equal x periods on every axis")
    T = np.broadcast_to(T, grid.shape)
    X = np.broadcast_to(X, grid.shape + (d,))
    V = np.broadcast_to(V, grid.shape + (d,))
    return np.asarray(cylinder_membership((T, X, V), (t0, x0, v0), r, b_v0, period, forward), dtype=bool)


def as_mask(grid: GridSpec, region) -> np.ndarray:
    """Accept a boolean mask or a tuple (r, z0[, b_v0])."""
    if region is None:
        return np.ones(grid.shape, dtype=bool)
    if isinstance(region, np.ndarray) and region.dtype == bool:
        if region.shape != grid.shape:
            raise InputError(f"region mask must have shape {grid.shape}")
        return region
    if isinstance(region, (int, float)):
        return cylinder_mask(grid, float(region))
    return cylinder_mask(grid, *region)
