"""Semi-Lagrangian solver for (d/dt + b(v).grad_x) h = div_v g1 + g0 on a
periodic x-torus.

Along each straight characteristic the homogeneous part is read off the
initial datum with four-point cubic Lagrange interpolation in x; sources are
integrated by the trapezoidal rule in t, transporting the running integral
one step at a time.
"""
from __future__ import annotations

from typing import Callable, Optional, Union

import numpy as np

from ..coeffs import VelocityField
from ..errors import InputError, UnsupportedConfigError
from .grid import GridSpec, ScalarField, interp_periodic_shift_weights


def shift_periodic(F: np.ndarray, shift_cells: list, d: int) -> np.ndarray:
    """Evaluate F at x_j - shift along each of the first ``d`` axes.

    ``F`` has shape (nx,)*d + V where V broadcasts against each entry of
    ``shift_cells`` (the shift per x axis in units of the grid step). The
    cubic interpolation is applied axis by axis.
    """
    out = F
    for a in range(d):
        n = out.shape[a]
        u = -np.asarray(shift_cells[a], dtype=float)
        k = np.floor(u)
        frac = u - k
        k = k.astype(np.int64)
        weights = interp_periodic_shift_weights(frac)
        j = np.arange(n).reshape((1,) * a + (n,) + (1,) * (out.ndim - 1 - a))
        acc = None
        for o, w in zip((-1, 0, 1, 2), weights):
            idx = np.broadcast_to(np.mod(j + k + o, n), out.shape)
            term = w * np.take_along_axis(out, idx, axis=a)
            acc = term if acc is None else acc + term
        out = acc
    return out


def _velocity_shape(b: VelocityField, grid: GridSpec) -> np.ndarray:
    """b evaluated on the v-lattice: shape (nv,)*d + (d,)."""
    V = np.stack(np.meshgrid(*grid.v_axes(), indexing="ij"), axis=-1)
    return b(V).reshape((grid.nv,) * grid.d + (grid.d,))


def _as_xv(data, grid: GridSpec, what: str) -> np.ndarray:
    if isinstance(data, ScalarField):
        vals = data.values
        return vals[0] if vals.shape == grid.shape else vals.reshape(grid.xv_shape)
    if callable(data):
        X, V = grid.mesh_xv()
        return np.broadcast_to(np.asarray(data(X, V), dtype=float), grid.xv_shape).copy()
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 0:
        return np.full(grid.xv_shape, float(arr))
    if arr.shape == grid.shape:
        return arr[0]
    if arr.shape != grid.xv_shape:
        raise InputError(f"{what} must have shape {grid.xv_shape}")
    return arr


def _as_full(data, grid: GridSpec, trailing: tuple = ()) -> Optional[np.ndarray]:
    if data is None:
        return None
    if isinstance(data, ScalarField):
        return data.values
    if callable(data):
        T, X, V = grid.mesh()
        return np.broadcast_to(np.asarray(data(T, X, V), dtype=float), grid.shape + trailing).copy()
    arr = np.asarray(data, dtype=float)
    return np.broadcast_to(arr, grid.shape + trailing)


def divergence_v(g1: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Central-difference div_v of a vector field of shape grid.shape + (d,)."""
    d = grid.d
    out = np.zeros(g1.shape[:-1])
    for a in range(d):
        axis = 1 + d + a
        comp = g1[..., a]
        h = grid.dv[a]
        if grid.periodic_v:
            out += (np.roll(comp, -1, axis=axis) - np.roll(comp, 1, axis=axis)) / (2 * h)
        else:
            out += np.gradient(comp, h, axis=axis, edge_order=2)
    return out


def solve_transport(b: VelocityField, h0, grid: GridSpec, g0=None, g1=None) -> ScalarField:
    """Solve the transport equation on the full (t, x, v) grid.

    ``h0`` is the datum at ``t_start`` (ScalarField, array of shape
    ``grid.xv_shape`` or callable ``h0(X, V)``). ``g0`` is a scalar source and
    ``g1`` a vector field whose v-divergence is added to it; both may be
    arrays, ScalarFields, callables ``g(T, X, V)`` or None.
    """
    if not grid.periodic_x:
        raise UnsupportedConfigError("solve_transport needs periodic_x = true (characteristics wrap)")
    if b.d != grid.d:
        raise InputError("dimension of b does not match the grid")
    d = grid.d
    H0 = _as_xv(h0, grid, "h0")
    bv = _velocity_shape(b, grid)
    t = grid.t()
    elapsed = t - t[0]
    out = np.empty(grid.shape)
    out[0] = H0
    for k in range(1, grid.nt):
        shifts = [bv[..., a] * elapsed[k] / grid.dx[a] for a in range(d)]
        out[k] = shift_periodic(H0, shifts, d)

    G = _as_full(g0, grid)
    if g1 is not None:
        div = divergence_v(np.asarray(_as_full(g1, grid, (d,))), grid)
        G = div if G is None else G + div
    if G is not None:
        S = np.zeros(grid.xv_shape)
        for k in range(1, grid.nt):
            step = t[k] - t[k - 1]
            shifts = [bv[..., a] * step / grid.dx[a] for a in range(d)]
            S = shift_periodic(S + 0.5 * step * G[k - 1], shifts, d) + 0.5 * step * G[k]
            out[k] += S
    return ScalarField(grid, out).check_finite("transport solution")


def solve_transport_at(b: VelocityField, h0_slice, v, grid: GridSpec) -> np.ndarray:
    """Homogeneous solve at a single velocity ``v``: returns shape (nt,) + (nx,)*d.

    Uses the same arithmetic as :func:`solve_transport`, so the result equals
    the corresponding v-slice of the full solve bit for bit.
    """
    if not grid.periodic_x:
        raise UnsupportedConfigError("solve_transport needs periodic_x = true (characteristics wrap)")
    d = grid.d
    v = np.asarray(v, dtype=float).reshape(d)
    bv = b(v).reshape(d)
    H0 = np.asarray(h0_slice, dtype=float)
    t = grid.t()
    elapsed = t - t[0]
    out = np.empty((grid.nt,) + H0.shape)
    out[0] = H0
    for k in range(1, grid.nt):
        shifts = [np.asarray(bv[a] * elapsed[k] / grid.dx[a]) for a in range(d)]
        out[k] = shift_periodic(H0, shifts, d)
    return out
