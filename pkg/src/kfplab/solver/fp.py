"""IMEX solver for the kinetic Fokker-Planck equation

    (d/dt + b(v).grad_x) f = div_v(A grad_v f) + B.grad_v f + s.

Each step applies explicit conservative upwinding for b.grad_x, explicit
centred differences for B.grad_v f, the explicit source, and finally a
backward-Euler solve for the flux-form diffusion. The diffusion does not
couple x, so the sparse system is block diagonal with one block per x point.
Diagonal face coefficients are harmonic means of the neighbouring cell
values; the v boundary is periodic or homogeneous Dirichlet on a ghost layer.
"""
from __future__ import annotations

import math
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..coeffs import CoefficientSet, check_hypotheses
from ..errors import ConfigError, InputError, NumericalError
from .grid import GridSpec, ScalarField
from .transport import _as_xv, _velocity_shape

CFL_SAFETY = 0.9


def _neighbour(idx: np.ndarray, axis: int, step: int, periodic: bool):
    """Index of the neighbour ``step`` cells along ``axis`` plus a validity mask."""
    nb = np.roll(idx, -step, axis=axis)
    if periodic:
        return nb, np.ones(idx.shape, dtype=bool)
    n = idx.shape[axis]
    pos = np.arange(n).reshape((1,) * axis + (n,) + (1,) * (idx.ndim - axis - 1))
    ok = np.broadcast_to((pos + step >= 0) & (pos + step < n), idx.shape)
    return nb, ok


def diffusion_matrix(Acell: np.ndarray, grid: GridSpec) -> sp.csr_matrix:
    """Flux-form discretisation of div_v(A grad_v .) on the xv lattice.

    ``Acell`` holds A at the cell centres, shape ``grid.xv_shape + (d, d)``.
    """
    d = grid.d
    shape = grid.xv_shape
    N = int(np.prod(shape))
    idx = np.arange(N).reshape(shape)
    per = grid.periodic_v
    rows, cols, vals = [], [], []

    def add(r, c, v, mask):
        rows.append(r[mask])
        cols.append(c[mask])
        vals.append(np.broadcast_to(v, r.shape)[mask])

    for a in range(d):
        ax = d + a
        h = grid.dv[a]
        acc = Acell[..., a, a]
        nb, ok = _neighbour(idx, ax, 1, per)
        an = np.roll(acc, -1, axis=ax)
        k = 2.0 * acc * an / (acc + an) / h ** 2
        add(idx, nb, k, ok)
        add(idx, idx, -k, ok)
        add(nb, idx, k, ok)
        add(nb, nb, -k, ok)
        if not per:
            # faces against the zero ghost layer
            lo = np.zeros(shape, dtype=bool)
            hi = np.zeros(shape, dtype=bool)
            sl = [slice(None)] * len(shape)
            sl[ax] = 0
            lo[tuple(sl)] = True
            sl[ax] = -1
            hi[tuple(sl)] = True
            add(idx, idx, -acc / h ** 2, lo | hi)
        for bb in range(d):
            if bb == a:
                continue
            # flux A_ab d_b f through the face (c, c + e_a)
            hb = grid.dv[bb]
            aab = 0.5 * (Acell[..., a, bb] + np.roll(Acell[..., a, bb], -1, axis=ax))
            axb = d + bb
            coef = aab / (4.0 * hb * h)
            for sgn, step in ((1.0, 1), (-1.0, -1)):
                c1, ok1 = _neighbour(idx, axb, step, per)
                c2, ok2 = _neighbour(nb, axb, step, per)
                for target, tsign in ((idx, 1.0), (nb, -1.0)):
                    add(target, c1, tsign * sgn * coef, ok & ok1)
                    add(target, c2, tsign * sgn * coef, ok & ok2)
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    return sp.csr_matrix((v, (r, c)), shape=(N, N))


def _grad_v(f: np.ndarray, grid: GridSpec, a: int, lead: int = 0) -> np.ndarray:
    """Centred d/dv_a; ``lead`` counts axes in front of the x axes."""
    ax = lead + grid.d + a
    h = grid.dv[a]
    if grid.periodic_v:
        return (np.roll(f, -1, axis=ax) - np.roll(f, 1, axis=ax)) / (2 * h)
    pad = [(0, 0)] * f.ndim
    pad[ax] = (1, 1)
    g = np.pad(f, pad)
    n = f.shape[ax]
    return (np.take(g, np.arange(2, n + 2), axis=ax) - np.take(g, np.arange(0, n), axis=ax)) / (2 * h)


def _upwind(f: np.ndarray, bv: np.ndarray, grid: GridSpec) -> np.ndarray:
    """b(v).grad_x f with one-sided differences chosen by the sign of b."""
    d = grid.d
    out = np.zeros_like(f)
    for a in range(d):
        h = grid.dx[a]
        ba = bv[..., a]
        if grid.periodic_x:
            back = f - np.roll(f, 1, axis=a)
            fwd = np.roll(f, -1, axis=a) - f
        else:
            pad = [(0, 0)] * f.ndim
            pad[a] = (1, 1)
            g = np.pad(f, pad)
            n = f.shape[a]
            back = f - np.take(g, np.arange(0, n), axis=a)
            fwd = np.take(g, np.arange(2, n + 2), axis=a) - f
        out += (np.maximum(ba, 0.0) * back + np.minimum(ba, 0.0) * fwd) / h
    return out


def cfl_number(C: CoefficientSet, grid: GridSpec, substeps: int = 1) -> float:
    """dt * sum_a max|b_a| / dx_a for the internal step."""
    bv = _velocity_shape(C.b, grid)
    dt = grid.dt / substeps
    return float(sum(dt * np.max(np.abs(bv[..., a])) / grid.dx[a] for a in range(grid.d)))


class _Diffusion:
    """Caches the LU factorisation of (I - dt L) while A is unchanged."""

    def __init__(self, C: CoefficientSet, grid: GridSpec, dt: float):
        self.C, self.grid, self.dt = C, grid, dt
        self.X, self.V = grid.mesh_xv()
        self._A = None
        self._lu = None
        self.checked = False

    def _sample(self, t: float) -> np.ndarray:
        A = np.array(self.C.A_at(np.asarray(t), self.X, self.V), dtype=float)
        return A

    def solve(self, rhs: np.ndarray, t: float) -> np.ndarray:
        A = self._sample(t)
        if self._A is None or not np.array_equal(A, self._A):
            if self.grid.d == 1:
                a = A[..., 0, 0]
                if a.min() < self.C.lam * (1 - 1e-12) or a.max() > self.C.Lam * (1 + 1e-12):
                    check_hypotheses(A, None, self.C.lam, self.C.Lam)
            else:
                check_hypotheses(A, None, self.C.lam, self.C.Lam)
            L = diffusion_matrix(A, self.grid)
            M = sp.identity(L.shape[0], format="csc") - self.dt * L.tocsc()
            self._lu = spla.splu(M.tocsc())
            self._A = A
        return self._lu.solve(rhs.ravel()).reshape(rhs.shape)


def solve_fp(C: CoefficientSet, f_init, grid: GridSpec, substeps: Union[int, str] = 1) -> ScalarField:
    """Evolve ``f_init`` (ScalarField, array or callable ``f(X, V)``) over the
    grid's time axis, returning every snapshot.

    ``substeps`` internal steps are taken between stored snapshots; ``"auto"``
    picks the smallest count meeting the advection CFL bound
    dt * sum_a max|b_a| / dx_a <= 0.9.
    """
    if C.d != grid.d:
        raise InputError("dimension of the coefficients does not match the grid")
    if substeps == "auto":
        c1 = cfl_number(C, grid, 1)
        substeps = max(1, math.ceil(c1 / CFL_SAFETY - 1e-12))
    substeps = int(substeps)
    if substeps < 1:
        raise ConfigError("substeps must be >= 1")
    cfl = cfl_number(C, grid, substeps)
    if cfl > CFL_SAFETY * (1 + 1e-12):
        raise ConfigError(
            f"advection CFL violated: dt*sum|b|/dx = {cfl:.4g} > {CFL_SAFETY} "
            f"(use more time points or substeps)")
    f = _as_xv(f_init, grid, "f_init").copy()
    bv = _velocity_shape(C.b, grid)
    dt = grid.dt / substeps
    t = grid.t()
    X, V = grid.mesh_xv()
    diff = _Diffusion(C, grid, dt)
    drift, source = C.B is not None, C.s is not None
    if drift:
        B0 = C.B_at(np.asarray(t[0]), X, V)
        check_hypotheses(np.eye(grid.d) * C.lam, B0, C.lam, C.Lam)
    out = np.empty(grid.shape)
    out[0] = f
    for k in range(1, grid.nt):
        for j in range(substeps):
            tn = t[k - 1] + j * dt
            rhs = f - dt * _upwind(f, bv, grid)
            if drift:
                B = C.B_at(np.asarray(tn), X, V)
                for a in range(grid.d):
                    rhs += dt * B[..., a] * _grad_v(f, grid, a)
            if source:
                rhs += dt * C.s_at(np.asarray(tn), X, V)
            f = diff.solve(rhs, tn + dt)
        if not np.all(np.isfinite(f)):
            raise NumericalError(f"non-finite values in solve_fp at t = {t[k]:.6g}")
        out[k] = f
    return ScalarField(grid, out)
