"""Weak-form residuals and truncations of sampled fields."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..coeffs import CoefficientSet
from ..errors import InputError
from .fp import _grad_v
from .grid import GridSpec, ScalarField


def truncate(f: ScalarField, mode: str = "positive_part", value: Optional[float] = None) -> ScalarField:
    """positive_part: max(f, 0); level: max(f - k, 0); shifted: max(f, 0) + l."""
    if mode == "positive_part":
        vals = np.maximum(f.values, 0.0)
    elif mode == "level":
        if value is None:
            raise InputError("mode 'level' needs the level k")
        vals = np.maximum(f.values - value, 0.0)
    elif mode == "shifted":
        if value is None:
            raise InputError("mode 'shifted' needs the shift l")
        vals = np.maximum(f.values, 0.0) + value
    else:
        raise InputError(f"unknown truncation mode {mode!r}")
    return ScalarField(f.grid, vals)


def _bump(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """exp(-1/(1-y^2)) on |y| < 1 and its derivative."""
    inside = np.abs(y) < 1
    yy = np.where(inside, y, 0.0)
    q = 1.0 - yy * yy
    val = np.where(inside, np.exp(-1.0 / q), 0.0)
    der = np.where(inside, val * (-2.0 * yy / (q * q)), 0.0)
    return val, der


@dataclass(frozen=True)
class TestBump:
    """Tensor-product bump centred at (tc, xc, vc) with half-widths (rt, rx, rv)."""

    tc: float
    xc: np.ndarray
    vc: np.ndarray
    rt: float
    rx: float
    rv: float

    def evaluate(self, grid: GridSpec):
        """phi, d_t phi, grad_x phi, grad_v phi on the full grid."""
        d = grid.d
        t = grid.t()
        pt, dpt = _bump((t - self.tc) / self.rt)
        dpt = dpt / self.rt
        fx, dfx = [], []
        for a, (ax, L) in enumerate(zip(grid.x_axes(), grid.x_lengths)):
            off = ax - self.xc[a]
            if grid.periodic_x:
                off = off - L * np.round(off / L)
            p, dp = _bump(off / self.rx)
            fx.append(p)
            dfx.append(dp / self.rx)
        fv, dfv = [], []
        for a, ax in enumerate(grid.v_axes()):
            p, dp = _bump((ax - self.vc[a]) / self.rv)
            fv.append(p)
            dfv.append(dp / self.rv)

        def outer(factors):
            out = factors[0]
            for f in factors[1:]:
                out = np.multiply.outer(out, f)
            return out

        phi = outer([pt] + fx + fv)
        phi_t = outer([dpt] + fx + fv)
        grad_x = [outer([pt] + [dfx[i] if i == a else fx[i] for i in range(d)] + fv) for a in range(d)]
        grad_v = [outer([pt] + fx + [dfv[i] if i == a else fv[i] for i in range(d)]) for a in range(d)]
        return phi, phi_t, grad_x, grad_v


def random_bumps(grid: GridSpec, count: int, seed: int = 0) -> list[TestBump]:
    """Seeded bumps whose supports stay inside the t range and the v box."""
    rng = np.random.default_rng(seed)
    t0, t1 = grid.t_extent
    T = t1 - t0
    out = []
    for _ in range(count):
        rt = rng.uniform(0.2, 0.35) * T
        tc = rng.uniform(t0 + rt, t1 - rt)
        xc, vc = [], []
        rx = rng.uniform(0.15, 0.3) * min(grid.x_lengths)
        rv = rng.uniform(0.15, 0.3) * min(hi - lo for lo, hi in grid.v_extent)
        for lo, hi in grid.x_extent:
            xc.append(rng.uniform(lo, hi) if grid.periodic_x else rng.uniform(lo + rx, hi - rx))
        for lo, hi in grid.v_extent:
            vc.append(rng.uniform(lo + rv, hi - rv))
        out.append(TestBump(tc, np.array(xc), np.array(vc), rt, rx, rv))
    return out


@dataclass(frozen=True)
class ResidualStats:
    max: float
    rms: float
    values: tuple


def weak_residual(f: ScalarField, C: CoefficientSet, test_count: int = 16, seed: int = 0) -> ResidualStats:
    """|int f (-d_t - b.grad_x) phi + A grad_v f . grad_v phi - (B.grad_v f + s) phi|
    over seeded smooth bumps phi, with grad_v f by centred differences and the
    integral by the rectangle rule on the grid."""
    grid = f.grid
    d = grid.d
    T, X, V = grid.mesh()
    bv = C.b(V)
    A = C.A_at(T, X, V)
    gv = np.stack([_grad_v(f.values, grid, a, lead=1) for a in range(d)], axis=-1)
    flux = np.einsum("...ij,...j->...i", A, gv)
    lower = C.B_at(T, X, V)
    drift = np.einsum("...i,...i->...", lower, gv) if C.B is not None else 0.0
    src = C.s_at(T, X, V) if C.s is not None else 0.0
    reaction = drift + src
    vol = grid.cell_volume
    vals = []
    for bump in random_bumps(grid, test_count, seed):
        phi, phi_t, gx, gvphi = bump.evaluate(grid)
        transport = phi_t + sum(bv[..., a] * gx[a] for a in range(d))
        integrand = -f.values * transport + sum(flux[..., a] * gvphi[a] for a in range(d)) - reaction * phi
        vals.append(abs(float(np.sum(integrand)) * vol))
    vals = np.array(vals)
    return ResidualStats(float(vals.max()), float(np.sqrt(np.mean(vals ** 2))), tuple(vals.tolist()))
