"""Microlocal split of the transformed velocity average.

With I(tau, xi) = int h^(tau, xi, v) psi(v) dv the split is

    I1 = int h^ psi zeta((tau + b(v).xi)/m) dv,   I2 = int h^ psi (1 - zeta(...)) dv,

where zeta is a fixed cutoff equal to 1 on [-1/2, 1/2] and 0 outside
[-1, 1], and m(xi) = 1 for |xi| <= 1, |xi|^rho otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..coeffs import VelocityField
from ..solver.grid import ScalarField
from .fourier import frequency_grids, taper_array, taper_flags, weights_on_grid


def smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def zeta(y) -> np.ndarray:
    """Cutoff: smoothstep composed with itself on the ramp 1/2 <= |y| <= 1."""
    a = np.abs(np.asarray(y, dtype=float))
    return smoothstep(smoothstep(2.0 * (1.0 - a)))


def m_schedule(xi_abs, rho: float) -> np.ndarray:
    xi_abs = np.asarray(xi_abs, dtype=float)
    return np.where(xi_abs <= 1.0, 1.0, np.maximum(xi_abs, 1.0) ** rho)


@dataclass
class SplitDiagnostics:
    partition_error: float
    outside_support_max: float
    outside_support_relative: float
    i1_max: float
    bound_constant: float
    rho: float
    b_sup: float


@dataclass
class MicrolocalSplit:
    I: np.ndarray
    I1: np.ndarray
    I2: np.ndarray
    tau: np.ndarray
    xi: np.ndarray
    diagnostics: SplitDiagnostics


def microlocal_split(h: ScalarField, b: VelocityField, psi, alpha: float = 1.0,
                     rho: Optional[float] = None, taper="auto") -> MicrolocalSplit:
    """Compute I, I1, I2 on the discrete (tau, xi) lattice with diagnostics.

    Diagnostics: (a) max |I - (I1 + I2)|; (b) max |I1| on
    {|tau| > m + sup|b| |xi|}, where sup|b| runs over the support of psi;
    (c) the smallest K with |I1|^2 <= K |psi|_inf^2 |h^|_{L2_v}^2 (m/|xi|)^alpha
    over xi != 0.
    """
    g = h.grid
    d = g.d
    if rho is None:
        rho = (2.0 + alpha) / (4.0 + alpha)
    w = weights_on_grid(psi, g)
    vol_v = float(np.prod(g.dv))
    # transform each v slice over (t, x)
    hv = np.moveaxis(h.values.reshape((g.nt,) + (g.nx,) * d + (-1,)), -1, 0)
    hv = taper_array(hv, taper_flags(g, taper), first_axis=1)
    spac = (g.dt,) + g.dx
    Hhat = np.fft.fftn(hv, axes=tuple(range(1, 2 + d))) * float(np.prod(spac))
    freqs = frequency_grids(hv.shape[1:], spac)
    mesh = np.meshgrid(*freqs, indexing="ij")
    tau = mesh[0]
    xis = mesh[1:]
    xi_abs = np.sqrt(sum(x ** 2 for x in xis))
    m = m_schedule(xi_abs, rho)
    V = np.stack(np.meshgrid(*g.v_axes(), indexing="ij"), axis=-1).reshape(-1, d)
    bv = b(V).reshape(-1, d)
    wf = w.reshape(-1)
    active = np.nonzero(wf)[0]
    I = np.zeros(tau.shape, dtype=complex)
    I1 = np.zeros(tau.shape, dtype=complex)
    I2 = np.zeros(tau.shape, dtype=complex)
    l2v = np.zeros(tau.shape)
    for j in range(V.shape[0]):
        hj = Hhat[j]
        l2v += np.abs(hj) ** 2 * vol_v
        if wf[j] == 0:
            continue
        phase = tau + sum(bv[j, a] * xis[a] for a in range(d))
        z = zeta(phase / m)
        base = hj * (wf[j] * vol_v)
        I += base
        I1 += base * z
        I2 += base * (1.0 - z)
    b_sup = float(np.max(np.linalg.norm(bv[active], axis=-1))) if active.size else 0.0
    outside = np.abs(tau) > m + b_sup * xi_abs
    i1_abs = np.abs(I1)
    i1_max = float(i1_abs.max())
    out_max = float(i1_abs[outside].max()) if outside.any() else 0.0
    psi_inf = float(np.abs(wf).max())
    nz = (xi_abs > 0) & (l2v > 0)
    denom = psi_inf ** 2 * l2v[nz] * (m[nz] / xi_abs[nz]) ** alpha
    K_emp = float(np.max(i1_abs[nz] ** 2 / denom)) if nz.any() else 0.0
    diag = SplitDiagnostics(
        partition_error=float(np.max(np.abs(I - (I1 + I2)))),
        outside_support_max=out_max,
        outside_support_relative=out_max / i1_max if i1_max > 0 else 0.0,
        i1_max=i1_max,
        bound_constant=K_emp,
        rho=rho,
        b_sup=b_sup,
    )
    return MicrolocalSplit(I, I1, I2, tau, xi_abs, diag)
