"""Velocity averages and fractional Sobolev norms on (t, x) grids.

Frequencies are physical angular frequencies 2 pi k / extent. The time axis
holds ``nt`` samples spaced ``dt`` and is treated as one period of length
``nt * dt``; x is periodic with its grid length. Non-periodic axes are
multiplied by a raised-cosine taper over the outer 10% before transforming.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ..errors import DomainError, InputError
from ..solver.grid import GridSpec, ScalarField

TAPER_FRACTION = 0.10


@dataclass
class TXField:
    """A real function sampled on the (t, x) part of a grid."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        want = (self.grid.nt,) + (self.grid.nx,) * self.grid.d
        if self.values.shape != want:
            raise InputError(f"(t, x) field must have shape {want}, got {self.values.shape}")

    @property
    def spacings(self) -> tuple[float, ...]:
        return (self.grid.dt,) + self.grid.dx

    @property
    def periods(self) -> tuple[float, ...]:
        g = self.grid
        return (g.nt * g.dt,) + tuple(n * h for n, h in zip((g.nx,) * g.d, g.dx))


class SmoothBump:
    """C-infinity bump exp(-1/(1-|y|^2)) with y = (v - center)/radius,
    optionally normalised to unit integral."""

    def __init__(self, radius: float = 1.0, center=0.0, d: int = 1, scale: float = 1.0):
        self.radius = float(radius)
        self.center = np.broadcast_to(np.asarray(center, dtype=float), (d,)).copy()
        self.d = d
        self.scale = float(scale)

    def __call__(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.d == 1 and (v.ndim == 0 or v.shape[-1] != 1):
            v = v[..., None]
        y2 = np.sum(((v - self.center) / self.radius) ** 2, axis=-1)
        inside = y2 < 1
        q = np.where(inside, 1.0 - y2, 1.0)
        return self.scale * np.where(inside, np.exp(-1.0 / q), 0.0)

    def sup(self) -> float:
        return self.scale * np.exp(-1.0)

    def support_inside(self, grid: GridSpec) -> bool:
        for a, (lo, hi) in enumerate(grid.v_extent):
            if self.center[a] - self.radius < lo - 1e-12 or self.center[a] + self.radius > hi + 1e-12:
                return False
        return True


def weights_on_grid(psi, grid: GridSpec) -> np.ndarray:
    """psi sampled on the v lattice, shape (nv,)*d, with a support check."""
    if isinstance(psi, SmoothBump):
        if not psi.support_inside(grid):
            raise DomainError("support of psi exceeds the velocity grid")
    if callable(psi):
        V = np.stack(np.meshgrid(*grid.v_axes(), indexing="ij"), axis=-1)
        w = np.asarray(psi(V), dtype=float).reshape((grid.nv,) * grid.d)
    else:
        w = np.asarray(psi, dtype=float)
        if w.shape != (grid.nv,) * grid.d:
            raise InputError(f"psi samples must have shape {(grid.nv,) * grid.d}")
    if not grid.periodic_v:
        edge = 0.0
        for a in range(grid.d):
            edge = max(edge, float(np.abs(np.take(w, [0, -1], axis=a)).max()))
        if edge > 1e-12 * max(1.0, float(np.abs(w).max())):
            raise DomainError("psi does not vanish at the edge of the velocity grid")
    return w


def velocity_average(h: ScalarField, psi) -> TXField:
    """h_psi(t, x) = int h(t, x, v) psi(v) dv by the trapezoidal rule."""
    g = h.grid
    w = weights_on_grid(psi, g)
    vol = float(np.prod(g.dv))
    # psi vanishes on the boundary cells, so trapezoid and midpoint weights coincide
    axes = tuple(range(1 + g.d, 1 + 2 * g.d))
    vals = np.tensordot(h.values, w, axes=(axes, tuple(range(g.d)))) * vol
    return TXField(g, vals)


def raised_cosine(n: int, fraction: float = TAPER_FRACTION) -> np.ndarray:
    """Window equal to 1 in the middle and rising as 0.5(1 - cos) over the
    outer ``fraction`` of the samples on each side."""
    s = (np.arange(n) + 0.5) / n
    w = np.ones(n)
    edge = np.minimum(s, 1 - s)
    m = edge < fraction
    w[m] = 0.5 * (1 - np.cos(np.pi * edge[m] / fraction))
    return w


def taper_flags(grid: GridSpec, taper) -> tuple[bool, ...]:
    """Per (t, x...) axis: whether to window. ``"auto"`` or True windows t
    and any non-periodic x axis; False windows nothing; a sequence is used
    as given."""
    d = grid.d
    if taper is True or taper == "auto":
        return (True,) + (not grid.periodic_x,) * d
    if taper is False or taper is None:
        return (False,) * (1 + d)
    return tuple(bool(a) for a in taper)


def taper_array(vals: np.ndarray, flags: Sequence[bool], first_axis: int = 0) -> np.ndarray:
    """Multiply the axes ``first_axis + i`` flagged in ``flags`` by the window."""
    for i, on in enumerate(flags):
        if on:
            ax = first_axis + i
            shape = [1] * vals.ndim
            shape[ax] = vals.shape[ax]
            vals = vals * raised_cosine(vals.shape[ax]).reshape(shape)
    return vals


def apply_taper(u: TXField, taper="auto") -> np.ndarray:
    return taper_array(np.asarray(u.values), taper_flags(u.grid, taper))


def frequency_grids(shape: Sequence[int], spacings: Sequence[float]) -> list[np.ndarray]:
    """Angular frequencies 2 pi k / (n h) per axis, in numpy FFT order."""
    return [2 * np.pi * np.fft.fftfreq(n, d=h) for n, h in zip(shape, spacings)]


def frequency_magnitudes(shape: Sequence[int], spacings: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """|tau| and |xi| broadcast over the full transform shape."""
    f = frequency_grids(shape, spacings)
    mesh = np.meshgrid(*f, indexing="ij")
    tau = np.abs(mesh[0])
    xi = np.sqrt(sum(m ** 2 for m in mesh[1:]))
    return tau, xi


def spectral_weight(tau: np.ndarray, xi: np.ndarray, varsigma: float, convention: str) -> np.ndarray:
    if convention == "homogeneous_plus_L2":
        return (tau + xi) ** (2 * varsigma) + 1.0
    if convention == "inhomogeneous":
        return (1.0 + tau + xi) ** (2 * varsigma)
    raise InputError(f"unknown Sobolev convention {convention!r}")


def fractional_sobolev_norm(u: Union[TXField, np.ndarray], varsigma: float,
                            convention: str = "homogeneous_plus_L2", taper="auto",
                            spacings: Optional[Sequence[float]] = None) -> float:
    """H^varsigma norm on the (t, x) torus.

    homogeneous_plus_L2: sqrt(sum |u^|^2 (|tau|+|xi|)^(2 varsigma) + sum |u^|^2);
    inhomogeneous: sqrt(sum |u^|^2 (1+|tau|+|xi|)^(2 varsigma)).
    Coefficients are scaled so that the plain sum reproduces the discrete L2
    norm sqrt(cell volume * sum |u|^2). Raw arrays need ``spacings``.
    """
    if isinstance(u, TXField):
        vals = apply_taper(u, taper)
        h = u.spacings
    else:
        if spacings is None:
            raise InputError("spacings are required for raw arrays")
        vals = np.asarray(u)
        h = tuple(spacings)
    if not np.any(vals):
        return 0.0
    U = np.fft.fftn(vals)
    tau, xi = frequency_magnitudes(vals.shape, h)
    w = spectral_weight(tau, xi, varsigma, convention)
    scale = float(np.prod(h)) / vals.size
    return float(np.sqrt(scale * np.sum(np.abs(U) ** 2 * w)))


def l2_norm(u: TXField, taper=False) -> float:
    vals = apply_taper(u, taper)
    return float(np.sqrt(np.prod(u.spacings) * np.sum(np.abs(vals) ** 2)))


def mollifier(eps: float, d: int = 1) -> Callable:
    """Normalised C-infinity mollifier rho_eps(y) = eps^-d rho(y/eps) with rho
    the unit bump; the 1-d normalising constant is computed once numerically."""
    from scipy.integrate import quad

    if d == 1:
        c = quad(lambda y: np.exp(-1.0 / (1.0 - y * y)), -1, 1)[0]
    else:
        c = 2 * np.pi * quad(lambda r: r * np.exp(-1.0 / (1.0 - r * r)), 0, 1)[0]
    base = SmoothBump(1.0, 0.0, d)

    def rho(y):
        y = np.asarray(y, dtype=float)
        return base(y / eps) / (c * eps ** d)

    return rho


def mollifier_scale(tau, xi, gamma: float, delta: float):
    """eps(tau, xi) = (|tau| + |xi|)^(-gamma/delta)."""
    return (np.abs(tau) + np.abs(xi)) ** (-gamma / delta)
