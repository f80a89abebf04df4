"""Oscillation decay over nested kinetic cylinders and empirical Hölder exponents.

Scales follow r_i = r_1 * ratio^i. The exponent beta_fit is the slope of
log osc against log r; beta_over_3 is the corresponding exponent for the
anisotropic point-pair distance max(|dt|^(1/2), |dx|^(1/3), |dv|).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize_scalar

from .coeffs import VelocityField, geometry_constants, periodic_offset, zoom_map
from .degiorgi import lp_norm
from .errors import InputError, ResolutionError
from .regions import cylinder_mask
from .solver.grid import ScalarField, sample_points

MIN_CELLS = 8


def oscillation(f: ScalarField, z0, r: float, b_v0, forward: bool = False, min_cells: int = MIN_CELLS) -> float:
    """max - min of f over cells whose centres lie in Q^b_r(z0)."""
    mask = cylinder_mask(f.grid, r, z0, b_v0, forward)
    count = int(np.count_nonzero(mask))
    if count < min_cells:
        raise ResolutionError(f"cylinder of radius {r:.4g} holds {count} cells, need at least {min_cells}")
    vals = f.values[mask]
    return float(vals.max() - vals.min())


@dataclass
class OscillationProfile:
    z0: tuple
    scales: np.ndarray
    osc_values: np.ndarray
    theta1_hat: float
    beta_fit: float
    beta_over_3: float
    r_squared: float
    source_correction: np.ndarray
    C_source: float = 0.0
    omega: float = float("nan")
    beta0: Optional[float] = None
    warnings: list = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", "osc", "source_correction", "ratio"])
            prev = None
            for r, o, s in zip(self.scales, self.osc_values, self.source_correction):
                ratio = o / prev if prev else float("nan")
                w.writerow([repr(float(r)), repr(float(o)), repr(float(s)), repr(float(ratio))])
                prev = o

    def summary(self) -> str:
        keys = {"beta_fit": self.beta_fit, "beta_over_3": self.beta_over_3,
                "theta1_hat": self.theta1_hat, "r_squared": self.r_squared, "C_source": self.C_source,
                "omega": self.omega}
        if self.beta0 is not None:
            keys["beta0"] = self.beta0
        lines = [f"{k}={float(v)!r}" for k, v in keys.items()]
        lines += [f"warning={w}" for w in self.warnings]
        return "\n".join(lines) + "\n"


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Slope, intercept and R^2 of y on x."""
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(coef[0]), float(coef[1]), r2


def fit_exponent(scales: np.ndarray, osc: np.ndarray, correction: Optional[np.ndarray] = None):
    """Return (beta, r_squared, C). With a nonzero correction the constant C
    in osc - C*correction is fitted jointly with the power law."""
    scales = np.asarray(scales, dtype=float)
    osc = np.asarray(osc, dtype=float)
    if np.all(osc == 0):
        return math.inf, 1.0, 0.0
    pos = osc > 0
    if np.count_nonzero(pos) < 2:
        return math.inf, 1.0, 0.0
    lr = np.log(scales[pos])
    if correction is None or not np.any(correction[pos] > 0):
        beta, _, r2 = _ols(lr, np.log(osc[pos]))
        return beta, r2, 0.0
    corr = np.asarray(correction, dtype=float)[pos]
    o = osc[pos]
    c_max = float(np.min(o[corr > 0] / corr[corr > 0]))

    def rss(C):
        y = np.log(o - C * corr)
        A = np.vstack([lr, np.ones_like(lr)]).T
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        return float(np.sum((y - A @ coef) ** 2))

    res = minimize_scalar(rss, bounds=(0.0, c_max * (1 - 1e-6)), method="bounded",
                          options={"xatol": 1e-10 * max(c_max, 1e-300)})
    C = float(res.x) if rss(res.x) < rss(0.0) else 0.0
    beta, _, r2 = _ols(lr, np.log(o - C * corr))
    return beta, r2, C


def _z0_parts(z0, d):
    t0, x0, v0 = z0
    return float(t0), np.atleast_1d(np.asarray(x0, dtype=float)).reshape(d), \
        np.atleast_1d(np.asarray(v0, dtype=float)).reshape(d)


def max_radius(f: ScalarField, z0, forward: bool = False) -> float:
    """Largest r for which Q_r(z0) stays inside the grid box (x is free when periodic)."""
    g = f.grid
    t0, x0, v0 = _z0_parts(z0, g.d)
    lim = []
    if not forward:
        lim.append(math.sqrt(max(t0 - g.t_extent[0], 0.0)))
    else:
        lim.append(math.sqrt(max(g.t_extent[1] - t0, 0.0)))
    for a, (lo, hi) in enumerate(g.v_extent):
        lim.append(min(v0[a] - lo, hi - v0[a]))
    if not g.periodic_x:
        for a, (lo, hi) in enumerate(g.x_extent):
            lim.append(max(min(x0[a] - lo, hi - x0[a]), 0.0) ** (1.0 / 3.0))
    return float(min(lim))


def _profile(f: ScalarField, s: Optional[ScalarField], q: float, z0, b: VelocityField, scale_count: int,
             r1: Optional[float], ratio: Union[float, str], forward: bool) -> OscillationProfile:
    g = f.grid
    if scale_count < 4:
        raise InputError("scale_count must be at least 4")
    t0, x0, v0 = _z0_parts(z0, g.d)
    bv0 = b(v0).reshape(g.d)
    try:
        omega = geometry_constants(b.jacobian(v0).reshape(g.d, g.d)).omega
    except Exception:
        omega = float("nan")
    if ratio == "omega":
        ratio = omega / 2
    ratio = float(ratio)
    if not (0 < ratio < 1):
        raise InputError("scale ratio must lie in (0, 1)")
    if r1 is None:
        r1 = 0.999 * max_radius(f, (t0, x0, v0), forward)
    scales = r1 * ratio ** np.arange(scale_count)
    z = (t0, x0, v0)
    osc = np.array([oscillation(f, z, r, bv0, forward) for r in scales])
    corr = np.zeros(scale_count)
    if s is not None and np.any(s.values):
        expo = 2.0 - (1.0 + 2.0 * g.d) / q
        for i, r in enumerate(scales):
            mask = cylinder_mask(g, r, z, bv0, forward)
            corr[i] = r ** expo * lp_norm(s.values, mask, g.cell_volume, q)
    beta, r2, C = fit_exponent(scales, osc, corr if np.any(corr) else None)
    if np.all(osc == 0):
        theta1 = 1.0
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = osc[1:] / osc[:-1]
        ratios = ratios[np.isfinite(ratios)]
        theta1 = float(1.0 - np.median(ratios)) if ratios.size else 1.0
    return OscillationProfile(z0=z, scales=scales, osc_values=osc, theta1_hat=theta1, beta_fit=beta,
                              beta_over_3=beta / 3.0, r_squared=r2, source_correction=C * corr if C else corr,
                              C_source=C, omega=omega)


def oscillation_profile(f: ScalarField, s: Optional[ScalarField], q: float, z0, b: VelocityField,
                        scale_count: int = 4, r1: Optional[float] = None,
                        ratio: Union[float, str] = 0.5) -> OscillationProfile:
    """Oscillations over Q^b_{r_i}(z0), r_i = r1 * ratio^i, and the fitted
    exponent. ``ratio="omega"`` uses omega/2 from the geometry constants at v0.

    ``source_correction`` holds C r^(2-(1+2d)/q) ||s||_{L^q(Q_r)} with the
    fitted C (or the bare term when no C improves the fit)."""
    return _profile(f, s, q, z0, b, scale_count, r1, ratio, forward=False)


def initial_time_profile(f: ScalarField, f0_holder, s: Optional[ScalarField], q: float, z0,
                         b: VelocityField, scale_count: int = 4, r1: Optional[float] = None,
                         ratio: Union[float, str] = 0.5) -> OscillationProfile:
    """Profile over forward cylinders {|t - t0| < r^2} clipped to the grid
    (t >= 0), centred on the initial slice. beta0 = min(alpha0/2, beta1)/3."""
    t0 = float(z0[0])
    if t0 != 0.0 or f.grid.t_extent[0] != 0.0:
        raise InputError("initial_time_profile needs t0 = 0 at the start of the grid")
    alpha0, _semi = f0_holder
    warnings = []
    if alpha0 > 1:
        warnings.append(f"alpha0={alpha0!r} clamped to 1")
        alpha0 = 1.0
    if not alpha0 > 0:
        raise InputError("alpha0 must be positive")
    prof = _profile(f, s, q, z0, b, scale_count, r1, ratio, forward=True)
    prof.beta0 = min(alpha0 / 2.0, prof.beta_fit) / 3.0
    prof.warnings.extend(warnings)
    return prof


def boundary_exponent(alpha0: float, beta1: float) -> float:
    return min(min(alpha0, 1.0) / 2.0, beta1) / 3.0


def kinetic_distance(dt, dx, dv, b_v0=None) -> np.ndarray:
    """max(|dt|^(1/2), |dx - dt b(v0)|^(1/3), |dv|) for arrays dx, dv of shape (..., d)."""
    dt = np.asarray(dt, dtype=float)
    dx = np.asarray(dx, dtype=float)
    if b_v0 is not None:
        dx = dx - dt[..., None] * np.asarray(b_v0, dtype=float)
    return np.maximum.reduce([np.sqrt(np.abs(dt)), np.cbrt(np.linalg.norm(dx, axis=-1)),
                              np.linalg.norm(np.asarray(dv, dtype=float), axis=-1)])


def holder_seminorm(f: ScalarField, beta: float, pair_count: int = 20000, region=None, seed: int = 0,
                    local_fraction: float = 0.75, max_offset: int = 3) -> float:
    """max |f(z) - f(z')| / dist(z, z')^beta over seeded grid-point pairs.

    A ``local_fraction`` of pairs are neighbours up to ``max_offset`` cells
    apart, perturbed along a random subset of the t, x and v axis groups; the
    rest are uniform pairs in the region.
    """
    if not (0 < beta <= 1):
        raise InputError("beta must lie in (0, 1]")
    g = f.grid
    d = g.d
    from .regions import as_mask

    mask = as_mask(g, region)
    cells = np.argwhere(mask)
    if len(cells) < 2:
        raise InputError("region contains fewer than two grid cells")
    rng = np.random.default_rng(seed)
    n_local = int(pair_count * local_fraction)
    a = cells[rng.integers(len(cells), size=pair_count)]
    b = cells[rng.integers(len(cells), size=pair_count)]
    groups = [[0], list(range(1, 1 + d)), list(range(1 + d, 1 + 2 * d))]
    offs = rng.integers(-max_offset, max_offset + 1, size=(n_local, 1 + 2 * d))
    which = rng.integers(1, 8, size=n_local)
    for gi, axes in enumerate(groups):
        off = (which >> gi) & 1
        for ax in axes:
            offs[:, ax] *= off
    local = a[:n_local] + offs
    shape = np.array(g.shape)
    if g.periodic_x:
        local[:, 1:1 + d] %= shape[1:1 + d]
    ok = np.all((local >= 0) & (local < shape), axis=1)
    ok &= mask[tuple(np.clip(local, 0, shape - 1).T)]
    b[:n_local] = np.where(ok[:, None], local, b[:n_local])
    coords = g.axis_coords()
    za = [coords[i][a[:, i]] for i in range(1 + 2 * d)]
    zb = [coords[i][b[:, i]] for i in range(1 + 2 * d)]
    dt = za[0] - zb[0]
    dx = np.stack([za[1 + i] - zb[1 + i] for i in range(d)], axis=-1)
    if g.periodic_x:
        dx = periodic_offset(dx, np.array(g.x_lengths))
    dv = np.stack([za[1 + d + i] - zb[1 + d + i] for i in range(d)], axis=-1)
    dist = kinetic_distance(dt, dx, dv)
    fa = f.values[tuple(a.T)]
    fb = f.values[tuple(b.T)]
    keep = dist > 0
    if not keep.any():
        return 0.0
    return float(np.max(np.abs(fa - fb)[keep] / dist[keep] ** beta))


def rescaled_oscillation(f: ScalarField, z0, r: float, b: VelocityField, samples: int = 48) -> float:
    """Oscillation of f o T_{z0,r} over the unit cylinder Q_1, sampled on a
    uniform (t~, x~, v~) lattice and read off f by multilinear interpolation."""
    g = f.grid
    d = g.d
    t0, x0, v0 = _z0_parts(z0, d)
    bv0 = b(v0).reshape(d)
    tt = -(np.arange(samples) + 0.5) / samples
    u = -1 + (np.arange(samples) + 0.5) * 2 / samples
    grids = np.meshgrid(tt, *([u] * d), *([u] * d), indexing="ij")
    T = grids[0]
    X = np.stack(grids[1:1 + d], axis=-1)
    V = np.stack(grids[1 + d:], axis=-1)
    inside = (np.linalg.norm(X, axis=-1) < 1) & (np.linalg.norm(V, axis=-1) < 1)
    T, X, V = T[inside], X[inside], V[inside]
    t, x, v = zoom_map((t0, x0, v0), r, bv0, T, X, V)
    coords = g.axis_coords()
    periodic = [False] + [g.periodic_x] * d + [g.periodic_v] * d
    lengths = [0.0] + list(g.x_lengths) + [hi - lo for lo, hi in g.v_extent]
    pts = [t] + [x[:, i] for i in range(d)] + [v[:, i] for i in range(d)]
    vals = sample_points(f.values, coords, periodic, lengths, pts)
    return float(vals.max() - vals.min())
