"""Coefficient model of the kinetic Fokker-Planck equation

    (d/dt + b(v).grad_x) f = div_v(A grad_v f) + B.grad_v f + s

and quantitative diagnostics of the transport field ``b``: sublevel-set
measures, the fitted nondegeneracy constants (K, alpha), the operator norm
of (Db)^-1, the zoom map onto kinetic cylinders and the constants that fix
the geometry of the intermediate-value argument.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import DomainError, GeometryError, InputError, InvariantError

SINGULAR = "singular"

#: midpoint cells per dimension used by :func:`sublevel_measure`
DEFAULT_RESOLUTION = {1: 2 ** 18, 2: 512}
#: epsilon grids resolved by the default resolution (at least ~25 cells per window)
DEFAULT_EPSILONS = {1: tuple(np.logspace(-4, -2, 9)), 2: tuple(np.logspace(-1.5, 0.0, 7))}
SINGULAR_TOL = 1e-10


def as_points(v, d: int) -> np.ndarray:
    """Return ``v`` as an array of shape (..., d)."""
    v = np.asarray(v, dtype=float)
    if d == 1 and (v.ndim == 0 or v.shape[-1] != 1):
        return v[..., None]
    if v.shape[-1] != d:
        raise InputError(f"expected trailing dimension {d}, got shape {v.shape}")
    return v


@dataclass(frozen=True)
class VelocityField:
    """A transport field b: R^d -> R^d with optional closed-form Jacobian.

    ``func`` maps arrays of shape (..., d) to (..., d); ``jac`` maps them to
    (..., d, d). ``domain_radius`` restricts b to the ball B_R(0).
    """

    name: str
    d: int
    func: Callable[[np.ndarray], np.ndarray]
    jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    params: dict = field(default_factory=dict)
    domain_radius: Optional[float] = None

    def __call__(self, v) -> np.ndarray:
        return np.asarray(self.func(as_points(v, self.d)), dtype=float)

    def jacobian(self, v, step: Optional[float] = None) -> np.ndarray:
        v = as_points(v, self.d)
        if self.jac is not None:
            return np.asarray(self.jac(v), dtype=float)
        h = 1e-4 if step is None else step
        out = np.empty(v.shape + (self.d,))
        for j in range(self.d):
            e = np.zeros(self.d)
            e[j] = h
            out[..., :, j] = (self.func(v + e) - self.func(v - e)) / (2 * h)
        return out

    def check_ball(self, ball) -> tuple[np.ndarray, float]:
        v0, r = _ball(ball, self.d)
        if self.domain_radius is not None and np.linalg.norm(v0) + r > self.domain_radius + 1e-12:
            raise DomainError(
                f"ball B_{r}({v0.tolist()}) leaves the domain B_{self.domain_radius}(0) of b")
        return v0, r


def _ball(ball, d: int) -> tuple[np.ndarray, float]:
    v0, r = ball
    v0 = np.atleast_1d(np.asarray(v0, dtype=float))
    if v0.shape != (d,):
        raise InputError(f"ball centre must have {d} components")
    r = float(r)
    if not r > 0:
        raise InputError("ball radius must be positive")
    return v0, r


def free_streaming(d: int = 1) -> VelocityField:
    return VelocityField("free_streaming", d, lambda v: v.copy(),
                         lambda v: np.broadcast_to(np.eye(d), v.shape + (d,)).copy())


def relativistic(d: int = 1) -> VelocityField:
    def func(v):
        return v / np.sqrt(1.0 + np.sum(v * v, axis=-1, keepdims=True))

    def jac(v):
        g = 1.0 + np.sum(v * v, axis=-1)[..., None, None]
        outer = v[..., :, None] * v[..., None, :]
        return (np.eye(d) * g - outer) / g ** 1.5

    return VelocityField("relativistic", d, func, jac)


def cubic(d: int = 1) -> VelocityField:
    def jac(v):
        return 3.0 * v[..., :, None] ** 2 * np.eye(d)

    return VelocityField("cubic", d, lambda v: v ** 3, jac)


def constant(c, d: int = 1) -> VelocityField:
    c = np.broadcast_to(np.asarray(c, dtype=float), (d,)).copy()
    return VelocityField("constant", d, lambda v: np.broadcast_to(c, v.shape).copy(),
                         lambda v: np.zeros(v.shape + (d,)), params={"c": c.tolist()})


def polynomial(coeffs: Sequence[float], d: int = 1) -> VelocityField:
    """Componentwise polynomial b_i(v) = sum_k coeffs[k] * v_i**k."""
    c = np.asarray(coeffs, dtype=float)
    dc = c[1:] * np.arange(1, len(c)) if len(c) > 1 else np.zeros(1)

    def func(v):
        return np.polynomial.polynomial.polyval(v, c)

    def jac(v):
        return np.polynomial.polynomial.polyval(v, dc)[..., :, None] * np.eye(d)

    return VelocityField("polynomial", d, func, jac, params={"coeffs": c.tolist()})


PRESETS = {
    "free_streaming": free_streaming,
    "relativistic": relativistic,
    "cubic": cubic,
    "constant": constant,
    "custom-polynomial": polynomial,
}


def preset(name: str, d: int = 1, **params) -> VelocityField:
    if name not in PRESETS:
        raise InputError(f"unknown velocity preset {name!r}; choose from {sorted(PRESETS)}")
    if name == "constant":
        return constant(params.get("c", 1.0), d)
    if name == "custom-polynomial":
        return polynomial(params["coeffs"], d)
    return PRESETS[name](d)


# ---------------------------------------------------------------------------
# coefficient sets

Field = Union[Callable, float, np.ndarray, None]


def _range_ok(lo_hi, lo, hi) -> bool:
    if lo_hi is None:
        return True
    return lo >= lo_hi[0] - 1e-12 and hi <= lo_hi[1] + 1e-12


@dataclass(frozen=True)
class CoefficientSet:
    """Coefficients b, A, B, s together with the ellipticity bounds.

    A may be a callable ``A(t, x, v) -> (..., d, d)``, a scalar (meaning
    ``a * I``) or a constant d x d matrix. B and s are callables, constants,
    or None for zero. ``t_range``/``x_range``/``v_range`` bound the domain of
    definition (None means unbounded, e.g. periodic x).
    """

    b: VelocityField
    A: Field = 1.0
    B: Field = None
    s: Field = None
    lam: float = 1.0
    Lam: float = 1.0
    t_range: Optional[tuple[float, float]] = None
    x_range: Optional[tuple[float, float]] = None
    v_range: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if not (0 < self.lam <= self.Lam):
            raise InvariantError(
                f"ellipticity bounds need 0 < lambda <= Lambda (hypothesis (H)), got {self.lam}, {self.Lam}")

    @property
    def d(self) -> int:
        return self.b.d

    def A_at(self, t, x, v) -> np.ndarray:
        shape = np.broadcast_shapes(np.shape(t), np.shape(x)[:-1], np.shape(v)[:-1])
        if callable(self.A):
            return np.broadcast_to(np.asarray(self.A(t, x, v), dtype=float), shape + (self.d, self.d))
        a = np.asarray(self.A, dtype=float)
        mat = a * np.eye(self.d) if a.ndim == 0 else a
        return np.broadcast_to(mat, shape + (self.d, self.d))

    def B_at(self, t, x, v) -> np.ndarray:
        shape = np.broadcast_shapes(np.shape(t), np.shape(x)[:-1], np.shape(v)[:-1])
        if self.B is None:
            return np.zeros(shape + (self.d,))
        if callable(self.B):
            return np.broadcast_to(np.asarray(self.B(t, x, v), dtype=float), shape + (self.d,))
        return np.broadcast_to(np.asarray(self.B, dtype=float), shape + (self.d,))

    def s_at(self, t, x, v) -> np.ndarray:
        shape = np.broadcast_shapes(np.shape(t), np.shape(x)[:-1], np.shape(v)[:-1])
        if self.s is None:
            return np.zeros(shape)
        if callable(self.s):
            return np.broadcast_to(np.asarray(self.s(t, x, v), dtype=float), shape)
        return np.full(shape, float(self.s))

    @property
    def has_drift(self) -> bool:
        return self.B is not None

    @property
    def has_source(self) -> bool:
        return self.s is not None and not (np.isscalar(self.s) and self.s == 0)


def check_hypotheses(A: np.ndarray, B: Optional[np.ndarray], lam: float, Lam: float,
                     tol: float = 1e-12) -> None:
    """Raise InvariantError unless sampled A is symmetric with spectrum in
    [lam, Lam] and |B| <= Lam."""
    A = np.asarray(A, dtype=float)
    asym = np.max(np.abs(A - np.swapaxes(A, -1, -2))) if A.size else 0.0
    if asym >= tol:
        raise InvariantError(f"A is not symmetric (max |A - A^T| = {asym:.3e})")
    eig = np.linalg.eigvalsh(A)
    if eig.size and (eig.min() < lam * (1 - 1e-12) or eig.max() > Lam * (1 + 1e-12)):
        raise InvariantError(
            f"eigenvalues of A span [{eig.min():.6g}, {eig.max():.6g}], outside "
            f"[lambda, Lambda] = [{lam}, {Lam}] (hypothesis (H))")
    if B is not None and np.size(B):
        bmax = np.max(np.linalg.norm(B, axis=-1))
        if bmax > Lam * (1 + 1e-12):
            raise InvariantError(f"sup |B| = {bmax:.6g} exceeds Lambda = {Lam} (hypothesis (H))")


def checkerboard_A(low: float, high: float, cell: float, d: int = 1,
                   origin: float = 0.0) -> Callable:
    """Rough diffusion matrix a(x, v) I with a alternating between ``low`` and
    ``high`` on a checkerboard of square cells of side ``cell`` in (x, v)."""

    def A(t, x, v):
        idx = np.floor((x - origin) / cell).sum(axis=-1) + np.floor((v - origin) / cell).sum(axis=-1)
        a = np.where(np.mod(idx, 2) == 0, low, high)
        a = np.broadcast_to(a, np.broadcast_shapes(np.shape(t), a.shape))
        return a[..., None, None] * np.eye(d)

    return A


# ---------------------------------------------------------------------------
# nondegeneracy


def _ball_cells(v0: np.ndarray, r: float, resolution: int) -> tuple[np.ndarray, float]:
    d = v0.size
    h = 2 * r / resolution
    c = -r + (np.arange(resolution) + 0.5) * h
    if d == 1:
        return (v0 + c)[:, None], h
    g = np.stack(np.meshgrid(*([c] * d), indexing="ij"), axis=-1).reshape(-1, d)
    g = g[np.sum(g * g, axis=1) < r * r]
    return v0 + g, h ** d


def _unit(nu, d: int) -> np.ndarray:
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    if nu.shape != (d,):
        raise InputError(f"direction nu must have {d} components")
    if abs(np.linalg.norm(nu) - 1.0) > 1e-10:
        raise InputError(f"direction nu must be a unit vector (|nu| = {np.linalg.norm(nu)!r})")
    return nu


def sublevel_measure(b: VelocityField, ball, mu: float, nu, epsilon: float,
                     resolution: Optional[int] = None) -> float:
    """Midpoint-rule measure of {v in B_r(v0): |mu + b(v).nu| <= epsilon}."""
    v0, r = b.check_ball(ball)
    nu = _unit(nu, b.d)
    if not epsilon > 0:
        raise InputError("epsilon must be positive")
    n = resolution or DEFAULT_RESOLUTION[b.d]
    pts, w = _ball_cells(v0, r, n)
    y = b(pts) @ nu
    return float(np.count_nonzero(np.abs(mu + y) <= epsilon) * w)


def ball_measure(d: int, r: float, resolution: Optional[int] = None) -> float:
    """Measure of B_r under the same midpoint quadrature as sublevel_measure."""
    n = resolution or DEFAULT_RESOLUTION[d]
    pts, w = _ball_cells(np.zeros(d), r, n)
    return len(pts) * w


def directions(d: int, count: int) -> np.ndarray:
    if d == 1:
        return np.array([[1.0], [-1.0]])
    ang = np.pi * np.arange(count) / count
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


@dataclass
class NondegReport:
    K: float
    alpha: float
    samples: list[tuple[float, float]]
    fit_residual: float
    degenerate: bool
    ball: tuple
    ball_measure: float = float("nan")
    fitted: list[bool] = field(default_factory=list)

    def bound_holds(self, slack: float = 0.10) -> bool:
        """Every recorded sample obeys sup_measure <= K eps^alpha (1 + slack)."""
        if self.degenerate:
            return True
        return all(m <= self.K * e ** self.alpha * (1 + slack) for e, m in self.samples)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epsilon", "sup_measure", "K", "alpha", "fit_residual", "degenerate"])
            for e, m in self.samples:
                w.writerow([repr(float(e)), repr(float(m)), repr(float(self.K)), repr(float(self.alpha)),
                            repr(float(self.fit_residual)), int(self.degenerate)])


def sup_sublevel(b: VelocityField, ball, epsilons: Sequence[float], direction_samples: int = 64,
                 resolution: Optional[int] = None) -> np.ndarray:
    """Supremum over (mu, nu) of the sublevel measure for each epsilon.

    For a fixed direction the projected values y = b(v).nu are sorted and every
    window [y_i, y_i + 2 eps] is scanned, i.e. mu = -(y_i + eps). Any window is
    dominated by one anchored at its smallest member, so this is the exact
    supremum of the midpoint measure over all mu.
    """
    v0, r = b.check_ball(ball)
    n = resolution or DEFAULT_RESOLUTION[b.d]
    pts, w = _ball_cells(v0, r, n)
    vals = b(pts)
    eps = np.asarray(epsilons, dtype=float)
    best = np.zeros(len(eps))
    for nu in directions(b.d, direction_samples):
        y = np.sort(vals @ nu)
        idx = np.arange(len(y))
        for i, e in enumerate(eps):
            counts = np.searchsorted(y, y + 2 * e, side="right") - idx
            best[i] = max(best[i], counts.max() * w)
    return best


def estimate_nondegeneracy(b: VelocityField, ball=((0.0,), 1.0),
                           epsilon_grid: Optional[Sequence[float]] = None,
                           direction_samples: int = 64,
                           resolution: Optional[int] = None) -> NondegReport:
    """Fit sup_measure(eps) ~ K eps^alpha over a grid of epsilons."""
    eps = np.asarray(DEFAULT_EPSILONS[b.d] if epsilon_grid is None else epsilon_grid, dtype=float)
    if eps.size < 4:
        raise InputError("estimate_nondegeneracy needs at least 4 epsilon values")
    if np.any(eps <= 0):
        raise InputError("epsilons must be positive")
    if b.d == 2 and direction_samples < 8:
        raise InputError("direction_samples must be >= 8 in d = 2")
    order = np.argsort(eps)[::-1]
    eps = eps[order]
    v0, r = b.check_ball(ball)
    n = resolution or DEFAULT_RESOLUTION[b.d]
    full = ball_measure(b.d, r, n)
    sup = sup_sublevel(b, ball, eps, direction_samples, n)
    degenerate = bool(sup[-1] > 0.5 * full)
    use = sup < full * (1 - 1e-12)
    K = alpha = resid = float("nan")
    if use.sum() >= 2:
        X = np.log(eps[use])
        Y = np.log(sup[use])
        alpha, logK = np.polyfit(X, Y, 1)
        resid = float(np.sqrt(np.mean((Y - (logK + alpha * X)) ** 2)))
        K = float(np.exp(logK))
        alpha = float(alpha)
    if degenerate and not math.isfinite(K):
        K = 0.0
    return NondegReport(K=K, alpha=alpha, samples=list(zip(eps.tolist(), sup.tolist())),
                        fit_residual=resid, degenerate=degenerate,
                        ball=(tuple(v0.tolist()), r), ball_measure=full, fitted=use.tolist())


def _closed_ball_samples(v0: np.ndarray, r: float, resolution: int) -> np.ndarray:
    d = v0.size
    c = np.linspace(-r, r, resolution)
    if d == 1:
        return (v0 + c)[:, None]
    g = np.stack(np.meshgrid(c, c, indexing="ij"), axis=-1).reshape(-1, 2)
    g = g[np.sum(g * g, axis=1) <= r * r]
    ang = np.linspace(0, 2 * np.pi, 4 * resolution, endpoint=False)
    rim = r * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return v0 + np.concatenate([g, rim])


def db_inverse_norm_bound(b: VelocityField, ball, resolution: int = 2001,
                          step: Optional[float] = None) -> Union[float, str]:
    """sup over the closed ball of ||Db(v)^-1||, or ``SINGULAR``.

    Without a closed-form Jacobian, central differences with step r*1e-4 are
    used.
    """
    v0, r = b.check_ball(ball)
    pts = _closed_ball_samples(v0, r, resolution)
    J = b.jacobian(pts, step=r * 1e-4 if step is None else step)
    sv = np.linalg.svd(J, compute_uv=False)
    smin = sv[..., -1]
    if smin.min() < SINGULAR_TOL:
        return SINGULAR
    return float(np.max(1.0 / smin))


# ---------------------------------------------------------------------------
# zoom map and cylinders


def zoom_map(z0, r: float, b_v0, t_tilde, x_tilde, v_tilde):
    """T_{z0,r}: (t~, x~, v~) -> (t0 + r^2 t~, x0 + r^3 x~ + r^2 t~ b(v0), v0 + r v~)."""
    t0, x0, v0 = z0
    t_tilde = np.asarray(t_tilde, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    b_v0 = np.asarray(b_v0, dtype=float)
    t = t0 + r ** 2 * t_tilde
    x = x0 + r ** 3 * np.asarray(x_tilde, dtype=float) + r ** 2 * t_tilde[..., None] * b_v0
    v = v0 + r * np.asarray(v_tilde, dtype=float)
    return t, x, v


def _z0(z0, d):
    t0, x0, v0 = z0
    return float(t0), np.atleast_1d(np.asarray(x0, dtype=float)).reshape(d), \
        np.atleast_1d(np.asarray(v0, dtype=float)).reshape(d)


def rescale_coefficients(C: CoefficientSet, z0, r: float) -> CoefficientSet:
    """Coefficients of the zoomed equation satisfied by f o T_{z0,r} on Q_1."""
    if not (0 < r <= 1):
        raise InputError("zoom radius r must lie in (0, 1]")
    d = C.d
    t0, x0, v0 = _z0(z0, d)
    b = C.b
    bv0 = b(v0)
    if not _range_ok(C.t_range, t0 - r * r, t0):
        raise DomainError("kinetic cylinder leaves the time range of the coefficients")
    if C.v_range is not None and not _range_ok(C.v_range, float((v0 - r).min()), float((v0 + r).max())):
        raise DomainError("kinetic cylinder leaves the velocity range of the coefficients")
    if C.x_range is not None:
        ends = [x0 - r * r * bv0 - r ** 3, x0 - r * r * bv0 + r ** 3, x0 - r ** 3, x0 + r ** 3]
        if not _range_ok(C.x_range, float(np.min(ends)), float(np.max(ends))):
            raise DomainError("kinetic cylinder leaves the spatial range of the coefficients")
    if b.domain_radius is not None:
        b.check_ball((v0, r))

    def b_r(vt):
        return (b(v0 + r * vt) - bv0) / r

    jac = None
    if b.jac is not None:
        def jac(vt):
            return b.jacobian(v0 + r * vt)

    new_b = VelocityField(f"{b.name}_zoom", d, b_r, jac, params={"v0": v0.tolist(), "r": r, **b.params})
    z = (t0, x0, v0)

    def T(t, x, v):
        return zoom_map(z, r, bv0, t, x, v)

    def wrap(fieldv, scale):
        if fieldv is None:
            return None
        if not callable(fieldv):
            return fieldv * scale if scale != 1 else fieldv

        def g(t, x, v):
            return scale * np.asarray(fieldv(*T(t, x, v)))
        return g

    A = C.A if not callable(C.A) else wrap(C.A, 1.0)
    unit = (-1.0, 1.0)
    return replace(C, b=new_b, A=A, B=wrap(C.B, r), s=wrap(C.s, r * r),
                   t_range=(-1.0, 0.0) if C.t_range is not None else None,
                   x_range=unit if C.x_range is not None else None,
                   v_range=unit if C.v_range is not None else None)


@dataclass(frozen=True)
class GeometryConstants:
    sigma: float
    omega: float
    s0: float
    sigma_min_Db: float


def geometry_constants(Db_at_v0) -> GeometryConstants:
    """sigma = sigma_min(Db)/8, s0 = 1/8, omega = sqrt(sigma s0 / (2 + sigma))."""
    M = np.atleast_2d(np.asarray(Db_at_v0, dtype=float))
    smin = float(np.linalg.svd(M, compute_uv=False)[-1])
    if smin < SINGULAR_TOL:
        raise GeometryError(f"Db(v0) is singular (smallest singular value {smin:.3e})")
    sigma = smin / 8.0
    s0 = 1.0 / 8.0
    omega = math.sqrt(sigma * s0 / (2.0 + sigma))
    return GeometryConstants(sigma=sigma, omega=omega, s0=s0, sigma_min_Db=smin)


def periodic_offset(dx, period: Optional[float]):
    if period is None:
        return dx
    return dx - period * np.round(dx / period)


def cylinder_membership(z, z0, r: float, b_v0, x_period: Optional[float] = None,
                        forward: bool = False):
    """Membership in Q^b_r(z0) = (t0-r^2, t0] x {|x-x0-(t-t0)b(v0)| < r^3} x B_r(v0).

    ``z`` may hold arrays: t of shape S, x and v of shape S + (d,). With
    ``forward=True`` the time window is the two-sided (t0-r^2, t0+r^2).
    """
    t, x, v = z
    t0, x0, v0 = z0
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    b_v0 = np.asarray(b_v0, dtype=float)
    dt = t - t0
    if forward:
        in_t = np.abs(dt) < r * r
    else:
        in_t = (dt > -r * r) & (dt <= 0)
    dx = periodic_offset(x - x0 - dt[..., None] * b_v0, x_period)
    in_x = np.linalg.norm(np.atleast_1d(dx), axis=-1) < r ** 3
    in_v = np.linalg.norm(np.atleast_1d(v - v0), axis=-1) < r
    out = in_t & in_x & in_v
    return bool(out) if np.ndim(out) == 0 else out
