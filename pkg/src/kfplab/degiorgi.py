"""Bookkeeping for the Moser and De Giorgi iterations, the two iteration
lemmas, and a detector for upward jumps of an indicator along a direction.

Cylinders are the unscaled Q_r = (t0 - r^2, t0] x B_{r^3}(x0) x B_r(v0)
around the default centre of the grid (top of the time range, middle of the
x and v boxes); the schedule is r_n = 1/2 + 2^{-(n+1)}.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .averaging.exponents import ExponentTable, exponent_table
from .errors import InputError, ThresholdError
from .regions import as_mask, cylinder_mask
from .solver.grid import GridSpec, ScalarField


# ---------------------------------------------------------------------------
# measures and norms


def level_set_measure(f: ScalarField, k: float, region=None) -> float:
    """Cell-counting measure of {f > k} within ``region``."""
    mask = as_mask(f.grid, region)
    if not mask.any():
        raise InputError("region contains no grid cell")
    return float(np.count_nonzero((f.values > k) & mask) * f.grid.cell_volume)


def region_volume(grid: GridSpec, region=None) -> float:
    mask = as_mask(grid, region)
    return float(np.count_nonzero(mask) * grid.cell_volume)


def lp_norm(values: np.ndarray, mask: np.ndarray, vol: float, p: float) -> float:
    """(sum |f|^p vol)^(1/p) over the mask, scaled by the max to avoid overflow."""
    a = np.abs(values[mask])
    if a.size == 0:
        raise InputError("region contains no grid cell")
    M = float(a.max())
    if M == 0.0:
        return 0.0
    if math.isinf(p):
        return M
    return M * float(np.sum((a / M) ** p) * vol) ** (1.0 / p)


def radius_schedule(n: int) -> float:
    return 0.5 + 0.5 ** (n + 1)


# ---------------------------------------------------------------------------
# traces


@dataclass
class TraceEntry:
    n: int
    r_n: float
    level_or_p: float
    value: float
    growth_factor: float


@dataclass
class IterationTrace:
    scheme: str
    entries: list = field(default_factory=list)
    kappa: float = float("nan")
    constants: dict = field(default_factory=dict)
    converged: bool = False

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.entries])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "r_n", "level_or_p", "value", "growth_factor"])
            for e in self.entries:
                w.writerow([e.n, repr(e.r_n), repr(e.level_or_p), repr(e.value), repr(e.growth_factor)])

    def summary(self) -> str:
        parts = [f"scheme={self.scheme}", f"kappa={self.kappa!r}", f"converged={self.converged}"]
        parts += [f"{k}={v!r}" for k, v in self.constants.items()]
        return " ".join(parts)


def _table_for(q: float, d: int, table: Optional[ExponentTable]) -> ExponentTable:
    if table is None:
        return exponent_table(1.0, 1.0, d, d, q, "bdd")
    if not q > table.q_min:
        raise ThresholdError(
            f"q = {q} violates q>2kappa/(kappa-1) = {table.q_min:.6g} for the table's gamma")
    return table


def moser_trace(f: ScalarField, s: Optional[ScalarField], q: float, table: Optional[ExponentTable] = None,
                n_max: int = 20, z0=None, growth_tol: float = 0.1) -> IterationTrace:
    """Norms ||f_l||_{L^{p_n}(Q_{r_n})} with f_l = f^+ + l, l = ||s||_{L^q(Q_1)},
    p_n = 2 kappa^n and r_n = 1/2 + 2^{-(n+1)}.

    ``converged`` means every growth factor is finite and the last one lies
    within ``growth_tol`` of 1, i.e. the norms have settled on a sup bound.
    """
    g = f.grid
    table = _table_for(q, g.d, table)
    kappa = table.kappa
    vol = g.cell_volume
    q1 = cylinder_mask(g, 1.0, z0)
    if not q1.any():
        raise InputError("Q_1 contains no grid cell")
    l = 0.0 if s is None else lp_norm(s.values, q1, vol, q)
    fl = np.maximum(f.values, 0.0) + l
    trace = IterationTrace("moser", kappa=kappa, constants={"l": l})
    prev = None
    for n in range(n_max + 1):
        r = radius_schedule(n)
        p = 2.0 * kappa ** n
        mask = cylinder_mask(g, r, z0)
        val = lp_norm(fl, mask, vol, p)
        growth = val / prev if prev else float("nan")
        trace.entries.append(TraceEntry(n, r, p, val, growth))
        prev = val
    growth = np.array([e.growth_factor for e in trace.entries[1:]])
    trace.constants["sup_estimate"] = trace.entries[-1].value
    trace.constants["grid_max_Q_half"] = float(np.max(fl[cylinder_mask(g, 0.5, z0)])) \
        if cylinder_mask(g, 0.5, z0).any() else float("nan")
    trace.converged = bool(growth.size == 0 or (np.all(np.isfinite(growth)) and abs(growth[-1] - 1) <= growth_tol))
    return trace


def degiorgi_trace(f: ScalarField, s: Optional[ScalarField], q: float, l: float, n_max: int = 12,
                   table: Optional[ExponentTable] = None, C0: float = 10.0, l0: Optional[float] = None,
                   z0=None) -> IterationTrace:
    """A_n = ||(f - k_n)^+||_{L^2(Q_{r_n})} with k_n = l0 + l (1 - 2^{-n}).

    l0 defaults to C0 ||f^+||_{L^2(Q_1)}. The fitted constant is the smallest
    C with A_n <= C^n A_{n-1}^{1+eps} for every computed n, using the
    exponent gap eps = 1 - 1/kappa - 2/q. ``converged`` means A_{n_max} <
    1e-10 A_0 or strictly geometric decay (every ratio A_n/A_{n-1} < 1).
    """
    if not l > 0:
        raise InputError("l must be positive")
    g = f.grid
    table = _table_for(q, g.d, table)
    eps = 1.0 - 1.0 / table.kappa - 2.0 / q
    vol = g.cell_volume
    q1 = cylinder_mask(g, 1.0, z0)
    if not q1.any():
        raise InputError("Q_1 contains no grid cell")
    if l0 is None:
        l0 = C0 * lp_norm(np.maximum(f.values, 0.0), q1, vol, 2.0)
    trace = IterationTrace("degiorgi", kappa=table.kappa,
                           constants={"l0": l0, "l": l, "eps": eps, "C0": C0})
    A = []
    for n in range(n_max + 1):
        r = radius_schedule(n)
        k = l0 + l * (1.0 - 0.5 ** n)
        mask = cylinder_mask(g, r, z0)
        a = lp_norm(np.maximum(f.values - k, 0.0), mask, vol, 2.0)
        growth = a / A[-1] if A and A[-1] > 0 else float("nan")
        trace.entries.append(TraceEntry(n, r, k, a, growth))
        A.append(a)
    A = np.array(A)
    C = 0.0
    for n in range(1, n_max + 1):
        if A[n - 1] > 0 and A[n] > 0:
            C = max(C, (A[n] / A[n - 1] ** (1.0 + eps)) ** (1.0 / n))
    trace.constants["C"] = float(C)
    trace.constants["k_inf"] = l0 + l
    nz = A[:-1] > 0
    ratios = A[1:][nz] / A[:-1][nz]
    trace.converged = bool(A[0] == 0 or A[-1] < 1e-10 * A[0] or (ratios.size and np.all(ratios < 1)))
    return trace


def transition_index(trace: IterationTrace) -> Optional[int]:
    """First n with A_n = 0, or None."""
    for e in trace.entries:
        if e.value == 0.0:
            return e.n
    return None


# ---------------------------------------------------------------------------
# iteration lemmas


def _admissible_theta(eps: float, iota: float) -> float:
    return 0.5 if eps == 0 else (eps ** (1.0 / iota) + 1.0) / 2.0


def unroll_bound(eps: float, iota: float, C: float, depth: int = 60, r: float = 0.0, s: float = 1.0,
                 c: float = 1.0) -> float:
    """Largest psi(r) compatible with psi(r_i) <= eps psi(r_{i+1}) + c (r_{i+1} - r_i)^-iota
    along r_{i+1} = r_i + (1 - t) t^i (s - r), with psi(r_depth) = 0, divided
    by the claimed bound C c (s - r)^-iota."""
    th = _admissible_theta(eps, iota)
    # increments taken in closed form; differences of 1 - t^i lose them to rounding
    steps = (s - r) * (1.0 - th) * th ** np.arange(depth)
    psi = 0.0
    for i in range(depth - 1, -1, -1):
        psi = eps * psi + c * steps[i] ** (-iota)
    return psi / (C * c * (s - r) ** (-iota))


def iteration_bound_const(eps: float, iota: float, depth: int = 60) -> float:
    """C = (1 - t)^-iota / (1 - eps t^-iota) with t the midpoint of the
    admissible interval (eps^{1/iota}, 1), or t = 1/2 when eps = 0.

    The bound is checked by unrolling the recursion to ``depth`` steps."""
    if not (0 <= eps < 1):
        raise InputError(f"eps must lie in [0, 1), got {eps}")
    if not iota > 0:
        raise InputError("iota must be positive")
    th = _admissible_theta(eps, iota)
    C = (1.0 - th) ** (-iota) / (1.0 - eps * th ** (-iota))
    if unroll_bound(eps, iota, C, depth=1 if eps == 0 else depth) > 1.0 + 1e-12:
        raise ArithmeticError("unrolled recursion exceeds the claimed bound")
    return C


def decay_exponent(tau: float, delta: float, eps: float) -> float:
    """beta_1 = (1 - eps) log(delta) / log(tau)."""
    if not (0 < tau < 1) or not (0 < delta < 1):
        raise InputError("tau and delta must lie in (0, 1)")
    if not (0 <= eps < 1):
        raise InputError("eps must lie in [0, 1)")
    return (1.0 - eps) * math.log(delta) / math.log(tau)


# ---------------------------------------------------------------------------
# directional jumps


@dataclass
class JumpVerdict:
    verdict: str
    taus: np.ndarray
    D: np.ndarray
    competing_bound: np.ndarray
    tol: float

    def summary(self) -> str:
        return f"verdict={self.verdict} D_min_tau={self.D[-1]!r} tol={self.tol!r}"


def box_bump(shape: Sequence[int], spacing: Sequence[float], lower: Sequence[float],
             radius_fraction: float = 0.4) -> np.ndarray:
    """Tensor product of exp(-1/(1-y^2)) bumps centred in the box with
    half-width ``radius_fraction`` times each side."""
    out = np.ones(())
    for n, h, lo in zip(shape, spacing, lower):
        c = lo + (np.arange(n) + 0.5) * h
        mid = lo + n * h / 2
        y = (c - mid) / (radius_fraction * n * h)
        inside = np.abs(y) < 1
        q = np.where(inside, 1 - y * y, 1.0)
        out = np.multiply.outer(out, np.where(inside, np.exp(-1.0 / q), 0.0))
    return out


def directional_jump_detect(P: np.ndarray, h_dir, tau_list: Sequence[float], p: float = 2.0,
                            spacing: Optional[Sequence[float]] = None, lower: Optional[Sequence[float]] = None,
                            tol: float = 1e-9, phi: Optional[np.ndarray] = None) -> JumpVerdict:
    """D(tau) = (1/tau) int (1_P(z + tau h) - 1_P(z))_+^p phi(z) dz on a box.

    Shifts are snapped to whole cells (nearest neighbour) and clamped at the
    box edge; phi defaults to :func:`box_bump`. The verdict is ``violating``
    when D at the smallest tau exceeds ``tol``; the proof's competing term
    tau^(p-1) is reported alongside.
    """
    P = np.asarray(P)
    if not np.all((P == 0) | (P == 1)):
        raise InputError("P must be an indicator (values 0 or 1)")
    if not p > 1:
        raise InputError("p must exceed 1")
    D_ = P.ndim
    h = np.asarray(h_dir, dtype=float).reshape(D_)
    if abs(np.linalg.norm(h) - 1) > 1e-10:
        raise InputError("h_dir must be a unit vector")
    spacing = np.ones(D_) / np.array(P.shape) if spacing is None else np.asarray(spacing, dtype=float)
    lower = np.zeros(D_) if lower is None else np.asarray(lower, dtype=float)
    taus = np.sort(np.asarray(tau_list, dtype=float))[::-1]
    if np.any(taus <= 0):
        raise InputError("tau values must be positive")
    if phi is None:
        phi = box_bump(P.shape, spacing, lower)
    dV = float(np.prod(spacing))
    Pf = P.astype(float)
    idx = np.indices(P.shape)
    D = []
    for tau in taus:
        shift = np.rint(tau * h / spacing).astype(int)
        tau_eff = float(np.linalg.norm(shift * spacing)) or tau
        src = tuple(np.clip(idx[a] + shift[a], 0, P.shape[a] - 1) for a in range(D_))
        jump = np.maximum(Pf[src] - Pf, 0.0) ** p
        D.append(float(np.sum(jump * phi) * dV / tau_eff))
    D = np.array(D)
    verdict = "violating" if D[-1] > tol else "compliant"
    return JumpVerdict(verdict, taus, D, taus ** (p - 1), tol)
