"""Fast built-in checks run by ``kfplab selftest`` (a few seconds in total)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    target: str


def _rel(a, b):
    return abs(a - b) / abs(b)


def run_checks() -> list[Check]:
    from .. import coeffs as cf
    from ..averaging import exponent_table
    from ..coeffs import CoefficientSet
    from ..degiorgi import directional_jump_detect, iteration_bound_const
    from ..solver import GridSpec, solve_fp, solve_transport

    out = []
    t = exponent_table(1.0, 1.0, 1, 1, 10.0, "bdd")
    err = max(_rel(t.varsigma, 0.2), _rel(t.gamma_VAL, 0.08), _rel(t.gamma_lip, 1 / 3), _rel(t.kappa, 9 / 7),
              _rel(t.q_min_reg, 9.0), _rel(t.q_min_bdd, 37.5))
    out.append(Check("exponent_table", err <= 1e-12, err, "relative error <= 1e-12"))

    rep = cf.estimate_nondegeneracy(cf.preset("free_streaming", 1), ((0.0,), 1.0))
    out.append(Check("nondeg_alpha_linear", 0.95 <= rep.alpha <= 1.05, rep.alpha, "[0.95, 1.05]"))
    out.append(Check("nondeg_K_linear", 1.8 <= rep.K <= 2.2, rep.K, "[1.8, 2.2]"))
    rel = cf.db_inverse_norm_bound(cf.preset("relativistic", 1), ((0.0,), 1.0))
    out.append(Check("db_relativistic", abs(rel - 2 ** 1.5) <= 1e-3, rel, "2^(3/2) +- 1e-3"))

    g = GridSpec(4, 256, 8, 1, (0.0, 0.3), (0.0, 1.0), (-1.0, 1.0))
    b = cf.preset("free_streaming", 1)
    h = solve_transport(b, lambda X, V: np.sin(2 * np.pi * X[..., 0]), g)
    T, X, V = g.mesh()
    exact = np.sin(2 * np.pi * (X[..., 0] - V[..., 0] * (T - 0.0)))
    terr = float(np.max(np.abs(h.values - exact)))
    out.append(Check("transport_closed_form", terr < 1e-6, terr, "< 1e-6"))

    g = GridSpec(21, 32, 32, 1, (0.0, 0.2), (0.0, 1.0), (-2.0, 2.0), periodic_v=True)
    C = CoefficientSet(b, A=cf.checkerboard_A(0.5, 2.0, 4 * g.dv[0]), lam=0.5, Lam=2.0)
    f = solve_fp(C, lambda X, V: np.exp(-4 * V[..., 0] ** 2), g, "auto")
    mass = f.values.reshape(g.nt, -1).sum(axis=1)
    drift = float(np.max(np.abs(np.diff(mass))) / mass[0])
    out.append(Check("fp_conservation", drift <= 1e-10, drift, "<= 1e-10 per step"))

    c = iteration_bound_const(0.0, 3.0)
    out.append(Check("iteration_const", c == 8.0, c, "2^3"))

    n = 64
    xs = -0.5 + (np.arange(n) + 0.5) / n
    X1 = np.broadcast_to(xs[:, None], (n, n))
    args = dict(h_dir=(1.0, 0.0), tau_list=[0.2, 0.1, 0.05, 1 / 64], spacing=(1 / n, 1 / n), lower=(-0.5, -0.5))
    verdicts = [directional_jump_detect((X1 < 0).astype(int), **args).verdict,
                directional_jump_detect((X1 > 0).astype(int), **args).verdict,
                directional_jump_detect(np.ones((n, n), dtype=int), **args).verdict]
    ok = verdicts == ["compliant", "violating", "compliant"]
    out.append(Check("jump_detector", ok, float(ok), "compliant, violating, compliant"))
    return out
