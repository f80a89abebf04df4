"""Command-line entry point.

Exit codes: 0 success, 2 validation error (bad flag, config, precondition
or threshold), 3 numerical failure (NaN or Inf detected), 4 selftest
acceptance failure.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .. import coeffs as cf
from ..errors import ConfigError, KFPError, NumericalError, ValidationError
from .config import BLOCKS, COMMAND_DEFAULTS, COMMAND_SECTIONS, COMMON, ExperimentConfig, build_config
from .report import write_report

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 2, 3, 4

DESCRIPTIONS = {
    "nondeg": "estimate the nondegeneracy pair (K, alpha) and the Db inverse-norm bound of b",
    "solve": "solve the kinetic Fokker-Planck equation and report the weak residual",
    "average": "run the averaging-gain experiment on free-transport noise (d = 1)",
    "moser": "Moser L^p trace on a solved instance",
    "degiorgi": "De Giorgi level-set trace on a solved instance",
    "oscillation": "oscillation profile and Holder seminorm on a solved instance",
    "boundary": "oscillation profile over forward cylinders at the initial time",
    "exponents": "print the exponent table and check the integrability threshold",
    "report": "index artifacts with FNV-1a checksums and write gnuplot scripts",
    "selftest": "run fast built-in checks; exit 4 on any failure",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kfplab", description="Numerical harness for kinetic Fokker-Planck regularity.",
                     epilog="Exit codes: 0 ok, 2 validation, 3 numerical failure, 4 selftest failure.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for cmd, sections in COMMAND_SECTIONS.items():
        p = sub.add_parser(cmd, help=DESCRIPTIONS[cmd], description=DESCRIPTIONS[cmd])
        p.add_argument("--config", metavar="PATH", help="INI file with sections "
                       + ", ".join(f"[{s}]" for s in sections + (cmd,)) + "; flags override it")
        for sec in sections + (cmd,):
            params = COMMON[sec] if sec in COMMON else BLOCKS[sec]
            if not params:
                continue
            grp = p.add_argument_group(f"[{sec}]")
            for prm in params:
                text = prm.help
                if prm.choices:
                    text += f"; one of {', '.join(prm.choices)}"
                if prm.pre:
                    text += f"; requires {prm.pre}"
                default = COMMAND_DEFAULTS.get(cmd, {}).get((sec, prm.key), prm.default)
                text += f" (default {default!r})"
                grp.add_argument(f"--{prm.key}", dest=f"{sec}.{prm.key}", metavar=prm.kind.upper(),
                                 default=None, help=text.replace("%", "%%"))
    return parser


def parse(argv: Sequence[str]) -> ExperimentConfig:
    ns = build_parser().parse_args(list(argv))
    overrides = {}
    for dest, val in vars(ns).items():
        if "." in dest and val is not None:
            sec, key = dest.split(".", 1)
            overrides[(sec, key)] = val
    return build_config(ns.command, ns.config, overrides)


# --- instance construction --------------------------------------------------


def velocity_field(cfg: ExperimentConfig) -> cf.VelocityField:
    c = cfg.section("coefficients")
    d = c["d"]
    if c["preset"] == "constant":
        drift = c["drift"] * d if len(c["drift"]) == 1 else c["drift"]
        return cf.preset("constant", d, c=drift)
    if c["preset"] == "custom-polynomial":
        return cf.preset("custom-polynomial", d, coeffs=c["poly"])
    return cf.preset(c["preset"], d)


def grid_spec(cfg: ExperimentConfig):
    from ..solver import GridSpec

    g = cfg.section("grid")
    d = cfg.section("coefficients")["d"]
    return GridSpec(g["nt"], g["nx"], g["nv"], d, (g["t_start"], g["t_end"]), (g["x_start"], g["x_end"]),
                    (g["v_start"], g["v_end"]), periodic_x=True, periodic_v=g["periodic_v"])


def coefficient_set(cfg: ExperimentConfig, grid) -> cf.CoefficientSet:
    c = cfg.section("coefficients")
    b = velocity_field(cfg)
    if c["diffusion"] == "constant":
        A = c["a_value"]
    else:
        A = cf.checkerboard_A(c["a_low"], c["a_high"], c["checker_cells"] * grid.dv[0], grid.d)
    s = c["source"] if c["source"] != 0 else None
    return cf.CoefficientSet(b, A=A, s=s, lam=c["lambda"], Lam=c["Lambda"])


def initial_datum(cfg: ExperimentConfig, grid):
    ini = cfg.section("init")
    d = grid.d
    mids = np.array([(lo + hi) / 2 for lo, hi in grid.x_extent])
    L = np.array(grid.x_lengths)
    vmid = np.array([(lo + hi) / 2 for lo, hi in grid.v_extent])
    kind = ini["init"]
    modes = ini["init_modes"]
    coef = None
    if kind == "noise":
        rng = np.random.default_rng(cfg.stream("init"))
        coef = rng.standard_normal((d, modes, 2)) / np.arange(1, modes + 1)[None, :, None]

    def f0(X, V):
        u = 2 * np.pi * (X - mids) / L
        gv = np.exp(-2.0 * np.sum((V - vmid) ** 2, axis=-1))
        if kind == "smooth":
            return gv * np.prod(0.5 + 0.5 * np.cos(u), axis=-1)
        if kind == "modulated":
            return gv * (1.0 + 0.5 * np.sum(np.sin(u), axis=-1))
        k = np.arange(1, modes + 1)
        total = 0.0
        for a in range(d):
            ph = u[..., a, None] * k
            total = total + np.sum(coef[a, :, 0] * np.cos(ph) + coef[a, :, 1] * np.sin(ph), axis=-1)
        scale = np.sum(np.abs(coef))
        return gv * (1.0 + 0.5 * total / scale)

    return f0


def solved_instance(cfg: ExperimentConfig):
    from ..solver import ScalarField, solve_fp

    grid = grid_spec(cfg)
    C = coefficient_set(cfg, grid)
    sub = cfg.section("grid")["substeps"]
    f = solve_fp(C, initial_datum(cfg, grid), grid, "auto" if sub == "auto" else int(sub))
    f.check_finite("solution")
    s = None
    if C.s is not None:
        s = ScalarField(grid, np.full(grid.shape, float(cfg.section("coefficients")["source"])))
    return grid, C, f, s


# --- output helpers ---------------------------------------------------------


def _outdir(cfg: ExperimentConfig) -> Path:
    out = cfg.output
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "effective_config.ini").write_text(cfg.echo(), encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from None
    return out


def _kv(values: dict) -> str:
    return "".join(f"{k}={v!r}\n" if isinstance(v, float) else f"{k}={v}\n" for k, v in values.items())


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")
    sys.stdout.write(text)


# --- commands ---------------------------------------------------------------


def cmd_nondeg(cfg: ExperimentConfig) -> int:
    out = _outdir(cfg)
    blk = cfg.section("nondeg")
    b = velocity_field(cfg)
    ball = (tuple(blk["v0"]), blk["radius"])
    rep = cf.estimate_nondegeneracy(b, ball, direction_samples=blk["directions"],
                                    resolution=blk["resolution"] or None)
    rep.to_csv(out / "nondeg.csv")
    db = cf.db_inverse_norm_bound(b, ball)
    _write(out / "nondeg_summary.txt", _kv({"K": rep.K, "alpha": rep.alpha, "degenerate": rep.degenerate,
                                             "fit_residual": rep.fit_residual, "db_inverse_norm": db}))
    return EXIT_OK


def cmd_solve(cfg: ExperimentConfig) -> int:
    from ..solver import weak_residual

    out = _outdir(cfg)
    grid, C, f, _ = solved_instance(cfg)
    f.to_kfp1(out / "solution.kfp1")
    fixed = {"t": grid.nt - 1}
    if grid.d == 2:
        fixed.update({"x2": grid.nx // 2, "v2": grid.nv // 2})
    f.export_csv(out / "final_slice.csv", fixed)
    res = weak_residual(f, C, cfg.section("solve")["test_count"], seed=cfg.stream_int("residual"))
    mass = f.values.reshape(grid.nt, -1).sum(axis=1) * grid.cell_volume
    _write(out / "solve_summary.txt", _kv({"residual_max": res.max, "residual_rms": res.rms,
                                            "mass_initial": float(mass[0]), "mass_final": float(mass[-1]),
                                            "max": float(f.values.max()), "min": float(f.values.min())}))
    return EXIT_OK


def cmd_average(cfg: ExperimentConfig) -> int:
    from ..averaging import averaging_gain_experiment

    out = _outdir(cfg)
    blk = cfg.section("average")
    table = averaging_gain_experiment(velocity_field(cfg), blk["bands"], varsigma=blk["varsigma"],
                                      seed=cfg.stream_int("average"), nt=blk["avg_nt"],
                                      nx=blk["avg_nx"] or None, nv=blk["avg_nv"], convention=blk["convention"])
    table.to_csv(out / "gain.csv")
    _write(out / "average_summary.txt", _kv({"spread": table.spread(), "growth": table.growth()}))
    return EXIT_OK


def cmd_moser(cfg: ExperimentConfig) -> int:
    from ..degiorgi import moser_trace

    out = _outdir(cfg)
    blk = cfg.section("moser")
    _, _, f, s = solved_instance(cfg)
    tr = moser_trace(f, s, blk["q"], n_max=blk["n_max"])
    tr.to_csv(out / "moser.csv")
    _write(out / "moser_summary.txt", tr.summary() + "\n")
    return EXIT_OK


def cmd_degiorgi(cfg: ExperimentConfig) -> int:
    from ..degiorgi import degiorgi_trace, lp_norm, transition_index
    from ..regions import cylinder_mask

    out = _outdir(cfg)
    blk = cfg.section("degiorgi")
    grid, _, f, s = solved_instance(cfg)
    l0 = blk["C0"] * lp_norm(np.maximum(f.values, 0.0), cylinder_mask(grid, 1.0), grid.cell_volume, 2.0)
    level = blk["level"] or l0
    if not level > 0:
        raise ValidationError("level l must be positive; f+ vanishes on Q_1, so set --level")
    tr = degiorgi_trace(f, s, blk["q"], level, n_max=blk["n_max"], C0=blk["C0"], l0=l0)
    tr.to_csv(out / "degiorgi.csv")
    _write(out / "degiorgi_summary.txt", tr.summary() + f" transition_index={transition_index(tr)}\n")
    return EXIT_OK


def _ratio(text: str):
    return text if text == "omega" else float(text)


def cmd_oscillation(cfg: ExperimentConfig) -> int:
    from ..holder import holder_seminorm, oscillation_profile
    from ..regions import default_center

    out = _outdir(cfg)
    blk = cfg.section("oscillation")
    grid, C, f, s = solved_instance(cfg)
    prof = oscillation_profile(f, s, blk["q"], default_center(grid), C.b, blk["scale_count"],
                               r1=blk["r1"] or None, ratio=_ratio(blk["ratio"]))
    prof.to_csv(out / "profile.csv")
    beta = min(prof.beta_over_3, 1.0) if math.isfinite(prof.beta_over_3) else 1.0
    semi = holder_seminorm(f, beta, blk["pairs"], seed=cfg.stream_int("pairs"))
    _write(out / "oscillation_summary.txt", prof.summary() + _kv({"seminorm_beta": beta, "seminorm": semi}))
    return EXIT_OK


def cmd_boundary(cfg: ExperimentConfig) -> int:
    from ..holder import initial_time_profile

    out = _outdir(cfg)
    blk = cfg.section("boundary")
    grid, C, f, s = solved_instance(cfg)
    x0 = np.array([(lo + hi) / 2 for lo, hi in grid.x_extent])
    v0 = np.array([(lo + hi) / 2 for lo, hi in grid.v_extent])
    prof = initial_time_profile(f, (blk["alpha0"], blk["seminorm0"]), s, blk["q"], (0.0, x0, v0), C.b,
                                blk["scale_count"], r1=blk["r1"] or None, ratio=_ratio(blk["ratio"]))
    prof.to_csv(out / "boundary_profile.csv")
    _write(out / "boundary_summary.txt", prof.summary())
    return EXIT_OK


def cmd_exponents(cfg: ExperimentConfig) -> int:
    from ..averaging import exponent_table

    blk = cfg.section("exponents")
    table = exponent_table(blk["alpha"], blk["delta"], blk["d"], blk["d"], blk["q"], blk["gamma"])
    out = _outdir(cfg)
    _write(out / "exponents.txt", table.to_text())
    return EXIT_OK


def cmd_report(cfg: ExperimentConfig) -> int:
    target = Path(cfg.section("report")["dir"] or cfg.output)
    try:
        index = write_report(target)
    except OSError as exc:
        raise ConfigError(f"cannot write report in {target}: {exc}") from None
    sys.stdout.write(index.read_text(encoding="utf-8"))
    return EXIT_OK


def cmd_selftest(cfg: ExperimentConfig) -> int:
    from .selftest import run_checks

    out = _outdir(cfg)
    results = run_checks()
    lines = ["name,passed,value,target"]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.value!r} (target {r.target})")
        lines.append(f"{r.name},{int(r.passed)},{r.value!r},{r.target}")
    (out / "selftest.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE


COMMANDS = {
    "nondeg": cmd_nondeg, "solve": cmd_solve, "average": cmd_average, "moser": cmd_moser,
    "degiorgi": cmd_degiorgi, "oscillation": cmd_oscillation, "boundary": cmd_boundary,
    "exponents": cmd_exponents, "report": cmd_report, "selftest": cmd_selftest,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, dispatch, and map failures onto exit codes."""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse(argv)
        return COMMANDS[cfg.command](cfg)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except KFPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
