"""Experiment configuration: an INI file with sections, validated against a
single parameter schema shared with the command-line flags.

Sections: [run], [coefficients], [grid], [init] and one block named after
the subcommand (e.g. [average]). Values are resolved as defaults, then the
config file, then explicit flags. Unknown sections or keys are rejected and
every violation is reported at once.

Randomness: the [run] seed is split into independent streams by
``numpy.random.SeedSequence(seed, spawn_key=(stream,))`` with a fixed stream
counter per consumer (see ``STREAMS``).
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from ..errors import ConfigError

STREAMS = {"init": 0, "residual": 1, "average": 2, "pairs": 3}

PRESET_NAMES = ("free_streaming", "relativistic", "cubic", "constant", "custom-polynomial")


@dataclass(frozen=True)
class Param:
    key: str
    kind: str  # int, float, str, bool, floats, ints, choice
    default: Any
    help: str
    check: Optional[Callable[[Any], bool]] = None
    pre: str = ""
    choices: tuple = ()


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


P = Param

COMMON = {
    "run": [
        P("seed", "int", 0, "root seed for every random stream", _nonneg, "seed >= 0"),
        P("output", "str", "kfplab_out", "output directory (created if missing)"),
    ],
    "coefficients": [
        P("preset", "choice", "free_streaming", "velocity field b", choices=PRESET_NAMES),
        P("d", "int", 1, "dimension of x and v", lambda x: x in (1, 2), "d in {1, 2}"),
        P("drift", "floats", [1.0], "constant drift c for preset=constant",
          pre="one value or d values"),
        P("poly", "floats", [0.0, 1.0], "coefficients c0, c1, ... of b(v) = sum c_k v^k for custom-polynomial",
          lambda x: len(x) >= 1, "at least one coefficient"),
        P("diffusion", "choice", "constant", "diffusion matrix A = a I", choices=("constant", "checkerboard")),
        P("a_value", "float", 1.0, "a for diffusion=constant", _pos, "lambda <= a_value <= Lambda (H)"),
        P("a_low", "float", 0.5, "checkerboard low value", _pos, "lambda <= a_low <= Lambda (H)"),
        P("a_high", "float", 2.0, "checkerboard high value", _pos, "lambda <= a_high <= Lambda (H)"),
        P("checker_cells", "int", 4, "checkerboard cell side in v grid cells", _pos, "checker_cells >= 1"),
        P("lambda", "float", 0.5, "lower ellipticity bound", _pos,
          "0 < lambda <= Lambda, ellipticity hypothesis (H)"),
        P("Lambda", "float", 2.0, "upper ellipticity bound", _pos,
          "lambda <= Lambda, ellipticity hypothesis (H)"),
        P("source", "float", 0.0, "constant source term s", pre="finite"),
    ],
    "grid": [
        P("nt", "int", 65, "time nodes", lambda x: x >= 4, "nt >= 4"),
        P("nx", "int", 64, "x cells per axis", lambda x: x >= 4, "nx >= 4"),
        P("nv", "int", 64, "v cells per axis", lambda x: x >= 4, "nv >= 4"),
        P("t_start", "float", -1.0, "initial time", pre="t_start < t_end"),
        P("t_end", "float", 0.0, "final time", pre="t_start < t_end"),
        P("x_start", "float", -1.0, "x box lower edge (periodic)", pre="x_start < x_end"),
        P("x_end", "float", 1.0, "x box upper edge (periodic)", pre="x_start < x_end"),
        P("v_start", "float", -1.5, "v box lower edge", pre="v_start < v_end"),
        P("v_end", "float", 1.5, "v box upper edge", pre="v_start < v_end"),
        P("periodic_v", "bool", False, "periodic v instead of a zero Dirichlet layer"),
        P("substeps", "str", "auto", "solver steps per stored snapshot",
          lambda x: x == "auto" or (x.isdigit() and int(x) >= 1), "'auto' or an integer >= 1 (CFL <= 0.9)"),
    ],
    "init": [
        P("init", "choice", "smooth", "initial datum", choices=("smooth", "modulated", "noise")),
        P("init_modes", "int", 4, "x modes of the seeded noise datum", _pos, "init_modes >= 1"),
    ],
}

_Q = P("q", "float", 10.0, "integrability exponent of the source", _pos,
       "q > (1+2d)^2 for the iteration exponents")
_SCALES = P("scale_count", "int", 4, "number of nested cylinders", lambda x: x >= 4, "scale_count >= 4")
_RATIO = P("ratio", "str", "0.5", "scale ratio r_(i+1)/r_i, or 'omega' for omega/2",
           lambda x: x == "omega" or _float_in(x, 0, 1), "'omega' or a number in (0, 1)")
_R1 = P("r1", "float", 0.0, "largest radius; 0 picks the largest cylinder inside the grid", _nonneg, "r1 >= 0")

BLOCKS = {
    "nondeg": [
        P("v0", "floats", [0.0], "centre of the velocity ball", pre="d values"),
        P("radius", "float", 1.0, "radius of the velocity ball", _pos, "radius > 0"),
        P("resolution", "int", 0, "cells across the ball; 0 picks the default", _nonneg, "resolution >= 0"),
        P("directions", "int", 64, "sampled directions nu (d = 2)", lambda x: x >= 8, "directions >= 8"),
    ],
    "solve": [
        P("test_count", "int", 16, "seeded bumps in the weak residual", _pos, "test_count >= 1"),
    ],
    "average": [
        P("bands", "ints", [32, 64, 128, 256, 512], "band limits N", lambda x: all(n >= 1 for n in x),
          "every N >= 1"),
        P("varsigma", "float", 0.2, "Sobolev exponent", lambda x: 0 < x < 1, "0 < varsigma < 1"),
        P("avg_nt", "int", 2048, "time samples", lambda x: x >= 8, "avg_nt >= 8"),
        P("avg_nx", "int", 0, "x samples; 0 picks max(64, 4 max N)", _nonneg, "avg_nx = 0 or >= 2 max N + 1"),
        P("avg_nv", "int", 1024, "velocity samples on (-1, 1)", lambda x: x >= 8, "avg_nv >= 8"),
        P("convention", "choice", "homogeneous_plus_L2", "H^s weight convention",
          choices=("homogeneous_plus_L2", "inhomogeneous")),
    ],
    "moser": [_Q, P("n_max", "int", 20, "iteration depth", _pos, "n_max >= 1")],
    "degiorgi": [
        _Q,
        P("n_max", "int", 12, "iteration depth", _pos, "n_max >= 1"),
        P("C0", "float", 0.25, "base level l0 = C0 ||f+||_L2(Q1)", _pos, "C0 > 0"),
        P("level", "float", 0.0, "level increment l; 0 uses l0", _nonneg, "level >= 0"),
    ],
    "oscillation": [
        _Q, _SCALES, _RATIO, _R1,
        P("pairs", "int", 20000, "point pairs for the Holder seminorm", _pos, "pairs >= 1"),
    ],
    "boundary": [
        _Q, _SCALES, _RATIO, _R1,
        P("alpha0", "float", 1.0, "Holder exponent of the initial datum (clamped to 1)", _pos, "alpha0 > 0"),
        P("seminorm0", "float", 1.0, "Holder seminorm of the initial datum", _nonneg, "seminorm0 >= 0"),
    ],
    "exponents": [
        P("alpha", "float", 1.0, "nondegeneracy exponent", lambda x: 0 < x <= 1, "0 < alpha <= 1"),
        P("delta", "float", 1.0, "Holder exponent of b", lambda x: 0 < x <= 1, "0 < delta <= 1"),
        P("d", "int", 1, "dimension (d1 = d2 = d)", _pos, "d >= 1"),
        P("q", "float", 100.0, "integrability exponent", _pos,
          "q > (1+d1+d2)/gamma; q > (1+2d)^2 for gamma=bdd at alpha=1"),
        P("gamma", "choice", "bdd", "averaging exponent used for kappa", choices=("VAL", "lip", "NA", "bdd")),
    ],
    "report": [
        P("dir", "str", "", "directory to index; empty uses [run] output"),
    ],
    "selftest": [],
}

COMMAND_SECTIONS = {
    "nondeg": ("run", "coefficients"),
    "solve": ("run", "coefficients", "grid", "init"),
    "average": ("run", "coefficients"),
    "moser": ("run", "coefficients", "grid", "init"),
    "degiorgi": ("run", "coefficients", "grid", "init"),
    "oscillation": ("run", "coefficients", "grid", "init"),
    "boundary": ("run", "coefficients", "grid", "init"),
    "exponents": ("run",),
    "report": ("run",),
    "selftest": ("run",),
}

_HOLDER_GRID = {("grid", "nt"): 96, ("grid", "nx"): 96, ("grid", "nv"): 64}
COMMAND_DEFAULTS = {
    "oscillation": dict(_HOLDER_GRID),
    "boundary": {**_HOLDER_GRID, ("grid", "t_start"): 0.0, ("grid", "t_end"): 1.0},
}


def _float_in(text, lo, hi) -> bool:
    try:
        x = float(text)
    except ValueError:
        return False
    return lo < x < hi


def schema(command: str) -> dict:
    out = {s: COMMON[s] for s in COMMAND_SECTIONS[command]}
    out[command] = BLOCKS[command]
    return out


def convert(p: Param, text: str):
    text = text.strip()
    if p.kind == "int":
        return int(text)
    if p.kind == "float":
        x = float(text)
        if not math.isfinite(x):
            raise ValueError("not finite")
        return x
    if p.kind == "bool":
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError("expected true or false")
    if p.kind == "floats":
        vals = [float(t) for t in text.split(",") if t.strip()]
        if not vals or not all(math.isfinite(v) for v in vals):
            raise ValueError("expected comma-separated finite numbers")
        return vals
    if p.kind == "ints":
        vals = [int(t) for t in text.split(",") if t.strip()]
        if not vals:
            raise ValueError("expected comma-separated integers")
        return vals
    if p.kind == "choice":
        if text not in p.choices:
            raise ValueError(f"expected one of {', '.join(p.choices)}")
        return text
    return text


def format_value(p: Param, value) -> str:
    if p.kind in ("floats", "ints"):
        return ",".join(repr(v) for v in value)
    if p.kind == "bool":
        return "true" if value else "false"
    return repr(value) if p.kind == "float" else str(value)


@dataclass
class ExperimentConfig:
    command: str
    values: dict = field(default_factory=dict)
    source: Optional[str] = None

    def section(self, name: str) -> dict:
        return self.values[name]

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    @property
    def output(self) -> Path:
        return Path(self.values["run"]["output"])

    def stream(self, name: str) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.seed, spawn_key=(STREAMS[name],))

    def stream_int(self, name: str) -> int:
        return int(self.stream(name).generate_state(1)[0])

    def echo(self) -> str:
        """Effective configuration in the same INI format."""
        lines = []
        for sec, params in schema(self.command).items():
            lines.append(f"[{sec}]")
            lines += [f"{p.key} = {format_value(p, self.values[sec][p.key])}" for p in params]
            lines.append("")
        return "\n".join(lines)


def _key_lines(text: str) -> dict:
    """(section, key) -> line number, for error messages."""
    out = {}
    sec = None
    for i, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            sec = m.group(1).strip()
            out[(sec, None)] = i
            continue
        m = re.match(r"\s*([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and sec is not None:
            out[(sec, m.group(1))] = i
    return out


def _read_ini(path) -> tuple[dict, dict]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {path} does not exist")
    text = p.read_text(encoding="utf-8")
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(path))
    except configparser.ParsingError as exc:
        lines = ", ".join(str(n) for n, _ in exc.errors)
        raise ConfigError(f"{path}: parse error at line {lines}") from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError,
            configparser.MissingSectionHeaderError) as exc:
        raise ConfigError(f"{path}: parse error at line {exc.lineno}: {exc.message.splitlines()[0]}") from None
    raw = {s: dict(cp.items(s, raw=True)) for s in cp.sections()}
    return raw, _key_lines(text)


def build_config(command: str, path=None, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Resolve defaults, the optional INI file and flag overrides
    ``{(section, key): text}``; raise ConfigError listing every violation."""
    sch = schema(command)
    errors: list[str] = []
    values = {sec: {p.key: p.default for p in params} for sec, params in sch.items()}
    for (sec, key), v in COMMAND_DEFAULTS.get(command, {}).items():
        values[sec][key] = v
    origin: dict = {}
    if path is not None:
        raw, lines = _read_ini(path)
        for sec, items in raw.items():
            if sec not in sch:
                errors.append(f"line {lines.get((sec, None), '?')}: unknown section [{sec}] "
                              f"(allowed for {command}: {', '.join(sch)})")
                continue
            params = {p.key: p for p in sch[sec]}
            for key, text in items.items():
                where = f"line {lines.get((sec, key), '?')}"
                if key not in params:
                    errors.append(f"{where}: unknown key '{key}' in [{sec}]")
                    continue
                _assign(params[key], text, values[sec], where, errors)
                origin[(sec, key)] = where
    for (sec, key), text in (overrides or {}).items():
        p = {q.key: q for q in sch[sec]}[key]
        _assign(p, text, values[sec], f"flag --{key}", errors)
        origin[(sec, key)] = f"flag --{key}"
    errors += _cross_checks(command, values, origin)
    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))
    return ExperimentConfig(command, values, None if path is None else str(path))


def _assign(p: Param, text: str, target: dict, where: str, errors: list) -> None:
    try:
        v = convert(p, text)
    except ValueError as exc:
        errors.append(f"{where}: {p.key} = {text.strip()!r} is not a valid {p.kind} ({exc})")
        return
    if p.check is not None and not p.check(v):
        errors.append(f"{where}: {p.key} = {text.strip()!r} violates {p.pre}")
        return
    target[p.key] = v


def load_config(path, command: str) -> ExperimentConfig:
    return build_config(command, path)


def _cross_checks(command: str, values: dict, origin: dict) -> list[str]:
    errs = []

    def at(sec, key):
        w = origin.get((sec, key))
        return f"{w}: " if w else ""

    c = values.get("coefficients")
    if c is not None:
        lam, Lam = c["lambda"], c["Lambda"]
        if lam > Lam:
            errs.append(f"{at('coefficients', 'lambda')}lambda = {lam!r} > Lambda = {Lam!r} violates "
                        f"the ellipticity hypothesis (H): 0 < lambda <= Lambda")
        else:
            used = ("a_value",) if c["diffusion"] == "constant" else ("a_low", "a_high")
            for k in used:
                if not lam <= c[k] <= Lam:
                    errs.append(f"{at('coefficients', k)}{k} = {c[k]!r} outside [lambda, Lambda] = "
                                f"[{lam!r}, {Lam!r}] violates the ellipticity hypothesis (H)")
        if c["preset"] == "constant" and len(c["drift"]) not in (1, c["d"]):
            errs.append(f"{at('coefficients', 'drift')}drift needs 1 or d = {c['d']} values")
        if command == "average" and c["d"] != 1:
            errs.append(f"{at('coefficients', 'd')}the averaging experiment needs d = 1")
    g = values.get("grid")
    if g is not None:
        for ax in ("t", "x", "v"):
            if not g[f"{ax}_start"] < g[f"{ax}_end"]:
                errs.append(f"{at('grid', ax + '_start')}{ax}_start < {ax}_end is required")
        if command == "boundary" and g["t_start"] != 0.0:
            errs.append(f"{at('grid', 't_start')}boundary needs t_start = 0 (cylinders centred on t = 0)")
    blk = values.get(command, {})
    if command == "nondeg" and c is not None and len(blk["v0"]) != c["d"]:
        errs.append(f"{at('nondeg', 'v0')}v0 needs d = {c['d']} values")
    if command == "average" and blk["avg_nx"] and blk["avg_nx"] < 2 * max(blk["bands"]) + 1:
        errs.append(f"{at('average', 'avg_nx')}avg_nx must be >= 2 max N + 1 = {2 * max(blk['bands']) + 1}")
    return errs
