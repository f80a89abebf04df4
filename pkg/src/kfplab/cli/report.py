"""Artifact index with 64-bit FNV-1a checksums and gnuplot scripts.

Index format (``index.txt``), one artifact per line, sorted by path:

    fnv1a64=<16 hex digits> bytes=<size> path=<path relative to the directory>

FNV-1a 64: h = 0xcbf29ce484222325; for each byte h = ((h ^ byte) * 0x100000001b3) mod 2^64.
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Optional

from ..errors import InputError

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = (1 << 64) - 1
INDEX_NAME = "index.txt"
ARTIFACT_SUFFIXES = (".csv", ".kfp1")

# column choices and axis scales for known tables: (x, [y...], logx, logy)
PLOT_LAYOUTS = {
    ("N", "l2", "hs_per_v", "hs_avg", "ratio"): ("N", ["ratio"], True, False),
    ("n", "r_n", "level_or_p", "value", "growth_factor"): ("n", ["value"], False, True),
    ("r", "osc", "source_correction", "ratio"): ("r", ["osc"], True, True),
    ("epsilon", "sup_measure", "K", "alpha", "fit_residual", "degenerate"): ("epsilon", ["sup_measure"], True, True),
}


def fnv1a64(data: bytes, h: int = FNV_OFFSET) -> int:
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & MASK64
    return h


def file_checksum(path) -> int:
    h = FNV_OFFSET
    with open(path, "rb") as fh:
        while chunk := fh.read(1 << 16):
            h = fnv1a64(chunk, h)
    return h


def _numeric_columns(path: Path) -> Optional[list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        first = next(rows, None)
    if not header or first is None:
        return None
    cols = []
    for name, cell in zip(header, first):
        try:
            float(cell)
        except ValueError:
            continue
        cols.append(name)
    return cols if len(cols) >= 2 else None


def gnuplot_script(csv_path: Path) -> Optional[str]:
    cols = _numeric_columns(csv_path)
    if cols is None:
        return None
    with open(csv_path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh))
    layout = PLOT_LAYOUTS.get(tuple(header))
    if layout is None:
        x, ys, logx, logy = cols[0], cols[1:], False, False
    else:
        x, ys, logx, logy = layout
    idx = {name: i + 1 for i, name in enumerate(header)}
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set xlabel '{x}'",
        f"set terminal pngcairo size 800,600",
        f"set output '{csv_path.stem}.png'",
    ]
    if logx:
        lines.append("set logscale x")
    if logy:
        lines.append("set logscale y")
    plots = [f"'{csv_path.name}' using {idx[x]}:{idx[y]} with linespoints" for y in ys]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def collect_artifacts(directory) -> list[Path]:
    root = Path(directory)
    if not root.is_dir():
        return []
    return sorted(p for p in root.rglob("*") if p.is_file() and p.suffix in ARTIFACT_SUFFIXES)


def write_report(directory, artifacts: Optional[Iterable] = None) -> Path:
    """Write gnuplot scripts next to each plottable CSV and ``index.txt``
    listing every artifact and script with its checksum."""
    root = Path(directory)
    arts = collect_artifacts(root) if artifacts is None else sorted(Path(a) for a in artifacts)
    if not arts:
        raise InputError(f"no CSV or KFP1 artifacts to index in {root}")
    entries = list(arts)
    for a in arts:
        if a.suffix == ".csv":
            script = gnuplot_script(a)
            if script is not None:
                gp = a.with_suffix(".gp")
                gp.write_text(script, encoding="utf-8")
                entries.append(gp)
    lines = ["# kfplab artifact index; checksum: 64-bit FNV-1a over the file bytes"]
    for p in sorted(set(entries)):
        rel = p.resolve().relative_to(root.resolve()).as_posix()
        lines.append(f"fnv1a64={file_checksum(p):016x} bytes={p.stat().st_size} path={rel}")
    index = root / INDEX_NAME
    index.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return index
