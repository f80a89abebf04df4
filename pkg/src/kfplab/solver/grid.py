"""Space-time-velocity grids and sampled fields.

Periodic axes carry nodes ``lo + j*h`` with ``h = L/n``; non-periodic axes
carry cell centres ``lo + (j + 1/2)*h``. Time carries ``nt`` snapshots from
``t_start`` to ``t_end`` inclusive. Field values are stored with t slowest,
then the x axes, then the v axes fastest.
"""
from __future__ import annotations

import csv
import itertools
import struct
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import ConfigError, InputError, NumericalError

MAGIC = b"KFP1"


def _pairs(ext, d: int) -> tuple[tuple[float, float], ...]:
    ext = np.asarray(ext, dtype=float)
    if ext.shape == (2,):
        ext = np.tile(ext, (d, 1))
    if ext.shape != (d, 2):
        raise ConfigError(f"extent must be one (lo, hi) pair or {d} of them")
    return tuple((float(lo), float(hi)) for lo, hi in ext)


def _axis(lo: float, hi: float, n: int, periodic: bool) -> np.ndarray:
    h = (hi - lo) / n
    if periodic:
        return lo + h * np.arange(n)
    return lo + h * (np.arange(n) + 0.5)


@dataclass(frozen=True)
class GridSpec:
    nt: int
    nx: int
    nv: int
    d: int = 1
    t_extent: tuple = (0.0, 1.0)
    x_extent: tuple = (0.0, 1.0)
    v_extent: tuple = (-1.0, 1.0)
    periodic_x: bool = True
    periodic_v: bool = False

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ConfigError("only d = 1 or d = 2 is supported")
        for name in ("nt", "nx", "nv"):
            if int(getattr(self, name)) < 4:
                raise ConfigError(f"{name} must be >= 4")
        t0, t1 = (float(a) for a in self.t_extent)
        object.__setattr__(self, "t_extent", (t0, t1))
        object.__setattr__(self, "x_extent", _pairs(self.x_extent, self.d))
        object.__setattr__(self, "v_extent", _pairs(self.v_extent, self.d))
        for lo, hi in ((t0, t1),) + self.x_extent + self.v_extent:
            if not hi > lo:
                raise ConfigError("every extent must have positive length")

    # spacings -------------------------------------------------------------
    @property
    def dt(self) -> float:
        return (self.t_extent[1] - self.t_extent[0]) / (self.nt - 1)

    @property
    def dx(self) -> tuple[float, ...]:
        return tuple((hi - lo) / self.nx for lo, hi in self.x_extent)

    @property
    def dv(self) -> tuple[float, ...]:
        return tuple((hi - lo) / self.nv for lo, hi in self.v_extent)

    @property
    def x_lengths(self) -> tuple[float, ...]:
        return tuple(hi - lo for lo, hi in self.x_extent)

    @property
    def cell_volume(self) -> float:
        return self.dt * float(np.prod(self.dx)) * float(np.prod(self.dv))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nt,) + (self.nx,) * self.d + (self.nv,) * self.d

    @property
    def xv_shape(self) -> tuple[int, ...]:
        return self.shape[1:]

    def cfl(self) -> dict:
        return {"dt": self.dt, "dx": self.dx, "dv": self.dv}

    # coordinates ----------------------------------------------------------
    def t(self) -> np.ndarray:
        return np.linspace(self.t_extent[0], self.t_extent[1], self.nt)

    def x_axes(self) -> list[np.ndarray]:
        return [_axis(lo, hi, self.nx, self.periodic_x) for lo, hi in self.x_extent]

    def v_axes(self) -> list[np.ndarray]:
        return [_axis(lo, hi, self.nv, self.periodic_v) for lo, hi in self.v_extent]

    def mesh_xv(self) -> tuple[np.ndarray, np.ndarray]:
        """X and V of shape xv_shape + (d,)."""
        grids = np.meshgrid(*self.x_axes(), *self.v_axes(), indexing="ij")
        X = np.stack(grids[: self.d], axis=-1)
        V = np.stack(grids[self.d:], axis=-1)
        return X, V

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """T, X, V broadcast against the full grid shape."""
        X, V = self.mesh_xv()
        T = self.t().reshape((self.nt,) + (1,) * (2 * self.d))
        return T, X[None], V[None]

    def axis_names(self) -> list[str]:
        if self.d == 1:
            return ["t", "x", "v"]
        return ["t", "x1", "x2", "v1", "v2"]

    def axis_coords(self) -> list[np.ndarray]:
        return [self.t()] + self.x_axes() + self.v_axes()

    def with_counts(self, nt=None, nx=None, nv=None) -> "GridSpec":
        return GridSpec(nt or self.nt, nx or self.nx, nv or self.nv, self.d, self.t_extent,
                        self.x_extent, self.v_extent, self.periodic_x, self.periodic_v)


@dataclass
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise InputError(f"values have shape {self.values.shape}, grid expects {self.grid.shape}")

    @classmethod
    def from_function(cls, grid: GridSpec, func: Callable) -> "ScalarField":
        """Sample ``func(T, X, V)`` (broadcasting arrays) on every grid point."""
        T, X, V = grid.mesh()
        vals = np.broadcast_to(np.asarray(func(T, X, V), dtype=float), grid.shape)
        return cls(grid, np.array(vals))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    def check_finite(self, what: str = "field") -> "ScalarField":
        if not np.all(np.isfinite(self.values)):
            raise NumericalError(f"{what} contains NaN or Inf values")
        return self

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    # persistence ----------------------------------------------------------
    def to_kfp1(self, path) -> None:
        write_kfp1(path, self)

    def export_csv(self, path, fixed: Optional[dict] = None) -> None:
        export_csv(path, self, fixed)


def write_kfp1(path, field: ScalarField) -> None:
    """Binary layout: b"KFP1", u32 LE (nt, nx per axis, nv per axis, d),
    f64 LE extents (t_start, t_end, x lo/hi per axis, v lo/hi per axis),
    then the f64 LE values in storage order."""
    g = field.grid
    dims = [g.nt] + [g.nx] * g.d + [g.nv] * g.d + [g.d]
    ext = [*g.t_extent] + [a for p in g.x_extent for a in p] + [a for p in g.v_extent for a in p]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack(f"<{len(dims)}I", *dims))
        fh.write(struct.pack(f"<{len(ext)}d", *ext))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_kfp1(path, periodic_x: bool = True, periodic_v: bool = False) -> ScalarField:
    """Inverse of :func:`write_kfp1`. Boundary flags are not part of the
    format and are supplied by the caller."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise InputError(f"{path}: not a KFP1 file")
    head = struct.unpack_from("<4I", data, 4)
    if head[3] == 1:
        d, dims, off = 1, head, 4 + 16
    else:
        dims = struct.unpack_from("<6I", data, 4)
        d, off = 2, 4 + 24
        if dims[5] != 2 or dims[1] != dims[2] or dims[3] != dims[4]:
            raise InputError(f"{path}: malformed KFP1 header {dims}")
    nt, nx, nv = dims[0], dims[1], dims[1 + d]
    n_ext = 2 + 4 * d
    ext = struct.unpack_from(f"<{n_ext}d", data, off)
    off += 8 * n_ext
    grid = GridSpec(nt, nx, nv, d, ext[0:2],
                    [ext[2 + 2 * i: 4 + 2 * i] for i in range(d)],
                    [ext[2 + 2 * d + 2 * i: 4 + 2 * d + 2 * i] for i in range(d)],
                    periodic_x, periodic_v)
    count = int(np.prod(grid.shape))
    if len(data) - off != 8 * count:
        raise InputError(f"{path}: expected {count} values, found {(len(data) - off) // 8}")
    vals = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(grid.shape)
    return ScalarField(grid, vals.astype(np.float64))


def export_csv(path, field: ScalarField, fixed: Optional[dict] = None) -> None:
    """Write a slice as CSV: one column per free axis plus ``value``.

    ``fixed`` maps axis names (``t``, ``x``, ``v`` or ``x1`` ... ``v2``) to
    grid indices held constant.
    """
    g = field.grid
    names = g.axis_names()
    coords = g.axis_coords()
    fixed = dict(fixed or {})
    unknown = set(fixed) - set(names)
    if unknown:
        raise InputError(f"unknown axis name(s) {sorted(unknown)}; axes are {names}")
    index = tuple(fixed.get(n, slice(None)) for n in names)
    sub = field.values[index]
    free = [i for i, n in enumerate(names) if n not in fixed]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([names[i] for i in free] + ["value"])
        for idx in itertools.product(*(range(len(coords[i])) for i in free)):
            w.writerow([repr(float(coords[i][j])) for i, j in zip(free, idx)] + [repr(float(sub[idx]))])


def interp_periodic_shift_weights(frac: np.ndarray) -> tuple[np.ndarray, ...]:
    """Four-point Lagrange weights for offsets -1, 0, 1, 2 at fractional
    position ``frac`` in [0, 1)."""
    s = frac
    w_m1 = -s * (s - 1) * (s - 2) / 6
    w_0 = (s + 1) * (s - 1) * (s - 2) / 2
    w_1 = -(s + 1) * s * (s - 2) / 2
    w_2 = (s + 1) * s * (s - 1) / 6
    return w_m1, w_0, w_1, w_2


def sample_points(field_values: np.ndarray, coords: Sequence[np.ndarray], periodic: Sequence[bool],
                  lengths: Sequence[float], points: Sequence[np.ndarray]) -> np.ndarray:
    """Multilinear interpolation of a gridded array at scattered points.

    ``coords`` are the uniform axis coordinates; periodic axes wrap with the
    given length, other axes clamp at the outermost nodes.
    """
    idx0 = []
    wts = []
    for c, per, L, p in zip(coords, periodic, lengths, points):
        h = c[1] - c[0]
        u = (np.asarray(p, dtype=float) - c[0]) / h
        if per:
            n = len(c)
            u = np.mod(u, n)
            i = np.floor(u).astype(int)
            f = u - i
            idx0.append((i % n, (i + 1) % n))
        else:
            u = np.clip(u, 0, len(c) - 1)
            i = np.minimum(np.floor(u).astype(int), len(c) - 2)
            f = u - i
            idx0.append((i, i + 1))
        wts.append((1 - f, f))
    out = 0.0
    for corner in itertools.product((0, 1), repeat=len(coords)):
        w = 1.0
        ind = []
        for ax, k in enumerate(corner):
            w = w * wts[ax][k]
            ind.append(idx0[ax][k])
        out = out + w * field_values[tuple(ind)]
    return out
