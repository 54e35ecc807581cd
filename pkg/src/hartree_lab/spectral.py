"""Periodic-grid Fourier calculus.

A :class:`Grid` discretizes the box ``[-L/2, L/2)^d`` with ``n`` points per
axis. Frequency coefficients follow the symmetric convention

    f_hat(xi) = (2 pi)^(-d/2) * integral f(x) exp(-i x.xi) dx,

approximated by ``(2 pi)^(-d/2) dx^d * fft(f)``, so that Plancherel reads
``dx^d sum |f|^2 == dxi^d sum |f_hat|^2`` with ``dxi = 2 pi / L``. The phase
factor from the box offset is dropped; every multiplier used here is a
function of ``xi`` only, so it never matters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

MAX_POINTS = 2**25

PHYSICAL = "physical"
FREQUENCY = "frequency"


class GridError(ValueError):
    """Raised for invalid grid parameters or mismatched grids."""


@dataclass(frozen=True)
class Grid:
    d: int
    n: int
    L: float

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or not 1 <= self.d <= 5:
            raise GridError(f"dimension out of range: d={self.d} (need 1 <= d <= 5)")
        if not isinstance(self.n, (int, np.integer)) or self.n < 4 or self.n % 2:
            raise GridError(f"points per axis must be an even integer >= 4, got n={self.n}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise GridError(f"box length must be positive, got L={self.L}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def dxi(self) -> float:
        return 2 * math.pi / self.L

    @property
    def cell_volume(self) -> float:
        return self.dx**self.d

    @property
    def fft_scale(self) -> float:
        return (2 * math.pi) ** (-self.d / 2) * self.cell_volume

    @property
    def nyquist(self) -> float:
        return math.pi * self.n / self.L

    # -- coordinates -----------------------------------------------------
    @cached_property
    def x1d(self) -> np.ndarray:
        """Node coordinates along one axis, origin at index ``n // 2``."""
        return -self.L / 2 + self.dx * np.arange(self.n)

    @cached_property
    def offsets1d(self) -> np.ndarray:
        """Minimal-image displacement of each index from index 0."""
        m = np.arange(self.n)
        m = np.where(m < self.n // 2, m, m - self.n)
        return m * self.dx

    @cached_property
    def xi1d(self) -> np.ndarray:
        return 2 * np.pi * sfft.fftfreq(self.n, d=self.dx)

    @cached_property
    def k1d(self) -> np.ndarray:
        """Integer lattice index per axis, in FFT order."""
        return np.rint(sfft.fftfreq(self.n, d=1.0 / self.n)).astype(np.int64)

    def axis_view(self, a: np.ndarray, axis: int) -> np.ndarray:
        shape = [1] * self.d
        shape[axis] = self.n
        return a.reshape(shape)

    def coords(self) -> list[np.ndarray]:
        return [self.axis_view(self.x1d, j) for j in range(self.d)]

    def offsets(self) -> list[np.ndarray]:
        return [self.axis_view(self.offsets1d, j) for j in range(self.d)]

    def xi(self) -> list[np.ndarray]:
        return [self.axis_view(self.xi1d, j) for j in range(self.d)]

    @cached_property
    def xi2(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for c in self.xi():
            out = out + c**2
        return out

    @cached_property
    def abs_xi(self) -> np.ndarray:
        return np.sqrt(self.xi2)

    @cached_property
    def radius(self) -> np.ndarray:
        """|x| at the nodes of the centered box."""
        r2 = np.zeros(self.shape)
        for c in self.coords():
            r2 = r2 + c**2
        return np.sqrt(r2)

    @cached_property
    def offset_radius(self) -> np.ndarray:
        """Minimal-image |x| in FFT (offset) layout."""
        r2 = np.zeros(self.shape)
        for c in self.offsets():
            r2 = r2 + c**2
        return np.sqrt(r2)

    # -- transforms ------------------------------------------------------
    def fft(self, a: np.ndarray) -> np.ndarray:
        return sfft.fftn(a, axes=range(self.d))

    def ifft(self, a: np.ndarray) -> np.ndarray:
        return sfft.ifftn(a, axes=range(self.d))

    def integrate(self, a: np.ndarray) -> float:
        """Rectangle-rule integral over the box."""
        return float(np.real(a.sum())) * self.cell_volume

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """Real part of ``integral a * conj(b)``."""
        return float(np.real(np.vdot(b, a))) * self.cell_volume

    def describe(self) -> dict:
        return {"d": self.d, "n": self.n, "L": self.L}


def make_grid(d: int, n: int, L: float, max_points: int = MAX_POINTS) -> Grid:
    grid = Grid(int(d), int(n), float(L))
    if grid.size > max_points:
        raise GridError(f"grid of {n}^{d} = {grid.size} points exceeds budget of {max_points}")
    return grid


@dataclass(frozen=True, eq=False)
class Field:
    """Complex samples on a grid, in physical or frequency representation."""

    grid: Grid
    data: np.ndarray
    rep: str = PHYSICAL

    def __post_init__(self):
        if self.rep not in (PHYSICAL, FREQUENCY):
            raise ValueError(f"unknown representation {self.rep!r}")
        if self.data.shape != self.grid.shape:
            raise GridError(f"data shape {self.data.shape} does not match grid {self.grid.shape}")

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[..., np.ndarray]) -> "Field":
        vals = np.broadcast_to(fn(*grid.coords()), grid.shape)
        return cls(grid, np.array(vals, dtype=complex))

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    @property
    def values(self) -> np.ndarray:
        """Physical samples (transforming if needed)."""
        if self.rep == PHYSICAL:
            return self.data
        return self.grid.ifft(self.data) / self.grid.fft_scale

    @property
    def coefficients(self) -> np.ndarray:
        """Frequency coefficients in the symmetric convention, FFT order."""
        if self.rep == FREQUENCY:
            return self.data
        return self.grid.fft(self.data) * self.grid.fft_scale

    def to_physical(self) -> "Field":
        return self if self.rep == PHYSICAL else Field(self.grid, self.values, PHYSICAL)

    def to_frequency(self) -> "Field":
        return self if self.rep == FREQUENCY else Field(self.grid, self.coefficients, FREQUENCY)

    def with_data(self, data: np.ndarray) -> "Field":
        return Field(self.grid, data, self.rep)

    def _check(self, other: "Field"):
        if other.grid != self.grid:
            raise GridError("fields live on different grids")

    def __add__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, c) -> "Field":
        return Field(self.grid, self.data * c, self.rep)

    __rmul__ = __mul__

    def conj(self) -> "Field":
        return Field(self.grid, np.conj(self.values))


def _same_rep(template: Field, coeffs: np.ndarray) -> Field:
    out = Field(template.grid, coeffs, FREQUENCY)
    return out if template.rep == FREQUENCY else out.to_physical()


# -- multipliers -------------------------------------------------------------


@dataclass(frozen=True)
class MultiplierSymbol:
    """Frequency multiplier ``m(xi)`` with an explicit value at ``xi = 0``.

    ``evaluator`` receives the list of broadcastable frequency components and
    returns the symbol on the lattice; it is never trusted at the zero mode.
    """

    evaluator: Callable[[Sequence[np.ndarray]], np.ndarray]
    zero_mode_rule: complex = 0.0
    name: str = field(default="multiplier", compare=False)

    def on(self, grid: Grid) -> np.ndarray:
        xi = grid.xi()
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.broadcast_to(np.asarray(self.evaluator(xi)), grid.shape).astype(complex)
        vals = np.array(vals)
        vals[(0,) * grid.d] = self.zero_mode_rule
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"symbol {self.name!r} is not finite at a nonzero frequency")
        if np.all(vals.imag == 0):
            vals = vals.real
        return vals


def _abs(xi: Sequence[np.ndarray]) -> np.ndarray:
    return np.sqrt(sum(c**2 for c in xi))


def riesz(s: float) -> MultiplierSymbol:
    """``|grad|^s``; the zero mode is dropped unless ``s == 0``."""
    zero = 1.0 if s == 0 else 0.0
    return MultiplierSymbol(lambda xi: _abs(xi) ** s, zero, f"|grad|^{s}")


def bessel(s: float) -> MultiplierSymbol:
    """``<grad>^s`` with ``<xi> = sqrt(1 + |xi|^2)``."""
    return MultiplierSymbol(lambda xi: (1 + sum(c**2 for c in xi)) ** (s / 2), 1.0, f"<grad>^{s}")


def partial(axis: int) -> MultiplierSymbol:
    return MultiplierSymbol(lambda xi: 1j * xi[axis], 0.0, f"d/dx{axis}")


def apply_multiplier(f: Field, m: MultiplierSymbol | np.ndarray) -> Field:
    table = m.on(f.grid) if isinstance(m, MultiplierSymbol) else np.asarray(m)
    if table.shape != f.grid.shape:
        raise GridError(f"multiplier table {table.shape} does not match grid {f.grid.shape}")
    return _same_rep(f, f.coefficients * table)


def apply_symbol_array(grid: Grid, a: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Multiplier on raw physical samples; returns physical samples."""
    return grid.ifft(grid.fft(a) * table)


def gradient(grid: Grid, a: np.ndarray) -> list[np.ndarray]:
    """Spectral gradient; the Nyquist mode is dropped so real input stays real."""
    fa = grid.fft(a)
    odd = np.where(np.abs(grid.xi1d) >= grid.nyquist * (1 - 1e-12), 0.0, grid.xi1d)
    return [grid.ifft(1j * grid.axis_view(odd, j) * fa) for j in range(grid.d)]


# -- Littlewood-Paley ----------------------------------------------------------


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def bump(r: np.ndarray) -> np.ndarray:
    """Radial cutoff: 1 on ``r <= 1``, 0 on ``r >= 2``, smooth in between."""
    return 1.0 - _smooth_step(np.asarray(r, dtype=float) - 1.0)


def is_dyadic(N: float) -> bool:
    if not (N > 0 and math.isfinite(N)):
        return False
    mant, _ = math.frexp(N)
    return mant == 0.5


def lp_symbol(grid: Grid, band: str, N: float, sharp: bool = False) -> np.ndarray:
    """Littlewood-Paley multiplier table.

    ``band`` is one of ``"<=", ">", "=", ">=", "<"``; ``P_{<N}`` is
    ``P_{<=N/2}`` and ``P_{>=N}`` its complement, so the pair splits the
    identity exactly.
    """
    if not is_dyadic(N):
        raise ValueError(f"N must be a dyadic number 2^k, got {N}")
    r = grid.abs_xi
    low = (lambda M: (r <= M).astype(float)) if sharp else (lambda M: bump(r / M))
    if band == "<=":
        return low(N)
    if band == ">":
        return 1.0 - low(N)
    if band == "<":
        return low(N / 2)
    if band == ">=":
        return 1.0 - low(N / 2)
    if band == "=":
        return low(N) - low(N / 2)
    raise ValueError(f"unknown band {band!r}")


def lp_project(f: Field, band: str, N: float, sharp: bool = False) -> Field:
    return _same_rep(f, f.coefficients * lp_symbol(f.grid, band, N, sharp))


# -- evolution, norms, scaling ---------------------------------------------------


def free_symbol(grid: Grid, t: float) -> np.ndarray:
    return np.exp(-1j * grid.xi2 * t)


def free_propagate(f: Field, t: float) -> Field:
    """Apply ``exp(i t Laplacian)``."""
    if t == 0:
        return f
    return _same_rep(f, f.coefficients * free_symbol(f.grid, t))


def lp_norm(grid: Grid, a: np.ndarray, p: float) -> float:
    if p < 1:
        raise ValueError(f"L^p norm needs p >= 1, got {p}")
    mod = np.abs(a)
    if math.isinf(p):
        return float(mod.max()) if mod.size else 0.0
    return float((np.sum(mod**p) * grid.cell_volume) ** (1.0 / p))


def sobolev_norm(grid: Grid, coeffs: np.ndarray, s: float, homogeneous: bool) -> float:
    if homogeneous:
        w = np.zeros(grid.shape)
        nz = grid.xi2 > 0
        w[nz] = grid.xi2[nz] ** s
    else:
        w = (1 + grid.xi2) ** s
    return float(np.sqrt(np.sum(w * np.abs(coeffs) ** 2) * grid.dxi**grid.d))


def norm(f: Field, kind: str, param: float = 2.0) -> float:
    """``kind`` is ``"Lp"`` (param p), ``"Hs"`` or ``"Hs_dot"`` (param s)."""
    if kind == "Lp":
        return lp_norm(f.grid, f.values, param)
    if kind == "Hs":
        return sobolev_norm(f.grid, f.coefficients, param, homogeneous=False)
    if kind == "Hs_dot":
        return sobolev_norm(f.grid, f.coefficients, param, homogeneous=True)
    raise ValueError(f"unknown norm kind {kind!r}")


def resample(f: Field, n_new: int) -> Field:
    """Trigonometric interpolation onto ``n_new`` points per axis (same box)."""
    g = f.grid
    target = make_grid(g.d, n_new, g.L)
    if n_new == g.n:
        return Field(target, f.values.copy())
    c = sfft.fftshift(g.fft(f.values), axes=range(g.d)) / g.size
    out = np.zeros(target.shape, dtype=complex)
    lo, hi = min(g.n, n_new), max(g.n, n_new)
    start = (hi - lo) // 2
    sl = tuple(slice(start, start + lo) for _ in range(g.d))
    if n_new > g.n:
        out[sl] = c
    else:
        out = c[sl]
    vals = sfft.ifftn(sfft.ifftshift(out, axes=range(g.d)), axes=range(g.d)) * target.size
    return Field(target, vals)


def scale_field(f: Field, lam: float, target_grid: Grid) -> Field:
    """``lam^((d-2)/2) f(lam x)`` sampled on ``target_grid`` (box side ``L/lam``)."""
    g = f.grid
    if lam <= 0:
        raise ValueError("scaling factor must be positive")
    if target_grid.d != g.d or not math.isclose(target_grid.L, g.L / lam, rel_tol=1e-12):
        raise GridError("target grid must have the same dimension and side L/lambda")
    vals = resample(f, target_grid.n).values
    return Field(target_grid, lam ** ((g.d - 2) / 2) * vals)
