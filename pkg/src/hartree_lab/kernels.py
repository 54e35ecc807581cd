"""Minimal-image sampling of singular convolution kernels.

Kernels are tabulated in FFT offset layout (index 0 is displacement 0) and
turned into discrete convolution multipliers ``fft(K) * dx^d``, so that
``ifft(mult * fft(a))`` equals the periodic sum ``sum_y K(x - y) a(y) dx^d``.

Conventions shared by every kernel here:

* the origin sample of an even singular kernel is chosen so that the
  punctured lattice sum is a consistent quadrature of the locally integrable
  singularity: for ``|x|^-gamma`` this is ``-Z_d(gamma) dx^-gamma`` with
  ``Z_d`` the Epstein zeta function of the cubic lattice (the ``"zeta"``
  rule, default). The cruder half-cell ball mean is kept as ``"ball"``; its
  quadrature error does not shrink under refinement;
* odd factors ``x_k`` vanish on the Nyquist plane ``x_k = -L/2``, where the
  minimal image is ambiguous; this keeps even kernels exactly even and odd
  kernels exactly odd on the torus.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .spectral import Grid


def ball_average_power(d: int, gamma: float, h: float) -> float:
    """Mean of ``|x|^-gamma`` over the ball of radius ``h`` in ``R^d``."""
    if not gamma < d:
        raise ValueError(f"|x|^-{gamma} is not locally integrable in d={d}")
    return d / (d - gamma) * h ** (-gamma)


def odd_offsets(grid: Grid) -> list[np.ndarray]:
    out = []
    for c in grid.offsets():
        c = c.copy()
        c[c == -grid.L / 2] = 0.0
        out.append(c)
    return out


ORIGIN_RULES = ("zeta", "ball")


def _theta(t: float) -> float:
    m = np.arange(1, 40)
    return 1.0 + 2.0 * float(np.exp(-np.pi * m**2 * t).sum())


@lru_cache(maxsize=64)
def epstein_zeta(d: int, s: float) -> float:
    """``sum_{k in Z^d, k != 0} |k|^-s`` continued analytically in ``s``.

    Uses the theta-function representation, valid for all ``s`` except the
    poles ``s = 0`` (where the value is -1) and ``s = d``.
    """
    if s == 0:
        return -1.0
    if s == d:
        raise ValueError("Epstein zeta has a pole at s = d")

    def integrand(t):
        return (t ** (s / 2 - 1) + t ** ((d - s) / 2 - 1)) * (_theta(t) ** d - 1.0)

    tail, _ = quad(integrand, 1.0, np.inf, limit=200)
    return math.pi ** (s / 2) / math.gamma(s / 2) * (-2.0 / s - 2.0 / (d - s) + tail)


def origin_power(d: int, gamma: float, dx: float, rule: str = "zeta") -> float:
    if rule == "zeta":
        return -epstein_zeta(d, gamma) * dx ** (-gamma)
    if rule == "ball":
        return ball_average_power(d, gamma, dx / 2)
    raise ValueError(f"unknown origin rule {rule!r}; expected one of {ORIGIN_RULES}")


def sampled_power(grid: Grid, gamma: float, rule: str = "zeta") -> np.ndarray:
    """``|x|^-gamma`` at minimal-image offsets with a finite origin sample."""
    if not gamma < grid.d:
        raise ValueError(f"|x|^-{gamma} is not locally integrable in d={grid.d}")
    r = grid.offset_radius
    with np.errstate(divide="ignore"):
        K = r ** (-gamma)
    K[(0,) * grid.d] = origin_power(grid.d, gamma, grid.dx, rule)
    return K


def sampled_unit_vector(grid: Grid, k: int) -> np.ndarray:
    """``x_k / |x|`` with value 0 at the origin."""
    r = grid.offset_radius
    s = odd_offsets(grid)[k]
    with np.errstate(divide="ignore", invalid="ignore"):
        K = np.where(r > 0, s / np.where(r > 0, r, 1.0), 0.0)
    return np.broadcast_to(K, grid.shape).copy()


def sampled_hessian_abs(grid: Grid, j: int, k: int, rule: str = "zeta") -> np.ndarray:
    """Hessian of ``|x|``: ``delta_jk / |x| - x_j x_k / |x|^3``.

    Off-diagonal origin samples vanish by symmetry. On the diagonal the
    lattice average of ``x_j^2 / |x|^3`` is ``1/d`` of ``1/|x|``, so the
    origin carries ``(1 - 1/d)`` times the ``1/|x|`` origin value.
    """
    r = grid.offset_radius
    # x_j x_k is odd in each factor off the diagonal; x_j^2 is even
    s = odd_offsets(grid) if j != k else grid.offsets()
    safe = np.where(r > 0, r, 1.0)
    K = -s[j] * s[k] / safe**3
    if j == k:
        K = K + 1.0 / safe
    K = np.broadcast_to(K, grid.shape).copy()
    if j != k:
        K[(0,) * grid.d] = 0.0
    elif rule == "ball":
        K[(0,) * grid.d] = 2.0 / grid.dx
    else:
        K[(0,) * grid.d] = (1 - 1 / grid.d) * origin_power(grid.d, 1.0, grid.dx, rule)
    return K


def conv_multiplier(grid: Grid, K: np.ndarray) -> np.ndarray:
    m = grid.fft(K) * grid.cell_volume
    if np.allclose(m.imag, 0.0, atol=1e-13 * max(np.abs(m).max(), 1e-300)):
        return m.real.copy()
    return m


def convolve(grid: Grid, mult: np.ndarray, a: np.ndarray) -> np.ndarray:
    out = grid.ifft(mult * grid.fft(a))
    if np.isrealobj(a) and np.isrealobj(mult):
        return out.real
    return out


def continuum_power_constant(d: int, gamma: float) -> float:
    """``c`` in ``F[|x|^-gamma](xi) = c |xi|^(gamma - d)`` (transform without 2pi factors)."""
    return math.pi ** (d / 2) * 2 ** (d - gamma) * math.gamma((d - gamma) / 2) / math.gamma(gamma / 2)


class KernelBank:
    """Convolution multipliers of the weight ``m(x) = |x|`` and its derivatives."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self._cache: dict = {}

    def _get(self, key, build):
        if key not in self._cache:
            self._cache[key] = conv_multiplier(self.grid, build())
        return self._cache[key]

    def grad(self, k: int) -> np.ndarray:
        return self._get(("grad", k), lambda: sampled_unit_vector(self.grid, k))

    def hessian(self, j: int, k: int) -> np.ndarray:
        j, k = min(j, k), max(j, k)
        return self._get(("hess", j, k), lambda: sampled_hessian_abs(self.grid, j, k))

    def laplacian(self) -> np.ndarray:
        d = self.grid.d
        return self._get("lap", lambda: (d - 1) * sampled_power(self.grid, 1.0))

    def bilaplacian_neg(self) -> np.ndarray:
        """``-Laplacian^2 |x| = (d-1)(d-3) / |x|^3``."""
        d = self.grid.d
        return self._get("bilap", lambda: (d - 1) * (d - 3) * sampled_power(self.grid, 3.0))

    def power(self, gamma: float) -> np.ndarray:
        return self._get(("pow", float(gamma)), lambda: sampled_power(self.grid, gamma))


@lru_cache(maxsize=8)
def bank_for(grid: Grid) -> KernelBank:
    return KernelBank(grid)
