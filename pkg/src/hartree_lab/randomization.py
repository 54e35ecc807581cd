"""Narrowed Wiener randomization on the periodic frequency lattice.

The central sup-norm box ``|xi|_inf <= 1`` is one cell. Each dyadic annulus
``N < |xi|_inf <= 2N`` is cut into axis-aligned cubes of side ``N^-a``; once
that side drops below the lattice spacing every lattice frequency is its own
cell. Cell weights are sharp indicators, so the partition of unity and the
orthogonality of the pieces hold exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import split_high_low
from .spectral import Field, Grid, GridError

__all__ = [
    "ParameterError",
    "RandomizationParams",
    "CubeSystem",
    "RandomCoefficients",
    "admissibility_bounds",
    "min_admissible_a",
    "build_cube_system",
    "box_project",
    "sample_coefficients",
    "randomize",
    "split_high_low",
]


class ParameterError(ValueError):
    pass


def admissibility_bounds(s: float) -> dict:
    """The four lower bounds the shrink exponent ``a`` must strictly exceed."""
    return {"4-2s": 4 - 2 * s, "5-4s": 5 - 4 * s, "-s/2": -s / 2, "3": 3.0}


def min_admissible_a(s: float) -> int:
    return math.floor(max(admissibility_bounds(s).values())) + 1


@dataclass(frozen=True)
class RandomizationParams:
    s: float
    a: int
    N_max: float | None = None

    def __post_init__(self):
        if isinstance(self.a, bool) or int(self.a) != self.a or self.a <= 0:
            raise ParameterError(f"a must be a positive integer, got {self.a!r}")
        bounds = admissibility_bounds(self.s)
        name, worst = max(bounds.items(), key=lambda kv: kv[1])
        if not self.a > worst:
            raise ParameterError(
                f"a={self.a} violates a > max{{4-2s, 5-4s, -s/2, 3}} = {worst:g} "
                f"at s={self.s:g} (binding bound: {name})"
            )
        if self.N_max is not None and not (self.N_max >= 1 and math.log2(self.N_max).is_integer()):
            raise ParameterError(f"N_max must be a dyadic number >= 1, got {self.N_max}")


def _lattice_index(grid: Grid) -> np.ndarray:
    """Per-axis integer frequency index, broadcast to the full grid."""
    return np.rint(grid.k1d).astype(np.int64)


def annuli_for(grid: Grid) -> list[int]:
    """Dyadic heights ``N`` whose annuli cover every lattice frequency."""
    top = grid.nyquist
    out = []
    N = 1
    while N < top:
        out.append(N)
        N *= 2
    return out


@dataclass(eq=False)
class CubeSystem:
    grid: Grid
    params: RandomizationParams
    labels: np.ndarray  # cell index for every lattice frequency (FFT layout)
    count: int
    annuli: list = field(default_factory=list)

    def weights(self, j: int) -> np.ndarray:
        """Sharp weight ``psi_j`` on the lattice."""
        self._check_index(j)
        return (self.labels == j).astype(float)

    def cardinality(self, j: int | None = None) -> np.ndarray | int:
        card = np.bincount(self.labels.ravel(), minlength=self.count)
        return card if j is None else int(card[j])

    def annulus_of(self, j: int) -> int:
        """Dyadic height of cell ``j`` (0 for the central cube)."""
        self._check_index(j)
        for info in self.annuli:
            if info["first"] <= j < info["first"] + info["cells"]:
                return info["N"]
        return 0

    def _check_index(self, j: int):
        if not 0 <= j < self.count:
            raise IndexError(f"cell index {j} out of range [0, {self.count})")

    def summary(self) -> dict:
        return {
            "grid": self.grid.describe(),
            "params": {"s": self.params.s, "a": self.params.a, "N_max": self.params.N_max},
            "cube_count": self.count,
            "central_points": int(np.count_nonzero(self.labels == 0)),
            "annuli": [{k: v for k, v in a.items() if k != "first"} for a in self.annuli],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.summary(), **kw)


def build_cube_system(grid: Grid, params: RandomizationParams) -> CubeSystem:
    if not isinstance(params, RandomizationParams):
        raise TypeError("params must be RandomizationParams")
    heights = annuli_for(grid)
    if params.N_max is not None:
        if heights and params.N_max < heights[-1]:
            raise ParameterError(
                f"N_max={params.N_max:g} leaves frequencies up to {grid.nyquist:.3g} uncovered"
            )
        if params.N_max > grid.nyquist:
            raise ParameterError(f"N_max={params.N_max:g} exceeds the lattice Nyquist frequency")
    d, n = grid.d, grid.n
    dxi = grid.dxi
    k1 = _lattice_index(grid)
    kk = [grid.axis_view(k1, ax) for ax in range(d)]
    kabs = np.abs(kk[0])
    for c in kk[1:]:
        kabs = np.maximum(kabs, np.abs(c))
    kabs = np.broadcast_to(kabs, grid.shape)
    # sup-norm in units of the lattice spacing; compare against N / dxi with a guard
    eps = 1e-9
    labels = np.full(grid.shape, -1, dtype=np.int64)
    labels[kabs * dxi <= 1 + eps] = 0
    # lexicographic rank of each lattice point by signed frequency index
    lex = np.zeros(grid.shape, dtype=np.int64)
    for c in kk:
        lex = lex * n + (c + n // 2)
    nxt = 1
    annuli = []
    for N in heights:
        mask = (kabs * dxi > N * (1 + eps)) & (kabs * dxi <= 2 * N * (1 + eps)) & (labels < 0)
        npts = int(mask.sum())
        if npts == 0:
            continue
        side = float(N) ** (-params.a)
        if side < dxi * (1 - eps):
            order = np.argsort(lex[mask], kind="stable")
            ids = np.empty(npts, dtype=np.int64)
            ids[order] = np.arange(npts)
            cells = npts
            used = dxi
        else:
            pts = np.stack([np.broadcast_to(c, grid.shape)[mask] for c in kk], axis=1)
            cube = np.floor(pts * dxi / side + eps).astype(np.int64)
            _, ids = np.unique(cube, axis=0, return_inverse=True)
            ids = ids.ravel()
            cells = int(ids.max()) + 1
            used = side
        labels[mask] = nxt + ids
        annuli.append({"N": N, "first": nxt, "cells": cells, "points": npts,
                       "side": side, "side_used": used})
        nxt += cells
    if np.any(labels < 0):
        raise GridError("cube construction left lattice frequencies uncovered")
    return CubeSystem(grid, params, labels, nxt, annuli)


def box_project(f: Field, j: int, cs: CubeSystem) -> Field:
    """``F^-1(psi_j F f)``, returned in the input's representation."""
    if f.grid != cs.grid:
        raise GridError("field and cube system live on different grids")
    c = f.coefficients * cs.weights(j)
    out = Field(f.grid, c, "frequency")
    return out if f.rep == "frequency" else out.to_physical()


@dataclass(frozen=True, eq=False)
class RandomCoefficients:
    seed: int
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)


def sample_coefficients(seed: int, count: int) -> RandomCoefficients:
    """Complex Gaussians with independent N(0, 1/2) parts, so ``E|g|^2 = 1``.

    Draw ``j`` depends only on ``(seed, j)``: a longer request extends a
    shorter one without changing its prefix.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(int(seed) % 2**64)
    z = rng.standard_normal((count, 2)) / math.sqrt(2.0)
    return RandomCoefficients(int(seed), z[:, 0] + 1j * z[:, 1])


def randomize(f: Field, cs: CubeSystem, coeffs: RandomCoefficients | np.ndarray) -> Field:
    """``sum_j g_j box_j f``, in the input's representation."""
    if f.grid != cs.grid:
        raise GridError("field and cube system live on different grids")
    g = coeffs.values if isinstance(coeffs, RandomCoefficients) else np.asarray(coeffs)
    if len(g) < cs.count:
        raise ValueError(f"need {cs.count} coefficients, got {len(g)}")
    out = Field(f.grid, f.coefficients * g[cs.labels], "frequency")
    return out if f.rep == "frequency" else out.to_physical()
