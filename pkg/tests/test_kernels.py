import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from hartree_lab import kernels
from hartree_lab.kernels import (ball_average_power, continuum_power_constant, epstein_zeta, origin_power,
                                 sampled_hessian_abs, sampled_power, sampled_unit_vector)
from hartree_lab.spectral import make_grid


def _brute_zeta(d, s, R):
    r = np.arange(-R, R + 1)
    grids = np.meshgrid(*([r] * d), indexing="ij")
    k2 = sum(g.astype(float) ** 2 for g in grids)
    k2 = k2[(k2 > 0) & (k2 <= R * R)]
    return float(np.sum(k2 ** (-s / 2)))


def test_epstein_known_values():
    assert math.isclose(epstein_zeta(1, 2.0), math.pi**2 / 3, rel_tol=1e-12)
    # Riemann zeta: Z_1(s) = 2 zeta(s); zeta(1/2) = -1.4603545088095868
    assert math.isclose(epstein_zeta(1, 0.5), -2 * 1.4603545088095868, rel_tol=1e-10)
    assert epstein_zeta(3, 0.0) == -1.0
    with pytest.raises(ValueError):
        epstein_zeta(3, 3.0)


def test_epstein_matches_convergent_lattice_sum():
    # s > d: direct sums converge; tail beyond radius R is about the integral of r^{-s}
    R = 400
    brute = _brute_zeta(2, 3.0, R)
    tail = 2 * math.pi / R
    assert math.isclose(epstein_zeta(2, 3.0), brute + tail, rel_tol=1e-4)


def test_epstein_d5_values():
    # the values that set the origin weights of the d=5 kernels
    assert math.isclose(epstein_zeta(5, 1.0), -2.170418471, rel_tol=1e-8)
    assert math.isclose(epstein_zeta(5, 3.0), -8.457419791, rel_tol=1e-8)
    assert math.isclose(epstein_zeta(5, 4.0), -21.421171697, rel_tol=1e-8)


def test_zeta_origin_makes_quadrature_consistent():
    """Punctured sum plus zeta origin weight integrates a smooth bump times |x|^-gamma accurately."""
    d, gamma = 1, 0.5
    exact = 2 * quad(lambda x: x**-gamma * math.exp(-x * x), 0, np.inf)[0]
    errs = {}
    for rule in ("zeta", "ball"):
        errs[rule] = []
        for n in (64, 128, 256):
            g = make_grid(d, n, 16.0)
            K = sampled_power(g, gamma, rule)
            f = np.exp(-g.offsets1d**2)
            errs[rule].append(abs(np.sum(K * f) * g.dx - exact) / exact)
    # zeta weights leave O(dx^{2+d-gamma}); the half-cell ball mean only O(dx^{d-gamma})
    zeta_order = np.log2(np.array(errs["zeta"][:-1]) / errs["zeta"][1:])
    ball_order = np.log2(np.array(errs["ball"][:-1]) / errs["ball"][1:])
    assert np.allclose(zeta_order, 2.5, atol=0.05)
    assert np.allclose(ball_order, 0.5, atol=0.15)
    assert errs["zeta"][-1] < 1e-4


def test_origin_rules():
    assert math.isclose(origin_power(3, 1.0, 0.5, "ball"), ball_average_power(3, 1.0, 0.25))
    with pytest.raises(ValueError, match="origin rule"):
        origin_power(3, 1.0, 0.5, "median")
    with pytest.raises(ValueError, match="integrable"):
        ball_average_power(3, 3.0, 1.0)


def test_unit_vector_is_odd_and_vanishes_at_origin():
    g = make_grid(3, 8, 4.0)
    for k in range(3):
        K = sampled_unit_vector(g, k)
        assert K[0, 0, 0] == 0.0
        flipped = np.roll(np.flip(K, axis=tuple(range(3))), 1, axis=tuple(range(3)))
        assert np.array_equal(flipped, -K)
        m = kernels.conv_multiplier(g, K)
        assert np.abs(np.real(m)).max() < 1e-12 * np.abs(m).max()


@pytest.mark.parametrize("d,n,L,gamma", [(5, 12, 14.0, 4.0), (5, 16, 14.0, 3.0),
                                          (3, 32, 20.0, 2.0), (1, 32, 10.0, 0.5)])
def test_power_multiplier_is_positive(d, n, L, gamma):
    """Positive-definite potentials keep the sampled potential energy nonnegative."""
    g = make_grid(d, n, L)
    m = kernels.conv_multiplier(g, sampled_power(g, gamma))
    assert np.isrealobj(m) and m.min() > 0


def test_hessian_trace_is_laplacian():
    g = make_grid(5, 8, 6.0)
    tr = sum(sampled_hessian_abs(g, j, j) for j in range(5))
    assert np.allclose(tr, 4 * sampled_power(g, 1.0), rtol=1e-13)


def test_weight_values_d5():
    # Laplacian of |x| is (d-1)/|x|, minus bi-Laplacian is (d-1)(d-3)/|x|^3
    g = make_grid(5, 8, 16.0)  # dx = 2, so offset index 1 sits at |x| = 2
    bank = kernels.bank_for(g)
    lap = kernels.convolve(g, bank.laplacian(), _delta(g)).real / g.cell_volume
    bil = kernels.convolve(g, bank.bilaplacian_neg(), _delta(g)).real / g.cell_volume
    idx = (1, 0, 0, 0, 0)
    assert math.isclose(lap[idx], 2.0, rel_tol=1e-12)
    assert math.isclose(bil[idx], 1.0, rel_tol=1e-12)


def _delta(g):
    a = np.zeros(g.shape)
    a[(0,) * g.d] = 1.0
    return a


def test_continuum_constant_against_gaussian_oracle():
    # F[|x|^-gamma * Gaussian] at the origin by radial quadrature
    d, gamma = 5, 4.0
    c = continuum_power_constant(d, gamma)
    assert math.isclose(c, 2 * math.pi**3, rel_tol=1e-12)
    assert math.isclose(continuum_power_constant(5, 3.0), 8 * math.pi**2, rel_tol=1e-12)
    # int |x|^-gamma e^{-|x|^2/2} dx  =  (2 pi)^{-d} int c |xi|^{gamma-d} (2pi)^{d/2} e^{-|xi|^2/2} dxi
    area = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    lhs = area * quad(lambda r: r ** (d - 1 - gamma) * math.exp(-r * r / 2), 0, np.inf)[0]
    rhs = (2 * math.pi) ** (-d / 2) * c * area * quad(lambda r: r ** (gamma - 1) * math.exp(-r * r / 2), 0, np.inf)[0]
    assert math.isclose(lhs, rhs, rel_tol=1e-10)


@given(st.integers(1, 3), st.floats(0.1, 0.9))
def test_sampled_power_symmetric(d, frac):
    g = make_grid(d, 8, 5.0)
    gamma = frac * d
    K = sampled_power(g, gamma)
    flipped = np.roll(np.flip(K, axis=tuple(range(d))), 1, axis=tuple(range(d)))
    assert np.array_equal(flipped, K)
    m = kernels.conv_multiplier(g, K)
    assert np.isrealobj(m)
