import csv
import io
import json
import math

import numpy as np
import pytest

from hartree_lab import inequalities as ineq
from hartree_lab.inequalities import EnsembleSpec, hls_target_exponent, make_ensemble, run_check
from hartree_lab.spectral import lp_norm, lp_symbol, norm


def test_ensemble_basics():
    assert make_ensemble(EnsembleSpec(2, 16, 8.0, count=0)) == []
    a = make_ensemble(EnsembleSpec(2, 16, 8.0, count=5, seed=3))
    b = make_ensemble(EnsembleSpec(2, 16, 8.0, count=5, seed=3))
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))
    assert all(math.isclose(norm(x, "Lp"), 1.0, rel_tol=1e-12) for x in a)
    c = make_ensemble(EnsembleSpec(2, 16, 8.0, count=5, seed=4))
    assert not np.array_equal(a[0].values, c[0].values)
    with pytest.raises(ValueError):
        EnsembleSpec(2, 16, 8.0, field_class="white-noise")


def test_band_limited_fields_have_no_high_frequencies():
    spec = EnsembleSpec(2, 16, 8.0, count=10, band=2.0)
    for f in make_ensemble(spec):
        assert np.abs(f.coefficients[f.grid.abs_xi > 2.0]).max() < 1e-13 * np.abs(f.coefficients).max()


@pytest.mark.parametrize("cls", ["localized", "randomized"])
def test_other_classes(cls):
    fields = make_ensemble(EnsembleSpec(2, 16, 10.0, cls, count=4))
    assert len(fields) == 4 and all(np.all(np.isfinite(f.values)) for f in fields)


def test_orthogonality_exact():
    rep = run_check("orthogonality", EnsembleSpec(3, 12, 8.0, count=20))
    assert rep.passed
    assert max(abs(r - 1) for r in rep.ratios) < 1e-10


def test_bernstein_bounds():
    rep = run_check("bernstein", EnsembleSpec(2, 32, 10.0, count=30))
    assert rep.passed, rep.to_dict()
    lo, hi = 0.5, 4.0
    assert all(lo <= r <= hi for r in rep.ratios)


def test_hardy_requires_exponent_window():
    with pytest.raises(ValueError, match=r"0<s<\\frac\{d\}\{2\}"):
        run_check("hardy", EnsembleSpec(5, 8, 8.0, count=1), s=2.5)
    with pytest.raises(ValueError):
        run_check("hardy", EnsembleSpec(3, 8, 8.0, count=1), s=0.0)


def test_hls_exponents():
    assert math.isclose(hls_target_exponent(5, 4.0, 2.0), 10 / 3)
    with pytest.raises(ValueError):
        hls_target_exponent(5, 5.0, 2.0)
    with pytest.raises(ValueError):
        hls_target_exponent(3, 0.5, 2.0)  # 1/q would be negative
    with pytest.raises(ValueError, match="pairing"):
        run_check("hls", EnsembleSpec(3, 8, 8.0, count=1), p=2.0, q=3.0)


def test_gn_preconditions():
    with pytest.raises(ValueError):
        run_check("gagliardo_nirenberg", EnsembleSpec(3, 8, 8.0, count=1), s1=1.0, s2=0.5)


def test_lieb_loss_needs_d4():
    with pytest.raises(ValueError):
        run_check("lieb_loss", EnsembleSpec(3, 8, 8.0, count=1))


def test_unknown_check():
    with pytest.raises(KeyError):
        run_check("young", EnsembleSpec(1, 8, 8.0, count=1))


@pytest.mark.parametrize("name,d,cls", [
    ("hardy", 3, "localized"),
    ("hls", 3, "band-limited"),
    ("gagliardo_nirenberg", 3, "band-limited"),
    ("visan", 3, "band-limited"),
    ("box_lq_lp", 1, "band-limited"),
    ("box_lq_lp", 2, "randomized"),
    ("bernstein", 1, "band-limited"),
])
def test_resolution_stable_low_dimension(name, d, cls):
    rep = run_check(name, EnsembleSpec(d, 16, 10.0, cls, count=30))
    assert rep.passed, rep.to_dict()
    assert np.all(np.isfinite(rep.ratios))
    assert rep.stability["factor"] < 1.2


def test_hls_d5_paper_point():
    # d = 5, p = 2, gamma = 4 gives q = 10/3
    rep = run_check("hls", EnsembleSpec(5, 8, 10.0, count=10))
    assert rep.extra["q"] == pytest.approx(10 / 3)
    assert rep.passed, rep.stability


def test_box_literal_ratio_recorded():
    rep = run_check("box_lq_lp", EnsembleSpec(1, 32, 10.0, count=10))
    lit = rep.extra["literal_by_annulus"]
    assert "0" in lit and all(np.isfinite(v) for v in lit.values())


def test_visan_ratio_by_hand():
    spec = EnsembleSpec(5, 8, 10.0, count=1)
    f = make_ensemble(spec)[0]
    g = f.grid
    nz = g.abs_xi > 0
    m = np.zeros(g.shape)
    m[nz] = g.abs_xi[nz] ** -0.5
    num = lp_norm(g, g.ifft(g.fft(f.values) * m), 4.0) ** 2
    rho_hat = g.fft(np.abs(f.values) ** 2)
    m1 = np.zeros(g.shape)
    m1[nz] = 1 / g.abs_xi[nz]
    den = lp_norm(g, g.ifft(rho_hat * m1), 2.0)
    assert ineq._visan(f) == pytest.approx(num / den, rel=1e-10)


def test_reports_serialize():
    reps = [run_check("orthogonality", EnsembleSpec(1, 16, 8.0, count=3)),
            run_check("hardy", EnsembleSpec(3, 8, 8.0, "localized", count=3))]
    rows = list(csv.DictReader(io.StringIO(ineq.reports_to_csv(reps))))
    assert [r["check"] for r in rows] == ["orthogonality", "hardy"]
    assert list(rows[0]) == ineq.CSV_COLUMNS
    assert json.loads(reps[1].to_json())["extra"]["s"] == 1.0
