import csv
import io
import json
import struct
import zlib

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hartree_lab import cli
from hartree_lab.experiments import (ConfigError, ExperimentConfig, audit_config, omega_event_count, rayleigh_samples,
                                     report, run_experiment, tail_statistics, worker_count)
from hartree_lab.seeding import MASK64, derive_seed, splitmix64
from hartree_lab.snapshot import HEADER, SnapshotError, decode_field, encode_field, load_field, store_field
from hartree_lab.spectral import Field, make_grid

from conftest import random_field

TINY = dict(d=2, n=16, L=10.0, gamma=1.0, s=0.0, a=6, dt=2e-3, T=0.02, record_every=5, diag_every=2,
            profile_width=1.0)


def tiny(**kw) -> ExperimentConfig:
    return ExperimentConfig(**{**TINY, **kw})


# -- seeding --------------------------------------------------------------------------


def test_splitmix_reference_vector():
    # first outputs of SplitMix64 seeded with 0
    state = 0
    outs = []
    for _ in range(3):
        out, state = splitmix64(state)
        outs.append(out)
    assert outs == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]
    assert derive_seed(0, 0) == 0xE220A8397B1DCDAF


def test_derive_seed_no_collisions():
    rng = np.random.default_rng(7)
    masters = [int(x) for x in rng.integers(0, 2**63, 1000, dtype=np.int64)]
    assert all(derive_seed(m, 0) != derive_seed(m, 1) for m in masters)
    seeds = {derive_seed(12345, i) for i in range(10_000)}
    assert len(seeds) == 10_000
    with pytest.raises(ValueError):
        derive_seed(0, -1)


@given(st.integers(0, MASK64), st.integers(0, 2**40))
def test_derive_seed_is_64_bit_and_deterministic(m, i):
    a = derive_seed(m, i)
    assert a == derive_seed(m, i) and 0 <= a <= MASK64


# -- snapshots ------------------------------------------------------------------------


def test_snapshot_round_trip(tmp_path, rng):
    g = make_grid(3, 8, 5.0)
    f = random_field(g, rng)
    path = tmp_path / "a.hrt5"
    store_field(path, f, 0.25)
    back, t = load_field(path, expect=g)
    assert t == 0.25 and back.grid == g and back.rep == "physical"
    assert back.values.tobytes() == f.values.tobytes()
    fr = f.to_frequency()
    back, _ = decode_field(encode_field(fr))
    assert back.rep == "frequency" and np.array_equal(back.data, fr.data)
    assert not list(tmp_path.glob("*.tmp"))


def test_snapshot_layout(rng):
    g = make_grid(1, 4, 2.0)
    f = random_field(g, rng)
    buf = encode_field(f, 1.5)
    assert buf[:4] == b"HRT5"
    assert struct.unpack_from("<HHIIdd", buf, 4) == (1, 0, 1, 4, 2.0, 1.5)
    payload = buf[HEADER.size:-4]
    assert np.array_equal(np.frombuffer(payload, "<f8")[0::2], f.values.real)
    assert struct.unpack("<I", buf[-4:])[0] == zlib.crc32(payload)


def test_snapshot_rejects_bad_files(rng):
    g = make_grid(2, 4, 3.0)
    buf = bytearray(encode_field(random_field(g, rng)))
    with pytest.raises(SnapshotError, match="magic"):
        decode_field(b"XXXX" + bytes(buf[4:]))
    bad = bytearray(buf)
    struct.pack_into("<H", bad, 4, 255)
    with pytest.raises(SnapshotError, match="version 255"):
        decode_field(bytes(bad))
    with pytest.raises(SnapshotError, match="truncated"):
        decode_field(bytes(buf[:-10]))
    with pytest.raises(SnapshotError, match="truncated"):
        decode_field(bytes(buf[:10]))
    flipped = bytearray(buf)
    flipped[HEADER.size + 3] ^= 0xFF
    with pytest.raises(SnapshotError, match="checksum"):
        decode_field(bytes(flipped))
    with pytest.raises(SnapshotError, match="grid mismatch"):
        decode_field(bytes(buf), expect=make_grid(3, 4, 3.0))


# -- configs --------------------------------------------------------------------------


def test_config_rejects_unknown_and_bad_fields():
    with pytest.raises(ConfigError, match="unknown config keys"):
        ExperimentConfig.from_dict({"kind": "single", "colour": "red"})
    with pytest.raises(ConfigError, match="kind"):
        ExperimentConfig(kind="party")
    with pytest.raises(ConfigError, match="^a:"):
        ExperimentConfig(s=-1.0, a=9)
    with pytest.raises(ConfigError, match="N0"):
        ExperimentConfig(N0=3.0)
    with pytest.raises(ConfigError, match="solver"):
        ExperimentConfig(d=3, gamma=4.0)
    with pytest.raises(ConfigError, match="profile_momentum"):
        tiny(profile_momentum=[1.0])
    with pytest.raises(ConfigError, match="tail_samples"):
        tiny(kind="tail-study", tail_samples=10)


def test_config_json_round_trip(tmp_path):
    cfg = tiny(kind="ensemble", K=2, master_seed=9)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(path) == cfg
    assert audit_config().d == 5 and audit_config(n=8).n == 8


def test_worker_env(monkeypatch):
    monkeypatch.delenv("HARTREE_WORKERS", raising=False)
    assert worker_count() == 1
    monkeypatch.setenv("HARTREE_WORKERS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("HARTREE_WORKERS", "many")
    with pytest.raises(ConfigError):
        worker_count()


# -- statistics ------------------------------------------------------------------------


def test_tail_statistics_rayleigh_oracle():
    rep = tail_statistics(rayleigh_samples(derive_seed(0, 2**32), 500), np.linspace(0.2, 2.0, 10))
    assert rep.slope < 0 and rep.r2 > 0.9
    assert abs(rep.slope + 1) < 0.1


def test_tail_statistics_degenerate():
    rep = tail_statistics(np.ones(200), [0.5, 2.0])
    assert rep.survival == [1.0, 0.0] and rep.used == [False, False]
    assert np.isnan(rep.slope)
    with pytest.raises(ValueError, match="at least"):
        tail_statistics(np.ones(10))


def _stats(scale):
    return {"hs_u0": 1.0, "hs_u0_omega": scale, "y_norm_v": scale, "w0_weighted": scale,
            "l2_u0_omega": scale, "l10_u0_omega": scale}


@given(st.lists(st.floats(0.01, 10.0), min_size=1, max_size=20))
def test_omega_fractions_nested(scales):
    recs = [_stats(s) for s in scales]
    frac = omega_event_count(recs, [0.0, 1.0, 2.0, 4.0, 8.0, 1e9])
    vals = list(frac.values())
    assert vals[0] == 0.0 and vals[-1] == 1.0
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_omega_missing_statistics():
    with pytest.raises(ValueError, match="lacks"):
        omega_event_count([{"hs_u0": 1.0}], [1.0])


# -- running ---------------------------------------------------------------------------


def test_single_run_without_high_part_conserves_energy(tmp_path):
    # N0 above every lattice frequency: v = 0 and E_w is the full energy
    cfg = tiny(kind="single", N0=64.0, randomize=False, amplitude=2.0)
    summ = run_experiment(cfg, tmp_path)
    s = summ["samples"][0]["scalars"]
    assert s["y_norm_v"] == 0.0
    assert s["max_M_w_drift"] < 1e-12
    assert s["max_E_w_drift"] < 1e-6
    rows = list(csv.DictReader((tmp_path / summ["samples"][0]["diagnostics_csv"]).open()))
    assert rows[0]["scattering_increment"] == "" and rows[1]["scattering_increment"] != ""


def test_summary_is_deterministic_across_workers(tmp_path):
    cfg = tiny(kind="ensemble", K=3, save_snapshots=True, master_seed=11)
    run_experiment(cfg, tmp_path / "a", workers=1)
    run_experiment(cfg, tmp_path / "b", workers=2)
    run_experiment(cfg, tmp_path / "c", workers=1)
    a = (tmp_path / "a" / "summary.json").read_bytes()
    assert a == (tmp_path / "b" / "summary.json").read_bytes() == (tmp_path / "c" / "summary.json").read_bytes()
    summ = json.loads(a)
    assert [s["index"] for s in summ["samples"]] == [0, 1, 2]
    assert [s["seed"] for s in summ["samples"]] == [derive_seed(11, i) for i in range(3)]
    snap = summ["samples"][1]["snapshots"][-1]
    f, t = load_field(tmp_path / "a" / snap, expect=cfg.grid)
    assert t == pytest.approx(cfg.T)
    assert (tmp_path / "a" / snap).read_bytes() == (tmp_path / "b" / snap).read_bytes()
    fr = summ["aggregate"]["omega_fractions"]
    vals = [fr[k] for k in sorted(fr, key=float)]
    assert all(b >= a_ for a_, b in zip(vals, vals[1:]))


def test_report_merges_runs(tmp_path):
    run_experiment(tiny(kind="ensemble", K=2), tmp_path / "r1")
    run_experiment(tiny(kind="single", master_seed=5), tmp_path / "r2")
    table, index = report([tmp_path / "r1", tmp_path / "r2"])
    rows = list(csv.DictReader(io.StringIO(table)))
    assert len(rows) == 3 and set(index) == {str(tmp_path / "r1"), str(tmp_path / "r2")}


def test_inequality_suite_kind(tmp_path):
    cfg = tiny(kind="inequality-suite", checks=["orthogonality", "hardy"], check_count=5, check_n=8)
    summ = run_experiment(cfg, tmp_path)
    assert [r["check"] for r in summ["aggregate"]["checks"]] == ["orthogonality", "hardy"]
    assert all(r["pass"] for r in summ["aggregate"]["checks"])
    assert (tmp_path / "checks" / "summary.csv").exists()


# -- CLI -------------------------------------------------------------------------------


def test_cli_run_and_errors(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({**TINY, "kind": "single"}))
    assert cli.main(["run", str(cfg_path), "-o", str(tmp_path / "out"), "-q"]) == 0
    assert (tmp_path / "out" / "summary.json").exists()
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**TINY, "kind": "single", "bogus": 1}))
    assert cli.main(["run", str(bad), "-o", str(tmp_path / "x")]) == 2
    assert "bogus" in capsys.readouterr().err
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({**TINY, "kind": "tail-study"}))
    assert cli.main(["run", str(wrong), "-o", str(tmp_path / "y")]) == 2
    assert cli.main(["sweep-nzero", str(wrong), "-o", str(tmp_path / "z")]) == 2
    assert cli.main(["report", str(tmp_path / "out"), "-o", str(tmp_path / "rep")]) == 0
    assert (tmp_path / "rep" / "report.csv").exists()
