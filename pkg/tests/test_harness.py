import csv
import io
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from rtemvdr import harness
from rtemvdr.errors import DegenerateRho, InvalidRegime, InvalidRho, TrialError
from rtemvdr.harness import ExperimentConfig, config_with
from rtemvdr.scenario import reference_scenario


def small_cfg(**kw):
    base = dict(scenario=reference_scenario(), rho_list=(0.5,), n_list=(20, 40), n_trials=200,
                seed=4, n_cal=300, n_reps=160, nn_trials=400)
    base.update(kw)
    return ExperimentConfig(**base)


def svg_gids(path):
    return {el.get("id") for el in ET.parse(path).iter() if el.get("id")}


def test_config_guards():
    with pytest.raises(InvalidRho):
        small_cfg(rho_list=(0.5,), n_list=(1,))  # needs rho > 1 - 1/4
    with pytest.raises(ValueError):
        small_cfg(n_trials=99)
    with pytest.raises(ValueError):
        small_cfg(regime="tiny")
    assert small_cfg(regime="large_nn").regimes == ("large_nn",)


def test_clt_deterministic_and_affine():
    cfg = small_cfg()
    a = harness.run_clt(cfg, 0.5, 40)
    b = harness.run_clt(cfg, 0.5, 40)
    for regime in ("large_n", "large_nn"):
        np.testing.assert_array_equal(a[regime].values, b[regime].values)
        assert len(a[regime]) == cfg.n_trials
        assert np.all(np.isfinite(a[regime].values))
    ln, lnn = a["large_n"], a["large_nn"]
    np.testing.assert_array_equal(ln.snr, lnn.snr)
    rebuilt = (ln.scale * ln.values + np.sqrt(40) * (ln.center - lnn.center)) / lnn.scale
    np.testing.assert_allclose(lnn.values, rebuilt, rtol=1e-12, atol=1e-12)


def test_single_regime_wrappers_share_draws():
    cfg = small_cfg()
    both = harness.run_clt(cfg, 0.5, 20)
    np.testing.assert_array_equal(harness.run_clt_large_n(cfg, 0.5, 20).values,
                                  both["large_n"].values)
    np.testing.assert_array_equal(harness.run_clt_large_nn(cfg, 0.5, 20).values,
                                  both["large_nn"].values)


def test_trial_substreams_prefix_stable():
    s = reference_scenario()
    long = harness.raw_snr_samples(s, 0.5, 20, 250, seed=9)
    short = harness.raw_snr_samples(s, 0.5, 20, 120, seed=9)
    np.testing.assert_array_equal(long[:120], short)


def test_worker_count_does_not_change_samples():
    s = reference_scenario()
    one = harness.raw_snr_samples(s, 0.5, 20, 300, seed=2, workers=1)
    two = harness.raw_snr_samples(s, 0.5, 20, 300, seed=2, workers=2)
    np.testing.assert_array_equal(one, two)


def test_rho_one_rejected():
    cfg = small_cfg(rho_list=(1.0,))
    with pytest.raises(DegenerateRho):
        harness.run_clt_large_n(cfg, 1.0, 20)
    with pytest.raises(InvalidRegime):
        harness.run_clt_large_nn(cfg, 1.0, 20)


def test_trial_errors_carry_index():
    with pytest.raises(TrialError) as info:
        harness.raw_snr_samples(reference_scenario(), 0.5, 20, 100, seed=0, max_iter=1)
    assert info.value.trial == 0


def test_large_nn_totality():
    cfg = small_cfg(rho_list=(0.65,), n_list=(20, 100))
    for n in (20, 100):
        ss = harness.run_clt_large_nn(cfg, 0.65, n)
        assert len(ss) == cfg.n_trials and np.all(np.isfinite(ss.values))


@pytest.fixture(scope="module")
def large_n_at_n100():
    cfg = ExperimentConfig(rho_list=(0.65,), n_list=(100,), n_trials=5000, seed=1)
    return harness.run_clt_large_n(cfg, 0.65, 100).values


@pytest.mark.slow
def test_large_n_clt_spread_at_n100(large_n_at_n100):
    assert 0.85 <= large_n_at_n100.std(ddof=1) <= 1.15


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="finite-n bias: mean of Q_n is about -0.2 at n=100, "
                   "shrinking to about -0.03 at n=2000; SNR0 checked to 1e-4 at n=10000")
def test_large_n_clt_mean_at_n100(large_n_at_n100):
    assert -0.1 <= large_n_at_n100.mean() <= 0.1


@pytest.mark.slow
def test_large_nn_clt_balanced_regime():
    cfg = ExperimentConfig(scenario=reference_scenario(32), rho_list=(0.5,), n_list=(64,), n_trials=3000,
                           seed=1, regime="large_nn")
    v = harness.run_clt_large_nn(cfg, 0.5, 64).values
    assert 0.8 <= v.std(ddof=1) <= 1.2


def test_sweep_rows_and_csv(tmp_path):
    cfg = small_cfg(n_list=(20, 40, 60, 80, 100))
    text = harness.divergence_sweep(cfg, tmp_path / "out" / "sweep.csv")
    assert (tmp_path / "out" / "sweep.csv").read_text() == text
    lines = text.splitlines()
    assert lines[0] == ",".join(harness.CSV_COLUMNS)
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 10
    for r in rows:
        assert r["error"] == ""
        for m in ("ks", "hellinger", "tv", "sym_kl"):
            assert np.isfinite(float(r[m]))
    assert {r["regime"] for r in rows} == {"large_n", "large_nn"}


def test_sweep_records_cell_errors():
    rows = harness.sweep_rows(small_cfg(n_list=(20,), max_iter=1))
    assert len(rows) == 2
    for r in rows:
        assert r["error"].startswith("TrialError")
        assert r["ks"] == ""


# -- figures -------------------------------------------------------------------

def test_render_empty_csv(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text(",".join(harness.CSV_COLUMNS) + "\n")
    with pytest.raises(ValueError):
        harness.emit_figures(p, tmp_path / "fig")
    assert not list((tmp_path / "fig").glob("*")) if (tmp_path / "fig").exists() else True


def test_render_single_row(tmp_path):
    row = dict(regime="large_n", N=4, n=20, rho=0.5, seed=0, n_trials=100, ks=0.1,
               hellinger=0.2, tv=0.1, sym_kl=0.3, error="")
    p = tmp_path / "one.csv"
    p.write_text(harness.rows_to_csv([row]))
    paths = harness.emit_figures(p, tmp_path / "fig")
    assert len(paths) == 1
    gids = svg_gids(paths[0])
    assert "large_n-ks" in gids and "large_nn-ks" not in gids


def test_render_sweep_series_and_determinism(tmp_path):
    text = harness.divergence_sweep(small_cfg(n_list=(20, 60, 100)))
    p = tmp_path / "sweep.csv"
    p.write_text(text)
    [a] = harness.emit_figures(p, tmp_path / "a")
    [b] = harness.emit_figures(p, tmp_path / "b")
    assert a.read_bytes() == b.read_bytes()
    gids = svg_gids(a)
    for regime in ("large_n", "large_nn"):
        for metric in harness.METRICS:
            assert f"{regime}-{metric}" in gids


def test_render_samples_csv(tmp_path):
    sets = harness.run_clt(small_cfg(), 0.5, 20)
    p = tmp_path / "samples.csv"
    p.write_text(harness.samples_to_csv(sets.values()))
    [fig] = harness.emit_figures(p, tmp_path / "fig")
    assert fig.name == "cdf_rho0.5_n20.svg"
    assert {"large_n-ecdf", "large_nn-ecdf"} <= svg_gids(fig)


def test_render_rejects_unknown_columns(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        harness.emit_figures(p, tmp_path)


def test_config_with():
    cfg = small_cfg()
    assert config_with(cfg, seed=11).seed == 11


def test_paired_samples_share_draws():
    s = reference_scenario()
    rte, equiv = harness.paired_snr_samples(s, 0.65, 40, 150, seed=3)
    np.testing.assert_array_equal(rte, harness.raw_snr_samples(s, 0.65, 40, 150, seed=3))
    assert np.all(np.isfinite(equiv)) and equiv.shape == rte.shape
    assert np.corrcoef(rte, equiv)[0, 1] > 0.5
    two = harness.paired_snr_samples(s, 0.65, 40, 150, seed=3, workers=2)
    np.testing.assert_array_equal(two[1], equiv)


def test_paired_samples_reject_rho_one():
    with pytest.raises(InvalidRegime):
        harness.paired_snr_samples(reference_scenario(), 1.0, 20, 10, seed=0)
