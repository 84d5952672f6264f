import json
from dataclasses import replace

import numpy as np
import pytest

import hawkes_score.harness as harness
from conftest import NULL_PARAMS
from hawkes_score.errors import ConfigurationError
from hawkes_score.harness import (McConfig, estimate_omega, gamma_for_ncp, run_local_power, run_null_calibration,
                                  run_replicates)
from hawkes_score.model import BoostSpec
from hawkes_score.simulation import SimConfig


def _cfg(T=300.0, R=20, **kw):
    return McConfig(sim=SimConfig(NULL_PARAMS, T), replicates=R, master_seed=kw.pop("seed", 99), **kw)


def test_single_replicate():
    rep = run_null_calibration(_cfg(R=1))
    assert len(rep.records) == 1
    assert all(rep.rejection_rates[a] in (0.0, 1.0) for a in rep.levels)


def test_deterministic_and_thread_independent():
    a = json.dumps(run_null_calibration(_cfg(R=30)).as_dict())
    b = json.dumps(run_null_calibration(_cfg(R=30)).as_dict())
    c = json.dumps(run_null_calibration(_cfg(R=30, workers=4)).as_dict())
    assert a == b == c


def test_records_do_not_depend_on_replicate_count():
    short = run_null_calibration(_cfg(R=5)).records
    long = run_null_calibration(_cfg(R=12)).records
    assert long[:5] == short


def test_zero_gamma_reduces_to_null():
    cfg = _cfg(R=15)
    null = run_null_calibration(cfg)
    power = run_local_power(replace(cfg, gamma=(0.0,)), omega=[[0.1]])
    assert power.records == null.records
    assert power.kind == "null"
    assert power.predicted_power[0.05] == pytest.approx(0.05, abs=1e-12)


def test_power_report_fields():
    cfg = _cfg(T=1000.0, R=40)
    rep = run_local_power(cfg, omega=[[0.09]], target_ncp=4.0)
    assert rep.ncp == pytest.approx(4.0)
    assert rep.psi[0] == pytest.approx(rep.gamma[0] / np.sqrt(1000.0))
    assert rep.predicted_power[0.05] == pytest.approx(0.516, abs=1e-3)
    d = rep.as_dict()
    assert d["empirical_power"] == d["empirical_rate"]
    assert d["omega_reference"] == [[0.09]]


def test_power_needs_gamma_or_ncp():
    with pytest.raises(ConfigurationError):
        run_local_power(_cfg(), omega=[[0.1]])


def test_gamma_for_ncp():
    om = np.array([[2.0, 0.5], [0.5, 1.0]])
    g = np.asarray(gamma_for_ncp(om, 4.0))
    assert g @ om @ g == pytest.approx(4.0)
    assert g[0] == g[1]
    with pytest.raises(ConfigurationError):
        gamma_for_ncp([[0.0]], 1.0)


def test_failures_flag_report_invalid():
    # large psi pushes the linear boost negative for some simulated marks
    cfg = _cfg(T=500.0, R=30, gamma=(9.0,))
    rep = run_local_power(cfg, omega=[[0.09]])
    assert rep.failures["count"] > 0.05 * 30
    assert rep.failures["reasons"].get("boost_domain_error", 0) > 0
    assert not rep.valid
    assert rep.n_valid + rep.failures["count"] == 30


def test_config_validation():
    with pytest.raises(ConfigurationError):
        _cfg(R=0)
    with pytest.raises(ConfigurationError):
        _cfg(nominal_levels=(0.05, 1.0))
    with pytest.raises(ConfigurationError):
        McConfig(sim=SimConfig(NULL_PARAMS, 10.0), gamma=(1.0, 2.0))


def test_omega_concentrates():
    cfg = _cfg(T=500.0, R=200, boost_under_test=BoostSpec("linear"))
    est = estimate_omega(cfg)
    s1, s2 = est.spread[500.0], est.spread[1000.0]
    assert s2 < s1
    assert not est.degenerate
    assert np.array_equal(est.omega, est.omega.T)
    assert np.linalg.eigvalsh(est.omega)[0] >= 0


def test_omega_spread_halves_from_1000_to_4000():
    cfg = _cfg(T=1000.0, R=200)
    est = estimate_omega(cfg, horizons=(1000.0, 4000.0))
    ratio = est.spread[1000.0] / est.spread[4000.0]
    assert 1.5 < ratio < 2.7


def test_omega_psd_for_two_dimensional_features():
    cfg = McConfig(sim=SimConfig(NULL_PARAMS, 400.0, boost=BoostSpec("poly", degree=2), psi=(0.0, 0.0)),
                   replicates=30, boost_under_test=BoostSpec("poly", degree=2))
    est = estimate_omega(cfg)
    assert np.allclose(est.omega, est.omega.T)
    assert np.linalg.eigvalsh(est.omega)[0] >= 0


def test_degenerate_marks_flagged(monkeypatch):
    real = harness.simulate

    def constant_marks(sim):
        s = real(sim)
        return s.with_marks(np.zeros_like(s.marks))

    monkeypatch.setattr(harness, "simulate", constant_marks)
    est = estimate_omega(_cfg(R=10))
    assert est.degenerate
    assert not np.any(est.omega)
    recs = run_replicates(_cfg(R=3), (0.0,))
    assert all(r.error == "singular_information" for r in recs)
