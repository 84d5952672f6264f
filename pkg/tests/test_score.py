import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import NULL_PARAMS, sim_stream
from hawkes_score.errors import ConvergenceError, DomainError, InsufficientDataError, SingularInformationError
from hawkes_score.likelihood import FitOptions, fit_qmle, intensity_recursion
from hawkes_score.marks import estimate_mu_H
from hawkes_score.model import BoostSpec, EventStream, HawkesParams, center_marks
from hawkes_score.score import (info_matrix, run_score_test, score_and_info, score_statistic, score_test_from_fit,
                                score_vector, u_integral, u_process)
from hawkes_score.stats import chi2_sf


def _G(s, boost="linear"):
    spec = BoostSpec.parse(boost, mark_dim=s.mark_dim)
    return center_marks(s, spec, estimate_mu_H(s, spec))


def test_zero_features_give_zero_everything(small_stream):
    G = np.zeros((small_stream.n_events, 1))
    assert not np.any(u_process(small_stream, NULL_PARAMS, G))
    assert not np.any(score_vector(small_stream, NULL_PARAMS, G))
    assert not np.any(info_matrix(small_stream, NULL_PARAMS, G))


def test_zero_branching_gives_zero_score(small_stream):
    p = HawkesParams(0.5, 0.0, 1.0)
    G = _G(small_stream)
    assert not np.any(u_process(small_stream, p, G))
    assert not np.any(score_vector(small_stream, p, G))


def test_two_event_u():
    s = EventStream(3.0, [0.4, 1.9], [[0.7], [-0.2]])
    G = np.array([[0.7], [-0.2]])
    p = HawkesParams(1.0, 0.3, 2.0)
    U = u_process(s, p, G)
    assert U[0, 0] == 0.0
    assert U[1, 0] == pytest.approx(0.3 * 2.0 * math.exp(-2.0 * 1.5) * 0.7, rel=1e-15)


@given(st.integers(0, 10_000), st.floats(0.05, 0.9), st.floats(0.2, 4.0),
       st.sampled_from(["linear", "poly:3"]))
def test_u_and_info_match_brute_force(seed, theta, alpha, boost):
    s = sim_stream(horizon=50.0, seed=seed)
    if s.n_events < 2 or s.n_events > 200:
        return
    p = HawkesParams(0.6, theta, alpha)
    G = _G(s, boost)
    U = oracles.brute_U(s.times, G, theta, alpha)
    np.testing.assert_allclose(u_process(s, p, G), U, rtol=1e-12, atol=1e-14 * np.abs(U).max())
    lam = oracles.brute_lambda(s.times, p.eta, theta, alpha)
    info_ref = (U / lam[:, None] ** 2).T @ U
    np.testing.assert_allclose(info_matrix(s, p, G), info_ref, rtol=1e-11)


@pytest.mark.parametrize("seed", range(5))
def test_u_integral_matches_quadrature(seed):
    s = sim_stream(horizon=60.0, seed=seed, dim=2, boost="linear")
    p = HawkesParams(0.5, 0.45, 1.3)
    G = _G(s)
    ref = oracles.quad_u_integral(s.times, s.horizon, G, p.theta_branch, p.alpha)
    np.testing.assert_allclose(u_integral(s, p, G), ref, atol=1e-8)
    lam, _ = intensity_recursion(s, p)
    U = u_process(s, p, G)
    np.testing.assert_allclose(score_vector(s, p, G), (U / lam[:, None]).sum(axis=0) - ref, atol=1e-8)


def test_info_single_contribution():
    # only the second event carries a nonzero U
    s = EventStream(2.0, [0.5, 1.5], [[1.0], [0.0]])
    p = HawkesParams(1.0, 0.5, 1.0)
    G = np.array([[1.0], [0.0]])
    u = 0.5 * math.exp(-1.0)
    v = 1.0 + 0.5 * math.exp(-1.0)
    np.testing.assert_allclose(info_matrix(s, p, G), [[u * u / (v * v)]], rtol=1e-14)


def test_info_symmetric_psd():
    s = sim_stream(horizon=300.0, seed=3, dim=3)
    info = info_matrix(s, NULL_PARAMS, _G(s))
    assert np.array_equal(info, info.T)
    assert np.linalg.eigvalsh(info)[0] >= -1e-12 * np.trace(info)


def test_statistic_examples():
    q, p = score_statistic([0.0], [[3.0]])
    assert (q, p) == (0.0, 1.0)
    q, _ = score_statistic([2.0], [[4.0]])
    assert q == pytest.approx(1.0, rel=1e-15)
    _, p = score_statistic([math.sqrt(3.8415)], [[1.0]])
    assert p == pytest.approx(0.05, abs=1e-4)


# squares of entries below ~1e-150 underflow, so "zero iff zero" holds only above that
_entries = st.floats(-10, 10).filter(lambda v: v == 0.0 or abs(v) > 1e-100)


@given(st.lists(_entries, min_size=3, max_size=3), st.integers(0, 1000))
def test_statistic_nonnegative_and_zero_only_at_zero(score, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((3, 3))
    info = a @ a.T + 0.5 * np.eye(3)
    q, p = score_statistic(score, info)
    assert q >= 0.0
    assert (q == 0.0) == (not np.any(score))
    assert p == pytest.approx(chi2_sf(q, 3), rel=1e-14)


def test_singular_information():
    with pytest.raises(SingularInformationError):
        score_statistic([1.0, 1.0], [[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(SingularInformationError):
        score_statistic([0.0], [[0.0]])
    with pytest.raises(DomainError):
        score_statistic([1.0, 2.0], [[1.0]])


def test_constant_marks_are_singular():
    s = sim_stream(horizon=200.0, seed=4)
    const = s.with_marks(np.full_like(s.marks, 0.3))
    with pytest.raises(SingularInformationError):
        run_score_test(const, BoostSpec("linear"))


def test_dimension_mismatch(small_stream):
    with pytest.raises(DomainError):
        u_process(small_stream, NULL_PARAMS, np.zeros((small_stream.n_events + 1, 1)))


def test_empty_stream():
    with pytest.raises(InsufficientDataError):
        score_and_info(EventStream(1.0, []), NULL_PARAMS, np.zeros((0, 1)))
    with pytest.raises(InsufficientDataError):
        run_score_test(EventStream(1.0, []), BoostSpec("linear"))


def test_non_convergence_propagates():
    s = sim_stream(horizon=500.0, seed=5)
    with pytest.raises(ConvergenceError):
        run_score_test(s, BoostSpec("linear"), FitOptions(max_iter=1, simplex_fallback=False))


def test_pipeline_result_fields():
    s = sim_stream(horizon=1000.0, seed=6)
    res = run_score_test(s, BoostSpec("poly", degree=2))
    assert res.df == 2 and res.score.shape == (2,) and res.info.shape == (2, 2)
    np.testing.assert_allclose(res.omega_hat, res.info / 1000.0)
    assert res.p_value == pytest.approx(chi2_sf(res.statistic, 2))
    d = res.as_dict()
    assert d["fit"]["converged"] and len(d["mu_H"]) == 2


def test_shared_fit_matches_pipeline():
    s = sim_stream(horizon=800.0, seed=7)
    fit = fit_qmle(s)
    a = score_test_from_fit(s, BoostSpec("linear"), fit)
    b = run_score_test(s, BoostSpec("linear"))
    assert a.statistic == b.statistic


@given(st.floats(0.01, 100.0).flatmap(lambda c: st.sampled_from([c, -c])), st.integers(0, 50))
def test_linear_rescaling_invariance(c, seed):
    s = sim_stream(horizon=300.0, seed=seed)
    fit = fit_qmle(s)
    if not fit.converged:
        return
    a = score_test_from_fit(s, BoostSpec("linear"), fit).statistic
    b = score_test_from_fit(s.with_marks(c * s.marks), BoostSpec("linear"), fit).statistic
    assert abs(a - b) <= 1e-8 * max(a, 1e-12)


def test_null_p_values_roughly_uniform():
    p = []
    for k in range(200):
        s = sim_stream(horizon=400.0, seed=1000 + k)
        p.append(run_score_test(s, BoostSpec("linear")).p_value)
    p = np.sort(p)
    d = np.max(np.abs(p - (np.arange(1, 201) - 0.5) / 200))
    assert d < 1.63 / math.sqrt(200)


def test_alternative_rejects_more_often():
    rejections = 0
    for k in range(100):
        s = sim_stream(horizon=1000.0, seed=3000 + k, boost="exp", psi=(12.0 / math.sqrt(1000.0),))
        rejections += run_score_test(s, BoostSpec("linear")).p_value < 0.05
    assert rejections / 100 > 0.3


def test_score_martingale_at_truth():
    T = 1000.0
    scores, infos = [], []
    for k in range(300):
        s = sim_stream(horizon=T, seed=5000 + k, burn_in=0.0)
        G = _G(s)
        sc, inf = score_and_info(s, NULL_PARAMS, G)
        scores.append(sc[0] / math.sqrt(T))
        infos.append(inf[0, 0] / T)
    scores = np.array(scores)
    assert abs(scores.mean()) < 4 * scores.std() / math.sqrt(300)
    assert abs(scores.var() / np.mean(infos) - 1.0) < 0.25
