import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hawkes_score.errors import DomainError, InsufficientDataError, NoClosedFormError, StateError
from hawkes_score.marks import (MarkModel, analytic_Eh, estimate_mu_H, init_mark_state, monte_carlo_Eh,
                                normalizing_constant, sample_mark, sample_marks)
from hawkes_score.model import BoostSpec, EventStream
from hawkes_score.rng import stream


def test_iid_gaussian_mean():
    x = sample_marks(MarkModel.iid_gaussian(), 1_000_000, stream(1, 0))
    assert abs(x.mean()) < 0.004


def test_ar1_lag_one_autocorrelation():
    x = sample_marks(MarkModel.ar1_gaussian(0.6), 1_000_000, stream(2, 0))[:, 0]
    r1 = np.corrcoef(x[:-1], x[1:])[0, 1]
    assert abs(r1 - 0.6) < 0.01
    assert abs(x.var() - 1.0) < 0.02


def test_ou_zero_gap_repeats_mark():
    model = MarkModel.ou_sampled(1.0)
    rng = stream(3, 0)
    state = init_mark_state(model, rng)
    x, new_state = sample_mark(model, state, 0.0, rng)
    np.testing.assert_array_equal(x, state)
    np.testing.assert_array_equal(new_state, state)


def test_ou_correlation_matches_gap():
    model = MarkModel.ou_sampled(0.8, sd=2.0)
    gaps = np.full(400_000, 0.5)
    x = sample_marks(model, gaps.size, stream(4, 0), gaps=gaps)[:, 0]
    assert abs(np.corrcoef(x[:-1], x[1:])[0, 1] - math.exp(-0.4)) < 0.01
    assert abs(x.std() - 2.0) < 0.02


def test_dependent_chain_needs_state():
    with pytest.raises(StateError):
        sample_mark(MarkModel.ar1_gaussian(0.5), None, 1.0, stream(0))
    x, _ = sample_mark(MarkModel.iid_gaussian(), None, 1.0, stream(0))
    assert x.shape == (1,)


def test_ou_needs_gaps():
    with pytest.raises(DomainError):
        sample_marks(MarkModel.ou_sampled(1.0), 10, stream(0))


@pytest.mark.parametrize("model", [MarkModel.ar1_gaussian(0.8), MarkModel.ou_sampled(0.3)])
def test_stationary_from_first_mark(model):
    # many short chains: mean and variance of mark k do not depend on k
    reps, length = 20_000, 6
    rng = stream(5, 0)
    gaps = np.full(length, 0.7)
    paths = np.array([sample_marks(model, length, rng, gaps=gaps)[:, 0] for _ in range(reps)])
    sd_mean = 1.0 / math.sqrt(reps)
    sd_var = math.sqrt(2.0 / reps)
    for k in range(length):
        assert abs(paths[:, k].mean()) < 4 * sd_mean
        assert abs(paths[:, k].var() - 1.0) < 4 * sd_var


@pytest.mark.parametrize("model", [MarkModel.iid_gaussian(), MarkModel.iid_exponential(2.0),
                                   MarkModel.ar1_gaussian(0.6), MarkModel.ou_sampled(1.0)])
def test_fourth_moment_of_features_settles(model):
    x = sample_marks(model, 400_000, stream(6, 0), gaps=np.full(400_000, 0.5))[:, 0]
    half = (x[:200_000] ** 4).mean()
    full = (x ** 4).mean()
    assert math.isfinite(full) and abs(half - full) / full < 0.05


def test_parse_and_validation():
    assert MarkModel.parse("ar1:0.6").rho == 0.6
    assert MarkModel.parse("iid-exp:2").rate == 2.0
    assert MarkModel.parse("ou:1.5", dim=2).dim == 2
    for bad in ("ar1:1.0", "ou:0", "weird", "ar1:x"):
        with pytest.raises(DomainError):
            MarkModel.parse(bad)
    with pytest.raises(DomainError):
        MarkModel.iid_gaussian(sd=0.0)


def _stream(marks):
    marks = np.asarray(marks, dtype=float).reshape(len(marks), -1)
    return EventStream(float(len(marks) + 1), np.arange(1.0, len(marks) + 1), marks)


def test_mu_H_examples():
    assert estimate_mu_H(_stream([2.5] * 7), BoostSpec("linear"))[0] == 2.5
    np.testing.assert_allclose(estimate_mu_H(_stream([1.0, 2.0, 3.0]), BoostSpec("poly", degree=2)),
                               [2.0, 14.0 / 3.0], rtol=1e-15)
    with pytest.raises(InsufficientDataError):
        estimate_mu_H(EventStream(1.0, []), BoostSpec("linear"))


def test_mu_H_lln():
    x = sample_marks(MarkModel.iid_gaussian(), 1_000_000, stream(7, 0))
    assert abs(estimate_mu_H(_stream(x), BoostSpec("linear"))[0]) < 0.004


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=40), st.randoms())
def test_mu_H_permutation_invariant(values, rnd):
    perm = list(values)
    rnd.shuffle(perm)
    spec = BoostSpec("poly", degree=3)
    np.testing.assert_allclose(estimate_mu_H(_stream(values), spec), estimate_mu_H(_stream(perm), spec),
                               rtol=1e-12, atol=1e-9)


def test_analytic_Eh_examples():
    g = MarkModel.iid_gaussian()
    assert analytic_Eh(g, BoostSpec("linear"), [0.7]) == 1.0
    assert analytic_Eh(g, BoostSpec("exp"), [0.5]) == pytest.approx(1.133148, abs=1e-6)
    for model in (g, MarkModel.iid_exponential(), MarkModel.ar1_gaussian(0.3), MarkModel.ou_sampled(2.0)):
        for spec in (BoostSpec("linear"), BoostSpec("exp"), BoostSpec("poly", degree=2)):
            assert analytic_Eh(model, spec, np.zeros(spec.psi_dim)) == 1.0


@pytest.mark.parametrize("model,spec,psi", [
    (MarkModel.iid_gaussian(mean=0.3, sd=1.2), BoostSpec("exp"), [0.5]),
    (MarkModel.iid_exponential(2.0), BoostSpec("exp"), [0.4]),
    (MarkModel.iid_gaussian(mean=0.5), BoostSpec("poly", degree=3), [0.1, 0.2, 0.05]),
    (MarkModel.iid_exponential(1.5), BoostSpec("poly", degree=2), [0.3, 0.1]),
    (MarkModel.iid_exponential(1.5), BoostSpec("linear"), [0.3]),
])
def test_analytic_matches_monte_carlo(model, spec, psi):
    exact = analytic_Eh(model, spec, psi)
    mc = monte_carlo_Eh(model, spec, psi, stream(8, 0), n=1_000_000)
    assert abs(exact - mc) / exact < 5e-3


def test_no_closed_form_raises():
    with pytest.raises(NoClosedFormError):
        analytic_Eh(MarkModel.iid_exponential(1.0), BoostSpec("exp"), [1.5])


def test_empirical_normaliser_uses_monte_carlo():
    spec = BoostSpec("exp", normalizer="empirical")
    val = normalizing_constant(MarkModel.iid_exponential(4.0), spec, [1.0], stream(9, 0), n_mc=400_000)
    assert val != 4.0 / 3.0
    assert abs(val - 4.0 / 3.0) < 0.01
