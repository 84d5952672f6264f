"""Score test for mark effects in exponential Hawkes processes."""

__version__ = "0.1.0"

from ._accel import HAS_NUMBA
from .likelihood import FitOptions, FitResult, fit_qmle, loglik, loglik_grad, loglik_neg_hessian
from .marks import MarkModel, analytic_Eh, estimate_mu_H, sample_mark
from .model import BoostSpec, EventStream, HawkesParams, boost_eval, center_marks, check_stability, h_eval
from .score import ScoreTestResult, run_score_test, score_statistic
from .simulation import SimConfig, simulate, time_rescale
from .stats import NoncentralChi2, chi2_cdf, chi2_quantile, noncentral_chi2_cdf

__all__ = [
    "HAS_NUMBA", "FitOptions", "FitResult", "fit_qmle", "loglik", "loglik_grad", "loglik_neg_hessian",
    "MarkModel", "analytic_Eh", "estimate_mu_H", "sample_mark", "BoostSpec", "EventStream",
    "HawkesParams", "boost_eval", "center_marks", "check_stability", "h_eval", "ScoreTestResult",
    "run_score_test", "score_statistic", "SimConfig", "simulate", "time_rescale", "NoncentralChi2",
    "chi2_cdf", "chi2_quantile", "noncentral_chi2_cdf",
]
