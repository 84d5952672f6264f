"""Score (Lagrange multiplier) test for mark effects on the Hawkes intensity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import ConvergenceError, DomainError, InsufficientDataError, SingularInformationError
from .likelihood import FitOptions, FitResult, fit_qmle
from .marks import estimate_mu_H
from .model import BASELINE, BoostSpec, EventStream, HawkesParams, center_marks, mark_features
from .stats import chi2_sf

SINGULAR_RTOL = 1e-10


@dataclass(frozen=True)
class ScoreTestResult:
    score: np.ndarray
    info: np.ndarray
    statistic: float
    df: int
    p_value: float
    omega_hat: np.ndarray
    fit: FitResult | None = None
    mu_H: np.ndarray | None = None

    def as_dict(self) -> dict:
        out = {
            "score": self.score.tolist(),
            "info": self.info.tolist(),
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "omega_hat": self.omega_hat.tolist(),
        }
        if self.mu_H is not None:
            out["mu_H"] = self.mu_H.tolist()
        if self.fit is not None:
            out["fit"] = self.fit.as_dict()
        return out


def _check_G(stream: EventStream, G) -> np.ndarray:
    G = np.asarray(G, dtype=np.float64)
    if G.ndim == 1:
        G = G.reshape(-1, 1)
    if G.shape[0] != stream.n_events:
        raise DomainError(f"need one feature row per event: {stream.n_events} events, G has {G.shape[0]} rows")
    return np.ascontiguousarray(G)


def u_process(stream: EventStream, theta_hat: HawkesParams, G_hat) -> np.ndarray:
    """Derivative of the marked intensity in the boost parameters at zero,
    evaluated just before each event: an ``(N, r)`` array."""
    G = _check_G(stream, G_hat)
    return K.u_recursion(stream.times, G, theta_hat.theta_branch, theta_hat.alpha)


def u_integral(stream: EventStream, theta_hat: HawkesParams, G_hat) -> np.ndarray:
    """``integral_0^T U(t) dt = theta * sum_i G_i (1 - exp(-alpha (T - t_i)))``."""
    G = _check_G(stream, G_hat)
    w = -np.expm1(-theta_hat.alpha * (stream.horizon - stream.times))
    return theta_hat.theta_branch * (w @ G)


def score_and_info(stream: EventStream, theta_hat: HawkesParams, G_hat, initial_rule: str = BASELINE):
    """Score vector and event-averaged information in one O(N r^2) pass."""
    G = _check_G(stream, G_hat)
    if stream.n_events == 0:
        raise InsufficientDataError("score test needs at least one event")
    return K.score_and_info(
        stream.times, stream.horizon, G, theta_hat.eta, theta_hat.theta_branch, theta_hat.alpha,
        theta_hat.initial_excess(initial_rule),
    )


def score_vector(stream: EventStream, theta_hat: HawkesParams, G_hat, initial_rule: str = BASELINE) -> np.ndarray:
    """``sum_i U_i / lambda_i - integral_0^T U(t) dt``; the integral is closed form."""
    return score_and_info(stream, theta_hat, G_hat, initial_rule)[0]


def info_matrix(stream: EventStream, theta_hat: HawkesParams, G_hat, initial_rule: str = BASELINE) -> np.ndarray:
    """``sum_i U_i U_i^T / lambda_i**2``."""
    return score_and_info(stream, theta_hat, G_hat, initial_rule)[1]


def score_statistic(score, info) -> tuple[float, float]:
    """Quadratic form ``score^T info^{-1} score`` and its chi-squared p-value."""
    score = np.atleast_1d(np.asarray(score, dtype=np.float64))
    info = np.atleast_2d(np.asarray(info, dtype=np.float64))
    r = score.size
    if info.shape != (r, r):
        raise DomainError(f"info must be {r}x{r}, got {info.shape}")
    info = 0.5 * (info + info.T)
    eig = np.linalg.eigvalsh(info)
    if not eig[-1] > 0 or eig[0] < SINGULAR_RTOL * eig[-1]:
        raise SingularInformationError(
            f"information matrix is singular (eigenvalues {eig.min():.3g} .. {eig.max():.3g}); "
            "marks may be degenerate or r too large for the data"
        )
    c = np.linalg.cholesky(info)
    z = np.linalg.solve(c, score)
    q = float(z @ z)
    return q, chi2_sf(q, r)


def _check_features_vary(stream: EventStream, spec: BoostSpec) -> None:
    # a constant feature centres to zero up to rounding, leaving no score direction
    H = mark_features(stream.marks, spec)
    spread = np.ptp(H, axis=0)
    flat = np.flatnonzero(spread <= 1e-12 * np.maximum(1.0, np.max(np.abs(H), axis=0)))
    if flat.size:
        raise SingularInformationError(
            f"information matrix is singular: feature column(s) {flat.tolist()} are constant across events"
        )


def score_test_from_fit(stream: EventStream, spec: BoostSpec, fit: FitResult) -> ScoreTestResult:
    """Score test given an existing null fit; lets many candidate boosts
    share one fit."""
    if stream.n_events == 0:
        raise InsufficientDataError("score test needs at least one event")
    _check_features_vary(stream, spec)
    mu = estimate_mu_H(stream, spec)
    G = center_marks(stream, spec, mu)
    s, info = score_and_info(stream, fit.theta_hat, G, fit.initial_rule)
    q, p = score_statistic(s, info)
    return ScoreTestResult(s, info, q, spec.psi_dim, p, info / stream.horizon, fit, mu)


def run_score_test(stream: EventStream, spec: BoostSpec, opts: FitOptions | None = None,
                   require_convergence: bool = True) -> ScoreTestResult:
    """Fit the unmarked model, centre the mark features at their sample mean
    and compute the score statistic."""
    if stream.n_events == 0:
        raise InsufficientDataError("score test needs at least one event")
    _check_features_vary(stream, spec)
    fit = fit_qmle(stream, opts=opts)
    if require_convergence and not fit.converged:
        raise ConvergenceError(f"null fit did not converge ({fit.termination})")
    return score_test_from_fit(stream, spec, fit)
