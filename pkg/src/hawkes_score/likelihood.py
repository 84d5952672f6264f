"""Unmarked Hawkes log-likelihood and its quasi-maximum likelihood fit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import _kernels as K
from .errors import DomainError, InsufficientDataError, NumericError
from .model import BASELINE, INITIAL_RULES, STATIONARY_MEAN, EventStream, HawkesParams

MIN_EVENTS = 10
# keep the transformed iterate where exp/logit stay finite and meaningful
_U_BOX = np.array([[-30.0, 30.0], [-30.0, 30.0], [-30.0, 30.0]])


def _check_rule(rule):
    if rule not in INITIAL_RULES:
        raise DomainError(f"initial intensity rule must be one of {INITIAL_RULES}, got {rule!r}")
    return rule == STATIONARY_MEAN


def intensity_recursion(stream: EventStream, params: HawkesParams, initial_rule: str = BASELINE):
    """``(lambda(t_i-), A_i)`` with ``A_i = sum_{j<i} exp(-alpha (t_i - t_j))``."""
    _check_rule(initial_rule)
    return K.intensity_recursion(
        stream.times, params.eta, params.theta_branch, params.alpha, params.initial_excess(initial_rule)
    )


def compensator(stream: EventStream, params: HawkesParams, initial_rule: str = BASELINE) -> float:
    """Integrated unmarked intensity ``Lambda(T)`` in closed form."""
    _check_rule(initial_rule)
    T, a = stream.horizon, params.alpha
    tail = -np.expm1(-a * (T - stream.times)).sum()
    start = params.initial_excess(initial_rule) * -math.expm1(-a * T) / a
    return float(params.eta * T + params.theta_branch * tail + start)


def _evaluate(stream, params, initial_rule, order):
    ll, g, h = K.loglik_derivs(
        stream.times, stream.horizon, params.eta, params.theta_branch, params.alpha,
        _check_rule(initial_rule), order,
    )
    if not math.isfinite(ll):
        raise NumericError(f"log-likelihood is not finite at {params}")
    return ll, g, h


def loglik(stream: EventStream, params: HawkesParams, initial_rule: str = BASELINE) -> float:
    """``sum_i log lambda(t_i-) - Lambda(T)`` with the closed-form compensator."""
    return _evaluate(stream, params, initial_rule, 0)[0]


def loglik_grad(stream: EventStream, params: HawkesParams, initial_rule: str = BASELINE) -> np.ndarray:
    """Gradient in ``(eta, theta_branch, alpha)``."""
    return _evaluate(stream, params, initial_rule, 1)[1]


def loglik_neg_hessian(stream: EventStream, params: HawkesParams, initial_rule: str = BASELINE) -> np.ndarray:
    return -_evaluate(stream, params, initial_rule, 2)[2]


# transformed scale u = (log eta, logit theta, log alpha)

def to_unconstrained(params: HawkesParams) -> np.ndarray:
    th = params.theta_branch
    return np.array([math.log(params.eta), math.log(th) - math.log1p(-th), math.log(params.alpha)])


def from_unconstrained(u) -> HawkesParams:
    # overflow-free logistic
    z = math.exp(-abs(u[1]))
    th = 1.0 / (1.0 + z) if u[1] >= 0 else z / (1.0 + z)
    return HawkesParams(math.exp(u[0]), th, math.exp(u[2]))


def transformed_derivs(stream, u, initial_rule=BASELINE, order=2):
    """Log-likelihood, gradient and Hessian with respect to ``u``."""
    p = from_unconstrained(u)
    ll, g, h = _evaluate(stream, p, initial_rule, order)
    th = p.theta_branch
    jac = np.array([p.eta, th * (1.0 - th), p.alpha])
    gu = jac * g
    if order < 2:
        return ll, gu, None
    curv = np.array([p.eta, th * (1.0 - th) * (1.0 - 2.0 * th), p.alpha])
    hu = jac[:, None] * h * jac[None, :] + np.diag(curv * g)
    return ll, gu, hu


@dataclass(frozen=True)
class FitOptions:
    max_iter: int = 500
    grad_tol: float = 1e-8
    initial_rule: str = BASELINE
    simplex_fallback: bool = True


@dataclass(frozen=True)
class FitResult:
    theta_hat: HawkesParams
    loglik: float
    gradient_at_opt: np.ndarray
    neg_hessian_at_opt: np.ndarray
    converged: bool
    iterations: int
    termination: str
    gradient_transformed: np.ndarray = field(repr=False, default=None)
    standard_errors: np.ndarray | None = None
    initial_rule: str = BASELINE

    def as_dict(self) -> dict:
        return {
            "theta_hat": {"eta": self.theta_hat.eta, "theta_branch": self.theta_hat.theta_branch,
                          "alpha": self.theta_hat.alpha},
            "loglik": self.loglik,
            "gradient_at_opt": self.gradient_at_opt.tolist(),
            "neg_hessian_at_opt": self.neg_hessian_at_opt.tolist(),
            "converged": self.converged,
            "iterations": self.iterations,
            "termination": self.termination,
            "standard_errors": None if self.standard_errors is None else self.standard_errors.tolist(),
            "initial_rule": self.initial_rule,
        }


def auto_start(stream: EventStream) -> HawkesParams:
    """Deterministic start: half the empirical rate as baseline, branching
    0.5, decay rate the reciprocal mean inter-arrival time."""
    n, T = stream.n_events, stream.horizon
    mean_gap = stream.times[-1] / n
    return HawkesParams(0.5 * n / T, 0.5, 1.0 / mean_gap)


def _newton_direction(g, h):
    """Newton step on ``-loglik``; the Hessian is shifted until positive
    definite when it is not."""
    f_hess = -h
    tau = 0.0
    scale = max(1e-8, float(np.max(np.abs(np.diag(f_hess)))))
    for _ in range(60):
        try:
            c = np.linalg.cholesky(f_hess + tau * np.eye(3))
        except np.linalg.LinAlgError:
            tau = max(2.0 * tau, 1e-6 * scale)
            continue
        return np.linalg.solve(c.T, np.linalg.solve(c, g)), tau == 0.0
    return g / scale, False


def fit_qmle(stream: EventStream, init: HawkesParams | None = None, opts: FitOptions | None = None) -> FitResult:
    """Maximise the unmarked log-likelihood over ``(log eta, logit theta, log alpha)``.

    Damped Newton iterations with analytic Hessians and Armijo backtracking;
    a Nelder-Mead pass restarts the iteration if the line search stalls.
    Never raises on non-convergence: inspect ``converged`` and ``termination``.
    """
    opts = opts or FitOptions()
    rule = opts.initial_rule
    _check_rule(rule)
    if stream.n_events < MIN_EVENTS:
        raise InsufficientDataError(f"need at least {MIN_EVENTS} events to fit, got {stream.n_events}")
    u = np.clip(to_unconstrained(init or auto_start(stream)), _U_BOX[:, 0], _U_BOX[:, 1])

    def f(v):
        if np.any(v < _U_BOX[:, 0]) or np.any(v > _U_BOX[:, 1]):
            return math.inf
        try:
            return -transformed_derivs(stream, v, rule, 0)[0]
        except (NumericError, DomainError):
            return math.inf

    termination = "max_iterations"
    simplex_used = 0
    it = 0
    ll, g, h = transformed_derivs(stream, u, rule)
    while it < opts.max_iter:
        if np.max(np.abs(g)) < opts.grad_tol:
            termination = "gradient_tolerance"
            break
        it += 1
        d, pure = _newton_direction(g, h)
        big = np.max(np.abs(d))
        if big > 5.0:
            d *= 5.0 / big
        slope = float(g @ d)
        step = 1.0
        f0 = -ll
        accepted = False
        if pure and np.max(np.abs(g)) < 1e-3:
            # near the optimum f differences drown in rounding; judge the
            # full Newton step by the gradient instead
            trial = u + d
            try:
                ll_t, g_t, _ = transformed_derivs(stream, trial, rule, 1)
                accepted = (np.max(np.abs(g_t)) < 0.5 * np.max(np.abs(g))
                            and -ll_t <= f0 + 1e-9 * max(1.0, abs(f0)))
            except (NumericError, DomainError):
                accepted = False
            if accepted:
                ft = -ll_t
        for _ in range(0 if accepted else 50):
            trial = u + step * d
            ft = f(trial)
            if ft <= f0 - 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # no sufficient decrease: either converged to rounding level or stuck
            if np.max(np.abs(g)) < 1e3 * opts.grad_tol and ft <= f0 + 1e-12 * abs(f0):
                termination = "rounding_floor"
                break
            if not opts.simplex_fallback or simplex_used >= 2:
                termination = "line_search_stalled"
                break
            simplex_used += 1
            res = minimize(f, u, method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
            if not res.fun < f0:
                termination = "line_search_stalled"
                break
            trial = res.x
        u = trial
        ll, g, h = transformed_derivs(stream, u, rule)

    theta = from_unconstrained(u)
    ll, g_nat, h_nat = _evaluate(stream, theta, rule, 2)
    neg_h = -h_nat
    try:
        np.linalg.cholesky(neg_h)
        pd = True
    except np.linalg.LinAlgError:
        pd = False
    grad_ok = np.max(np.abs(g)) < opts.grad_tol
    converged = bool(grad_ok and pd)
    if grad_ok and not pd:
        termination = "degenerate_hessian"
    at_box = np.any(np.isclose(u, _U_BOX[:, 0])) or np.any(np.isclose(u, _U_BOX[:, 1]))
    if at_box and not converged:
        termination = "boundary"
    se = None
    if pd:
        cov = np.linalg.inv(neg_h)
        se = np.sqrt(np.diag(cov))
    return FitResult(theta, ll, g_nat, neg_h, converged, it, termination, g.copy(), se, rule)
