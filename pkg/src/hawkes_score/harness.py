"""Monte Carlo calibration of the score test: size under the null and power
under local alternatives ``psi_T = gamma / sqrt(T)``."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, HawkesScoreError, SingularInformationError
from .likelihood import FitOptions, fit_qmle
from .marks import estimate_mu_H
from .model import BoostSpec, center_marks
from .rng import replicate_seed
from .score import score_and_info, score_statistic
from .simulation import SimConfig, simulate
from .stats import chi2_cdf, chi2_quantile, ks_statistic, noncentral_chi2_cdf, uniform_cdf

DEFAULT_LEVELS = (0.01, 0.05, 0.10)
MAX_FAILURE_RATE = 0.05


@dataclass(frozen=True)
class McConfig:
    sim: SimConfig
    replicates: int = 1000
    boost_under_test: BoostSpec = field(default_factory=BoostSpec)
    gamma: tuple | None = None
    nominal_levels: tuple = DEFAULT_LEVELS
    master_seed: int = 0
    workers: int = 1
    fit_options: FitOptions = field(default_factory=FitOptions)

    def __post_init__(self):
        if int(self.replicates) < 1:
            raise ConfigurationError("replicates must be >= 1")
        if any(not 0 < a < 1 for a in self.nominal_levels):
            raise ConfigurationError("nominal levels must lie in (0, 1)")
        if self.gamma is not None:
            g = tuple(float(v) for v in np.atleast_1d(self.gamma))
            if len(g) != self.boost_under_test.psi_dim:
                raise ConfigurationError(f"gamma needs {self.boost_under_test.psi_dim} components")
            object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "nominal_levels", tuple(float(a) for a in self.nominal_levels))

    @property
    def df(self) -> int:
        return self.boost_under_test.psi_dim

    def psi_for(self, gamma) -> tuple:
        if gamma is None:
            return (0.0,) * self.df
        return tuple(float(v) / math.sqrt(self.sim.horizon) for v in gamma)


@dataclass(frozen=True)
class ReplicateRecord:
    index: int
    seed: int
    statistic: float | None
    p_value: float | None
    theta_hat: tuple | None
    converged: bool
    omega: tuple | None
    n_events: int
    error: str | None = None

    def as_dict(self) -> dict:
        return {
            "index": self.index, "seed": self.seed, "statistic": self.statistic, "p_value": self.p_value,
            "theta_hat": None if self.theta_hat is None else list(self.theta_hat),
            "converged": self.converged, "omega": None if self.omega is None else list(self.omega),
            "n_events": self.n_events, "error": self.error,
        }


@dataclass(frozen=True)
class McReport:
    kind: str
    df: int
    records: tuple
    levels: tuple
    rejection_rates: dict
    rate_standard_errors: dict
    n_valid: int
    failures: dict
    ks_distance: float | None
    ks_pvalue_uniform: float | None
    omega_hat: list | None
    valid: bool
    gamma: tuple | None = None
    psi: tuple | None = None
    ncp: float | None = None
    predicted_power: dict | None = None
    omega_reference: list | None = None

    def as_dict(self) -> dict:
        rates = {_key(a): self.rejection_rates[a] for a in self.levels}
        return {
            "kind": self.kind,
            "df": self.df,
            "levels": list(self.levels),
            "empirical_rate": rates,
            # same numbers under the name that fits the run
            ("empirical_size" if self.kind == "null" else "empirical_power"): dict(rates),
            "empirical_rate_se": {_key(a): self.rate_standard_errors[a] for a in self.levels},
            "n_valid": self.n_valid,
            "failures": self.failures,
            "ks_distance": self.ks_distance,
            "ks_pvalue_uniform": self.ks_pvalue_uniform,
            "omega_hat": self.omega_hat,
            "valid": self.valid,
            "gamma": None if self.gamma is None else list(self.gamma),
            "psi": None if self.psi is None else list(self.psi),
            "ncp": self.ncp,
            "predicted_power": None if self.predicted_power is None
            else {_key(a): v for a, v in self.predicted_power.items()},
            "omega_reference": self.omega_reference,
            "records": [r.as_dict() for r in self.records],
        }

    @property
    def statistics(self) -> np.ndarray:
        return np.array([r.statistic for r in self.records if r.error is None])

    @property
    def p_values(self) -> np.ndarray:
        return np.array([r.p_value for r in self.records if r.error is None])


def _key(a: float) -> str:
    return repr(float(a))


def _replicate(config: McConfig, psi: tuple, k: int) -> ReplicateRecord:
    seed = replicate_seed(config.master_seed, k)
    sim = replace(config.sim, seed=seed, boost=config.boost_under_test, psi=psi)
    n = 0
    try:
        stream = simulate(sim)
        n = stream.n_events
        fit = fit_qmle(stream, opts=config.fit_options)
        theta = (fit.theta_hat.eta, fit.theta_hat.theta_branch, fit.theta_hat.alpha)
        if not fit.converged:
            return ReplicateRecord(k, seed, None, None, theta, False, None, n, f"fit:{fit.termination}")
        spec = config.boost_under_test
        G = center_marks(stream, spec, estimate_mu_H(stream, spec))
        s, info = score_and_info(stream, fit.theta_hat, G, fit.initial_rule)
        omega = tuple((info / stream.horizon).ravel().tolist())
        try:
            q, p = score_statistic(s, info)
        except SingularInformationError:
            return ReplicateRecord(k, seed, None, None, theta, True, omega, n, "singular_information")
        return ReplicateRecord(k, seed, q, p, theta, True, omega, n)
    except HawkesScoreError as exc:
        return ReplicateRecord(k, seed, None, None, None, False, None, n, exc.code)


def run_replicates(config: McConfig, psi: tuple, indices=None) -> list:
    """Replicates in index order; parallelism never changes the output."""
    idx = range(config.replicates) if indices is None else indices
    if config.workers <= 1:
        return [_replicate(config, psi, k) for k in idx]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(lambda k: _replicate(config, psi, k), idx))


def _summarise(config: McConfig, kind: str, records: list, gamma=None, psi=None, omega_ref=None) -> McReport:
    good = [r for r in records if r.error is None]
    reasons: dict = {}
    for r in records:
        if r.error is not None:
            reasons[r.error] = reasons.get(r.error, 0) + 1
    n_fail = len(records) - len(good)
    n = len(good)
    rates, ses = {}, {}
    for a in config.nominal_levels:
        if n:
            rate = sum(1 for r in good if r.p_value < a) / n
            rates[a] = rate
            ses[a] = math.sqrt(rate * (1.0 - rate) / n)
        else:
            rates[a] = ses[a] = None
    df = config.df
    ks = ks_u = omega = None
    if n:
        q = np.sort([r.statistic for r in good])
        ks = ks_statistic(q, lambda x: chi2_cdf(x, df))
        ks_u = ks_statistic(np.sort([r.p_value for r in good]), uniform_cdf)
    with_omega = [r.omega for r in records if r.omega is not None]
    if with_omega:
        omega = np.mean(np.array(with_omega), axis=0).reshape(df, df).tolist()
    ncp = pred = None
    if gamma is not None and omega_ref is not None:
        g = np.asarray(gamma)
        ncp = float(g @ np.asarray(omega_ref) @ g)
        pred = {a: 1.0 - noncentral_chi2_cdf(chi2_quantile(1.0 - a, df), df, ncp) for a in config.nominal_levels}
    return McReport(
        kind=kind, df=df, records=tuple(records), levels=config.nominal_levels, rejection_rates=rates,
        rate_standard_errors=ses, n_valid=n, failures={"count": n_fail, "reasons": dict(sorted(reasons.items()))},
        ks_distance=ks, ks_pvalue_uniform=ks_u, omega_hat=omega,
        valid=n > 0 and n_fail <= MAX_FAILURE_RATE * len(records),
        gamma=None if gamma is None else tuple(gamma), psi=psi, ncp=ncp, predicted_power=pred,
        omega_reference=None if omega_ref is None else np.atleast_2d(np.asarray(omega_ref, dtype=float)).tolist(),
    )


def run_null_calibration(config: McConfig) -> McReport:
    """Simulate under ``psi = 0`` and compare the statistics with chi2(r)."""
    psi = config.psi_for(None)
    return _summarise(config, "null", run_replicates(config, psi), psi=psi)


def gamma_for_ncp(omega, target_ncp: float, direction=None) -> tuple:
    """Scale ``direction`` (default all ones) so ``gamma^T omega gamma = target_ncp``."""
    omega = np.atleast_2d(np.asarray(omega, dtype=np.float64))
    u = np.ones(omega.shape[0]) if direction is None else np.asarray(direction, dtype=np.float64)
    quad = float(u @ omega @ u)
    if not quad > 0:
        raise ConfigurationError("omega is degenerate along the requested direction")
    return tuple((u * math.sqrt(target_ncp / quad)).tolist())


def run_local_power(config: McConfig, omega=None, target_ncp: float | None = None) -> McReport:
    """Simulate under ``psi_T = gamma / sqrt(T)`` and compare rejection rates
    with the noncentral chi-squared prediction.

    ``omega`` defaults to the averaged information from a companion null run
    with the same seeds. When ``config.gamma`` is unset, ``target_ncp`` picks
    its scale.
    """
    if omega is None:
        omega = run_null_calibration(config).omega_hat
        if omega is None:
            raise ConfigurationError("companion null run produced no valid replicates")
    gamma = config.gamma
    if gamma is None:
        if target_ncp is None:
            raise ConfigurationError("local power needs gamma or a target noncentrality")
        gamma = gamma_for_ncp(omega, target_ncp)
    psi = config.psi_for(gamma)
    kind = "power" if any(gamma) else "null"
    return _summarise(config, kind, run_replicates(config, psi), gamma=gamma, psi=psi, omega_ref=omega)


@dataclass(frozen=True)
class OmegaEstimate:
    omega: np.ndarray
    spread: dict
    degenerate: bool
    n_valid: dict


def estimate_omega(config: McConfig, horizons=None) -> OmegaEstimate:
    """Average ``info / T`` over null replicates at ``T`` and ``2T``; the
    across-replicate standard deviation at each horizon shows concentration.
    The returned ``omega`` uses the first horizon."""
    T = config.sim.horizon
    horizons = (T, 2.0 * T) if horizons is None else tuple(horizons)
    r = config.df
    results, spreads, counts = {}, {}, {}
    for h in horizons:
        cfg = replace(config, sim=replace(config.sim, horizon=h))
        recs = run_replicates(cfg, (0.0,) * r)
        oms = np.array([rec.omega for rec in recs if rec.omega is not None]).reshape(-1, r, r)
        counts[h] = int(oms.shape[0])
        if oms.shape[0] == 0:
            results[h] = np.zeros((r, r))
            spreads[h] = float("nan")
            continue
        results[h] = 0.5 * (oms.mean(axis=0) + oms.mean(axis=0).T)
        spreads[h] = float(np.linalg.norm(oms.std(axis=0)))
    om = results[horizons[0]]
    degenerate = not np.any(om) or np.linalg.eigvalsh(om)[0] <= 1e-12 * max(1.0, np.abs(om).max())
    return OmegaEstimate(om, spreads, bool(degenerate), counts)
