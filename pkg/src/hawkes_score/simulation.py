"""Thinning simulation of marked exponential Hawkes streams."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .errors import BoostDomainError, ConfigurationError, ExplosionError, NumericError, StabilityError
from .marks import MarkModel, init_mark_state, normalizing_constant
from .model import BASELINE, INITIAL_RULES, BoostSpec, EventStream, HawkesParams, check_stability
from .rng import stream

_GAPS, _UNIF, _MARKS, _NORM = 0, 1, 2, 3


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to reproduce one simulated stream.

    ``burn_in=None`` means ten relaxation times, ``10 / (alpha (1 - theta))``.
    ``g_bound`` bounds the conditional mean boost (1 for i.i.d. marks).
    ``intensity_cap=None`` means ``1e6 * eta``.
    """

    params: HawkesParams
    horizon: float
    boost: BoostSpec = field(default_factory=BoostSpec)
    psi: tuple = (0.0,)
    mark_model: MarkModel = field(default_factory=MarkModel)
    burn_in: float | None = None
    seed: int = 0
    initial_rule: str = BASELINE
    g_bound: float = 1.0
    intensity_cap: float | None = None

    def __post_init__(self):
        psi = tuple(float(v) for v in np.atleast_1d(np.asarray(self.psi, dtype=np.float64)))
        object.__setattr__(self, "psi", psi)
        if len(psi) != self.boost.psi_dim:
            raise ConfigurationError(f"psi has length {len(psi)}, boost needs {self.boost.psi_dim}")
        if self.boost.mark_dim != self.mark_model.dim:
            raise ConfigurationError("boost mark_dim and mark model dim differ")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")
        if self.burn_in is not None and not self.burn_in >= 0:
            raise ConfigurationError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.initial_rule not in INITIAL_RULES:
            raise ConfigurationError(f"initial_rule must be one of {INITIAL_RULES}")

    @property
    def effective_burn_in(self) -> float:
        if self.burn_in is not None:
            return float(self.burn_in)
        p = self.params
        return 10.0 / (p.alpha * (1.0 - p.theta_branch))

    @property
    def effective_cap(self) -> float:
        return 1e6 * self.params.eta if self.intensity_cap is None else float(self.intensity_cap)

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class SimDiagnostics:
    intensity_at_zero: float
    candidates: int
    max_bound_ratio: float
    mu_h: float


def _buffers(config: SimConfig, n_cand: int, n_marks: int):
    gaps = stream(config.seed, _GAPS).standard_exponential(n_cand)
    unif = stream(config.seed, _UNIF).random(n_cand)
    rng = stream(config.seed, _MARKS)
    state = init_mark_state(config.mark_model, rng)
    noise = config.mark_model.draw_noise(rng, n_marks)
    return gaps, unif, state, noise


def simulate_detailed(config: SimConfig) -> tuple[EventStream, SimDiagnostics]:
    """Simulate and also return thinning diagnostics."""
    p = config.params
    report = check_stability(p, config.g_bound)
    if not report.ok:
        raise StabilityError(f"branching ratio x boost bound = {report.product:.6g} >= 1")
    psi = np.asarray(config.psi)
    mu_h = normalizing_constant(config.mark_model, config.boost, psi, stream(config.seed, _NORM))
    burn = config.effective_burn_in
    span = burn + config.horizon
    excess0 = p.initial_excess(config.initial_rule)
    # candidates run at the dominating rate; size buffers generously and
    # grow on demand (prefixes of each stream are unchanged by growth)
    n_marks = int(1.5 * p.mean_rate * span + 10.0 * math.sqrt(p.mean_rate * span + 1.0)) + 32
    n_cand = 2 * n_marks
    mark_prm = config.mark_model.kernel_params()
    while True:
        gaps, unif, state, noise = _buffers(config, n_cand, n_marks)
        times = np.empty(n_marks)
        marks = np.empty((n_marks, config.mark_model.dim))
        status, n, used, lam0, ratio = K.simulate_kernel(
            p.eta, p.theta_branch, p.alpha, excess0, -burn, config.horizon, config.effective_cap,
            config.mark_model.code, mark_prm, state, config.boost.code, psi, mu_h,
            gaps, unif, noise, times, marks,
        )
        if status == K.SIM_NEED_UNIFORMS:
            n_cand *= 2
        elif status == K.SIM_NEED_MARKS:
            n_marks *= 2
        else:
            break
    if status == K.SIM_EXPLOSION:
        raise ExplosionError(f"intensity exceeded cap {config.effective_cap:.6g}")
    if status == K.SIM_BOOST_DOMAIN:
        raise BoostDomainError("linear boost became non-positive for a simulated mark; reduce |psi|")
    if status == K.SIM_BOUND_VIOLATED:
        raise NumericError(f"thinning bound violated (ratio {ratio!r})")
    out = EventStream(config.horizon, times[:n].copy(), marks[:n].copy())
    return out, SimDiagnostics(float(lam0), int(used), float(ratio), float(mu_h))


def simulate(config: SimConfig) -> EventStream:
    """Marked Hawkes stream on ``(0, horizon]`` by Ogata thinning.

    The process starts at ``-burn_in`` with intensity ``eta`` (or the
    stationary mean), events at ``t <= 0`` are discarded and the mark chain
    carries over the boundary. Identical configs give identical streams.
    """
    return simulate_detailed(config)[0]


def time_rescale(stream_: EventStream, params: HawkesParams, initial_rule: str = BASELINE) -> np.ndarray:
    """Compensator increments ``Lambda(t_i) - Lambda(t_{i-1})`` under the
    unmarked intensity; i.i.d. Exp(1) when the model is correct."""
    if stream_.n_events == 0:
        return np.empty(0)
    return K.compensator_increments(
        stream_.times, params.eta, params.theta_branch, params.alpha, params.initial_excess(initial_rule)
    )
