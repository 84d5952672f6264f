"""Parametric objects of the marked exponential Hawkes model.

The conditional intensity is

    lambda(t) = eta + theta_branch * sum_{t_j < t} w(t - t_j; alpha) * g(x_j)

with the exponential decay density ``w(s; alpha) = alpha * exp(-alpha * s)``
and a normalised boost ``g = h / E[h]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BoostDomainError, DomainError, NormalizationError

LINEAR = "linear"
POLYNOMIAL = "poly"
EXPONENTIAL = "exp"
FAMILIES = (LINEAR, POLYNOMIAL, EXPONENTIAL)
# integer codes understood by the compiled kernels
FAMILY_CODES = {LINEAR: 0, POLYNOMIAL: 1, EXPONENTIAL: 2}

ANALYTIC = "analytic"
EMPIRICAL = "empirical"

BASELINE = "baseline"
STATIONARY_MEAN = "stationary"
INITIAL_RULES = (BASELINE, STATIONARY_MEAN)


@dataclass(frozen=True)
class HawkesParams:
    """Unmarked Hawkes parameters ``(eta, theta_branch, alpha)``."""

    eta: float
    theta_branch: float
    alpha: float

    def __post_init__(self):
        for name in ("eta", "theta_branch", "alpha"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)
        if self.eta <= 0:
            raise DomainError(f"eta must be > 0, got {self.eta}")
        if self.alpha <= 0:
            raise DomainError(f"alpha must be > 0, got {self.alpha}")
        if not 0.0 <= self.theta_branch < 1.0:
            raise DomainError(f"theta_branch must lie in [0, 1), got {self.theta_branch}")

    def as_array(self) -> np.ndarray:
        return np.array([self.eta, self.theta_branch, self.alpha])

    @classmethod
    def from_array(cls, v) -> "HawkesParams":
        return cls(float(v[0]), float(v[1]), float(v[2]))

    @property
    def mean_rate(self) -> float:
        return self.eta / (1.0 - self.theta_branch)

    def initial_excess(self, rule: str = BASELINE) -> float:
        """Intensity above baseline at the start of the window."""
        if rule == BASELINE:
            return 0.0
        if rule == STATIONARY_MEAN:
            return self.mean_rate - self.eta
        raise DomainError(f"unknown initial intensity rule {rule!r}")


@dataclass(frozen=True, eq=False)
class EventStream:
    """Event times in ``(0, horizon]`` with one mark vector per event."""

    horizon: float
    times: np.ndarray
    marks: np.ndarray = None
    mark_dim: int = field(default=None)

    def __post_init__(self):
        horizon = float(self.horizon)
        if not (horizon > 0 and math.isfinite(horizon)):
            raise DomainError(f"horizon must be positive and finite, got {self.horizon!r}")
        times = np.ascontiguousarray(self.times, dtype=np.float64).reshape(-1)
        n = times.size
        if self.marks is None:
            d = 1 if self.mark_dim is None else int(self.mark_dim)
            marks = np.zeros((n, d))
        else:
            marks = np.asarray(self.marks, dtype=np.float64)
            if marks.ndim == 1:
                marks = marks.reshape(n, -1) if n else marks.reshape(0, self.mark_dim or 1)
            marks = np.ascontiguousarray(marks)
        if marks.ndim != 2 or marks.shape[0] != n:
            raise DomainError(f"need one mark per event: {n} times, marks shape {marks.shape}")
        if self.mark_dim is not None and marks.shape[1] != int(self.mark_dim):
            raise DomainError(f"marks have dimension {marks.shape[1]}, expected {self.mark_dim}")
        if n:
            if not np.all(np.isfinite(times)):
                raise DomainError("event times must be finite")
            bad = np.flatnonzero(np.diff(times) <= 0)
            if bad.size:
                raise DomainError(f"times must be strictly increasing (row {bad[0] + 1})")
            if times[0] <= 0 or times[-1] > horizon:
                raise DomainError(f"times must lie in (0, {horizon}]")
        times.flags.writeable = False
        marks.flags.writeable = False
        object.__setattr__(self, "horizon", horizon)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "mark_dim", marks.shape[1])

    def __len__(self):
        return self.times.size

    @property
    def n_events(self) -> int:
        return self.times.size

    def __eq__(self, other):
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.horizon == other.horizon
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.marks, other.marks)
        )

    __hash__ = None

    def with_marks(self, marks) -> "EventStream":
        return EventStream(self.horizon, self.times, marks)


@dataclass(frozen=True)
class BoostSpec:
    """Boost family ``h(x; psi)`` with ``h(x; 0) = 1``.

    ``linear``: ``1 + psi . x``; ``exp``: ``exp(psi . x)``, both with
    ``psi_dim == mark_dim``. ``poly``: ``1 + sum_k psi_k x**k`` for a scalar
    mark, ``psi_dim == degree``.
    """

    family: str = LINEAR
    mark_dim: int = 1
    degree: int = 1
    normalizer: str = ANALYTIC

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown boost family {self.family!r}; expected one of {FAMILIES}")
        if self.normalizer not in (ANALYTIC, EMPIRICAL):
            raise DomainError(f"unknown normalizer {self.normalizer!r}")
        if int(self.mark_dim) < 1:
            raise DomainError("mark_dim must be >= 1")
        if self.family == POLYNOMIAL:
            if int(self.degree) < 1:
                raise DomainError("polynomial degree must be >= 1")
            if int(self.mark_dim) != 1:
                raise DomainError("polynomial boost supports scalar marks only")

    @property
    def psi_dim(self) -> int:
        return int(self.degree) if self.family == POLYNOMIAL else int(self.mark_dim)

    @property
    def code(self) -> int:
        return FAMILY_CODES[self.family]

    @classmethod
    def parse(cls, text: str, mark_dim: int = 1, normalizer: str = ANALYTIC) -> "BoostSpec":
        """Parse ``linear``, ``exp`` or ``poly:p``."""
        text = text.strip().lower()
        if text.startswith("poly"):
            _, _, deg = text.partition(":")
            return cls(POLYNOMIAL, 1, int(deg or 1), normalizer)
        if text in (LINEAR, EXPONENTIAL):
            return cls(text, mark_dim, 1, normalizer)
        raise DomainError(f"cannot parse boost {text!r}")

    def label(self) -> str:
        return f"poly:{self.degree}" if self.family == POLYNOMIAL else self.family


def kernel_eval(s, alpha: float):
    """Exponential decay density ``alpha * exp(-alpha * s)``."""
    if not alpha > 0:
        raise DomainError(f"alpha must be > 0, got {alpha}")
    s_arr = np.asarray(s, dtype=np.float64)
    if np.any(s_arr < 0) or np.any(np.isnan(s_arr)):
        raise DomainError("time lag must be non-negative")
    out = alpha * np.exp(-alpha * s_arr)
    return float(out) if out.ndim == 0 else out


def kernel_integral(a: float, b: float, alpha: float) -> float:
    """Mass of the decay density on ``[a, b]``; ``b`` may be ``inf``."""
    if not alpha > 0:
        raise DomainError(f"alpha must be > 0, got {alpha}")
    if a < 0 or b < 0 or a > b:
        raise DomainError(f"need 0 <= a <= b, got a={a}, b={b}")
    # exp(-alpha a) - exp(-alpha b) without cancellation for nearby a, b
    return float(math.exp(-alpha * a) * -math.expm1(-alpha * (b - a))) if b != math.inf else math.exp(-alpha * a)


def _as_marks(x, spec: BoostSpec) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim <= 1
    arr = np.atleast_1d(arr).reshape(1, -1) if single else arr
    if arr.ndim != 2 or arr.shape[1] != spec.mark_dim:
        raise DomainError(f"mark dimension {arr.shape[-1]} does not match boost mark_dim {spec.mark_dim}")
    return arr, single


def _as_psi(psi, spec: BoostSpec) -> np.ndarray:
    psi = np.atleast_1d(np.asarray(psi, dtype=np.float64))
    if psi.shape != (spec.psi_dim,):
        raise DomainError(f"psi must have length {spec.psi_dim}, got shape {psi.shape}")
    return psi


def mark_features(x, spec: BoostSpec) -> np.ndarray:
    """``H(x) = d h(x; psi) / d psi`` at ``psi = 0``, one row per mark."""
    arr, _ = _as_marks(x, spec)
    if spec.family == POLYNOMIAL:
        return arr[:, :1] ** np.arange(1, spec.degree + 1)
    return arr.copy()


def h_eval(x, psi, spec: BoostSpec):
    """Un-normalised boost ``h(x; psi)``; vectorised over rows of ``x``."""
    arr, single = _as_marks(x, spec)
    psi = _as_psi(psi, spec)
    if spec.family == EXPONENTIAL:
        out = np.exp(arr @ psi)
    else:
        out = 1.0 + mark_features(arr, spec) @ psi
        if spec.family == LINEAR and np.any(out <= 0):
            i = int(np.flatnonzero(out <= 0)[0])
            raise BoostDomainError(f"linear boost is non-positive ({out[i]:.6g}) at mark {arr[i].tolist()}")
    return float(out[0]) if single else out


def boost_eval(x, psi, spec: BoostSpec, mu_h: float):
    """Normalised boost ``g = h / mu_h`` where ``mu_h = E[h(X; psi)]``."""
    if not mu_h > 0:
        raise NormalizationError(f"normalising constant must be > 0, got {mu_h}")
    return h_eval(x, psi, spec) / mu_h


def center_marks(stream: EventStream, spec: BoostSpec, mu_H) -> np.ndarray:
    """Per-event centred features ``H(x_i) - mu_H`` as an ``(N, r)`` array."""
    mu_H = np.atleast_1d(np.asarray(mu_H, dtype=np.float64))
    if mu_H.shape != (spec.psi_dim,):
        raise DomainError(f"mu_H must have length {spec.psi_dim}, got shape {mu_H.shape}")
    if stream.mark_dim != spec.mark_dim:
        raise DomainError(f"stream mark_dim {stream.mark_dim} != boost mark_dim {spec.mark_dim}")
    return np.ascontiguousarray(mark_features(stream.marks, spec) - mu_H)


@dataclass(frozen=True)
class StabilityReport:
    ok: bool
    product: float

    def __bool__(self):
        return self.ok


def check_stability(params: HawkesParams, g_bound: float = 1.0) -> StabilityReport:
    """Sufficient stability check: branching ratio times the bound on the
    conditional mean boost must be below one.

    ``g_bound`` is 1 for i.i.d. marks (the boost is normalised); for
    predictable mark processes use ``sup g``.
    """
    product = params.theta_branch * float(g_bound)
    return StabilityReport(product < 1.0, product)
