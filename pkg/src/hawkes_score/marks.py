"""Mark sequences and the mark moments used by the score test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import DomainError, InsufficientDataError, NoClosedFormError, StateError
from .model import EXPONENTIAL, LINEAR, POLYNOMIAL, BoostSpec, EventStream, h_eval, mark_features

IID_GAUSS = "iid-gauss"
IID_EXP = "iid-exp"
AR1 = "ar1"
OU = "ou"
_KIND_CODES = {IID_GAUSS: K.IID_GAUSS, IID_EXP: K.IID_EXP, AR1: K.AR1_GAUSS, OU: K.OU_SAMPLED}


@dataclass(frozen=True)
class MarkModel:
    """Law of the mark sequence; components of a ``dim``-vector are independent.

    * ``iid-gauss``: i.i.d. ``N(mean, sd**2)``.
    * ``iid-exp``: i.i.d. exponential with ``rate``.
    * ``ar1``: ``x_i = mean + rho (x_{i-1} - mean) + innovation_sd * z_i``,
      indexed by event number and blind to event times.
    * ``ou``: an Ornstein-Uhlenbeck process with mean reversion ``kappa`` and
      stationary ``sd``, observed at the event times.

    Dependent chains start from an exact stationary draw. Note that ``ar1``
    marks have no known stationary marked-Hawkes construction; they are
    provided as the event-indexed objective-function variant.
    """

    kind: str = IID_GAUSS
    dim: int = 1
    mean: float = 0.0
    sd: float = 1.0
    rho: float = 0.0
    innovation_sd: float = 1.0
    kappa: float = 1.0
    rate: float = 1.0

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise DomainError(f"unknown mark model {self.kind!r}")
        if int(self.dim) < 1:
            raise DomainError("mark dim must be >= 1")
        if self.kind == AR1:
            if not -1.0 < self.rho < 1.0:
                raise DomainError(f"AR(1) coefficient must lie in (-1, 1), got {self.rho}")
            if not self.innovation_sd > 0:
                raise DomainError("innovation sd must be > 0")
        elif self.kind == IID_EXP:
            if not self.rate > 0:
                raise DomainError("exponential rate must be > 0")
        else:
            if not self.sd > 0:
                raise DomainError("sd must be > 0")
            if self.kind == OU and not self.kappa > 0:
                raise DomainError("OU mean reversion kappa must be > 0")

    @classmethod
    def iid_gaussian(cls, mean=0.0, sd=1.0, dim=1):
        return cls(IID_GAUSS, dim, mean=mean, sd=sd)

    @classmethod
    def iid_exponential(cls, rate=1.0, dim=1):
        return cls(IID_EXP, dim, rate=rate)

    @classmethod
    def ar1_gaussian(cls, rho, innovation_sd=None, mean=0.0, dim=1):
        """AR(1) marks; the default innovation sd gives unit stationary variance."""
        if innovation_sd is None:
            innovation_sd = math.sqrt(1.0 - rho * rho)
        return cls(AR1, dim, mean=mean, rho=rho, innovation_sd=innovation_sd)

    @classmethod
    def ou_sampled(cls, kappa, sd=1.0, mean=0.0, dim=1):
        return cls(OU, dim, mean=mean, sd=sd, kappa=kappa)

    @classmethod
    def parse(cls, text: str, dim: int = 1) -> "MarkModel":
        """``iid-gauss``, ``iid-exp[:rate]``, ``ar1:rho`` or ``ou:kappa``."""
        name, _, arg = text.strip().lower().partition(":")
        try:
            if name == IID_GAUSS:
                return cls.iid_gaussian(dim=dim)
            if name == IID_EXP:
                return cls.iid_exponential(float(arg) if arg else 1.0, dim=dim)
            if name == AR1:
                return cls.ar1_gaussian(float(arg), dim=dim)
            if name == OU:
                return cls.ou_sampled(float(arg), dim=dim)
        except ValueError as exc:
            raise DomainError(f"bad mark model {text!r}: {exc}") from None
        raise DomainError(f"unknown mark model {text!r}")

    def label(self) -> str:
        return {IID_GAUSS: IID_GAUSS, IID_EXP: f"iid-exp:{self.rate!r}",
                AR1: f"ar1:{self.rho!r}", OU: f"ou:{self.kappa!r}"}[self.kind]

    @property
    def code(self) -> int:
        return _KIND_CODES[self.kind]

    @property
    def is_iid(self) -> bool:
        return self.kind in (IID_GAUSS, IID_EXP)

    @property
    def gaussian(self) -> bool:
        return self.kind != IID_EXP

    @property
    def marginal_mean(self) -> float:
        return 1.0 / self.rate if self.kind == IID_EXP else self.mean

    @property
    def marginal_sd(self) -> float:
        if self.kind == IID_EXP:
            return 1.0 / self.rate
        if self.kind == AR1:
            return self.innovation_sd / math.sqrt(1.0 - self.rho ** 2)
        return self.sd

    def kernel_params(self) -> np.ndarray:
        """Parameter vector in the layout used by the compiled kernels."""
        return np.array([self.mean, self.marginal_sd, self.rho, self.innovation_sd, self.kappa, self.rate])

    def draw_noise(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``(n, dim)`` driving noise: standard normals, or standard
        exponentials for ``iid-exp``."""
        if self.kind == IID_EXP:
            return rng.standard_exponential((n, self.dim))
        return rng.standard_normal((n, self.dim))


def init_mark_state(model: MarkModel, rng: np.random.Generator) -> np.ndarray:
    """Exact draw from the stationary marginal."""
    out = np.empty(model.dim)
    K.stationary_mark(model.code, model.kernel_params(), model.draw_noise(rng, 1)[0], out)
    return out


def sample_mark(model: MarkModel, state, dt: float, rng: np.random.Generator):
    """Next mark and the new chain state.

    ``dt`` is the time since the previous event and only matters for ``ou``.
    Dependent kinds need an initialised ``state`` (see :func:`init_mark_state`).
    """
    if state is None:
        if not model.is_iid:
            raise StateError(f"{model.kind} mark chain needs an initialised state")
        state = np.zeros(model.dim)
    state = np.asarray(state, dtype=np.float64)
    if state.shape != (model.dim,):
        raise StateError(f"state must have shape ({model.dim},), got {state.shape}")
    if dt < 0:
        raise DomainError("dt must be non-negative")
    out = np.empty(model.dim)
    K.advance_mark(model.code, model.kernel_params(), state, float(dt), model.draw_noise(rng, 1)[0], out)
    return out, out.copy()


def sample_marks(model: MarkModel, n: int, rng: np.random.Generator, gaps=None) -> np.ndarray:
    """``n`` consecutive marks from a stationary start; ``gaps`` are the
    inter-event times (required for ``ou``)."""
    if model.kind == OU and gaps is None:
        raise DomainError("ou marks need inter-event gaps")
    state = init_mark_state(model, rng)
    noise = model.draw_noise(rng, n)
    gaps = np.zeros(n) if gaps is None else np.ascontiguousarray(gaps, dtype=np.float64)
    return K.mark_chain(model.code, model.kernel_params(), state, gaps, noise)


def estimate_mu_H(stream: EventStream, spec: BoostSpec) -> np.ndarray:
    """Sample mean of ``H(x_i)`` over the observed events."""
    if stream.n_events == 0:
        raise InsufficientDataError("cannot estimate mark moments from an empty stream")
    return mark_features(stream.marks, spec).mean(axis=0)


def _gaussian_raw_moment(k: int, mu: float, sd: float) -> float:
    total = 0.0
    for j in range(0, k + 1, 2):
        # E[Z^j] = (j - 1)!! for even j
        total += math.comb(k, j) * mu ** (k - j) * sd ** j * _double_factorial(j - 1)
    return total


def _double_factorial(n: int) -> int:
    return 1 if n <= 0 else n * _double_factorial(n - 2)


def analytic_Eh(model: MarkModel, spec: BoostSpec, psi) -> float:
    """Closed-form ``E[h(X; psi)]`` under the marginal mark law.

    Raises :class:`NoClosedFormError` when no formula exists (callers then fall
    back to :func:`monte_carlo_Eh`).
    """
    psi = np.atleast_1d(np.asarray(psi, dtype=np.float64))
    if psi.shape != (spec.psi_dim,):
        raise DomainError(f"psi must have length {spec.psi_dim}")
    if spec.mark_dim != model.dim:
        raise DomainError(f"boost mark_dim {spec.mark_dim} != mark model dim {model.dim}")
    if not np.any(psi):
        return 1.0
    mean, sd = model.marginal_mean, model.marginal_sd
    if spec.family == LINEAR:
        return float(1.0 + psi.sum() * mean)
    if spec.family == EXPONENTIAL:
        if model.gaussian:
            return float(np.prod(np.exp(psi * mean + 0.5 * psi ** 2 * sd ** 2)))
        if np.all(psi < model.rate):
            return float(np.prod(model.rate / (model.rate - psi)))
        raise NoClosedFormError("E[exp(psi X)] is infinite for psi >= rate")
    if spec.family == POLYNOMIAL:
        if model.gaussian:
            moments = [_gaussian_raw_moment(k, mean, sd) for k in range(1, spec.degree + 1)]
        else:
            moments = [math.factorial(k) / model.rate ** k for k in range(1, spec.degree + 1)]
        return float(1.0 + np.dot(psi, moments))
    raise NoClosedFormError(f"no closed form for {spec.family} with {model.kind}")


def monte_carlo_Eh(model: MarkModel, spec: BoostSpec, psi, rng: np.random.Generator, n: int = 1_000_000) -> float:
    """Sample-mean plug-in for ``E[h(X; psi)]`` using i.i.d. marginal draws."""
    psi = np.atleast_1d(np.asarray(psi, dtype=np.float64))
    if not np.any(psi):
        return 1.0
    noise = model.draw_noise(rng, n)
    if model.kind == IID_EXP:
        x = noise / model.rate
    else:
        x = model.mean + model.marginal_sd * noise
    return float(np.mean(h_eval(x, psi, spec)))


def normalizing_constant(model: MarkModel, spec: BoostSpec, psi, rng: np.random.Generator | None = None,
                         n_mc: int = 1_000_000) -> float:
    """``E[h(X; psi)]`` by the rule in ``spec.normalizer``; the analytic rule
    falls back to Monte Carlo when no closed form exists."""
    if spec.normalizer == "analytic":
        try:
            return analytic_Eh(model, spec, psi)
        except NoClosedFormError:
            pass
    if rng is None:
        rng = np.random.default_rng(0)
    return monte_carlo_Eh(model, spec, psi, rng, n_mc)
