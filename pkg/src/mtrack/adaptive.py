"""Online tracking-factor adaptation.

An EMA ``x_hat`` of the instantaneous tracking error is kept per term and
the factor is tightened towards it with ``sigma <- min(sigma, x_hat)``, so
sigma never grows.

The state has a single writer: the update functions mutate it in place
and return it.  Readers that need a stable view take :meth:`snapshot`.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError
from .rewards import TrackingFactors

DEFAULT_EMA_LAMBDA = 0.999
# keeps every factor strictly positive when an error estimate reaches zero
DEFAULT_SIGMA_FLOOR = 1e-9


@dataclass
class TrackingFactorState:
    terms: tuple
    sigma: np.ndarray
    x_hat: np.ndarray
    ema_lambda: float = DEFAULT_EMA_LAMBDA
    sigma_init: Optional[np.ndarray] = None
    sigma_floor: float = DEFAULT_SIGMA_FLOOR
    iteration: int = 0
    trace: list = field(default_factory=list)  # (kind, iteration, sigma, x_hat)

    def __post_init__(self):
        self.terms = tuple(self.terms)
        self.sigma = np.array(self.sigma, dtype=float).reshape(-1)
        self.x_hat = np.array(self.x_hat, dtype=float).reshape(-1)
        if self.sigma.shape != (len(self.terms),) or self.x_hat.shape != self.sigma.shape:
            raise DomainError("sigma and x_hat need one entry per term")
        if not (self.sigma > 0).all():
            raise DomainError("sigma must be positive")
        if (self.x_hat < 0).any():
            raise DomainError("x_hat must be non-negative")
        if not 0.0 <= self.ema_lambda < 1.0:
            raise DomainError("ema_lambda must lie in [0, 1)")
        if self.sigma_init is None:
            self.sigma_init = self.sigma.copy()

    @classmethod
    def from_factors(cls, factors: TrackingFactors, terms: Sequence[str] = None,
                     ema_lambda: float = DEFAULT_EMA_LAMBDA, x_hat=None, **kw) -> "TrackingFactorState":
        """Start from ``factors``; the error estimate defaults to the initial sigma."""
        d = factors.as_dict()
        terms = tuple(terms or d)
        sigma = np.array([d[t] for t in terms])
        return cls(terms=terms, sigma=sigma, x_hat=sigma.copy() if x_hat is None else x_hat,
                   ema_lambda=ema_lambda, **kw)

    def as_dict(self) -> dict:
        return dict(zip(self.terms, self.sigma.tolist()))

    def apply_to(self, factors: TrackingFactors) -> TrackingFactors:
        return factors.replace(**self.as_dict())

    def snapshot(self) -> "TrackingFactorState":
        return copy.deepcopy(self)


def _as_vector(state: TrackingFactorState, err) -> np.ndarray:
    if isinstance(err, dict):
        err = [err[t] for t in state.terms]
    e = np.asarray(err, dtype=float).reshape(-1)
    if e.shape != state.sigma.shape:
        raise DomainError("one error per tracked term expected")
    if (e < 0).any() or not np.isfinite(e).all():
        raise DomainError("instantaneous error must be finite and non-negative")
    return e


def update_error_ema(state: TrackingFactorState, inst_error) -> TrackingFactorState:
    e = _as_vector(state, inst_error)
    lam = state.ema_lambda
    state.x_hat = lam * state.x_hat + (1.0 - lam) * e
    state.trace.append(("ema", state.iteration, state.sigma.copy(), state.x_hat.copy()))
    return state


def update_sigma(state: TrackingFactorState) -> TrackingFactorState:
    state.sigma = np.minimum(state.sigma, np.maximum(state.x_hat, state.sigma_floor))
    state.trace.append(("sigma", state.iteration, state.sigma.copy(), state.x_hat.copy()))
    state.iteration += 1
    return state


def sigma_trace(state: TrackingFactorState) -> np.ndarray:
    """(n_updates, n_terms) sigma after every sigma update."""
    rows = [s for kind, _, s, _ in state.trace if kind == "sigma"]
    return np.array(rows).reshape(-1, len(state.terms))
