"""Simplified bi-level model for choosing the tracking factor.

Inner problem: the per-step error ``x`` is stationary for
``sum(exp(-x / sigma)) + a @ x``, giving ``x_i = -sigma * ln(sigma * a_i)``
whenever ``0 < sigma * a_i < 1`` (the positive-error branch).  Outer
problem: the external objective ``-sum(x)`` along that branch.  Its
stationary point satisfies ``sigma = mean(x(sigma))``.

Along the branch the external objective is convex in sigma, so the
stationary point is where the implicit hypergradient changes sign.
:func:`optimal_sigma` finds it by golden-section search on the magnitude
of that hypergradient; :func:`grid_extremum` is the brute-force
counterpart working on objective values alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import BranchViolation, DomainError, EmptyBranch

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class BiLevelInstance:
    """Coefficients ``a`` of the linear extra objective and a sigma search interval.

    ``sigma_bounds`` defaults to the whole positive-error branch.  The
    interval actually searched is its intersection with that branch.
    """

    a: np.ndarray
    sigma_bounds: Optional[tuple] = None

    def __post_init__(self):
        a = np.array(self.a, dtype=float).reshape(-1)
        if a.size == 0 or not np.isfinite(a).all():
            raise DomainError("coefficients must be a non-empty finite vector")
        a.flags.writeable = False
        object.__setattr__(self, "a", a)
        if (a <= 0).any():
            raise EmptyBranch("sigma * a_i must be positive; every a_i has to be > 0")
        top = 1.0 / a.max()
        lo, hi = self.sigma_bounds if self.sigma_bounds is not None else (top * 1e-9, top)
        lo, hi = float(lo), min(float(hi), top)
        if not (0 < lo < hi):
            raise EmptyBranch(f"no valid sigma in ({lo}, {hi}); branch needs sigma < {top}")
        object.__setattr__(self, "sigma_bounds", (lo, hi))

    @property
    def N(self) -> int:
        return self.a.size

    @property
    def branch_upper(self) -> float:
        """Supremum of sigma on the branch, 1 / max(a)."""
        return 1.0 / self.a.max()


def internal_objective(x, sigma: float) -> float:
    x = np.asarray(x, dtype=float)
    if (x < 0).any():
        raise DomainError("errors must be non-negative")
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    return float(np.sum(np.exp(-x / sigma)))


def _check_branch(inst: BiLevelInstance, sigma: float) -> None:
    sa = sigma * inst.a
    if not sigma > 0 or (sa <= 0).any() or (sa >= 1).any():
        raise BranchViolation(f"sigma={sigma!r} leaves the branch: sigma * a spans "
                              f"[{sa.min():.6g}, {sa.max():.6g}]")


def stationary_branch(inst: BiLevelInstance, sigma: float) -> np.ndarray:
    _check_branch(inst, sigma)
    return -sigma * np.log(sigma * inst.a)


def stationarity_residual(inst: BiLevelInstance, x, sigma: float) -> float:
    """Largest component of the inner gradient ``-(1/sigma) exp(-x/sigma) + a``."""
    x = np.asarray(x, dtype=float)
    return float(np.max(np.abs(-np.exp(-x / sigma) / sigma + inst.a)))


def external_objective(inst: BiLevelInstance, sigma: float) -> float:
    """``-sum(x*(sigma))`` in closed form, ``sigma * sum(ln(sigma a))``."""
    _check_branch(inst, sigma)
    return float(sigma * np.sum(np.log(sigma * inst.a)))


@dataclass
class BiLevelGradients:
    grad_x_Jin: np.ndarray
    grad_x_Jex: np.ndarray  # +1 per component, the sign as printed in the derivation
    grad_x_Jex_consistent: np.ndarray  # -1, the gradient of sum(-x)
    hess_sigma_x_Jin: np.ndarray
    hess_xx_Jin: np.ndarray
    dx_dsigma: np.ndarray
    dJex_dsigma: float  # assembled with the consistent sign
    dJex_dsigma_printed: float


def bilevel_gradients(inst: BiLevelInstance, x, sigma: float) -> BiLevelGradients:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != inst.a.shape:
        raise DomainError("x must have one entry per coefficient")
    if (x <= 0).any() or not sigma > 0:
        raise DomainError("need x > 0 and sigma > 0")
    e = np.exp(-x / sigma)
    g_in = -e / sigma
    h_sx = (sigma - x) / sigma ** 3 * e
    H = np.diag(e / sigma ** 2)
    # implicit function theorem on the inner stationarity condition
    dx = -np.linalg.solve(H, h_sx)
    ones = np.ones_like(x)
    return BiLevelGradients(
        grad_x_Jin=g_in, grad_x_Jex=ones, grad_x_Jex_consistent=-ones, hess_sigma_x_Jin=h_sx,
        hess_xx_Jin=H, dx_dsigma=dx, dJex_dsigma=float(dx @ -ones), dJex_dsigma_printed=float(dx @ ones),
    )


def hypergradient(inst: BiLevelInstance, sigma: float) -> float:
    """dJ_ex/dsigma along the branch, assembled from the implicit gradient."""
    return bilevel_gradients(inst, stationary_branch(inst, sigma), sigma).dJex_dsigma


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10,
                   max_iter: int = 500) -> tuple[float, int]:
    """Minimise a unimodal ``f`` on ``[lo, hi]``; returns (argmin, evaluations)."""
    a, b = float(lo), float(hi)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    n = 2
    while (b - a) > tol and n < max_iter:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
        n += 1
    return (c if fc < fd else d), n


@dataclass
class OptimalSigma:
    sigma: float
    x: np.ndarray
    fixed_point_residual: float
    external: float
    hypergradient: float
    interior: bool
    evaluations: int


def optimal_sigma(inst: BiLevelInstance, rel_tol: float = 1e-10) -> OptimalSigma:
    """Stationary sigma of the external objective on the branch.

    Searches ``log(sigma)`` over the valid interval.  ``interior`` is False
    when the hypergradient does not change sign inside the interval, in
    which case the returned sigma sits at a boundary and the fixed-point
    identity does not hold.
    """
    lo, hi = inst.sigma_bounds
    hi_in = hi * (1.0 - 1e-12) if hi >= inst.branch_upper else hi
    L, H = math.log(lo), math.log(hi_in)

    def obj(u: float) -> float:
        return abs(hypergradient(inst, math.exp(u)))

    u, n = golden_section(obj, L, H, tol=rel_tol)
    sigma = math.exp(u)
    x = stationary_branch(inst, sigma)
    interior = hypergradient(inst, lo) < 0 < hypergradient(inst, hi_in)
    return OptimalSigma(
        sigma=sigma, x=x, fixed_point_residual=abs(sigma - float(x.mean())),
        external=external_objective(inst, sigma), hypergradient=hypergradient(inst, sigma),
        interior=interior, evaluations=n,
    )


def grid_extremum(inst: BiLevelInstance, n: int = 100_000) -> tuple[float, float]:
    """Brute-force stationary sigma from objective values on a log grid.

    Returns ``(sigma, log_spacing)``.  The external objective is convex on
    the branch, so its stationary point is the grid minimum.
    """
    lo, hi = inst.sigma_bounds
    hi_in = hi * (1.0 - 1e-12) if hi >= inst.branch_upper else hi
    u = np.linspace(math.log(lo), math.log(hi_in), n)
    s = np.exp(u)
    vals = s * np.log(s[:, None] * inst.a[None, :]).sum(axis=1)
    return float(s[int(np.argmin(vals))]), float(u[1] - u[0])


def closed_form_sigma(a) -> float:
    """Stationary sigma solving ``sum(ln(sigma a_i)) = -N``: ``1 / (e * geomean(a))``."""
    a = np.asarray(a, dtype=float)
    return float(math.exp(-1.0 - np.mean(np.log(a))))
