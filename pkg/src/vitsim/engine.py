"""Variational posterior state, hyperparameter schedules, and the update loop.

The posterior over the model parameter is kept as a Gaussian with mean ``mu``
and square-root covariance factor ``B`` (covariance ``B B^T``), descended
toward the target posterior by inner gradient iterations.  Three modes:

* ``VITS1`` evaluates the exact Hessian and the exact ``(B^-1)^T`` per step;
* ``VITS2`` replaces the Hessian by a rank-one integration-by-parts estimate
  and the inverse by a running first-order approximation ``C``;
* ``EXACT`` uses the closed-form expectations of the linear model (no
  sampling), which makes the whole update deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import loops
from .errors import NumericsError, ValidationError
from .ops import hessian_free_A, inverse_approx_step, mean_step, sqrt_step  # noqa: F401 (public surface)
from .params import HyperParams
from .potentials import LinearPotential, Potential
from .stats import SufficientStats

# Divergence gate on |C B - I|_F for the inverse approximation.  The tracking
# recursion is only first-order in h and has no self-correction, so a run
# whose factor pair drifts this far is aborted rather than silently degraded.
FRO_GATE = 0.5


class Mode(str, Enum):
    VITS1 = "vits1_hessian"
    VITS2 = "vits2_hessian_free_approx_inverse"
    EXACT = "exact_expectation"


@dataclass
class GaussianVariationalState:
    """Mean, square-root covariance factor, and (VITS2 only) its approximate
    inverse."""

    mu: np.ndarray
    B: np.ndarray
    C: np.ndarray | None
    mode: Mode

    @property
    def d(self) -> int:
        return self.mu.shape[0]

    def cov(self) -> np.ndarray:
        return self.B @ self.B.T


@dataclass(frozen=True)
class Schedule:
    """Inner-loop step size and iteration count for one round."""

    h: float
    K: int

    def __post_init__(self):
        if self.h <= 0.0:
            raise ValidationError(f"step size must be positive, got {self.h}")
        if self.K < 1:
            raise ValidationError(f"iteration count must be >= 1, got {self.K}")


def compute_schedule(
    stats: SufficientStats,
    params: HyperParams,
    k_scale: float = 1.0,
    h_override: float | None = None,
    K_override: int | None = None,
    h_scale: float = 1.0,
) -> Schedule:
    """Step size and iteration count from the current spectrum of ``V``.

    Defaults: ``h = lambda_min / (2 eta (lambda_min^2 + 2 lambda_max^2))``
    and ``K = ceil(1 + 2 (1 + 2 kappa^2) ln(2 R kappa d^2 T^2 ln^2(3 T^3)))``
    with ``kappa = lambda_max / lambda_min``; ``k_scale`` multiplies the
    count and ``h_scale`` the step (the Hessian-free mode needs a fraction of
    the full step to keep its sampling noise in check).  Either piece can be
    pinned by its override.  The returned step always satisfies
    ``h * eta * lambda_max < 1``.
    """
    lmin, lmax = stats.lambda_min, stats.lambda_max
    eta = params.eta
    if h_override is not None:
        h = float(h_override)
    else:
        h = h_scale * lmin / (2.0 * eta * (lmin**2 + 2.0 * lmax**2))
    if K_override is not None:
        K = int(K_override)
    else:
        kappa = lmax / lmin
        log_t = math.log(3.0 * params.T**3)
        inner = 2.0 * params.R * kappa * params.d**2 * params.T**2 * log_t**2
        K = math.ceil(k_scale * (1.0 + 2.0 * (1.0 + 2.0 * kappa**2) * math.log(inner)))
    K = max(K, 1)
    if h * eta * lmax >= 1.0:
        raise ValidationError(
            f"step size {h:.3g} puts eta*h*lambda_max = {h * eta * lmax:.3g} outside (0, 1)"
        )
    return Schedule(h=h, K=K)


def init_state(params: HyperParams, mode: Mode = Mode.VITS1, rng=None) -> GaussianVariationalState:
    """Fresh state: ``B = I / sqrt(lam eta)`` (prior covariance), ``C = B^-1``.

    The mean starts at zero, or at a draw from ``N(0, I / (11 eta lam))``
    when ``params.mean_init_mode == "gaussian"`` (``rng`` required then).
    """
    d, lam, eta = params.d, params.lam, params.eta
    scale = 1.0 / math.sqrt(lam * eta)
    B = scale * np.eye(d)
    C = np.eye(d) / scale if mode == Mode.VITS2 else None
    if params.mean_init_mode == "zero":
        mu = np.zeros(d)
    else:
        if rng is None:
            raise ValidationError("gaussian mean initialization needs an rng")
        mu = rng.standard_normal(d) / math.sqrt(11.0 * eta * lam)
    return GaussianVariationalState(mu=mu, B=B, C=C, mode=mode)


def sample_state(state: GaussianVariationalState, rng) -> np.ndarray:
    """One draw ``mu + B eps`` with ``eps`` standard normal."""
    return state.mu + state.B @ rng.standard_normal(state.d)


def update_posterior(
    state: GaussianVariationalState,
    potential: Potential,
    schedule: Schedule,
    rng=None,
    step_hook=None,
) -> GaussianVariationalState:
    """Run ``schedule.K`` inner iterations and return the new state.

    Per iteration: draw a sample from the current Gaussian (EXACT mode uses
    the mean instead), step the mean along the potential gradient, and update
    the factor ``B`` (plus ``C`` in VITS2).  The normal draws for the whole
    call are taken from ``rng`` up front, so the stream position does not
    depend on the backend that executes the loop.

    ``step_hook(k, mu, B, C)``, when given, is called after every iteration
    and forces the reference backend.
    """
    if potential.d != state.d:
        raise ValidationError(
            f"potential dimension {potential.d} does not match state dimension {state.d}"
        )
    cond = np.linalg.cond(state.B)
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericsError(f"square-root factor is numerically singular (cond ~ {cond:.2e})")
    K = schedule.K
    if state.mode == Mode.EXACT:
        if not isinstance(potential, LinearPotential):
            raise ValidationError("closed-form expectation mode needs the linear potential")
        eps = np.zeros((K, state.d))
    else:
        if rng is None:
            raise ValidationError("stochastic modes need an rng")
        eps = rng.standard_normal((K, state.d))

    if state.mode == Mode.VITS2:
        mu, B, C = loops.run_hessian_free_loop(
            state.mu, state.B, state.C, potential, schedule.h, K, eps, FRO_GATE,
            step_hook=step_hook,
        )
    else:
        mu, B = loops.run_hessian_loop(
            state.mu, state.B, potential, schedule.h, K, eps, step_hook=step_hook
        )
        C = None
    return GaussianVariationalState(mu=mu, B=B, C=C, mode=state.mode)
