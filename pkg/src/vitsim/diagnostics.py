"""Independent verification oracles for the update machinery.

Each check is a pure function of its inputs and reports a signed worst-case
margin: nonpositive (up to the stated tolerance) means the property held.
They run both as tests and as opt-in per-run instrumentation (the trajectory
auditor), the latter costing an eigendecomposition per inner step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import GaussianVariationalState, Mode, Schedule, update_posterior
from .errors import NumericsError, ValidationError
from .potentials import Potential

SYM_TOL = 1e-8
PSD_TOL = 1e-10
CONTRACTION_TOL = 1e-10
GEODESIC_TOL = 1e-10


@dataclass(frozen=True)
class DiagnosticReport:
    name: str
    rounds_checked: int
    worst_violation: float
    tolerance: float
    passed: bool
    details: tuple | None = None


def make_report(name, rounds_checked, worst_violation, tolerance, details=None) -> DiagnosticReport:
    worst = float(worst_violation)
    return DiagnosticReport(
        name=name,
        rounds_checked=int(rounds_checked),
        worst_violation=worst,
        tolerance=float(tolerance),
        passed=bool(worst <= tolerance),
        details=details,
    )


def _require_symmetric(M: np.ndarray, what: str) -> np.ndarray:
    gap = float(np.max(np.abs(M - M.T))) if M.size else 0.0
    if gap > SYM_TOL:
        raise NumericsError(f"{what} is asymmetric beyond tolerance ({gap:.3g})")
    return 0.5 * (M + M.T)


def _spectral_norm_sym(M: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(M))))


def psd_floor_margin(sigma_tilde: np.ndarray, V: np.ndarray, eta: float) -> float:
    """Smallest eigenvalue of ``Sigma - V^-1 / (2 eta)``.

    Nonnegative means the variational covariance never drops below half the
    posterior covariance, the floor that keeps every inner step stable.
    """
    S = _require_symmetric(sigma_tilde, "covariance")
    V = _require_symmetric(V, "Gram matrix")
    V_inv = np.linalg.inv(V)
    M = S - 0.5 * (V_inv + V_inv.T) / (2.0 * eta)
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def contraction_ratio(
    lambda_prev_norm: float, lambda_next_norm: float, eta: float, h: float, lambda_min: float
) -> float:
    """Residual of the one-step covariance-gap contraction
    ``|L'| <= (1 - 1.5 eta h lambda_min) |L|``; nonpositive means it held."""
    if lambda_prev_norm < 0.0 or lambda_next_norm < 0.0:
        raise ValidationError("norms must be nonnegative")
    return lambda_next_norm - (1.0 - 1.5 * eta * h * lambda_min) * lambda_prev_norm


def _chol_or_raise(M: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"{what} is not positive definite") from exc


def kl_gaussians(mu0, S0, mu1, S1) -> float:
    """KL divergence between Gaussians,
    ``0.5 [tr(S1^-1 S0) + (m1-m0)^T S1^-1 (m1-m0) - d + ln det S1/det S0]``."""
    S0 = _require_symmetric(np.asarray(S0, float), "S0")
    S1 = _require_symmetric(np.asarray(S1, float), "S1")
    _chol_or_raise(S0, "S0")
    _chol_or_raise(S1, "S1")
    d = S0.shape[0]
    dm = np.asarray(mu1, float) - np.asarray(mu0, float)
    tr = float(np.trace(np.linalg.solve(S1, S0)))
    quad = float(dm @ np.linalg.solve(S1, dm))
    _, logdet0 = np.linalg.slogdet(S0)
    _, logdet1 = np.linalg.slogdet(S1)
    return 0.5 * (tr + quad - d + logdet1 - logdet0)


def _psd_sqrt(M: np.ndarray) -> np.ndarray:
    # Eigenvalues clamped at zero; tiny negatives are roundoff, not signal.
    w, U = np.linalg.eigh(M)
    w = np.clip(w, 0.0, None)
    return (U * np.sqrt(w)) @ U.T


def w2_gaussians(mu0, S0, mu1, S1) -> float:
    """Squared 2-Wasserstein distance between Gaussians:
    ``|m0-m1|^2 + tr(S0 + S1 - 2 (S0^1/2 S1 S0^1/2)^1/2)``."""
    S0 = _require_symmetric(np.asarray(S0, float), "S0")
    S1 = _require_symmetric(np.asarray(S1, float), "S1")
    dm = np.asarray(mu0, float) - np.asarray(mu1, float)
    R0 = _psd_sqrt(S0)
    M = R0 @ S1 @ R0
    w = np.clip(np.linalg.eigvalsh(0.5 * (M + M.T)), 0.0, None)
    value = float(dm @ dm + np.trace(S0) + np.trace(S1) - 2.0 * np.sum(np.sqrt(w)))
    return max(value, 0.0)


def stein_identity_check(
    state: GaussianVariationalState, potential: Potential, n_samples: int, rng
) -> DiagnosticReport:
    """Monte-Carlo check of the integration-by-parts identity
    ``E[Sigma^-1 (theta - mu) grad^T] = E[hessian]`` under the state's
    Gaussian; passes when every entry agrees within 5 standard errors."""
    if n_samples < 10_000:
        raise ValidationError(f"need at least 1e4 samples, got {n_samples}")
    d = state.d
    B_inv = np.linalg.inv(state.B)
    sigma_inv = B_inv.T @ B_inv
    eps = rng.standard_normal((n_samples, d))
    thetas = state.mu + eps @ state.B.T
    grads = potential.grad_many(thetas)
    W = (thetas - state.mu) @ sigma_inv.T
    H = potential.hessian_many(thetas)

    mean_A = W.T @ grads / n_samples
    mean_H = H.mean(axis=0)
    e_a2 = (W**2).T @ (grads**2) / n_samples
    e_ah = np.einsum("na,nb,nab->ab", W, grads, H) / n_samples
    e_h2 = (H**2).mean(axis=0)
    gap = mean_A - mean_H
    var_diff = np.clip(e_a2 - 2.0 * e_ah + e_h2 - gap**2, 0.0, None)
    se = np.sqrt(var_diff / n_samples)
    violation = float(np.max(np.abs(gap) - 5.0 * se))
    return make_report("stein_identity", n_samples, violation, 0.0)


def exp_map(mu_p, Sigma_p, mu_v, Sigma_v):
    """Gaussian geodesic step ``(mu_p + mu_v, (Sigma_v + I) Sigma_p (Sigma_v + I))``."""
    Sigma_p = _require_symmetric(np.asarray(Sigma_p, float), "base covariance")
    Sigma_v = _require_symmetric(np.asarray(Sigma_v, float), "tangent matrix")
    _chol_or_raise(Sigma_p, "base covariance")
    M = Sigma_v + np.eye(Sigma_v.shape[0])
    _chol_or_raise(0.5 * (M + M.T), "tangent plus identity")
    return np.asarray(mu_p, float) + np.asarray(mu_v, float), M @ Sigma_p @ M


def geodesic_step_check(
    state: GaussianVariationalState, potential: Potential, h: float
) -> DiagnosticReport:
    """One closed-form-expectation engine step must equal the geodesic step
    driven by the mean gradient and mean-Hessian tangent, entrywise."""
    sigma = state.cov()
    mu_v = -h * potential.grad(state.mu)
    sigma_inv = np.linalg.inv(sigma)
    sigma_v = -h * (potential.hessian(state.mu) - 0.5 * (sigma_inv + sigma_inv.T))
    mu_map, sigma_map = exp_map(state.mu, sigma, mu_v, 0.5 * (sigma_v + sigma_v.T))

    probe = GaussianVariationalState(mu=state.mu, B=state.B, C=None, mode=Mode.EXACT)
    stepped = update_posterior(probe, potential, Schedule(h=h, K=1))
    gap_mu = float(np.max(np.abs(stepped.mu - mu_map)))
    gap_sigma = float(np.max(np.abs(stepped.cov() - sigma_map)))
    return make_report("geodesic_step", 1, max(gap_mu, gap_sigma), GEODESIC_TOL)


class LinearTrajectoryAuditor:
    """Per-inner-step audits of a linear VITS1 (or EXACT) trajectory.

    Records the PSD-floor margin and the covariance-gap contraction residual
    after every inner step.  O(d^3) per step, which is why per-run
    instrumentation is opt-in.
    """

    def __init__(self, eta: float):
        self.eta = eta
        self.psd_margins: list[float] = []
        self.contraction_residuals: list[float] = []
        self._V_inv = None
        self._h = None
        self._lambda_min = None
        self._prev_gap_norm = None

    def begin_update(self, stats, schedule: Schedule, state: GaussianVariationalState) -> None:
        self._V_inv = stats.V_inv.copy()
        self._h = schedule.h
        self._lambda_min = stats.lambda_min
        sigma = state.cov()
        self._prev_gap_norm = _spectral_norm_sym(
            0.5 * (sigma + sigma.T) - self._V_inv / self.eta
        )

    def step(self, k, mu, B, C) -> None:
        sigma = B @ B.T
        sigma = 0.5 * (sigma + sigma.T)
        floor = sigma - self._V_inv / (2.0 * self.eta)
        self.psd_margins.append(float(np.linalg.eigvalsh(0.5 * (floor + floor.T))[0]))
        gap_norm = _spectral_norm_sym(sigma - self._V_inv / self.eta)
        self.contraction_residuals.append(
            contraction_ratio(self._prev_gap_norm, gap_norm, self.eta, self._h, self._lambda_min)
        )
        self._prev_gap_norm = gap_norm

    def reports(self) -> list[DiagnosticReport]:
        worst_psd = -min(self.psd_margins) if self.psd_margins else 0.0
        worst_con = max(self.contraction_residuals) if self.contraction_residuals else 0.0
        return [
            make_report("psd_floor", len(self.psd_margins), worst_psd, PSD_TOL),
            make_report("contraction", len(self.contraction_residuals), worst_con, CONTRACTION_TOL),
        ]
