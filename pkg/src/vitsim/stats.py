"""Ridge sufficient statistics with rank-one inverse maintenance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericsError, ValidationError

# Below this the Gram matrix is treated as numerically singular.  Unreachable
# in exact arithmetic because V >= lam * I with lam > 0.
EIG_FLOOR = 1e-12

FEATURE_NORM_TOL = 1e-9


class SufficientStats:
    """Regularized Gram matrix ``V = lam*I + sum phi phi^T``, response vector
    ``b = sum r phi`` and a cached inverse of ``V``.

    The inverse is maintained by Sherman-Morrison rank-one updates (never a
    dense re-inversion) and re-symmetrized after every update to suppress
    drift over long runs.  Extreme eigenvalues are refreshed by a full
    symmetric eigendecomposition; exact and cheap at the dimensions this
    library targets.
    """

    __slots__ = ("d", "lam", "V", "V_inv", "b", "lambda_min", "lambda_max", "n_obs")

    def __init__(self, d: int, lam: float):
        if d < 1:
            raise ValidationError(f"d must be a positive integer, got {d}")
        if lam <= 0.0:
            raise ValidationError(f"lam must be positive, got {lam}")
        self.d = int(d)
        self.lam = float(lam)
        self.V = lam * np.eye(d)
        self.V_inv = np.eye(d) / lam
        self.b = np.zeros(d)
        self.lambda_min = float(lam)
        self.lambda_max = float(lam)
        self.n_obs = 0

    @property
    def condition_number(self) -> float:
        return self.lambda_max / self.lambda_min

    def copy(self) -> "SufficientStats":
        out = SufficientStats(self.d, self.lam)
        out.V = self.V.copy()
        out.V_inv = self.V_inv.copy()
        out.b = self.b.copy()
        out.lambda_min = self.lambda_min
        out.lambda_max = self.lambda_max
        out.n_obs = self.n_obs
        return out


def sherman_morrison_update(stats: SufficientStats, phi: np.ndarray, r: float) -> SufficientStats:
    """Absorb one observation ``(phi, r)`` in place and return ``stats``.

    ``V`` gains the rank-one term ``phi phi^T``; the cached inverse is updated
    by the Sherman-Morrison identity and re-symmetrized; ``lambda_min`` and
    ``lambda_max`` are refreshed exactly.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (stats.d,):
        raise ValidationError(f"feature has shape {phi.shape}, expected ({stats.d},)")
    if not np.all(np.isfinite(phi)) or not np.isfinite(r):
        raise ValidationError("non-finite observation rejected")
    norm = float(np.linalg.norm(phi))
    if norm > 1.0 + FEATURE_NORM_TOL:
        raise ValidationError(f"feature norm {norm:.6g} exceeds 1")

    v = stats.V_inv @ phi
    denom = 1.0 + phi @ v
    stats.V += np.outer(phi, phi)
    stats.V_inv -= np.outer(v, v) / denom
    stats.V_inv += stats.V_inv.T
    stats.V_inv *= 0.5
    stats.b += float(r) * phi
    stats.n_obs += 1

    eigs = np.linalg.eigvalsh(stats.V)
    stats.lambda_min = float(eigs[0])
    stats.lambda_max = float(eigs[-1])
    if stats.lambda_min < EIG_FLOOR:
        raise NumericsError(
            f"Gram matrix lost positive definiteness (min eigenvalue {stats.lambda_min:.3e})"
        )
    return stats


@dataclass(frozen=True)
class ExactPosterior:
    """Gaussian posterior of the linear model: mean ``V^-1 b``, covariance
    ``(eta V)^-1``."""

    mu_hat: np.ndarray
    sigma_hat: np.ndarray


def exact_posterior(stats: SufficientStats, eta: float) -> ExactPosterior:
    mu = stats.V_inv @ stats.b
    sigma = stats.V_inv / eta
    return ExactPosterior(mu_hat=mu, sigma_hat=0.5 * (sigma + sigma.T))
