"""Scaled negative log posteriors for the linear and logistic reward models.

Both potentials are multiplied by the inverse temperature ``eta`` so that one
posterior-update engine serves both: the linear case has gradient
``eta (V theta - b)`` and constant Hessian ``eta V``; the logistic case is the
Bernoulli log loss plus the Gaussian prior term ``lam/2 |theta|^2``, same
scaling.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .errors import ValidationError
from .stats import SufficientStats


class Potential:
    """A potential over parameter vectors: value, gradient and Hessian.

    ``grad_many``/``hessian_many`` evaluate row-wise over an (n, d) array;
    subclasses override them with vectorized versions where it matters.
    """

    d: int

    def value(self, theta: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad_many(self, thetas: np.ndarray) -> np.ndarray:
        return np.stack([self.grad(t) for t in thetas])

    def hessian_many(self, thetas: np.ndarray) -> np.ndarray:
        return np.stack([self.hessian(t) for t in thetas])

    def _check_dim(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.d,):
            raise ValidationError(f"theta has shape {theta.shape}, expected ({self.d},)")
        return theta


class LinearPotential(Potential):
    """``U(theta) = eta/2 (theta^T V theta - 2 theta^T b)`` up to an additive
    constant (the dropped ``sum r^2`` term does not affect derivatives)."""

    def __init__(self, stats: SufficientStats, eta: float):
        self.stats = stats
        self.eta = float(eta)
        self.d = stats.d

    def value(self, theta):
        theta = self._check_dim(theta)
        return 0.5 * self.eta * (theta @ self.stats.V @ theta - 2.0 * theta @ self.stats.b)

    def grad(self, theta):
        theta = self._check_dim(theta)
        return self.eta * (self.stats.V @ theta - self.stats.b)

    def hessian(self, theta=None):
        return self.eta * self.stats.V

    def grad_many(self, thetas):
        return self.eta * (thetas @ self.stats.V - self.stats.b)

    def hessian_many(self, thetas):
        return np.broadcast_to(self.hessian(), (thetas.shape[0], self.d, self.d))


class LogisticPotential(Potential):
    """``eta * [sum_s softplus(phi_s^T theta) - r_s phi_s^T theta
    + lam/2 |theta|^2]`` for binary rewards ``r_s``."""

    def __init__(self, d: int, eta: float, lam: float):
        self.d = int(d)
        self.eta = float(eta)
        self.lam = float(lam)
        self._cap = 64
        self._features = np.empty((self._cap, d))
        self._rewards = np.empty(self._cap)
        self.n_obs = 0

    @property
    def features(self) -> np.ndarray:
        return self._features[: self.n_obs]

    @property
    def rewards(self) -> np.ndarray:
        return self._rewards[: self.n_obs]

    def append(self, phi: np.ndarray, r: float) -> None:
        phi = np.asarray(phi, dtype=float)
        if phi.shape != (self.d,):
            raise ValidationError(f"feature has shape {phi.shape}, expected ({self.d},)")
        if not np.all(np.isfinite(phi)):
            raise ValidationError("non-finite feature rejected")
        if r not in (0.0, 1.0):
            raise ValidationError(f"logistic reward must be 0 or 1, got {r!r}")
        if self.n_obs == self._cap:
            self._cap *= 2
            self._features = np.concatenate([self._features, np.empty_like(self._features)])
            self._rewards = np.concatenate([self._rewards, np.empty_like(self._rewards)])
        self._features[self.n_obs] = phi
        self._rewards[self.n_obs] = r
        self.n_obs += 1

    def value(self, theta):
        theta = self._check_dim(theta)
        z = self.features @ theta
        loss = np.sum(np.logaddexp(0.0, z)) - self.rewards @ z
        return self.eta * (loss + 0.5 * self.lam * theta @ theta)

    def grad(self, theta):
        theta = self._check_dim(theta)
        z = self.features @ theta
        return self.eta * (self.features.T @ (expit(z) - self.rewards) + self.lam * theta)

    def hessian(self, theta):
        theta = self._check_dim(theta)
        s = expit(self.features @ theta)
        w = s * (1.0 - s)
        return self.eta * (self.features.T @ (self.features * w[:, None]) + self.lam * np.eye(self.d))

    def grad_many(self, thetas):
        z = thetas @ self.features.T
        return self.eta * ((expit(z) - self.rewards) @ self.features + self.lam * thetas)

    def hessian_many(self, thetas):
        s = expit(thetas @ self.features.T)
        w = s * (1.0 - s)
        gram = np.einsum("ns,si,sj->nij", w, self.features, self.features)
        return self.eta * (gram + self.lam * np.eye(self.d))
