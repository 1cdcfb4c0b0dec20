"""Elementary steps of the variational posterior update.

These are the building blocks the reference inner loop composes; the compiled
backend fuses the same arithmetic.  All functions are pure: they return new
arrays and never modify their inputs.
"""

from __future__ import annotations

import numpy as np

from .errors import DivergenceError, NumericsError, ValidationError


def mean_step(mu: np.ndarray, grad_at_sample: np.ndarray, h: float) -> np.ndarray:
    """One Euler step on the mean: ``mu - h * grad``."""
    if mu.shape != grad_at_sample.shape:
        raise ValidationError(
            f"gradient shape {grad_at_sample.shape} does not match mean shape {mu.shape}"
        )
    if not np.all(np.isfinite(grad_at_sample)):
        raise DivergenceError("non-finite gradient in mean update")
    return mu - h * grad_at_sample


def sqrt_step(B: np.ndarray, A_mat: np.ndarray, B_inv_T: np.ndarray, h: float) -> np.ndarray:
    """Square-root covariance update ``(I - h A) B + h B_inv_T``.

    ``B_inv_T`` is either the exact ``(B^-1)^T`` or its running approximation
    ``C^T``, depending on the caller's mode.
    """
    return B - h * (A_mat @ B) + h * B_inv_T


def exact_inverse_T(B: np.ndarray) -> np.ndarray:
    """``(B^-1)^T`` computed by d linear solves against ``B^T``."""
    try:
        return np.linalg.solve(B.T, np.eye(B.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise NumericsError("square-root factor is singular") from exc


def hessian_free_A(
    C: np.ndarray, theta_sample: np.ndarray, mu: np.ndarray, grad_at_sample: np.ndarray
) -> np.ndarray:
    """Rank-one curvature estimate ``(C^T C)(theta - mu) grad^T``.

    ``C^T C`` approximates the inverse covariance, so in expectation over
    ``theta ~ N(mu, Sigma)`` this matches the mean Hessian (integration by
    parts); see the Stein-identity diagnostic.
    """
    if theta_sample.shape != mu.shape or grad_at_sample.shape != mu.shape:
        raise ValidationError("dimension mismatch in curvature estimate")
    w = C.T @ (C @ (theta_sample - mu))
    return np.outer(w, grad_at_sample)


def inverse_approx_step(C: np.ndarray, A_mat: np.ndarray, h: float) -> np.ndarray:
    """First-order inverse tracking ``C (I - h (C^T C - A))``."""
    if h < 0.0:
        raise ValidationError(f"step size must be nonnegative, got {h}")
    return C - h * (C @ (C.T @ C)) + h * (C @ A_mat)
