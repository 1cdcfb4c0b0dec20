"""Pure-NumPy backend for the hot inner loops.

Composed from the elementary operations in :mod:`vitsim.ops`, so it works
with any :class:`~vitsim.potentials.Potential`.  The compiled backend in
``_loops_cy`` fuses the same arithmetic for the linear and logistic
potentials; this module is the reference it is checked against.
"""

from __future__ import annotations

import numpy as np

from .errors import DivergenceError
from .ops import exact_inverse_T, hessian_free_A, inverse_approx_step, mean_step, sqrt_step

# Modes of the inner loop.
HESSIAN = "hessian"
HESSIAN_FREE = "hessian_free"


def vits_inner_loop(mu, B, C, potential, h, K, eps, mode, fro_gate=0.5, step_hook=None):
    """Run ``K`` posterior-update iterations; returns ``(mu, B, C)``.

    mode "hessian": exact Hessian of the potential and exact square-root
    inverse per step.  mode "hessian_free": rank-one curvature estimate and
    the running inverse approximation ``C``, with a divergence gate on
    ``|C B - I|_F``.

    ``eps`` holds the K standard-normal draws, one row per iteration (all
    zeros realize the closed-form-expectation update of the linear case).
    ``step_hook(k, mu, B, C)`` is invoked after each iteration when provided.
    """
    mu = mu.copy()
    B = B.copy()
    C = None if C is None else C.copy()
    for k in range(K):
        theta = mu + B @ eps[k]
        g = potential.grad(theta)
        if mode == HESSIAN_FREE:
            A = hessian_free_A(C, theta, mu, g)
            B_inv_T = C.T
        else:
            A = potential.hessian(theta)
            B_inv_T = exact_inverse_T(B)
        mu = mean_step(mu, g, h)
        B = sqrt_step(B, A, B_inv_T, h)
        if mode == HESSIAN_FREE:
            C = inverse_approx_step(C, A, h)
            gap = np.linalg.norm(C @ B - np.eye(mu.shape[0]))
            if gap > fro_gate:
                raise DivergenceError(
                    f"inverse approximation diverged: |CB - I|_F = {gap:.3g} at inner step {k}"
                )
        if step_hook is not None:
            step_hook(k, mu, B, C)
    return mu, B, C


def ula_chain(theta, potential, h, K, noise):
    """``K`` unadjusted-Langevin steps ``theta - h grad U + sqrt(2h) xi``."""
    theta = theta.copy()
    scale = np.sqrt(2.0 * h)
    for k in range(K):
        theta = theta - h * potential.grad(theta) + scale * noise[k]
        if not np.all(np.isfinite(theta)):
            raise DivergenceError(f"Langevin iterate became non-finite at step {k}")
    return theta
