"""Backend selection for the hot inner loops.

The compiled extension is preferred when importable; set
``VITSIM_PURE_PYTHON=1`` to force the pure-NumPy reference backend.  The
fused compiled loops only cover the linear and logistic potentials; anything
else runs through the composed reference loop regardless of backend.
"""

from __future__ import annotations

import os

from . import _loops_py
from .potentials import LinearPotential, LogisticPotential

try:
    from . import _loops_cy
except ImportError:  # extension not built; pure mode
    _loops_cy = None


def active_backend() -> str:
    if _loops_cy is None or os.environ.get("VITSIM_PURE_PYTHON"):
        return "python"
    return "cython"


def _potential_args(potential):
    """Kernel argument tuple for a supported potential, else None."""
    if isinstance(potential, LinearPotential):
        return ("linear", potential.stats.V, potential.stats.b, potential.eta)
    if isinstance(potential, LogisticPotential):
        return ("logistic", potential.features, potential.rewards, potential.lam, potential.eta)
    return None


def run_hessian_loop(mu, B, potential, h, K, eps, step_hook=None):
    """Dispatch the exact-Hessian inner loop.  Returns ``(mu, B)``."""
    args = _potential_args(potential)
    if step_hook is None and args is not None and active_backend() == "cython":
        return _loops_cy.vits_hessian_loop(mu, B, args, h, eps)
    mu, B, _ = _loops_py.vits_inner_loop(
        mu, B, None, potential, h, K, eps, _loops_py.HESSIAN, step_hook=step_hook
    )
    return mu, B


def run_hessian_free_loop(mu, B, C, potential, h, K, eps, fro_gate, step_hook=None):
    """Dispatch the Hessian-free inner loop.  Returns ``(mu, B, C)``."""
    args = _potential_args(potential)
    if step_hook is None and args is not None and active_backend() == "cython":
        return _loops_cy.vits_hessian_free_loop(mu, B, C, args, h, eps, fro_gate)
    return _loops_py.vits_inner_loop(
        mu, B, C, potential, h, K, eps, _loops_py.HESSIAN_FREE,
        fro_gate=fro_gate, step_hook=step_hook,
    )


def run_ula_chain(theta, potential, h, K, noise):
    """Dispatch the unadjusted-Langevin chain.  Returns the final iterate."""
    args = _potential_args(potential)
    if args is not None and active_backend() == "cython":
        return _loops_cy.ula_loop(theta, args, h, noise)
    return _loops_py.ula_chain(theta, potential, h, K, noise)
