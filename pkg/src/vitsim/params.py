"""Problem constants and the default inverse-temperature formula."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError

MEAN_INIT_MODES = ("zero", "gaussian")


@dataclass(frozen=True)
class HyperParams:
    """Constants of one bandit problem instance.

    ``eta`` left as ``None`` resolves to :func:`compute_eta`.  ``lam`` is the
    prior precision scale, ``R`` the sub-Gaussian constant of the reward
    noise, ``T`` the horizon and ``d`` the parameter dimension.
    """

    d: int
    T: int
    lam: float = 1.0
    R: float = 1.0
    eta: float | None = None
    mean_init_mode: str = "zero"

    def __post_init__(self):
        if self.d < 1:
            raise ValidationError(f"d must be a positive integer, got {self.d}")
        if self.T < 1:
            raise ValidationError(f"T must be a positive integer, got {self.T}")
        if not 0.0 < self.lam <= 1.0:
            raise ValidationError(f"lam must lie in (0, 1], got {self.lam}")
        if self.R < 1.0:
            raise ValidationError(f"R must be >= 1, got {self.R}")
        if self.mean_init_mode not in MEAN_INIT_MODES:
            raise ValidationError(
                f"mean_init_mode must be one of {MEAN_INIT_MODES}, got {self.mean_init_mode!r}"
            )
        if self.eta is None:
            object.__setattr__(self, "eta", compute_eta(self))
        if not 0.0 < self.eta <= 1.0:
            raise ValidationError(f"eta must lie in (0, 1], got {self.eta}")


def compute_eta(params: HyperParams) -> float:
    """Default inverse temperature 4*lam^2 / (81 R^2 d ln(3 T^3)), clamped to 1.

    Smaller values widen the sampled posterior and therefore explore more.
    Only reads ``lam``, ``R``, ``d`` and ``T`` from ``params``.
    """
    raw = 4.0 * params.lam**2 / (81.0 * params.R**2 * params.d * math.log(3.0 * params.T**3))
    return min(1.0, raw)
