"""Contextual-bandit environments and the synthetic arm construction.

The synthetic set is adversarial by design: arm 0 is the true parameter
itself (expected reward 1), arm 1 a small perturbation of it (expected reward
just under 1), and the rest are random unit vectors.  Telling arm 0 from
arm 1 requires genuine exploration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ValidationError

ENV_KINDS = ("linear_gaussian", "logistic")


@dataclass(frozen=True)
class ArmSet:
    """Feature rows (one arm per row) plus the environment-private index of
    the best arm.  Agents must only ever read ``features``."""

    features: np.ndarray
    optimal_index: int


@dataclass(frozen=True)
class Environment:
    theta_star: np.ndarray
    kind: str = "linear_gaussian"
    noise_std: float = 1.0

    def __post_init__(self):
        if self.kind not in ENV_KINDS:
            raise ValidationError(f"kind must be one of {ENV_KINDS}, got {self.kind!r}")
        if self.noise_std < 0.0:
            raise ValidationError(f"noise_std must be nonnegative, got {self.noise_std}")
        norm = float(np.linalg.norm(self.theta_star))
        if abs(norm - 1.0) > 1e-9:
            raise ValidationError(f"theta_star must have unit norm, got {norm:.12g}")


def random_environment(d: int, kind: str, rng, noise_std: float = 1.0) -> Environment:
    """Environment with a uniformly random unit-norm parameter."""
    v = rng.standard_normal(d)
    return Environment(theta_star=v / np.linalg.norm(v), kind=kind, noise_std=noise_std)


def build_synthetic_arms(theta_star: np.ndarray, K: int, d: int, rng) -> ArmSet:
    """Arm 0 = theta_star; arm 1 = unit-normalized theta_star + N(0, 0.1^2)
    perturbation; arms 2.. = unit-normalized standard normal vectors."""
    if K < 2:
        raise ValidationError(f"need at least 2 arms, got {K}")
    feats = np.empty((K, d))
    feats[0] = theta_star
    bumped = theta_star + 0.1 * rng.standard_normal(d)
    feats[1] = bumped / np.linalg.norm(bumped)
    for a in range(2, K):
        v = rng.standard_normal(d)
        feats[a] = v / np.linalg.norm(v)
    optimal = int(np.argmax(feats @ theta_star))
    return ArmSet(features=feats, optimal_index=optimal)


def pull(env: Environment, phi: np.ndarray, rng) -> float:
    """One reward draw for feature ``phi``."""
    mean = float(phi @ env.theta_star)
    if env.kind == "linear_gaussian":
        return mean + env.noise_std * float(rng.standard_normal())
    return float(rng.random() < expit(mean))


def select_arm(theta_tilde: np.ndarray, arms: ArmSet) -> int:
    """Index of the arm maximizing ``phi^T theta_tilde``; ties go to the
    lowest index."""
    feats = arms.features
    if feats.shape[0] == 0:
        raise ValidationError("empty arm set")
    if feats.shape[1] != theta_tilde.shape[0]:
        raise ValidationError(
            f"arm dimension {feats.shape[1]} does not match parameter dimension {theta_tilde.shape[0]}"
        )
    return int(np.argmax(feats @ theta_tilde))


def instantaneous_regret(arms: ArmSet, theta_star: np.ndarray, chosen: int) -> float:
    """Expected-reward gap between the best arm and the chosen one."""
    if not 0 <= chosen < arms.features.shape[0]:
        raise ValidationError(f"arm index {chosen} out of range")
    means = arms.features @ theta_star
    return float(means[arms.optimal_index] - means[chosen])
