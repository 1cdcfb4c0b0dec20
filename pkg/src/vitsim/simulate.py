"""Agents and the round loop with regret accounting.

One agent instance owns all of its mutable state and belongs to exactly one
run; independent (agent, seed) runs can execute in parallel with nothing
shared.  The simulator, not the agent, touches ``theta_star`` and
``optimal_index`` when scoring a round.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import loops
from .engine import Mode, compute_schedule, init_state, sample_state, update_posterior
from .envs import ArmSet, Environment, build_synthetic_arms, instantaneous_regret, pull, select_arm
from .errors import ValidationError
from .params import HyperParams
from .potentials import LinearPotential, LogisticPotential
from .stats import SufficientStats, sherman_morrison_update

AGENT_KINDS = ("vits1", "vits2", "lints", "lmcts", "uniform")


@dataclass(frozen=True)
class RoundRecord:
    t: int
    arm: int
    reward: float
    inst_regret: float
    cum_regret: float
    elapsed_ns: int


class Agent:
    """Protocol: pick an arm from the features, then absorb the feedback."""

    name = "agent"

    def choose(self, arms: ArmSet, rng) -> int:
        raise NotImplementedError

    def observe(self, phi: np.ndarray, reward: float, rng) -> None:
        raise NotImplementedError


class VitsAgent(Agent):
    """Thompson sampling from the variational posterior (VITS1 or VITS2).

    Absorbs each observation into the sufficient statistics (and, for the
    logistic model, the observation history), recomputes the schedule from
    the current spectrum, and runs the inner update loop warm-started from
    the previous round's state.
    """

    def __init__(
        self,
        params: HyperParams,
        env_kind: str,
        mode: Mode = Mode.VITS1,
        k_scale: float = 1.0,
        h_override: float | None = None,
        K_override: int | None = None,
        h_scale: float = 1.0,
        rng=None,
        audit=None,
    ):
        self.name = "vits1" if mode == Mode.VITS1 else "vits2"
        self.params = params
        self.mode = mode
        self.k_scale = k_scale
        self.h_override = h_override
        self.K_override = K_override
        self.h_scale = h_scale
        self.stats = SufficientStats(params.d, params.lam)
        self.state = init_state(params, mode, rng)
        if env_kind == "logistic":
            self.potential = LogisticPotential(params.d, params.eta, params.lam)
        else:
            self.potential = LinearPotential(self.stats, params.eta)
        self.audit = audit

    def choose(self, arms, rng):
        theta = sample_state(self.state, rng)
        return select_arm(theta, arms)

    def observe(self, phi, reward, rng):
        if isinstance(self.potential, LogisticPotential):
            self.potential.append(phi, reward)
        sherman_morrison_update(self.stats, phi, reward)
        schedule = compute_schedule(
            self.stats, self.params, self.k_scale, self.h_override, self.K_override,
            h_scale=self.h_scale,
        )
        hook = None
        if self.audit is not None:
            self.audit.begin_update(self.stats, schedule, self.state)
            hook = self.audit.step
        self.state = update_posterior(self.state, self.potential, schedule, rng, step_hook=hook)


class LinTSAgent(Agent):
    """Thompson sampling from the exact Gaussian posterior of the linear
    model: ``N(V^-1 b, (eta V)^-1)``."""

    name = "lints"

    def __init__(self, params: HyperParams):
        self.params = params
        self.stats = SufficientStats(params.d, params.lam)

    def choose(self, arms, rng):
        mu_hat = self.stats.V_inv @ self.stats.b
        cov = self.stats.V_inv / self.params.eta
        L = np.linalg.cholesky(0.5 * (cov + cov.T))
        theta = mu_hat + L @ rng.standard_normal(self.params.d)
        return select_arm(theta, arms)

    def observe(self, phi, reward, rng):
        sherman_morrison_update(self.stats, phi, reward)


class LmcTSAgent(Agent):
    """Thompson sampling via an unadjusted Langevin chain on the potential,
    warm-started across rounds; acts greedily on the final iterate.

    ``h_lmc`` left as ``None`` resolves per round to
    ``0.1 / (eta * lambda_max(V))``.
    """

    name = "lmcts"

    def __init__(
        self,
        params: HyperParams,
        env_kind: str,
        h_lmc: float | None = None,
        K_lmc: int = 50,
    ):
        if h_lmc is not None and h_lmc <= 0.0:
            raise ValidationError(f"h_lmc must be positive, got {h_lmc}")
        if K_lmc < 1:
            raise ValidationError(f"K_lmc must be >= 1, got {K_lmc}")
        self.params = params
        self.h_lmc = h_lmc
        self.K_lmc = int(K_lmc)
        self.stats = SufficientStats(params.d, params.lam)
        self.theta = np.zeros(params.d)
        if env_kind == "logistic":
            self.potential = LogisticPotential(params.d, params.eta, params.lam)
        else:
            self.potential = LinearPotential(self.stats, params.eta)

    def choose(self, arms, rng):
        h = self.h_lmc
        if h is None:
            h = 0.1 / (self.params.eta * self.stats.lambda_max)
        noise = rng.standard_normal((self.K_lmc, self.params.d))
        self.theta = loops.run_ula_chain(self.theta, self.potential, h, self.K_lmc, noise)
        return select_arm(self.theta, arms)

    def observe(self, phi, reward, rng):
        if isinstance(self.potential, LogisticPotential):
            self.potential.append(phi, reward)
        sherman_morrison_update(self.stats, phi, reward)


class UniformAgent(Agent):
    """Uniformly random arm choice; the no-learning reference."""

    name = "uniform"

    def choose(self, arms, rng):
        return int(rng.integers(arms.features.shape[0]))

    def observe(self, phi, reward, rng):
        pass


def play_round(
    agent: Agent,
    arms: ArmSet,
    env: Environment,
    t: int,
    noise_rng,
    agent_rng,
    cum_regret: float,
    record_timing: bool = False,
) -> RoundRecord:
    """One simulated round.  ``elapsed_ns`` covers the agent's decision and
    update only (zero unless timing is requested, keeping output files
    reproducible byte for byte)."""
    t0 = time.perf_counter_ns()
    arm = agent.choose(arms, agent_rng)
    t1 = time.perf_counter_ns()
    phi = arms.features[arm]
    reward = pull(env, phi, noise_rng)
    t2 = time.perf_counter_ns()
    agent.observe(phi, reward, agent_rng)
    t3 = time.perf_counter_ns()
    inst = instantaneous_regret(arms, env.theta_star, arm)
    elapsed = (t1 - t0) + (t3 - t2) if record_timing else 0
    return RoundRecord(
        t=t,
        arm=arm,
        reward=reward,
        inst_regret=inst,
        cum_regret=cum_regret + inst,
        elapsed_ns=elapsed,
    )


def run_bandit(
    agent: Agent,
    env: Environment,
    arms: ArmSet,
    T: int,
    noise_rng,
    agent_rng,
    record_timing: bool = False,
    resample_contexts: bool = False,
    context_rng=None,
) -> list[RoundRecord]:
    """Full horizon-T run of one agent against one environment."""
    if resample_contexts and context_rng is None:
        raise ValidationError("resampling contexts needs a context rng")
    records: list[RoundRecord] = []
    cum = 0.0
    K, d = arms.features.shape
    for t in range(1, T + 1):
        if resample_contexts and t > 1:
            arms = build_synthetic_arms(env.theta_star, K, d, context_rng)
        rec = play_round(agent, arms, env, t, noise_rng, agent_rng, cum, record_timing)
        records.append(rec)
        cum = rec.cum_regret
    return records


def make_agent(kind: str, params: HyperParams, env_kind: str, rng=None, audit=None, **overrides):
    """Factory keyed by the public agent names."""
    if kind == "vits1":
        return VitsAgent(params, env_kind, Mode.VITS1, rng=rng, audit=audit, **overrides)
    if kind == "vits2":
        return VitsAgent(params, env_kind, Mode.VITS2, rng=rng, audit=audit, **overrides)
    if kind == "lints":
        return LinTSAgent(params)
    if kind == "lmcts":
        return LmcTSAgent(params, env_kind, **overrides)
    if kind == "uniform":
        return UniformAgent()
    raise ValidationError(f"unknown agent kind {kind!r}; expected one of {AGENT_KINDS}")
