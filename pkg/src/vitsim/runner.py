"""Experiment grid execution, CSV output, aggregation, diagnostics battery.

One (agent, seed) grid cell is one self-contained simulation: it derives its
own random streams, so cells can run in any order, in parallel, or be removed
from the grid without disturbing any other cell's output.  All agents facing
the same seed see the identical arm set and reward-noise realizations, which
makes cross-agent comparisons paired rather than independent.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import AgentSpec, ExperimentConfig, serialize_config
from .diagnostics import (
    DiagnosticReport,
    LinearTrajectoryAuditor,
    geodesic_step_check,
    make_report,
    stein_identity_check,
)
from .engine import Mode, Schedule, compute_schedule, init_state, sample_state, update_posterior
from .envs import build_synthetic_arms, random_environment, select_arm
from .errors import DivergenceError, NumericsError, ValidationError
from .loops import active_backend
from .params import HyperParams
from .potentials import LinearPotential
from .simulate import make_agent, run_bandit
from .stats import SufficientStats, sherman_morrison_update

log = logging.getLogger("vitsim")

ROUNDS_HEADER = "t,arm,reward,inst_regret,cum_regret,elapsed_ns"
SUMMARY_HEADER = "agent,t,mean_cum_regret,stderr_cum_regret,n_seeds"
DIAG_HEADER = "scope,name,rounds_checked,worst_violation,tolerance,passed"

BATTERY_DIMS = (1, 3, 5, 10)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class SummaryRow:
    agent: str
    t: int
    mean_cum_regret: float
    stderr_cum_regret: float
    n_seeds: int


def _cell_rngs(seed: int, agent_name: str):
    """Independent sub-streams for one grid cell.

    Environment and reward-noise streams depend only on the seed, so every
    agent sees the same instance; the agent stream also keys on the agent
    name (stably hashed, not positional, to keep cells independent of the
    grid composition).
    """
    name_key = int.from_bytes(hashlib.sha256(agent_name.encode()).digest()[:8], "little")
    env_rng = np.random.default_rng(np.random.SeedSequence([seed, 101]))
    noise_rng = np.random.default_rng(np.random.SeedSequence([seed, 202]))
    agent_rng = np.random.default_rng(np.random.SeedSequence([seed, 303, name_key]))
    context_rng = np.random.default_rng(np.random.SeedSequence([seed, 404]))
    return env_rng, noise_rng, agent_rng, context_rng


def _agent_overrides(spec: AgentSpec) -> dict:
    if spec.kind in ("vits1", "vits2"):
        return {
            "k_scale": spec.k_scale,
            "h_override": spec.h_override,
            "K_override": spec.K_override,
            "h_scale": spec.h_scale,
        }
    if spec.kind == "lmcts":
        return {"h_lmc": spec.h_lmc, "K_lmc": spec.K_lmc}
    return {}


def run_cell(config: ExperimentConfig, spec: AgentSpec, seed: int):
    """One deterministic (agent, seed) simulation.

    Returns ``(records, reports)`` where ``reports`` holds the per-run
    diagnostic audits (empty unless enabled and applicable).
    """
    hp = HyperParams(
        d=config.d,
        T=config.T,
        lam=config.lam,
        R=config.R,
        eta=config.eta_override,
        mean_init_mode=spec.mean_init_mode,
    )
    env_rng, noise_rng, agent_rng, context_rng = _cell_rngs(seed, spec.name)
    env = random_environment(config.d, config.env_kind, env_rng, config.noise_std)
    arms = build_synthetic_arms(env.theta_star, config.K, config.d, env_rng)

    audit = None
    if config.diagnostics and spec.kind == "vits1" and config.env_kind == "linear_gaussian":
        audit = LinearTrajectoryAuditor(hp.eta)
    agent = make_agent(
        spec.kind, hp, config.env_kind, rng=agent_rng, audit=audit, **_agent_overrides(spec)
    )
    records = run_bandit(
        agent,
        env,
        arms,
        config.T,
        noise_rng,
        agent_rng,
        record_timing=config.record_timing,
        resample_contexts=spec.resample_contexts,
        context_rng=context_rng,
    )
    reports = audit.reports() if audit is not None else []
    return records, reports


def write_rounds_csv(path, records) -> None:
    with open(path, "w", newline="") as f:
        f.write(ROUNDS_HEADER + "\n")
        for r in records:
            f.write(
                f"{r.t},{r.arm},{_fmt(r.reward)},{_fmt(r.inst_regret)},"
                f"{_fmt(r.cum_regret)},{r.elapsed_ns}\n"
            )


def rounds_csv_name(agent: str, seed: int) -> str:
    return f"rounds_{agent}_{seed}.csv"


def _parse_rounds_name(path: Path):
    stem = path.stem
    if not stem.startswith("rounds_"):
        raise ValidationError(f"{path} is not a rounds CSV")
    agent, _, seed = stem[len("rounds_"):].rpartition("_")
    return agent, int(seed)


def read_cum_regret(path) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != ROUNDS_HEADER:
        raise ValidationError(f"{path} has an unexpected header")
    return np.array([float(line.split(",")[4]) for line in lines[1:]])


def aggregate(round_csvs) -> list[SummaryRow]:
    """Per-(agent, round) mean and standard error of cumulative regret.

    All inputs must share the horizon; a single seed reports stderr 0 by
    convention.
    """
    by_agent: dict[str, list[np.ndarray]] = {}
    horizon = None
    for path in sorted(Path(p) for p in round_csvs):
        agent, _ = _parse_rounds_name(path)
        curve = read_cum_regret(path)
        if horizon is None:
            horizon = len(curve)
        elif len(curve) != horizon:
            raise ValidationError(
                f"{path} has {len(curve)} rounds, expected {horizon}: ragged inputs"
            )
        by_agent.setdefault(agent, []).append(curve)
    rows = []
    for agent in sorted(by_agent):
        curves = np.stack(by_agent[agent])
        n = curves.shape[0]
        mean = curves.mean(axis=0)
        stderr = curves.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(curves.shape[1])
        for t in range(curves.shape[1]):
            rows.append(
                SummaryRow(
                    agent=agent,
                    t=t + 1,
                    mean_cum_regret=float(mean[t]),
                    stderr_cum_regret=float(stderr[t]),
                    n_seeds=n,
                )
            )
    return rows


def write_summary_csv(path, rows) -> None:
    with open(path, "w", newline="") as f:
        f.write(SUMMARY_HEADER + "\n")
        for r in rows:
            f.write(
                f"{r.agent},{r.t},{_fmt(r.mean_cum_regret)},"
                f"{_fmt(r.stderr_cum_regret)},{r.n_seeds}\n"
            )


def write_diagnostics_csv(path, scoped_reports) -> None:
    with open(path, "w", newline="") as f:
        f.write(DIAG_HEADER + "\n")
        for scope, rep in scoped_reports:
            f.write(
                f"{scope},{rep.name},{rep.rounds_checked},{_fmt(rep.worst_violation)},"
                f"{_fmt(rep.tolerance)},{str(rep.passed).lower()}\n"
            )


def _meta_text(config, eta, wall_time_s, statuses) -> str:
    failed = [f'"{name}/{seed}: {err}"' for name, seed, err in statuses if err]
    lines = [
        "[meta]",
        f'version = "{__version__}"',
        f'backend = "{active_backend()}"',
        f"resolved_eta = {repr(float(eta))}",
        f"wall_time_s = {repr(float(wall_time_s))}",
        f"cells_total = {len(statuses)}",
        "cells_failed = [" + ", ".join(failed) + "]",
        "",
        "[config]",
    ]
    body = serialize_config(config).replace("[agents.", "[config.agents.")
    return "\n".join(lines) + "\n" + body


def _cell_worker(args):
    config, spec, seed, out_dir = args
    try:
        records, reports = run_cell(config, spec, seed)
    except (DivergenceError, NumericsError, ValidationError) as exc:
        return spec.name, seed, f"{type(exc).__name__}: {exc}", []
    write_rounds_csv(Path(out_dir) / rounds_csv_name(spec.name, seed), records)
    return spec.name, seed, None, reports


def run_experiment(
    config: ExperimentConfig,
    out_dir=None,
    parallelism: int | None = None,
    seed_offset: int = 0,
) -> int:
    """Run the (agent x seed) grid and write all output files.

    Returns 0 only if every cell completed and, when per-run diagnostics are
    enabled, every audit passed.  A diverged cell is recorded in the run
    metadata and the rest of the grid still runs.
    """
    t_start = time.perf_counter()
    out = Path(out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = [spec.name for spec in config.agents]
    if len(set(names)) != len(names):
        raise ValidationError("agent names must be distinct")
    seeds = [s + seed_offset for s in config.seeds]
    cells = [(config, spec, seed, str(out)) for spec in config.agents for seed in seeds]

    if parallelism is None:
        parallelism = os.cpu_count() or 1
    if parallelism > 1 and len(cells) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_cell_worker, cells))
    else:
        results = [_cell_worker(c) for c in cells]

    statuses = [(name, seed, err) for name, seed, err, _ in results]
    for name, seed, err, _ in results:
        if err:
            log.error("cell %s/%s failed: %s", name, seed, err)

    ok_paths = [
        out / rounds_csv_name(name, seed) for name, seed, err, _ in results if err is None
    ]
    if ok_paths:
        write_summary_csv(out / "summary.csv", aggregate(ok_paths))

    diag_failed = False
    if config.diagnostics:
        scoped = []
        for name, seed, err, reports in results:
            for rep in reports:
                scoped.append((f"{name}/{seed}", rep))
                diag_failed |= not rep.passed
        write_diagnostics_csv(out / "diagnostics.csv", scoped)

    hp = HyperParams(d=config.d, T=config.T, lam=config.lam, R=config.R, eta=config.eta_override)
    meta = _meta_text(config, hp.eta, time.perf_counter() - t_start, statuses)
    (out / "run_meta.toml").write_text(meta)

    any_failed = any(err for _, _, err in statuses)
    return 1 if (any_failed or diag_failed) else 0


# ---------------------------------------------------------------------------
# Standalone diagnostics battery


def _random_stats(d: int, lam: float, n_updates: int, rng) -> SufficientStats:
    stats = SufficientStats(d, lam)
    for _ in range(n_updates):
        phi = rng.standard_normal(d)
        phi /= np.linalg.norm(phi)
        sherman_morrison_update(stats, phi, float(rng.standard_normal()))
    return stats


def _check_sherman_morrison(d, hp, rng) -> DiagnosticReport:
    stats = SufficientStats(d, hp.lam)
    worst = 0.0
    for _ in range(200):
        phi = rng.standard_normal(d)
        phi /= np.linalg.norm(phi)
        sherman_morrison_update(stats, phi, float(rng.standard_normal()))
        gap = float(np.linalg.norm(stats.V_inv - np.linalg.inv(stats.V)))
        worst = max(worst, gap)
    return make_report("sherman_morrison", 200, worst, 1e-9)


def _check_fixed_point(d, hp, rng) -> DiagnosticReport:
    stats = _random_stats(d, hp.lam, 2 * d, rng)
    potential = LinearPotential(stats, hp.eta)
    w, U = np.linalg.eigh(hp.eta * stats.V)
    B0 = (U / np.sqrt(w)) @ U.T
    mu0 = stats.V_inv @ stats.b
    state = init_state(hp, Mode.EXACT)
    state.mu, state.B = mu0, B0
    sched = compute_schedule(stats, hp, K_override=1)
    stepped = update_posterior(state, potential, sched)
    worst = max(
        float(np.max(np.abs(stepped.mu - mu0))), float(np.max(np.abs(stepped.B - B0)))
    )
    return make_report("fixed_point", 1, worst, 1e-12)


def _check_stein(d, hp, rng) -> DiagnosticReport:
    stats = _random_stats(d, hp.lam, 2 * d, rng)
    potential = LinearPotential(stats, hp.eta)
    w, U = np.linalg.eigh(hp.eta * stats.V)
    B0 = (U / np.sqrt(w)) @ U.T
    state = init_state(hp, Mode.VITS1)
    state.mu = stats.V_inv @ stats.b + 0.1 * rng.standard_normal(d)
    state.B = B0
    return stein_identity_check(state, potential, 100_000, rng)


def _check_geodesic(d, hp, rng) -> DiagnosticReport:
    stats = _random_stats(d, hp.lam, 2 * d, rng)
    potential = LinearPotential(stats, hp.eta)
    state = init_state(hp, Mode.EXACT)
    state.mu = rng.standard_normal(d)
    sched = compute_schedule(stats, hp, K_override=1)
    return geodesic_step_check(state, potential, sched.h)


def _trajectory_reports(d, hp, rng, n_rounds=40, k_inner=12, h_scale=1.0):
    """Short linear VITS1 bandit run with per-inner-step audits."""
    stats = SufficientStats(d, hp.lam)
    potential = LinearPotential(stats, hp.eta)
    state = init_state(hp, Mode.VITS1)
    audit = LinearTrajectoryAuditor(hp.eta)
    theta_star = rng.standard_normal(d)
    theta_star /= np.linalg.norm(theta_star)
    arms = build_synthetic_arms(theta_star, max(3, min(d, 6)), d, rng)
    for _ in range(n_rounds):
        theta = sample_state(state, rng)
        arm = select_arm(theta, arms)
        phi = arms.features[arm]
        reward = float(phi @ theta_star + rng.standard_normal())
        sherman_morrison_update(stats, phi, reward)
        lmin, lmax = stats.lambda_min, stats.lambda_max
        h = h_scale * lmin / (2.0 * hp.eta * (lmin**2 + 2.0 * lmax**2))
        sched = Schedule(h=h, K=k_inner)
        audit.begin_update(stats, sched, state)
        state = update_posterior(state, potential, sched, rng, step_hook=audit.step)
    return audit.reports()


def run_diagnostic_battery(config: ExperimentConfig, h_scale: float = 1.0):
    """Run the selected checks at each battery dimension.

    ``h_scale`` rescales the trajectory step size; anything but 1 is a fault
    injection used to prove the audits can fail.
    Returns ``[(scope, DiagnosticReport), ...]``.
    """
    scoped = []
    for d in BATTERY_DIMS:
        hp = HyperParams(d=d, T=100, lam=config.lam, R=config.R, eta=config.eta_override)
        rng = np.random.default_rng(np.random.SeedSequence([d, 777]))
        for check in config.diag_checks:
            if check == "sherman_morrison":
                reports = [_check_sherman_morrison(d, hp, rng)]
            elif check == "fixed_point":
                reports = [_check_fixed_point(d, hp, rng)]
            elif check == "stein":
                reports = [_check_stein(d, hp, rng)]
            elif check == "geodesic":
                reports = [_check_geodesic(d, hp, rng)]
            elif check == "psd_floor":
                reports = [_trajectory_reports(d, hp, rng, h_scale=h_scale)[0]]
            elif check == "contraction":
                reports = [_trajectory_reports(d, hp, rng, h_scale=h_scale)[1]]
            else:
                raise ValidationError(f"unknown diagnostic check {check!r}")
            scoped.extend((f"d={d}", rep) for rep in reports)
    return scoped


def run_diagnostics(config: ExperimentConfig, out_dir=None, h_scale: float = 1.0) -> int:
    """Execute the battery, write diagnostics.csv, print one line per check.

    Returns 0 only if every selected check passed (an empty selection passes
    trivially).
    """
    out = Path(out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scoped = run_diagnostic_battery(config, h_scale=h_scale)
    write_diagnostics_csv(out / "diagnostics.csv", scoped)
    all_ok = True
    for scope, rep in scoped:
        status = "pass" if rep.passed else "FAIL"
        print(
            f"{status}  {scope:6s} {rep.name:18s} worst={rep.worst_violation:.3e} "
            f"tol={rep.tolerance:.1e} (n={rep.rounds_checked})"
        )
        all_ok &= rep.passed
    return 0 if all_ok else 1
