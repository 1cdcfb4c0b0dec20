from pathlib import Path

import pytest

from vitsim.cli import main as cli_main
from vitsim.config import AgentSpec, ExperimentConfig, serialize_config
from vitsim.runner import (
    DIAG_HEADER,
    ROUNDS_HEADER,
    SUMMARY_HEADER,
    aggregate,
    rounds_csv_name,
    run_diagnostics,
    run_experiment,
    write_rounds_csv,
)
from vitsim.simulate import RoundRecord


def tiny_config(tmp_path, **kwargs):
    defaults = dict(
        d=4,
        K=4,
        T=15,
        seeds=(0, 1),
        out_dir=str(tmp_path / "out"),
        agents=(
            AgentSpec(name="uniform", kind="uniform"),
            AgentSpec(name="lints", kind="lints"),
        ),
        eta_override=1.0,
    )
    defaults.update(kwargs)
    return ExperimentConfig(**defaults)


def read(path):
    return Path(path).read_bytes()


def test_uniform_run_writes_expected_rounds(tmp_path):
    config = tiny_config(tmp_path, T=10, seeds=(0,), agents=(AgentSpec(name="uniform", kind="uniform"),))
    assert run_experiment(config, parallelism=1) == 0
    out = Path(config.out_dir)
    lines = (out / "rounds_uniform_0.csv").read_text().splitlines()
    assert lines[0] == ROUNDS_HEADER
    assert len(lines) == 11
    cums = [float(l.split(",")[4]) for l in lines[1:]]
    assert all(b >= a for a, b in zip(cums, cums[1:]))
    assert (out / "summary.csv").read_text().splitlines()[0] == SUMMARY_HEADER
    assert (out / "run_meta.toml").exists()


def test_repeated_runs_are_byte_identical(tmp_path):
    config = tiny_config(tmp_path)
    run_experiment(config, out_dir=tmp_path / "a", parallelism=1)
    run_experiment(config, out_dir=tmp_path / "b", parallelism=2)
    for spec in config.agents:
        for seed in config.seeds:
            name = rounds_csv_name(spec.name, seed)
            assert read(tmp_path / "a" / name) == read(tmp_path / "b" / name)
    assert read(tmp_path / "a" / "summary.csv") == read(tmp_path / "b" / "summary.csv")


def test_removing_a_cell_leaves_others_untouched(tmp_path):
    full = tiny_config(tmp_path)
    only_lints = tiny_config(tmp_path, agents=(AgentSpec(name="lints", kind="lints"),))
    run_experiment(full, out_dir=tmp_path / "full", parallelism=1)
    run_experiment(only_lints, out_dir=tmp_path / "part", parallelism=1)
    for seed in full.seeds:
        name = rounds_csv_name("lints", seed)
        assert read(tmp_path / "full" / name) == read(tmp_path / "part" / name)


def test_seed_offset_shifts_all_cells(tmp_path):
    config = tiny_config(tmp_path, seeds=(0, 1))
    run_experiment(config, out_dir=tmp_path / "base", parallelism=1)
    shifted = tiny_config(tmp_path, seeds=(5, 6))
    run_experiment(shifted, out_dir=tmp_path / "explicit", parallelism=1)
    run_experiment(config, out_dir=tmp_path / "offset", parallelism=1, seed_offset=5)
    for seed in (5, 6):
        name = rounds_csv_name("lints", seed)
        assert read(tmp_path / "offset" / name) == read(tmp_path / "explicit" / name)


def test_aggregate_single_seed_has_zero_stderr(tmp_path):
    records = [RoundRecord(t, 0, 1.0, 0.5, 0.5 * t, 0) for t in range(1, 4)]
    path = tmp_path / "rounds_solo_0.csv"
    write_rounds_csv(path, records)
    rows = aggregate([path])
    assert all(r.stderr_cum_regret == 0.0 and r.n_seeds == 1 for r in rows)


def test_aggregate_two_seeds_mean_and_stderr(tmp_path):
    for seed, cum in ((0, 1.0), (1, 3.0)):
        write_rounds_csv(
            tmp_path / f"rounds_agent_{seed}.csv",
            [RoundRecord(1, 0, 0.0, cum, cum, 0)],
        )
    (row,) = aggregate(sorted(tmp_path.glob("rounds_agent_*.csv")))
    assert row.mean_cum_regret == pytest.approx(2.0)
    # sample std sqrt(2), over sqrt(2) seeds
    assert row.stderr_cum_regret == pytest.approx(1.0)
    assert row.n_seeds == 2


def test_aggregate_is_seed_order_invariant(tmp_path):
    paths = []
    for seed in (3, 1, 2):
        p = tmp_path / f"rounds_x_{seed}.csv"
        write_rounds_csv(p, [RoundRecord(1, 0, 0.0, float(seed), float(seed), 0)])
        paths.append(p)
    assert aggregate(paths) == aggregate(list(reversed(paths)))


def test_aggregate_rejects_ragged_inputs(tmp_path):
    write_rounds_csv(tmp_path / "rounds_a_0.csv", [RoundRecord(1, 0, 0.0, 1.0, 1.0, 0)])
    write_rounds_csv(
        tmp_path / "rounds_a_1.csv",
        [RoundRecord(t, 0, 0.0, 1.0, float(t), 0) for t in (1, 2)],
    )
    from vitsim import ValidationError

    with pytest.raises(ValidationError):
        aggregate(sorted(tmp_path.glob("rounds_a_*.csv")))


def test_reals_are_printed_with_17_significant_digits(tmp_path):
    third = 1.0 / 3.0
    write_rounds_csv(
        tmp_path / "rounds_pi_0.csv", [RoundRecord(1, 0, third, third, third, 0)]
    )
    line = (tmp_path / "rounds_pi_0.csv").read_text().splitlines()[1]
    assert line.split(",")[2] == "0.33333333333333331"
    assert float(line.split(",")[4]) == third  # lossless round trip


def test_diverging_cell_is_recorded_and_grid_continues(tmp_path):
    config = tiny_config(
        tmp_path,
        agents=(
            AgentSpec(name="lmcts", kind="lmcts", h_lmc=1e8, K_lmc=50),
            AgentSpec(name="uniform", kind="uniform"),
        ),
    )
    assert run_experiment(config, parallelism=1) == 1
    out = Path(config.out_dir)
    meta = (out / "run_meta.toml").read_text()
    assert "DivergenceError" in meta
    for seed in config.seeds:
        assert (out / rounds_csv_name("uniform", seed)).exists()
        assert not (out / rounds_csv_name("lmcts", seed)).exists()


def test_per_run_diagnostics_written_and_green(tmp_path):
    config = tiny_config(
        tmp_path,
        T=25,
        seeds=(0,),
        diagnostics=True,
        agents=(AgentSpec(name="vits1", kind="vits1", K_override=10),),
    )
    assert run_experiment(config, parallelism=1) == 0
    lines = (Path(config.out_dir) / "diagnostics.csv").read_text().splitlines()
    assert lines[0] == DIAG_HEADER
    assert len(lines) == 3  # psd_floor + contraction for the one cell
    assert all(line.endswith(",true") for line in lines[1:])


def test_battery_passes_and_fault_injection_fails(tmp_path):
    config = ExperimentConfig(out_dir=str(tmp_path / "diag"), eta_override=1.0)
    assert run_diagnostics(config) == 0
    bad = ExperimentConfig(
        out_dir=str(tmp_path / "diag_bad"),
        eta_override=1.0,
        diag_checks=("psd_floor", "contraction"),
    )
    assert run_diagnostics(bad, h_scale=10.0) == 1


def test_empty_battery_selection_passes(tmp_path):
    config = ExperimentConfig(out_dir=str(tmp_path / "diag"), diag_checks=())
    assert run_diagnostics(config) == 0
    lines = (Path(config.out_dir) / "diagnostics.csv").read_text().splitlines()
    assert lines == [DIAG_HEADER]


def test_cli_round_trip(tmp_path):
    config = tiny_config(tmp_path, T=8, seeds=(0,))
    cfg_path = tmp_path / "exp.toml"
    cfg_path.write_text(serialize_config(config))
    assert cli_main(["run", str(cfg_path), "--parallelism", "1"]) == 0
    summary = Path(config.out_dir) / "summary.csv"
    assert summary.exists()

    image = tmp_path / "regret.png"
    assert cli_main(["plot", str(summary), str(image)]) == 0
    assert image.stat().st_size > 0

    assert cli_main(["diagnose", str(cfg_path), "--out-dir", str(tmp_path / "d")]) == 0


def test_cli_reports_config_errors(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("T = 0")
    assert cli_main(["run", str(bad)]) == 2


def test_timing_flag_records_wall_time(tmp_path):
    config = tiny_config(tmp_path, T=5, seeds=(0,), record_timing=True,
                         agents=(AgentSpec(name="lints", kind="lints"),))
    run_experiment(config, parallelism=1)
    lines = (Path(config.out_dir) / "rounds_lints_0.csv").read_text().splitlines()
    elapsed = [int(l.split(",")[5]) for l in lines[1:]]
    assert all(e > 0 for e in elapsed)


def test_gaussian_mean_init_through_config(tmp_path):
    config = tiny_config(
        tmp_path,
        T=10,
        seeds=(0,),
        agents=(AgentSpec(name="vits1", kind="vits1", K_override=8, mean_init_mode="gaussian"),),
    )
    assert run_experiment(config, parallelism=1) == 0


def test_context_resampling_through_config(tmp_path):
    fixed = tiny_config(
        tmp_path, T=20, seeds=(0,),
        agents=(AgentSpec(name="lints", kind="lints"),),
    )
    moving = tiny_config(
        tmp_path, T=20, seeds=(0,),
        agents=(AgentSpec(name="lints", kind="lints", resample_contexts=True),),
    )
    run_experiment(fixed, out_dir=tmp_path / "fixed", parallelism=1)
    run_experiment(moving, out_dir=tmp_path / "moving", parallelism=1)
    a = (tmp_path / "fixed" / "rounds_lints_0.csv").read_bytes()
    b = (tmp_path / "moving" / "rounds_lints_0.csv").read_bytes()
    assert a != b  # fresh arm sets each round change the trajectory
