"""Command-line entry point: ``run``, ``diagnose`` and ``plot`` subcommands."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import load_config
from .errors import ValidationError
from .loops import active_backend
from .runner import SUMMARY_HEADER, run_diagnostics, run_experiment

log = logging.getLogger("vitsim")


class _Formatter(logging.Formatter):
    COLORS = {"WARNING": "\x1b[33m", "ERROR": "\x1b[31m", "INFO": "\x1b[36m"}

    def __init__(self, color: bool):
        super().__init__("%(levelname)s %(name)s: %(message)s")
        self.color = color

    def format(self, record):
        text = super().format(record)
        if self.color and record.levelname in self.COLORS:
            return f"{self.COLORS[record.levelname]}{text}\x1b[0m"
        return text


def _setup_logging() -> None:
    color = sys.stderr.isatty() and not os.environ.get("NO_COLOR")
    handler = logging.StreamHandler()
    handler.setFormatter(_Formatter(color))
    logging.basicConfig(level=logging.INFO, handlers=[handler])


def _cmd_run(args) -> int:
    config = load_config(args.config)
    log.info("backend: %s", active_backend())
    return run_experiment(
        config,
        out_dir=args.out_dir,
        parallelism=args.parallelism,
        seed_offset=args.seed_offset,
    )


def _cmd_diagnose(args) -> int:
    config = load_config(args.config)
    return run_diagnostics(config, out_dir=args.out_dir)


def _cmd_plot(args) -> int:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("plotting needs matplotlib (install the 'plot' extra); summary CSV is the contract")
        return 3

    lines = Path(args.summary).read_text().splitlines()
    if not lines or lines[0] != SUMMARY_HEADER:
        raise ValidationError(f"{args.summary} does not look like a summary CSV")
    curves: dict[str, list[tuple[int, float, float]]] = {}
    for line in lines[1:]:
        agent, t, mean, stderr, _ = line.split(",")
        curves.setdefault(agent, []).append((int(t), float(mean), float(stderr)))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for agent in sorted(curves):
        pts = sorted(curves[agent])
        ts = [p[0] for p in pts]
        means = [p[1] for p in pts]
        los = [p[1] - p[2] for p in pts]
        his = [p[1] + p[2] for p in pts]
        ax.plot(ts, means, label=agent)
        ax.fill_between(ts, los, his, alpha=0.2)
    ax.set_xlabel("round")
    ax.set_ylabel("cumulative regret")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out_image, dpi=150)
    log.info("wrote %s", args.out_image)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vitsim")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the (agent x seed) experiment grid")
    p_run.add_argument("config", help="path to the TOML experiment config")
    p_run.add_argument("--out-dir", default=None, help="override the config's output directory")
    p_run.add_argument("--parallelism", type=int, default=None, help="worker count (default: CPUs)")
    p_run.add_argument("--seed-offset", type=int, default=0, help="shift every configured seed")
    p_run.set_defaults(func=_cmd_run)

    p_diag = sub.add_parser("diagnose", help="run the numerical diagnostics battery")
    p_diag.add_argument("config", help="path to the TOML experiment config")
    p_diag.add_argument("--out-dir", default=None)
    p_diag.set_defaults(func=_cmd_diagnose)

    p_plot = sub.add_parser("plot", help="render a summary CSV to an image")
    p_plot.add_argument("summary", help="path to summary.csv")
    p_plot.add_argument("out_image", help="output image path")
    p_plot.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
