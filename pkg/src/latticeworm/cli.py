"""Command-line entry point.

Subcommands:
  describe  print the resolved configuration, its hash, and the run matrix
  train     execute a single (seed, target, adaptation) run
  sweep     execute the full run matrix, optionally in parallel
  report    emit reward curves, bars, traces, and heatmaps from a sweep
  replay    run one deterministic episode from a checkpoint and dump it

Exit codes: 0 on success, 1 on configuration errors, 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .config import ExperimentConfig, config_sha256, config_to_dict, load_config
from .lattice import build_lattice
from .ppo import load_checkpoint
from .records import load_run, run_id_for
from .reporting import (
    emit_activation_heatmap,
    emit_adaptation_traces,
    emit_max_reward_bars,
    emit_reward_curves,
    replay_episode,
)
from .sweep import RunPlan, build_env, plan_runs, run_single, run_sweep

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latticeworm",
        description="Train and analyze the adaptive lattice worm.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", required=True, help="experiment config JSON")
        if out:
            p.add_argument("--out", default=None,
                           help="output directory (default: config output_dir)")

    p = sub.add_parser("describe", help="print the resolved configuration")
    common(p, out=False)

    p = sub.add_parser("train", help="run a single training run")
    common(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--target", type=int, default=None)
    p.add_argument("--adaptation", choices=["on", "off"], default="on")
    p.add_argument("--episodes", type=int, default=None,
                   help="override total episodes")

    p = sub.add_parser("sweep", help="run the full seed x target x arm matrix")
    common(p)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--resume", action="store_true",
                   help="skip completed runs, continue interrupted ones")

    p = sub.add_parser("report", help="emit figures and tables from a sweep")
    common(p)

    p = sub.add_parser("replay", help="deterministic episode from a checkpoint")
    common(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--target", type=int, default=None)
    p.add_argument("--adaptation", choices=["on", "off"], default="on")
    return parser


def _load(args) -> tuple[ExperimentConfig, Path]:
    config = load_config(args.config)
    if getattr(args, "episodes", None) is not None:
        config = dataclasses.replace(
            config, train=dataclasses.replace(config.train, total_episodes=args.episodes)
        )
    out = Path(args.out) if getattr(args, "out", None) else Path(config.output_dir)
    return config, out


def _plan_from_args(config: ExperimentConfig, args) -> RunPlan:
    seed = args.seed if args.seed is not None else config.seeds[0]
    target = args.target if args.target is not None else config.targets[0]
    if not 1 <= target <= 8:
        raise ValueError("target must be in 1..8")
    adaptation = args.adaptation == "on"
    return RunPlan(run_id_for(target, adaptation, seed),
                   seed=seed, target_index=target, adaptation_enabled=adaptation)


def cmd_describe(args) -> int:
    config, _ = _load(args)
    env = build_env(config, adaptation_enabled=True)
    info = {
        "config": config_to_dict(config),
        "config_hash": config_sha256(config),
        "n_muscles": env.n_muscles,
        "observation_size": env.layout().size,
        "substeps_per_control": env.sim_config.substeps_per_control,
        "dt": env.sim_config.dt,
        "targets": {
            str(i + 1): [round(float(v), 6) for v in t]
            for i, t in enumerate(env.targets)
        },
        "runs": [p.run_id for p in plan_runs(config)],
    }
    print(json.dumps(info, indent=2))
    return 0


def cmd_train(args) -> int:
    config, out = _load(args)
    plan = _plan_from_args(config, args)
    runs_dir = out / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    outcome = run_single(config, plan, runs_dir)
    print(f"{outcome.run_id}: {outcome.status}, {outcome.episodes_done} episodes, "
          f"{outcome.wall_clock_seconds:.1f}s")
    return 0 if outcome.status == "completed" else 2


def cmd_sweep(args) -> int:
    config, out = _load(args)
    manifest = run_sweep(config, out, workers=args.workers, resume=args.resume)
    failed = [rid for rid, r in manifest["runs"].items() if r["status"] == "failed"]
    for rid, r in sorted(manifest["runs"].items()):
        print(f"{rid}: {r['status']}")
    if failed:
        logger.error("%d run(s) failed: %s", len(failed), ", ".join(failed))
        return 2
    return 0


def cmd_report(args) -> int:
    config, out = _load(args)
    runs_dir = out / "runs"
    if not runs_dir.is_dir():
        raise ValueError(f"{runs_dir} does not exist; run a sweep first")
    expected = config_sha256(config)
    records = []
    for run_dir in sorted(runs_dir.iterdir()):
        if not (run_dir / "run.json").exists():
            continue
        record = load_run(run_dir)
        if record.config_hash != expected:
            raise ValueError(
                f"{run_dir.name} was produced by config {record.config_hash}, "
                f"not {expected}; refusing to report across configs"
            )
        record.validate()
        records.append(record)
    if not records:
        raise ValueError(f"no runs found under {runs_dir}")

    report_dir = out / "report"
    written = list(emit_reward_curves(records, report_dir))
    written += emit_max_reward_bars(records, report_dir)
    layouts = build_lattice(config.lattice).muscles
    for record in records:
        if record.status != "completed" or not record.adaptation:
            continue
        written += emit_adaptation_traces(
            record, report_dir, panels_per_row=config.lattice.n_columns
        )
        written += emit_activation_heatmap(
            record, layouts, report_dir, n_columns=config.lattice.n_columns
        )
    for path in written:
        print(path)
    return 0


def cmd_replay(args) -> int:
    config, out = _load(args)
    plan = _plan_from_args(config, args)
    run_dir = out / "runs" / plan.run_id
    checkpoint = run_dir / "checkpoint.npz"
    if not checkpoint.exists():
        raise ValueError(f"no checkpoint at {checkpoint}")
    meta = json.loads((run_dir / "run.json").read_text())
    expected = config_sha256(config)
    if meta.get("config_hash") != expected:
        raise ValueError(
            f"{plan.run_id} was trained with config {meta.get('config_hash')}, "
            f"not {expected}; refusing to replay"
        )
    env = build_env(config, plan.adaptation_enabled)
    train_config = dataclasses.replace(config.train, seed=plan.seed)
    learner = load_checkpoint(checkpoint, train_config, env=env)
    report_dir = out / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    result = replay_episode(
        env, learner, plan.target_index,
        report_dir / f"trajectory_{plan.run_id}.csv",
    )
    print(f"{result['path']}")
    print(f"final distance: {result['final_distance']:.6f} m after {result['steps']} steps")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "describe": cmd_describe,
        "train": cmd_train,
        "sweep": cmd_sweep,
        "report": cmd_report,
        "replay": cmd_replay,
    }
    try:
        return handlers[args.command](args)
    except ValueError as exc:
        logger.error("%s", exc)
        return 1
    except (OSError, RuntimeError) as exc:
        logger.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
