"""Experiment orchestration: the cartesian run matrix, per-run training with
streamed logs, and the sweep manifest.

A sweep is the product of targets x {adaptation on, off} x seeds. Each run
owns a directory under <out>/runs/<run_id>/ holding episodes.csv,
adaptation.csv, metrics.csv, checkpoint.npz, and run.json. The manifest at
<out>/manifest.json records the config hash and per-run status and is
rewritten atomically after every run, so an interrupted sweep can be resumed
with the completed runs skipped.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .config import ExperimentConfig, config_sha256, config_to_dict
from .env import ReachEnv
from .ppo import load_checkpoint, train
from .records import (
    ADAPTATION_COLUMNS,
    EPISODE_COLUMNS,
    METRICS_COLUMNS,
    CsvWriter,
    read_csv,
    run_id_for,
    write_adaptation_row,
    write_episode_row,
    write_run_meta,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunPlan:
    run_id: str
    seed: int
    target_index: int
    adaptation_enabled: bool


@dataclass
class RunOutcome:
    run_id: str
    status: str  # completed | failed
    episodes_done: int
    wall_clock_seconds: float
    error: str | None = None


def plan_runs(config: ExperimentConfig) -> list[RunPlan]:
    plans = []
    for target in config.targets:
        for adaptation in (True, False):
            for seed in config.seeds:
                plans.append(RunPlan(
                    run_id=run_id_for(target, adaptation, seed),
                    seed=seed,
                    target_index=target,
                    adaptation_enabled=adaptation,
                ))
    return plans


def build_env(config: ExperimentConfig, adaptation_enabled: bool) -> ReachEnv:
    adapt = dataclasses.replace(config.adapt, adaptation_enabled=adaptation_enabled)
    return ReachEnv(config.lattice, adapt, config.reward, config.episode)


def _truncate_log(path: Path, columns: list[str], schema: str, episodes_done: int) -> None:
    """Drop rows past the checkpoint so a resumed run does not duplicate them."""
    if not path.exists():
        return
    _, rows = read_csv(path)
    kept = [r for r in rows if int(r[0]) < episodes_done]
    path.unlink()
    with CsvWriter(path, schema, columns) as writer:
        for r in kept:
            writer.write_row(r)


def _count_rows(path: Path) -> int:
    if not path.exists():
        return 0
    return len(read_csv(path)[1])


def run_single(config: ExperimentConfig, plan: RunPlan, runs_dir: str | Path) -> RunOutcome:
    """Train one run to completion, streaming logs per episode.

    If the run directory holds a checkpoint, training continues from it;
    otherwise any stale files are removed and the run starts fresh."""
    run_dir = Path(runs_dir) / plan.run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    checkpoint = run_dir / "checkpoint.npz"
    episodes_path = run_dir / "episodes.csv"
    adaptation_path = run_dir / "adaptation.csv"
    metrics_path = run_dir / "metrics.csv"

    meta = {
        "run_id": plan.run_id,
        "config_hash": config_sha256(config),
        "seed": plan.seed,
        "target_index": plan.target_index,
        "adaptation_enabled": plan.adaptation_enabled,
        "status": "running",
    }
    write_run_meta(run_dir, meta)

    start = time.monotonic()
    try:
        env = build_env(config, plan.adaptation_enabled)
        train_config = dataclasses.replace(config.train, seed=plan.seed)
        learner = None
        if checkpoint.exists():
            learner = load_checkpoint(checkpoint, train_config, env=env)
            _truncate_log(episodes_path, EPISODE_COLUMNS, "episodes", learner.episodes_done)
            _truncate_log(adaptation_path, ADAPTATION_COLUMNS, "adaptation",
                          learner.episodes_done)
            logger.info("%s: resuming at episode %d", plan.run_id, learner.episodes_done)
        else:
            for stale in (episodes_path, adaptation_path, metrics_path):
                stale.unlink(missing_ok=True)

        with CsvWriter(episodes_path, "episodes", EPISODE_COLUMNS) as ep_writer, \
                CsvWriter(adaptation_path, "adaptation", ADAPTATION_COLUMNS) as ad_writer:

            def drain(_row) -> None:
                for record in env.episode_log:
                    write_episode_row(ep_writer, record)
                env.episode_log.clear()
                for record in env.adaptation_log:
                    write_adaptation_row(ad_writer, record)
                env.adaptation_log.clear()

            result = train(
                env, train_config,
                target_index=plan.target_index,
                learner=learner,
                checkpoint_path=checkpoint,
                checkpoint_every=config.log_cadence,
                episode_callback=drain,
            )

        offset = _count_rows(metrics_path)
        with CsvWriter(metrics_path, "metrics", METRICS_COLUMNS) as writer:
            for i, m in enumerate(result.metrics):
                writer.write_row([
                    offset + i, m.policy_loss, m.value_loss, m.entropy,
                    m.clip_fraction, m.approx_kl, m.skipped_minibatches,
                ])

        elapsed = time.monotonic() - start
        meta.update(status="completed", wall_clock_seconds=elapsed,
                    episodes_done=result.learner.episodes_done)
        write_run_meta(run_dir, meta)
        return RunOutcome(plan.run_id, "completed", result.learner.episodes_done, elapsed)
    except Exception as exc:  # noqa: BLE001 - a failed run must not kill the sweep
        elapsed = time.monotonic() - start
        meta.update(status="failed", wall_clock_seconds=elapsed, error=str(exc))
        write_run_meta(run_dir, meta)
        logger.error("%s failed: %s", plan.run_id, exc)
        logger.debug("%s", traceback.format_exc())
        return RunOutcome(plan.run_id, "failed", 0, elapsed, error=str(exc))


def _write_manifest(out_dir: Path, manifest: dict) -> None:
    tmp = out_dir / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    tmp.replace(out_dir / "manifest.json")


def _run_is_complete(runs_dir: Path, run_id: str, total_episodes: int) -> bool:
    """True when the run finished and already covers the requested episode
    count; a completed run resumed with a higher total continues instead."""
    meta_path = runs_dir / run_id / "run.json"
    if not meta_path.exists():
        return False
    meta = json.loads(meta_path.read_text())
    return (meta.get("status") == "completed"
            and meta.get("episodes_done", 0) >= total_episodes)


def run_sweep(
    config: ExperimentConfig,
    out_dir: str | Path,
    workers: int = 1,
    resume: bool = False,
) -> dict:
    """Execute the full run matrix; returns the final manifest.

    With resume=True, completed runs are skipped and interrupted ones
    continue from their checkpoints; the stored config hash must match. A
    failing run is marked failed and the rest of the sweep continues."""
    out_dir = Path(out_dir)
    runs_dir = out_dir / "runs"
    config_hash = config_sha256(config)
    plans = plan_runs(config)

    manifest_path = out_dir / "manifest.json"
    if manifest_path.exists():
        previous = json.loads(manifest_path.read_text())
        if previous.get("config_hash") != config_hash:
            raise ValueError(
                f"{out_dir} holds a sweep with config hash "
                f"{previous.get('config_hash')}; refusing to mix configs"
            )
        if not resume:
            raise ValueError(
                f"{out_dir} already contains this sweep; pass resume to continue"
            )
    runs_dir.mkdir(parents=True, exist_ok=True)

    manifest = {
        "config_hash": config_hash,
        "config": config_to_dict(config),
        "runs": {p.run_id: {"status": "pending"} for p in plans},
    }

    todo = []
    for plan in plans:
        if resume and _run_is_complete(runs_dir, plan.run_id, config.train.total_episodes):
            manifest["runs"][plan.run_id] = {"status": "completed", "skipped": True}
            logger.info("%s already completed; skipping", plan.run_id)
        else:
            todo.append(plan)
    _write_manifest(out_dir, manifest)

    def record(outcome: RunOutcome) -> None:
        manifest["runs"][outcome.run_id] = {
            "status": outcome.status,
            "episodes_done": outcome.episodes_done,
            "wall_clock_seconds": outcome.wall_clock_seconds,
            **({"error": outcome.error} if outcome.error else {}),
        }
        _write_manifest(out_dir, manifest)

    if workers <= 1:
        for plan in todo:
            record(run_single(config, plan, runs_dir))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(plan, pool.submit(run_single, config, plan, runs_dir))
                       for plan in todo]
            for plan, future in futures:
                try:
                    outcome = future.result()
                except Exception as exc:  # worker process died
                    outcome = RunOutcome(plan.run_id, "failed", 0, 0.0, error=str(exc))
                record(outcome)
    return manifest
