"""Run records on disk: versioned CSV files plus a small JSON sidecar.

Every run directory contains
    episodes.csv    one row per episode (return, max step reward, distance, stability)
    adaptation.csv  one row per episode per muscle (ceiling, force, activation)
    metrics.csv     one row per learner update (losses, clip fraction, KL)
    run.json        identity and status (run id, config hash, seed, target, arm)
    checkpoint.npz  full training state

The first CSV line is a version comment ("# latticeworm-csv v1 <schema>");
floats are written with repr so reading a file back yields bit-identical
values. Lines starting with '#' are ignored when reading, so emitters may
append notes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from .env import AdaptationRecord, EpisodeRecord
from .ppo import UpdateMetrics

CSV_VERSION = "latticeworm-csv v1"

EPISODE_COLUMNS = [
    "episode", "seed", "target_index", "adaptation_enabled",
    "episode_return", "max_step_reward", "final_distance", "unstable",
]
ADAPTATION_COLUMNS = [
    "episode", "muscle_id", "force_ceiling", "episode_force", "mean_activation",
]
METRICS_COLUMNS = [
    "update", "policy_loss", "value_loss", "entropy",
    "clip_fraction", "approx_kl", "skipped_minibatches",
]


def _format(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


class CsvWriter:
    """Append-oriented CSV writer with the version header, usable as a
    streaming sink while a run is in progress."""

    def __init__(self, path: str | Path, schema: str, columns: list[str]):
        self.path = Path(path)
        self.columns = columns
        new = not self.path.exists() or self.path.stat().st_size == 0
        self._fh = open(self.path, "a", newline="")
        self._writer = csv.writer(self._fh)
        if new:
            self._fh.write(f"# {CSV_VERSION} {schema}\n")
            self._writer.writerow(columns)
            self._fh.flush()

    def write_row(self, values: list) -> None:
        self._writer.writerow([_format(v) for v in values])
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    """Returns (column names, rows as strings); comment lines are skipped."""
    header = None
    rows = []
    with open(path, newline="") as fh:
        for record in csv.reader(fh):
            if not record or record[0].startswith("#"):
                continue
            if header is None:
                header = record
            else:
                rows.append(record)
    if header is None:
        raise ValueError(f"{path} has no header row")
    return header, rows


def write_episode_row(writer: CsvWriter, row: EpisodeRecord) -> None:
    writer.write_row([
        row.episode, row.seed, row.target_index, row.adaptation_enabled,
        row.episode_return, row.max_step_reward, row.final_distance, row.unstable,
    ])


def write_adaptation_row(writer: CsvWriter, row: AdaptationRecord) -> None:
    writer.write_row([
        row.episode, row.muscle_id, row.force_ceiling,
        row.episode_force, row.mean_activation,
    ])


def write_metrics(path: str | Path, metrics: list[UpdateMetrics]) -> None:
    with CsvWriter(path, "metrics", METRICS_COLUMNS) as writer:
        for i, m in enumerate(metrics):
            writer.write_row([
                i, m.policy_loss, m.value_loss, m.entropy,
                m.clip_fraction, m.approx_kl, m.skipped_minibatches,
            ])


@dataclass
class RunRecord:
    """One training run loaded back from disk."""

    run_id: str
    config_hash: str
    seed: int
    target_index: int
    adaptation_enabled: bool
    status: str
    episodes: list[EpisodeRecord] = field(default_factory=list)
    adaptation: list[AdaptationRecord] = field(default_factory=list)
    wall_clock_seconds: float = float("nan")

    def validate(self) -> None:
        indices = [e.episode for e in self.episodes]
        if indices != list(range(len(indices))):
            raise ValueError(f"run {self.run_id}: episode indices not contiguous from 0")


def run_id_for(target_index: int, adaptation_enabled: bool, seed: int) -> str:
    arm = "adapt" if adaptation_enabled else "fixed"
    return f"t{target_index}_{arm}_s{seed}"


def write_run_meta(run_dir: Path, meta: dict) -> None:
    tmp = run_dir / "run.json.tmp"
    tmp.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    tmp.replace(run_dir / "run.json")


def load_run(run_dir: str | Path) -> RunRecord:
    run_dir = Path(run_dir)
    meta = json.loads((run_dir / "run.json").read_text())
    record = RunRecord(
        run_id=meta["run_id"],
        config_hash=meta["config_hash"],
        seed=int(meta["seed"]),
        target_index=int(meta["target_index"]),
        adaptation_enabled=bool(meta["adaptation_enabled"]),
        status=meta["status"],
        wall_clock_seconds=float(meta.get("wall_clock_seconds", float("nan"))),
    )
    episodes_path = run_dir / "episodes.csv"
    if episodes_path.exists():
        header, rows = read_csv(episodes_path)
        if header != EPISODE_COLUMNS:
            raise ValueError(f"{episodes_path}: unexpected columns {header}")
        for r in rows:
            record.episodes.append(EpisodeRecord(
                episode=int(r[0]),
                seed=int(r[1]) if r[1] else None,
                target_index=int(r[2]),
                adaptation_enabled=r[3] == "1",
                episode_return=float(r[4]),
                max_step_reward=float(r[5]),
                final_distance=float(r[6]),
                unstable=r[7] == "1",
            ))
    adaptation_path = run_dir / "adaptation.csv"
    if adaptation_path.exists():
        header, rows = read_csv(adaptation_path)
        if header != ADAPTATION_COLUMNS:
            raise ValueError(f"{adaptation_path}: unexpected columns {header}")
        for r in rows:
            record.adaptation.append(AdaptationRecord(
                episode=int(r[0]),
                muscle_id=int(r[1]),
                force_ceiling=float(r[2]),
                episode_force=float(r[3]),
                mean_activation=float(r[4]),
            ))
    record.validate()
    return record
