"""Figure emitters: reward curves, max-reward bars, adaptation traces,
activation heatmaps, and deterministic replays.

Every figure is emitted as a CSV (the canonical artifact) plus an SVG view;
the SVG embeds the exact CSV text in its <desc> element, so the plotted
numbers can always be checked against the data file.

Conventions, chosen once and used everywhere:
- unstable episodes are dropped from a run's history before any windowing;
- rolling statistics use a trailing window; the "episode" column is the
  index of the window's last element within the filtered history;
- across-seed spread is the sample standard deviation (n-1 denominator),
  zero when only one seed contributes;
- a window longer than the shortest contributing history shrinks to it,
  noted in a trailing comment line.
"""

from __future__ import annotations

import csv
import io
import logging
from collections import defaultdict
from pathlib import Path

import numpy as np

from .records import CSV_VERSION, RunRecord
from .svg import Axes, Canvas

logger = logging.getLogger(__name__)

ADAPTIVE_COLOR = "#c0392b"
FIXED_COLOR = "#2a5fa5"
CEILING_COLOR = "#2a5fa5"
FORCE_COLOR = "#c0392b"


def _float_cell(value: float) -> str:
    return repr(float(value))


class _CsvText:
    """CSV content assembled in memory, shared verbatim by file and figure."""

    def __init__(self, schema: str, columns: list[str]):
        self._buf = io.StringIO()
        self._buf.write(f"# {CSV_VERSION} {schema}\n")
        self._writer = csv.writer(self._buf)
        self._writer.writerow(columns)

    def row(self, values: list[str]) -> None:
        self._writer.writerow(values)

    def note(self, text: str) -> None:
        self._buf.write(f"# note: {text}\n")

    def text(self) -> str:
        return self._buf.getvalue()


def _emit(csv_text: str, canvas: Canvas, csv_path: Path, svg_path: Path) -> None:
    csv_path.write_text(csv_text)
    canvas.describe(csv_text)
    canvas.write(svg_path)


def stable_returns(record: RunRecord) -> list[float]:
    return [e.episode_return for e in record.episodes if not e.unstable]


def rolling_mean(values, window: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    n = len(values)
    if window < 1 or window > n:
        raise ValueError("window must be in 1..len(values)")
    return np.array([values[i - window + 1 : i + 1].mean() for i in range(window - 1, n)])


def sample_std(values) -> float:
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return 0.0
    return float(values.std(ddof=1))


def _group_runs(records: list[RunRecord]) -> dict[tuple[int, bool], list[RunRecord]]:
    groups: dict[tuple[int, bool], list[RunRecord]] = defaultdict(list)
    for record in records:
        if record.status == "completed":
            groups[(record.target_index, record.adaptation_enabled)].append(record)
    return dict(groups)


# ------------------------------------------------------------- reward curves


def reward_curve_series(runs: list[RunRecord], window: int):
    """Across-seed rolling statistics for one (target, arm) series.

    Returns (episodes, means, stds, used_window); histories are truncated to
    the shortest contributing run after the unstable drop."""
    histories = [stable_returns(r) for r in runs]
    shortest = min(len(h) for h in histories)
    if shortest == 0:
        return [], [], [], 0
    used = min(window, shortest)
    rolled = np.stack([rolling_mean(h[:shortest], used) for h in histories])
    episodes = list(range(used - 1, shortest))
    means = rolled.mean(axis=0)
    stds = np.array([sample_std(rolled[:, i]) for i in range(rolled.shape[1])])
    return episodes, means, stds, used


def emit_reward_curves(
    records: list[RunRecord], out_dir: str | Path, window: int = 50
) -> list[Path]:
    """One CSV + SVG per target with adaptive and non-adaptive bands."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups = _group_runs(records)
    targets = sorted({t for t, _ in groups})
    written = []
    for target in targets:
        arms = {}
        notes = []
        for adaptive in (True, False):
            runs = groups.get((target, adaptive), [])
            label = "adaptive" if adaptive else "nonadaptive"
            if not runs:
                notes.append(f"no {label} runs for target {target}")
                continue
            episodes, means, stds, used = reward_curve_series(runs, window)
            if not episodes:
                notes.append(f"{label}: no stable episodes to plot")
                continue
            if used < window:
                notes.append(f"{label}: window shrunk from {window} to {used}")
            arms[adaptive] = (episodes, means, stds)

        table = _CsvText(
            "reward-curves",
            ["episode", "mean_adaptive", "std_adaptive",
             "mean_nonadaptive", "std_nonadaptive"],
        )
        index: dict[int, list[str]] = {}
        all_eps = sorted(
            {e for eps, _, _ in arms.values() for e in eps}
        )
        for e in all_eps:
            index[e] = ["", "", "", ""]
        for adaptive, (episodes, means, stds) in arms.items():
            base = 0 if adaptive else 2
            for e, m, s in zip(episodes, means, stds):
                index[e][base] = _float_cell(m)
                index[e][base + 1] = _float_cell(s)
        for e in all_eps:
            table.row([str(e), *index[e]])
        for note in notes:
            table.note(note)
            logger.info("reward curves target %d: %s", target, note)

        canvas = Canvas(640, 400)
        lo, hi = _curve_extent(arms)
        axes = Axes(
            canvas, (0, max(all_eps) if all_eps else 1), (lo, hi),
            x_label="episode", y_label="rolling mean return",
            title=f"target {target}",
        )
        for adaptive, (episodes, means, stds) in sorted(arms.items(), reverse=True):
            color = ADAPTIVE_COLOR if adaptive else FIXED_COLOR
            means = np.asarray(means)
            stds = np.asarray(stds)
            axes.band(episodes, means - stds, means + stds, color)
            axes.series(episodes, means, color)
        _legend(canvas, [("adaptive", ADAPTIVE_COLOR), ("non-adaptive", FIXED_COLOR)])

        csv_path = out_dir / f"reward_curves_target{target}.csv"
        svg_path = out_dir / f"reward_curves_target{target}.svg"
        _emit(table.text(), canvas, csv_path, svg_path)
        written += [csv_path, svg_path]
    return written


def _curve_extent(arms) -> tuple[float, float]:
    lo, hi = np.inf, -np.inf
    for episodes, means, stds in arms.values():
        if len(episodes) == 0:
            continue
        means = np.asarray(means)
        stds = np.asarray(stds)
        lo = min(lo, float((means - stds).min()))
        hi = max(hi, float((means + stds).max()))
    if not np.isfinite(lo):
        return 0.0, 1.0
    pad = 0.05 * max(hi - lo, 1e-9)
    return lo - pad, hi + pad


def _legend(canvas: Canvas, entries) -> None:
    x = canvas.width - 150
    y = 24
    for label, color in entries:
        canvas.rect(x, y - 8, 14, 8, fill=color)
        canvas.text(x + 20, y, label, size=10)
        y += 16


# ---------------------------------------------------------- max-reward bars


def max_reward_table(records: list[RunRecord]):
    """Per (target, arm): per-seed maxima, their mean, and sample std."""
    groups = _group_runs(records)
    rows = []
    for (target, adaptive), runs in sorted(groups.items(), key=lambda kv: (kv[0][0], not kv[0][1])):
        maxima = {
            r.seed: max(e.episode_return for e in r.episodes)
            for r in runs
            if r.episodes
        }
        if not maxima:
            continue
        values = list(maxima.values())
        rows.append({
            "target": target,
            "adaptive": adaptive,
            "seed_maxima": maxima,
            "mean": float(np.mean(values)),
            "std": sample_std(values),
        })
    return rows


def emit_max_reward_bars(records: list[RunRecord], out_dir: str | Path):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = max_reward_table(records)

    table = _CsvText(
        "max-reward-bars",
        ["target", "adaptation", "n_seeds", "mean_max_return", "std_max_return"],
    )
    present = set()
    for row in rows:
        present.add(row["target"])
        table.row([
            str(row["target"]),
            "on" if row["adaptive"] else "off",
            str(len(row["seed_maxima"])),
            _float_cell(row["mean"]),
            _float_cell(row["std"]),
        ])
    for target in sorted(present):
        for adaptive in (True, False):
            if not any(r["target"] == target and r["adaptive"] == adaptive for r in rows):
                arm = "on" if adaptive else "off"
                table.note(f"target {target}: no adaptation={arm} runs; bar omitted")
                logger.info("max-reward bars: target %d missing adaptation=%s arm",
                            target, arm)

    detail = _CsvText("max-reward-per-seed", ["target", "adaptation", "seed", "max_return"])
    for row in rows:
        for seed, value in sorted(row["seed_maxima"].items()):
            detail.row([
                str(row["target"]), "on" if row["adaptive"] else "off",
                str(seed), _float_cell(value),
            ])

    canvas = Canvas(640, 400)
    targets = sorted(present)
    values = [r["mean"] - r["std"] for r in rows] + [r["mean"] + r["std"] for r in rows]
    lo = min(0.0, min(values, default=0.0))
    hi = max(values, default=1.0)
    pad = 0.05 * max(hi - lo, 1e-9)
    axes = Axes(canvas, (0, max(len(targets), 1)), (lo - pad, hi + pad),
                y_label="max episode return", title="maximum reward by target")
    for i, target in enumerate(targets):
        group = [r for r in rows if r["target"] == target]
        for r in group:
            offset = 0.15 if r["adaptive"] else 0.55
            color = ADAPTIVE_COLOR if r["adaptive"] else FIXED_COLOR
            x_left = i + offset
            base_y = axes.y(max(0.0, lo))
            top_y = axes.y(r["mean"])
            axes.canvas.rect(
                axes.x(x_left), min(top_y, base_y),
                axes.x(x_left + 0.3) - axes.x(x_left), abs(base_y - top_y),
                fill=color, opacity=0.85,
            )
            cx = axes.x(x_left + 0.15)
            axes.canvas.line(cx, axes.y(r["mean"] - r["std"]), cx,
                             axes.y(r["mean"] + r["std"]), stroke="#222")
        canvas.text(axes.x(i + 0.5), axes.py0 + 16, f"target {target}",
                    size=9, anchor="middle")
    _legend(canvas, [("adaptive", ADAPTIVE_COLOR), ("non-adaptive", FIXED_COLOR)])

    csv_path = out_dir / "max_reward_bars.csv"
    svg_path = out_dir / "max_reward_bars.svg"
    _emit(table.text(), canvas, csv_path, svg_path)
    detail_path = out_dir / "max_reward_per_seed.csv"
    detail_path.write_text(detail.text())
    return csv_path, svg_path, detail_path


# ------------------------------------------------------- adaptation traces


def emit_adaptation_traces(record: RunRecord, out_dir: str | Path,
                           panels_per_row: int = 6):
    """Per-muscle (episode, ceiling, produced force) series as CSV plus a
    panel-grid SVG, ceilings in blue and forces in red."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not record.adaptation_enabled:
        logger.warning(
            "run %s trained without adaptation; ceiling traces are flat", record.run_id
        )
    by_muscle: dict[int, list] = defaultdict(list)
    for row in record.adaptation:
        by_muscle[row.muscle_id].append(row)
    muscles = sorted(by_muscle)

    table = _CsvText(
        "adaptation-traces",
        ["episode", "muscle_id", "force_ceiling", "episode_force"],
    )
    for m in muscles:
        for row in by_muscle[m]:
            table.row([
                str(row.episode), str(m),
                _float_cell(row.force_ceiling), _float_cell(row.episode_force),
            ])

    n = len(muscles)
    cols = min(panels_per_row, max(n, 1))
    rows_count = (n + cols - 1) // cols if n else 1
    panel_w, panel_h = 150, 110
    canvas = Canvas(cols * panel_w + 60, rows_count * panel_h + 40)
    top = max(
        (row.force_ceiling for rows in by_muscle.values() for row in rows),
        default=1.0,
    )
    max_ep = max((row.episode for rows in by_muscle.values() for row in rows), default=1)
    for i, m in enumerate(muscles):
        r, c = divmod(i, cols)
        ox, oy = 50 + c * panel_w, 20 + r * panel_h
        frame = _Panel(canvas, ox, oy, panel_w - 18, panel_h - 26,
                       (0, max(max_ep, 1)), (0, top * 1.05))
        eps = [row.episode for row in by_muscle[m]]
        frame.scatter(eps, [row.force_ceiling for row in by_muscle[m]], CEILING_COLOR)
        frame.scatter(eps, [row.episode_force for row in by_muscle[m]], FORCE_COLOR)
        canvas.text(ox + 4, oy + 10, f"muscle {m}", size=9)
    _legend(canvas, [("force ceiling", CEILING_COLOR), ("episode force", FORCE_COLOR)])

    csv_path = out_dir / f"adaptation_traces_{record.run_id}.csv"
    svg_path = out_dir / f"adaptation_traces_{record.run_id}.svg"
    _emit(table.text(), canvas, csv_path, svg_path)
    return csv_path, svg_path


class _Panel:
    """Tiny unlabeled axes for grid figures."""

    def __init__(self, canvas: Canvas, ox, oy, w, h, x_range, y_range):
        self.canvas = canvas
        self.ox, self.oy, self.w, self.h = ox, oy, w, h
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        canvas.rect(ox, oy, w, h, fill="none", stroke="#999")

    def scatter(self, xs, ys, color) -> None:
        for x, y in zip(xs, ys):
            px = self.ox + (x - self.x0) / (self.x1 - self.x0) * self.w
            py = self.oy + self.h - (y - self.y0) / (self.y1 - self.y0) * self.h
            self.canvas.circle(px, py, 1.2, fill=color)


# ------------------------------------------------------ activation heatmap


def activation_heatmap_table(record: RunRecord, layouts, episode_range=None):
    """Mean activation per muscle over an episode range, normalized by the
    maximum mean; all-zero activations leave the normalized column at zero."""
    episodes = [row.episode for row in record.adaptation]
    if not episodes:
        raise ValueError(f"run {record.run_id} has no adaptation rows")
    if episode_range is None:
        episode_range = (0, max(episodes) + 1)
    start, stop = episode_range
    if stop <= start:
        raise ValueError("episode range must be non-empty")
    sums: dict[int, float] = defaultdict(float)
    counts: dict[int, int] = defaultdict(int)
    for row in record.adaptation:
        if start <= row.episode < stop:
            sums[row.muscle_id] += row.mean_activation
            counts[row.muscle_id] += 1
    means = {m: sums[m] / counts[m] for m in sums}
    peak = max(means.values(), default=0.0)
    rows = []
    for layout in layouts:
        m = layout.muscle_id
        mean = means.get(m, 0.0)
        rows.append({
            "muscle_id": m,
            "column": layout.column,
            "level": layout.level,
            "mean_activation": mean,
            "normalized": mean / peak if peak > 0.0 else 0.0,
        })
    return rows, peak, (start, stop)


def emit_activation_heatmap(record: RunRecord, layouts, out_dir: str | Path,
                            episode_range=None, n_columns: int | None = None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows, peak, (start, stop) = activation_heatmap_table(record, layouts, episode_range)
    if n_columns is None:
        n_columns = max(r["column"] for r in rows) + 1

    table = _CsvText(
        "activation-heatmap",
        ["muscle_id", "column", "level", "mean_activation", "normalized"],
    )
    for r in rows:
        table.row([
            str(r["muscle_id"]), str(r["column"]), str(r["level"]),
            _float_cell(r["mean_activation"]), _float_cell(r["normalized"]),
        ])
    table.note(f"episodes {start}..{stop - 1}")
    if peak == 0.0:
        table.note("all activations zero; normalization skipped")
        logger.info("activation heatmap %s: all activations zero", record.run_id)

    n_levels = max(r["level"] for r in rows) + 1
    cell = 60
    canvas = Canvas(n_columns * cell + 120, (n_levels + 1) * cell + 80)

    def px(col): return 60 + col * cell
    def py(level): return canvas.height - 50 - level * cell

    # unwrapped structure: verticals for each column plus the seam copy
    for c in range(n_columns + 1):
        canvas.line(px(c), py(0), px(c), py(n_levels), stroke="#bbb", width=2)
    for r in rows:
        c, l, v = r["column"], r["level"], r["normalized"]
        shade = int(round(255 * (1.0 - v)))
        color = f"rgb(255,{shade},{shade})"
        canvas.line(px(c), py(l), px(c + 1), py(l + 1), stroke=color, width=5)
        canvas.text((px(c) + px(c + 1)) / 2 + 4, (py(l) + py(l + 1)) / 2,
                    str(r["muscle_id"]), size=8)
    canvas.text(canvas.width / 2, 20,
                f"mean activation, episodes {start}..{stop - 1}", anchor="middle")

    csv_path = out_dir / f"activation_heatmap_{record.run_id}.csv"
    svg_path = out_dir / f"activation_heatmap_{record.run_id}.svg"
    _emit(table.text(), canvas, csv_path, svg_path)
    return csv_path, svg_path


# ------------------------------------------------------------------- replay


def replay_episode(env, learner, target_index: int, out_path: str | Path) -> dict:
    """One deterministic mean-action episode; dumps per-step node positions
    (columns x, y, z carry all three orthographic views) and returns the
    final distance.

    A replay is an evaluation: the environment is restored afterwards so
    ceilings do not adapt and logs do not grow, and replaying twice yields
    byte-identical dumps."""
    out_path = Path(out_path)
    snapshot = env.get_state()
    log_marks = len(env.episode_log), len(env.adaptation_log)
    table = _CsvText("replay-trajectory", ["step", "node_id", "x", "y", "z"])

    def dump(step: int) -> None:
        for node_id, p in enumerate(env.system.positions):
            table.row([str(step), str(node_id),
                       _float_cell(p[0]), _float_cell(p[1]), _float_cell(p[2])])

    try:
        obs = env.reset(target_index=target_index)
        dump(0)
        step = 0
        done = False
        distance = float("nan")
        while not done:
            action, _, _, _ = learner.act(obs, deterministic=True, update_norm=False)
            obs, _, done, info = env.step(action)
            step += 1
            dump(step)
            distance = info["distance"]
    finally:
        del env.episode_log[log_marks[0]:]
        del env.adaptation_log[log_marks[1]:]
        env.set_state(snapshot)
    out_path.write_text(table.text())
    return {"steps": step, "final_distance": float(distance), "path": out_path}
