"""Run records on disk: versioned CSV streams and the run directory format."""

import math

import pytest

from latticeworm.env import AdaptationRecord, EpisodeRecord
from latticeworm.ppo import UpdateMetrics
from latticeworm.records import (
    ADAPTATION_COLUMNS,
    CSV_VERSION,
    EPISODE_COLUMNS,
    METRICS_COLUMNS,
    CsvWriter,
    RunRecord,
    load_run,
    read_csv,
    run_id_for,
    write_adaptation_row,
    write_episode_row,
    write_metrics,
    write_run_meta,
)


def episode(i, ret=1.5, unstable=False):
    return EpisodeRecord(
        episode=i, seed=3, target_index=2, adaptation_enabled=True,
        episode_return=ret, max_step_reward=ret / 2, final_distance=0.01 * i,
        unstable=unstable,
    )


class TestCsvWriter:
    def test_new_file_has_version_comment_and_header(self, tmp_path):
        path = tmp_path / "t.csv"
        with CsvWriter(path, "episodes", EPISODE_COLUMNS):
            pass
        lines = path.read_text().splitlines()
        assert lines[0] == f"# {CSV_VERSION} episodes"
        assert lines[1] == ",".join(EPISODE_COLUMNS)

    def test_reopen_appends_without_second_header(self, tmp_path):
        path = tmp_path / "t.csv"
        with CsvWriter(path, "episodes", EPISODE_COLUMNS) as w:
            write_episode_row(w, episode(0))
        with CsvWriter(path, "episodes", EPISODE_COLUMNS) as w:
            write_episode_row(w, episode(1))
        text = path.read_text()
        assert text.count("# latticeworm-csv") == 1
        assert text.count("episode,seed") == 1
        _, rows = read_csv(path)
        assert [r[0] for r in rows] == ["0", "1"]

    def test_booleans_written_as_bits(self, tmp_path):
        path = tmp_path / "t.csv"
        with CsvWriter(path, "episodes", EPISODE_COLUMNS) as w:
            write_episode_row(w, episode(0, unstable=True))
            write_episode_row(w, episode(1, unstable=False))
        _, rows = read_csv(path)
        assert [r[-1] for r in rows] == ["1", "0"]

    def test_floats_roundtrip_exactly(self, tmp_path):
        # repr of a float parses back to the identical double
        value = 0.1 + 0.2
        path = tmp_path / "t.csv"
        with CsvWriter(path, "episodes", EPISODE_COLUMNS) as w:
            write_episode_row(w, episode(0, ret=value))
        _, rows = read_csv(path)
        assert float(rows[0][4]) == value

    def test_none_seed_written_as_empty(self, tmp_path):
        record = episode(0)
        record.seed = None
        path = tmp_path / "t.csv"
        with CsvWriter(path, "episodes", EPISODE_COLUMNS) as w:
            write_episode_row(w, record)
        _, rows = read_csv(path)
        assert rows[0][1] == ""


class TestReadCsv:
    def test_comment_lines_skipped_anywhere(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("# v1 demo\na,b\n1,2\n# note: mid-file\n3,4\n")
        header, rows = read_csv(path)
        assert header == ["a", "b"]
        assert rows == [["1", "2"], ["3", "4"]]

    def test_file_without_header_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("# only comments\n")
        with pytest.raises(ValueError, match="header"):
            read_csv(path)


class TestMetrics:
    def test_metrics_roundtrip(self, tmp_path):
        metrics = [
            UpdateMetrics(0.1, 0.2, 0.3, 0.25, 0.01, 0),
            UpdateMetrics(-0.4, 0.5, 0.2, 0.0, 0.02, 1),
        ]
        path = tmp_path / "metrics.csv"
        write_metrics(path, metrics)
        header, rows = read_csv(path)
        assert header == METRICS_COLUMNS
        assert [r[0] for r in rows] == ["0", "1"]
        assert float(rows[1][1]) == -0.4
        assert rows[1][6] == "1"


class TestRunDirectory:
    def write_run(self, run_dir, n_episodes=3):
        run_dir.mkdir(parents=True, exist_ok=True)
        with CsvWriter(run_dir / "episodes.csv", "episodes", EPISODE_COLUMNS) as w:
            for i in range(n_episodes):
                write_episode_row(w, episode(i, ret=float(i) - 0.5, unstable=i == 1))
        with CsvWriter(run_dir / "adaptation.csv", "adaptation", ADAPTATION_COLUMNS) as w:
            for i in range(n_episodes):
                for m in range(2):
                    write_adaptation_row(
                        w, AdaptationRecord(i, m, 2.0 + 0.1 * i, 0.3 * m, 0.05 * i)
                    )
        write_run_meta(run_dir, {
            "run_id": "t2_adapt_s3", "config_hash": "abc", "seed": 3,
            "target_index": 2, "adaptation_enabled": True,
            "status": "completed", "wall_clock_seconds": 12.5,
        })

    def test_load_run_roundtrip(self, tmp_path):
        self.write_run(tmp_path / "run")
        record = load_run(tmp_path / "run")
        record.validate()
        assert record.run_id == "t2_adapt_s3"
        assert record.seed == 3 and record.target_index == 2
        assert record.adaptation_enabled is True
        assert record.status == "completed"
        assert record.wall_clock_seconds == 12.5
        assert len(record.episodes) == 3
        assert record.episodes[1].unstable is True
        assert record.episodes[2].episode_return == 1.5
        assert len(record.adaptation) == 6
        assert record.adaptation[-1].force_ceiling == 2.2
        assert record.adaptation[-1].mean_activation == 0.1

    def test_validate_rejects_gap_in_episode_indices(self, tmp_path):
        self.write_run(tmp_path / "run")
        record = load_run(tmp_path / "run")
        record.episodes.pop(1)
        with pytest.raises(ValueError):
            record.validate()

    def test_run_meta_written_atomically(self, tmp_path):
        run_dir = tmp_path / "run"
        run_dir.mkdir()
        write_run_meta(run_dir, {"status": "running"})
        write_run_meta(run_dir, {"status": "completed"})
        assert not (run_dir / "run.json.tmp").exists()
        record_meta = (run_dir / "run.json").read_text()
        assert '"completed"' in record_meta

    def test_missing_csvs_load_as_empty(self, tmp_path):
        run_dir = tmp_path / "run"
        run_dir.mkdir()
        write_run_meta(run_dir, {
            "run_id": "t1_fixed_s0", "config_hash": "x", "seed": 0,
            "target_index": 1, "adaptation_enabled": False, "status": "failed",
        })
        record = load_run(run_dir)
        assert record.episodes == [] and record.adaptation == []
        assert math.isnan(record.wall_clock_seconds)


class TestRunId:
    def test_run_id_encodes_target_arm_seed(self):
        assert run_id_for(3, True, 11) == "t3_adapt_s11"
        assert run_id_for(8, False, 0) == "t8_fixed_s0"

    def test_run_ids_distinct_over_matrix(self):
        ids = {
            run_id_for(t, a, s)
            for t in range(1, 9) for a in (True, False) for s in range(5)
        }
        assert len(ids) == 80
