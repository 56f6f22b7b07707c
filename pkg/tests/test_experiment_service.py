import json

import pandas as pd
import pytest

from src.config import ExperimentConfig
from src.errors import EXIT_CONFIG_ERROR, EXIT_OK, UsageError
from src.services.experiment_service import (
    compare,
    eval_trees,
    execute_experiment,
    repetition_seed,
    run_experiment,
)
from src.storage.runlog import SummaryRow, write_summary
from tests.conftest import minimal_config


def write_config(tmp_path, **overrides):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(minimal_config(**overrides)))
    return path


def without_clock(frame):
    return frame.drop(columns=["elapsed_s"])


def test_repetition_seeds_are_distinct_and_stable():
    seeds = [repetition_seed(5, rep) for rep in range(10)]
    assert len(set(seeds)) == 10
    assert seeds == [repetition_seed(5, rep) for rep in range(10)]
    assert seeds[0] != repetition_seed(6, 0)


def test_run_writes_every_output(tmp_path, capsys):
    out = tmp_path / "out"
    assert run_experiment(write_config(tmp_path), out) == EXIT_OK
    names = sorted(p.name for p in out.iterdir())
    assert names == ["aggregate.csv", "best_0.txt", "best_1.txt", "run_0.csv", "run_1.csv", "summary.csv"]
    log = pd.read_csv(out / "run_0.csv")
    assert list(log["generation"]) == [0, 1, 2, 3]
    summary = pd.read_csv(out / "summary.csv")
    assert list(summary["rep"]) == [0, 1]
    assert summary["final_best_train"].iloc[0] == log["best_train"].iloc[-1]
    assert "tiny: 2 repetition(s)" in capsys.readouterr().out


def test_same_seed_same_summary(tmp_path):
    config = write_config(tmp_path)
    assert run_experiment(config, tmp_path / "a") == EXIT_OK
    assert run_experiment(config, tmp_path / "b", jobs=2) == EXIT_OK
    assert run_experiment(config, tmp_path / "c", jobs=2, parallel_reps=True) == EXIT_OK
    a = without_clock(pd.read_csv(tmp_path / "a" / "summary.csv"))
    for other in ("b", "c"):
        pd.testing.assert_frame_equal(a, without_clock(pd.read_csv(tmp_path / other / "summary.csv")))
    assert (tmp_path / "a" / "best_1.txt").read_text() == (tmp_path / "c" / "best_1.txt").read_text()


def test_cli_overrides(tmp_path):
    config = write_config(tmp_path)
    assert run_experiment(config, tmp_path / "a", seed=99, reps=3) == EXIT_OK
    assert len(pd.read_csv(tmp_path / "a" / "summary.csv")) == 3
    run_experiment(config, tmp_path / "b")
    first = pd.read_csv(tmp_path / "a" / "summary.csv")["final_best_train"].iloc[0]
    other = pd.read_csv(tmp_path / "b" / "summary.csv")["final_best_train"].iloc[0]
    assert first != other


def test_invalid_config_exits_with_config_error(tmp_path):
    assert run_experiment(write_config(tmp_path, pop_size=1), tmp_path / "out") == EXIT_CONFIG_ERROR
    assert run_experiment(tmp_path / "missing.json", tmp_path / "out") == EXIT_CONFIG_ERROR


def test_default_output_dir_comes_from_settings(tmp_path, monkeypatch):
    monkeypatch.setenv("GP_OUTPUT_DIR", str(tmp_path / "results"))
    assert run_experiment(write_config(tmp_path, repetitions=1)) == EXIT_OK
    assert (tmp_path / "results" / "tiny" / "summary.csv").exists()


def test_unwritable_output_is_config_error(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert run_experiment(write_config(tmp_path), blocker / "out") == EXIT_CONFIG_ERROR


def test_compare_with_itself_is_all_ties(tmp_path):
    out = tmp_path / "out"
    execute_experiment(ExperimentConfig.from_dict(minimal_config()), out)
    report = compare(out / "summary.csv", out / "summary.csv")
    assert (report.wins_a, report.wins_b, report.ties) == (0, 0, 2)
    assert report.p_value == 1.0
    assert report.median_test_delta == 0.0
    assert any(line.startswith("sign test p-value") for line in report.lines())


def summary_file(path, tests, metric="mse"):
    rows = [SummaryRow(rep, rep, t, t, metric, 100, 2.0) for rep, t in enumerate(tests)]
    return write_summary(rows, path)


def test_dominating_setup_is_significant(tmp_path):
    a = summary_file(tmp_path / "a.csv", [0.1] * 10)
    b = summary_file(tmp_path / "b.csv", [0.5 + i for i in range(10)])
    report = compare(a, b)
    assert report.wins_a == 10
    assert report.p_value < 0.01
    assert report.median_runtime_ratio == 1.0


def test_accuracy_is_higher_is_better(tmp_path):
    a = summary_file(tmp_path / "a.csv", [0.9, 0.8, 0.7], metric="accuracy")
    b = summary_file(tmp_path / "b.csv", [0.5, 0.8, 0.9], metric="accuracy")
    report = compare(a, b)
    assert (report.wins_a, report.wins_b, report.ties) == (1, 1, 1)


def test_compare_rejects_mismatches(tmp_path):
    a = summary_file(tmp_path / "a.csv", [0.1, 0.2])
    with pytest.raises(UsageError, match="Repetition counts differ"):
        compare(a, summary_file(tmp_path / "b.csv", [0.1]))
    with pytest.raises(UsageError, match="different metrics"):
        compare(a, summary_file(tmp_path / "c.csv", [0.1, 0.2], metric="accuracy"))


def test_eval_scores_written_trees(tmp_path):
    (tmp_path / "data.csv").write_text("a,b,label\n" + "".join(
        f"{i},{2 * i},{3 * i}\n" for i in range(10)))
    (tmp_path / "trees.txt").write_text("# two trees\n(ADD x0 x1)\n0\n")
    scores = eval_trees(tmp_path / "trees.txt", tmp_path / "data.csv", standardize=False)
    assert len(scores) == 2
    (_, fitness, metric), (_, zero_fitness, _) = scores
    assert fitness == 0.0
    assert metric == 0.0
    assert zero_fitness == pytest.approx(sum((3 * i) ** 2 for i in range(10)) / 10)


def test_eval_reads_back_best_trees(tmp_path):
    out = tmp_path / "out"
    execute_experiment(ExperimentConfig.from_dict(minimal_config(repetitions=1)), out)
    frame = pd.DataFrame({"x0": [0.5, -1.0, 2.0], "x1": [1.0, 0.0, -2.0], "label": [0.0, 1.0, 2.0]})
    frame.to_csv(tmp_path / "data.csv", index=False)
    scores = eval_trees(out / "best_0.txt", tmp_path / "data.csv")
    assert len(scores) == 1
