import csv
import json

import numpy as np
import pytest

from hierlab import stats
from hierlab.cli import ExperimentMatrix, main
from hierlab.config import ConfigError, TrainConfig
from hierlab.trainer import EvalPoint, RunRecord

MATRIX = """\
tasks: [point_reach]
variants: ["Baseline [HER]", "HiER [HER]"]
seeds: [0, 1, 2]
total_steps: 300
warmup_steps: 100
eval_points: 2
eval_episodes: 2
agent:
  batch_size: 16
  hidden: [8]
"""


@pytest.fixture
def matrix_file(tmp_path):
    p = tmp_path / "matrix.yaml"
    p.write_text(MATRIX)
    return p


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def without_clock(path):
    lines = [json.loads(ln) for ln in path.read_text().splitlines()]
    for ln in lines[1:]:
        ln.pop("wall_clock")
    return lines


def test_train_matrix_writes_one_file_per_run_and_is_deterministic(matrix_file, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["train", "--config", str(matrix_file), "--out-dir", str(a)]) == 0
    names = sorted(p.name for p in a.glob("*.jsonl"))
    assert names == sorted(f"point_reach_sac_{v}_{s}.jsonl" for v in ("baseline-her", "hier-her") for s in range(3))
    assert main(["train", "--config", str(matrix_file), "--out-dir", str(b), "--jobs", "2"]) == 0
    for name in names:
        assert without_clock(a / name) == without_clock(b / name)


def test_seed_flags_and_override(matrix_file, tmp_path):
    out = tmp_path / "o"
    assert main(["train", "--config", str(matrix_file), "--out-dir", str(out), "--seeds", "4..5",
                 "--override", "variants=[Baseline]", "--override", "agent.lr=3e-4"]) == 0
    names = sorted(p.name for p in out.glob("*.jsonl"))
    assert names == ["point_reach_sac_baseline_4.jsonl", "point_reach_sac_baseline_5.jsonl"]
    header = json.loads((out / names[0]).read_text().splitlines()[0])
    assert header["config"]["agent"]["lr"] == 3e-4


def test_unknown_key_is_named(matrix_file, tmp_path, capsys):
    code = main(["train", "--config", str(matrix_file), "--out-dir", str(tmp_path),
                 "--override", "agent.learning_rate=1"])
    assert code != 0
    assert "learning_rate" in capsys.readouterr().err
    bad = tmp_path / "bad.yaml"
    bad.write_text("tasks: [point_reach\nvariants: x\n")
    assert main(["train", "--config", str(bad)]) != 0
    assert "line" in capsys.readouterr().err


def test_matrix_validation():
    with pytest.raises(ConfigError):
        ExperimentMatrix([], ["Baseline"])
    with pytest.raises(ConfigError):
        ExperimentMatrix(["point_reach"], ["HiER", "HiER"])
    with pytest.raises(ConfigError):
        ExperimentMatrix(["point_reach"], ["HiER [HER]", "HiER[HER]"])
    with pytest.raises(ConfigError):
        ExperimentMatrix.from_mapping({"tasks": ["point_reach"], "variants": ["HiER"], "her": True})
    with pytest.raises(ConfigError, match="unknown variant"):
        ExperimentMatrix(["point_reach"], ["Fancy"]).configs()
    m = ExperimentMatrix.from_mapping({"tasks": "maze_s", "variants": ["HiER+ [HER & PER]"], "seeds": 2})
    cfgs = m.configs()
    assert [c.seed for c in cfgs] == [0, 1]
    assert cfgs[0].her and cfgs[0].per and cfgs[0].hier and cfgs[0].e2h_ise
    assert len(ExperimentMatrix(["point_reach"], ["Baseline"]).seeds) == 10


def synthetic(run_dir, scores, task="point_reach", returns=None):
    """Write records whose best success is ``scores[variant][seed]``."""
    run_dir.mkdir(exist_ok=True)
    for variant, xs in scores.items():
        for seed, best in enumerate(xs):
            cfg = TrainConfig(task=task, variant=variant, seed=seed).to_dict()
            series = [EvalPoint(t=t, success_rate=v, mean_return=-50.0 + 10 * seed, c=1.0, lam=-100.0,
                                xi=0.5, hier_size=0, episodes=t, wall_clock=0.0)
                      for t, v in ((100, best / 2), (200, best), (300, best / 4))]
            RunRecord(seed, "f", cfg, series).write_jsonl(run_dir)


def test_aggregate_matches_stats_bit_for_bit(tmp_path):
    data = {"Baseline [HER]": [0.1, 0.5, 0.2, 0.9, 0.3, 0.4, 0.8, 0.6],
            "HiER [HER]": [0.5, 0.55, 0.7, 0.2, 1.0, 0.95, 0.65, 0.6]}
    synthetic(tmp_path / "runs", data)
    assert main(["aggregate", str(tmp_path / "runs"), "--resamples", "500", "--ci-seed", "3"]) == 0
    rows = read_rows(tmp_path / "runs" / "aggregate_best_success.csv")
    assert list(rows[0]) == ["variant", "metric", "value", "ci_lo", "ci_hi"]
    by = {(r["variant"], r["metric"]): r for r in rows}
    assert float(by[("Baseline [HER]", "iqm")]["value"]) == stats.iqm(data["Baseline [HER]"])
    # hand value: sorted middle four of the baseline scores
    assert float(by[("Baseline [HER]", "iqm")]["value"]) == pytest.approx((0.3 + 0.4 + 0.5 + 0.6) / 4, abs=1e-15)
    for vi, variant in enumerate(sorted(data)):
        for mi, m in enumerate(stats.METRICS):
            tgt = 1.0 if m == "og" else None
            lo, hi = stats.stratified_bootstrap_ci({"point_reach": data[variant]}, m, 500, 0.95,
                                                   np.random.default_rng([3, vi, mi]), tgt)
            r = by[(variant, m)]
            assert (float(r["value"]), float(r["ci_lo"]), float(r["ci_hi"])) == (
                stats.aggregate(data[variant], m, tgt), lo, hi)


def test_aggregate_single_run_and_last_return(tmp_path):
    synthetic(tmp_path / "runs", {"Baseline": [0.35], "HiER": [0.8]})
    assert main(["aggregate", str(tmp_path / "runs")]) == 0
    rows = read_rows(tmp_path / "runs" / "aggregate_best_success.csv")
    for r in rows:
        expect = {"Baseline": 0.35, "HiER": 0.8}[r["variant"]]
        if r["metric"] == "og":
            expect = 1.0 - expect
        assert float(r["value"]) == pytest.approx(expect, abs=1e-15)
        assert r["ci_lo"] == r["value"] == r["ci_hi"]
    assert main(["aggregate", str(tmp_path / "runs"), "--protocol", "last_return"]) == 0
    rows = read_rows(tmp_path / "runs" / "aggregate_last_return.csv")
    assert {float(r["value"]) for r in rows if r["metric"] == "mean"} == {-50.0}


def test_aggregate_gap_warning_and_missing_dir(tmp_path, caplog):
    synthetic(tmp_path / "runs", {"Baseline": [0.1, 0.2, 0.3], "HiER": [0.4]})
    assert main(["aggregate", str(tmp_path / "runs")]) == 0
    assert "HiER / point_reach: missing seeds [1, 2]" in caplog.text
    assert main(["aggregate", str(tmp_path / "nothing")]) == 2


@pytest.mark.parametrize("kind", ["learning_curve", "profile", "prob_improvement", "agg_bars"])
def test_plots_are_deterministic_with_sidecar(tmp_path, kind):
    synthetic(tmp_path / "runs", {"Baseline [HER]": [0.1, 0.5, 0.2], "HiER [HER]": [0.5, 0.9, 0.7]})
    outs = []
    for name in ("p1", "p2"):
        assert main(["plot", kind, str(tmp_path / "runs"), "--out-dir", str(tmp_path / name),
                     "--resamples", "200"]) == 0
        outs.append(tmp_path / name)
    svgs = [sorted(o.glob("*.svg")) for o in outs]
    assert len(svgs[0]) == 1
    assert svgs[0][0].read_bytes() == svgs[1][0].read_bytes()
    rows = read_rows(svgs[0][0].with_suffix(".csv"))
    assert rows
    if kind == "profile":
        for v in ("Baseline [HER]", "HiER [HER]"):
            fr = [float(r["fraction"]) for r in rows if r["variant"] == v]
            assert all(a >= b for a, b in zip(fr, fr[1:]))
    if kind == "learning_curve":
        assert {r["t"] for r in rows} == {"100", "200", "300"}
        for r in rows:
            assert float(r["ci_lo"]) <= float(r["mean"]) <= float(r["ci_hi"])
    if kind == "prob_improvement":
        assert rows[0]["x"] == "Baseline [HER]" and float(rows[0]["probability"]) == pytest.approx(
            stats.probability_of_improvement({"t": [0.1, 0.5, 0.2]}, {"t": [0.5, 0.9, 0.7]}))


def test_agg_bars_from_table_and_missing_pair(tmp_path):
    synthetic(tmp_path / "runs", {"Baseline": [0.1, 0.5], "HiER": [0.5, 0.9]})
    assert main(["aggregate", str(tmp_path / "runs")]) == 0
    table = tmp_path / "runs" / "aggregate_best_success.csv"
    assert main(["plot", "agg_bars", str(table), "--out-dir", str(tmp_path / "f")]) == 0
    assert read_rows(tmp_path / "f" / "agg_bars_best_success.csv") == read_rows(table)
    assert main(["plot", "prob_improvement", str(tmp_path / "runs"), "--pair", "HiER:Nope"]) == 2


def test_list_tasks(capsys):
    assert main(["list-tasks"]) == 0
    out = capsys.readouterr().out
    assert "point_reach" in out and "maze_s" in out
    assert main(["list-tasks", "--config-keys"]) == 0
    assert "agent.lr" in capsys.readouterr().out


def test_config_reference_doc_is_current():
    from pathlib import Path

    from hierlab.config import config_reference

    doc = Path(__file__).resolve().parents[1] / "docs" / "config.md"
    assert doc.read_text() == config_reference()
