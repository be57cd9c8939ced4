"""Experiment config parsing and the CLI harness contract."""

import json

import pytest

from lyaptrade import config_from_json, config_to_json
from lyaptrade.cli import main
from lyaptrade.errors import ConfigError

BASE = {
    "market": {"stocks": [{"mu_max": 1, "p_max": "2.00"}],
               "budget": {"mode": "none"}},
    "trader": {"V": "50"},
    "source": {"kind": "iid", "support": [["1.00"], ["2.00"]],
               "probs": [0.5, 0.5]},
    "horizon": 200,
    "seed": 7,
}


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def read_summary(tmp_path):
    with open(tmp_path / "out" / "summary.json") as fh:
        return json.load(fh)


class TestConfig:
    def test_round_trip(self):
        cfg = config_from_json(BASE)
        again = config_from_json(config_to_json(cfg))
        assert config_to_json(again) == config_to_json(cfg)

    def test_seed_required(self):
        doc = dict(BASE)
        del doc["seed"]
        with pytest.raises(ConfigError):
            config_from_json(doc)

    def test_unknown_check_rejected(self):
        doc = dict(BASE, verify=["sharpe_ratio"])
        with pytest.raises(ConfigError) as err:
            config_from_json(doc)
        assert "/verify" in str(err.value)

    def test_markov_source(self):
        doc = dict(BASE, source={
            "kind": "markov", "states": [["1.00"], ["2.00"]],
            "transition": [[0.5, 0.5], [0.5, 0.5]]})
        cfg = config_from_json(doc)
        assert cfg.source.model.n_states == 2

    def test_bad_location_reported(self):
        doc = dict(BASE, source={"kind": "lognormal"})
        with pytest.raises(ConfigError) as err:
            config_from_json(doc)
        assert "/source" in str(err.value)


class TestRun:
    def test_run_with_checks_exits_zero(self, tmp_path):
        doc = dict(BASE, verify=["dynamics", "queue_band"])
        cfg = write_config(tmp_path, doc)
        assert main(["run", "--config", cfg,
                     "--out", str(tmp_path / "out")]) == 0
        summary = read_summary(tmp_path)
        assert summary["reports"]["queue_band"]["verdict"] == "pass"
        assert summary["results"]["replications"] == 1

    def test_reproducible_hash(self, tmp_path):
        cfg = write_config(tmp_path, dict(BASE, replications=3))
        hashes = []
        for d in ("a", "b"):
            main(["run", "--config", cfg, "--out", str(tmp_path / d)])
            with open(tmp_path / d / "summary.json") as fh:
                hashes.append(json.load(fh)["content_hash"])
        assert hashes[0] == hashes[1]

    def test_jobs_do_not_change_results(self, tmp_path):
        cfg = write_config(tmp_path, dict(BASE, replications=4))
        for d, jobs in (("s", "1"), ("p", "2")):
            main(["run", "--config", cfg, "--jobs", jobs,
                  "--out", str(tmp_path / d)])
        a = json.loads((tmp_path / "s" / "summary.json").read_text())
        b = json.loads((tmp_path / "p" / "summary.json").read_text())
        assert a["content_hash"] == b["content_hash"]

    def test_seed_override_changes_results(self, tmp_path):
        cfg = write_config(tmp_path, BASE)
        main(["run", "--config", cfg, "--out", str(tmp_path / "a")])
        main(["run", "--config", cfg, "--seed", "99",
              "--out", str(tmp_path / "b")])
        a = json.loads((tmp_path / "a" / "summary.json").read_text())
        b = json.loads((tmp_path / "b" / "summary.json").read_text())
        assert a["content_hash"] != b["content_hash"]

    def test_statistical_check(self, tmp_path):
        doc = dict(BASE, replications=30, horizon=2000, verify=["thm1"])
        cfg = write_config(tmp_path, doc)
        assert main(["run", "--config", cfg,
                     "--out", str(tmp_path / "out")]) == 0
        assert read_summary(tmp_path)["reports"]["thm1"]["verdict"] == "pass"

    def test_bad_config_exits_five(self, tmp_path):
        cfg = write_config(tmp_path, {"market": {}})
        assert main(["run", "--config", cfg]) == 5

    def test_trajectory_output(self, tmp_path):
        doc = dict(BASE, write_trajectories=True, horizon=10)
        cfg = write_config(tmp_path, doc)
        main(["run", "--config", cfg, "--out", str(tmp_path / "out")])
        rows = (tmp_path / "out" / "trajectory_0.csv").read_text().splitlines()
        assert rows[0] == "slot,p_1,A_1,mu_1,Q_1,profit"
        assert len(rows) == 11


class TestVerifySubcommand:
    def test_corrupted_trajectory_fails_deterministically(self, tmp_path):
        doc = dict(BASE, write_trajectories=True, horizon=50,
                   verify=["queue_band"])
        cfg = write_config(tmp_path, doc)
        main(["run", "--config", cfg, "--out", str(tmp_path / "out")])
        traj_csv = tmp_path / "out" / "trajectory_0.csv"
        assert main(["verify", "--config", cfg,
                     "--trajectory", str(traj_csv)]) == 0
        lines = traj_csv.read_text().splitlines()
        cols = lines[20].split(",")
        cols[4] = "0"  # drop the queue below its floor
        lines[20] = ",".join(cols)
        traj_csv.write_text("\n".join(lines) + "\n")
        assert main(["verify", "--config", cfg,
                     "--trajectory", str(traj_csv)]) in (2, 5)

    def test_statistical_names_rejected(self, tmp_path):
        cfg = write_config(tmp_path, dict(BASE, verify=["thm1"]))
        assert main(["verify", "--config", cfg, "--trajectory", "x.csv"]) == 5


class TestOracleSubcommand:
    def test_phi_opt(self, tmp_path, capsys):
        doc = dict(BASE, oracle={"mode": "phi_opt"})
        assert main(["oracle", "--config", write_config(tmp_path, doc)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["oracle"]["solution"]["phi_opt_float"] == 0.5
        assert out["oracle"]["rebalanced"]["drifts"] == ["0"]

    def test_lookahead_on_trace(self, tmp_path, capsys):
        trace = tmp_path / "trace.csv"
        trace.write_text("slot,p_1\n0,1.00\n1,2.00\n2,2.00\n3,1.00\n")
        doc = dict(BASE, horizon=4,
                   source={"kind": "trace", "path": str(trace)},
                   oracle={"mode": "lookahead", "window": 2})
        assert main(["oracle", "--config", write_config(tmp_path, doc)]) == 0
        out = json.loads(capsys.readouterr().out)
        # second frame shorts at 2.00 and covers at 1.00
        assert out["oracle"]["psi"] == ["1.00", "1.00"]

    def test_constant_trace_zero_psi(self, tmp_path, capsys):
        trace = tmp_path / "trace.csv"
        trace.write_text("slot,p_1\n0,1.00\n1,1.00\n")
        doc = dict(BASE, horizon=2,
                   source={"kind": "trace", "path": str(trace)},
                   oracle={"mode": "lookahead", "window": 2})
        main(["oracle", "--config", write_config(tmp_path, doc)])
        out = json.loads(capsys.readouterr().out)
        assert out["oracle"]["psi"] == ["0.00"]


class TestScaledSubcommand:
    def test_beta_zero_flat(self, tmp_path):
        doc = dict(BASE, scaled={"beta": 0, "frame": 4,
                                 "frames_per_window": 10, "windows": 3})
        cfg = write_config(tmp_path, doc)
        assert main(["scaled", "--config", cfg,
                     "--out", str(tmp_path / "out")]) == 0
        summary = read_summary(tmp_path)
        scales = [w["scale"] for w in summary["scaled"]["windows"]]
        assert scales == [1.0, 1.0, 1.0]

    def test_profitable_scaling_grows(self, tmp_path):
        doc = dict(BASE, scaled={"beta": 0.1, "frame": 4,
                                 "frames_per_window": 50, "windows": 3})
        cfg = write_config(tmp_path, doc)
        main(["scaled", "--config", cfg, "--out", str(tmp_path / "out")])
        summary = read_summary(tmp_path)
        scales = [w["scale"] for w in summary["scaled"]["windows"]]
        assert scales[0] < scales[1] < scales[2]
        csv_text = (tmp_path / "out" / "scaled_windows.csv").read_text()
        assert csv_text.startswith("window,profit_rate,scale")


class TestTraceConvert:
    def test_reject_policy(self, tmp_path):
        trace = tmp_path / "trace.csv"
        trace.write_text("slot,p_1\n0,4.00\n")
        doc = dict(BASE, source={"kind": "trace", "path": str(trace)})
        assert main(["trace-convert", "--config", write_config(tmp_path, doc),
                     "--input", str(trace)]) == 5

    def test_auto_expand(self, tmp_path, capsys):
        trace = tmp_path / "trace.csv"
        trace.write_text("slot,p_1\n0,4.00\n")
        doc = dict(BASE, source={"kind": "trace", "path": str(trace)})
        assert main(["trace-convert", "--config", write_config(tmp_path, doc),
                     "--input", str(trace), "--cap-policy", "auto_expand",
                     "--out", str(tmp_path / "out")]) == 0
        with open(tmp_path / "out" / "summary.json") as fh:
            out = json.load(fh)
        assert out["trace"]["effective_caps"] == ["4.00"]
        assert (tmp_path / "out" / "trace.csv").read_text() \
            == "slot,p_1\n0,4.00\n"
