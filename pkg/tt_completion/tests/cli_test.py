import json
from unittest.mock import patch

import pandas as pd
import pytest

from tt_completion.cli import build_parser, main
from tt_completion.data.tensor_io import write_observations
from tt_completion.errors import NumericalFailureError
from tt_completion.tensor.observation import observe, sample_mask
from tt_completion.tensor.tt_core import random_tt


@pytest.fixture
def obs_csv(tmp_path):
    tt = random_tt((3, 3, 3), (2, 2), seed=12)
    obs = observe(tt, sample_mask(tt.shape, 20, seed=12), 0.0, seed=12)
    return write_observations(tmp_path / "obs.csv", obs)


class TestParser:
    """Argument parsing and usage errors"""

    def test_missing_command(self):
        with pytest.raises(SystemExit) as info:
            main([])
        assert info.value.code == 1

    def test_bad_list(self):
        with pytest.raises(SystemExit) as info:
            main(["synth", "--shape", "3,x"])
        assert info.value.code == 1

    def test_markov_requires_a_source(self):
        with pytest.raises(SystemExit) as info:
            main(["markov", "--orders", "2"])
        assert info.value.code == 1

    def test_defaults(self):
        args = build_parser().parse_args(["synth", "--preset", "grid-k5"])
        assert args.lambdas == [1.0, 3.0, 5.0]
        assert args.solver == "both"
        assert args.trials == 10

    def test_bench_sparsity_defaults_to_log_rule(self):
        args = build_parser().parse_args(["bench"])
        assert args.s == "log"
        assert args.orders == [4, 5, 6, 7, 8, 9, 10]

    def test_sparsity_rules_parse(self):
        assert build_parser().parse_args(["bench", "--s", "sqrt"]).s == "sqrt"
        assert build_parser().parse_args(["bench", "--s", "4"]).s == 4.0


class TestExitCodes:
    """Exit status of each subcommand"""

    def test_invalid_configuration(self, tmp_path):
        assert main(["synth", "--shape", "3,3", "--ratio", "2.0", "--out", str(tmp_path / "s.csv")]) == 1

    def test_missing_observation_file(self, tmp_path):
        assert main(["complete", "--obs", str(tmp_path / "absent.csv")]) == 1

    def test_dense_cap_on_complete(self, obs_csv, tmp_path):
        code = main([
            "complete", "--obs", str(obs_csv), "--solver", "admm",
            "--shape", ",".join(["10"] * 8), "--out-dir", str(tmp_path),
        ])
        assert code == 3

    def test_complete_rals(self, obs_csv, tmp_path, capsys):
        code = main([
            "complete", "--obs", str(obs_csv), "--rank", "2", "--d", "3", "--s", "2",
            "--sweeps", "2", "--inner-iters", "2", "--eta", "0.001", "--lambda", "0.0001",
            "--out-dir", str(tmp_path / "out"),
        ])
        assert code == 0
        printed = json.loads(capsys.readouterr().out)
        assert printed["estimate"].endswith("completion.tt")
        assert (tmp_path / "out" / "completion_report.json").exists()

    def test_synth_small_grid(self, tmp_path):
        out = tmp_path / "synth.csv"
        trend = tmp_path / "trend.json"
        code = main([
            "synth", "--shape", "3,3,3", "--ranks", "1,2", "--trials", "1", "--lambda", "0.01",
            "--solver", "admm", "--max-iter", "30", "--out", str(out), "--trend", str(trend),
        ])
        assert code == 0
        assert len(pd.read_csv(out)) == 4
        assert "admm" in json.loads(trend.read_text())

    def test_markov_simulated(self, tmp_path):
        out = tmp_path / "markov.csv"
        code = main([
            "markov", "--simulate-order", "1", "--length", "500", "--bins", "2", "--orders", "2,3",
            "--n", "4", "--solver", "admm", "--max-iter", "20", "--out", str(out),
        ])
        assert code == 0
        assert list(pd.read_csv(out)["K"]) == [2, 3]

    def test_bench_small(self, tmp_path):
        out = tmp_path / "bench.csv"
        code = main([
            "bench", "--orders", "3", "--dim", "3", "--rank", "1", "--n", "10", "--d", "2", "--s", "2",
            "--admm-dim", "2", "--admm-orders", "2", "--admm-iters", "2", "--out", str(out),
        ])
        assert code == 0
        assert (tmp_path / "bench.json").exists()

    def test_worst_row_status_is_returned(self, tmp_path):
        failing = pd.DataFrame({"solver": ["rals"], "status": ["numerical_failure"], "ranks": ["1-1"], "error": [float("nan")]})
        with patch("tt_completion.cli.ExperimentManager") as manager_cls:
            manager = manager_cls.return_value
            manager.run.return_value = failing
            code = main(["synth", "--shape", "3,3,3", "--out", str(tmp_path / "s.csv")])
        assert code == 2

    def test_uncaught_numerical_failure(self, obs_csv):
        with patch("tt_completion.cli.ExperimentManager") as manager_cls:
            manager_cls.return_value.run.side_effect = NumericalFailureError("svd did not converge")
            assert main(["complete", "--obs", str(obs_csv)]) == 2
