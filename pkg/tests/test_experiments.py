"""Config validation, run directories, smoothing, aggregation, comparison, CLI."""

import json
import math

import numpy as np
import pytest

from cammarl.experiments import cli
from cammarl.experiments.config import ConfigError, load_config, parse_config
from cammarl.experiments.metrics import (
    CONFORMAL_COLUMNS,
    RETURNS_COLUMNS,
    ConformalRow,
    ReturnRow,
    aggregate_seeds,
    compare_modes,
    read_conformal,
    read_returns,
    smooth,
    write_csv,
)
from cammarl.experiments.runner import replay_trajectory, run_experiment

MINIMAL = {"env": "cn", "mode": "cammarl-binary", "seeds": [1]}

FAST_ENV = {"name": "cn", "horizon": 8}


def fast_blob(tmp_path, mode="noam", seeds=(1, 2), episodes=6, **extra):
    blob = {
        "env": FAST_ENV,
        "mode": mode,
        "seeds": list(seeds),
        "episodes": episodes,
        "update_interval": 16,
        "out_dir": str(tmp_path / "runs"),
        "conformal": {"classifier_epochs": 1},
    }
    blob.update(extra)
    return blob


class TestLoadConfig:
    def test_minimal_defaults(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(MINIMAL))
        config = load_config(path)
        assert config.alpha == 0.1
        assert config.lambda_grid == [0.001, 0.01, 0.1, 0.2, 0.5]
        assert config.env_spec.env_name == "cn"
        assert config.env_spec.agent_count == 2
        assert config.mode.name == "cammarl-binary"
        assert config.ppo.gamma == 0.99 and config.ppo.lr == 3e-4

    def test_alpha_out_of_bounds_names_field(self):
        with pytest.raises(ConfigError, match="alpha"):
            parse_config({**MINIMAL, "alpha": 1.5})

    def test_unknown_mode_lists_valid(self):
        with pytest.raises(ConfigError, match="valid modes"):
            parse_config({**MINIMAL, "mode": "psychic"})

    def test_missing_required_fields(self):
        for missing in ("env", "mode", "seeds"):
            blob = {k: v for k, v in MINIMAL.items() if k != missing}
            with pytest.raises(ConfigError, match=missing):
                parse_config(blob)

    def test_empty_seeds_rejected(self):
        with pytest.raises(ConfigError, match="seeds"):
            parse_config({**MINIMAL, "seeds": []})

    def test_unknown_top_level_field(self):
        with pytest.raises(ConfigError, match="frobnicate"):
            parse_config({**MINIMAL, "frobnicate": 1})

    def test_env_object_with_overrides(self):
        config = parse_config({**MINIMAL, "env": {"name": "lbf", "food_count": 2}})
        assert config.env_spec.env_name == "lbf"
        assert config.env_spec.food_count == 2
        assert config.env_spec.grid_size == 12

    def test_invalid_env_parameter(self):
        with pytest.raises(ConfigError, match="env"):
            parse_config({**MINIMAL, "env": {"name": "cn", "landmark_count": 0}})

    def test_bad_json_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(path)

    def test_lambda_grid_validation(self):
        with pytest.raises(ConfigError, match="lambda_grid"):
            parse_config({**MINIMAL, "lambda_grid": []})
        with pytest.raises(ConfigError, match="lambda_grid"):
            parse_config({**MINIMAL, "lambda_grid": [-0.1]})

    def test_run_id_stable_and_out_dir_free(self):
        a = parse_config({**MINIMAL, "out_dir": "x"})
        b = parse_config({**MINIMAL, "out_dir": "y"})
        assert a.run_id() == b.run_id()
        c = parse_config({**MINIMAL, "alpha": 0.2})
        assert c.run_id() != a.run_id()


class TestSmooth:
    def test_constant_series_unchanged(self):
        np.testing.assert_array_equal(smooth(np.full(10, 3.0), 4), np.full(10, 3.0))

    def test_window_one_identity(self):
        x = np.arange(7.0)
        np.testing.assert_array_equal(smooth(x, 1), x)

    def test_alternating_series(self):
        x = np.array([0.0, 1.0] * 5)
        got = smooth(x, 2)
        assert got[0] == 0.0
        np.testing.assert_array_equal(got[1:], np.full(9, 0.5))

    def test_prefix_averaging(self):
        got = smooth(np.array([2.0, 4.0, 6.0, 8.0]), 3)
        np.testing.assert_allclose(got, [2.0, 3.0, 4.0, 6.0])

    def test_empty_series_rejected(self):
        with pytest.raises(ValueError):
            smooth(np.array([]))

    def test_linear(self):
        rng = np.random.default_rng(0)
        x, y = rng.normal(size=50), rng.normal(size=50)
        np.testing.assert_allclose(smooth(2 * x + 3 * y, 7),
                                   2 * smooth(x, 7) + 3 * smooth(y, 7), atol=1e-12)

    def test_idempotent_on_constants(self):
        x = np.full(20, -1.5)
        np.testing.assert_array_equal(smooth(smooth(x, 5), 5), x)


class TestAggregateSeeds:
    def test_identical_series_zero_std(self):
        mean, std, single = aggregate_seeds([np.ones(4), np.ones(4)])
        np.testing.assert_array_equal(mean, np.ones(4))
        np.testing.assert_array_equal(std, np.zeros(4))
        assert not single

    def test_two_seed_formulas(self):
        mean, std, _ = aggregate_seeds([np.zeros(3), np.full(3, 2.0)])
        np.testing.assert_array_equal(mean, np.ones(3))
        np.testing.assert_allclose(std, np.full(3, math.sqrt(2.0)))

    def test_single_seed_flagged(self):
        mean, std, single = aggregate_seeds([np.arange(3.0)])
        assert single
        np.testing.assert_array_equal(std, np.zeros(3))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            aggregate_seeds([np.ones(3), np.ones(4)])


class TestCsvRoundTrip:
    def test_returns_rows(self, tmp_path):
        rows = [ReturnRow("r", 1, 0, 0, -3.25, -3.25),
                ReturnRow("r", 1, 1, 1, -1.0 / 3.0, -0.5)]
        path = tmp_path / "returns.csv"
        write_csv(path, RETURNS_COLUMNS, rows)
        assert read_returns(path) == rows

    def test_conformal_rows(self, tmp_path):
        rows = [ConformalRow("r", 2, 0, 1, 3.5, 0.9125, 0.75, 1.2345, 0.01, 2, 0.87)]
        path = tmp_path / "conformal.csv"
        write_csv(path, CONFORMAL_COLUMNS, rows)
        assert read_conformal(path) == rows


class TestRunExperiment:
    def test_run_directory_contents(self, tmp_path):
        config = parse_config(fast_blob(tmp_path, mode="cammarl-binary", seeds=(1,)))
        run_dir = run_experiment(config)
        assert (run_dir / "config.json").exists()
        assert (run_dir / "summary.json").exists()
        returns = read_returns(run_dir / "returns.csv")
        assert {r.seed for r in returns} == {1}
        assert len(returns) == 6 * 2  # episodes x agents
        assert (run_dir / "checkpoints" / "seed1" / "actor_agent0.json").exists()
        assert (run_dir / "checkpoints" / "seed1" / "classifier_agent1.json").exists()
        assert (run_dir / "trajectories" / "seed1_episode0.jsonl").exists()

    def test_noam_conformal_csv_header_only(self, tmp_path):
        config = parse_config(fast_blob(tmp_path, mode="noam", seeds=(1,)))
        run_dir = run_experiment(config)
        text = (run_dir / "conformal.csv").read_text().strip().splitlines()
        assert len(text) == 1
        assert tuple(text[0].split(",")) == CONFORMAL_COLUMNS

    def test_multiple_seeds_recorded(self, tmp_path):
        config = parse_config(fast_blob(tmp_path, seeds=(1, 2, 3)))
        run_dir = run_experiment(config)
        returns = read_returns(run_dir / "returns.csv")
        assert {r.seed for r in returns} == {1, 2, 3}

    def test_rerun_byte_identical(self, tmp_path):
        config = parse_config(fast_blob(tmp_path, mode="cammarl-binary"))
        first_dir = run_experiment(config)
        first = (first_dir / "returns.csv").read_bytes()
        first_conf = (first_dir / "conformal.csv").read_bytes()
        second_dir = run_experiment(config)
        assert second_dir == first_dir
        assert (second_dir / "returns.csv").read_bytes() == first
        assert (second_dir / "conformal.csv").read_bytes() == first_conf

    def test_seed_isolation_under_reordering(self, tmp_path):
        base = fast_blob(tmp_path, seeds=(1, 2))
        swapped = dict(base, seeds=[2, 1], out_dir=str(tmp_path / "runs2"))
        dir_a = run_experiment(parse_config(base))
        dir_b = run_experiment(parse_config(swapped))
        rows_a = {(r.seed, r.episode, r.agent): r.ret for r in read_returns(dir_a / "returns.csv")}
        rows_b = {(r.seed, r.episode, r.agent): r.ret for r in read_returns(dir_b / "returns.csv")}
        assert rows_a == rows_b

    def test_failing_seed_does_not_abort_sweep(self, tmp_path, monkeypatch):
        import cammarl.experiments.runner as runner_mod

        real_train = runner_mod.train

        def flaky(settings, seed):
            if seed == 2:
                raise RuntimeError("injected failure")
            return real_train(settings, seed)

        monkeypatch.setattr(runner_mod, "train", flaky)
        config = parse_config(fast_blob(tmp_path, seeds=(1, 2, 3)))
        run_dir = run_experiment(config)
        summary = json.loads((run_dir / "summary.json").read_text())
        assert summary["completed_seeds"] == [1, 3]
        assert "2" in summary["failed_seeds"]
        returns = read_returns(run_dir / "returns.csv")
        assert {r.seed for r in returns} == {1, 3}

    def test_trajectory_replays(self, tmp_path):
        config = parse_config(fast_blob(tmp_path, mode="cammarl-binary", seeds=(1,)))
        run_dir = run_experiment(config)
        replay_trajectory(run_dir, seed=1)

    def test_out_root_env_var(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CAMMARL_OUT_ROOT", str(tmp_path / "root"))
        config = parse_config(dict(fast_blob(tmp_path, seeds=(1,)), out_dir="rel"))
        run_dir = run_experiment(config)
        assert run_dir.parent == tmp_path / "root" / "rel"


class TestCompareModes:
    def _three_runs(self, tmp_path):
        dirs = []
        for mode in ("giam", "cammarl-binary", "noam"):
            config = parse_config(fast_blob(tmp_path, mode=mode, seeds=(1, 2)))
            dirs.append(run_experiment(config))
        return dirs

    def test_ranked_table_shape(self, tmp_path):
        report = compare_modes(self._three_runs(tmp_path))
        assert len(report.ranked) == 3
        assert report.ordering_holds is not None
        table = report.format_table()
        assert "giam" in table and "noam" in table

    def test_identical_runs_tie(self, tmp_path):
        config = parse_config(fast_blob(tmp_path, mode="noam"))
        dir_a = run_experiment(config)
        dir_b = run_experiment(parse_config(dict(fast_blob(tmp_path, mode="noam"),
                                                 out_dir=str(tmp_path / "runs2"))))
        report = compare_modes([dir_a, dir_b])
        assert report.ties == [("noam", "noam")]

    def test_incompatible_runs_rejected(self, tmp_path):
        a = run_experiment(parse_config(fast_blob(tmp_path, episodes=6)))
        b = run_experiment(parse_config(dict(fast_blob(tmp_path, episodes=8),
                                             out_dir=str(tmp_path / "runs2"))))
        with pytest.raises(ValueError, match="incompatible"):
            compare_modes([a, b])


class TestCli:
    def _write_config(self, tmp_path, blob):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(blob))
        return str(path)

    def test_validate_ok(self, tmp_path, capsys):
        path = self._write_config(tmp_path, MINIMAL)
        assert cli.main(["validate", "--config", path]) == 0
        assert "cammarl-binary" in capsys.readouterr().out

    def test_validate_bad_config(self, tmp_path, capsys):
        path = self._write_config(tmp_path, {**MINIMAL, "alpha": 7})
        assert cli.main(["validate", "--config", path]) == 1
        assert "alpha" in capsys.readouterr().err

    def test_missing_file_is_config_error(self, tmp_path):
        assert cli.main(["validate", "--config", str(tmp_path / "nope.json")]) == 1

    def test_run_and_compare_end_to_end(self, tmp_path, capsys):
        path = self._write_config(tmp_path, fast_blob(tmp_path, mode="noam", seeds=(1,)))
        assert cli.main(["run", "--config", path]) == 0
        out = capsys.readouterr().out
        run_dir = out.split("run directory: ")[1].splitlines()[0]
        assert cli.main(["compare", "--runs", run_dir]) == 0
        assert "noam" in capsys.readouterr().out

    def test_run_overrides(self, tmp_path, capsys):
        path = self._write_config(tmp_path, fast_blob(tmp_path, mode="noam", seeds=(1, 2)))
        assert cli.main(["run", "--config", path, "--seeds", "5",
                         "--out", str(tmp_path / "override")]) == 0
        out = capsys.readouterr().out
        assert "completed seeds: [5]" in out
        assert str(tmp_path / "override") in out

    def test_run_bad_override_is_config_error(self, tmp_path):
        path = self._write_config(tmp_path, fast_blob(tmp_path))
        assert cli.main(["run", "--config", path, "--mode", "nonsense"]) == 1

    def test_compare_missing_dir_is_config_error(self, tmp_path):
        assert cli.main(["compare", "--runs", str(tmp_path / "ghost")]) == 1

    def test_failed_seed_gives_runtime_exit(self, tmp_path, monkeypatch):
        import cammarl.experiments.runner as runner_mod

        def always_fail(settings, seed):
            raise RuntimeError("boom")

        monkeypatch.setattr(runner_mod, "train", always_fail)
        path = self._write_config(tmp_path, fast_blob(tmp_path, seeds=(1,)))
        assert cli.main(["run", "--config", path]) == 2
