"""Seed sweeps: run training per seed, persist CSVs, checkpoints, trajectories.

A run directory contains config.json (the echoed config), returns.csv,
conformal.csv, summary.json, checkpoints/seed<S>/, and trajectories/.
Failing seeds are recorded in the summary without aborting the sweep.
Outputs carry no timestamps, so a rerun of the same config is
byte-identical.
"""

from __future__ import annotations

import json
import os
import traceback
from pathlib import Path

import numpy as np

from cammarl import rng as rngmod
from cammarl.envs import trajectory
from cammarl.experiments.config import ExperimentConfig
from cammarl.experiments.metrics import (
    CONFORMAL_COLUMNS,
    RETURNS_COLUMNS,
    ConformalRow,
    ReturnRow,
    smooth,
    write_csv,
)
from cammarl.training import TrainRunArtifacts, train

OUT_ROOT_ENV_VAR = "CAMMARL_OUT_ROOT"


def resolve_out_dir(out_dir) -> Path:
    """Relative output dirs land under $CAMMARL_OUT_ROOT when it is set."""
    out_dir = Path(out_dir)
    root = os.environ.get(OUT_ROOT_ENV_VAR)
    if root and not out_dir.is_absolute():
        return Path(root) / out_dir
    return out_dir


def _returns_rows(run_id: str, seed: int, artifacts: TrainRunArtifacts) -> list[ReturnRow]:
    rows = []
    episodes, agents = artifacts.episode_returns.shape
    smoothed = [smooth(artifacts.episode_returns[:, a]) for a in range(agents)]
    for ep in range(episodes):
        for a in range(agents):
            rows.append(ReturnRow(run_id=run_id, seed=seed, episode=ep, agent=a,
                                  ret=float(artifacts.episode_returns[ep, a]),
                                  smoothed_return=float(smoothed[a][ep])))
    return rows


def _conformal_rows(run_id: str, seed: int, artifacts: TrainRunArtifacts) -> list[ConformalRow]:
    rows = []
    for agent_id in sorted(artifacts.conformal_series):
        for update_index, stats in enumerate(artifacts.conformal_series[agent_id]):
            rows.append(ConformalRow(
                run_id=run_id, seed=seed, update=update_index, model_agent=agent_id,
                mean_set_size=stats.mean_set_size, coverage=stats.empirical_coverage,
                cls_accuracy=stats.classifier_accuracy, cls_loss=stats.classifier_loss,
                lam=stats.lam, k_reg=stats.k_reg, tau=stats.tau))
    return rows


def _write_checkpoints(run_dir: Path, seed: int, artifacts: TrainRunArtifacts) -> None:
    ckpt_dir = run_dir / "checkpoints" / f"seed{seed}"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    for agent_id, blob in artifacts.actor_checkpoints.items():
        (ckpt_dir / f"actor_agent{agent_id}.json").write_text(json.dumps(blob))
    for agent_id, blob in artifacts.critic_checkpoints.items():
        (ckpt_dir / f"critic_agent{agent_id}.json").write_text(json.dumps(blob))
    for agent_id, blob in artifacts.classifier_checkpoints.items():
        (ckpt_dir / f"classifier_agent{agent_id}.json").write_text(json.dumps(blob))


def run_experiment(config: ExperimentConfig) -> Path:
    """Execute train() once per seed; returns the run directory."""
    run_id = config.run_id()
    run_dir = resolve_out_dir(config.out_dir) / run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(
        json.dumps(config.to_json_dict(), indent=2, sort_keys=True) + "\n")

    settings = config.train_settings()
    return_rows: list[ReturnRow] = []
    conformal_rows: list[ConformalRow] = []
    completed: list[int] = []
    failures: dict[int, str] = {}
    for seed in config.seeds:
        try:
            artifacts = train(settings, seed)
        except Exception as exc:  # keep sweeping the remaining seeds
            failures[seed] = f"{type(exc).__name__}: {exc}"
            traceback.print_exc()
            continue
        completed.append(seed)
        return_rows.extend(_returns_rows(run_id, seed, artifacts))
        conformal_rows.extend(_conformal_rows(run_id, seed, artifacts))
        _write_checkpoints(run_dir, seed, artifacts)
        if artifacts.first_episode is not None:
            trajectory.write_jsonl(artifacts.first_episode.step_records,
                                   run_dir / "trajectories" / f"seed{seed}_episode0.jsonl")

    write_csv(run_dir / "returns.csv", RETURNS_COLUMNS, return_rows)
    write_csv(run_dir / "conformal.csv", CONFORMAL_COLUMNS, conformal_rows)
    summary = {
        "run_id": run_id,
        "completed_seeds": completed,
        "failed_seeds": {str(s): msg for s, msg in sorted(failures.items())},
        "episodes": config.episodes,
        "mode": config.mode.name,
        "env": config.env_spec.env_name,
    }
    (run_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return run_dir


def replay_trajectory(run_dir, seed: int) -> None:
    """Verify a recorded first-episode trajectory against a fresh environment."""
    run_dir = Path(run_dir)
    config_blob = json.loads((run_dir / "config.json").read_text())
    from cammarl.experiments.config import parse_config

    config = parse_config(config_blob)
    records = trajectory.read_jsonl(run_dir / "trajectories" / f"seed{seed}_episode0.jsonl")
    placement_seed, _, _ = rngmod.episode_streams(seed, 0)
    trajectory.replay(config.env_spec, placement_seed, records)
