"""Metrics rows, CSV persistence, smoothing, and cross-run comparison."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

RETURNS_COLUMNS = ("run_id", "seed", "episode", "agent", "return", "smoothed_return")
CONFORMAL_COLUMNS = ("run_id", "seed", "update", "model_agent", "mean_set_size",
                     "coverage", "cls_accuracy", "cls_loss", "lambda", "k_reg", "tau")

SMOOTH_WINDOW = 100
FINAL_WINDOW_FRACTION = 0.1


@dataclass
class ReturnRow:
    run_id: str
    seed: int
    episode: int
    agent: int
    ret: float
    smoothed_return: float

    def to_csv(self) -> list[str]:
        return [self.run_id, str(self.seed), str(self.episode), str(self.agent),
                str(self.ret), str(self.smoothed_return)]

    @classmethod
    def from_csv(cls, row: list[str]) -> "ReturnRow":
        return cls(row[0], int(row[1]), int(row[2]), int(row[3]), float(row[4]), float(row[5]))


@dataclass
class ConformalRow:
    run_id: str
    seed: int
    update: int
    model_agent: int
    mean_set_size: float
    coverage: float
    cls_accuracy: float
    cls_loss: float
    lam: float
    k_reg: int
    tau: float

    def to_csv(self) -> list[str]:
        return [self.run_id, str(self.seed), str(self.update), str(self.model_agent),
                str(self.mean_set_size), str(self.coverage), str(self.cls_accuracy),
                str(self.cls_loss), str(self.lam), str(self.k_reg), str(self.tau)]

    @classmethod
    def from_csv(cls, row: list[str]) -> "ConformalRow":
        return cls(row[0], int(row[1]), int(row[2]), int(row[3]), float(row[4]),
                   float(row[5]), float(row[6]), float(row[7]), float(row[8]),
                   int(row[9]), float(row[10]))


def write_csv(path, columns, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(row.to_csv())


def read_returns(path) -> list[ReturnRow]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != RETURNS_COLUMNS:
            raise ValueError(f"unexpected returns.csv header {header}")
        return [ReturnRow.from_csv(row) for row in reader]


def read_conformal(path) -> list[ConformalRow]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CONFORMAL_COLUMNS:
            raise ValueError(f"unexpected conformal.csv header {header}")
        return [ConformalRow.from_csv(row) for row in reader]


def smooth(series, window: int = SMOOTH_WINDOW) -> np.ndarray:
    """Trailing moving average; the first window-1 entries average the prefix."""
    x = np.asarray(series, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty series")
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    cumulative = np.concatenate(([0.0], np.cumsum(x)))
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (cumulative[idx] - cumulative[lo]) / (idx - lo)


def aggregate_seeds(series_by_seed) -> tuple[np.ndarray, np.ndarray, bool]:
    """Element-wise mean and sample std across seeds.

    Returns (mean, std, single_seed).  A single seed yields zero std by
    convention and raises the flag.
    """
    arrays = [np.asarray(s, dtype=np.float64) for s in series_by_seed]
    if not arrays:
        raise ValueError("no series to aggregate")
    length = arrays[0].size
    if any(a.size != length for a in arrays):
        raise ValueError("series lengths differ across seeds")
    stacked = np.stack(arrays)
    mean = stacked.mean(axis=0)
    if stacked.shape[0] == 1:
        return mean, np.zeros(length), True
    return mean, stacked.std(axis=0, ddof=1), False


@dataclass
class ModeSummary:
    mode: str
    run_dir: str
    final_mean: float
    seed_std: float
    seed_means: dict[int, float]


@dataclass
class ComparisonReport:
    ranked: list[ModeSummary]            # best final-window mean first
    episodes: int
    env_name: str
    ties: list[tuple[str, str]]
    ordering_holds: bool | None          # GIAM >= CAMMARL >= NOAM beyond 1 pooled std
    pairwise_gaps: list[dict]

    def format_table(self) -> str:
        lines = [f"env={self.env_name} episodes={self.episodes} "
                 f"final_window={FINAL_WINDOW_FRACTION:.0%}"]
        lines.append(f"{'rank':<5}{'mode':<22}{'final_mean':>14}{'seed_std':>12}")
        for rank, summary in enumerate(self.ranked, start=1):
            lines.append(f"{rank:<5}{summary.mode:<22}{summary.final_mean:>14.4f}"
                         f"{summary.seed_std:>12.4f}")
        for a, b in self.ties:
            lines.append(f"tie: {a} == {b}")
        if self.ordering_holds is not None:
            verdict = "holds" if self.ordering_holds else "does NOT hold"
            lines.append(f"ordering giam >= cammarl >= noam beyond 1 pooled std: {verdict}")
        return "\n".join(lines)


def _final_window_means(rows: list[ReturnRow], episodes: int) -> dict[int, float]:
    """Per-seed mean of the smoothed agent-averaged series over the last 10%."""
    start = episodes - max(1, int(math.ceil(episodes * FINAL_WINDOW_FRACTION)))
    by_seed: dict[int, dict[int, list[float]]] = {}
    for row in rows:
        by_seed.setdefault(row.seed, {}).setdefault(row.episode, []).append(row.ret)
    means: dict[int, float] = {}
    for seed, per_episode in by_seed.items():
        if len(per_episode) != episodes:
            raise ValueError(f"seed {seed} has {len(per_episode)} episodes, expected {episodes}")
        series = np.array([float(np.mean(per_episode[ep])) for ep in range(episodes)])
        means[seed] = float(smooth(series)[start:].mean())
    return means


def summarize_run(run_dir) -> tuple[str, str, int, dict[int, float]]:
    """(mode, env_name, episodes, per-seed final-window means) for one run dir."""
    import json

    run_dir = Path(run_dir)
    config = json.loads((run_dir / "config.json").read_text())
    rows = read_returns(run_dir / "returns.csv")
    episodes = int(config["episodes"])
    env_name = config["env"]["env_name"]
    mode = config["mode"]
    return mode, env_name, episodes, _final_window_means(rows, episodes)


def compare_modes(run_dirs) -> ComparisonReport:
    """Rank runs by final-window smoothed mean return; flag the mode ordering."""
    summaries: list[ModeSummary] = []
    env_names = set()
    episode_counts = set()
    for run_dir in run_dirs:
        mode, env_name, episodes, seed_means = summarize_run(run_dir)
        env_names.add(env_name)
        episode_counts.add(episodes)
        values = np.array(list(seed_means.values()))
        std = float(values.std(ddof=1)) if values.size > 1 else 0.0
        summaries.append(ModeSummary(mode=mode, run_dir=str(run_dir),
                                     final_mean=float(values.mean()), seed_std=std,
                                     seed_means=seed_means))
    if len(env_names) > 1 or len(episode_counts) > 1:
        raise ValueError(f"incompatible runs: envs={sorted(env_names)}, "
                         f"episode counts={sorted(episode_counts)}")
    ranked = sorted(summaries, key=lambda s: -s.final_mean)
    ties = [(a.mode, b.mode) for a, b in zip(ranked, ranked[1:])
            if a.final_mean == b.final_mean]

    pairwise = []
    for a, b in zip(ranked, ranked[1:]):
        pooled = math.sqrt(0.5 * (a.seed_std**2 + b.seed_std**2))
        gap = a.final_mean - b.final_mean
        pairwise.append({"better": a.mode, "worse": b.mode, "gap": gap,
                         "pooled_std": pooled, "beyond_one_std": gap > pooled})

    by_mode = {s.mode: s for s in summaries}
    cammarl_modes = [m for m in by_mode if m.startswith("cammarl")]
    ordering: bool | None = None
    if "giam" in by_mode and "noam" in by_mode and len(cammarl_modes) == 1:
        giam, noam = by_mode["giam"], by_mode["noam"]
        cam = by_mode[cammarl_modes[0]]

        def beyond(better: ModeSummary, worse: ModeSummary) -> bool:
            pooled = math.sqrt(0.5 * (better.seed_std**2 + worse.seed_std**2))
            return better.final_mean - worse.final_mean > pooled

        ordering = beyond(giam, cam) or abs(giam.final_mean - cam.final_mean) <= math.sqrt(
            0.5 * (giam.seed_std**2 + cam.seed_std**2))
        ordering = ordering and beyond(cam, noam)

    episodes = next(iter(episode_counts)) if episode_counts else 0
    env_name = next(iter(env_names)) if env_names else ""
    return ComparisonReport(ranked=ranked, episodes=episodes, env_name=env_name,
                            ties=ties, ordering_holds=ordering, pairwise_gaps=pairwise)
