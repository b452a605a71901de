"""JSON-lines trajectory records for replay checks.

One record per step: {"t", "actions", "rewards", "done", "info"}.  Replay
re-runs the recorded actions on a freshly seeded environment and verifies
the emitted rewards, done flags, and info counters match exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

from cammarl.envs.core import EnvSpec, JointAction, StepOutcome, make_env


def step_record(t: int, joint: JointAction, outcome: StepOutcome) -> dict:
    return {
        "t": t,
        "actions": list(joint.actions),
        "rewards": [float(r) for r in outcome.rewards],
        "done": bool(outcome.done),
        "info": {k: (int(v) if isinstance(v, (bool, int)) else float(v))
                 for k, v in outcome.info.items()},
    }


def write_jsonl(records: list[dict], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def read_jsonl(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line]


def replay(spec: EnvSpec, placement_seed: int, records: list[dict]) -> None:
    """Raise AssertionError if the records do not reproduce on a fresh env."""
    env = make_env(spec)
    env.reset(placement_seed)
    for rec in records:
        outcome = env.step(JointAction(tuple(rec["actions"])))
        got = step_record(rec["t"], JointAction(tuple(rec["actions"])), outcome)
        if got != rec:
            raise AssertionError(f"replay diverged at t={rec['t']}: {got} != {rec}")
        if outcome.done:
            break
