"""Level-based foraging on a square grid with sparse, normalized rewards.

Agents carry levels and try to load foods; a load succeeds when the summed
levels of the agents loading a food reach its level.  Successful loaders
split the food's level in proportion to their own levels, and everything
is divided by the total food level spawned, so one agent collecting every
food alone would bank exactly 1.0 over the episode.

With the cooperative flag on, every food's level equals the sum of all
agent levels, so no agent can load anything alone.  With it off, food
levels are drawn from [1, max agent level] and solo play works.

Movement is simultaneous: every agent claims a target cell (its own cell
when it stays, loads, or walks into a wall or food); any cell claimed more
than once keeps all claimants in place.  Simultaneous loads are resolved
in food-index order; food placement keeps foods pairwise Manhattan
distance >= 3 apart so a loader is never adjacent to two foods.

Observation layout (``layout_id="lbf/v1"``), grid-normalized:
  [own row, own col, own level,
   per food in index order: (relative row, relative col, level if alive else 0),
   per other agent ascending id: (relative row, relative col, level)]
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cammarl.envs.core import EnvSpec, Environment, JointAction, Observation, StepOutcome, register

# 0: none, 1: up (-row), 2: down (+row), 3: left (-col), 4: right (+col), 5: load
LBF_ACTION_COUNT = 6
LOAD = 5
_MOVES = {1: (-1, 0), 2: (1, 0), 3: (0, -1), 4: (0, 1)}


@dataclass
class LoadOutcome:
    success: bool
    food_level: int
    loader_levels: list[int]


@dataclass
class LbfWorld:
    grid_size: int
    agent_cells: list[tuple[int, int]]
    agent_levels: list[int]
    food_cells: list[tuple[int, int]]
    food_levels: list[int]
    food_alive: list[bool]
    cooperative: bool
    clock: int = 0

    @property
    def total_food_level(self) -> int:
        return sum(self.food_levels)

    def foods_remaining(self) -> int:
        return sum(self.food_alive)


def _adjacent(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1


def lbf_attempt_load(world: LbfWorld, loaders, food: int) -> LoadOutcome:
    """Pool the loaders' levels against one food; clears its alive flag on success."""
    if not 0 <= food < len(world.food_cells):
        raise ValueError(f"food index {food} out of range")
    loaders = sorted(loaders)
    levels = [world.agent_levels[i] for i in loaders]
    success = world.food_alive[food] and sum(levels) >= world.food_levels[food]
    if success:
        world.food_alive[food] = False
    return LoadOutcome(success=success, food_level=world.food_levels[food], loader_levels=levels)


def lbf_reward(food_level: int, loader_levels, total_food_level: int = 1) -> np.ndarray:
    """Per-loader shares: food level split by level contribution, normalized.

    Dividing by the total food level spawned keeps any agent's episode
    return within [0, 1].
    """
    levels = np.asarray(list(loader_levels), dtype=np.float64)
    if levels.size == 0:
        raise ValueError("empty loader list")
    return food_level * levels / (levels.sum() * float(total_food_level))


def resolve_moves(cells: list[tuple[int, int]], targets: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Simultaneous movement: a target claimed by more than one agent moves nobody."""
    claims: dict[tuple[int, int], int] = {}
    for t in targets:
        claims[t] = claims.get(t, 0) + 1
    return [t if claims[t] == 1 else c for c, t in zip(cells, targets)]


class LevelBasedForagingEnv(Environment):
    def __init__(self, spec: EnvSpec):
        super().__init__(spec)
        self._world: LbfWorld | None = None
        self._done = True

    def observation_dim(self, agent: int) -> int:
        return 3 + 3 * self.spec.food_count + 3 * (self.agent_count - 1)

    def action_count(self, agent: int) -> int:
        return LBF_ACTION_COUNT

    @property
    def world(self) -> LbfWorld:
        return self._world

    def reset(self, seed: int) -> list[Observation]:
        rng = np.random.default_rng(seed)
        g, k, f = self.spec.grid_size, self.agent_count, self.spec.food_count
        levels = [int(rng.integers(1, self.spec.max_agent_level + 1)) for _ in range(k)]
        food_cells: list[tuple[int, int]] = []
        while len(food_cells) < f:
            cell = (int(rng.integers(1, g - 1)), int(rng.integers(1, g - 1)))
            if all(abs(cell[0] - c[0]) + abs(cell[1] - c[1]) >= 3 for c in food_cells):
                food_cells.append(cell)
        if self.spec.cooperative:
            food_levels = [sum(levels)] * f
        else:
            food_levels = [int(rng.integers(1, max(levels) + 1)) for _ in range(f)]
        agent_cells: list[tuple[int, int]] = []
        taken = set(food_cells)
        while len(agent_cells) < k:
            cell = (int(rng.integers(0, g)), int(rng.integers(0, g)))
            if cell not in taken:
                agent_cells.append(cell)
                taken.add(cell)
        self._world = LbfWorld(
            grid_size=g,
            agent_cells=agent_cells,
            agent_levels=levels,
            food_cells=food_cells,
            food_levels=food_levels,
            food_alive=[True] * f,
            cooperative=self.spec.cooperative,
        )
        self._done = False
        return [self._observe(i) for i in range(k)]

    def _observe(self, agent: int) -> Observation:
        w = self._world
        g = float(w.grid_size)
        r, c = w.agent_cells[agent]
        lmax = float(self.spec.max_agent_level)
        vals = [r / g, c / g, w.agent_levels[agent] / lmax]
        for (fr, fc), lvl, alive in zip(w.food_cells, w.food_levels, w.food_alive):
            vals += [(fr - r) / g, (fc - c) / g, (lvl / lmax) if alive else 0.0]
        for j in range(self.agent_count):
            if j == agent:
                continue
            orr, oc = w.agent_cells[j]
            vals += [(orr - r) / g, (oc - c) / g, w.agent_levels[j] / lmax]
        return Observation(values=np.asarray(vals), layout_id="lbf/v1")

    def step(self, joint: JointAction) -> StepOutcome:
        self._check_joint(joint, self._done)
        w = self._world
        g = w.grid_size
        blocked = {cell for cell, alive in zip(w.food_cells, w.food_alive) if alive}
        targets = []
        for i, a in enumerate(joint.actions):
            r, c = w.agent_cells[i]
            if a in _MOVES:
                dr, dc = _MOVES[a]
                nr, nc = r + dr, c + dc
                if 0 <= nr < g and 0 <= nc < g and (nr, nc) not in blocked:
                    targets.append((nr, nc))
                    continue
            targets.append((r, c))
        w.agent_cells = resolve_moves(w.agent_cells, targets)

        rewards = [0.0] * self.agent_count
        loads = 0
        loaders_by_food: dict[int, list[int]] = {}
        for i, a in enumerate(joint.actions):
            if a != LOAD:
                continue
            for fi, (cell, alive) in enumerate(zip(w.food_cells, w.food_alive)):
                if alive and _adjacent(w.agent_cells[i], cell):
                    loaders_by_food.setdefault(fi, []).append(i)
                    break
        for fi in sorted(loaders_by_food):
            loaders = loaders_by_food[fi]
            outcome = lbf_attempt_load(w, loaders, fi)
            if outcome.success:
                loads += 1
                shares = lbf_reward(outcome.food_level, outcome.loader_levels, w.total_food_level)
                for agent, share in zip(sorted(loaders), shares):
                    rewards[agent] += float(share)

        w.clock += 1
        self._done = w.clock >= self.horizon or w.foods_remaining() == 0
        obs = [self._observe(i) for i in range(self.agent_count)]
        return StepOutcome(
            observations=obs,
            rewards=rewards,
            done=self._done,
            info={"foods_remaining": w.foods_remaining(), "loads": loads},
        )


def _validate(spec: EnvSpec) -> None:
    if spec.grid_size < 3:
        raise ValueError(f"grid_size must be >= 3, got {spec.grid_size}")
    if spec.food_count < 1:
        raise ValueError(f"food_count must be >= 1, got {spec.food_count}")
    if spec.max_agent_level < 1:
        raise ValueError(f"max_agent_level must be >= 1, got {spec.max_agent_level}")
    # interior placement with spacing needs room
    capacity = (spec.grid_size - 2) ** 2
    if spec.food_count * 5 > capacity:
        raise ValueError(f"{spec.food_count} foods cannot be spaced on a "
                         f"{spec.grid_size}x{spec.grid_size} grid")


register("lbf", LevelBasedForagingEnv, _validate)
