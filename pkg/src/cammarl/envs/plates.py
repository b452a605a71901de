"""Pressure plate: a vertical chain of rooms gated by plate-held doors.

Fixed 4-agent map: five 3-row rooms stacked on a 9-column grid, separated
by wall rows with a single door cell at column 4.  Plate j sits in the
middle row of room j at column 2 (off the door corridor, so a held plate
never blocks the runner) and gates door j, the boundary between rooms j
and j+1; a door is open exactly while any agent stands on its plate.  The
goal cell sits in the last room; reaching it ends the episode.

Agent j's desired room is room j.  Inside that room the reward is the
negated Manhattan distance to its plate, normalized so the farthest room
cell scores -1; outside it the reward is the negated absolute difference
between current and desired room numbers.

Agents start at seeded distinct cells of room 0 and move one cell per step
(stay/left/right/down/up).  Moves into walls, closed doors, or off-grid
are cancelled; simultaneous moves use the claim rule (a cell claimed twice
moves nobody).  Door states gate movement using the plate occupancy from
the start of the step, so walking off a plate closes its door only for the
following step.

Observation layout (``layout_id="pp/v1"``): an egocentric 5x5 crop of four
binary channels (agents, plates, closed doors, goal) flattened
channel-major, then own (row, col) normalized by the grid dimensions;
out-of-bounds cells read 0.  Length 4*25 + 2 = 102.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cammarl.envs.core import EnvSpec, Environment, JointAction, Observation, StepOutcome, register
from cammarl.envs.foraging import resolve_moves

PP_ACTION_COUNT = 5  # 0: stay, 1: left, 2: right, 3: down (+row), 4: up (-row)
_MOVES = {1: (0, -1), 2: (0, 1), 3: (1, 0), 4: (-1, 0)}

N_ROOMS = 5
ROOM_ROWS = 3
N_COLS = 9
N_ROWS = N_ROOMS * ROOM_ROWS + (N_ROOMS - 1)  # 19
DOOR_COL = 4
PLATE_COL = 2
CROP = 5


def room_of_row(row: int) -> int:
    """Room index for a row; a boundary's wall row counts with the room above it."""
    return min(row // (ROOM_ROWS + 1), N_ROOMS - 1)


def wall_row(boundary: int) -> int:
    return boundary * (ROOM_ROWS + 1) + ROOM_ROWS


def room_rows(room: int) -> range:
    start = room * (ROOM_ROWS + 1)
    return range(start, start + ROOM_ROWS)


PLATE_CELLS = [(room * (ROOM_ROWS + 1) + 1, PLATE_COL) for room in range(N_ROOMS - 1)]
DOOR_CELLS = [(wall_row(b), DOOR_COL) for b in range(N_ROOMS - 1)]
GOAL_CELL = ((N_ROOMS - 1) * (ROOM_ROWS + 1) + 1, DOOR_COL)


@dataclass
class PpWorld:
    agent_cells: list[tuple[int, int]]
    clock: int = 0

    @property
    def plate_cells(self) -> list[tuple[int, int]]:
        return PLATE_CELLS

    @property
    def door_cells(self) -> list[tuple[int, int]]:
        return DOOR_CELLS

    @property
    def goal_cell(self) -> tuple[int, int]:
        return GOAL_CELL


def pp_door_state(world: PpWorld) -> list[bool]:
    """Door d is open iff its plate cell is occupied by any agent."""
    occupied = set(world.agent_cells)
    return [plate in occupied for plate in PLATE_CELLS]


def _room_normalizer(room: int) -> int:
    plate = PLATE_CELLS[room]
    return max(abs(r - plate[0]) + abs(c - plate[1])
               for r in room_rows(room) for c in range(N_COLS))


def pp_reward(world: PpWorld, agent: int) -> float:
    """Distance shaping toward the agent's plate, room-difference penalty outside."""
    row, col = world.agent_cells[agent]
    desired = agent
    current = room_of_row(row)
    if current == desired:
        plate = PLATE_CELLS[desired]
        dist = abs(row - plate[0]) + abs(col - plate[1])
        return -dist / _room_normalizer(desired)
    return -float(abs(current - desired))


def _standable(cell: tuple[int, int], doors_open: list[bool]) -> bool:
    r, c = cell
    if not (0 <= r < N_ROWS and 0 <= c < N_COLS):
        return False
    if r % (ROOM_ROWS + 1) == ROOM_ROWS:  # wall row
        boundary = r // (ROOM_ROWS + 1)
        return c == DOOR_COL and doors_open[boundary]
    return True


class PressurePlateEnv(Environment):
    def __init__(self, spec: EnvSpec):
        super().__init__(spec)
        self._world: PpWorld | None = None
        self._done = True

    def observation_dim(self, agent: int) -> int:
        return 4 * CROP * CROP + 2

    def action_count(self, agent: int) -> int:
        return PP_ACTION_COUNT

    @property
    def world(self) -> PpWorld:
        return self._world

    def reset(self, seed: int) -> list[Observation]:
        rng = np.random.default_rng(seed)
        room0 = [(r, c) for r in room_rows(0) for c in range(N_COLS)]
        picks = rng.choice(len(room0), size=self.agent_count, replace=False)
        self._world = PpWorld(agent_cells=[room0[int(i)] for i in picks])
        self._done = False
        return [self._observe(i) for i in range(self.agent_count)]

    def _observe(self, agent: int) -> Observation:
        w = self._world
        row, col = w.agent_cells[agent]
        half = CROP // 2
        channels = np.zeros((4, CROP, CROP))
        doors_open = pp_door_state(w)
        closed = {cell for cell, is_open in zip(DOOR_CELLS, doors_open) if not is_open}
        marks = (set(w.agent_cells), set(PLATE_CELLS), closed, {GOAL_CELL})
        for ch, cells in enumerate(marks):
            for (r, c) in cells:
                dr, dc = r - row + half, c - col + half
                if 0 <= dr < CROP and 0 <= dc < CROP:
                    channels[ch, dr, dc] = 1.0
        own = np.array([row / N_ROWS, col / N_COLS])
        return Observation(values=np.concatenate([channels.ravel(), own]), layout_id="pp/v1")

    def step(self, joint: JointAction) -> StepOutcome:
        self._check_joint(joint, self._done)
        w = self._world
        doors_open = pp_door_state(w)  # occupancy at the start of the step gates motion
        targets = []
        for i, a in enumerate(joint.actions):
            r, c = w.agent_cells[i]
            if a in _MOVES:
                dr, dc = _MOVES[a]
                cand = (r + dr, c + dc)
                if _standable(cand, doors_open):
                    targets.append(cand)
                    continue
            targets.append((r, c))
        w.agent_cells = resolve_moves(w.agent_cells, targets)
        w.clock += 1
        rewards = [pp_reward(w, i) for i in range(self.agent_count)]
        reached = GOAL_CELL in w.agent_cells
        self._done = reached or w.clock >= self.horizon
        obs = [self._observe(i) for i in range(self.agent_count)]
        return StepOutcome(
            observations=obs,
            rewards=rewards,
            done=self._done,
            info={"goal_reached": int(reached), "doors_open": sum(pp_door_state(w))},
        )


def _validate(spec: EnvSpec) -> None:
    if spec.agent_count != N_ROOMS - 1:
        raise ValueError(f"the fixed pressure-plate map supports exactly "
                         f"{N_ROOMS - 1} agents, got {spec.agent_count}")


register("pressure_plate", PressurePlateEnv, _validate)
