"""Point mass in a grid maze.

Layouts are plain text: ``#`` is a wall cell, ``.`` a free cell, one row per
line, top row first. Cell ``(row, col)`` covers ``x in [col, col+1)`` and
``y in [row, row+1)``; positions are in cell units. The border must be wall.
"""

from __future__ import annotations

import math
from importlib import resources
from pathlib import Path

import numpy as np

from hierlab.core import GoalObservation, RewardSpec
from hierlab.e2h_ise import InitSpace, sample_initial
from hierlab.envs.base import GoalEnv

MAX_RESET_ATTEMPTS = 10_000
_MARGIN = 1e-6


def parse_layout(text: str) -> np.ndarray:
    """Boolean wall grid from layout text."""
    rows = [line.rstrip("\r") for line in text.strip("\n").splitlines() if line.strip()]
    if not rows:
        raise ValueError("empty maze layout")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"layout row {i + 1} has width {len(row)}, expected {width}")
        bad = set(row) - {"#", "."}
        if bad:
            raise ValueError(f"layout row {i + 1}: unknown characters {sorted(bad)}")
    walls = np.array([[ch == "#" for ch in row] for row in rows])
    if not (walls[0].all() and walls[-1].all() and walls[:, 0].all() and walls[:, -1].all()):
        raise ValueError("maze layout must be enclosed by walls")
    if walls.all():
        raise ValueError("maze layout has no free cell")
    return walls


def load_layout(path) -> np.ndarray:
    return parse_layout(Path(path).read_text())


def builtin_layout(name: str) -> np.ndarray:
    return parse_layout(resources.files("hierlab.envs").joinpath("layouts", f"{name}.txt").read_text())


def _crossing(x: float, v: float) -> float:
    """Fraction of a step after which ``x + s * v`` leaves its unit cell."""
    if v == 0.0 or math.floor(x + v) == math.floor(x):
        return math.inf
    edge = math.floor(x) + (1.0 if v > 0 else 0.0)
    return (edge - x) / v


class PointMazeEnv(GoalEnv):
    default_gamma = 1.0
    state_dim = 4
    goal_dim = 2

    def __init__(self, walls: np.ndarray, name: str = "maze", tolerance: float = 0.15,
                 horizon: int = 500, accel: float = 0.05, max_speed: float = 0.25):
        super().__init__()
        if max_speed >= 1.0:
            raise ValueError("max_speed must stay below one cell per step")
        self.walls = np.asarray(walls, dtype=bool)
        self.name = name
        self.horizon = horizon
        self.accel = accel
        self.max_speed = max_speed
        self.reward_spec = RewardSpec(tolerance)
        h, w = self.walls.shape
        lo = np.array([1.0, 1.0, 1.0, 1.0])
        hi = np.array([w - 1.0, h - 1.0, w - 1.0, h - 1.0])
        self.init_space = InitSpace(lo, hi)
        self.pos = np.zeros(2)
        self.vel = np.zeros(2)
        self.goal = np.zeros(2)

    def cell(self, p) -> tuple[int, int]:
        return int(math.floor(p[1])), int(math.floor(p[0]))

    def is_free(self, p) -> bool:
        r, c = self.cell(p)
        h, w = self.walls.shape
        return 0 <= r < h and 0 <= c < w and not self.walls[r, c]

    def obs_normalizer(self):
        h, w = self.walls.shape
        half = np.array([w / 2, h / 2])
        center = np.concatenate([half, [0.0, 0.0], half, half])
        scale = np.concatenate([half, [self.max_speed] * 2, half, half])
        return center, scale

    def observe(self) -> GoalObservation:
        return GoalObservation(np.concatenate([self.pos, self.vel]), self.pos.copy(), self.goal.copy())

    def reset(self, c, rng):
        for _ in range(MAX_RESET_ATTEMPTS):
            x = sample_initial(self.init_space, c, rng)
            start, goal = x[:2], x[2:]
            if self.is_free(start) and self.is_free(goal) and self.cell(start) != self.cell(goal):
                break
        else:
            raise ValueError(
                f"could not place start and goal in distinct free cells at c={c} "
                f"after {MAX_RESET_ATTEMPTS} attempts"
            )
        self.pos = start.copy()
        self.goal = goal.copy()
        self.vel = np.zeros(2)
        self._t = 0
        self._active = True
        return self.observe()

    def _advance(self, a):
        vel = self.vel + self.accel * a
        speed = float(np.hypot(vel[0], vel[1]))
        if speed > self.max_speed:
            vel *= self.max_speed / speed
        pos = self.pos.copy()
        # axis-separated moves, taken in the order the straight path crosses grid
        # lines so no wall corner is cut; a blocked axis is clamped to the cell face
        for axis in sorted((0, 1), key=lambda k: _crossing(pos[k], vel[k])):
            trial = pos.copy()
            trial[axis] += vel[axis]
            if not self.is_free(trial):
                face = math.floor(pos[axis])
                trial[axis] = face + 1 - _MARGIN if vel[axis] > 0 else face + _MARGIN
                vel[axis] = 0.0
            pos = trial
        self.pos = pos
        self.vel = vel
