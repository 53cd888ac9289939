"""Easy-to-hard initial-state-entropy curriculum.

A scalar ``c`` in [0, 1] shrinks the uniform initial state-goal box towards
its centre: ``c = 0`` always starts at the centre, ``c = 1`` is the full box.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

C_MODES = ("predefined", "self_paced", "control", "control_adaptive")


@dataclass
class CController:
    mode: str = "self_paced"
    c: float = 0.0
    delta: float = 0.05
    psi_high: float = 0.8
    psi_low: float = 0.0
    psi: float = 0.5
    psi_max: float = 0.9
    shift: float = 0.2
    window: int = 50
    z_sat: float = 0.5
    train_window: deque = field(init=False, repr=False)
    eval_window: deque = field(init=False, repr=False)

    def __post_init__(self):
        if self.mode not in C_MODES:
            raise ValueError(f"unknown c mode {self.mode!r}; expected one of {C_MODES}")
        if not 0.0 <= self.c <= 1.0:
            raise ValueError(f"c must lie in [0, 1], got {self.c}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")
        if not 0.0 <= self.shift <= 1.0:
            raise ValueError(f"shift must lie in [0, 1], got {self.shift}")
        if self.window <= 0:
            raise ValueError("window must be positive")
        if not 0.0 < self.z_sat <= 1.0:
            raise ValueError(f"z_sat must lie in (0, 1], got {self.z_sat}")
        self.train_window = deque(maxlen=self.window)
        self.eval_window = deque(maxlen=self.window)

    @property
    def train_rate(self) -> float:
        return sum(self.train_window) / len(self.train_window)

    @property
    def target(self) -> float:
        """Success-rate target of the control rules (adaptive: eval mean + shift, capped)."""
        if self.mode != "control_adaptive":
            return self.psi
        mean_eval = sum(self.eval_window) / len(self.eval_window) if self.eval_window else 0.0
        return min(self.psi_max, self.shift + mean_eval)

    def record_train_outcome(self, success: bool) -> None:
        self.train_window.append(1.0 if success else 0.0)

    def record_eval_success(self, rate: float) -> None:
        if not 0.0 <= rate <= 1.0:
            raise ValueError(f"success rate must lie in [0, 1], got {rate}")
        self.eval_window.append(float(rate))

    def _step(self, up: bool) -> float:
        return min(1.0, self.c + self.delta) if up else max(0.0, self.c - self.delta)

    def next(self, t: int, total_steps: int, j: int) -> float:
        """Update ``c`` after episode ``j`` (1-based) ending at global step ``t``."""
        if self.mode == "predefined":
            if total_steps <= 0:
                raise ValueError("total_steps must be positive for the predefined profile")
            self.c = min(1.0, t / (total_steps * self.z_sat))
        elif self.mode == "self_paced":
            # the window is emptied after every change, so it doubles as the j > w gate
            if len(self.train_window) == self.window:
                rate = self.train_rate
                if rate > self.psi_high:
                    new = self._step(up=True)
                elif rate < self.psi_low:
                    new = self._step(up=False)
                else:
                    new = self.c
                if new != self.c:
                    self.c = new
                    self.train_window.clear()
        elif j > self.window and self.train_window:
            self.c = self._step(up=self.train_rate >= self.target)
        return self.c


def c_next(ctl: CController, t: int, total_steps: int, j: int) -> float:
    return ctl.next(t, total_steps, j)


def record_train_outcome(ctl: CController, success: bool) -> None:
    ctl.record_train_outcome(success)


def record_eval_success(ctl: CController, rate: float) -> None:
    ctl.record_eval_success(rate)


@dataclass(frozen=True)
class InitSpace:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64)
        hi = np.asarray(self.upper, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be 1-D vectors of equal length")
        if not np.all(lo < hi):
            raise ValueError("lower must be strictly below upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def center(self) -> np.ndarray:
        return (self.lower + self.upper) / 2

    def bounds(self, c: float) -> tuple[np.ndarray, np.ndarray]:
        """Support of the scaled distribution."""
        ctr = self.center
        return ctr - c * (ctr - self.lower), ctr + c * (self.upper - ctr)


def sample_initial(space: InitSpace, c: float, rng: np.random.Generator) -> np.ndarray:
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"c must lie in [0, 1], got {c}")
    ctr = space.center
    if c == 0.0:
        return ctr.copy()
    u = rng.uniform(space.lower, space.upper)
    if c == 1.0:
        return u
    return ctr + c * (u - ctr)
