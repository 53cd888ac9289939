"""Goal-augmented observations, transitions, episodes and sparse-reward returns."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GoalObservation:
    state: np.ndarray
    achieved_goal: np.ndarray
    desired_goal: np.ndarray

    def __post_init__(self):
        for name in ("state", "achieved_goal", "desired_goal"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 1:
                raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
            object.__setattr__(self, name, arr)
        if self.achieved_goal.shape != self.desired_goal.shape:
            raise ValueError(
                f"achieved_goal {self.achieved_goal.shape} and desired_goal "
                f"{self.desired_goal.shape} differ in dimension"
            )

    def flat(self) -> np.ndarray:
        """Network input layout: ``[state | achieved_goal | desired_goal]``."""
        return np.concatenate([self.state, self.achieved_goal, self.desired_goal])

    def with_goal(self, goal: np.ndarray) -> "GoalObservation":
        return GoalObservation(self.state, self.achieved_goal, np.asarray(goal, dtype=np.float64))

    @property
    def dim(self) -> int:
        return self.state.size + 2 * self.achieved_goal.size


@dataclass(frozen=True)
class Transition:
    obs: GoalObservation
    action: np.ndarray
    next_obs: GoalObservation
    reward: float
    done: bool

    def __post_init__(self):
        action = np.asarray(self.action, dtype=np.float64)
        if action.ndim != 1:
            raise ValueError("action must be a 1-D vector")
        if np.any(np.abs(action) > 1.0) or not np.all(np.isfinite(action)):
            raise ValueError(f"action {action} outside [-1, 1]")
        if self.reward not in (-1.0, 0.0):
            raise ValueError(f"reward must be -1 or 0, got {self.reward}")
        object.__setattr__(self, "action", action)
        object.__setattr__(self, "reward", float(self.reward))
        object.__setattr__(self, "done", bool(self.done))


@dataclass
class Episode:
    transitions: list[Transition] = field(default_factory=list)
    horizon: int | None = None

    def append(self, tr: Transition) -> None:
        if self.transitions and self.transitions[-1].done:
            raise ValueError("cannot append after a terminal transition")
        if self.horizon is not None and len(self.transitions) >= self.horizon:
            raise ValueError(f"episode already at horizon {self.horizon}")
        self.transitions.append(tr)

    def __len__(self) -> int:
        return len(self.transitions)

    def __iter__(self):
        return iter(self.transitions)

    @property
    def length(self) -> int:
        return len(self.transitions)

    @property
    def success(self) -> bool:
        return bool(self.transitions) and self.transitions[-1].reward == 0.0

    @property
    def rewards(self) -> np.ndarray:
        return np.array([tr.reward for tr in self.transitions], dtype=np.float64)

    def achieved_goals(self) -> np.ndarray:
        """Achieved goal after each step, shape ``(length, goal_dim)``."""
        return np.stack([tr.next_obs.achieved_goal for tr in self.transitions])


@dataclass(frozen=True)
class RewardSpec:
    tolerance: float

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")


def goal_distance(achieved, desired) -> np.ndarray:
    achieved = np.asarray(achieved, dtype=np.float64)
    desired = np.asarray(desired, dtype=np.float64)
    if achieved.shape[-1] != desired.shape[-1]:
        raise ValueError(
            f"goal dimension mismatch: {achieved.shape[-1]} vs {desired.shape[-1]}"
        )
    return np.linalg.norm(achieved - desired, axis=-1)


def sparse_reward(achieved, desired, spec: RewardSpec):
    """0 inside the closed tolerance ball around ``desired``, -1 elsewhere.

    Accepts single vectors or batches along the leading axis.
    """
    d = goal_distance(achieved, desired)
    if not np.all(np.isfinite(d)):
        raise ValueError("non-finite goal vectors")
    r = np.where(d <= spec.tolerance, 0.0, -1.0)
    return float(r) if r.ndim == 0 else r


def undiscounted_return(e: Episode) -> float:
    if len(e) == 0:
        raise ValueError("empty episode has no return")
    return float(np.sum(e.rewards))


def discounted_return(e: Episode, gamma: float) -> float:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    if len(e) == 0:
        raise ValueError("empty episode has no return")
    if gamma == 1.0:
        return undiscounted_return(e)
    rewards = e.rewards
    return float(np.sum(rewards * gamma ** np.arange(rewards.size)))
