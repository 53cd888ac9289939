from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hierlab.core import GoalObservation, RewardSpec, sparse_reward
from hierlab.e2h_ise import InitSpace


@dataclass
class EnvStepResult:
    next_obs: GoalObservation
    reward: float
    done: bool
    is_success: bool

    @property
    def terminal(self) -> bool:
        """Bootstrapping-terminal: only goal arrival ends the value recursion."""
        return self.is_success


class GoalEnv:
    """Sparse-reward goal-reaching task whose reset is driven by the curriculum scale."""

    name = ""
    horizon: int
    reward_spec: RewardSpec
    init_space: InitSpace
    act_dim = 2
    default_gamma = 0.95

    def __init__(self):
        self._t = 0
        self._active = False

    @property
    def obs_dim(self) -> int:
        return self.state_dim + 2 * self.goal_dim

    def obs_normalizer(self) -> tuple[np.ndarray, np.ndarray]:
        """Fixed ``(center, scale)`` for the flat observation vector."""
        raise NotImplementedError

    def observe(self) -> GoalObservation:
        raise NotImplementedError

    def reset(self, c: float, rng: np.random.Generator) -> GoalObservation:
        raise NotImplementedError

    def _advance(self, action: np.ndarray) -> None:
        raise NotImplementedError

    def _achieved(self) -> np.ndarray:
        raise NotImplementedError

    def step(self, action) -> EnvStepResult:
        if not self._active:
            raise RuntimeError("step() called on a finished episode; call reset() first")
        a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        if a.shape != (self.act_dim,):
            raise ValueError(f"action must have shape ({self.act_dim},), got {a.shape}")
        self._advance(a)
        self._t += 1
        obs = self.observe()
        reward = sparse_reward(obs.achieved_goal, obs.desired_goal, self.reward_spec)
        success = reward == 0.0
        done = success or self._t >= self.horizon
        self._active = not done
        return EnvStepResult(obs, reward, done, success)

    @property
    def t(self) -> int:
        return self._t


def env_reset(env: GoalEnv, c: float, rng: np.random.Generator) -> GoalObservation:
    return env.reset(c, rng)


def env_step(env: GoalEnv, action) -> EnvStepResult:
    return env.step(action)
