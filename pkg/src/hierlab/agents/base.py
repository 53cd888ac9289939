"""Shared agent plumbing: config, update result, critic helpers and checkpoints."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from hierlab.agents.mlp import Adam, Mlp, polyak
from hierlab.core import GoalObservation

ALGORITHMS = ("sac", "td3", "ddpg")
CHECKPOINT_FORMAT = "hierlab-agent"
CHECKPOINT_VERSION = 1


@dataclass
class AgentConfig:
    algorithm: str = "sac"
    gamma: float = 0.95
    entropy_alpha: float = 0.1
    polyak_tau: float = 0.005
    lr: float = 1e-3
    batch_size: int = 256
    hidden: tuple[int, ...] = (64, 64)
    policy_noise: float = 0.2
    noise_clip: float = 0.5
    policy_delay: int = 2
    exploration_noise: float = 0.1
    dtype: str = "float32"

    def __post_init__(self):
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype!r}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 < self.polyak_tau <= 1.0:
            raise ValueError(f"polyak_tau must lie in (0, 1], got {self.polyak_tau}")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")
        if self.lr < 0:
            raise ValueError("lr must be non-negative")
        self.hidden = tuple(int(h) for h in self.hidden)


@dataclass
class TdBatchResult:
    td_errors: np.ndarray
    critic_loss: float
    actor_loss: float


class Agent:
    """Common surface of the off-policy agents.

    Observations are flat ``[state | achieved | desired]`` vectors; they are
    rescaled with the fixed ``obs_center`` / ``obs_scale`` supplied by the env.
    """

    algorithm = ""

    def __init__(self, obs_dim: int, act_dim: int, cfg: AgentConfig,
                 rng: np.random.Generator, obs_center=None, obs_scale=None):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.cfg = cfg
        self.rng = rng
        self.obs_center = np.zeros(obs_dim) if obs_center is None else np.asarray(obs_center, dtype=np.float64)
        self.obs_scale = np.ones(obs_dim) if obs_scale is None else np.asarray(obs_scale, dtype=np.float64)
        self.dtype = np.dtype(cfg.dtype)
        self.n_updates = 0

    def _norm(self, obs) -> np.ndarray:
        if isinstance(obs, GoalObservation):
            obs = obs.flat()
        x = (np.asarray(obs, dtype=np.float64) - self.obs_center) / self.obs_scale
        return x.astype(self.dtype, copy=False)

    def networks(self) -> dict[str, Mlp]:
        raise NotImplementedError

    def act(self, obs, deterministic: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        raise NotImplementedError

    def update(self, batch, is_weights=None) -> TdBatchResult:
        raise NotImplementedError

    def _weights(self, batch, is_weights) -> np.ndarray:
        n = len(batch)
        if n == 0:
            raise ValueError("cannot update on an empty batch")
        if is_weights is None:
            return np.ones(n)
        w = np.asarray(is_weights, dtype=np.float64)
        if w.shape != (n,):
            raise ValueError(f"is_weights has shape {w.shape}, expected ({n},)")
        return w

    def _check_finite(self) -> None:
        for name, net in self.networks().items():
            if not np.isfinite(net.theta).all():
                raise FloatingPointError(f"non-finite parameter in {name}")

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {}
        for name, net in self.networks().items():
            for i, p in enumerate(net.params):
                out[f"{name}.{i}"] = p
        return out

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for name, net in self.networks().items():
            for i, p in enumerate(net.params):
                arr = np.asarray(state[f"{name}.{i}"], dtype=np.float64)
                if arr.shape != p.shape:
                    raise ValueError(f"{name}.{i}: shape {arr.shape} != {p.shape}")
                p[...] = arr


def critic_input(obs: np.ndarray, action: np.ndarray) -> np.ndarray:
    return np.concatenate([obs, action], axis=-1)


def fit_critic(net: Mlp, opt: Adam, x: np.ndarray, target: np.ndarray, w: np.ndarray):
    """One weighted-MSE step; returns the pre-step residuals and loss."""
    q, acts = net.forward(x, keep=True)
    resid = q[:, 0] - target
    loss = float(np.mean(w * resid ** 2))
    grad = (2.0 / resid.size) * (w * resid)
    opt.step(net.backward(acts, grad[:, None]))
    return resid.astype(np.float64), loss


def soft_update(pairs, tau: float) -> None:
    for target, online in pairs:
        polyak(target, online, tau)


def save_checkpoint(agent: Agent, path) -> None:
    """JSON checkpoint: every parameter as ``{"shape": [...], "data": [...]}`` (row-major)."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "algorithm": agent.algorithm,
        "obs_dim": agent.obs_dim,
        "act_dim": agent.act_dim,
        "config": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(agent.cfg).items()},
        "obs_center": agent.obs_center.tolist(),
        "obs_scale": agent.obs_scale.tolist(),
        "n_updates": agent.n_updates,
        "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                   for k, v in agent.state_dict().items()},
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path, rng: np.random.Generator | None = None) -> Agent:
    from hierlab.agents import make_agent

    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError("not an agent checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    cfg = AgentConfig(**doc["config"])
    agent = make_agent(doc["obs_dim"], doc["act_dim"], cfg,
                       rng if rng is not None else np.random.default_rng(0),
                       obs_center=doc["obs_center"], obs_scale=doc["obs_scale"])
    agent.load_state_dict({k: np.array(v["data"], dtype=np.float64).reshape(v["shape"])
                           for k, v in doc["params"].items()})
    agent.n_updates = doc["n_updates"]
    return agent
