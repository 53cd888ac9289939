"""End-to-end HiER / HiER+ training loop with periodic evaluation."""

from __future__ import annotations

import copy
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from hierlab.agents import AgentConfig, make_agent
from hierlab.buffers import (
    Batch,
    HerSpec,
    PriorityIndex,
    RingBuffer,
    her_relabel,
    hier_store,
    per_sample,
    per_update,
    push_episode,
)
from hierlab.config import TrainConfig, variant_slug
from hierlab.core import Episode, Transition, undiscounted_return
from hierlab.e2h_ise import CController
from hierlab.envs import GoalEnv, make_env
from hierlab.hier_ctl import LambdaController, XiController, split_batch

log = logging.getLogger(__name__)

EVAL_C = 1.0
# order matters: adding a stream at the end keeps earlier streams unchanged
_STREAMS = ("env", "agent_init", "agent", "sampling", "her", "eval", "warmup")


def rng_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent generators per concern, spawned from the run seed.

    Toggling a component (e.g. HER) only changes draws from its own stream.
    """
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {name: np.random.default_rng(ss) for name, ss in zip(_STREAMS, children)}


@dataclass
class EvalPoint:
    t: int
    success_rate: float
    mean_return: float
    c: float
    lam: float
    xi: float
    hier_size: int
    episodes: int
    wall_clock: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RunRecord:
    seed: int
    fingerprint: str
    config: dict
    series: list[EvalPoint] = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def task(self) -> str:
        return self.config["task"]

    @property
    def variant(self) -> str:
        return self.config.get("variant") or ""

    def file_name(self) -> str:
        variant = self.variant
        components = variant_slug(variant) if variant else _toggle_slug(self.config)
        return f"{self.task}_{self.config['algorithm']}_{components}_{self.seed}.jsonl"

    def write_jsonl(self, path) -> Path:
        """Line 1: config header; each further line: one evaluation point."""
        path = Path(path)
        if path.is_dir():
            path = path / self.file_name()
        header = {"seed": self.seed, "fingerprint": self.fingerprint, "config": self.config}
        with open(path, "w") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for p in self.series:
                fh.write(json.dumps(p.to_dict(), sort_keys=True) + "\n")
        return path

    @classmethod
    def read_jsonl(cls, path) -> "RunRecord":
        lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
        if not lines:
            raise ValueError(f"{path}: empty run record")
        header = json.loads(lines[0])
        series = [EvalPoint(**json.loads(ln)) for ln in lines[1:]]
        wall = series[-1].wall_clock if series else 0.0
        return cls(header["seed"], header["fingerprint"], header["config"], series, wall)


def _toggle_slug(cfg: dict) -> str:
    base = {(False, False): "baseline", (True, False): "hier", (True, True): "hierplus",
            (False, True): "e2h"}[(cfg["hier"], cfg["e2h_ise"])]
    return "-".join([base] + [c for c in ("her", "per") if cfg[c]])


def best_and_last(record: RunRecord) -> tuple[float, float]:
    """Best evaluation success rate over the run, and the final mean return."""
    if not record.series:
        raise ValueError("run record has no evaluation points")
    best = max(p.success_rate for p in record.series)
    return best, record.series[-1].mean_return


def evaluate(agent, env: GoalEnv, n_episodes: int, rng: np.random.Generator) -> tuple[float, float]:
    """Deterministic-policy rollouts from the unscaled initial distribution.

    Episodes run in lockstep on copies of ``env`` so the policy is queried once
    per step for the whole batch.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    c = EVAL_C
    assert c == 1.0, "evaluation must use the unscaled initial distribution"
    envs = [copy.deepcopy(env) for _ in range(n_episodes)]
    obs = [e.reset(c, rng).flat() for e in envs]
    returns = np.zeros(n_episodes)
    success = np.zeros(n_episodes, dtype=bool)
    active = list(range(n_episodes))
    while active:
        actions = agent.act(np.stack([obs[i] for i in active]), deterministic=True)
        still = []
        for k, i in enumerate(active):
            res = envs[i].step(actions[k])
            returns[i] += res.reward
            obs[i] = res.next_obs.flat()
            if res.done:
                success[i] = res.is_success
            else:
                still.append(i)
        active = still
    return float(success.mean()), float(returns.mean())


def eval_ticks(total_steps: int, eval_points: int) -> list[int]:
    return [int(round(total_steps * (i + 1) / eval_points)) for i in range(eval_points)]


class Trainer:
    """One run of the training loop. ``run()`` returns the ``RunRecord``.

    ``on_batch(k, batch, is_weights)`` is called with every update batch before
    the agent sees it; ``on_episode(j, episode, stored, lam)`` after every
    finished training episode.
    """

    def __init__(self, cfg: TrainConfig, on_batch: Callable | None = None,
                 on_episode: Callable | None = None):
        self.cfg = cfg.validate()
        self.on_batch = on_batch
        self.on_episode = on_episode
        self.rngs = rng_streams(cfg.seed)
        self.env = make_env(cfg.task, **cfg.env)
        self.eval_env = make_env(cfg.task, **cfg.env)
        env = self.env
        a = cfg.agent
        gamma = env.default_gamma if a.gamma is None else a.gamma
        self.agent_cfg = AgentConfig(
            algorithm=cfg.algorithm, gamma=gamma, entropy_alpha=a.entropy_alpha,
            polyak_tau=a.polyak_tau, lr=a.lr, batch_size=a.batch_size, hidden=a.hidden,
            policy_noise=a.policy_noise, noise_clip=a.noise_clip, policy_delay=a.policy_delay,
            exploration_noise=a.exploration_noise, dtype=a.dtype,
        )
        center, scale = env.obs_normalizer()
        self.agent = make_agent(env.obs_dim, env.act_dim, self.agent_cfg, self.rngs["agent"],
                                init_rng=self.rngs["agent_init"], obs_center=center, obs_scale=scale)
        b = cfg.buffer
        self.b_ser = RingBuffer(b.capacity)
        self.b_hier = RingBuffer(b.hier_capacity)
        self.per = PriorityIndex(b.capacity, b.per_alpha, b.per_beta0, b.per_eps) if cfg.per else None
        self.her_spec = HerSpec(b.her_strategy, b.her_k)

        lc = cfg.lam
        lam_kw = dict(fixed=lc.fixed, z_sat=lc.z_sat, window=lc.window, shift=lc.shift)
        if lc.lambda0 is not None:
            lam_kw["lambda0"] = lc.lambda0
        if lc.lambda_max is not None:
            lam_kw["lambda_max"] = lc.lambda_max
        self.lam_ctl = LambdaController.for_horizon(env.horizon, cfg.total_steps, mode=lc.mode,
                                                    top_fraction=lc.top_fraction, **lam_kw)
        xi_mode = cfg.xi.mode or ("prioritized" if cfg.per else "fix")
        self.xi_ctl = XiController(mode=xi_mode, fixed=cfg.xi.fixed, alpha=cfg.xi.alpha)
        cc = cfg.curriculum
        self.c_ctl = CController(mode=cc.mode, delta=cc.delta, psi_high=cc.psi_high, psi_low=cc.psi_low,
                                 psi=cc.psi, psi_max=cc.psi_max, shift=cc.shift, window=cc.window,
                                 z_sat=cc.z_sat) if cfg.e2h_ise else None
        self.c = 0.0 if cfg.e2h_ise else 1.0
        self.xi = self.xi_ctl.current if cfg.hier else 0.0
        self.n_episodes = 0
        self.n_hier_episodes = 0
        self.n_updates = 0

    def _store_ser(self, transitions) -> None:
        for tr in transitions:
            slot = self.b_ser.push(tr)
            if self.per is not None:
                self.per.add(slot)

    def _end_episode(self, t: int, ep: Episode) -> None:
        cfg = self.cfg
        self.n_episodes += 1
        j = self.n_episodes
        slots = push_episode(self.b_ser, ep)
        if self.per is not None:
            for slot in slots:
                self.per.add(slot)
        if cfg.her:
            self._store_ser(her_relabel(ep, self.her_spec, self.env.reward_spec, self.rngs["her"]))
        stored = False
        lam = float("nan")
        if cfg.hier:
            ret = undiscounted_return(ep)
            lam = self.lam_ctl.next(t, j)
            stored = hier_store(self.b_hier, ep, lam)
            if stored:
                assert lam < ret, "highlight admission violated"
                self.n_hier_episodes += 1
            # threshold first, then let this return enter the moving-average window
            self.lam_ctl.record_return(ret)
        if self.c_ctl is not None:
            self.c_ctl.record_train_outcome(ep.success)
            self.c = self.c_ctl.next(t, cfg.total_steps, j)
        if self.on_episode is not None:
            self.on_episode(j, ep, stored, lam)

    def _update(self, t: int) -> None:
        cfg = self.cfg
        n = self.agent_cfg.batch_size
        rng = self.rngs["sampling"]
        n_ser, n_hier = split_batch(n, self.xi, len(self.b_hier))
        weights = None
        slots = None
        if self.per is not None:
            beta = self.per.beta + (1.0 - self.per.beta) * min(1.0, t / cfg.total_steps)
            d_ser, w_ser, slots = per_sample(self.b_ser, self.per, n_ser, rng, beta=beta)
            weights = np.concatenate([w_ser, np.ones(n_hier)])
        else:
            d_ser = self.b_ser.uniform_sample(n_ser, rng)
        if n_hier:
            # a small highlight buffer is sampled with replacement rather than shrinking n_hier
            batch = Batch.concat(d_ser, self.b_hier.uniform_sample(n_hier, rng))
        else:
            batch = d_ser
        assert len(batch) == n, "batch conservation violated"
        if self.on_batch is not None:
            self.on_batch(self.n_updates, batch, weights)
        res = self.agent.update(batch, weights)
        self.n_updates += 1
        if self.per is not None and n_ser:
            per_update(self.per, slots, res.td_errors[:n_ser])
        if cfg.hier and n_ser and n_hier:
            self.xi = self.xi_ctl.next(float(np.mean(res.td_errors[n_ser:])),
                                       float(np.mean(res.td_errors[:n_ser])))

    def _evaluate(self, t: int, start: float) -> EvalPoint:
        rate, mean_ret = evaluate(self.agent, self.eval_env, self.cfg.eval_episodes, self.rngs["eval"])
        if self.c_ctl is not None:
            self.c_ctl.record_eval_success(rate)
        lam = self.lam_ctl.current if self.cfg.hier else float("nan")
        return EvalPoint(t=t, success_rate=rate, mean_return=mean_ret, c=self.c,
                         lam=lam, xi=self.xi, hier_size=len(self.b_hier),
                         episodes=self.n_episodes, wall_clock=time.perf_counter() - start)

    def run(self) -> RunRecord:
        cfg = self.cfg
        start = time.perf_counter()
        record = RunRecord(cfg.seed, cfg.fingerprint(), cfg.to_dict())
        ticks = set(eval_ticks(cfg.total_steps, cfg.eval_points))
        env = self.env
        env_rng = self.rngs["env"]
        warm_rng = self.rngs["warmup"]
        obs = env.reset(self.c, env_rng)
        ep = Episode(horizon=env.horizon)
        for t in range(1, cfg.total_steps + 1):
            if t <= cfg.warmup_steps:
                a = warm_rng.uniform(-1.0, 1.0, size=env.act_dim)
            else:
                a = self.agent.act(obs)
            res = env.step(a)
            ep.append(Transition(obs, a, res.next_obs, res.reward, res.terminal))
            obs = res.next_obs
            if res.done:
                self._end_episode(t, ep)
                obs = env.reset(self.c, env_rng)
                ep = Episode(horizon=env.horizon)
            if t > cfg.warmup_steps and t % cfg.update_every == 0 and len(self.b_ser):
                for _ in range(cfg.gradient_steps):
                    self._update(t)
            if t in ticks:
                point = self._evaluate(t, start)
                record.series.append(point)
                log.info("t=%d success=%.3f return=%.2f c=%.2f xi=%.3f |B_hier|=%d",
                         t, point.success_rate, point.mean_return, point.c, point.xi, point.hier_size)
        record.wall_clock = time.perf_counter() - start
        assert len(record.series) == cfg.eval_points
        return record


def train_run(cfg: TrainConfig, on_batch: Callable | None = None,
              on_episode: Callable | None = None) -> RunRecord:
    return Trainer(cfg, on_batch=on_batch, on_episode=on_episode).run()
