"""Deterministic-policy agents: TD3 (twin critics, smoothed targets, delayed
actor) and DDPG (single critic)."""

from __future__ import annotations

import numpy as np

from hierlab.agents.base import Agent, TdBatchResult, critic_input, fit_critic, soft_update
from hierlab.agents.mlp import Adam, Mlp


class Td3Agent(Agent):
    algorithm = "td3"
    twin = True

    def __init__(self, obs_dim, act_dim, cfg, rng, init_rng=None, **kw):
        super().__init__(obs_dim, act_dim, cfg, rng, **kw)
        init_rng = rng if init_rng is None else init_rng
        h = list(cfg.hidden)
        self.actor = Mlp([obs_dim, *h, act_dim], init_rng, self.dtype)
        self.q1 = Mlp([obs_dim + act_dim, *h, 1], init_rng, self.dtype)
        self.actor_targ = self.actor.copy()
        self.q1_targ = self.q1.copy()
        self.actor_opt = Adam(self.actor.theta, cfg.lr)
        self.q1_opt = Adam(self.q1.theta, cfg.lr)
        if self.twin:
            self.q2 = Mlp([obs_dim + act_dim, *h, 1], init_rng, self.dtype)
            self.q2_targ = self.q2.copy()
            self.q2_opt = Adam(self.q2.theta, cfg.lr)

    def networks(self):
        nets = {"actor": self.actor, "actor_targ": self.actor_targ, "q1": self.q1, "q1_targ": self.q1_targ}
        if self.twin:
            nets.update(q2=self.q2, q2_targ=self.q2_targ)
        return nets

    def act(self, obs, deterministic=False, rng=None):
        a = np.tanh(self.actor.forward(self._norm(obs)))
        if deterministic or self.cfg.exploration_noise == 0:
            return a
        rng = self.rng if rng is None else rng
        return np.clip(a + self.cfg.exploration_noise * rng.standard_normal(a.shape), -1.0, 1.0)

    def _target_action(self, o2):
        a2 = np.tanh(self.actor_targ.forward(o2))
        if not self.twin:
            return a2
        noise = np.clip(self.cfg.policy_noise * self.rng.standard_normal(a2.shape),
                        -self.cfg.noise_clip, self.cfg.noise_clip)
        return np.clip(a2 + noise, -1.0, 1.0)

    def _delay(self) -> int:
        return self.cfg.policy_delay

    def update(self, batch, is_weights=None):
        cfg = self.cfg
        w = self._weights(batch, is_weights)
        o = self._norm(batch.obs)
        o2 = self._norm(batch.next_obs)

        x2 = critic_input(o2, self._target_action(o2))
        q_next = self.q1_targ.forward(x2)[:, 0]
        if self.twin:
            q_next = np.minimum(q_next, self.q2_targ.forward(x2)[:, 0])
        y = batch.reward + cfg.gamma * (1.0 - batch.done) * q_next

        x = critic_input(o, batch.action)
        resid1, critic_loss = fit_critic(self.q1, self.q1_opt, x, y, w)
        if self.twin:
            _, loss2 = fit_critic(self.q2, self.q2_opt, x, y, w)
            critic_loss = 0.5 * (critic_loss + loss2)

        self.n_updates += 1
        actor_loss = float("nan")
        if self.n_updates % self._delay() == 0:
            n = len(batch)
            head, acts = self.actor.forward(o, keep=True)
            pi = np.tanh(head)
            q, cq = self.q1.forward(critic_input(o, pi), keep=True)
            actor_loss = float(-np.mean(q))
            _, g_in = self.q1.backward(cq, np.full((n, 1), -1.0 / n), input_grad=True)
            g_head = g_in[:, self.obs_dim:] * (1.0 - pi ** 2)
            self.actor_opt.step(self.actor.backward(acts, g_head))
            pairs = [(self.actor_targ, self.actor), (self.q1_targ, self.q1)]
            if self.twin:
                pairs.append((self.q2_targ, self.q2))
            soft_update(pairs, cfg.polyak_tau)
        self._check_finite()
        return TdBatchResult(np.abs(resid1), critic_loss, actor_loss)


class DdpgAgent(Td3Agent):
    algorithm = "ddpg"
    twin = False

    def _delay(self) -> int:
        return 1
