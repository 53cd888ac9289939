"""Soft actor-critic with twin critics and a fixed entropy coefficient."""

from __future__ import annotations

import numpy as np

from hierlab.agents.base import Agent, TdBatchResult, critic_input, fit_critic, soft_update
from hierlab.agents.mlp import Adam, Mlp

LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def _softplus(x):
    return np.logaddexp(0.0, x)


class SacAgent(Agent):
    algorithm = "sac"

    def __init__(self, obs_dim, act_dim, cfg, rng, init_rng=None, **kw):
        super().__init__(obs_dim, act_dim, cfg, rng, **kw)
        init_rng = rng if init_rng is None else init_rng
        h = list(cfg.hidden)
        self.actor = Mlp([obs_dim, *h, 2 * act_dim], init_rng, self.dtype)
        self.q1 = Mlp([obs_dim + act_dim, *h, 1], init_rng, self.dtype)
        self.q2 = Mlp([obs_dim + act_dim, *h, 1], init_rng, self.dtype)
        self.q1_targ = self.q1.copy()
        self.q2_targ = self.q2.copy()
        self.actor_opt = Adam(self.actor.theta, cfg.lr)
        self.q1_opt = Adam(self.q1.theta, cfg.lr)
        self.q2_opt = Adam(self.q2.theta, cfg.lr)

    def networks(self):
        return {"actor": self.actor, "q1": self.q1, "q2": self.q2,
                "q1_targ": self.q1_targ, "q2_targ": self.q2_targ}

    def _policy(self, obs_n, rng, keep=False):
        """Reparameterised tanh-Gaussian sample and its log-density."""
        out = self.actor.forward(obs_n, keep=keep)
        head, acts = out if keep else (out, None)
        mu = head[..., :self.act_dim]
        raw_ls = head[..., self.act_dim:]
        log_std = np.clip(raw_ls, LOG_STD_MIN, LOG_STD_MAX)
        std = np.exp(log_std)
        eps = rng.standard_normal(mu.shape).astype(mu.dtype, copy=False)
        u = mu + std * eps
        a = np.tanh(u)
        # log(1 - tanh(u)^2) computed stably
        log_jac = 2.0 * (np.log(2.0) - u - _softplus(-2.0 * u))
        logp = np.sum(-0.5 * eps ** 2 - log_std - _HALF_LOG_2PI - log_jac, axis=-1)
        if not keep:
            return a, logp
        return a, logp, (acts, eps, std, raw_ls)

    def act(self, obs, deterministic=False, rng=None):
        x = self._norm(obs)
        if deterministic:
            head = self.actor.forward(x)
            return np.tanh(head[..., :self.act_dim])
        a, _ = self._policy(x, self.rng if rng is None else rng)
        return a

    def update(self, batch, is_weights=None):
        cfg = self.cfg
        w = self._weights(batch, is_weights)
        o = self._norm(batch.obs)
        o2 = self._norm(batch.next_obs)
        a = batch.action

        a2, logp2 = self._policy(o2, self.rng)
        x2 = critic_input(o2, a2)
        q_next = np.minimum(self.q1_targ.forward(x2)[:, 0], self.q2_targ.forward(x2)[:, 0])
        y = batch.reward + cfg.gamma * (1.0 - batch.done) * (q_next - cfg.entropy_alpha * logp2)

        x = critic_input(o, a)
        resid1, loss1 = fit_critic(self.q1, self.q1_opt, x, y, w)
        _, loss2 = fit_critic(self.q2, self.q2_opt, x, y, w)

        pi, logp, (acts, eps, std, raw_ls) = self._policy(o, self.rng, keep=True)
        xp = critic_input(o, pi)
        q1p, c1 = self.q1.forward(xp, keep=True)
        q2p, c2 = self.q2.forward(xp, keep=True)
        use1 = (q1p[:, 0] <= q2p[:, 0])[:, None]
        qmin = np.where(use1[:, 0], q1p[:, 0], q2p[:, 0])
        n = len(batch)
        actor_loss = float(np.mean(cfg.entropy_alpha * logp - qmin))
        # gradient of -mean(qmin) w.r.t. the action, through whichever critic is smaller
        g_out = np.full((n, 1), -1.0 / n)
        _, g1 = self.q1.backward(c1, np.where(use1, g_out, 0.0), input_grad=True)
        _, g2 = self.q2.backward(c2, np.where(use1, 0.0, g_out), input_grad=True)
        dq_da = (g1 + g2)[:, self.obs_dim:]
        # d/du of alpha * logp / n is alpha * 2 tanh(u) / n
        g_u = cfg.entropy_alpha * 2.0 * pi / n + dq_da * (1.0 - pi ** 2)
        g_ls = (-cfg.entropy_alpha / n + g_u * std * eps)
        g_ls = np.where((raw_ls > LOG_STD_MIN) & (raw_ls < LOG_STD_MAX), g_ls, 0.0)
        self.actor_opt.step(self.actor.backward(acts, np.concatenate([g_u, g_ls], axis=1)))

        soft_update([(self.q1_targ, self.q1), (self.q2_targ, self.q2)], cfg.polyak_tau)
        self.n_updates += 1
        self._check_finite()
        return TdBatchResult(np.abs(resid1), 0.5 * (loss1 + loss2), actor_loss)
