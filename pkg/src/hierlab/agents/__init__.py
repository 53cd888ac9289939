from hierlab.agents.base import (
    ALGORITHMS,
    Agent,
    AgentConfig,
    TdBatchResult,
    load_checkpoint,
    save_checkpoint,
)
from hierlab.agents.mlp import Adam, Mlp, mlp_forward, mlp_gradients, polyak
from hierlab.agents.sac import SacAgent
from hierlab.agents.td3 import DdpgAgent, Td3Agent

_REGISTRY = {"sac": SacAgent, "td3": Td3Agent, "ddpg": DdpgAgent}


def make_agent(obs_dim, act_dim, cfg: AgentConfig, rng, init_rng=None, **kw) -> Agent:
    return _REGISTRY[cfg.algorithm](obs_dim, act_dim, cfg, rng, init_rng=init_rng, **kw)


def act(agent: Agent, obs, deterministic: bool = False, rng=None):
    return agent.act(obs, deterministic=deterministic, rng=rng)


def agent_update(agent: Agent, batch, is_weights=None) -> TdBatchResult:
    return agent.update(batch, is_weights)


__all__ = [
    "ALGORITHMS", "Adam", "Agent", "AgentConfig", "DdpgAgent", "Mlp", "SacAgent",
    "TdBatchResult", "Td3Agent", "act", "agent_update", "load_checkpoint", "make_agent",
    "mlp_forward", "mlp_gradients", "polyak", "save_checkpoint",
]
