"""Training configuration, strict loading from nested mappings, and variant presets."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import re
import typing
from dataclasses import dataclass, field

import yaml


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass
class AgentSection:
    gamma: float | None = None  # None: task default (0.95 reach, 1.0 mazes)
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


@dataclass
class BufferSection:
    capacity: int = 1_000_000
    hier_capacity: int = 1_000_000
    per_alpha: float = 0.6
    per_beta0: float = 0.4
    per_eps: float = 1e-6
    her_strategy: str = "future"
    her_k: int = 4


@dataclass
class LambdaSection:
    mode: str = "predefined"
    fixed: float = 0.0
    z_sat: float = 0.5
    top_fraction: float = 0.05
    lambda0: float | None = None  # None: -horizon
    lambda_max: float | None = None  # None: -top_fraction * horizon
    window: int = 50
    shift: float = 0.0


@dataclass
class XiSection:
    mode: str | None = None  # None: prioritized with PER, fix otherwise
    fixed: float = 0.5
    alpha: float = 0.5


@dataclass
class CurriculumSection:
    mode: str = "self_paced"
    delta: float = 0.05
    psi_high: float = 0.8
    psi_low: float = 0.0
    psi: float = 0.5
    psi_max: float = 0.9
    shift: float = 0.2
    window: int = 50
    z_sat: float = 0.5


@dataclass
class TrainConfig:
    task: str = "point_reach"
    algorithm: str = "sac"
    her: bool = False
    per: bool = False
    hier: bool = False
    e2h_ise: bool = False
    total_steps: int = 30_000
    warmup_steps: int = 1_000
    update_every: int = 1
    gradient_steps: int = 1
    eval_points: int = 50
    eval_episodes: int = 100
    seed: int = 0
    variant: str = ""
    env: dict = field(default_factory=dict)
    agent: AgentSection = field(default_factory=AgentSection)
    buffer: BufferSection = field(default_factory=BufferSection)
    lam: LambdaSection = field(default_factory=LambdaSection)
    xi: XiSection = field(default_factory=XiSection)
    curriculum: CurriculumSection = field(default_factory=CurriculumSection)

    def validate(self) -> "TrainConfig":
        if self.eval_points < 1:
            raise ConfigError("eval_points: must be >= 1")
        if self.eval_episodes < 1:
            raise ConfigError("eval_episodes: must be >= 1")
        if self.total_steps <= self.warmup_steps:
            raise ConfigError("total_steps: must exceed warmup_steps")
        if self.eval_points > self.total_steps:
            raise ConfigError("eval_points: cannot exceed total_steps")
        if self.update_every < 1 or self.gradient_steps < 0:
            raise ConfigError("update_every/gradient_steps: must be positive")
        if self.algorithm not in ("sac", "td3", "ddpg"):
            raise ConfigError(f"algorithm: unknown value {self.algorithm!r}")
        return self

    def to_dict(self) -> dict:
        return _jsonable(dataclasses.asdict(self))

    def fingerprint(self) -> str:
        """Hash of everything except the seed, so all seeds of a config share it."""
        d = self.to_dict()
        d.pop("seed")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _coerce(value, hint, path: str):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union or (origin is not None and type(None) in args and len(args) == 2):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], path)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return tuple(_coerce(v, args[0], f"{path}[{i}]") for i, v in enumerate(value))
    if origin is dict or hint is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected a mapping, got {value!r}")
        return dict(value)
    if dataclasses.is_dataclass(hint):
        return from_dict(hint, value, path)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    return value


def from_dict(cls, data, path: str = ""):
    """Build dataclass ``cls`` from a mapping, rejecting unknown keys by name."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path or '<root>'}: expected a mapping, got {data!r}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"unknown config key {where}{unknown[0]}")
    kwargs = {k: _coerce(v, hints[k], f"{path}.{k}" if path else k) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or '<root>'}: {exc}") from exc


def deep_merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def parse_override(text: str) -> dict:
    """``"agent.lr=3e-4"`` -> ``{"agent": {"lr": 0.0003}}``; values parse as YAML scalars."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key or any(not part for part in key.split(".")):
        raise ConfigError(f"override {text!r} has an empty key")
    value = yaml.safe_load(raw) if raw.strip() else None
    # YAML 1.1 leaves "1e-3" as a string
    if isinstance(value, str) and re.fullmatch(r"[-+]?(\d+\.?\d*|\.\d+)[eE][-+]?\d+", value):
        value = float(value)
    node: dict = {}
    cur = node
    parts = key.split(".")
    for part in parts[:-1]:
        cur[part] = {}
        cur = cur[part]
    cur[parts[-1]] = value
    return node


def load_yaml(path) -> dict:
    """Read a YAML mapping; syntax errors are reported with their line number."""
    with open(path) as fh:
        text = fh.read()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f" (line {mark.line + 1})" if mark is not None else ""
        raise ConfigError(f"{path}{line}: {getattr(exc, 'problem', exc)}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


# Variant presets follow the "Algorithm [Components]" naming.
_VARIANT_RE = re.compile(r"^\s*(Baseline|HiER\+|HiER|E2H-ISE)\s*(?:\[\s*([^\]]*)\])?\s*$")
_BASES = {
    "Baseline": {"hier": False, "e2h_ise": False},
    "HiER": {"hier": True, "e2h_ise": False},
    "HiER+": {"hier": True, "e2h_ise": True},
    "E2H-ISE": {"hier": False, "e2h_ise": True},
}


def variant_toggles(name: str) -> dict:
    """Component toggles of a named variant, e.g. ``"HiER [HER & PER]"``."""
    m = _VARIANT_RE.match(name)
    if not m:
        raise ConfigError(f"unknown variant {name!r}; expected e.g. 'Baseline [HER]' or 'HiER+ [HER & PER]'")
    toggles = dict(_BASES[m.group(1)], her=False, per=False)
    if m.group(2):
        for comp in re.split(r"\s*(?:&|,|\+)\s*", m.group(2).strip()):
            if comp.upper() not in ("HER", "PER"):
                raise ConfigError(f"variant {name!r}: unknown component {comp!r}")
            toggles[comp.lower()] = True
    return toggles


def variant_slug(name: str) -> str:
    t = variant_toggles(name)
    base = re.match(r"\s*(\S+?)\s*(\[|$)", name).group(1)
    base = {"HiER+": "hierplus", "E2H-ISE": "e2h"}.get(base, base.lower())
    parts = [base] + [c for c in ("her", "per") if t[c]]
    return "-".join(parts)


KEY_DOCS = {
    "task": "task id (see `hierlab list-tasks`) or a path to a `.txt` maze layout",
    "algorithm": "sac, td3 or ddpg",
    "her": "hindsight relabelling into the standard buffer",
    "per": "prioritised sampling from the standard buffer",
    "hier": "highlight buffer and batch mixing",
    "e2h_ise": "easy-to-hard initial state curriculum",
    "total_steps": "environment steps per run",
    "warmup_steps": "initial steps with uniform random actions and no updates",
    "update_every": "environment steps between update rounds",
    "gradient_steps": "agent updates per round",
    "eval_points": "number of evenly spaced evaluations; the last one is at total_steps",
    "eval_episodes": "episodes per evaluation, always from the full initial distribution",
    "seed": "root seed; every random stream of a run derives from it",
    "variant": "preset label such as `HiER [HER]`; set by the matrix runner",
    "env": "keyword arguments for the environment constructor",
    "agent.gamma": "discount; empty means the task default (0.95 reach, 1.0 mazes)",
    "agent.entropy_alpha": "fixed SAC entropy coefficient",
    "agent.polyak_tau": "target network averaging rate",
    "agent.lr": "Adam learning rate for every network",
    "agent.batch_size": "transitions per update batch, both buffers together",
    "agent.hidden": "hidden layer widths",
    "agent.policy_noise": "TD3 target smoothing noise",
    "agent.noise_clip": "TD3 target noise clip",
    "agent.policy_delay": "TD3 critic updates per actor update",
    "agent.exploration_noise": "TD3/DDPG Gaussian action noise",
    "agent.dtype": "network precision, float32 or float64",
    "buffer.capacity": "standard buffer size in transitions",
    "buffer.hier_capacity": "highlight buffer size in transitions",
    "buffer.per_alpha": "priority exponent",
    "buffer.per_beta0": "initial importance-sampling exponent, annealed to 1",
    "buffer.per_eps": "priority floor added to |TD error|",
    "buffer.her_strategy": "future or final",
    "buffer.her_k": "relabelled copies per transition (future)",
    "lam.mode": "fix, predefined or ama",
    "lam.fixed": "threshold for mode fix",
    "lam.z_sat": "fraction of training after which the predefined profile saturates",
    "lam.top_fraction": "predefined profile ends at -top_fraction * horizon",
    "lam.lambda0": "ama threshold before the window fills; empty means -horizon",
    "lam.lambda_max": "ama ceiling; empty means -top_fraction * horizon",
    "lam.window": "ama moving-average window in episodes",
    "lam.shift": "ama offset added to the moving average",
    "xi.mode": "fix or prioritized; empty means prioritized with PER, fix otherwise",
    "xi.fixed": "highlight batch fraction for mode fix",
    "xi.alpha": "priority exponent of mode prioritized",
    "curriculum.mode": "predefined, self_paced, control or control_adaptive",
    "curriculum.delta": "step size of c",
    "curriculum.psi_high": "self_paced: raise c above this training success rate",
    "curriculum.psi_low": "self_paced: lower c below this training success rate",
    "curriculum.psi": "control: target evaluation success rate",
    "curriculum.psi_max": "control_adaptive: ceiling of the moving target",
    "curriculum.shift": "control_adaptive: offset added to mean evaluation success",
    "curriculum.window": "episodes (self_paced) or evaluations (control) averaged",
    "curriculum.z_sat": "predefined: fraction of training after which c = 1",
}


def config_keys(cls=TrainConfig, prefix: str = "") -> list[tuple[str, str, object]]:
    """Flattened ``(key, type, default)`` for every leaf of the config tree."""
    out = []
    hints = typing.get_type_hints(cls)
    for f in dataclasses.fields(cls):
        key = prefix + f.name
        hint = hints[f.name]
        if dataclasses.is_dataclass(hint):
            out += config_keys(hint, key + ".")
            continue
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        tname = getattr(hint, "__name__", None) or str(hint)
        out.append((key, tname.replace("typing.", "").replace(" | ", " or "), _jsonable(default)))
    return out


def config_reference() -> str:
    """Markdown table of every config key."""
    lines = ["| key | type | default | meaning |", "|---|---|---|---|"]
    for key, tname, default in config_keys():
        shown = "" if default is None else json.dumps(default)
        lines.append(f"| `{key}` | {tname} | {shown} | {KEY_DOCS.get(key, '')} |")
    return "\n".join(lines) + "\n"
