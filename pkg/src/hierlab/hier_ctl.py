"""Highlight-buffer controllers: the admission threshold and the sampling ratio."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

LAMBDA_MODES = ("fix", "predefined", "ama")
XI_MODES = ("fix", "prioritized")


@dataclass
class LambdaController:
    """Episode-return threshold for highlight admission.

    ``predefined`` runs a linear-with-saturation profile on [0, 1] and maps it
    affinely onto ``[r_min, top]`` so it lives on the return scale (returns are
    non-positive under the sparse reward, a raw [0, 1] threshold would never
    admit anything).
    """

    mode: str = "predefined"
    fixed: float = 0.0
    z_sat: float = 0.5
    total_steps: int = 1
    lambda0: float = -100.0
    lambda_max: float = -5.0
    window: int = 50
    shift: float = 0.0
    r_min: float = -100.0
    top: float = -5.0
    returns: deque = field(init=False, repr=False)
    current: float = field(init=False)

    def __post_init__(self):
        if self.mode not in LAMBDA_MODES:
            raise ValueError(f"unknown lambda mode {self.mode!r}; expected one of {LAMBDA_MODES}")
        if self.window <= 0:
            raise ValueError("window must be positive")
        if not 0.0 < self.z_sat <= 1.0:
            raise ValueError(f"z_sat must lie in (0, 1], got {self.z_sat}")
        if self.mode == "predefined" and self.total_steps <= 0:
            raise ValueError("total_steps must be positive for the predefined profile")
        self.returns = deque(maxlen=self.window)
        self.current = {"fix": self.fixed, "predefined": self.r_min, "ama": self.lambda0}[self.mode]

    @classmethod
    def for_horizon(cls, horizon: int, total_steps: int, mode: str = "predefined",
                    top_fraction: float = 0.05, **kw) -> "LambdaController":
        """Defaults keyed to an episode horizon: ``r_min = -T``, ``top = -top_fraction * T``."""
        r_min = -float(horizon)
        top = -top_fraction * horizon
        kw.setdefault("lambda0", r_min)
        kw.setdefault("lambda_max", top)
        return cls(mode=mode, total_steps=total_steps, r_min=r_min, top=top, **kw)

    def profile(self, t: int) -> float:
        """Normalised saturating profile, ``min(1, t / (T_total * z_sat))``."""
        return min(1.0, t / (self.total_steps * self.z_sat))

    def record_return(self, ret: float) -> None:
        if not math.isfinite(ret):
            raise ValueError(f"episode return must be finite, got {ret}")
        self.returns.append(float(ret))

    @property
    def window_mean(self) -> float:
        return sum(self.returns) / len(self.returns)

    def next(self, t: int, j: int) -> float:
        """Threshold for episode ``j`` finishing at global step ``t``."""
        if self.mode == "fix":
            lam = self.fixed
        elif self.mode == "predefined":
            if self.total_steps <= 0:
                raise ValueError("total_steps must be positive")
            if t > self.total_steps:
                raise ValueError(f"t={t} beyond total_steps={self.total_steps}")
            lam = self.r_min + self.profile(t) * (self.top - self.r_min)
        else:
            if j > self.window and len(self.returns) == self.window:
                lam = min(self.lambda_max, self.shift + self.window_mean)
            else:
                lam = self.lambda0
        self.current = lam
        return lam


def lambda_next(ctl: LambdaController, t: int, j: int) -> float:
    return ctl.next(t, j)


def record_return(ctl: LambdaController, ret: float) -> None:
    ctl.record_return(ret)


@dataclass
class XiController:
    mode: str = "fix"
    fixed: float = 0.5
    alpha: float = 0.5
    last_l_hier: float = 0.0
    last_l_ser: float = 0.0
    current: float = field(init=False)

    def __post_init__(self):
        if self.mode not in XI_MODES:
            raise ValueError(f"unknown xi mode {self.mode!r}; expected one of {XI_MODES}")
        if not 0.0 <= self.fixed <= 1.0:
            raise ValueError(f"fixed xi must lie in [0, 1], got {self.fixed}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        self.current = self.fixed

    def next(self, l_hier: float, l_ser: float) -> float:
        if l_hier < 0 or l_ser < 0 or not (math.isfinite(l_hier) and math.isfinite(l_ser)):
            raise ValueError(f"TD-error magnitudes must be finite and >= 0, got {l_hier}, {l_ser}")
        self.last_l_hier, self.last_l_ser = l_hier, l_ser
        if self.mode == "fix":
            xi = self.fixed
        else:
            h = l_hier ** self.alpha
            s = l_ser ** self.alpha
            xi = 0.5 if h + s == 0 else h / (h + s)
        self.current = xi
        return xi


def xi_next(ctl: XiController, l_hier: float, l_ser: float) -> float:
    return ctl.next(l_hier, l_ser)


def split_batch(n: int, xi: float, hier_count: int) -> tuple[int, int]:
    """Sizes ``(n_ser, n_hier)`` of the two sub-batches; half-way rounds up."""
    if n <= 0:
        raise ValueError("batch size must be positive")
    if not 0.0 <= xi <= 1.0:
        raise ValueError(f"xi must lie in [0, 1], got {xi}")
    n_hier = 0 if hier_count == 0 else min(n, math.floor(xi * n + 0.5))
    return n - n_hier, n_hier
