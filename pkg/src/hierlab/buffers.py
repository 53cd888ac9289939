"""Replay storage: the circular standard/highlight buffers, proportional
prioritization over a sum tree, hindsight relabeling and the highlight
admission rule.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hierlab.core import Episode, GoalObservation, RewardSpec, Transition, sparse_reward, undiscounted_return

_INITIAL_ALLOC = 1024


@dataclass
class Batch:
    """Column-major view of sampled transitions (flat observation layout)."""

    obs: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray
    indices: np.ndarray

    def __len__(self) -> int:
        return self.reward.shape[0]

    @classmethod
    def concat(cls, *batches: "Batch") -> "Batch":
        return cls(*(np.concatenate([getattr(b, f) for b in batches]) for f in
                     ("obs", "action", "reward", "next_obs", "done", "indices")))

    def tobytes(self) -> bytes:
        return b"".join(np.ascontiguousarray(a).tobytes() for a in
                        (self.obs, self.action, self.reward, self.next_obs, self.done))


class RingBuffer:
    """Fixed-capacity FIFO of transitions.

    Storage grows geometrically up to ``capacity`` so a 10^6-slot buffer costs
    nothing until it is actually filled.
    """

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = int(capacity)
        self.write_cursor = 0
        self.count = 0
        self._state_dim: int | None = None
        self._goal_dim: int | None = None
        self._act_dim: int | None = None
        self._obs = self._next_obs = self._action = self._reward = self._done = None

    def __len__(self) -> int:
        return self.count

    @property
    def dims(self) -> tuple[int, int, int] | None:
        if self._state_dim is None:
            return None
        return self._state_dim, self._goal_dim, self._act_dim

    def _allocate(self, tr: Transition) -> None:
        self._state_dim = tr.obs.state.size
        self._goal_dim = tr.obs.achieved_goal.size
        self._act_dim = tr.action.size
        n = min(self.capacity, _INITIAL_ALLOC)
        obs_dim = tr.obs.dim
        self._obs = np.zeros((n, obs_dim))
        self._next_obs = np.zeros((n, obs_dim))
        self._action = np.zeros((n, self._act_dim))
        self._reward = np.zeros(n)
        self._done = np.zeros(n)

    def _grow(self, needed: int) -> None:
        size = self._reward.shape[0]
        if needed <= size:
            return
        new = min(self.capacity, max(needed, 2 * size))
        for name in ("_obs", "_next_obs", "_action", "_reward", "_done"):
            old = getattr(self, name)
            arr = np.zeros((new,) + old.shape[1:])
            arr[:size] = old
            setattr(self, name, arr)

    def push(self, tr: Transition) -> int:
        """Insert one transition, evicting the oldest when full. Returns its slot."""
        if self._state_dim is None:
            self._allocate(tr)
        elif (tr.obs.state.size, tr.obs.achieved_goal.size, tr.action.size) != self.dims:
            raise ValueError("transition dimensions do not match buffer contents")
        slot = self.write_cursor
        self._grow(slot + 1)
        self._obs[slot] = tr.obs.flat()
        self._next_obs[slot] = tr.next_obs.flat()
        self._action[slot] = tr.action
        self._reward[slot] = tr.reward
        self._done[slot] = float(tr.done)
        self.write_cursor = (slot + 1) % self.capacity
        self.count = min(self.count + 1, self.capacity)
        return slot

    def push_many(self, transitions) -> list[int]:
        return [self.push(tr) for tr in transitions]

    def slots_in_order(self) -> np.ndarray:
        """Occupied slots from oldest to newest."""
        if self.count < self.capacity:
            return np.arange(self.count)
        return (np.arange(self.capacity) + self.write_cursor) % self.capacity

    def _split_obs(self, flat: np.ndarray) -> GoalObservation:
        s, g = self._state_dim, self._goal_dim
        return GoalObservation(flat[:s].copy(), flat[s:s + g].copy(), flat[s + g:s + 2 * g].copy())

    def get(self, slot: int) -> Transition:
        if not 0 <= slot < self.count:
            raise IndexError(f"slot {slot} not occupied (count={self.count})")
        return Transition(
            obs=self._split_obs(self._obs[slot]),
            action=self._action[slot].copy(),
            next_obs=self._split_obs(self._next_obs[slot]),
            reward=float(self._reward[slot]),
            done=bool(self._done[slot]),
        )

    def transitions(self) -> list[Transition]:
        return [self.get(int(s)) for s in self.slots_in_order()]

    def gather(self, slots: np.ndarray) -> Batch:
        slots = np.asarray(slots, dtype=np.int64)
        if self._state_dim is None:
            raise ValueError("buffer has never held a transition")
        return Batch(
            obs=self._obs[slots],
            action=self._action[slots],
            reward=self._reward[slots],
            next_obs=self._next_obs[slots],
            done=self._done[slots],
            indices=slots,
        )

    def uniform_sample(self, n: int, rng: np.random.Generator) -> Batch:
        if self.count == 0:
            raise ValueError("cannot sample from an empty buffer")
        if n == 0:
            return self.gather(np.zeros(0, dtype=np.int64))
        return self.gather(rng.integers(0, self.count, size=n))


def push_episode(buf: RingBuffer, e: Episode) -> list[int]:
    if len(e) == 0:
        raise ValueError("cannot store an empty episode")
    return buf.push_many(e.transitions)


def uniform_sample(buf: RingBuffer, n: int, rng: np.random.Generator) -> Batch:
    return buf.uniform_sample(n, rng)


class PriorityIndex:
    """Proportional prioritization over buffer slots, backed by a sum tree.

    Leaves hold ``priority ** alpha``; the raw priorities are kept alongside so
    updates can be audited. New slots enter at the largest priority seen so far.
    """

    def __init__(self, capacity: int, alpha: float = 0.6, beta: float = 0.4, eps: float = 1e-6):
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
        if not 0.0 <= beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {beta}")
        if not eps > 0:
            raise ValueError(f"eps must be > 0, got {eps}")
        self.capacity = int(capacity)
        self.alpha = alpha
        self.beta = beta
        self.eps = eps
        size = 2
        while size < self.capacity:
            size *= 2
        self._size = size
        self.tree = np.zeros(2 * size)
        self.priorities = np.zeros(self.capacity)
        self.max_priority = 1.0
        self.count = 0

    @property
    def total(self) -> float:
        return float(self.tree[1])

    @property
    def leaves(self) -> np.ndarray:
        return self.tree[self._size:self._size + self.capacity]

    def _set(self, slots: np.ndarray, priorities: np.ndarray) -> None:
        slots = np.asarray(slots, dtype=np.int64)
        self.priorities[slots] = priorities
        self.tree[slots + self._size] = priorities ** self.alpha
        node = np.unique((slots + self._size) // 2)
        while True:
            self.tree[node] = self.tree[2 * node] + self.tree[2 * node + 1]
            if node[0] == 1:
                break
            node = np.unique(node // 2)

    def add(self, slot: int) -> None:
        """Register a freshly written slot at the current maximum priority."""
        if not 0 <= slot < self.capacity:
            raise IndexError(f"slot {slot} outside capacity {self.capacity}")
        self._set(np.array([slot]), np.array([self.max_priority]))
        self.count = min(self.count + 1, self.capacity)

    def update(self, slots, td_errors) -> None:
        slots = np.asarray(slots, dtype=np.int64)
        td = np.abs(np.asarray(td_errors, dtype=np.float64))
        if slots.shape != td.shape:
            raise ValueError("slots and td_errors must have the same length")
        if slots.size == 0:
            return
        if slots.min() < 0 or slots.max() >= self.count:
            raise IndexError(f"slot out of range [0, {self.count})")
        if not np.all(np.isfinite(td)):
            raise ValueError("non-finite TD error")
        p = td + self.eps
        # duplicates within one batch: last write wins, same as a sequential loop
        self._set(slots, p)
        self.max_priority = max(self.max_priority, float(p.max()))

    def probabilities(self) -> np.ndarray:
        leaves = self.leaves[:self.count]
        return leaves / leaves.sum()

    def rebuild(self) -> np.ndarray:
        """Recompute every internal node from the leaves; returns the fresh tree."""
        tree = np.zeros_like(self.tree)
        tree[self._size:] = self.tree[self._size:]
        for i in range(self._size - 1, 0, -1):
            tree[i] = tree[2 * i] + tree[2 * i + 1]
        return tree

    def sample_slots(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.count == 0 or self.total <= 0:
            raise ValueError("cannot sample from an empty priority index")
        if n == 0:
            return np.zeros(0, dtype=np.int64)
        u = rng.random(n) * self.total
        node = np.ones(n, dtype=np.int64)
        while node[0] < self._size:
            left = 2 * node
            go_right = (u >= self.tree[left]) & (self.tree[left + 1] > 0)
            u = np.where(go_right, u - self.tree[left], u)
            node = np.where(go_right, left + 1, left)
        return node - self._size


def per_sample(buf: RingBuffer, idx: PriorityIndex, n: int, rng: np.random.Generator,
               beta: float | None = None) -> tuple[Batch, np.ndarray, np.ndarray]:
    """Draw ``n`` slots proportionally to priority; return batch, IS weights and slots.

    Weights are ``(N * P(i)) ** -beta`` scaled so the largest in the batch is 1.
    """
    if buf.count == 0:
        raise ValueError("cannot sample from an empty buffer")
    if idx.count != buf.count:
        raise ValueError("priority index out of sync with buffer")
    beta = idx.beta if beta is None else beta
    if n == 0:
        empty = np.zeros(0, dtype=np.int64)
        return buf.gather(empty), np.zeros(0), empty
    slots = idx.sample_slots(n, rng)
    probs = idx.leaves[slots] / idx.total
    weights = (buf.count * probs) ** (-beta)
    weights = weights / weights.max()
    return buf.gather(slots), weights, slots


def per_update(idx: PriorityIndex, indices, td_errors) -> None:
    idx.update(indices, td_errors)


@dataclass(frozen=True)
class HerSpec:
    strategy: str = "future"
    k_relabel: int = 4

    def __post_init__(self):
        if self.strategy not in ("final", "future"):
            raise ValueError(f"unknown HER strategy {self.strategy!r}")
        if self.k_relabel < 1:
            raise ValueError("k_relabel must be >= 1")


def her_relabel(e: Episode, spec: HerSpec, reward_spec: RewardSpec,
                rng: np.random.Generator) -> list[Transition]:
    """Virtual copies of ``e`` whose desired goal is swapped for one actually achieved.

    ``final`` uses the last achieved goal once per step; ``future`` draws
    ``k_relabel`` goals per step uniformly from the achieved goals at that step
    or later. Rewards and done flags are recomputed for the new goal.
    """
    if len(e) == 0:
        raise ValueError("cannot relabel an empty episode")
    achieved = e.achieved_goals()
    L = len(e)
    if spec.strategy == "final":
        picks = [np.full(1, L - 1) for _ in range(L)]
    else:
        picks = [rng.integers(t, L, size=spec.k_relabel) for t in range(L)]
    out = []
    for t, tr in enumerate(e.transitions):
        for g_idx in picks[t]:
            goal = achieved[g_idx]
            r = sparse_reward(tr.next_obs.achieved_goal, goal, reward_spec)
            out.append(Transition(
                obs=tr.obs.with_goal(goal),
                action=tr.action,
                next_obs=tr.next_obs.with_goal(goal),
                reward=r,
                done=r == 0.0,
            ))
    return out


def hier_store(b_hier: RingBuffer, e: Episode, lam: float) -> bool:
    """Admit ``e`` to the highlight buffer iff ``lam`` is strictly below its return."""
    if not np.isfinite(lam):
        raise ValueError(f"threshold must be finite, got {lam}")
    if lam < undiscounted_return(e):
        push_episode(b_hier, e)
        return True
    return False


# Snapshot layout (little-endian):
#   magic b"HIERBUF\0" | u32 version | u64 capacity | u64 count
#   | u32 state_dim | u32 goal_dim | u32 act_dim
#   then count records oldest-first, each f8[obs_dim] f8[act_dim] f8 reward
#   f8[obs_dim] next_obs f8 done, where obs_dim = state_dim + 2 * goal_dim.
SNAPSHOT_MAGIC = b"HIERBUF\0"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<8sIQQIII")


def save_snapshot(buf: RingBuffer, path) -> None:
    dims = buf.dims or (0, 0, 0)
    slots = buf.slots_in_order()
    with open(Path(path), "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, buf.capacity, buf.count, *dims))
        if buf.count:
            rows = np.concatenate([
                buf._obs[slots], buf._action[slots], buf._reward[slots, None],
                buf._next_obs[slots], buf._done[slots, None],
            ], axis=1)
            fh.write(rows.astype("<f8").tobytes())


def load_snapshot(path) -> RingBuffer:
    raw = Path(path).read_bytes()
    magic, version, capacity, count, s, g, a = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError("not a buffer snapshot")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    buf = RingBuffer(capacity)
    if count == 0:
        return buf
    obs_dim = s + 2 * g
    width = 2 * obs_dim + a + 2
    rows = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(count, width)
    for row in rows:
        obs = GoalObservation(row[:s], row[s:s + g], row[s + g:obs_dim])
        o = obs_dim + a + 1
        nxt = GoalObservation(row[o:o + s], row[o + s:o + s + g], row[o + s + g:o + obs_dim])
        buf.push(Transition(obs, row[obs_dim:obs_dim + a], nxt, float(row[obs_dim + a]), bool(row[-1])))
    return buf
