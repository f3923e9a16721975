"""Replay storage for history-conditioned transitions.

Each transition carries the full scaled history prefix observed before
acting, so summaries can be recomputed under the current encoder at
update time.  Prefixes are short (the horizon bounds them) and the
buffer only ever holds one entry per environment step, so copies are cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..prob import RngState


@dataclass
class Transition:
    hist: np.ndarray        # (t, design_dim + obs_dim) scaled pairs before acting
    action: np.ndarray      # (design_dim,) scaled design in [-1, 1]
    reward: float
    next_obs: np.ndarray    # (obs_dim,) scaled outcome of this step
    done: bool

    @property
    def step(self) -> int:
        return self.hist.shape[0]


class ReplayBuffer:
    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self._items: list[Transition] = []
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._items)

    def add(self, tr: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(tr)
        else:
            self._items[self._cursor] = tr
            self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, batch_size: int, rng: RngState) -> list[Transition]:
        """Uniform with replacement."""
        if not self._items:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, len(self._items), size=batch_size)
        return [self._items[i] for i in idx]
