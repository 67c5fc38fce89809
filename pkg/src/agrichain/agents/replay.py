"""Fixed-capacity ring buffer of transitions with uniform sampling."""

from __future__ import annotations

import numpy as np


class ReplayBuffer:
    def __init__(self, capacity: int, obs_dim: int, act_dim: int, act_dtype=np.float64):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.x = np.zeros((capacity, obs_dim))
        self.y = np.zeros((capacity, act_dim), dtype=act_dtype)
        self.z = np.zeros(capacity)
        self.x2 = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity, dtype=bool)
        self.ids = np.full(capacity, -1, dtype=np.int64)  # insertion counter, for bookkeeping checks
        self.head = 0
        self.size = 0
        self.inserted = 0

    def __len__(self) -> int:
        return self.size

    def add(self, x, y, z, x2, done) -> None:
        i = self.head
        self.x[i], self.y[i], self.z[i], self.x2[i], self.done[i] = x, y, z, x2, done
        self.ids[i] = self.inserted
        self.inserted += 1
        self.head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def can_sample(self, batch_size: int) -> bool:
        return self.size >= batch_size

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict:
        if not self.can_sample(batch_size):
            raise ValueError(f"buffer holds {self.size} transitions, need {batch_size}")
        idx = rng.integers(0, self.size, size=batch_size)
        return {"x": self.x[idx], "y": self.y[idx], "z": self.z[idx], "x2": self.x2[idx],
                "done": self.done[idx], "ids": self.ids[idx]}
