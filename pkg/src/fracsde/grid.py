from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["TimeGrid"]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_i = i * dt`` for ``i = 0..steps``."""

    dt: float
    steps: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError("steps must be a positive integer")
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "steps", int(self.steps))

    @classmethod
    def from_horizon(cls, horizon: float, dt: float) -> "TimeGrid":
        steps = int(round(horizon / dt))
        if steps < 1 or abs(steps * dt - horizon) > 1e-9 * max(1.0, horizon):
            raise ValueError(f"horizon {horizon} is not a multiple of dt={dt}")
        return cls(horizon / steps, steps)

    @property
    def horizon(self) -> float:
        return self.dt * self.steps

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)

    def cell_of(self, t) -> np.ndarray:
        """Index j of the cell [t_j, t_{j+1}) containing each time."""
        idx = np.floor(np.asarray(t, float) / self.dt).astype(int)
        return np.clip(idx, 0, self.steps - 1)
