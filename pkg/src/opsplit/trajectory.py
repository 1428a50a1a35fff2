"""Uniformly sampled solution trajectories."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .field import Field, Grid

__all__ = ["Trajectory"]


@dataclass(frozen=True)
class Trajectory:
    """Frames of a field evolution at uniform time spacing ``dt``.

    ``values`` has shape ``(n_frames, channels, *spatial)``; frame 0 is the
    initial condition.  ``mu`` records the generating coefficients under
    their canonical names, ``generator`` tags the producing routine, and
    ``solver_settings`` keeps whatever knobs the generator used.
    """

    grid: Grid
    values: np.ndarray
    dt: float
    mu: Mapping[str, float] = field(default_factory=dict)
    seed: int | None = None
    generator: str = ""
    solver_settings: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != self.grid.dims + 2 or v.shape[2:] != self.grid.shape:
            raise ValueError(
                f"values shape {np.shape(self.values)} does not match "
                f"(frames, channels)+{self.grid.shape}"
            )
        if v.shape[0] < 2:
            raise ValueError("a trajectory needs at least two frames")
        if not np.all(np.isfinite(v)):
            raise ValueError("trajectory values must be finite")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "mu", dict(self.mu))
        object.__setattr__(self, "solver_settings", dict(self.solver_settings))

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]

    def frame(self, i: int) -> Field:
        return Field(self.grid, self.values[i])

    def times(self) -> np.ndarray:
        return np.arange(self.n_frames) * self.dt

    @classmethod
    def from_fields(
        cls,
        frames: Sequence[Field],
        dt: float,
        *,
        mu: Mapping[str, float] | None = None,
        seed: int | None = None,
        generator: str = "",
        solver_settings: Mapping[str, Any] | None = None,
    ) -> "Trajectory":
        if not frames:
            raise ValueError("no frames given")
        grid = frames[0].grid
        for f in frames:
            if f.grid != grid:
                raise ValueError("all frames must share one grid")
        values = np.stack([f.values for f in frames])
        return cls(
            grid,
            values,
            dt,
            mu=mu or {},
            seed=seed,
            generator=generator,
            solver_settings=solver_settings or {},
        )
