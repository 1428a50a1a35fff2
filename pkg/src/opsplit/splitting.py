"""Operator-splitting schemes over ordered subsets of dictionary entries."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .dictionary import OperatorEntry
from .field import Field
from .physics import StabilityError

__all__ = [
    "SplitScheme",
    "OperatorSubset",
    "lie_step",
    "strang_step",
    "split_step",
    "step_cost",
    "rollout",
    "RolloutResult",
]


class SplitScheme(Enum):
    LIE = "lie"
    STRANG = "strang"


@dataclass(frozen=True)
class OperatorSubset:
    """Ordered selection of dictionary entries plus the splitting scheme.

    The entry order is the order the search selected them in; use
    :meth:`sorted_by_id` for order-insensitive comparisons or ablations.
    """

    entries: tuple[OperatorEntry, ...]
    scheme: SplitScheme = SplitScheme.STRANG

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.entries:
            raise ValueError("an operator subset needs at least one entry")
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError(f"subset entries must be distinct, got ids {ids}")
        first = self.entries[0].flow
        for e in self.entries[1:]:
            if e.flow.grid != first.grid or e.flow.dt != first.dt:
                raise ValueError("subset entries must share grid and dt")

    @property
    def m(self) -> int:
        return len(self.entries)

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(e.id for e in self.entries)

    def sorted_by_id(self) -> "OperatorSubset":
        return replace(self, entries=tuple(sorted(self.entries, key=lambda e: e.id)))


def _advance(entry: OperatorEntry, f: Field, t: float) -> Field:
    try:
        return entry.flow.advance(f, t)
    except StabilityError as err:
        raise StabilityError(
            f"operator {entry.id} ({entry.kind.value}): {err}", operator_id=entry.id
        ) from err


def lie_step(subset: OperatorSubset, f: Field, dt: float) -> Field:
    """First-order splitting: apply each flow once for the full step."""
    for entry in subset.entries:
        f = _advance(entry, f, dt)
    return f


def strang_step(subset: OperatorSubset, f: Field, dt: float) -> Field:
    """Symmetric second-order splitting.

    Half steps walk up the selection order, the last flow takes a full step,
    and half steps walk back down: 2m-1 flow applications for m entries.
    """
    entries = subset.entries
    half = dt / 2.0
    for entry in entries[:-1]:
        f = _advance(entry, f, half)
    f = _advance(entries[-1], f, dt)
    for entry in reversed(entries[:-1]):
        f = _advance(entry, f, half)
    return f


def split_step(subset: OperatorSubset, f: Field, dt: float) -> Field:
    if subset.scheme is SplitScheme.LIE:
        return lie_step(subset, f, dt)
    return strang_step(subset, f, dt)


def step_cost(m: int, scheme: SplitScheme) -> int:
    """Flow applications consumed by one split step of an m-entry subset."""
    if m < 1:
        raise ValueError(f"subset size must be >= 1, got {m}")
    return m if scheme is SplitScheme.LIE else 2 * m - 1


@dataclass(frozen=True)
class RolloutResult:
    """Frames produced by repeated split stepping, with failure marker.

    ``frames[0]`` is the initial state; ``failure_step`` is the 0-based index
    of the step that blew up, or None if all steps completed.
    """

    frames: tuple[Field, ...]
    dt: float
    failure_step: int | None = None

    @property
    def completed_steps(self) -> int:
        return len(self.frames) - 1

    @property
    def failed(self) -> bool:
        return self.failure_step is not None


def rollout(subset: OperatorSubset, u0: Field, dt: float, steps: int) -> RolloutResult:
    """Advance ``u0`` by ``steps`` split steps, recording every frame.

    On a stability failure the partial frames are returned with the failing
    step index instead of raising.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if not (dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    frames = [u0]
    current = u0
    for i in range(steps):
        try:
            current = split_step(subset, current, dt)
        except StabilityError:
            return RolloutResult(frames=tuple(frames), dt=dt, failure_step=i)
        frames.append(current)
    return RolloutResult(frames=tuple(frames), dt=dt, failure_step=None)
