"""Subset search over operator dictionaries.

Both strategies score candidate subsets with a teacher-forced one-step
fitting loss on a short context and keep per-evaluation accounting of flow
applications, so search budgets can be compared across strategies.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dictionary import Dictionary
from .field import Field
from .identify import identify_parameters, nrmse
from .physics import StabilityError
from .splitting import OperatorSubset, SplitScheme, split_step, step_cost
from .trajectory import Trajectory

__all__ = [
    "Context",
    "SearchConfig",
    "SearchReport",
    "fitting_loss",
    "uniform_search",
    "beam_search",
    "budget_curve",
    "write_budget_csv",
]


@dataclass(frozen=True)
class Context:
    """The short observed prefix a search fits against."""

    frames: tuple[Field, ...]
    dt: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "frames", tuple(self.frames))
        if len(self.frames) < 2:
            raise ValueError("a context needs at least two frames")
        grid = self.frames[0].grid
        for f in self.frames:
            if f.grid != grid:
                raise ValueError("context frames must share one grid")
        if not (self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")

    def __len__(self) -> int:
        return len(self.frames)

    @classmethod
    def from_trajectory(cls, traj: Trajectory, length: int) -> "Context":
        if not (2 <= length <= traj.n_frames):
            raise ValueError(f"context length {length} outside [2, {traj.n_frames}]")
        return cls(frames=tuple(traj.frame(i) for i in range(length)), dt=traj.dt)


@dataclass(frozen=True)
class SearchConfig:
    """Shared search knobs; ``trials`` is uniform-only, beam ignores it."""

    trials: int = 100
    beam_width: int = 4
    max_len: int = 4
    improvement_threshold: float = 0.05
    scheme: SplitScheme = SplitScheme.STRANG
    seed: int = 0
    canonical_order: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        if self.trials < 0:
            raise ValueError(f"trials must be >= 0, got {self.trials}")
        if self.beam_width < 1:
            raise ValueError(f"beam_width must be >= 1, got {self.beam_width}")
        if self.max_len < 1:
            raise ValueError(f"max_len must be >= 1, got {self.max_len}")
        if not (0.0 <= self.improvement_threshold):
            raise ValueError("improvement_threshold must be >= 0")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


def fitting_loss(subset: OperatorSubset, ctx: Context) -> float:
    """Mean teacher-forced one-step NRMSE over the context transitions.

    Every transition steps from the observed frame, never from the model's
    own output.  A stability failure anywhere returns the +inf sentinel so
    unstable candidates order after every stable one.
    """
    total = 0.0
    transitions = len(ctx) - 1
    try:
        for t in range(transitions):
            predicted = split_step(subset, ctx.frames[t], ctx.dt)
            total += nrmse(predicted, ctx.frames[t + 1])
    except StabilityError:
        return float("inf")
    return total / transitions


def _loss_task(args: tuple[OperatorSubset, Context]) -> float:
    return fitting_loss(*args)


def flops_per_application(points: int) -> float:
    """Transform-dominated cost model: 5 P log2(P) per flow application."""
    return 5.0 * points * math.log2(points)


@dataclass(frozen=True)
class SearchReport:
    """Search outcome plus its full cost/loss history.

    ``history`` holds one row per subset evaluation, in evaluation order:
    (cumulative flow applications, best loss seen so far).
    """

    best_subset: OperatorSubset
    best_loss: float
    history: tuple[tuple[int, float], ...]
    evaluations: int
    strategy: str
    seed: int
    points: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "history", tuple((int(a), float(l)) for a, l in self.history))
        apps = [a for a, _ in self.history]
        losses = [l for _, l in self.history]
        if any(b <= a for a, b in zip(apps, apps[1:])):
            raise ValueError("history cost column must be strictly increasing")
        if any(b > a for a, b in zip(losses, losses[1:])):
            raise ValueError("history best-loss column must be non-increasing")

    def to_json_dict(self) -> dict:
        entries = [
            {
                "id": e.id,
                "kind": e.kind.value,
                "coeffs": dict(sorted(e.flow.params.coeffs.items())),
                "mu": dict(sorted(e.mu.items())),
            }
            for e in self.best_subset.entries
        ]
        identified = identify_parameters(self.best_subset)
        return {
            "strategy": self.strategy,
            "seed": self.seed,
            "scheme": self.best_subset.scheme.value,
            "best_loss": self.best_loss,
            "best_subset_ids": list(self.best_subset.ids),
            "best_subset": entries,
            "identified_mu": identified.mu_hat,
            "evaluations": self.evaluations,
            "applications": self.history[-1][0] if self.history else 0,
            "history": [[a, l] for a, l in self.history],
            "points": self.points,
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n", encoding="utf-8")


def budget_curve(report: SearchReport) -> list[tuple[float, int, float]]:
    """Rows of (estimated flops, applications, best loss so far)."""
    per_app = flops_per_application(report.points)
    return [(apps * per_app, apps, loss) for apps, loss in report.history]


def write_budget_csv(report: SearchReport, path: str | Path) -> None:
    lines = ["flops,applications,best_loss"]
    for flops, apps, loss in budget_curve(report):
        lines.append(f"{flops:.6g},{apps},{loss:.17g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class _Bookkeeper:
    """Evaluates subsets, tracks cost, and folds results deterministically."""

    def __init__(self, ctx: Context, config: SearchConfig):
        self.ctx = ctx
        self.config = config
        self.applications = 0
        self.evaluations = 0
        self.history: list[tuple[int, float]] = []
        self.best_subset: OperatorSubset | None = None
        # The id tuple breaks loss ties; (inf,) sorts after every real id
        # tuple so even an all-unstable sweep yields a best subset.
        self.best_key: tuple[float, tuple[float, ...]] = (float("inf"), (float("inf"),))

    def make_subset(self, entries: Sequence) -> OperatorSubset:
        subset = OperatorSubset(entries=tuple(entries), scheme=self.config.scheme)
        if self.config.canonical_order:
            subset = subset.sorted_by_id()
        return subset

    def evaluate(self, subsets: Sequence[OperatorSubset]) -> list[float]:
        """Score subsets (possibly in parallel) and fold results in order."""
        if self.config.workers > 1 and len(subsets) > 1:
            with ProcessPoolExecutor(max_workers=self.config.workers) as pool:
                losses = list(pool.map(_loss_task, [(s, self.ctx) for s in subsets]))
        else:
            losses = [fitting_loss(s, self.ctx) for s in subsets]
        transitions = len(self.ctx) - 1
        for subset, loss in zip(subsets, losses):
            self.applications += transitions * step_cost(subset.m, self.config.scheme)
            self.evaluations += 1
            key = (loss, subset.ids)
            if key < self.best_key:
                self.best_key = key
                self.best_subset = subset
            self.history.append((self.applications, self.best_key[0]))
        return losses

    def report(self, strategy: str) -> SearchReport:
        if self.best_subset is None:
            raise ValueError("no subsets were evaluated")
        grid = self.ctx.frames[0].grid
        points = grid.npoints * self.ctx.frames[0].channels
        return SearchReport(
            best_subset=self.best_subset,
            best_loss=self.best_key[0],
            history=tuple(self.history),
            evaluations=self.evaluations,
            strategy=strategy,
            seed=self.config.seed,
            points=points,
        )


def _check_common(d: Dictionary, ctx: Context, config: SearchConfig) -> None:
    if config.max_len > len(d):
        raise ValueError(f"max_len {config.max_len} exceeds dictionary size {len(d)}")
    if ctx.frames[0].grid != d.grid:
        raise ValueError("context grid does not match dictionary grid")


def uniform_search(d: Dictionary, ctx: Context, config: SearchConfig) -> SearchReport:
    """Random subset baseline.

    Seeds the running best with the best singleton, then draws ``trials``
    subsets with size uniform on {1..max_len} and members uniform without
    replacement, keeping the lowest-loss subset seen.
    """
    _check_common(d, ctx, config)
    bk = _Bookkeeper(ctx, config)
    bk.evaluate([bk.make_subset((e,)) for e in d])
    rng = np.random.default_rng(config.seed)
    trial_subsets = []
    for _ in range(config.trials):
        m = int(rng.integers(1, config.max_len + 1))
        picks = rng.choice(len(d), size=m, replace=False)
        trial_subsets.append(bk.make_subset(tuple(d[int(i)] for i in picks)))
    if trial_subsets:
        bk.evaluate(trial_subsets)
    return bk.report("uniform")


def beam_search(d: Dictionary, ctx: Context, config: SearchConfig) -> SearchReport:
    """Greedy beam construction of operator subsets.

    Level 0 ranks all singletons and keeps the best ``beam_width``.  Each
    later level extends every beam member by one unused entry, skipping
    candidates whose unordered id set was already generated, and keeps the
    best ``beam_width`` again.  The search stops when a level's best loss
    improves on the previous level's by less than ``improvement_threshold``
    (relative) or subsets reach ``max_len``; the reported subset is the best
    across all levels.  Ranking ties break toward the lowest ordered id
    tuple.
    """
    _check_common(d, ctx, config)
    bk = _Bookkeeper(ctx, config)
    singletons = [bk.make_subset((e,)) for e in d]
    losses = bk.evaluate(singletons)
    ranked = sorted(zip(losses, (s.ids for s in singletons), singletons))
    beam = [item[2] for item in ranked[: config.beam_width]]
    prev_best = ranked[0][0]
    for _ in range(1, config.max_len):
        seen: set[frozenset[int]] = set()
        candidates: list[OperatorSubset] = []
        for parent in beam:
            parent_ids = set(parent.ids)
            for entry in d:
                if entry.id in parent_ids:
                    continue
                key = frozenset(parent_ids | {entry.id})
                if key in seen:
                    continue
                seen.add(key)
                candidates.append(bk.make_subset(parent.entries + (entry,)))
        if not candidates:
            break
        losses = bk.evaluate(candidates)
        ranked = sorted(zip(losses, (s.ids for s in candidates), candidates))
        level_best = ranked[0][0]
        if math.isfinite(prev_best) and prev_best > 0.0:
            improvement = (prev_best - level_best) / prev_best
        else:
            improvement = 1.0 if level_best < prev_best else 0.0
        if improvement < config.improvement_threshold:
            break
        beam = [item[2] for item in ranked[: config.beam_width]]
        prev_best = level_best
    return bk.report("beam")
