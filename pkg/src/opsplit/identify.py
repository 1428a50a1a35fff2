"""Error metrics and coefficient identification from selected subsets."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .field import Field
from .splitting import OperatorSubset, rollout
from .trajectory import Trajectory

__all__ = [
    "nrmse",
    "identify_parameters",
    "ParameterEstimate",
    "evaluate_rollout",
    "rollout_error_series",
    "write_evaluation_csv",
]


def _as_array(x: Field | Trajectory | np.ndarray) -> np.ndarray:
    if isinstance(x, Field):
        return x.values
    if isinstance(x, Trajectory):
        return x.values
    return np.asarray(x, dtype=np.float64)


def nrmse(prediction: Field | Trajectory | np.ndarray, truth: Field | Trajectory | np.ndarray) -> float:
    """Normalized error ||prediction - truth||_2 / ||truth||_2.

    Norms run over every value (all channels, all space, and all frames when
    trajectories are compared: the block form).
    """
    p = _as_array(prediction)
    t = _as_array(truth)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: prediction {p.shape} vs truth {t.shape}")
    denom = float(np.linalg.norm(t.ravel()))
    if denom == 0.0:
        raise ValueError("truth has zero norm; NRMSE is undefined")
    return float(np.linalg.norm((p - t).ravel())) / denom


@dataclass(frozen=True)
class ParameterEstimate:
    """Identified coefficient vector, optionally with per-coefficient error."""

    mu_hat: dict[str, float]
    errors: dict[str, float] | None = None

    @property
    def mae(self) -> float:
        if not self.errors:
            raise ValueError("no ground truth was supplied")
        return float(np.mean(list(self.errors.values())))

    def against(self, truth: Mapping[str, float]) -> "ParameterEstimate":
        """Attach absolute errors versus a ground-truth coefficient map."""
        names = set(self.mu_hat) | set(truth)
        errors = {
            name: abs(self.mu_hat.get(name, 0.0) - truth.get(name, 0.0)) for name in sorted(names)
        }
        return ParameterEstimate(mu_hat=dict(self.mu_hat), errors=errors)


def identify_parameters(
    subset: OperatorSubset, names: Iterable[str] | None = None
) -> ParameterEstimate:
    """Sum the selected entries' coefficient blocks componentwise.

    ``names`` extends the reported vector to a full coefficient universe
    (for example the dictionary's), with absent coefficients reported as 0.
    """
    mu_hat: dict[str, float] = {name: 0.0 for name in (names or ())}
    for entry in subset.entries:
        for name, value in entry.mu.items():
            mu_hat[name] = mu_hat.get(name, 0.0) + value
    return ParameterEstimate(mu_hat=dict(sorted(mu_hat.items())))


def rollout_error_series(
    subset: OperatorSubset, truth: Trajectory, context_len: int, horizon: int
) -> tuple[np.ndarray, int | None]:
    """Per-step NRMSE of a closed-loop rollout against held-out frames.

    The rollout starts from truth frame ``context_len - 1`` and predicts the
    next ``horizon`` frames.  Steps after a stability failure hold NRMSE
    = inf; the failing step index is returned alongside.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if context_len < 1:
        raise ValueError(f"context_len must be >= 1, got {context_len}")
    if truth.n_frames < context_len + horizon:
        raise ValueError(
            f"trajectory has {truth.n_frames} frames, need {context_len + horizon}"
        )
    start = truth.frame(context_len - 1)
    result = rollout(subset, start, truth.dt, horizon)
    errors = np.full(horizon, np.inf)
    for i in range(result.completed_steps):
        errors[i] = nrmse(result.frames[i + 1], truth.frame(context_len + i))
    return errors, result.failure_step


def evaluate_rollout(
    subset: OperatorSubset,
    truth: Trajectory,
    context_len: int,
    horizon: int,
    block: bool = False,
) -> float:
    """Rollout error over ``horizon`` steps past the context.

    By default this is the mean of the per-step NRMSE values; with
    ``block=True`` it is one NRMSE over the stacked space-time block.
    A stability failure yields inf.
    """
    if block:
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        start = truth.frame(context_len - 1)
        result = rollout(subset, start, truth.dt, horizon)
        if result.failed:
            return float("inf")
        predicted = np.stack([f.values for f in result.frames[1:]])
        target = truth.values[context_len : context_len + horizon]
        return nrmse(predicted, target)
    errors, failure = rollout_error_series(subset, truth, context_len, horizon)
    if failure is not None:
        return float("inf")
    return float(np.mean(errors))


def write_evaluation_csv(rows: Iterable[Mapping[str, object]], path: str | Path) -> None:
    """Write evaluation rows to CSV.

    Each row supplies ``benchmark``, the true coefficient map ``coeffs``, the
    search ``strategy``, the rollout ``nrmse``, the search ``evaluations``
    count, and the ``identified`` coefficient map.  Coefficient maps are
    stored JSON-encoded in one cell each.
    """
    columns = ["benchmark", "c_or_coeffs", "strategy", "nrmse", "evaluations", "identified_params"]
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(
                [
                    row["benchmark"],
                    json.dumps(dict(row["coeffs"]), sort_keys=True),
                    row["strategy"],
                    f"{float(row['nrmse']):.17g}",
                    int(row["evaluations"]),
                    json.dumps(dict(row["identified"]), sort_keys=True),
                ]
            )
