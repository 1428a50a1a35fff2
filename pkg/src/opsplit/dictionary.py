"""Dictionaries of candidate flow operators.

A dictionary is an ordered, immutable collection of single-physics flows
sharing one grid and one native step size.  Entries are built from a
declarative :class:`DictionarySpec`, sorted canonically by (kind, swept
coefficient value), and numbered 0..N-1.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

from .field import Grid
from .physics import (
    FlowOperator,
    PhysicsKind,
    PhysicsParams,
    SolverConfig,
    GRAYSCOTT_DIFFUSION_A,
    GRAYSCOTT_DIFFUSION_B,
)

__all__ = [
    "OperatorEntry",
    "Dictionary",
    "DictionarySpec",
    "OperatorBlock",
    "build_dictionary",
    "subsample",
    "load_dictionary_spec",
]

# Coefficient swept per kind when a block lists several values.
_SWEPT_COEFF: dict[PhysicsKind, str | None] = {
    PhysicsKind.ADVECTION: "c",
    PhysicsKind.DIFFUSION: "D",
    PhysicsKind.NONLINEAR_ADVECTION: "alpha",
    PhysicsKind.DISPERSION: "gamma",
    PhysicsKind.REACTION: "F",
    PhysicsKind.DIFFUSION_KILL: "k",
    PhysicsKind.EULER: None,
    PhysicsKind.DIFFUSION_2D: "nu",
}

_KIND_ORDER = {kind: i for i, kind in enumerate(PhysicsKind)}


@dataclass(frozen=True)
class OperatorEntry:
    """One dictionary entry: id, flow, and its identification block."""

    id: int
    flow: FlowOperator
    provenance: str = ""

    @property
    def mu(self) -> dict[str, float]:
        return self.flow.params.mu

    @property
    def kind(self) -> PhysicsKind:
        return self.flow.kind


@dataclass(frozen=True)
class Dictionary:
    """Ordered collection of operator entries on a shared grid and dt."""

    entries: tuple[OperatorEntry, ...]
    grid: Grid
    dt: float

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValueError("a dictionary needs at least one entry")
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("entry ids must be unique")
        for e in self.entries:
            if e.flow.grid != self.grid or e.flow.dt != self.dt:
                raise ValueError(f"entry {e.id} does not share the dictionary grid/dt")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[OperatorEntry]:
        return iter(self.entries)

    def __getitem__(self, i: int) -> OperatorEntry:
        return self.entries[i]

    def by_id(self, entry_id: int) -> OperatorEntry:
        for e in self.entries:
            if e.id == entry_id:
                return e
        raise KeyError(f"no entry with id {entry_id}")

    @property
    def coefficient_names(self) -> tuple[str, ...]:
        """Canonical coefficient names covered by the entries, sorted."""
        names = {name for e in self.entries for name in e.mu}
        return tuple(sorted(names))

    def describe(self) -> list[dict[str, Any]]:
        """Serializable metadata for every entry, in order."""
        return [
            {
                "id": e.id,
                "kind": e.kind.value,
                "coeffs": dict(sorted(e.flow.params.coeffs.items())),
                "mu": dict(sorted(e.mu.items())),
                "provenance": e.provenance,
            }
            for e in self.entries
        ]


@dataclass(frozen=True)
class OperatorBlock:
    """One family of entries: a kind and the coefficient values to sweep."""

    kind: PhysicsKind
    values: tuple[float, ...] = ()
    fixed: Mapping[str, float] = dataclass_field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "fixed", dict(self.fixed))
        if _SWEPT_COEFF[self.kind] is None:
            if self.values:
                raise ValueError(f"{self.kind.value} takes no swept coefficient values")
        elif not self.values:
            raise ValueError(f"{self.kind.value} block needs at least one value")


@dataclass(frozen=True)
class DictionarySpec:
    """Declarative description of a dictionary (grid, dt, operator blocks)."""

    grid: Grid
    dt: float
    blocks: tuple[OperatorBlock, ...]
    solver: SolverConfig = SolverConfig()

    def __post_init__(self) -> None:
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.blocks:
            raise ValueError("a dictionary spec needs at least one operator block")
        object.__setattr__(self, "blocks", tuple(self.blocks))


def _params_for(kind: PhysicsKind, value: float | None, fixed: Mapping[str, float]) -> PhysicsParams:
    if kind is PhysicsKind.EULER:
        return PhysicsParams.euler()
    swept = _SWEPT_COEFF[kind]
    coeffs = {swept: value}
    if kind is PhysicsKind.REACTION:
        coeffs["delta"] = fixed.get("delta", 1.0)
    elif kind is PhysicsKind.DIFFUSION_KILL:
        coeffs["D_A"] = fixed.get("D_A", GRAYSCOTT_DIFFUSION_A)
        coeffs["D_B"] = fixed.get("D_B", GRAYSCOTT_DIFFUSION_B)
    return PhysicsParams(kind, coeffs)


def build_dictionary(spec: DictionarySpec) -> Dictionary:
    """Instantiate a spec into a canonically ordered dictionary.

    Entries are sorted by (kind declaration order, swept coefficient value);
    duplicate (kind, coefficients) pairs collapse to one entry with a
    warning.  Ids are assigned 0..N-1 after sorting, so two builds of the
    same spec agree entry for entry.
    """
    staged: list[tuple[int, float, PhysicsParams, str]] = []
    seen: set[tuple[str, tuple[tuple[str, float], ...]]] = set()
    for block in spec.blocks:
        values: Sequence[float | None] = block.values if block.values else (None,)
        for value in values:
            params = _params_for(block.kind, value, block.fixed)
            key = (params.kind.value, tuple(sorted(params.coeffs.items())))
            if key in seen:
                warnings.warn(f"dropping duplicate dictionary entry {key}", stacklevel=2)
                continue
            seen.add(key)
            swept = _SWEPT_COEFF[block.kind]
            sort_value = params.coeffs[swept] if swept is not None else 0.0
            provenance = (
                f"{block.kind.value}"
                if swept is None
                else f"{block.kind.value} {swept}={params.coeffs[swept]:g}"
            )
            staged.append((_KIND_ORDER[block.kind], sort_value, params, provenance))
    staged.sort(key=lambda item: (item[0], item[1]))
    entries = tuple(
        OperatorEntry(
            id=i,
            flow=FlowOperator(params=params, grid=spec.grid, dt=spec.dt, config=spec.solver),
            provenance=provenance,
        )
        for i, (_, _, params, provenance) in enumerate(staged)
    )
    return Dictionary(entries=entries, grid=spec.grid, dt=spec.dt)


def subsample(d: Dictionary, n: int, seed: int) -> Dictionary:
    """Uniformly subsample ``n`` entries without replacement, keeping order."""
    if not (1 <= n <= len(d)):
        raise ValueError(f"cannot subsample {n} of {len(d)} entries")
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(len(d), size=n, replace=False))
    return Dictionary(
        entries=tuple(d.entries[i] for i in keep),
        grid=d.grid,
        dt=d.dt,
    )


def _grid_from_json(obj: Mapping[str, Any]) -> Grid:
    try:
        return Grid(dims=int(obj["dims"]), points=int(obj["points"]), length=float(obj["length"]))
    except KeyError as err:
        raise ValueError(f"grid block is missing key {err}") from err


def load_dictionary_spec(path: str | Path) -> DictionarySpec:
    """Read a dictionary spec from its JSON file format.

    Schema::

        {
          "grid": {"dims": 1, "points": 256, "length": 16.0},
          "dt": 0.101,
          "operators": [
            {"kind": "advection", "values": [0.25, 0.5]},
            {"kind": "diffusion", "linspace": {"start": 0.05, "stop": 1.0, "num": 20}},
            {"kind": "diffusion_2d", "logspace": {"start": 1e-4, "stop": 1e-2, "num": 16}},
            {"kind": "euler"}
          ],
          "solver": {"advective_cfl": 0.4, "max_substeps": 100000}
        }

    Each operator block takes exactly one of ``values``, ``linspace`` or
    ``logspace`` (none for parameter-free kinds) plus optional fixed
    coefficient overrides under ``fixed``.  The optional ``solver`` block
    overrides :class:`SolverConfig` fields for every entry.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as err:
            raise ValueError(f"{path} is not valid JSON: {err}") from err
    if not isinstance(raw, dict) or "operators" not in raw:
        raise ValueError(f"{path} does not look like a dictionary spec")
    blocks = []
    for obj in raw["operators"]:
        try:
            kind = PhysicsKind(obj["kind"])
        except (KeyError, ValueError) as err:
            raise ValueError(f"bad operator kind in {path}: {obj!r}") from err
        given = [key for key in ("values", "linspace", "logspace") if key in obj]
        if len(given) > 1:
            raise ValueError(f"operator block {obj!r} mixes {given}")
        if "values" in obj:
            values = tuple(float(v) for v in obj["values"])
        elif "linspace" in obj:
            ls = obj["linspace"]
            values = tuple(np.linspace(float(ls["start"]), float(ls["stop"]), int(ls["num"])))
        elif "logspace" in obj:
            ls = obj["logspace"]
            values = tuple(
                np.geomspace(float(ls["start"]), float(ls["stop"]), int(ls["num"]))
            )
        else:
            values = ()
        blocks.append(OperatorBlock(kind=kind, values=values, fixed=obj.get("fixed", {})))
    solver_obj = raw.get("solver", {})
    try:
        solver = SolverConfig(**solver_obj)
    except TypeError as err:
        raise ValueError(f"bad solver block in {path}: {err}") from err
    return DictionarySpec(
        grid=_grid_from_json(raw["grid"]),
        dt=float(raw["dt"]),
        blocks=tuple(blocks),
        solver=solver,
    )
