"""Operator-splitting toolkit: fit compositions of single-physics flows to
observed PDE trajectories, then extrapolate them.

The pieces: spectral fields on periodic grids (:mod:`~opsplit.field`),
single-physics flow operators (:mod:`~opsplit.physics`), operator
dictionaries (:mod:`~opsplit.dictionary`), Lie/Strang composition
(:mod:`~opsplit.splitting`), subset search (:mod:`~opsplit.search`),
parameter identification (:mod:`~opsplit.identify`), and benchmark data
generation (:mod:`~opsplit.datagen`).
"""

from __future__ import annotations

__version__ = "0.1.0"

from .datagen import generate_benchmark, read_trajectory, write_trajectory
from .dictionary import Dictionary, DictionarySpec, OperatorBlock, OperatorEntry, build_dictionary
from .field import Field, Grid, Spectrum, forward_transform, inverse_transform
from .identify import ParameterEstimate, evaluate_rollout, identify_parameters, nrmse
from .physics import FlowOperator, PhysicsKind, PhysicsParams, SolverConfig, StabilityError
from .search import Context, SearchConfig, SearchReport, beam_search, fitting_loss, uniform_search
from .splitting import OperatorSubset, RolloutResult, SplitScheme, rollout, split_step
from .trajectory import Trajectory

__all__ = [
    "__version__",
    "Context",
    "Dictionary",
    "DictionarySpec",
    "Field",
    "FlowOperator",
    "Grid",
    "OperatorBlock",
    "OperatorEntry",
    "OperatorSubset",
    "ParameterEstimate",
    "PhysicsKind",
    "PhysicsParams",
    "RolloutResult",
    "SearchConfig",
    "SearchReport",
    "SolverConfig",
    "Spectrum",
    "StabilityError",
    "Trajectory",
    "beam_search",
    "build_dictionary",
    "evaluate_rollout",
    "fitting_loss",
    "forward_transform",
    "generate_benchmark",
    "identify_parameters",
    "inverse_transform",
    "nrmse",
    "read_trajectory",
    "rollout",
    "split_step",
    "uniform_search",
    "write_trajectory",
]
