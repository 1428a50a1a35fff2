"""Operator splitting: step schemes, costs, rollouts, failure capture."""

from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose

from opsplit.dictionary import OperatorEntry
from opsplit.field import Grid
from opsplit.physics import (
    FlowOperator,
    PhysicsParams,
    SolverConfig,
    StabilityError,
    advdiff_exact_flow,
)
from opsplit.splitting import (
    OperatorSubset,
    RolloutResult,
    SplitScheme,
    lie_step,
    rollout,
    split_step,
    step_cost,
    strang_step,
)

CFG = SolverConfig()


def entry(i: int, params: PhysicsParams, grid: Grid, dt: float = 0.1, cfg: SolverConfig = CFG) -> OperatorEntry:
    return OperatorEntry(id=i, flow=FlowOperator(params, grid, dt, cfg))


def test_single_operator_subset_reduces_to_the_flow(grid1d, u0):
    sub = OperatorSubset((entry(0, PhysicsParams.advection(0.5), grid1d),))
    direct = advdiff_exact_flow(u0, 0.5, 0.0, 0.1).values
    assert_allclose(lie_step(sub, u0, 0.1).values, direct, atol=0.0)
    assert_allclose(strang_step(sub, u0, 0.1).values, direct, atol=0.0)


def test_commuting_flows_split_exactly(grid1d, u0):
    sub = OperatorSubset(
        (entry(0, PhysicsParams.advection(0.5), grid1d), entry(1, PhysicsParams.diffusion(0.3), grid1d))
    )
    exact = advdiff_exact_flow(u0, 0.5, 0.3, 0.1).values
    for scheme in (SplitScheme.LIE, SplitScheme.STRANG):
        stepped = split_step(OperatorSubset(sub.entries, scheme), u0, 0.1)
        assert_allclose(stepped.values, exact, atol=1e-12)


def test_same_kind_entries_fuse_coefficients(grid1d, u0):
    sub = OperatorSubset(
        (entry(0, PhysicsParams.diffusion(0.1), grid1d), entry(1, PhysicsParams.diffusion(0.25), grid1d))
    )
    fused = advdiff_exact_flow(u0, 0.0, 0.35, 0.1).values
    assert_allclose(strang_step(sub, u0, 0.1).values, fused, atol=1e-12)


def test_strang_is_palindromic_over_selection_order(grid1d, u0):
    # Strang applies half steps up the list, a full step at the end, and
    # half steps back down, so a 3-entry subset touches flows a,b,c,b,a
    a = entry(0, PhysicsParams.advection(0.4), grid1d)
    b = entry(1, PhysicsParams.diffusion(0.2), grid1d)
    c = entry(2, PhysicsParams.dispersion(0.6), grid1d)
    sub = OperatorSubset((a, b, c), SplitScheme.STRANG)
    manual = a.flow.advance(u0, 0.05)
    manual = b.flow.advance(manual, 0.05)
    manual = c.flow.advance(manual, 0.1)
    manual = b.flow.advance(manual, 0.05)
    manual = a.flow.advance(manual, 0.05)
    assert_allclose(strang_step(sub, u0, 0.1).values, manual.values, atol=0.0)


def test_strang_inverse_with_negated_coefficients(grid1d, u0):
    fwd = OperatorSubset(
        (entry(0, PhysicsParams.advection(0.7), grid1d), entry(1, PhysicsParams.dispersion(0.8), grid1d)),
        SplitScheme.STRANG,
    )
    inv = OperatorSubset(
        (entry(0, PhysicsParams.advection(-0.7), grid1d), entry(1, PhysicsParams.dispersion(-0.8), grid1d)),
        SplitScheme.STRANG,
    )
    there = split_step(fwd, u0, 0.1)
    back = split_step(inv, there, 0.1)
    assert_allclose(back.values, u0.values, atol=1e-12)


def test_lie_ordering_defect_shrinks_quadratically(grid1d, u0):
    def defect(dt: float) -> float:
        a = entry(0, PhysicsParams.nonlinear_advection(1.0), grid1d, dt)
        b = entry(1, PhysicsParams.diffusion(0.2), grid1d, dt)
        ab = lie_step(OperatorSubset((a, b)), u0, dt)
        ba = lie_step(OperatorSubset((b, a)), u0, dt)
        return float(np.sqrt(np.mean((ab.values - ba.values) ** 2)))

    d1, d2, d4 = defect(0.2), defect(0.1), defect(0.05)
    assert 3.0 < d1 / d2 < 6.0
    assert 3.0 < d2 / d4 < 6.0


@pytest.mark.parametrize(
    "m,lie,strang",
    [(1, 1, 1), (2, 2, 3), (3, 3, 5), (5, 5, 9)],
)
def test_step_cost_counts_flow_applications(m, lie, strang):
    assert step_cost(m, SplitScheme.LIE) == lie
    assert step_cost(m, SplitScheme.STRANG) == strang


def test_step_cost_rejects_empty_subset_size():
    with pytest.raises(ValueError):
        step_cost(0, SplitScheme.LIE)


def test_subset_validates_ids_grids_and_dt(grid1d):
    a = entry(0, PhysicsParams.advection(0.5), grid1d)
    with pytest.raises(ValueError):
        OperatorSubset((a, entry(0, PhysicsParams.diffusion(0.1), grid1d)))
    other = Grid(1, 128, 16.0)
    with pytest.raises(ValueError):
        OperatorSubset((a, entry(1, PhysicsParams.diffusion(0.1), other)))
    with pytest.raises(ValueError):
        OperatorSubset((a, entry(1, PhysicsParams.diffusion(0.1), grid1d, dt=0.2)))
    with pytest.raises(ValueError):
        OperatorSubset(())


def test_sorted_by_id_keeps_entries_and_orders_ids(grid1d):
    b = entry(7, PhysicsParams.diffusion(0.1), grid1d)
    a = entry(3, PhysicsParams.advection(0.5), grid1d)
    sub = OperatorSubset((b, a)).sorted_by_id()
    assert sub.ids == (3, 7)


def test_rollout_records_every_frame(grid1d, u0):
    sub = OperatorSubset((entry(0, PhysicsParams.advection(0.5), grid1d),))
    result = rollout(sub, u0, 0.1, 5)
    assert isinstance(result, RolloutResult)
    assert len(result.frames) == 6
    assert result.failure_step is None
    assert not result.failed
    assert result.completed_steps == 5
    expected = advdiff_exact_flow(u0, 0.5, 0.0, 0.3).values
    assert_allclose(result.frames[3].values, expected, atol=1e-12)


def test_rollout_captures_partial_failure(grid1d, u0):
    # substep budget 12 lets early steps through, then trips deterministically
    cfg = SolverConfig(max_substeps=12)
    sub = OperatorSubset((entry(0, PhysicsParams.nonlinear_advection(1.0), grid1d, 0.1, cfg),))
    result = rollout(sub, u0, 0.1, 300)
    assert result.failed
    assert result.failure_step == 4
    assert result.completed_steps == 4
    assert len(result.frames) == 5
    assert all(np.all(np.isfinite(f.values)) for f in result.frames)


def test_rollout_failure_reports_the_guilty_operator(grid1d, u0):
    cfg = SolverConfig(max_substeps=1)
    sub = OperatorSubset(
        (
            entry(4, PhysicsParams.diffusion(0.2), grid1d, 0.1, cfg),
            entry(9, PhysicsParams.nonlinear_advection(1.0), grid1d, 0.1, cfg),
        )
    )
    with pytest.raises(StabilityError) as excinfo:
        split_step(sub, u0, 0.1)
    assert excinfo.value.operator_id == 9


def test_rollout_is_deterministic(grid1d, u0):
    sub = OperatorSubset(
        (entry(0, PhysicsParams.nonlinear_advection(0.5), grid1d), entry(1, PhysicsParams.diffusion(0.1), grid1d))
    )
    r1 = rollout(sub, u0, 0.1, 10)
    r2 = rollout(sub, u0, 0.1, 10)
    for f1, f2 in zip(r1.frames, r2.frames):
        assert_allclose(f1.values, f2.values, atol=0.0)
