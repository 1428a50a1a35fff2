"""Subset search: fitting loss, uniform and beam strategies, budgets."""

from __future__ import annotations

import itertools
import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from opsplit.datagen import generate_benchmark
from opsplit.dictionary import DictionarySpec, OperatorBlock, OperatorEntry, build_dictionary
from opsplit.field import Grid
from opsplit.physics import FlowOperator, PhysicsKind, PhysicsParams, SolverConfig
from opsplit.search import (
    Context,
    SearchConfig,
    beam_search,
    budget_curve,
    fitting_loss,
    flops_per_application,
    uniform_search,
    write_budget_csv,
)
from opsplit.splitting import OperatorSubset, SplitScheme

G1 = Grid(1, 256, 16.0)
DT = 10.0 / 99.0


def small_dictionary(cfg: SolverConfig = SolverConfig()):
    return build_dictionary(
        DictionarySpec(
            grid=G1,
            dt=DT,
            blocks=(
                OperatorBlock(PhysicsKind.ADVECTION, (0.25, 0.5, 0.75, 1.0)),
                OperatorBlock(PhysicsKind.DIFFUSION, (0.1, 0.2, 0.3, 0.4)),
            ),
            solver=cfg,
        )
    )


def advdiff_context(mu: dict[str, float], seed: int, length: int = 16) -> Context:
    traj = generate_benchmark("advdiff", mu, seed=seed)
    return Context.from_trajectory(traj, length)


# -------------------------------------------------------------------- context


def test_context_needs_at_least_two_frames(u0):
    with pytest.raises(ValueError):
        Context(frames=(u0,), dt=0.1)


def test_context_from_trajectory_bounds():
    traj = generate_benchmark("advdiff", {"c": 0.5, "D": 0.3}, seed=0)
    ctx = Context.from_trajectory(traj, 16)
    assert len(ctx) == 16
    assert ctx.dt == traj.dt
    with pytest.raises(ValueError):
        Context.from_trajectory(traj, 1)
    with pytest.raises(ValueError):
        Context.from_trajectory(traj, traj.n_frames + 1)


# --------------------------------------------------------------- fitting loss


def test_fitting_loss_vanishes_for_the_generating_subset():
    d = small_dictionary()
    ctx = advdiff_context({"c": 0.5, "D": 0.3}, seed=1)
    exact = OperatorSubset((d.by_id(1), d.by_id(6)))
    assert fitting_loss(exact, ctx) < 1e-12


def test_fitting_loss_penalizes_wrong_physics():
    # frozen regression: a lone diffusion flow cannot explain translation
    d = small_dictionary()
    ctx = advdiff_context({"c": 0.5, "D": 0.3}, seed=1)
    wrong = OperatorSubset((d.by_id(7),))
    loss = fitting_loss(wrong, ctx)
    assert loss > 1e-2
    assert loss > 1e10 * fitting_loss(OperatorSubset((d.by_id(1), d.by_id(6))), ctx)


def test_fitting_loss_returns_inf_sentinel_on_instability(u0):
    cfg = SolverConfig(max_substeps=1)
    op = FlowOperator(PhysicsParams.nonlinear_advection(1.0), G1, DT, cfg)
    sub = OperatorSubset((OperatorEntry(0, op),))
    ctx = advdiff_context({"c": 0.5, "D": 0.3}, seed=1)
    assert fitting_loss(sub, ctx) == float("inf")


# ------------------------------------------------------------- uniform search


def test_uniform_search_with_zero_trials_scores_singletons_only():
    d = small_dictionary()
    ctx = advdiff_context({"c": 0.25, "D": 0.0}, seed=2, length=8)
    report = uniform_search(d, ctx, SearchConfig(trials=0, max_len=3, seed=0))
    assert report.evaluations == len(d)
    assert report.best_subset.ids == (0,)
    assert report.best_loss < 1e-12
    assert report.strategy == "uniform"


def test_uniform_search_evaluation_count_and_determinism():
    d = small_dictionary()
    ctx = advdiff_context({"c": 0.5, "D": 0.2}, seed=3, length=8)
    r1 = uniform_search(d, ctx, SearchConfig(trials=25, max_len=3, seed=11))
    r2 = uniform_search(d, ctx, SearchConfig(trials=25, max_len=3, seed=11))
    assert r1.evaluations == len(d) + 25
    assert r1.history == r2.history
    assert r1.best_subset.ids == r2.best_subset.ids
    r3 = uniform_search(d, ctx, SearchConfig(trials=25, max_len=3, seed=12))
    assert r3.history != r1.history


def test_uniform_search_rejects_max_len_above_dictionary_size():
    d = small_dictionary()
    ctx = advdiff_context({"c": 0.5, "D": 0.2}, seed=3, length=4)
    with pytest.raises(ValueError):
        uniform_search(d, ctx, SearchConfig(trials=5, max_len=len(d) + 1, seed=0))


def test_uniform_search_best_loss_curve_is_monotone():
    d = small_dictionary()
    ctx = advdiff_context({"c": 0.75, "D": 0.4}, seed=4, length=8)
    report = uniform_search(d, ctx, SearchConfig(trials=40, max_len=4, seed=5))
    losses = [l for _, l in report.history]
    assert all(b <= a for a, b in zip(losses, losses[1:]))
    apps = [a for a, _ in report.history]
    assert all(b > a for a, b in zip(apps, apps[1:]))


# ---------------------------------------------------------------- beam search


def test_beam_search_recovers_the_generating_pair():
    d = small_dictionary()
    ctx = advdiff_context({"c": 0.75, "D": 0.2}, seed=5)
    report = beam_search(d, ctx, SearchConfig(beam_width=4, max_len=5, seed=0))
    assert set(report.best_subset.ids) == {2, 5}
    assert report.best_loss < 1e-12
    assert report.strategy == "beam"


def test_beam_width_one_is_greedy():
    d = small_dictionary()
    ctx = advdiff_context({"c": 0.5, "D": 0.3}, seed=6)
    report = beam_search(d, ctx, SearchConfig(beam_width=1, max_len=3, improvement_threshold=0.0, seed=0))

    singles = {(i,): fitting_loss(OperatorSubset((d.by_id(i),)), ctx) for i in range(len(d))}
    lead = min(singles, key=lambda k: (singles[k], k))
    frontier = [lead]
    best = (singles[lead], lead)
    for _ in range(2):
        extensions = {}
        for base in frontier:
            for j in range(len(d)):
                if j in base:
                    continue
                ids = base + (j,)
                extensions[ids] = fitting_loss(OperatorSubset(tuple(d.by_id(i) for i in ids)), ctx)
        if not extensions:
            break
        lead = min(extensions, key=lambda k: (extensions[k], k))
        frontier = [lead]
        best = min(best, (extensions[lead], lead))
    assert report.best_loss == pytest.approx(best[0], rel=1e-12, abs=1e-300)


def test_beam_search_deduplicates_unordered_candidates():
    d = small_dictionary()
    ctx = advdiff_context({"c": 0.5, "D": 0.3}, seed=7, length=4)
    report = beam_search(d, ctx, SearchConfig(beam_width=8, max_len=2, improvement_threshold=0.0, seed=0))
    # level 0: 8 singletons; level 1: C(8,2)=28 distinct pairs at most
    assert report.evaluations <= 8 + 28


def test_beam_search_stops_when_improvement_is_small():
    d = small_dictionary()
    ctx = advdiff_context({"c": 0.5, "D": 0.0}, seed=8)
    # truth is a singleton: the pair level cannot improve by 99 percent
    report = beam_search(d, ctx, SearchConfig(beam_width=4, max_len=4, improvement_threshold=0.99, seed=0))
    assert report.best_subset.ids == (1,)
    assert report.evaluations <= 8 + 4 * 7


def test_beam_search_canonical_order_sorts_subsets():
    d = small_dictionary()
    ctx = advdiff_context({"c": 0.25, "D": 0.4}, seed=9)
    report = beam_search(
        d, ctx, SearchConfig(beam_width=4, max_len=3, canonical_order=True, seed=0)
    )
    assert report.best_subset.ids == tuple(sorted(report.best_subset.ids))


def test_parallel_workers_match_serial_results():
    d = small_dictionary()
    ctx = advdiff_context({"c": 0.5, "D": 0.3}, seed=10, length=6)
    serial = beam_search(d, ctx, SearchConfig(beam_width=2, max_len=2, workers=1, seed=0))
    parallel = beam_search(d, ctx, SearchConfig(beam_width=2, max_len=2, workers=2, seed=0))
    assert serial.best_subset.ids == parallel.best_subset.ids
    assert serial.history == parallel.history


def test_all_unstable_dictionary_still_reports_a_best():
    cfg = SolverConfig(max_substeps=1)
    d = build_dictionary(
        DictionarySpec(
            grid=G1,
            dt=DT,
            blocks=(OperatorBlock(PhysicsKind.NONLINEAR_ADVECTION, (0.5, 1.0)),),
            solver=cfg,
        )
    )
    ctx = advdiff_context({"c": 0.5, "D": 0.3}, seed=11, length=4)
    report = beam_search(d, ctx, SearchConfig(beam_width=2, max_len=2, seed=0))
    assert report.best_loss == float("inf")
    assert report.best_subset.ids == (0,)


# ----------------------------------------------------- brute force equivalence


def test_wide_beam_matches_brute_force_on_a_planted_composition():
    d = small_dictionary()
    ctx = advdiff_context({"c": 1.0, "D": 0.3}, seed=12)
    cfg = SearchConfig(beam_width=8, max_len=3, improvement_threshold=0.05, seed=0, canonical_order=True)
    report = beam_search(d, ctx, cfg)
    best = (float("inf"), ())
    for m in (1, 2, 3):
        for combo in itertools.combinations(range(len(d)), m):
            loss = fitting_loss(OperatorSubset(tuple(d.by_id(i) for i in combo)), ctx)
            best = min(best, (loss, combo))
    assert report.best_subset.ids == best[1]
    assert report.best_loss == pytest.approx(best[0], rel=1e-12, abs=1e-300)


# -------------------------------------------------------------------- budgets


def test_search_report_serialization_roundtrip(tmp_path):
    d = small_dictionary()
    ctx = advdiff_context({"c": 0.5, "D": 0.3}, seed=13, length=6)
    report = beam_search(d, ctx, SearchConfig(beam_width=2, max_len=2, seed=0))
    path = tmp_path / "report.json"
    report.write_json(path)
    payload = json.loads(path.read_text())
    assert payload["strategy"] == "beam"
    assert payload["best_subset_ids"] == list(report.best_subset.ids)
    assert payload["scheme"] == "strang"
    assert payload["evaluations"] == report.evaluations
    assert payload["identified_mu"]
    assert payload["history"][-1][0] == report.history[-1][0]


def test_budget_curve_uses_transform_cost_model(tmp_path):
    d = small_dictionary()
    ctx = advdiff_context({"c": 0.5, "D": 0.3}, seed=14, length=6)
    report = uniform_search(d, ctx, SearchConfig(trials=5, max_len=2, seed=0))
    per_app = flops_per_application(256)
    assert per_app == pytest.approx(5.0 * 256 * math.log2(256))
    curve = budget_curve(report)
    for (flops, apps, loss), (apps_h, loss_h) in zip(curve, report.history):
        assert apps == apps_h
        assert loss == loss_h
        assert flops == pytest.approx(apps * per_app)
    path = tmp_path / "budget.csv"
    write_budget_csv(report, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "flops,applications,best_loss"
    assert len(lines) == len(report.history) + 1


def test_costs_charge_per_transition_and_scheme():
    d = small_dictionary()
    ctx = advdiff_context({"c": 0.5, "D": 0.3}, seed=15, length=5)
    report = uniform_search(d, ctx, SearchConfig(trials=0, max_len=2, seed=0, scheme=SplitScheme.LIE))
    # 4 transitions, singleton Lie step costs 1 application
    assert report.history[0][0] == 4
    assert report.history[-1][0] == 4 * len(d)
    strang = uniform_search(d, ctx, SearchConfig(trials=0, max_len=2, seed=0, scheme=SplitScheme.STRANG))
    assert strang.history[-1][0] == 4 * len(d)


def test_search_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(trials=-1)
    with pytest.raises(ValueError):
        SearchConfig(beam_width=0)
    with pytest.raises(ValueError):
        SearchConfig(max_len=0)
    with pytest.raises(ValueError):
        SearchConfig(improvement_threshold=-0.1)
    with pytest.raises(ValueError):
        SearchConfig(workers=0)
