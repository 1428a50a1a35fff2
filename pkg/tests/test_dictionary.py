"""Dictionary construction: ordering, dedupe, subsampling, JSON specs."""

from __future__ import annotations

import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from opsplit.cli import default_dictionary_spec
from opsplit.dictionary import (
    Dictionary,
    DictionarySpec,
    OperatorBlock,
    OperatorEntry,
    build_dictionary,
    load_dictionary_spec,
    subsample,
)
from opsplit.field import Grid
from opsplit.physics import (
    GRAYSCOTT_DIFFUSION_A,
    GRAYSCOTT_DIFFUSION_B,
    FlowOperator,
    PhysicsKind,
    PhysicsParams,
    SolverConfig,
    advdiff_exact_flow,
)

G1 = Grid(1, 256, 16.0)


def small_spec() -> DictionarySpec:
    return DictionarySpec(
        grid=G1,
        dt=0.1,
        blocks=(
            OperatorBlock(PhysicsKind.DIFFUSION, (0.3, 0.1, 0.2)),
            OperatorBlock(PhysicsKind.ADVECTION, (0.5, 0.25)),
        ),
    )


def test_entries_sorted_by_kind_then_value_and_numbered():
    d = build_dictionary(small_spec())
    assert [e.id for e in d.entries] == [0, 1, 2, 3, 4]
    assert [e.kind for e in d.entries] == [PhysicsKind.ADVECTION] * 2 + [PhysicsKind.DIFFUSION] * 3
    assert [e.flow.params.coeffs[k] for e, k in zip(d.entries, ("c", "c", "D", "D", "D"))] == [
        0.25,
        0.5,
        0.1,
        0.2,
        0.3,
    ]


def test_two_builds_agree_entry_for_entry():
    a = build_dictionary(small_spec())
    b = build_dictionary(small_spec())
    assert a.describe() == b.describe()


def test_duplicate_coefficients_collapse_with_warning():
    spec = DictionarySpec(
        grid=G1,
        dt=0.1,
        blocks=(OperatorBlock(PhysicsKind.ADVECTION, (0.5, 0.5, 0.25)),),
    )
    with pytest.warns(UserWarning, match="duplicate"):
        d = build_dictionary(spec)
    assert len(d) == 2


def test_by_id_and_unknown_id():
    d = build_dictionary(small_spec())
    assert d.by_id(3).flow.params.coeffs["D"] == 0.2
    with pytest.raises(KeyError):
        d.by_id(99)


def test_coefficient_names_cover_all_blocks():
    d = build_dictionary(small_spec())
    assert d.coefficient_names == ("D", "c")


def test_dictionary_rejects_mixed_grids_and_duplicate_ids():
    d = build_dictionary(small_spec())
    other = Grid(1, 128, 16.0)
    moved = OperatorEntry(
        id=0, flow=FlowOperator(PhysicsParams.advection(1.0), other, 0.1, SolverConfig())
    )
    with pytest.raises(ValueError):
        Dictionary(entries=d.entries + (moved,), grid=G1, dt=0.1)
    dup = OperatorEntry(id=0, flow=d.entries[1].flow)
    with pytest.raises(ValueError):
        Dictionary(entries=(d.entries[0], dup), grid=G1, dt=0.1)


def test_operator_block_validation():
    with pytest.raises(ValueError):
        OperatorBlock(PhysicsKind.EULER, (0.1,))
    with pytest.raises(ValueError):
        OperatorBlock(PhysicsKind.DIFFUSION, ())
    with pytest.raises(ValueError):
        DictionarySpec(grid=G1, dt=0.0, blocks=(OperatorBlock(PhysicsKind.DIFFUSION, (0.1,)),))
    with pytest.raises(ValueError):
        DictionarySpec(grid=G1, dt=0.1, blocks=())


@pytest.mark.parametrize(
    "benchmark,size,kinds",
    [
        ("advdiff", 40, {PhysicsKind.ADVECTION: 20, PhysicsKind.DIFFUSION: 20}),
        (
            "combined",
            30,
            {
                PhysicsKind.NONLINEAR_ADVECTION: 10,
                PhysicsKind.DIFFUSION: 10,
                PhysicsKind.DISPERSION: 10,
            },
        ),
        ("grayscott", 40, {PhysicsKind.REACTION: 20, PhysicsKind.DIFFUSION_KILL: 20}),
        ("ns", 17, {PhysicsKind.EULER: 1, PhysicsKind.DIFFUSION_2D: 16}),
    ],
)
def test_benchmark_preset_dictionary_sizes(benchmark, size, kinds):
    d = build_dictionary(default_dictionary_spec(benchmark))
    assert len(d) == size
    counts: dict[PhysicsKind, int] = {}
    for e in d.entries:
        counts[e.kind] = counts.get(e.kind, 0) + 1
    assert counts == kinds


def test_grayscott_preset_carries_fixed_diffusivities():
    d = build_dictionary(default_dictionary_spec("grayscott"))
    dk = [e for e in d.entries if e.kind is PhysicsKind.DIFFUSION_KILL]
    for e in dk:
        assert e.flow.params.coeffs["D_A"] == GRAYSCOTT_DIFFUSION_A
        assert e.flow.params.coeffs["D_B"] == GRAYSCOTT_DIFFUSION_B


def test_entry_flows_match_direct_flow_calls(u0):
    d = build_dictionary(small_spec())
    adv = d.by_id(1)
    assert_allclose(
        adv.flow.advance(u0).values, advdiff_exact_flow(u0, 0.5, 0.0, 0.1).values, atol=1e-14
    )


def test_subsample_is_deterministic_and_order_preserving():
    d = build_dictionary(default_dictionary_spec("advdiff"))
    s1 = subsample(d, 10, seed=4)
    s2 = subsample(d, 10, seed=4)
    assert [e.id for e in s1.entries] == [e.id for e in s2.entries]
    ids = [e.id for e in s1.entries]
    assert ids == sorted(ids)
    assert len(set(ids)) == 10
    with pytest.raises(ValueError):
        subsample(d, 0, seed=0)
    with pytest.raises(ValueError):
        subsample(d, len(d) + 1, seed=0)


def test_load_dictionary_spec_roundtrip(tmp_path):
    payload = {
        "grid": {"dims": 1, "points": 256, "length": 16.0},
        "dt": 0.1,
        "operators": [
            {"kind": "advection", "values": [0.25, 0.5]},
            {"kind": "diffusion", "linspace": {"start": 0.1, "stop": 0.3, "num": 3}},
        ],
    }
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(payload))
    spec = load_dictionary_spec(path)
    d = build_dictionary(spec)
    assert len(d) == 5
    assert spec.grid == G1
    diffs = [e.flow.params.coeffs["D"] for e in d.entries if e.kind is PhysicsKind.DIFFUSION]
    assert_allclose(diffs, [0.1, 0.2, 0.3])


def test_load_dictionary_spec_logspace_and_parameter_free(tmp_path):
    payload = {
        "grid": {"dims": 2, "points": 64, "length": 6.283185307179586},
        "dt": 0.08,
        "operators": [
            {"kind": "euler"},
            {"kind": "diffusion_2d", "logspace": {"start": 1e-4, "stop": 1e-2, "num": 16}},
        ],
    }
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(payload))
    d = build_dictionary(load_dictionary_spec(path))
    nus = [e.flow.params.coeffs["nu"] for e in d.entries if e.kind is PhysicsKind.DIFFUSION_2D]
    assert_allclose(nus, np.geomspace(1e-4, 1e-2, 16))
    assert d.entries[0].kind is PhysicsKind.EULER


def test_load_dictionary_spec_solver_override(tmp_path):
    payload = {
        "grid": {"dims": 1, "points": 256, "length": 16.0},
        "dt": 0.1,
        "operators": [{"kind": "nonlinear_advection", "values": [1.0]}],
        "solver": {"max_substeps": 7, "advective_cfl": 0.2},
    }
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(payload))
    spec = load_dictionary_spec(path)
    assert spec.solver.max_substeps == 7
    assert spec.solver.advective_cfl == 0.2
    d = build_dictionary(spec)
    assert d.entries[0].flow.config.max_substeps == 7


@pytest.mark.parametrize(
    "payload,match",
    [
        ({"grid": {"dims": 1, "points": 256}, "dt": 0.1, "operators": []}, "missing key"),
        ({"dt": 0.1}, "does not look like"),
        (
            {
                "grid": {"dims": 1, "points": 256, "length": 16.0},
                "dt": 0.1,
                "operators": [{"kind": "sorcery", "values": [1.0]}],
            },
            "bad operator kind",
        ),
        (
            {
                "grid": {"dims": 1, "points": 256, "length": 16.0},
                "dt": 0.1,
                "operators": [{"kind": "diffusion", "values": [0.1], "linspace": {"start": 0, "stop": 1, "num": 2}}],
            },
            "mixes",
        ),
        (
            {
                "grid": {"dims": 1, "points": 256, "length": 16.0},
                "dt": 0.1,
                "operators": [{"kind": "diffusion", "values": [0.1]}],
                "solver": {"bogus_knob": 1},
            },
            "bad solver block",
        ),
    ],
)
def test_load_dictionary_spec_rejects_malformed_payloads(tmp_path, payload, match):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(ValueError, match=match):
        load_dictionary_spec(path)


def test_load_dictionary_spec_rejects_invalid_json(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text("{not json")
    with pytest.raises(ValueError, match="not valid JSON"):
        load_dictionary_spec(path)


def test_describe_lists_ids_kinds_and_blocks():
    d = build_dictionary(small_spec())
    rows = d.describe()
    assert [r["id"] for r in rows] == [0, 1, 2, 3, 4]
    assert rows[0]["kind"] == "advection"
    assert rows[0]["mu"] == {"c": 0.25}
    assert rows[2]["coeffs"] == {"D": 0.1}
