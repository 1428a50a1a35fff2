"""Command-line entry points.

Subcommands: generate (benchmark trajectories + manifest), search (subset
search on one trajectory), rollout (closed-loop prediction + per-step
errors), scaling (uniform vs beam budget curves), weakest-link (coefficient
perturbation study).  Every command writes a provenance JSON that is a pure
function of the flags, so reruns are byte-identical.

Exit codes: 0 success, 1 I/O problems, 2 usage errors, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import (
    BENCHMARK_NAMES,
    TrajectoryFormatError,
    generate_benchmark,
    init_fourier_mix,
    read_trajectory,
    write_manifest,
    write_trajectory,
)
from .dictionary import Dictionary, DictionarySpec, OperatorBlock, OperatorEntry, build_dictionary, load_dictionary_spec
from .field import Grid
from .identify import identify_parameters, nrmse, rollout_error_series, write_evaluation_csv
from .physics import (
    FlowOperator,
    PhysicsKind,
    PhysicsParams,
    StabilityError,
    combined_eq_flow,
    perturb_operator,
)
from .search import Context, SearchConfig, SearchReport, beam_search, uniform_search, write_budget_csv
from .splitting import OperatorSubset, SplitScheme, rollout, split_step
from .trajectory import Trajectory

__all__ = ["main", "build_parser", "PRESETS", "default_dictionary_spec", "run_weakest_link"]


@dataclass(frozen=True)
class BenchmarkPreset:
    """Per-benchmark defaults for context fitting and evaluation."""

    context_len: int
    horizon: int
    trials: int
    beam_width: int
    uniform_max_len: int = 4
    beam_max_len: int = 5
    threshold: float = 0.05


PRESETS: dict[str, BenchmarkPreset] = {
    "advdiff": BenchmarkPreset(context_len=16, horizon=34, trials=100, beam_width=4),
    "combined": BenchmarkPreset(context_len=16, horizon=50, trials=100, beam_width=4),
    "grayscott": BenchmarkPreset(context_len=16, horizon=32, trials=200, beam_width=8),
    "ns": BenchmarkPreset(context_len=16, horizon=16, trials=100, beam_width=4),
}


def default_dictionary_spec(benchmark: str) -> DictionarySpec:
    """The stock operator dictionary for a benchmark, grid-matched to it."""
    if benchmark == "advdiff":
        return DictionarySpec(
            grid=Grid(1, 256, 16.0),
            dt=10.0 / 99.0,
            blocks=(
                OperatorBlock(PhysicsKind.ADVECTION, tuple(np.linspace(0.05, 1.0, 20))),
                OperatorBlock(PhysicsKind.DIFFUSION, tuple(np.linspace(0.05, 1.0, 20))),
            ),
        )
    if benchmark == "combined":
        return DictionarySpec(
            grid=Grid(1, 256, 16.0),
            dt=4.0 / 249.0,
            blocks=(
                OperatorBlock(PhysicsKind.NONLINEAR_ADVECTION, tuple(np.linspace(0.1, 1.0, 10))),
                OperatorBlock(PhysicsKind.DIFFUSION, tuple(np.linspace(0.04, 0.4, 10))),
                OperatorBlock(PhysicsKind.DISPERSION, tuple(np.linspace(0.1, 1.0, 10))),
            ),
        )
    if benchmark == "grayscott":
        return DictionarySpec(
            grid=Grid(2, 64, 1.0),
            dt=50.0 / 49.0,
            blocks=(
                OperatorBlock(PhysicsKind.REACTION, tuple(np.linspace(0.005, 0.100, 20))),
                OperatorBlock(PhysicsKind.DIFFUSION_KILL, tuple(np.linspace(0.051, 0.070, 20))),
            ),
        )
    if benchmark == "ns":
        return DictionarySpec(
            grid=Grid(2, 64, 2.0 * np.pi),
            dt=4.0 / 49.0,
            blocks=(
                OperatorBlock(PhysicsKind.EULER),
                OperatorBlock(PhysicsKind.DIFFUSION_2D, tuple(np.geomspace(1e-4, 1e-2, 16))),
            ),
        )
    raise ValueError(f"unknown benchmark {benchmark!r}")


def _sample_mu(benchmark: str, rng: np.random.Generator) -> dict[str, float]:
    if benchmark == "advdiff":
        return {"c": float(rng.uniform(0.0, 1.0)), "D": float(rng.uniform(0.0, 1.0))}
    if benchmark == "combined":
        return {
            "alpha": float(rng.uniform(0.0, 1.0)),
            "beta": float(rng.uniform(0.0, 0.4)),
            "gamma": float(rng.uniform(0.0, 1.0)),
        }
    if benchmark == "grayscott":
        return {
            "F": float(rng.choice(np.linspace(0.005, 0.100, 20))),
            "k": float(rng.choice(np.linspace(0.051, 0.070, 20))),
        }
    return {"nu": float(np.exp(rng.uniform(math.log(1e-4), math.log(1e-2))))}


def _parse_params(text: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "=" not in chunk:
            raise ValueError(f"bad --params entry {chunk!r}; expected name=value")
        name, value = chunk.split("=", 1)
        out[name.strip()] = float(value)
    return out


def _write_provenance(out_dir: Path, command: str, args: argparse.Namespace) -> None:
    payload = {
        "package": "opsplit",
        "version": __version__,
        "command": command,
        "arguments": {
            key: value
            for key, value in sorted(vars(args).items())
            if key not in ("func", "command") and not key.startswith("_")
        },
    }
    (out_dir / "provenance.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8"
    )


def _load_dictionary(args: argparse.Namespace) -> Dictionary:
    if getattr(args, "dict", None):
        spec = load_dictionary_spec(args.dict)
    else:
        spec = default_dictionary_spec(args.benchmark)
    return build_dictionary(spec)


def _search_config(args: argparse.Namespace, preset: BenchmarkPreset) -> SearchConfig:
    max_len_default = (
        preset.beam_max_len if args.strategy == "beam" else preset.uniform_max_len
    )
    return SearchConfig(
        trials=args.trials if args.trials is not None else preset.trials,
        beam_width=args.beam_width if args.beam_width is not None else preset.beam_width,
        max_len=args.max_len if args.max_len is not None else max_len_default,
        improvement_threshold=args.threshold if args.threshold is not None else preset.threshold,
        scheme=SplitScheme(args.scheme),
        seed=args.seed,
        workers=args.workers,
    )


def _run_search(d: Dictionary, ctx: Context, strategy: str, config: SearchConfig) -> SearchReport:
    return beam_search(d, ctx, config) if strategy == "beam" else uniform_search(d, ctx, config)


def cmd_generate(args: argparse.Namespace) -> int:
    if args.n < 1:
        raise ValueError(f"--n must be >= 1, got {args.n}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    pinned = _parse_params(args.params) if args.params else None
    records = []
    for i in range(args.n):
        rng = np.random.default_rng([args.seed, i])
        mu = pinned if pinned is not None else _sample_mu(args.benchmark, rng)
        traj = generate_benchmark(
            args.benchmark,
            mu,
            seed=int(rng.integers(2**31)),
            n_frames=args.frames,
            horizon=args.horizon,
        )
        name = f"{args.benchmark}_{i:03d}.traj"
        write_trajectory(traj, out_dir / name)
        records.append(
            {
                "file": name,
                "benchmark": args.benchmark,
                "seed": traj.seed,
                "frames": traj.n_frames,
                "channels": traj.channels,
                "points": traj.grid.points,
                "dt": traj.dt,
                "mu": dict(traj.mu),
            }
        )
    write_manifest(records, out_dir / "manifest.csv")
    _write_provenance(out_dir, "generate", args)
    print(f"wrote {args.n} {args.benchmark} trajectories to {out_dir}")
    return 0


def cmd_search(args: argparse.Namespace) -> int:
    preset = PRESETS[args.benchmark]
    traj = read_trajectory(args.traj)
    d = _load_dictionary(args)
    context_len = args.context_len if args.context_len is not None else preset.context_len
    ctx = Context.from_trajectory(traj, context_len)
    config = _search_config(args, preset)
    report = _run_search(d, ctx, args.strategy, config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report.write_json(out_dir / "report.json")
    write_budget_csv(report, out_dir / "budget.csv")
    _write_provenance(out_dir, "search", args)
    mu_hat = identify_parameters(report.best_subset, d.coefficient_names).mu_hat
    print(
        f"{args.strategy} search: best loss {report.best_loss:.3e} "
        f"with ids {list(report.best_subset.ids)}, identified {mu_hat}"
    )
    return 0


def _subset_from_report(report_path: Path, d: Dictionary) -> OperatorSubset:
    report = json.loads(report_path.read_text(encoding="utf-8"))
    entries = tuple(d.by_id(int(i)) for i in report["best_subset_ids"])
    return OperatorSubset(entries=entries, scheme=SplitScheme(report.get("scheme", "strang")))


def cmd_rollout(args: argparse.Namespace) -> int:
    preset = PRESETS[args.benchmark]
    traj = read_trajectory(args.traj)
    d = _load_dictionary(args)
    context_len = args.context_len if args.context_len is not None else preset.context_len
    horizon = args.horizon if args.horizon is not None else preset.horizon
    search_report = None
    if args.report:
        subset = _subset_from_report(Path(args.report), d)
    else:
        ctx = Context.from_trajectory(traj, context_len)
        config = _search_config(args, preset)
        search_report = _run_search(d, ctx, args.strategy, config)
        subset = search_report.best_subset
    if traj.n_frames < context_len + horizon:
        raise ValueError(
            f"trajectory has {traj.n_frames} frames; need {context_len + horizon} "
            f"for context {context_len} plus horizon {horizon}"
        )
    errors, failure_step = rollout_error_series(subset, traj, context_len, horizon)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["step,time,nrmse"]
    for i, err in enumerate(errors):
        t = (context_len + i) * traj.dt
        lines.append(f"{i + 1},{t:.17g},{err:.17g}")
    (out_dir / "rollout.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    result = rollout(subset, traj.frame(context_len - 1), traj.dt, horizon)
    if result.completed_steps >= 1:
        predicted = Trajectory.from_fields(
            result.frames,
            traj.dt,
            mu=identify_parameters(subset, d.coefficient_names).mu_hat,
            seed=traj.seed,
            generator="rollout",
            solver_settings={"subset_ids": list(subset.ids), "scheme": subset.scheme.value},
        )
        write_trajectory(predicted, out_dir / "predicted.traj")
    if search_report is not None:
        mean_err = float(np.mean(errors)) if failure_step is None else float("inf")
        write_evaluation_csv(
            [
                {
                    "benchmark": args.benchmark,
                    "coeffs": traj.mu,
                    "strategy": args.strategy,
                    "nrmse": mean_err,
                    "evaluations": search_report.evaluations,
                    "identified": identify_parameters(subset, d.coefficient_names).mu_hat,
                }
            ],
            out_dir / "evaluation.csv",
        )
    _write_provenance(out_dir, "rollout", args)
    if failure_step is not None:
        print(f"rollout blew up at step {failure_step}", file=sys.stderr)
        return 3
    print(f"rollout mean NRMSE {float(np.mean(errors)):.3e} over {horizon} steps")
    return 0


def cmd_scaling(args: argparse.Namespace) -> int:
    preset = PRESETS[args.benchmark]
    traj = read_trajectory(args.traj)
    d = _load_dictionary(args)
    context_len = args.context_len if args.context_len is not None else preset.context_len
    ctx = Context.from_trajectory(traj, context_len)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {}
    for strategy in ("uniform", "beam"):
        args.strategy = strategy
        config = _search_config(args, preset)
        report = _run_search(d, ctx, strategy, config)
        write_budget_csv(report, out_dir / f"{strategy}_budget.csv")
        summary[strategy] = {
            "best_loss": report.best_loss,
            "best_subset_ids": list(report.best_subset.ids),
            "evaluations": report.evaluations,
            "applications": report.history[-1][0],
        }
    (out_dir / "scaling.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    _write_provenance(out_dir, "scaling", args)
    print(
        f"scaling study: uniform best {summary['uniform']['best_loss']:.3e}, "
        f"beam best {summary['beam']['best_loss']:.3e}"
    )
    return 0


def run_weakest_link(
    epsilons: tuple[float, ...] = (0.0, 1e-3, 1e-2, 1e-1),
    seed: int = 0,
    rollout_steps: int = 250,
    diffusion: float = 0.3,
    dispersion: float = 0.8,
    dt: float = 0.1,
) -> list[dict[str, float]]:
    """Perturbation study on a commuting heat + dispersion pair.

    Both operators' coefficients are scaled by (1 + eps * xi) with the unit
    draws xi fixed per operator, so each epsilon axis sweeps one perturbation
    direction monotonically.  Reports one-step and closed-loop errors of the
    Strang composition against the exact coupled flow.
    """
    grid = Grid(1, 256, 16.0)
    u0 = init_fourier_mix(grid, terms=5, seed=seed)
    heat = FlowOperator(PhysicsParams.diffusion(diffusion), grid, dt)
    disp = FlowOperator(PhysicsParams.dispersion(dispersion), grid, dt)
    heat_exact = heat.advance(u0)
    disp_exact = disp.advance(u0)
    truth = [combined_eq_flow(u0, 0.0, diffusion, dispersion, i * dt) for i in range(rollout_steps + 1)]
    rows = []
    for eps_heat, eps_disp in itertools.product(epsilons, repeat=2):
        p_heat = perturb_operator(heat, eps_heat, seed=seed + 101)
        p_disp = perturb_operator(disp, eps_disp, seed=seed + 202)
        err_heat = nrmse(p_heat.advance(u0), heat_exact)
        err_disp = nrmse(p_disp.advance(u0), disp_exact)
        subset = OperatorSubset(
            entries=(OperatorEntry(0, p_heat), OperatorEntry(1, p_disp)),
            scheme=SplitScheme.STRANG,
        )
        err_step = nrmse(split_step(subset, u0, dt), truth[1])
        result = rollout(subset, u0, dt, rollout_steps)
        if result.failed:
            err_roll = float("inf")
        else:
            err_roll = float(
                np.mean([nrmse(result.frames[i], truth[i]) for i in range(1, rollout_steps + 1)])
            )
        worst = max(err_heat, err_disp)
        rows.append(
            {
                "eps_heat": eps_heat,
                "eps_dispersion": eps_disp,
                "err_heat": err_heat,
                "err_dispersion": err_disp,
                "err_composed_step": err_step,
                "err_composed_rollout": err_roll,
                "ratio_step": err_step / worst if worst > 0 else float("nan"),
            }
        )
    return rows


def cmd_weakest_link(args: argparse.Namespace) -> int:
    epsilons = tuple(float(e) for e in args.epsilons.split(","))
    rows = run_weakest_link(epsilons=epsilons, seed=args.seed, rollout_steps=args.rollout_steps)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    columns = list(rows[0].keys())
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(f"{row[c]:.17g}" for c in columns))
    (out_dir / "weakest_link.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_provenance(out_dir, "weakest_link", args)
    print(f"weakest-link study: {len(rows)} rows written to {out_dir / 'weakest_link.csv'}")
    return 0


def _add_search_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dict", help="dictionary spec JSON (defaults to the benchmark preset)")
    p.add_argument("--context-len", type=int, default=None, dest="context_len")
    p.add_argument("--strategy", choices=("uniform", "beam"), default="beam")
    p.add_argument("--trials", type=int, default=None, help="uniform search trials")
    p.add_argument("--beam-width", type=int, default=None, dest="beam_width")
    p.add_argument("--max-len", type=int, default=None, dest="max_len")
    p.add_argument("--threshold", type=float, default=None, help="beam stop threshold (relative)")
    p.add_argument("--scheme", choices=("lie", "strang"), default="strang")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opsplit",
        description="Search operator dictionaries to explain and extrapolate PDE trajectories.",
    )
    parser.add_argument("--version", action="version", version=f"opsplit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate benchmark trajectories")
    p.add_argument("--benchmark", choices=BENCHMARK_NAMES, required=True)
    p.add_argument("--n", type=int, default=4, help="number of trajectories")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--params", default=None, help="pin coefficients, e.g. 'c=0.5,D=0.3'")
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--out", default=None, help="output directory (default: $OPSPLIT_OUT/<command>)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("search", help="fit an operator subset to one trajectory")
    p.add_argument("--benchmark", choices=BENCHMARK_NAMES, required=True)
    p.add_argument("--traj", required=True)
    _add_search_flags(p)
    p.add_argument("--out", default=None, help="output directory (default: $OPSPLIT_OUT/<command>)")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("rollout", help="closed-loop prediction with per-step errors")
    p.add_argument("--benchmark", choices=BENCHMARK_NAMES, required=True)
    p.add_argument("--traj", required=True)
    p.add_argument("--report", default=None, help="reuse a search report's subset")
    p.add_argument("--horizon", type=int, default=None, help="rollout steps")
    _add_search_flags(p)
    p.add_argument("--out", default=None, help="output directory (default: $OPSPLIT_OUT/<command>)")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("scaling", help="uniform vs beam budget curves on one trajectory")
    p.add_argument("--benchmark", choices=BENCHMARK_NAMES, required=True)
    p.add_argument("--traj", required=True)
    _add_search_flags(p)
    p.add_argument("--out", default=None, help="output directory (default: $OPSPLIT_OUT/<command>)")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("weakest-link", help="coefficient perturbation study")
    p.add_argument("--epsilons", default="0,0.001,0.01,0.1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rollout-steps", type=int, default=250, dest="rollout_steps")
    p.add_argument("--out", default=None, help="output directory (default: $OPSPLIT_OUT/<command>)")
    p.set_defaults(func=cmd_weakest_link)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.out is None:
        root = os.environ.get("OPSPLIT_OUT")
        if not root:
            parser.error("--out is required when OPSPLIT_OUT is not set")
        args.out = str(Path(root) / args.command)
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError, TrajectoryFormatError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except ValueError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    except StabilityError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
