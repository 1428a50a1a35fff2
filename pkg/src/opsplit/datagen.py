"""Benchmark data generation and trajectory file serialization.

Randomness policy: every public generator takes an integer seed and draws
from ``numpy.random.default_rng`` (PCG64), so identical (arguments, seed)
pairs reproduce trajectories bit for bit.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .field import Field, Grid, wavenumbers
from .physics import (
    GRAYSCOTT_DIFFUSION_A,
    GRAYSCOTT_DIFFUSION_B,
    SolverConfig,
    combined_eq_flow,
    grayscott_flow,
    navier_stokes_reference,
)
from .physics import _multiplier_1d  # shared Nyquist convention for exact flows
from .trajectory import Trajectory

__all__ = [
    "init_fractaloid",
    "init_fourier_mix",
    "init_clustered_gaussians",
    "init_lowfreq_modes_2d",
    "generate_benchmark",
    "BENCHMARK_NAMES",
    "write_trajectory",
    "read_trajectory",
    "read_trajectory_header",
    "write_manifest",
    "TrajectoryFormatError",
    "HeaderError",
    "TruncationError",
    "ChecksumError",
]

BENCHMARK_NAMES = ("advdiff", "combined", "grayscott", "ns")

_MAGIC = "opsplit-trajectory"
_VERSION = 1


def init_fractaloid(
    grid: Grid, power: float, seed: int, degree: int | None = None
) -> Field:
    """Random sum of sinusoids with a power-law amplitude envelope.

    u(x) = sum_{j=1..degree} a_j j^(-power) sin(j theta + phi_j) with
    theta = 2 pi x / length, a_j standard normal and phi_j uniform.  The
    result is normalized to exactly zero mean and unit variance.
    """
    if grid.dims != 1:
        raise ValueError("init_fractaloid generates 1D fields")
    if degree is None:
        degree = grid.points // 2
    if not (1 <= degree <= grid.points // 2):
        raise ValueError(f"degree must be in [1, {grid.points // 2}], got {degree}")
    rng = np.random.default_rng(seed)
    amps = rng.standard_normal(degree)
    phases = rng.uniform(0.0, 2.0 * np.pi, degree)
    theta = 2.0 * np.pi * grid.axis_coords() / grid.length
    j = np.arange(1, degree + 1, dtype=np.float64)
    u = np.sum(
        (amps * j**-power)[:, None] * np.sin(j[:, None] * theta[None, :] + phases[:, None]),
        axis=0,
    )
    u -= np.mean(u)
    sd = float(np.std(u))
    if sd == 0.0:
        raise ValueError("degenerate draw: field has zero variance")
    u /= sd
    return Field.from_scalar(grid, u)


def init_fourier_mix(grid: Grid, terms: int = 5, seed: int = 0) -> Field:
    """Sum of ``terms`` sinusoids with small random amplitude, mode, phase.

    Amplitudes are uniform on [-0.5, 0.5), modes uniform on {1..5}, phases
    uniform on [0, 2 pi).
    """
    if grid.dims != 1:
        raise ValueError("init_fourier_mix generates 1D fields")
    if terms < 1:
        raise ValueError(f"terms must be >= 1, got {terms}")
    rng = np.random.default_rng(seed)
    amps = rng.uniform(-0.5, 0.5, terms)
    modes = rng.integers(1, 6, terms)
    phases = rng.uniform(0.0, 2.0 * np.pi, terms)
    x = grid.axis_coords()
    u = np.zeros(grid.points)
    for a, l, p in zip(amps, modes, phases):
        u += a * np.sin(2.0 * np.pi * l * x / grid.length + p)
    return Field.from_scalar(grid, u)


def init_clustered_gaussians(grid: Grid, n_clusters: int, seed: int) -> Field:
    """Two-species start: B carries clustered Gaussian bumps, A the rest.

    Bump centers, widths, and amplitudes are drawn per cluster; distances
    wrap periodically.  Both channels stay inside [0, 1] and A + B <= 1 where
    the bumps saturate.  ``n_clusters = 0`` gives the trivial state A=1, B=0.
    """
    if grid.dims != 2:
        raise ValueError("init_clustered_gaussians generates 2D fields")
    if n_clusters < 0:
        raise ValueError(f"n_clusters must be >= 0, got {n_clusters}")
    rng = np.random.default_rng(seed)
    x, y = grid.coords()
    bump = np.zeros(grid.shape)
    length = grid.length
    for _ in range(n_clusters):
        cx, cy = rng.uniform(0.0, length, 2)
        sigma = rng.uniform(length / 20.0, length / 10.0)
        amp = rng.uniform(0.5, 1.0)
        dx = np.abs(x - cx)
        dy = np.abs(y - cy)
        dx = np.minimum(dx, length - dx)
        dy = np.minimum(dy, length - dy)
        bump += amp * np.exp(-(dx**2 + dy**2) / (2.0 * sigma**2))
    b = np.clip(bump, 0.0, 1.0)
    a = 1.0 - b
    return Field(grid, np.stack([a, b]))


def init_lowfreq_modes_2d(grid: Grid, n_modes: int = 5, seed: int = 0) -> Field:
    """Random superposition of the lowest sin x sin y product modes.

    Amplitudes a_nm are normal with variance 10/(n+m), so lower mode sums
    carry more energy; both factors get independent uniform phases.
    """
    if grid.dims != 2:
        raise ValueError("init_lowfreq_modes_2d generates 2D fields")
    if not (1 <= n_modes <= grid.points // 2 - 1):
        raise ValueError(f"n_modes must be in [1, {grid.points // 2 - 1}], got {n_modes}")
    rng = np.random.default_rng(seed)
    n_idx = np.arange(1, n_modes + 1, dtype=np.float64)
    sd = np.sqrt(10.0 / (n_idx[:, None] + n_idx[None, :]))
    amps = rng.standard_normal((n_modes, n_modes)) * sd
    phi = rng.uniform(0.0, 2.0 * np.pi, (n_modes, n_modes))
    psi = rng.uniform(0.0, 2.0 * np.pi, (n_modes, n_modes))
    x, y = grid.coords()
    w = np.zeros(grid.shape)
    for i, n in enumerate(range(1, n_modes + 1)):
        sx = np.sin(2.0 * np.pi * n * x / grid.length + phi[i][:, None, None])
        for ji, m in enumerate(range(1, n_modes + 1)):
            sy = np.sin(2.0 * np.pi * m * y / grid.length + psi[i, ji])
            w += amps[i, ji] * sx[ji] * sy
    return Field.from_scalar(grid, w)


_BENCH_DEFAULTS: dict[str, tuple[Grid, int, float]] = {
    "advdiff": (Grid(1, 256, 16.0), 100, 10.0),
    "combined": (Grid(1, 256, 16.0), 250, 4.0),
    "grayscott": (Grid(2, 64, 1.0), 50, 50.0),
    "ns": (Grid(2, 64, 2.0 * np.pi), 50, 4.0),
}

_BENCH_MU_KEYS: dict[str, set[str]] = {
    "advdiff": {"c", "D"},
    "combined": {"alpha", "beta", "gamma"},
    "grayscott": {"F", "k"},
    "ns": {"nu"},
}


def _advdiff_trajectory(grid, n_frames, horizon, c, D, u0, seed) -> Trajectory:
    dt = horizon / (n_frames - 1)
    k = wavenumbers(grid)[0]
    lam = -D * k**2 - 1j * c * k
    w0 = np.fft.rfft(u0.values[0])
    frames = np.empty((n_frames, 1, grid.points))
    for i in range(n_frames):
        frames[i, 0] = np.fft.irfft(w0 * _multiplier_1d(lam, i * dt), n=grid.points)
    return Trajectory(
        grid, frames, dt, mu={"c": c, "D": D}, seed=seed, generator="advdiff_exact"
    )


def _stepped_trajectory(grid, n_frames, horizon, mu, seed, generator, step_fn, u0, settings):
    dt = horizon / (n_frames - 1)
    frames = [u0.values]
    current = u0
    for _ in range(n_frames - 1):
        current = step_fn(current, dt)
        frames.append(current.values)
    return Trajectory(
        grid,
        np.stack(frames),
        dt,
        mu=mu,
        seed=seed,
        generator=generator,
        solver_settings=settings,
    )


def generate_benchmark(
    benchmark: str,
    mu: Mapping[str, float],
    seed: int,
    grid: Grid | None = None,
    n_frames: int | None = None,
    horizon: float | None = None,
    init_params: Mapping[str, Any] | None = None,
    config: SolverConfig = SolverConfig(),
    warm_start: bool = True,
    sim_points: int | None = None,
) -> Trajectory:
    """Generate one ground-truth trajectory for a named benchmark.

    ``mu`` carries the coupled coefficients: {c, D} for advdiff,
    {alpha, beta, gamma} for combined, {F, k} for grayscott (canonical
    diffusivities and delta = 1 implied), {nu} for ns.  The stored trajectory
    reports coefficients under their canonical dictionary names, so the
    combined equation's flux diffusion appears as "D".
    """
    if benchmark not in _BENCH_DEFAULTS:
        raise ValueError(f"unknown benchmark {benchmark!r}; pick one of {BENCHMARK_NAMES}")
    missing = _BENCH_MU_KEYS[benchmark] - set(mu)
    extra = set(mu) - _BENCH_MU_KEYS[benchmark]
    if missing or extra:
        raise ValueError(
            f"{benchmark} needs coefficients {sorted(_BENCH_MU_KEYS[benchmark])}, got {sorted(mu)}"
        )
    default_grid, default_frames, default_horizon = _BENCH_DEFAULTS[benchmark]
    grid = grid or default_grid
    n_frames = n_frames or default_frames
    horizon = horizon or default_horizon
    if n_frames < 2:
        raise ValueError(f"n_frames must be >= 2, got {n_frames}")
    init_params = dict(init_params or {})
    rng = np.random.default_rng(seed)
    init_seed = int(rng.integers(2**31))

    if benchmark == "advdiff":
        u0 = init_fractaloid(grid, power=init_params.pop("power", 3.0), seed=init_seed, **init_params)
        return _advdiff_trajectory(grid, n_frames, horizon, float(mu["c"]), float(mu["D"]), u0, seed)

    if benchmark == "combined":
        u0 = init_fourier_mix(grid, terms=init_params.pop("terms", 5), seed=init_seed)
        alpha, beta, gamma = (float(mu[k]) for k in ("alpha", "beta", "gamma"))

        def step(f, dt):
            return combined_eq_flow(f, alpha, beta, gamma, dt, config)

        return _stepped_trajectory(
            grid, n_frames, horizon,
            {"alpha": alpha, "D": beta, "gamma": gamma},
            seed, "combined_eq", step, u0,
            {"advective_cfl": config.advective_cfl},
        )

    if benchmark == "grayscott":
        feed, kill = float(mu["F"]), float(mu["k"])
        d_a = float(init_params.pop("d_a", GRAYSCOTT_DIFFUSION_A))
        d_b = float(init_params.pop("d_b", GRAYSCOTT_DIFFUSION_B))
        u0 = init_clustered_gaussians(grid, n_clusters=int(init_params.pop("n_clusters", 4)), seed=init_seed)
        settings = {"D_A": d_a, "D_B": d_b, "delta": 1.0, "warm_start": 0.0}
        if warm_start:
            duration = float(rng.uniform(0.0, 100.0))
            settings["warm_start"] = duration
            remaining = duration
            while remaining > 1e-12:
                h = min(1.0, remaining)
                u0 = grayscott_flow(u0, d_a, d_b, 1.0, feed, kill, h, config)
                remaining -= h

        def step(f, dt):
            return grayscott_flow(f, d_a, d_b, 1.0, feed, kill, dt, config)

        return _stepped_trajectory(
            grid, n_frames, horizon, {"F": feed, "k": kill}, seed, "grayscott", step, u0, settings
        )

    u0 = init_lowfreq_modes_2d(grid, n_modes=int(init_params.pop("n_modes", 5)), seed=init_seed)
    traj = navier_stokes_reference(
        u0, float(mu["nu"]), horizon, n_frames, sim_points=sim_points, config=config
    )
    return Trajectory(
        traj.grid, traj.values, traj.dt,
        mu=traj.mu, seed=seed, generator=traj.generator, solver_settings=traj.solver_settings,
    )


class TrajectoryFormatError(Exception):
    """Base class for trajectory container format problems."""


class HeaderError(TrajectoryFormatError):
    pass


class TruncationError(TrajectoryFormatError):
    pass


class ChecksumError(TrajectoryFormatError):
    pass


def write_trajectory(traj: Trajectory, path: str | Path) -> None:
    """Write the container format atomically (temp file + rename).

    Layout: one UTF-8 JSON header line declaring shapes, dtype, and payload
    byte length; the raw little-endian float64 payload ordered frame, then
    channel, then row; then the first 8 bytes of the payload's SHA-256.
    """
    path = Path(path)
    payload = np.ascontiguousarray(traj.values, dtype="<f8").tobytes()
    header = {
        "magic": _MAGIC,
        "version": _VERSION,
        "grid": {"dims": traj.grid.dims, "points": traj.grid.points, "length": traj.grid.length},
        "channels": traj.channels,
        "frames": traj.n_frames,
        "dt": traj.dt,
        "mu": dict(sorted(traj.mu.items())),
        "seed": traj.seed,
        "generator": traj.generator,
        "solver": dict(sorted(traj.solver_settings.items())),
        "dtype": "<f8",
        "order": "frame,channel,row",
        "payload_bytes": len(payload),
    }
    digest = hashlib.sha256(payload).digest()[:8]
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(json.dumps(header).encode("utf-8") + b"\n")
            fh.write(payload)
            fh.write(digest)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def read_trajectory_header(path: str | Path) -> dict:
    """Parse and validate the header line without touching the payload."""
    with Path(path).open("rb") as fh:
        line = fh.readline(16_000_000)
    if not line.endswith(b"\n"):
        raise HeaderError(f"{path}: missing or unterminated header line")
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise HeaderError(f"{path}: header is not valid JSON ({err})") from err
    if not isinstance(header, dict) or header.get("magic") != _MAGIC:
        raise HeaderError(f"{path}: bad magic, not a trajectory file")
    if header.get("version") != _VERSION:
        raise HeaderError(f"{path}: unsupported version {header.get('version')}")
    if header.get("dtype") != "<f8":
        raise HeaderError(f"{path}: unsupported dtype {header.get('dtype')}")
    for key in ("grid", "channels", "frames", "dt", "payload_bytes"):
        if key not in header:
            raise HeaderError(f"{path}: header is missing {key!r}")
    return header


def read_trajectory(path: str | Path) -> Trajectory:
    """Read a container file, verifying length and checksum."""
    path = Path(path)
    header = read_trajectory_header(path)
    grid = Grid(
        dims=int(header["grid"]["dims"]),
        points=int(header["grid"]["points"]),
        length=float(header["grid"]["length"]),
    )
    n_frames = int(header["frames"])
    channels = int(header["channels"])
    payload_bytes = int(header["payload_bytes"])
    expected = n_frames * channels * grid.npoints * 8
    if payload_bytes != expected:
        raise HeaderError(f"{path}: payload_bytes {payload_bytes} != shape implies {expected}")
    with path.open("rb") as fh:
        fh.readline(16_000_000)
        payload = fh.read(payload_bytes)
        if len(payload) != payload_bytes:
            raise TruncationError(f"{path}: payload truncated at {len(payload)}/{payload_bytes} bytes")
        digest = fh.read(8)
        if len(digest) != 8:
            raise TruncationError(f"{path}: checksum missing")
        if fh.read(1):
            raise HeaderError(f"{path}: trailing bytes after checksum")
    if hashlib.sha256(payload).digest()[:8] != digest:
        raise ChecksumError(f"{path}: payload checksum mismatch")
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    values = values.reshape((n_frames, channels) + grid.shape)
    return Trajectory(
        grid,
        values,
        float(header["dt"]),
        mu=header.get("mu", {}),
        seed=header.get("seed"),
        generator=header.get("generator", ""),
        solver_settings=header.get("solver", {}),
    )


def write_manifest(records: list[dict], path: str | Path) -> None:
    """Write the generation manifest CSV (one row per trajectory file)."""
    columns = ["file", "benchmark", "seed", "frames", "channels", "points", "dt", "mu"]
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for rec in records:
            row = dict(rec)
            row["mu"] = json.dumps(row["mu"], sort_keys=True)
            writer.writerow(row)
