"""Single-physics flow operators and coupled reference solvers.

Every flow maps a :class:`~opsplit.field.Field` forward in time by ``t``.
Linear flows apply exact Fourier multipliers.  Nonlinear flows substep
internally (CFL or reaction-rate bounded) so one public call stays stable
regardless of the requested step.  Multipliers built from odd derivatives
project out the Nyquist mode, whose phase a sampled grid cannot represent;
this keeps every exact flow an exact semigroup on the resolved modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field, replace
from enum import Enum
from functools import lru_cache
from typing import Mapping

import numpy as np

from .field import (
    Field,
    Grid,
    Spectrum,
    dealias_two_thirds_pad,
    spectral_resample,
    squared_wavenumbers,
    wavenumbers,
)
from .trajectory import Trajectory

__all__ = [
    "StabilityError",
    "PhysicsKind",
    "PhysicsParams",
    "SolverConfig",
    "FlowOperator",
    "advdiff_exact_flow",
    "combined_eq_flow",
    "grayscott_flow",
    "euler_flow",
    "diffusion2d_flow",
    "navier_stokes_reference",
    "perturb_operator",
]

_TINY = 1e-300


class StabilityError(RuntimeError):
    """A flow left the stable regime (blow-up, budget or solver failure)."""

    def __init__(self, message: str, *, operator_id: int | None = None, step: int | None = None):
        super().__init__(message)
        self.operator_id = operator_id
        self.step = step


class PhysicsKind(Enum):
    """Operator families available to dictionaries.

    Enum definition order is the canonical sort order for dictionary entries.
    """

    ADVECTION = "advection"
    DIFFUSION = "diffusion"
    NONLINEAR_ADVECTION = "nonlinear_advection"
    DISPERSION = "dispersion"
    REACTION = "reaction"
    DIFFUSION_KILL = "diffusion_kill"
    EULER = "euler"
    DIFFUSION_2D = "diffusion_2d"


_KIND_COEFFS: dict[PhysicsKind, tuple[str, ...]] = {
    PhysicsKind.ADVECTION: ("c",),
    PhysicsKind.DIFFUSION: ("D",),
    PhysicsKind.NONLINEAR_ADVECTION: ("alpha",),
    PhysicsKind.DISPERSION: ("gamma",),
    PhysicsKind.REACTION: ("delta", "F"),
    PhysicsKind.DIFFUSION_KILL: ("D_A", "D_B", "k"),
    PhysicsKind.EULER: (),
    PhysicsKind.DIFFUSION_2D: ("nu",),
}

_NONNEGATIVE = {"D", "delta", "F", "D_A", "D_B", "k", "nu"}

# The single searchable coefficient each kind contributes to an identified
# parameter vector.  Fixed constants of a kind (delta, D_A, D_B) are not
# identification targets; the parameter-free Euler flow reports an on/off
# indicator so subsets containing it remain identifiable.
_KIND_MU_KEY: dict[PhysicsKind, str | None] = {
    PhysicsKind.ADVECTION: "c",
    PhysicsKind.DIFFUSION: "D",
    PhysicsKind.NONLINEAR_ADVECTION: "alpha",
    PhysicsKind.DISPERSION: "gamma",
    PhysicsKind.REACTION: "F",
    PhysicsKind.DIFFUSION_KILL: "k",
    PhysicsKind.EULER: None,
    PhysicsKind.DIFFUSION_2D: "nu",
}

_KIND_DIMS: dict[PhysicsKind, int] = {
    PhysicsKind.ADVECTION: 1,
    PhysicsKind.DIFFUSION: 1,
    PhysicsKind.NONLINEAR_ADVECTION: 1,
    PhysicsKind.DISPERSION: 1,
    PhysicsKind.REACTION: 2,
    PhysicsKind.DIFFUSION_KILL: 2,
    PhysicsKind.EULER: 2,
    PhysicsKind.DIFFUSION_2D: 2,
}

_KIND_CHANNELS: dict[PhysicsKind, int] = {
    PhysicsKind.ADVECTION: 1,
    PhysicsKind.DIFFUSION: 1,
    PhysicsKind.NONLINEAR_ADVECTION: 1,
    PhysicsKind.DISPERSION: 1,
    PhysicsKind.REACTION: 2,
    PhysicsKind.DIFFUSION_KILL: 2,
    PhysicsKind.EULER: 1,
    PhysicsKind.DIFFUSION_2D: 1,
}

GRAYSCOTT_DIFFUSION_A = 2.0e-5
GRAYSCOTT_DIFFUSION_B = 1.0e-5


@dataclass(frozen=True)
class PhysicsParams:
    """Kind plus the exact coefficient set that kind requires."""

    kind: PhysicsKind
    coeffs: Mapping[str, float] = dataclass_field(default_factory=dict)

    def __post_init__(self) -> None:
        allowed = _KIND_COEFFS[self.kind]
        got = dict(self.coeffs)
        if set(got) != set(allowed):
            raise ValueError(
                f"{self.kind.value} takes coefficients {sorted(allowed)}, got {sorted(got)}"
            )
        for name, value in got.items():
            value = float(value)
            if not np.isfinite(value):
                raise ValueError(f"coefficient {name} must be finite, got {value}")
            if name in _NONNEGATIVE and value < 0:
                raise ValueError(f"coefficient {name} must be >= 0, got {value}")
            got[name] = value
        object.__setattr__(self, "coeffs", got)

    def coeff(self, name: str) -> float:
        return self.coeffs[name]

    @property
    def dims(self) -> int:
        return _KIND_DIMS[self.kind]

    @property
    def channels(self) -> int:
        return _KIND_CHANNELS[self.kind]

    @property
    def mu(self) -> dict[str, float]:
        """Sparse canonical coefficient block this operator contributes."""
        key = _KIND_MU_KEY[self.kind]
        if key is None:
            return {"adv": 1.0}
        return {key: self.coeffs[key]}

    @classmethod
    def advection(cls, c: float) -> "PhysicsParams":
        return cls(PhysicsKind.ADVECTION, {"c": c})

    @classmethod
    def diffusion(cls, D: float) -> "PhysicsParams":
        return cls(PhysicsKind.DIFFUSION, {"D": D})

    @classmethod
    def nonlinear_advection(cls, alpha: float) -> "PhysicsParams":
        return cls(PhysicsKind.NONLINEAR_ADVECTION, {"alpha": alpha})

    @classmethod
    def dispersion(cls, gamma: float) -> "PhysicsParams":
        return cls(PhysicsKind.DISPERSION, {"gamma": gamma})

    @classmethod
    def reaction(cls, feed: float, delta: float = 1.0) -> "PhysicsParams":
        return cls(PhysicsKind.REACTION, {"delta": delta, "F": feed})

    @classmethod
    def diffusion_kill(
        cls,
        kill: float,
        d_a: float = GRAYSCOTT_DIFFUSION_A,
        d_b: float = GRAYSCOTT_DIFFUSION_B,
    ) -> "PhysicsParams":
        return cls(PhysicsKind.DIFFUSION_KILL, {"D_A": d_a, "D_B": d_b, "k": kill})

    @classmethod
    def euler(cls) -> "PhysicsParams":
        return cls(PhysicsKind.EULER, {})

    @classmethod
    def diffusion_2d(cls, nu: float) -> "PhysicsParams":
        return cls(PhysicsKind.DIFFUSION_2D, {"nu": nu})


@dataclass(frozen=True)
class SolverConfig:
    """Stability and tolerance knobs shared by the numerical flows."""

    advective_cfl: float = 0.4
    euler_cfl: float = 0.5
    fixed_point_tol: float = 1e-10
    fixed_point_max_iter: int = 50
    reaction_step_cap: float = 0.1
    max_substeps: int = 100_000


def _require_field(f: Field, dims: int, channels: int, what: str) -> None:
    if f.grid.dims != dims or f.channels != channels:
        raise ValueError(
            f"{what} needs a {dims}D field with {channels} channel(s), "
            f"got dims={f.grid.dims}, channels={f.channels}"
        )


def _check_time(t: float) -> float:
    t = float(t)
    if not np.isfinite(t):
        raise ValueError(f"time step must be finite, got {t}")
    return t


def _multiplier_1d(lam: np.ndarray, t: float) -> np.ndarray:
    """exp(lam*t) with the Nyquist entry realified or projected out.

    A real multiplier keeps its (real) Nyquist action; an oscillatory one has
    no well-defined Nyquist phase on sampled data, so that mode is dropped.
    """
    m = np.exp(lam * t)
    if lam[-1].imag != 0.0:
        m[-1] = 0.0
    else:
        m[-1] = m[-1].real
    return m


def advdiff_exact_flow(f: Field, c: float, D: float, t: float) -> Field:
    """Exact advection-diffusion step: multiply mode k by exp(-D k^2 t - i c k t)."""
    _require_field(f, 1, 1, "advdiff_exact_flow")
    t = _check_time(t)
    if D < 0:
        raise ValueError(f"diffusion coefficient must be >= 0, got {D}")
    if D > 0 and t < 0:
        raise ValueError("cannot run diffusion backwards in time")
    k = wavenumbers(f.grid)[0]
    lam = -D * k**2 - 1j * c * k
    w = np.fft.rfft(f.values[0]) * _multiplier_1d(lam, t)
    return Field.from_scalar(f.grid, np.fft.irfft(w, n=f.grid.points))


def _dealiased_square(grid: Grid, w_hat: np.ndarray) -> np.ndarray:
    """Alias-free spectrum of u**2 given the half spectrum of u."""
    s = Spectrum(grid, w_hat[None, :])
    out = dealias_two_thirds_pad(s, lambda a: a * a)
    return out.coeffs[0]


def combined_eq_flow(
    f: Field,
    alpha: float,
    beta: float,
    gamma: float,
    dt: float,
    config: SolverConfig = SolverConfig(),
) -> Field:
    """One step of d_t u + d_x(alpha u^2 - beta d_x u + gamma d_xx u) = 0.

    The linear part is advanced exactly through the integrating factor
    exp((-beta k^2 + i gamma k^3) dt).  The nonlinear flux is integrated with
    a classical 4-stage Runge-Kutta scheme on the transformed variable, with
    internal substepping keeping the advective CFL number at or below
    ``config.advective_cfl``.
    """
    _require_field(f, 1, 1, "combined_eq_flow")
    dt = _check_time(dt)
    if dt < 0:
        raise ValueError("combined_eq_flow cannot step backwards in time")
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    grid = f.grid
    k = wavenumbers(grid)[0]
    lam = -beta * k**2 + 1j * gamma * k**3
    w = np.fft.rfft(f.values[0])

    if alpha == 0.0 or dt == 0.0:
        w = w * _multiplier_1d(lam, dt)
        return Field.from_scalar(grid, np.fft.irfft(w, n=grid.points))

    ik_alpha = 1j * alpha * k

    def nonlinear(w_hat: np.ndarray) -> np.ndarray:
        return -ik_alpha * _dealiased_square(grid, w_hat)

    remaining = dt
    substeps = 0
    while remaining > 1e-14 * dt:
        u = np.fft.irfft(w, n=grid.points)
        speed = 2.0 * abs(alpha) * float(np.max(np.abs(u)))
        h = min(remaining, config.advective_cfl * grid.dx / max(speed, _TINY))
        e1 = _multiplier_1d(lam, h / 2.0)
        e2 = e1 * e1
        a = nonlinear(w)
        b = nonlinear(e1 * (w + (h / 2.0) * a))
        c = nonlinear(e1 * w + (h / 2.0) * b)
        d = nonlinear(e2 * w + h * e1 * c)
        w = e2 * w + (h / 6.0) * (e2 * a + 2.0 * e1 * (b + c) + d)
        if not np.all(np.isfinite(w)):
            raise StabilityError("combined_eq_flow produced non-finite values")
        substeps += 1
        if substeps > config.max_substeps:
            raise StabilityError(
                f"combined_eq_flow exceeded the substep budget ({config.max_substeps})"
            )
        remaining -= h
    return Field.from_scalar(grid, np.fft.irfft(w, n=grid.points))


def grayscott_flow(
    f: Field,
    d_a: float,
    d_b: float,
    delta: float,
    feed: float,
    kill: float,
    dt: float,
    config: SolverConfig = SolverConfig(),
) -> Field:
    """One IMEX step of the two-species reaction-diffusion system.

    d_t A = d_a Lap(A) - delta A B^2 + feed (1 - A)
    d_t B = d_b Lap(B) + delta A B^2 - (feed + kill) B

    Diffusion acts exactly in spectral space on each half of a symmetric
    split; reaction, feed, and kill terms are integrated pointwise in
    physical space with 4-stage Runge-Kutta substeps sized so that
    max(delta*B^2, feed+kill) * substep stays at or below
    ``config.reaction_step_cap``.
    """
    _require_field(f, 2, 2, "grayscott_flow")
    dt = _check_time(dt)
    if dt < 0:
        raise ValueError("grayscott_flow cannot step backwards in time")
    for name, value in (("d_a", d_a), ("d_b", d_b), ("delta", delta), ("feed", feed), ("kill", kill)):
        if value < 0:
            raise ValueError(f"{name} must be >= 0, got {value}")
    grid = f.grid
    ksq = squared_wavenumbers(grid)
    decay_a = np.exp(-d_a * ksq * dt / 2.0)
    decay_b = np.exp(-d_b * ksq * dt / 2.0)

    def half_diffusion(values: np.ndarray) -> np.ndarray:
        if d_a == 0.0 and d_b == 0.0:
            return values
        ah = np.fft.rfftn(values[0]) * decay_a
        bh = np.fft.rfftn(values[1]) * decay_b
        n = grid.points
        return np.stack(
            [np.fft.irfftn(ah, s=(n, n), axes=(0, 1)), np.fft.irfftn(bh, s=(n, n), axes=(0, 1))]
        )

    def reaction_rhs(values: np.ndarray) -> np.ndarray:
        a, b = values[0], values[1]
        growth = delta * a * b * b
        return np.stack([-growth + feed * (1.0 - a), growth - (feed + kill) * b])

    v = half_diffusion(f.values.copy())
    remaining = dt
    substeps = 0
    while remaining > 1e-14 * dt:
        rate = max(delta * float(np.max(v[1] ** 2)), feed + kill)
        h = min(remaining, config.reaction_step_cap / max(rate, _TINY))
        k1 = reaction_rhs(v)
        k2 = reaction_rhs(v + (h / 2.0) * k1)
        k3 = reaction_rhs(v + (h / 2.0) * k2)
        k4 = reaction_rhs(v + h * k3)
        v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(v)):
            raise StabilityError("grayscott_flow produced non-finite values")
        substeps += 1
        if substeps > config.max_substeps:
            raise StabilityError(
                f"grayscott_flow exceeded the substep budget ({config.max_substeps})"
            )
        remaining -= h
    v = half_diffusion(v)
    return Field(grid, v)


@lru_cache(maxsize=None)
def _vorticity_arrays(grid: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Broadcast wavenumber grids and the Poisson inverse for 2D vorticity."""
    kx_axis, ky_axis = wavenumbers(grid)
    kx = np.ascontiguousarray(kx_axis[:, None])
    ky = np.ascontiguousarray(ky_axis[None, :])
    ksq = kx**2 + ky**2
    inv_ksq = np.zeros_like(ksq)
    nonzero = ksq > 0
    inv_ksq[nonzero] = 1.0 / ksq[nonzero]
    for arr in (kx, ky, ksq, inv_ksq):
        arr.setflags(write=False)
    return kx, ky, ksq, inv_ksq


def _velocity_hats(grid: Grid, w_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Half spectra of the velocity (u, v) induced by vorticity w."""
    kx, ky, _, inv_ksq = _vorticity_arrays(grid)
    psi = w_hat * inv_ksq
    return -1j * ky * psi, 1j * kx * psi


def _vorticity_advection(grid: Grid, w_hat: np.ndarray) -> np.ndarray:
    """Dealiased spectrum of -(u . grad) w for the stream-function velocity."""
    kx, ky, _, _ = _vorticity_arrays(grid)
    ux, uy = _velocity_hats(grid, w_hat)
    stacked = Spectrum(grid, np.stack([ux, uy, 1j * kx * w_hat, 1j * ky * w_hat]))
    out = dealias_two_thirds_pad(stacked, lambda a: (a[0] * a[2] + a[1] * a[3])[None])
    return -out.coeffs[0]


def _max_speed(grid: Grid, w_hat: np.ndarray) -> float:
    ux, uy = _velocity_hats(grid, w_hat)
    n = grid.points
    vel = np.fft.irfftn(np.stack([ux, uy]), s=(n, n), axes=(-2, -1))
    return float(np.max(np.abs(vel)))


def _midpoint_substep(
    grid: Grid, w_hat: np.ndarray, h: float, nu: float, config: SolverConfig
) -> np.ndarray:
    """One implicit-midpoint step of d_t w = -(u.grad)w + nu Lap(w).

    The diffusion term sits inside the midpoint solve; because it is diagonal
    in spectral space the fixed-point iteration only has to converge on the
    advection term.
    """
    _, _, ksq, _ = _vorticity_arrays(grid)
    denom = 1.0 + (h * nu / 2.0) * ksq
    base = (1.0 - (h * nu / 2.0) * ksq) * w_hat
    ref = max(float(np.linalg.norm(w_hat)), _TINY)
    w_next = (base + h * _vorticity_advection(grid, w_hat)) / denom
    for _ in range(config.fixed_point_max_iter):
        mid = 0.5 * (w_hat + w_next)
        proposed = (base + h * _vorticity_advection(grid, mid)) / denom
        residual = float(np.linalg.norm(proposed - w_next)) / ref
        w_next = proposed
        if not np.all(np.isfinite(w_next)):
            raise StabilityError("implicit midpoint produced non-finite values")
        if residual <= config.fixed_point_tol:
            return w_next
    raise StabilityError(
        f"implicit midpoint fixed point did not reach {config.fixed_point_tol} "
        f"in {config.fixed_point_max_iter} iterations"
    )


def _advance_vorticity(
    grid: Grid, w_hat: np.ndarray, t: float, nu: float, config: SolverConfig
) -> np.ndarray:
    remaining = t
    substeps = 0
    while remaining > 1e-14 * t:
        speed = _max_speed(grid, w_hat)
        h = min(remaining, config.euler_cfl * grid.dx / max(speed, _TINY))
        w_hat = _midpoint_substep(grid, w_hat, h, nu, config)
        substeps += 1
        if substeps > config.max_substeps:
            raise StabilityError(
                f"vorticity solver exceeded the substep budget ({config.max_substeps})"
            )
        remaining -= h
    return w_hat


def euler_flow(f: Field, dt: float, config: SolverConfig = SolverConfig()) -> Field:
    """Incompressible 2D Euler step in vorticity form.

    The stream function solves -Lap(psi) = w spectrally, velocities come from
    its curl, the advection product is dealiased on a 3/2-padded grid, and
    time stepping is implicit midpoint with CFL-bounded substeps.
    """
    _require_field(f, 2, 1, "euler_flow")
    dt = _check_time(dt)
    if dt < 0:
        raise ValueError("euler_flow cannot step backwards in time")
    if dt == 0.0:
        return f
    w_hat = np.fft.rfftn(f.values[0])
    w_hat = _advance_vorticity(f.grid, w_hat, dt, 0.0, config)
    n = f.grid.points
    return Field.from_scalar(f.grid, np.fft.irfftn(w_hat, s=(n, n), axes=(0, 1)))


def diffusion2d_flow(f: Field, nu: float, t: float) -> Field:
    """Exact 2D diffusion step: multiply mode k by exp(-nu |k|^2 t)."""
    _require_field(f, 2, 1, "diffusion2d_flow")
    t = _check_time(t)
    if nu < 0:
        raise ValueError(f"nu must be >= 0, got {nu}")
    if nu > 0 and t < 0:
        raise ValueError("cannot run diffusion backwards in time")
    ksq = squared_wavenumbers(f.grid)
    w_hat = np.fft.rfftn(f.values[0]) * np.exp(-nu * ksq * t)
    n = f.grid.points
    return Field.from_scalar(f.grid, np.fft.irfftn(w_hat, s=(n, n), axes=(0, 1)))


def navier_stokes_reference(
    f0: Field,
    nu: float,
    horizon: float,
    n_snap: int,
    sim_points: int | None = None,
    config: SolverConfig = SolverConfig(),
) -> Trajectory:
    """Coupled 2D Navier-Stokes (vorticity form) reference trajectory.

    Advection and diffusion are advanced together by implicit midpoint with
    the diffusion term inside the midpoint solve.  Optionally integrates at a
    finer ``sim_points`` resolution and writes snapshots restricted to the
    input resolution by spectral truncation.
    """
    _require_field(f0, 2, 1, "navier_stokes_reference")
    if nu < 0:
        raise ValueError(f"nu must be >= 0, got {nu}")
    if not (np.isfinite(horizon) and horizon > 0):
        raise ValueError(f"horizon must be positive, got {horizon}")
    if n_snap < 2:
        raise ValueError(f"need at least 2 snapshots, got {n_snap}")
    out_points = f0.grid.points
    work = f0 if sim_points in (None, out_points) else spectral_resample(f0, sim_points)
    grid = work.grid
    n = grid.points
    dt_snap = horizon / (n_snap - 1)

    def snapshot(w_hat: np.ndarray) -> np.ndarray:
        fld = Field.from_scalar(grid, np.fft.irfftn(w_hat, s=(n, n), axes=(0, 1)))
        if grid.points != out_points:
            fld = spectral_resample(fld, out_points)
        return fld.values

    w_hat = np.fft.rfftn(work.values[0])
    frames = [f0.values.copy()]
    for _ in range(n_snap - 1):
        w_hat = _advance_vorticity(grid, w_hat, dt_snap, nu, config)
        frames.append(snapshot(w_hat))
    return Trajectory(
        f0.grid,
        np.stack(frames),
        dt_snap,
        mu={"adv": 1.0, "nu": nu},
        generator="navier_stokes_reference",
        solver_settings={
            "scheme": "implicit_midpoint",
            "euler_cfl": config.euler_cfl,
            "fixed_point_tol": config.fixed_point_tol,
            "sim_points": grid.points,
        },
    )


@dataclass(frozen=True)
class FlowOperator:
    """A single-physics flow bound to a grid and a native step size."""

    params: PhysicsParams
    grid: Grid
    dt: float
    config: SolverConfig = SolverConfig()

    def __post_init__(self) -> None:
        if self.grid.dims != self.params.dims:
            raise ValueError(
                f"{self.params.kind.value} operates on {self.params.dims}D grids, "
                f"got dims={self.grid.dims}"
            )
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"native dt must be positive, got {self.dt}")

    @property
    def kind(self) -> PhysicsKind:
        return self.params.kind

    @property
    def channels(self) -> int:
        return self.params.channels

    def advance(self, f: Field, t: float | None = None) -> Field:
        """Advance ``f`` by ``t`` (defaults to the native dt)."""
        t = self.dt if t is None else t
        p = self.params
        kind = p.kind
        if kind is PhysicsKind.ADVECTION:
            return advdiff_exact_flow(f, p.coeff("c"), 0.0, t)
        if kind is PhysicsKind.DIFFUSION:
            return advdiff_exact_flow(f, 0.0, p.coeff("D"), t)
        if kind is PhysicsKind.NONLINEAR_ADVECTION:
            return combined_eq_flow(f, p.coeff("alpha"), 0.0, 0.0, t, self.config)
        if kind is PhysicsKind.DISPERSION:
            return combined_eq_flow(f, 0.0, 0.0, p.coeff("gamma"), t, self.config)
        if kind is PhysicsKind.REACTION:
            return grayscott_flow(f, 0.0, 0.0, p.coeff("delta"), p.coeff("F"), 0.0, t, self.config)
        if kind is PhysicsKind.DIFFUSION_KILL:
            return grayscott_flow(
                f, p.coeff("D_A"), p.coeff("D_B"), 0.0, 0.0, p.coeff("k"), t, self.config
            )
        if kind is PhysicsKind.EULER:
            return euler_flow(f, t, self.config)
        if kind is PhysicsKind.DIFFUSION_2D:
            return diffusion2d_flow(f, p.coeff("nu"), t)
        raise ValueError(f"no flow implemented for kind {kind}")


def perturb_operator(op: FlowOperator, relative_error: float, seed: int) -> FlowOperator:
    """Return a copy of ``op`` with every coefficient scaled by (1 + eps).

    Each coefficient draws eps = relative_error * xi with xi uniform on
    [-1, 1); the unit draws depend only on ``seed``, so sweeping
    ``relative_error`` with a fixed seed scales the same perturbation
    direction monotonically.
    """
    if relative_error < 0:
        raise ValueError(f"relative_error must be >= 0, got {relative_error}")
    rng = np.random.default_rng(seed)
    coeffs = {}
    for name in sorted(op.params.coeffs):
        xi = rng.uniform(-1.0, 1.0)
        coeffs[name] = op.params.coeffs[name] * (1.0 + relative_error * xi)
    params = PhysicsParams(op.params.kind, coeffs)
    return replace(op, params=params)
