"""Explicit conservative finite-difference solver for the Cauchy problem.

Forward Euler in time with central flux differencing in space: along each
axis the face flux is |g|^{p_i-2} g with g the one-cell difference quotient,
and the update is the telescoping divergence of face fluxes with zero flux
through the outer faces.  Discrete mass is conserved exactly (to round-off)
while the support stays interior, and the stable-step bound makes the update
monotone, which is what the comparison-principle tests exercise.

The domain is a truncation of full space: homogeneous Dirichlet values on
the boundary, justified by finite propagation speed as long as the domain
was sized generously (see suggest_extents).
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exact import SeparableParams, barenblatt, barenblatt_support_radius, separable_solution
from .grid import Grid, GridField, sample_on_grid
from .scaling import ExponentSet, support_radius


class SolverAbort(RuntimeError):
    """Numerical failure (non-finite values or runaway growth) with diagnostics."""


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiracInit:
    """Smooth compact bump approximating mass * delta_0, radius rho0.

    rho0 defaults to 10 * max(h) at init time; the discrete mass is
    renormalized to equal `mass` exactly after sampling.
    """

    mass: float = 1.0
    rho0: float | None = None


@dataclass(frozen=True)
class BarenblattInit:
    """Sample the exact source-type solution at t_start (t_start > 0)."""

    t_start: float = 1.0


@dataclass(frozen=True)
class SeparableInit:
    params: SeparableParams
    t_start: float = 0.0


@dataclass(frozen=True)
class CustomInit:
    values: np.ndarray
    t_start: float = 0.0


@dataclass
class SimConfig:
    e: ExponentSet
    grid: Grid
    initial: DiracInit | BarenblattInit | SeparableInit | CustomInit
    output_times: tuple[float, ...]
    cfl: float = 0.4
    dt_max: float = 1e-2
    support_rel_threshold: float = 1e-10

    def __post_init__(self):
        self.output_times = tuple(sorted(float(t) for t in self.output_times))
        if not self.output_times:
            raise ValueError("output_times must be non-empty")
        if not 0.0 < self.cfl < 1.0:
            raise ValueError("cfl must lie in (0, 1)")
        if self.grid.ndim != self.e.N:
            raise ValueError("grid dimension must match exponent set")

    @property
    def t_end(self) -> float:
        return self.output_times[-1]


def cosine_bump(grid: Grid, mass: float, rho0: float) -> np.ndarray:
    """Values of the radial bump (1 + cos(pi |x|/rho0))/2, renormalized to mass."""
    r = grid.radius_grid()
    vals = np.where(r < rho0, 0.5 * (1.0 + np.cos(np.pi * np.minimum(r / rho0, 1.0))), 0.0)
    total = vals.sum() * grid.cell_volume
    if total <= 0:
        raise ValueError("bump radius too small for the grid")
    return vals * (mass / total)


def init_field(config: SimConfig) -> GridField:
    grid, e = config.grid, config.e
    init = config.initial
    if isinstance(init, DiracInit):
        rho0 = init.rho0 if init.rho0 is not None else 10.0 * max(grid.h)
        if rho0 < 2.0 * max(grid.h):
            raise ValueError(f"rho0={rho0} is unresolvable: below 2*max(h)={2*max(grid.h)}")
        return GridField(grid, cosine_bump(grid, init.mass, rho0), time=0.0)
    if isinstance(init, BarenblattInit):
        if init.t_start <= 0:
            raise ValueError("t_start must be positive for a source-type snapshot")
        return sample_on_grid(lambda x, t: barenblatt(x, t, e), grid, init.t_start)
    if isinstance(init, SeparableInit):
        return sample_on_grid(
            lambda x, t: separable_solution(init.params, x, t), grid, init.t_start
        )
    if isinstance(init, CustomInit):
        return GridField(grid, np.array(init.values, dtype=float), time=init.t_start)
    raise ValueError(f"unknown initial datum {init!r}")


def initial_support_halfwidth(config: SimConfig) -> float:
    """R0 of the initial datum, used by the support-growth bound."""
    init = config.initial
    if isinstance(init, DiracInit):
        return init.rho0 if init.rho0 is not None else 10.0 * max(config.grid.h)
    if isinstance(init, BarenblattInit):
        return barenblatt_support_radius(config.e, init.t_start)
    u0 = init_field(config)
    widths = u0.support_halfwidths(config.support_rel_threshold)
    return max(widths) if max(widths) > 0 else max(config.grid.h)


def suggest_extents(e: ExponentSet, t_end: float, r0: float, mass: float,
                    c: float = 1.0, margin: float = 0.3) -> tuple[float, ...]:
    """Per-axis half-widths covering the support bound at t_end plus a margin."""
    return tuple(
        (1.0 + margin) * support_radius(e, j, t_end, r0, mass, c) for j in range(e.N)
    )


# ---------------------------------------------------------------------------
# fluxes and stepping
# ---------------------------------------------------------------------------


def _power_flux(g: np.ndarray, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Return (|g|^{p-2}, |g|^{p-2} g); integer small powers avoid np.power."""
    q = p - 2.0
    ag = np.abs(g)
    if q == 1.0:
        w = ag
    elif q == 2.0:
        w = g * g
    elif q == 3.0:
        w = ag * g * g
    else:
        w = ag**q
    return w, w * g


def flux(u: GridField, e: ExponentSet, axis: int) -> np.ndarray:
    """Face fluxes |g|^{p_i-2} g along one axis, including zero outer faces.

    The returned array has n_i + 1 entries along `axis` (one per face);
    entries 1..n_i-1 are interior faces, the two ends are the outer faces
    with zero flux.
    """
    h = u.grid.h[axis]
    g = np.diff(u.values, axis=axis) / h
    _, f = _power_flux(g, e.p[axis])
    pad = [(0, 0)] * u.grid.ndim
    pad[axis] = (1, 1)
    return np.pad(f, pad)


def _flux_and_diffusivity(vals: np.ndarray, e: ExponentSet, h: tuple, axis: int):
    g = np.diff(vals, axis=axis) / h[axis]
    w, f = _power_flux(g, e.p[axis])
    dmax = (e.p[axis] - 1.0) * float(w.max()) if w.size else 0.0
    return f, dmax


def stable_dt(u: GridField, e: ExponentSet, cfl: float = 1.0, dt_max: float = 1e-2) -> float:
    """Largest monotone step: cfl * 0.5 / sum_i(D_i^max / h_i^2).

    D_i^max = (p_i - 1) max|g_i|^{p_i-2} is the linearized diffusivity.
    A constant field has zero diffusivity everywhere; dt_max applies.
    """
    denom = 0.0
    for i in range(u.grid.ndim):
        _, dmax = _flux_and_diffusivity(u.values, e, u.grid.h, i)
        denom += dmax / u.grid.h[i] ** 2
    if denom == 0.0:
        return dt_max
    return min(cfl * 0.5 / denom, dt_max)


@dataclass(frozen=True)
class StepStats:
    dt: float
    max_diffusivity: float
    mass_before: float
    mass_after: float
    min_value: float


def _divergence_inplace(out: np.ndarray, f: np.ndarray, h: float, axis: int) -> None:
    """Accumulate (F_{k+1/2} - F_{k-1/2})/h with zero outer faces into out."""
    ndim = out.ndim
    inner = [slice(None)] * ndim
    first = [slice(None)] * ndim
    last = [slice(None)] * ndim
    inner[axis] = slice(1, -1)
    first[axis] = slice(0, 1)
    last[axis] = slice(-1, None)
    lo = [slice(None)] * ndim
    hi = [slice(None)] * ndim
    lo[axis] = slice(0, 1)
    hi[axis] = slice(-1, None)
    out[tuple(inner)] += np.diff(f, axis=axis) / h
    out[tuple(first)] += f[tuple(lo)] / h
    out[tuple(last)] -= f[tuple(hi)] / h


def _clamp_boundary(vals: np.ndarray) -> None:
    for axis in range(vals.ndim):
        sl = [slice(None)] * vals.ndim
        sl[axis] = 0
        vals[tuple(sl)] = 0.0
        sl[axis] = -1
        vals[tuple(sl)] = 0.0


def step(u: GridField, e: ExponentSet, dt: float) -> tuple[GridField, StepStats]:
    """One forward-Euler step of size dt (caller guarantees dt <= stable_dt)."""
    grid = u.grid
    vol = grid.cell_volume
    mass_before = float(u.values.sum()) * vol
    div = np.zeros_like(u.values)
    dmax = 0.0
    for i in range(grid.ndim):
        f, d = _flux_and_diffusivity(u.values, e, grid.h, i)
        dmax = max(dmax, d)
        _divergence_inplace(div, f, grid.h[i], i)
    new = u.values + dt * div
    _clamp_boundary(new)
    if not np.isfinite(new).all():
        raise SolverAbort(
            f"non-finite values after step at t={u.time} with dt={dt}; "
            f"max diffusivity {dmax}"
        )
    out = GridField(grid, new, time=u.time + dt)
    stats = StepStats(
        dt=dt,
        max_diffusivity=dmax,
        mass_before=mass_before,
        mass_after=float(new.sum()) * vol,
        min_value=float(new.min()),
    )
    return out, stats


# ---------------------------------------------------------------------------
# full runs
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    """Solution snapshots at the requested output times plus run diagnostics."""

    e: ExponentSet
    times: list[float] = field(default_factory=list)
    fields: list[GridField] = field(default_factory=list)
    masses: list[float] = field(default_factory=list)
    max_values: list[float] = field(default_factory=list)
    support_halfwidths: list[tuple[float, ...]] = field(default_factory=list)
    initial: GridField | None = None
    r0: float | None = None
    n_steps: int = 0
    min_dt: float = math.inf
    max_rel_mass_drift: float = 0.0
    boundary_touched: bool = False

    @property
    def grid(self) -> Grid:
        return self.fields[0].grid

    def record(self, u: GridField, rel_threshold: float = 1e-10) -> None:
        self.times.append(u.time)
        self.fields.append(u.copy())
        self.masses.append(u.mass())
        self.max_values.append(u.max())
        self.support_halfwidths.append(u.support_halfwidths(rel_threshold))


def worker_hint() -> int:
    """Worker-count hint from ANISOFLOW_THREADS (1 when unset or invalid)."""
    raw = os.environ.get("ANISOFLOW_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run(config: SimConfig, workers: int | None = None) -> Trajectory:
    """Advance the Cauchy problem, landing exactly on every output time.

    dt is adapted each step from the current field (clipped, never
    extrapolated).  Deterministic for a fixed config.
    """
    e, grid = config.e, config.grid
    u = init_field(config)
    if u.min() < 0:
        warnings.warn("initial datum has negative values; comparison properties void")
    r0 = initial_support_halfwidth(config)
    mass0 = u.mass()
    if mass0 > 0:
        for j in range(e.N):
            bound = support_radius(e, j, config.t_end, r0, mass0, 1.0)
            if bound >= grid.extents[j]:
                warnings.warn(
                    f"domain may be too small along axis {j}: "
                    f"support bound {bound:.3g} >= extent {grid.extents[j]:.3g}"
                )

    traj = Trajectory(e=e, initial=u.copy(), r0=r0)
    workers = worker_hint() if workers is None else max(1, int(workers))
    pool = ThreadPoolExecutor(workers) if (workers > 1 and grid.ndim > 1) else None

    vals = u.values.copy()
    t = u.time
    vol = grid.cell_volume
    h = grid.h
    h2 = tuple(hi * hi for hi in h)
    near_boundary_warned = False

    try:
        for t_out in config.output_times:
            if t_out < t - 1e-14:
                raise ValueError(f"output time {t_out} precedes the initial time {t}")
            while t < t_out - 1e-15 * max(1.0, abs(t_out)):
                if pool is None:
                    per_axis = [
                        _flux_and_diffusivity(vals, e, h, i) for i in range(grid.ndim)
                    ]
                else:
                    per_axis = list(
                        pool.map(
                            lambda i: _flux_and_diffusivity(vals, e, h, i),
                            range(grid.ndim),
                        )
                    )
                denom = sum(d / h2[i] for i, (_, d) in enumerate(per_axis))
                dt = config.dt_max if denom == 0.0 else min(
                    config.cfl * 0.5 / denom, config.dt_max
                )
                if t + dt >= t_out:
                    dt = t_out - t
                    t = t_out
                else:
                    t += dt
                div = np.zeros_like(vals)
                for i, (f, _) in enumerate(per_axis):
                    _divergence_inplace(div, f, h[i], i)
                vals += dt * div
                _clamp_boundary(vals)
                if not np.isfinite(vals).all():
                    raise SolverAbort(f"non-finite values at t={t} (dt={dt})")
                mass = float(vals.sum()) * vol
                if mass0 > 0:
                    traj.max_rel_mass_drift = max(
                        traj.max_rel_mass_drift, abs(mass - mass0) / mass0
                    )
                traj.n_steps += 1
                traj.min_dt = min(traj.min_dt, dt)

            snapshot = GridField(grid, vals.copy(), time=t_out)
            traj.record(snapshot, config.support_rel_threshold)
            if snapshot.touches_boundary(config.support_rel_threshold, margin_cells=0):
                traj.boundary_touched = True
            if not near_boundary_warned and snapshot.touches_boundary(
                config.support_rel_threshold, margin_cells=5
            ):
                warnings.warn(f"support within 5 cells of the boundary at t={t_out}")
                near_boundary_warned = True
    finally:
        if pool is not None:
            pool.shutdown()
    return traj
