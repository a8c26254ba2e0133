"""Continuous rescaling into self-similar variables and the drifted equation.

The change of variables y_i = x_i t^{alpha_i}, w = t^beta u, tau = ln t maps
the Cauchy evolution onto

    w_tau = sum_i d/dy_i [ |d w/dy_i|^{p_i-2} d w/dy_i - alpha_i y_i w ],

with no reaction term because beta + sum(alpha_i) = 0 (asserted when the
exponent set is built).  Source-type solutions become stationary states of
this equation, so marching it in tau until the profile stops moving is a
numerical construction of the fundamental solution; in the anisotropic case
no closed form exists and the steady residual is the only oracle.

Discretization mirrors the solver: conservative face fluxes, degenerate
diffusion by central differences, the drift -alpha_i y_i w by first-order
upwinding on the face-local sign of the advection velocity alpha_i y_i
(donor-cell), zero flux through the outer faces.  Mass is conserved by
telescoping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .exact import barenblatt_mass, profile_value
from .grid import Grid, GridField
from .scaling import ExponentSet
from .solver import SolverAbort, _divergence_inplace, _power_flux, cosine_bump


@dataclass
class RescaledField:
    """Field w on the y-grid at logarithmic time tau = ln t."""

    grid: Grid
    values: np.ndarray
    tau: float
    e: ExponentSet

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError("values shape does not match grid")

    def copy(self) -> "RescaledField":
        return RescaledField(self.grid, self.values.copy(), self.tau, self.e)

    def mass(self) -> float:
        return float(self.values.sum()) * self.grid.cell_volume

    def l1_norm(self) -> float:
        return float(np.abs(self.values).sum()) * self.grid.cell_volume


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------


def _interp(values: np.ndarray, grid: Grid):
    return RegularGridInterpolator(
        tuple(grid.axes()), values, method="linear", bounds_error=False, fill_value=0.0
    )


def to_selfsimilar(u: GridField, e: ExponentSet, y_grid: Grid | None = None) -> RescaledField:
    """Map u(., t) to w(y) = t^beta u(y_1 t^{-alpha_1}, ..., y_N t^{-alpha_N}).

    With no target grid the image grid is used (x-nodes scaled per axis), so
    the transform is exact node-to-node; with a target y_grid the values are
    resampled by linear interpolation (zero outside the image domain).
    """
    t = u.time
    if t <= 0:
        raise ValueError("the rescaling needs t > 0")
    scale = tuple(t**a for a in e.alpha)
    prefactor = t**e.beta
    image = Grid(
        extents=tuple(L * s for L, s in zip(u.grid.extents, scale)), n=u.grid.n
    )
    if y_grid is None:
        return RescaledField(image, prefactor * u.values, math.log(t), e)
    pts = y_grid.points() / np.asarray(scale)
    vals = prefactor * _interp(u.values, u.grid)(pts).reshape(y_grid.shape)
    return RescaledField(y_grid, vals, math.log(t), e)


def from_selfsimilar(w: RescaledField, t: float, x_grid: Grid | None = None) -> GridField:
    """Inverse map u(x) = t^{-beta} w(x_1 t^{alpha_1}, ..., x_N t^{alpha_N})."""
    if t <= 0:
        raise ValueError("the rescaling needs t > 0")
    e = w.e
    scale = tuple(t**a for a in e.alpha)
    prefactor = t ** (-e.beta)
    image = Grid(
        extents=tuple(L / s for L, s in zip(w.grid.extents, scale)), n=w.grid.n
    )
    if x_grid is None:
        return GridField(image, prefactor * w.values, time=t)
    pts = x_grid.points() * np.asarray(scale)
    vals = prefactor * _interp(w.values, w.grid)(pts).reshape(x_grid.shape)
    return GridField(x_grid, vals, time=t)


# ---------------------------------------------------------------------------
# the rescaled evolution
# ---------------------------------------------------------------------------


def _bracket_fluxes(w: RescaledField):
    """Per-axis interior-face fluxes of the bracket and stability quantities.

    Face flux = diffusive |g|^{p-2} g minus advective (alpha_i y_f) * donor,
    donor chosen upwind of the advection velocity c = alpha_i y at the face.
    Returns a list of (face_flux, max_diffusivity, max_speed).
    """
    grid, e = w.grid, w.e
    out = []
    for i in range(grid.ndim):
        h = grid.h[i]
        vals = w.values
        g = np.diff(vals, axis=i) / h
        wgt, f = _power_flux(g, e.p[i])
        dmax = (e.p[i] - 1.0) * float(wgt.max()) if wgt.size else 0.0

        ax = grid.axis(i)
        y_face = 0.5 * (ax[:-1] + ax[1:])
        c = e.alpha[i] * y_face
        shape = [1] * grid.ndim
        shape[i] = len(y_face)
        c = c.reshape(shape)
        ndim = grid.ndim
        left = [slice(None)] * ndim
        right = [slice(None)] * ndim
        left[i] = slice(0, -1)
        right[i] = slice(1, None)
        donor = np.where(c > 0.0, vals[tuple(left)], vals[tuple(right)])
        f = f - c * donor
        out.append((f, dmax, float(np.max(np.abs(c)))))
    return out


def fp_stable_dtau(w: RescaledField, cfl: float = 0.4, dtau_max: float = 1e-2) -> float:
    """Combined diffusion + advection bound cfl / sum_i(2 D_i/h_i^2 + |c_i|/h_i)."""
    denom = 0.0
    for i, (_, dmax, cmax) in enumerate(_bracket_fluxes(w)):
        h = w.grid.h[i]
        denom += 2.0 * dmax / h**2 + cmax / h
    if denom == 0.0:
        return dtau_max
    return min(cfl / denom, dtau_max)


def fp_step(w: RescaledField, e: ExponentSet, dtau: float) -> RescaledField:
    """One conservative forward-Euler step of the rescaled equation."""
    if e is not w.e and e != w.e:
        raise ValueError("exponent set mismatch")
    div = np.zeros_like(w.values)
    for i, (f, _, _) in enumerate(_bracket_fluxes(w)):
        _divergence_inplace(div, f, w.grid.h[i], i)
    new = w.values + dtau * div
    if not np.isfinite(new).all():
        raise SolverAbort(f"non-finite values in rescaled step at tau={w.tau}")
    return RescaledField(w.grid, new, w.tau + dtau, e)


def steady_residual(w: RescaledField, e: ExponentSet) -> float:
    """Mass-normalized L1 norm of the discrete steady operator applied to w."""
    div = np.zeros_like(w.values)
    for i, (f, _, _) in enumerate(_bracket_fluxes(w)):
        _divergence_inplace(div, f, w.grid.h[i], i)
    denom = w.l1_norm()
    if denom == 0.0:
        return 0.0
    return float(np.abs(div).sum()) * w.grid.cell_volume / denom


@dataclass(frozen=True)
class StationaryVerdict:
    converged: bool
    tau_reached: float
    l1_rate: float
    final_residual: float


def evolve_to_stationary(
    w0: RescaledField,
    e: ExponentSet,
    tol: float = 1e-3,
    tau_max: float = 12.0,
    residual_tol: float = 0.05,
    cfl: float = 0.4,
) -> tuple[RescaledField, StationaryVerdict]:
    """March the rescaled equation in tau until the profile stops moving.

    Stationarity is measured over unit-tau windows (never per step): stop
    when ||w(tau+1) - w(tau)||_L1 < tol * ||w(tau)||_L1.  The verdict is
    `converged` only if additionally the steady residual is below
    residual_tol, so a stalled-but-wrong profile is not declared stationary.
    Aborts when the sup norm grows beyond 10x its initial value.
    """
    if w0.values.min() < 0 or w0.mass() <= 0:
        raise ValueError("initial profile must be nonnegative with positive mass")
    w = w0.copy()
    sup0 = float(w.values.max())
    tau_start = w.tau
    prev = w.copy()
    prev_diff = None
    rate = math.nan
    converged_l1 = False

    while w.tau - tau_start < tau_max - 1e-12:
        checkpoint = w.tau + 1.0
        while w.tau < checkpoint - 1e-12:
            dtau = min(fp_stable_dtau(w, cfl), checkpoint - w.tau)
            w = fp_step(w, e, dtau)
            if float(w.values.max()) > 10.0 * sup0:
                raise SolverAbort(
                    f"rescaled evolution diverging at tau={w.tau}: "
                    f"sup grew beyond 10x initial"
                )
        diff = float(np.abs(w.values - prev.values).sum()) * w.grid.cell_volume
        if prev_diff is not None and prev_diff > 0:
            rate = diff / prev_diff
        if diff < tol * w.l1_norm():
            converged_l1 = True
            break
        prev_diff = diff
        prev = w.copy()

    res = steady_residual(w, e)
    verdict = StationaryVerdict(
        converged=converged_l1 and res < residual_tol,
        tau_reached=w.tau,
        l1_rate=rate,
        final_residual=res,
    )
    return w, verdict


# ---------------------------------------------------------------------------
# reference profiles and starts
# ---------------------------------------------------------------------------


def stationary_profile_field(e: ExponentSet, grid: Grid, mass: float) -> RescaledField:
    """Isotropic stationary profile a C(b |y|) scaled to the requested mass.

    The dilation a C(a^{-(p-2)/p} y) stays stationary for every a > 0 and
    carries mass a^{lam/p} * mass(C); a is chosen to match `mass`.
    """
    if not e.is_isotropic:
        raise ValueError("closed-form stationary profile exists only isotropically")
    p, lam = e.p_iso, e.lambda_iso
    m_c = barenblatt_mass(e, t=1.0)
    a = (mass / m_c) ** (p / lam)
    b = a ** (-(p - 2.0) / p)
    vals = a * profile_value(b * grid.radius_grid(), e)
    return RescaledField(grid, vals, tau=0.0, e=e)


def bump_start(e: ExponentSet, grid: Grid, mass: float = 1.0,
               rho0: float | None = None) -> RescaledField:
    """Nonnegative compact bump of the requested mass, a generic start."""
    if rho0 is None:
        rho0 = 0.25 * min(grid.extents)
    return RescaledField(grid, cosine_bump(grid, mass, rho0), tau=0.0, e=e)


def warm_start(e: ExponentSet, grid: Grid, mass: float = 1.0) -> RescaledField:
    """Isotropic profile at the harmonic-mean exponent, a heuristic start
    for the anisotropic stationary search."""
    from .scaling import build_exponent_set

    e_bar = build_exponent_set(e.N, [e.p_bar] * e.N)
    iso = stationary_profile_field(e_bar, grid, mass)
    return RescaledField(grid, iso.values, tau=0.0, e=e)
