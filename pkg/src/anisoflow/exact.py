"""Closed-form solutions of the degenerate diffusion equation.

Contains evaluators for the compactly supported source-type solution and
its two-parameter comparison family, the self-similar profile with its
zero-flux identity, the separable power-type solution of the anisotropic
equation, the small-(p-2) heat-kernel limit, and the dilation group acting
on solutions.  All evaluators are pure functions; batched evaluation takes
points as an (M, N) array.

Positive parts are taken before fractional powers (max(., 0) first) so no
negative base ever reaches a non-integer exponent, and odd powers of signed
quantities are written as |z|^(q-1) * z with the sign carried separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .scaling import ExponentSet, build_exponent_set


def _points(x, N: int) -> tuple[np.ndarray, bool]:
    """Normalize x to an (M, N) array; the flag says input was a single point."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        if N != 1:
            raise ValueError(f"scalar point given for dimension N={N}")
        return arr.reshape(1, 1), True
    if arr.ndim == 1:
        if arr.shape[0] != N:
            raise ValueError(f"point has {arr.shape[0]} coordinates, expected {N}")
        return arr.reshape(1, N), True
    if arr.ndim == 2 and arr.shape[1] == N:
        return arr, False
    raise ValueError(f"points must have shape (N,) or (M, N) with N={N}")


def _maybe_scalar(vals: np.ndarray, scalar: bool):
    return float(vals[0]) if scalar else vals


# ---------------------------------------------------------------------------
# source-type solution (isotropic)
# ---------------------------------------------------------------------------


def barenblatt(x, t: float, e: ExponentSet):
    """Source-type solution t^{-N/lam} {1 - gamma_p (|x| t^{-1/lam})^{p/(p-1)}}_+^{(p-1)/(p-2)}."""
    if t <= 0:
        raise ValueError("t must be positive")
    if not e.is_isotropic:
        raise ValueError("the explicit source-type solution exists only for equal exponents")
    p, lam, gam = e.p_iso, e.lambda_iso, e.gamma_p
    pts, scalar = _points(x, e.N)
    radius = np.sqrt((pts * pts).sum(axis=1))
    bracket = 1.0 - gam * (radius / t ** (1.0 / lam)) ** (p / (p - 1.0))
    vals = t ** (-e.N / lam) * np.maximum(bracket, 0.0) ** ((p - 1.0) / (p - 2.0))
    return _maybe_scalar(vals, scalar)


def barenblatt_support_radius(e: ExponentSet, t: float) -> float:
    """Free-boundary radius t^{1/lam} * gamma_p^{-(p-1)/p}."""
    if t <= 0:
        raise ValueError("t must be positive")
    p = e.p_iso
    return t ** (1.0 / e.lambda_iso) * e.gamma_p ** (-(p - 1.0) / p)


def sphere_area(N: int) -> float:
    """Surface measure of the unit sphere in R^N (2 for N=1)."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


def radial_mass(f_radial: Callable[[float], float], radius: float, N: int,
                tol: float = 1e-9) -> float:
    """Integral over R^N of a radial function supported in |x| <= radius.

    Adaptive Gauss-Kronrod quadrature of r^{N-1} f(r) on [0, radius].
    """
    if radius <= 0:
        return 0.0
    val, _ = quad(lambda r: r ** (N - 1) * f_radial(r), 0.0, radius,
                  epsabs=tol, epsrel=tol, limit=200)
    return sphere_area(N) * val


def barenblatt_mass(e: ExponentSet, t: float = 1.0, tol: float = 1e-9) -> float:
    """Total mass of the source-type solution at time t, by quadrature."""
    R = barenblatt_support_radius(e, t)
    one = np.zeros(e.N)

    def f(r):
        one[0] = r
        return barenblatt(one, t, e)

    return radial_mass(f, R, e.N, tol)


# ---------------------------------------------------------------------------
# comparison family with free amplitude and initial radius
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BarenblattParams:
    """Comparison solution with amplitude k, initial radius rho, center x_bar."""

    k: float
    rho: float
    x_bar: tuple[float, ...]
    t_bar: float
    e: ExponentSet

    def __post_init__(self):
        if self.k <= 0 or self.rho <= 0:
            raise ValueError("k and rho must be positive")
        if not self.e.is_isotropic:
            raise ValueError("comparison family requires an isotropic exponent set")
        if len(self.x_bar) != self.e.N:
            raise ValueError("x_bar must have N coordinates")


def support_S(params: BarenblattParams, t: float) -> float:
    """S(t) = lam (p/(p-2))^{p-1} k^{p-2} rho^{N(p-2)} (t - t_bar) + rho^lam."""
    if t < params.t_bar:
        raise ValueError("t must be >= t_bar")
    e = params.e
    p, lam = e.p_iso, e.lambda_iso
    rate = lam * (p / (p - 2.0)) ** (p - 1.0) * params.k ** (p - 2.0)
    rate *= params.rho ** (e.N * (p - 2.0))
    return rate * (t - params.t_bar) + params.rho**lam


def general_barenblatt(params: BarenblattParams, x, t: float):
    """Comparison solution k rho^N S^{-N/lam} {1 - (|x-x_bar| S^{-1/lam})^{p/(p-1)}}_+^{(p-1)/(p-2)}."""
    e = params.e
    p, lam = e.p_iso, e.lambda_iso
    S = support_S(params, t)
    pts, scalar = _points(x, e.N)
    shift = pts - np.asarray(params.x_bar, dtype=float)
    radius = np.sqrt((shift * shift).sum(axis=1))
    bracket = 1.0 - (radius / S ** (1.0 / lam)) ** (p / (p - 1.0))
    vals = (params.k * params.rho ** e.N / S ** (e.N / lam)
            * np.maximum(bracket, 0.0) ** ((p - 1.0) / (p - 2.0)))
    return _maybe_scalar(vals, scalar)


# ---------------------------------------------------------------------------
# self-similar profile and its zero-flux identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProfilePoint:
    eta: float
    value: float


def free_boundary_eta(e: ExponentSet) -> float:
    """Profile support boundary (1/gamma_p)^{(p-1)/p}."""
    p = e.p_iso
    return (1.0 / e.gamma_p) ** ((p - 1.0) / p)


def profile_value(eta, e: ExponentSet):
    """Profile C(eta) = {1 - gamma_p eta^{p/(p-1)}}_+^{(p-1)/(p-2)}, vectorized."""
    if not e.is_isotropic:
        raise ValueError("profile requires an isotropic exponent set")
    p = e.p_iso
    eta = np.asarray(eta, dtype=float)
    bracket = np.maximum(1.0 - e.gamma_p * eta ** (p / (p - 1.0)), 0.0)
    return bracket ** ((p - 1.0) / (p - 2.0))


def profile_derivative(eta, e: ExponentSet):
    """Analytic C'(eta) = -gamma_p (p/(p-2)) eta^{1/(p-1)} {.}_+^{1/(p-2)}."""
    p = e.p_iso
    eta = np.asarray(eta, dtype=float)
    bracket = np.maximum(1.0 - e.gamma_p * eta ** (p / (p - 1.0)), 0.0)
    return -e.gamma_p * (p / (p - 2.0)) * eta ** (1.0 / (p - 1.0)) * bracket ** (1.0 / (p - 2.0))


def profile(eta: float, e: ExponentSet) -> ProfilePoint:
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    return ProfilePoint(eta=float(eta), value=float(profile_value(eta, e)))


def zero_flux_residual(eta, e: ExponentSet):
    """Residual |C'|^{p-2} C' + eta C / lam of the first-order flux balance.

    Zero to round-off inside the support and identically zero outside;
    evaluated with the analytic derivative, not a difference quotient.
    """
    p, lam = e.p_iso, e.lambda_iso
    eta = np.asarray(eta, dtype=float)
    c = profile_value(eta, e)
    dc = profile_derivative(eta, e)
    res = np.abs(dc) ** (p - 2.0) * dc + eta * c / lam
    return float(res) if res.ndim == 0 else res


# ---------------------------------------------------------------------------
# separable power-type solution of the anisotropic equation
# ---------------------------------------------------------------------------


def default_kappa(p: float) -> float:
    """Coefficient making kappa (|x|^p/(T-t))^{1/(p-2)} solve the 1-D equation.

    Substituting the power ansatz forces
    kappa^{p-2} = 1 / (2 (p-1) (p/(p-2))^{p-1}); confirmed against a
    finite-difference residual oracle in the tests (1/36 at p=3).
    """
    if p <= 2:
        raise ValueError("p must exceed 2")
    return (2.0 * (p - 1.0) * (p / (p - 2.0)) ** (p - 1.0)) ** (-1.0 / (p - 2.0))


@dataclass(frozen=True)
class SeparableParams:
    """Per-axis coefficients kappa_i and blow-up times T_i."""

    kappa: tuple[float, ...]
    t_blowup: tuple[float, ...]
    e: ExponentSet

    def __post_init__(self):
        if len(self.kappa) != self.e.N or len(self.t_blowup) != self.e.N:
            raise ValueError("kappa and t_blowup must have N entries")
        if any(k <= 0 for k in self.kappa):
            raise ValueError("kappa_i must be positive")

    @classmethod
    def with_default_kappa(cls, e: ExponentSet, t_blowup) -> "SeparableParams":
        return cls(tuple(default_kappa(pi) for pi in e.p), tuple(t_blowup), e)


def separable_solution(params: SeparableParams, x, t: float):
    """Sum over axes of kappa_i (|x_i|^{p_i} / (T_i - t))^{1/(p_i-2)}."""
    tmin = min(params.t_blowup)
    if t >= tmin:
        raise ValueError(f"t={t} is at or beyond the blow-up time {tmin}")
    e = params.e
    pts, scalar = _points(x, e.N)
    vals = np.zeros(pts.shape[0])
    for i, pi in enumerate(e.p):
        vals += params.kappa[i] * (
            np.abs(pts[:, i]) ** pi / (params.t_blowup[i] - t)
        ) ** (1.0 / (pi - 2.0))
    return _maybe_scalar(vals, scalar)


# ---------------------------------------------------------------------------
# heat-kernel limit
# ---------------------------------------------------------------------------


def heat_kernel(x, t: float, N: int):
    """t^{-N/2} exp(-|x|^2/(4t)), the p -> 2 limit of the source-type solution."""
    if t <= 0:
        raise ValueError("t must be positive")
    pts, scalar = _points(x, N)
    r2 = (pts * pts).sum(axis=1)
    vals = t ** (-N / 2.0) * np.exp(-r2 / (4.0 * t))
    return _maybe_scalar(vals, scalar)


def heat_limit_gap(x, t: float, p: float):
    """|B_p(x, t) - heat kernel|, a diagnostic that shrinks as p decreases to 2."""
    arr = np.asarray(x, dtype=float)
    N = 1 if arr.ndim == 0 else arr.shape[-1]
    e = build_exponent_set(N, [p] * N)
    pts, scalar = _points(x, N)
    gap = np.abs(np.atleast_1d(barenblatt(pts, t, e)) - np.atleast_1d(heat_kernel(pts, t, N)))
    return _maybe_scalar(gap, scalar)


# ---------------------------------------------------------------------------
# dilation group
# ---------------------------------------------------------------------------


def apply_scaling(u: Callable, K: float, L: float, T: float) -> Callable:
    """Return the dilated evaluator (x, t) -> K u(x/L, t/T)."""
    if K <= 0 or L <= 0 or T <= 0:
        raise ValueError("K, L, T must be positive")

    def scaled(x, t):
        return K * u(np.asarray(x, dtype=float) / L, t / T)

    return scaled


def is_admissible(K: float, L: float, T: float, p: float, tol: float = 1e-12) -> bool:
    """True when T K^{p-2} = L^p holds to relative tolerance tol.

    This is the constraint under which the dilation maps solutions to
    solutions.
    """
    return abs(T * K ** (p - 2.0) - L**p) <= tol * L**p


def mass_preserving_scaling(e: ExponentSet, T: float) -> tuple[float, float, float]:
    """One-parameter subgroup (K, L, T) = (T^{-N/lam}, T^{1/lam}, T).

    Solves both T K^{p-2} = L^p and K L^N = 1, so it maps solutions to
    solutions while preserving mass; the source-type solution is invariant
    under it.
    """
    lam = e.lambda_iso if e.is_isotropic else e.lambda_aniso
    return T ** (-e.N / lam), T ** (1.0 / lam), T


# ---------------------------------------------------------------------------
# failure of the elliptic-style Harnack bound at the free boundary
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HarnackFailureWitness:
    x0: tuple[float, ...]
    t0: float
    value_at_x0: float
    t_prior: float
    sup_prior: float


def harnack_failure_witness(
    e: ExponentSet, rho: float, t0: float = 1.0, samples: int = 2001
) -> HarnackFailureWitness:
    """Exhibit a boundary point where the solution vanishes at time t0 while
    its sup over the rho-ball at the earlier time t0 - rho^p is positive.

    Raises ValueError when t0 - rho^p <= 0 (rho too large for the time level).
    The sup is sampled densely in radius; for rho close to the admissibility
    limit the ball can miss the shrunken support entirely, in which case the
    sampled sup is honestly reported as 0.
    """
    p = e.p_iso
    if rho <= 0:
        raise ValueError("rho must be positive")
    t_prior = t0 - rho**p
    if t_prior <= 0:
        raise ValueError(f"rho too large: t0 - rho^p = {t_prior} <= 0")
    R0 = barenblatt_support_radius(e, t0)
    x0 = np.zeros(e.N)
    x0[0] = R0
    v0 = barenblatt(x0, t0, e)
    radii = np.linspace(max(R0 - rho, 0.0), R0 + rho, samples)
    pts = np.zeros((samples, e.N))
    pts[:, 0] = radii
    sup_prior = float(np.max(barenblatt(pts, t_prior, e)))
    return HarnackFailureWitness(
        x0=tuple(x0), t0=t0, value_at_x0=float(v0), t_prior=t_prior, sup_prior=sup_prior
    )


# ---------------------------------------------------------------------------
# finite-difference residual oracle
# ---------------------------------------------------------------------------


def fd_equation_residual(u: Callable, x, t: float, p, h: float = 1e-3,
                         dt: float = 1e-5) -> float:
    """Central-difference residual u_t - sum_i d/dx_i(|u_{x_i}|^{p_i-2} u_{x_i}).

    Independent check that an evaluator solves the equation at a smooth
    point; truncation is O(h^2 + dt^2).
    """
    x = np.asarray(x, dtype=float)
    N = x.size
    p = [float(v) for v in (p if np.iterable(p) else [p] * N)]
    ut = (u(x, t + dt) - u(x, t - dt)) / (2.0 * dt)

    div = 0.0
    for i in range(N):
        step = np.zeros(N)
        step[i] = h
        # flux at x +- h/2 from gradients spanning one h
        gp = (u(x + step, t) - u(x, t)) / h
        gm = (u(x, t) - u(x - step, t)) / h
        fp = np.abs(gp) ** (p[i] - 2.0) * gp
        fm = np.abs(gm) ** (p[i] - 2.0) * gm
        div += (fp - fm) / h
    return float(ut - div)
