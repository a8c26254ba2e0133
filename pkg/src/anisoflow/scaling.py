"""Scaling constants and growth norms for the anisotropic diffusion equation.

All the algebra shared by the exact solutions, the solver and the
verification checks lives here: the harmonic mean of the exponents, the
similarity exponents lambda, beta and alpha_i, the per-axis support-growth
and sup-decay bounds, the weighted growth norms over balls/boxes, and the
existence/waiting times they control.

Conventions: the exponent vector p must be sorted non-decreasing (reorder
the axes of your problem so that p_1 <= ... <= p_N) and every p_i exceeds 2,
which is the degenerate regime all formulas assume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GridField


def harmonic_mean(p) -> float:
    """Harmonic mean N / sum(1/p_i) of the exponent vector."""
    p = [float(v) for v in p]
    if not p:
        raise ValueError("exponent vector must be non-empty")
    if any(v <= 2.0 for v in p):
        raise ValueError("every exponent must exceed 2")
    return len(p) / sum(1.0 / v for v in p)


@dataclass(frozen=True)
class ExponentSet:
    """All scaling constants derived from a dimension N and exponents p.

    p_star (the Sobolev exponent of the harmonic mean) exists only when
    p_bar < N; lambda_iso and gamma_p exist only in the isotropic case
    (all p_i equal).  Both are None otherwise, so misuse fails loudly
    instead of propagating a NaN.
    """

    N: int
    p: tuple[float, ...]
    p_bar: float
    p_star: float | None
    lambda_iso: float | None
    lambda_aniso: float
    gamma_p: float | None
    beta: float
    alpha: tuple[float, ...]

    @property
    def is_isotropic(self) -> bool:
        return self.lambda_iso is not None

    @property
    def lam(self) -> float:
        """The similarity exponent lambda (= lambda_iso when isotropic)."""
        return self.lambda_aniso

    @property
    def p_iso(self) -> float:
        if not self.is_isotropic:
            raise ValueError("exponent set is anisotropic; no single p")
        return self.p[0]


def build_exponent_set(N: int, p) -> ExponentSet:
    """Construct an ExponentSet, validating and deriving every constant.

    Raises ValueError when len(p) != N, any p_i <= 2, or p is not sorted
    non-decreasing.
    """
    p = tuple(float(v) for v in p)
    if len(p) != N:
        raise ValueError(f"dimension N={N} does not match len(p)={len(p)}")
    if any(v <= 2.0 for v in p):
        raise ValueError("every exponent must exceed 2")
    if any(a > b for a, b in zip(p, p[1:])):
        raise ValueError("exponents must be sorted non-decreasing (reorder axes)")

    p_bar = harmonic_mean(p)
    p_star = N * p_bar / (N - p_bar) if p_bar < N else None
    lambda_aniso = N * (p_bar - 2.0) + p_bar
    beta = N / lambda_aniso
    alpha = tuple(beta - (1.0 + 2.0 * beta) / pi for pi in p)

    isotropic = all(v == p[0] for v in p)
    if isotropic:
        pe = p[0]
        lambda_iso = N * (pe - 2.0) + pe
        gamma_p = (1.0 / lambda_iso) ** (1.0 / (pe - 1.0)) * (pe - 2.0) / pe
    else:
        lambda_iso = None
        gamma_p = None

    e = ExponentSet(
        N=N,
        p=p,
        p_bar=p_bar,
        p_star=p_star,
        lambda_iso=lambda_iso,
        lambda_aniso=lambda_aniso,
        gamma_p=gamma_p,
        beta=beta,
        alpha=alpha,
    )
    _validate(e)
    return e


def _validate(e: ExponentSet) -> None:
    if e.lambda_aniso <= 0 or e.beta <= 0:
        raise ValueError("derived lambda and beta must be positive")
    if any(a >= 0 for a in e.alpha):
        raise ValueError("every alpha_i must be negative for p_i > 2")
    # beta + sum(alpha) = 0 is the cancellation that removes the reaction
    # term from the rescaled equation; it holds identically for beta = N/lambda.
    residue = e.beta + sum(e.alpha)
    if abs(residue) > 1e-10 * max(1.0, abs(e.beta)):
        raise ValueError(f"exponent cancellation failed: beta + sum(alpha) = {residue}")


@dataclass(frozen=True)
class BoundednessReport:
    """Outcome of the sparseness conditions p_bar < N and max(p) < p_star."""

    satisfied: bool
    p_bar: float
    p_star: float | None
    failed: tuple[str, ...]


def check_boundedness_condition(e: ExponentSet) -> BoundednessReport:
    """Check p_bar < N and max p < p_star; report which inequality failed."""
    failed = []
    if not e.p_bar < e.N:
        failed.append("p_bar < N")
        # p_star is undefined here, so the second inequality cannot hold either
        failed.append("max(p) < p_star (p_star undefined: p_bar >= N)")
    elif not max(e.p) < e.p_star:
        failed.append("max(p) < p_star")
    return BoundednessReport(
        satisfied=not failed, p_bar=e.p_bar, p_star=e.p_star, failed=tuple(failed)
    )


def support_growth_exponent(e: ExponentSet, axis: int) -> float:
    """Time exponent (N(p_bar - p_j) + p_bar) / (lambda p_j) for axis j (0-based)."""
    pj = e.p[axis]
    return (e.N * (e.p_bar - pj) + e.p_bar) / (e.lambda_aniso * pj)


def support_radius(
    e: ExponentSet, axis: int, t: float, r0: float, mass1: float, c: float = 1.0
) -> float:
    """Half-width bound 2*r0 + C t^e_j ||u0||_1^m_j of the support along one axis.

    The constant C is not known in closed form; it defaults to 1 for forward
    evaluation and is treated as a fit parameter in verification.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if r0 <= 0 or mass1 <= 0 or c <= 0:
        raise ValueError("r0, mass1 and c must be positive")
    if t == 0.0:
        return 2.0 * r0
    pj = e.p[axis]
    texp = support_growth_exponent(e, axis)
    mexp = (e.p_bar / pj) * (pj - 2.0) / e.lambda_aniso
    return 2.0 * r0 + c * t**texp * mass1**mexp


def decay_bound(e: ExponentSet, t: float, mass1: float, c: float = 1.0) -> float:
    """Sup-norm bound C t^{-N/lambda} ||u0||_1^{p_bar/lambda}, valid for t > 0."""
    if t <= 0:
        raise ValueError("t must be positive")
    lam = e.lambda_aniso
    return c * t ** (-e.N / lam) * mass1 ** (e.p_bar / lam)


def decay_exponent(e: ExponentSet) -> float:
    """Target sup-norm decay exponent -N/lambda."""
    return -e.N / e.lambda_aniso


@dataclass(frozen=True)
class PointMass:
    """A point measure of the given mass concentrated at the origin."""

    mass: float


@dataclass(frozen=True)
class GrowthNorm:
    """Value of a weighted growth norm together with the radius ladder used."""

    kind: str
    r: float
    value: float
    ladder: tuple[float, ...]


def anisotropic_box_halfwidths(e: ExponentSet, rho: float) -> tuple[float, ...]:
    """Half-widths rho^{p_bar (p_i-2) / (p_i (p_bar-2))} / 2 of the scaling box."""
    return tuple(
        rho ** (e.p_bar * (pi - 2.0) / (pi * (e.p_bar - 2.0))) / 2.0 for pi in e.p
    )


def _norm_weight(e: ExponentSet, kind: str, rho: float) -> float:
    if kind == "isotropic":
        if not e.is_isotropic:
            raise ValueError("isotropic norm requires an isotropic exponent set")
        return rho ** (-e.lambda_iso / (e.p_iso - 2.0))
    if kind == "anisotropic":
        return rho ** (-e.lambda_aniso / e.N)
    raise ValueError(f"unknown norm kind {kind!r}")


def _region_integral(field: GridField, e: ExponentSet, kind: str, rho: float) -> float:
    grid = field.grid
    mask = np.ones(grid.shape, dtype=bool)
    if kind == "isotropic":
        mask = grid.radius_grid() <= rho
    else:
        for i, hw in enumerate(anisotropic_box_halfwidths(e, rho)):
            shape = [1] * grid.ndim
            shape[i] = grid.n[i]
            mask &= np.abs(grid.axis(i)).reshape(shape) <= hw
    return float(np.abs(field.values)[mask].sum()) * grid.cell_volume


def _covering_radius(field: GridField, e: ExponentSet, kind: str) -> float:
    grid = field.grid
    if kind == "isotropic":
        return math.sqrt(sum(L * L for L in grid.extents))
    need = []
    for i, pi in enumerate(e.p):
        w = e.p_bar * (pi - 2.0) / (pi * (e.p_bar - 2.0))
        need.append((2.0 * grid.extents[i]) ** (1.0 / w))
    return max(need)


def triple_norm(
    field: GridField | PointMass,
    r: float,
    kind: str,
    e: ExponentSet,
    ladder_ratio: float = 1.25,
) -> GrowthNorm:
    """Growth norm sup_{rho >= r} weight(rho) * integral over the rho-region.

    The supremum over all rho >= r is not computable on finite data, so it is
    taken over the geometric ladder rho = r * ladder_ratio^k, truncated at the
    first rung whose region covers the field's bounding box.  Values at ladder
    radii from the same geometric family are exactly monotone in r.

    For a PointMass the integral is constant, so the supremum is exact and
    attained at rho = r.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if ladder_ratio <= 1.0:
        raise ValueError("ladder_ratio must exceed 1")
    if isinstance(field, PointMass):
        if field.mass < 0:
            raise ValueError("point mass must be nonnegative")
        return GrowthNorm(kind, r, field.mass * _norm_weight(e, kind, r), (r,))

    if kind == "anisotropic" and field.min() < -1e-12 * max(1.0, field.max()):
        raise ValueError("anisotropic growth norm assumes a nonnegative field")
    cover = _covering_radius(field, e, kind)
    if r > cover:
        raise ValueError(f"radius r={r} exceeds the field's covering radius {cover}")

    ladder = []
    rho = r
    while True:
        ladder.append(rho)
        if rho >= cover:
            break
        rho = min(rho * ladder_ratio, cover)
    best = max(_norm_weight(e, kind, rho) * _region_integral(field, e, kind, rho)
               for rho in ladder)
    return GrowthNorm(kind, r, best, tuple(ladder))


@dataclass(frozen=True)
class WaitingTime:
    """Guaranteed lifetime for the measure-data problem, with its mass regime."""

    value: float
    regime: str
    gamma_threshold: float

    def __post_init__(self):
        if (self.regime == "vanishing_mass") != math.isinf(self.value):
            raise ValueError("value is infinite exactly in the vanishing_mass regime")


def waiting_time(m_inf: float, e: ExponentSet, gamma: float = 1.0) -> WaitingTime:
    """Lifetime T* from the large-radius limit m_inf of the growth norm.

    Vanishing norm at infinity gives an eternal solution; otherwise the
    lifetime is (m_inf/gamma)^q with q built from the largest exponent p_N
    when m_inf >= gamma (large mass) and from the smallest p_1 when
    m_inf < gamma (small mass).  Both branches are read as powers.
    """
    if m_inf < 0:
        raise ValueError("m_inf must be nonnegative")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if m_inf == 0.0:
        return WaitingTime(math.inf, "vanishing_mass", gamma)
    if m_inf >= gamma:
        pn = e.p[-1]
        q = (e.N * (e.p_bar - pn) + e.p_bar) / (e.p_bar * (pn - 2.0))
        return WaitingTime((m_inf / gamma) ** q, "large_mass", gamma)
    p1 = e.p[0]
    q = (e.N * (e.p_bar - p1) + e.p_bar) / (e.p_bar * (p1 - 2.0))
    return WaitingTime((m_inf / gamma) ** q, "small_mass", gamma)


def existence_time_isotropic(m_inf: float, e: ExponentSet, c0: float = 1.0) -> float:
    """Existence time C0 * m_inf^{2-p} for the isotropic measure-data problem."""
    if not e.is_isotropic:
        raise ValueError("existence_time_isotropic requires an isotropic exponent set")
    if m_inf < 0:
        raise ValueError("m_inf must be nonnegative")
    if m_inf == 0.0:
        return math.inf
    return c0 * m_inf ** (2.0 - e.p_iso)
