"""Uniform tensor-product grids and node-value fields.

Everything downstream (solver, rescaling, verification) works on a
``GridField``: a flat-indexed array of node values on a grid that is
symmetric about the origin with independent per-axis resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MIN_NODES_PER_AXIS = 16


@dataclass(frozen=True)
class Grid:
    """Tensor-product grid covering [-extents[i], extents[i]] per axis.

    Node coordinates along axis i are the n[i] equispaced points including
    both endpoints, so the spacing is h[i] = 2*extents[i]/(n[i]-1) and the
    origin is a node whenever n[i] is odd.
    """

    extents: tuple[float, ...]
    n: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "extents", tuple(float(L) for L in self.extents))
        object.__setattr__(self, "n", tuple(int(k) for k in self.n))
        if len(self.extents) != len(self.n):
            raise ValueError("extents and n must have one entry per axis")
        if not self.extents:
            raise ValueError("grid needs at least one axis")
        if any(L <= 0 for L in self.extents):
            raise ValueError("extents must be positive half-widths")
        if any(k < MIN_NODES_PER_AXIS for k in self.n):
            raise ValueError(f"need at least {MIN_NODES_PER_AXIS} nodes per axis")

    @property
    def ndim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(2.0 * L / (k - 1) for L, k in zip(self.extents, self.n))

    @property
    def cell_volume(self) -> float:
        vol = 1.0
        for hi in self.h:
            vol *= hi
        return vol

    def axis(self, i: int) -> np.ndarray:
        return np.linspace(-self.extents[i], self.extents[i], self.n[i])

    def axes(self) -> list[np.ndarray]:
        return [self.axis(i) for i in range(self.ndim)]

    def points(self) -> np.ndarray:
        """All node coordinates as an (n_1*...*n_N, N) array in C order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def radius_grid(self) -> np.ndarray:
        """Euclidean distance of every node from the origin, shaped like values."""
        sq = np.zeros(self.shape)
        for i, ax in enumerate(self.axes()):
            shape = [1] * self.ndim
            shape[i] = self.n[i]
            sq = sq + ax.reshape(shape) ** 2
        return np.sqrt(sq)


@dataclass
class GridField:
    """Scalar field of node values on a grid, tagged with its simulation time."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    def copy(self) -> "GridField":
        return GridField(self.grid, self.values.copy(), self.time)

    def mass(self) -> float:
        """Discrete L1 mass: sum of node values times the cell volume."""
        return float(self.values.sum()) * self.grid.cell_volume

    def abs_mass(self) -> float:
        return float(np.abs(self.values).sum()) * self.grid.cell_volume

    def max(self) -> float:
        return float(self.values.max())

    def min(self) -> float:
        return float(self.values.min())

    def support_halfwidths(self, rel_threshold: float = 1e-10) -> tuple[float, ...]:
        """Per-axis max |x_i| over nodes whose value exceeds rel_threshold*max.

        The relative threshold separates true zeros from round-off debris;
        an (effectively) empty field reports zero half-widths.
        """
        peak = self.values.max()
        if peak <= 0.0:
            return tuple(0.0 for _ in range(self.grid.ndim))
        mask = self.values > rel_threshold * peak
        if not mask.any():
            return tuple(0.0 for _ in range(self.grid.ndim))
        out = []
        for i in range(self.grid.ndim):
            reduce_axes = tuple(j for j in range(self.grid.ndim) if j != i)
            along = mask.any(axis=reduce_axes) if reduce_axes else mask
            out.append(float(np.abs(self.grid.axis(i))[along].max()))
        return tuple(out)

    def touches_boundary(self, rel_threshold: float = 1e-10, margin_cells: int = 0) -> bool:
        """True when the numerical support reaches within margin_cells of an edge."""
        widths = self.support_halfwidths(rel_threshold)
        for i, w in enumerate(widths):
            hi = self.grid.h[i]
            if w >= self.grid.extents[i] - margin_cells * hi - 0.5 * hi:
                return True
        return False


def sample_on_grid(f, grid: Grid, t: float) -> GridField:
    """Evaluate a pointwise function f(points, t) on all grid nodes."""
    vals = np.asarray(f(grid.points(), t), dtype=float).reshape(grid.shape)
    return GridField(grid, vals, time=t)
