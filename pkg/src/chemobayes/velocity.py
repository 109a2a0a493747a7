"""Discrete velocity space: grid, quadrature, local equilibrium."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ZERO_MEAN_TOL = 1e-13
UNIT_SPEED_TOL = 1e-13


@dataclass(frozen=True)
class VelocityGrid:
    """Finite set of unit-speed velocities with positive quadrature weights.

    ``points`` has shape (n_points, dim); ``measure`` is the total weight,
    i.e. the discrete volume of the velocity domain.
    """

    points: np.ndarray
    weights: np.ndarray
    measure: float

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def component(self, k: int) -> np.ndarray:
        """k-th Cartesian component of every velocity point."""
        return self.points[:, k]


@dataclass(frozen=True)
class Equilibrium:
    """Constant velocity distribution 1/measure, normalized to unit quadrature."""

    values: np.ndarray


def build_velocity_grid(dimension: int, n_points: int) -> VelocityGrid:
    """Build the discrete velocity set.

    dimension 1 is the two-velocity set {-1, +1} with unit counting weights
    (n_points must be 2).  dimension 2 places n_points equally spaced angles
    on the unit circle with weights 2*pi/n_points; n_points must be even so
    the velocities cancel pairwise and the zero-mean invariant holds exactly.
    """
    if dimension == 1:
        if n_points != 2:
            raise ValueError("dimension 1 requires exactly 2 velocity points")
        points = np.array([[-1.0], [1.0]])
        weights = np.array([1.0, 1.0])
    elif dimension == 2:
        if n_points < 2:
            raise ValueError("need at least 2 velocity points")
        if n_points % 2 != 0:
            raise ValueError("dimension 2 requires an even number of points")
        angles = 2.0 * np.pi * np.arange(n_points) / n_points
        points = np.column_stack([np.cos(angles), np.sin(angles)])
        weights = np.full(n_points, 2.0 * np.pi / n_points)
    else:
        raise ValueError(f"unsupported velocity dimension {dimension}")

    points.setflags(write=False)
    weights.setflags(write=False)
    grid = VelocityGrid(points=points, weights=weights, measure=float(weights.sum()))
    _check_invariants(grid)
    return grid


def _check_invariants(grid: VelocityGrid) -> None:
    if np.any(grid.weights <= 0.0):
        raise ValueError("quadrature weights must be positive")
    mean = grid.weights @ grid.points
    if np.max(np.abs(mean)) > ZERO_MEAN_TOL:
        raise ValueError(f"velocity set is not zero-mean: {mean}")
    speeds = np.linalg.norm(grid.points, axis=1)
    if np.max(np.abs(speeds - 1.0)) > UNIT_SPEED_TOL:
        raise ValueError("velocity points must have unit speed")


def quadrature(grid: VelocityGrid, values) -> float | np.ndarray:
    """Weighted sum realizing the integral over the velocity domain.

    ``values`` may carry leading axes; the last axis must match the number
    of velocity points.
    """
    arr = np.asarray(values, dtype=float)
    if arr.shape[-1] != grid.n_points:
        raise ValueError(
            f"expected {grid.n_points} values per velocity profile, got {arr.shape[-1]}"
        )
    out = arr @ grid.weights
    return float(out) if out.ndim == 0 else out


def equilibrium(grid: VelocityGrid) -> Equilibrium:
    """The constant profile 1/measure (unit quadrature by construction)."""
    values = np.full(grid.n_points, 1.0 / grid.measure)
    values.setflags(write=False)
    return Equilibrium(values=values)
