"""Cell problems and the macroscopic diffusion/drift coefficients.

The leading-order tumbling operator has the constants as null space, so the
cell problems are solved on the zero-quadrature-mean subspace via a bordered
(Lagrange multiplier) system.  Solving the kappa problem verbatim with the
right-hand side +vF produces a negative-definite diffusion tensor, which
would make the macroscopic equation ill-posed; the module therefore uses the
right-hand side -vF (``SIGN_CONVENTION``), which reproduces the positive
two-velocity diffusion coefficient 1/(2*lam) and matches the drift and
variance rates measured on the kinetic dynamics.  The drift formula
Gamma = -integral(v * theta) is kept verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import KernelParams, TumblingMatrix, assemble_tumbling_matrix, k1_matrix
from .velocity import VelocityGrid, equilibrium, quadrature

SIGN_CONVENTION = -1.0
RESIDUAL_TOL = 1e-10
MAX_CONDITION = 1e12


class CellProblemError(RuntimeError):
    """Raised when a cell problem is singular or badly conditioned."""


@dataclass(frozen=True)
class CellSolution:
    """Solutions of the two cell problems with their residuals.

    ``kappa`` has shape (n_velocities, spatial_dim); ``theta`` has shape
    (n_velocities,).  Both have zero quadrature mean.
    """

    kappa: np.ndarray
    theta: np.ndarray
    kappa_residual: float
    theta_residual: float


@dataclass(frozen=True)
class MacroCoefficients:
    """Diffusion tensor (spatial_dim x spatial_dim) and drift vector."""

    diffusion: np.ndarray
    drift: np.ndarray

    @property
    def diffusion_scalar(self) -> float:
        if self.diffusion.shape != (1, 1):
            raise ValueError("diffusion is not scalar")
        return float(self.diffusion[0, 0])

    @property
    def drift_scalar(self) -> float:
        if self.drift.shape != (1,):
            raise ValueError("drift is not scalar")
        return float(self.drift[0])


def _solve_mean_zero(matrix: np.ndarray, rhs: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """Solve matrix @ x = rhs for the unique x with zero quadrature mean.

    The bordered system appends a multiplier column of ones and the
    quadrature-weight row; it is nonsingular exactly when the operator is
    invertible on the mean-zero subspace.
    """
    n = grid.n_points
    bordered = np.zeros((n + 1, n + 1))
    bordered[:n, :n] = matrix
    bordered[:n, n] = 1.0
    bordered[n, :n] = grid.weights
    cond = np.linalg.cond(bordered)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise CellProblemError(
            f"restricted tumbling operator is singular or ill-conditioned "
            f"(bordered condition number {cond:.3g}); the kernel likely "
            f"violates the positive lower bound"
        )
    full_rhs = np.concatenate([rhs, [0.0]])
    x = np.linalg.solve(bordered, full_rhs)[:n]
    residual = float(np.max(np.abs(matrix @ x - rhs)))
    if residual > RESIDUAL_TOL:
        raise CellProblemError(
            f"cell problem residual {residual:.3g} exceeds {RESIDUAL_TOL:.1g} "
            f"(bordered condition number {cond:.3g})"
        )
    return x


def solve_cell_kappa(
    k0_operator: TumblingMatrix, grid: VelocityGrid, spatial_dim: int | None = None
) -> np.ndarray:
    """Solve the kappa cell problem, one column per spatial component.

    The right-hand side is SIGN_CONVENTION * v_a * F; solvability holds
    because the velocity set has zero mean componentwise.
    """
    if k0_operator.epsilon != 0.0:
        raise ValueError("kappa cell problem requires the epsilon=0 operator")
    d = grid.dim if spatial_dim is None else spatial_dim
    if not 1 <= d <= grid.dim:
        raise ValueError(f"spatial_dim must be in [1, {grid.dim}]")
    f_eq = equilibrium(grid).values
    cols = []
    for a in range(d):
        rhs = SIGN_CONVENTION * grid.component(a) * f_eq
        cols.append(_solve_mean_zero(k0_operator.entries, rhs, grid))
    return np.column_stack(cols)


def solve_cell_theta(
    k0_operator: TumblingMatrix, k1_action_on_f: np.ndarray, grid: VelocityGrid
) -> np.ndarray:
    """Solve the theta cell problem with right-hand side K1 applied to F.

    The right-hand side has zero quadrature mean automatically because every
    tumbling operator conserves mass.
    """
    if k0_operator.epsilon != 0.0:
        raise ValueError("theta cell problem requires the epsilon=0 operator")
    return _solve_mean_zero(k0_operator.entries, np.asarray(k1_action_on_f, float), grid)


def k1_applied_to_equilibrium(params: KernelParams, grid: VelocityGrid) -> np.ndarray:
    """The antisymmetric tumbling operator applied to the equilibrium profile."""
    f_eq = equilibrium(grid).values
    m1 = k1_matrix(params, grid)
    gain = (grid.weights[None, :] * m1) @ f_eq
    loss = (grid.weights[None, :] * m1.T).sum(axis=1) * f_eq
    return gain - loss


def solve_cells(
    params: KernelParams, grid: VelocityGrid, spatial_dim: int | None = None
) -> CellSolution:
    """Solve both cell problems for a kernel and report residuals."""
    k0_op = assemble_tumbling_matrix(params, grid, epsilon=0.0)
    d = grid.dim if spatial_dim is None else spatial_dim
    f_eq = equilibrium(grid).values

    kappa = solve_cell_kappa(k0_op, grid, spatial_dim=d)
    rhs_theta = k1_applied_to_equilibrium(params, grid)
    theta = solve_cell_theta(k0_op, rhs_theta, grid)

    kappa_res = 0.0
    for a in range(d):
        rhs = SIGN_CONVENTION * grid.component(a) * f_eq
        kappa_res = max(kappa_res, float(np.max(np.abs(k0_op.apply(kappa[:, a]) - rhs))))
    theta_res = float(np.max(np.abs(k0_op.apply(theta) - rhs_theta)))
    return CellSolution(
        kappa=kappa, theta=theta, kappa_residual=kappa_res, theta_residual=theta_res
    )


def compute_macro(
    params: KernelParams, grid: VelocityGrid, spatial_dim: int | None = None
) -> MacroCoefficients:
    """Diffusion tensor and drift vector induced by a kernel.

    D[a, b] integrates v_a * kappa_b over the velocity domain and
    Gamma[a] = -integral of v_a * theta.  With the module sign convention
    D is symmetric positive semidefinite.
    """
    d = grid.dim if spatial_dim is None else spatial_dim
    cells = solve_cells(params, grid, spatial_dim=d)
    diffusion = np.empty((d, d))
    drift = np.empty(d)
    for a in range(d):
        va = grid.component(a)
        for b in range(d):
            diffusion[a, b] = quadrature(grid, va * cells.kappa[:, b])
        drift[a] = -quadrature(grid, va * cells.theta)
    diffusion.setflags(write=False)
    drift.setflags(write=False)
    return MacroCoefficients(diffusion=diffusion, drift=drift)
