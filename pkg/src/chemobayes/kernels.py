"""Parametrized tumbling kernels and the discrete tumbling operator.

The kernel family is K(v, v') = K0(v, v') + epsilon * K1(v, v') with a
symmetric K0 and an antisymmetric K1:

    K0(v, v') = lam + sum_m extras[m] * S_m(v, v')
    K1(v, v') = beta * (e . (v - v'))

where the S_m are fixed symmetric basis functions (built-in: the dot
product v . v') and e is the unit vector along the first spatial axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .velocity import VelocityGrid


def _dot_basis(v: np.ndarray, v_prime: np.ndarray) -> np.ndarray:
    return np.sum(v * v_prime, axis=-1)


SYMMETRIC_BASES = {
    "dot": _dot_basis,
}


@dataclass(frozen=True)
class KernelParams:
    """Coefficients of a tumbling-kernel pair (symmetric part, antisymmetric part).

    ``lam`` scales the constant symmetric component, ``beta`` the antisymmetric
    drift component, and ``extras`` multiply the named symmetric basis
    functions in ``extra_basis``.
    """

    lam: float
    beta: float = 0.0
    extras: tuple[float, ...] = ()
    extra_basis: tuple[str, ...] = ("dot",)

    def __post_init__(self):
        if len(self.extras) > len(self.extra_basis):
            raise ValueError("more extra coefficients than basis functions")
        for name in self.extra_basis[: len(self.extras)]:
            if name not in SYMMETRIC_BASES:
                raise ValueError(f"unknown symmetric basis {name!r}")

    def as_vector(self) -> np.ndarray:
        return np.array([self.lam, self.beta, *self.extras])


def _as_points(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        arr = arr[None]
    return arr


def evaluate_k0(params: KernelParams, v, v_prime) -> float | np.ndarray:
    """Symmetric kernel part at (v, v'); symmetric under swapping arguments."""
    a = _as_points(v)
    b = _as_points(v_prime)
    out = np.full(np.broadcast_shapes(a.shape[:-1], b.shape[:-1]), params.lam)
    for coeff, name in zip(params.extras, params.extra_basis):
        out = out + coeff * SYMMETRIC_BASES[name](a, b)
    return float(out) if out.ndim == 0 else out


def evaluate_k1(params: KernelParams, v, v_prime) -> float | np.ndarray:
    """Antisymmetric kernel part beta * e.(v - v') with e the first axis."""
    a = _as_points(v)
    b = _as_points(v_prime)
    out = params.beta * (a[..., 0] - b[..., 0])
    return float(out) if out.ndim == 0 else out


def k0_matrix(params: KernelParams, grid: VelocityGrid) -> np.ndarray:
    """K0 evaluated on all grid pairs; entry [i, j] = K0(v_i, v_j)."""
    v = grid.points[:, None, :]
    vp = grid.points[None, :, :]
    return np.asarray(evaluate_k0(params, v, vp), dtype=float)


def k1_matrix(params: KernelParams, grid: VelocityGrid) -> np.ndarray:
    """K1 evaluated on all grid pairs; entry [i, j] = K1(v_i, v_j)."""
    v = grid.points[:, None, :]
    vp = grid.points[None, :, :]
    return np.asarray(evaluate_k1(params, v, vp), dtype=float)


@dataclass(frozen=True)
class AdmissibilityReport:
    passed: bool
    violations: tuple[str, ...]
    min_k0: float
    max_abs_k0: float
    max_abs_k1: float


def check_admissible(
    params: KernelParams, grid: VelocityGrid, alpha: float, c_bound: float
) -> AdmissibilityReport:
    """Check the pointwise admissibility bounds alpha <= K0, |K0|, |K1| <= C.

    Kernels here do not depend on space or time, so the C^1 seminorm in
    (x, t) vanishes and only the pointwise bounds on the velocity grid are
    checked.
    """
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    if c_bound < alpha:
        raise ValueError("c_bound must be at least alpha")

    m0 = k0_matrix(params, grid)
    m1 = k1_matrix(params, grid)
    min_k0 = float(m0.min())
    max_abs_k0 = float(np.abs(m0).max())
    max_abs_k1 = float(np.abs(m1).max())

    violations = []
    if min_k0 < alpha:
        violations.append(f"lower bound: min K0 = {min_k0:.6g} < alpha = {alpha:.6g}")
    if max_abs_k0 > c_bound:
        violations.append(f"upper bound: max |K0| = {max_abs_k0:.6g} > C = {c_bound:.6g}")
    if max_abs_k1 > c_bound:
        violations.append(f"upper bound: max |K1| = {max_abs_k1:.6g} > C = {c_bound:.6g}")

    return AdmissibilityReport(
        passed=not violations,
        violations=tuple(violations),
        min_k0=min_k0,
        max_abs_k0=max_abs_k0,
        max_abs_k1=max_abs_k1,
    )


@dataclass(frozen=True)
class TumblingMatrix:
    """Discrete tumbling operator acting on velocity profiles.

    Applying the matrix to a profile g realizes
    sum_j w_j * (K(v_i, v_j) g_j - K(v_j, v_i) g_i), which conserves the
    velocity quadrature of g exactly.
    """

    entries: np.ndarray
    epsilon: float

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def apply(self, profile: np.ndarray) -> np.ndarray:
        return self.entries @ np.asarray(profile, dtype=float)


def assemble_tumbling_matrix(
    params: KernelParams, grid: VelocityGrid, epsilon: float
) -> TumblingMatrix:
    """Assemble the gain/loss matrix of the tumbling operator at scale epsilon.

    The diagonal loss term uses the same quadrature as the off-diagonal gain
    so that discrete mass conservation is exact rather than approximate.
    """
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    kmat = k0_matrix(params, grid) + epsilon * k1_matrix(params, grid)
    gain = grid.weights[None, :] * kmat
    loss = -(grid.weights[None, :] * kmat.T).sum(axis=1)
    entries = gain + np.diag(loss)
    entries.setflags(write=False)
    return TumblingMatrix(entries=entries, epsilon=float(epsilon))
