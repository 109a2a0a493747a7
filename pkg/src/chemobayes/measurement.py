"""Measurement operators, noise model, and synthetic data generation.

A measurement is the spatial average of a density snapshot against a
compactly supported test function: G[j, k] = integral of rho_k(x, t_j1)
times chi_j2(x), with rows ordered time-major (row = j1 * J2 + j2) and one
column per initial profile k.  For the kinetic model the density is the
velocity quadrature of the phase-space solution.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import keller_segel, kinetic
from .kernels import KernelParams
from .kinetic import SpatialGrid, make_initial_kinetic, solve_kinetic
from .keller_segel import MacroState, solve_ks
from .macro import compute_macro
from .velocity import VelocityGrid


class MissingSnapshotError(ValueError):
    """A requested measurement time has no matching snapshot."""


@dataclass(frozen=True)
class BumpTestFunction:
    """Quartic blob amplitude * max(0, 1 - ((x - center)/radius)^2)^2."""

    center: float
    radius: float
    amplitude: float = 1.0

    def values(self, x: np.ndarray) -> np.ndarray:
        u = (x - self.center) / self.radius
        return self.amplitude * np.maximum(0.0, 1.0 - u * u) ** 2

    def bound_norms(self) -> dict[str, float]:
        a, r = abs(self.amplitude), self.radius
        return {
            "l1": a * 16.0 * r / 15.0,
            "l2": a * float(np.sqrt(256.0 * r / 315.0)),
            "linf": a,
            "support": 2.0 * r,
        }


@dataclass(frozen=True)
class BoxTestFunction:
    """Constant test function covering the whole box (mass readout)."""

    amplitude: float = 1.0

    def values(self, x: np.ndarray) -> np.ndarray:
        return np.full_like(x, self.amplitude)

    def bound_norms(self) -> dict[str, float]:
        return {"linf": abs(self.amplitude)}


@dataclass(frozen=True)
class PointTestFunction:
    """Nearest-cell point evaluation (the pointwise-measurement variant)."""

    location: float

    def values(self, x: np.ndarray) -> np.ndarray:
        idx = int(np.argmin(np.abs(x - self.location)))
        h = float(x[1] - x[0])
        out = np.zeros_like(x)
        out[idx] = 1.0 / h  # integrates to a unit point mass
        return out

    def bound_norms(self) -> dict[str, float]:
        return {"l1": 1.0}


@dataclass(frozen=True)
class MeasurementSetup:
    """Test functions, measurement times, initial profiles and their bounds."""

    test_functions: tuple
    times: tuple[float, ...]
    initial_profiles: tuple
    c_x: float
    c_rho: float
    initial_velocity_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if any(t <= 0.0 for t in self.times):
            raise ValueError("measurement times must be positive")
        if list(self.times) != sorted(self.times):
            raise ValueError("measurement times must be sorted")
        for chi in self.test_functions:
            worst = max(chi.bound_norms().values())
            if worst > self.c_x + 1e-12:
                raise ValueError(
                    f"test function norms ({worst:.3g}) exceed the bound C_x = {self.c_x}"
                )

    @property
    def n_times(self) -> int:
        return len(self.times)

    @property
    def n_locations(self) -> int:
        return len(self.test_functions)

    @property
    def n_profiles(self) -> int:
        return len(self.initial_profiles)

    def velocity_weights(self, vgrid: VelocityGrid):
        if self.initial_velocity_weights is None:
            return None
        return np.asarray(self.initial_velocity_weights, dtype=float)

    def fingerprint(self) -> str:
        blob = json.dumps(
            {
                "times": list(self.times),
                "test_functions": [repr(chi) for chi in self.test_functions],
                "profiles": [repr(p) for p in self.initial_profiles],
                "c_x": self.c_x,
                "c_rho": self.c_rho,
                "q": list(self.initial_velocity_weights)
                if self.initial_velocity_weights is not None
                else None,
            },
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ForwardConfig:
    """Shared discretization and solver options for both forward models."""

    sgrid: SpatialGrid
    vgrid: VelocityGrid
    kinetic_scheme: str = "exact"
    kinetic_cfl: float | None = None
    relaxation: str = "cn"
    splitting: str = "lie"
    transport_order: int = 1
    ks_flux: str = "sg"
    ks_dt_target: float = keller_segel.DEFAULT_DT_TARGET

    def fingerprint(self) -> str:
        blob = json.dumps(
            {
                "n_cells": self.sgrid.n_cells,
                "length": self.sgrid.length,
                "vdim": self.vgrid.dim,
                "nv": self.vgrid.n_points,
                "scheme": self.kinetic_scheme,
                "cfl": self.kinetic_cfl,
                "relax": self.relaxation,
                "split": self.splitting,
                "order": self.transport_order,
                "ks_flux": self.ks_flux,
                "ks_dt": self.ks_dt_target,
            },
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ForwardDiagnostics:
    """Accumulates conservation and positivity diagnostics across solves."""

    max_mass_drift: float = 0.0
    min_density: float = np.inf
    n_solves: int = 0

    def record(self, initial_mass: float, masses, minima) -> None:
        for m in masses:
            drift = abs(m - initial_mass) / max(abs(initial_mass), 1e-300)
            self.max_mass_drift = max(self.max_mass_drift, drift)
        for v in minima:
            self.min_density = min(self.min_density, v)
        self.n_solves += 1


@dataclass(frozen=True)
class DataSet:
    """Noisy measurement matrix with its noise level and generator seed."""

    y: np.ndarray
    gamma: float
    seed: int

    def __post_init__(self):
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")


def measure(
    snapshots: list[MacroState], setup: MeasurementSetup, grid: SpatialGrid
) -> np.ndarray:
    """Measurement vector of one density trajectory, rows ordered time-major."""
    x = grid.centers()
    chi_values = [chi.values(x) for chi in setup.test_functions]
    out = np.empty(setup.n_times * setup.n_locations)
    for j1, t in enumerate(setup.times):
        state = next((s for s in snapshots if abs(s.time - t) < 1e-9), None)
        if state is None:
            raise MissingSnapshotError(f"no snapshot at measurement time {t}")
        for j2, chi in enumerate(chi_values):
            out[j1 * setup.n_locations + j2] = grid.h * float(state.values @ chi)
    return out


def g_chem(
    params: KernelParams,
    epsilon: float,
    setup: MeasurementSetup,
    fwd: ForwardConfig,
    diagnostics: ForwardDiagnostics | None = None,
) -> np.ndarray:
    """Kinetic-model measurement matrix, one column per initial profile."""
    t_final = max(setup.times)
    cols = []
    for profile in setup.initial_profiles:
        f0 = make_initial_kinetic(
            profile,
            fwd.sgrid,
            fwd.vgrid,
            velocity_weights=setup.velocity_weights(fwd.vgrid),
            c_rho=setup.c_rho,
        )
        states = solve_kinetic(
            f0,
            params,
            epsilon,
            t_final,
            snapshot_times=setup.times,
            grid=fwd.sgrid,
            vgrid=fwd.vgrid,
            scheme=fwd.kinetic_scheme,
            cfl=fwd.kinetic_cfl,
            relaxation=fwd.relaxation,
            splitting=fwd.splitting,
            transport_order=fwd.transport_order,
        )
        densities = [
            MacroState(values=kinetic.macro_density(s, fwd.vgrid), time=s.time)
            for s in states
        ]
        if diagnostics is not None:
            diagnostics.record(
                kinetic.total_mass(f0, fwd.sgrid, fwd.vgrid),
                [keller_segel.total_mass(d, fwd.sgrid) for d in densities],
                [float(s.values.min()) for s in states],
            )
        cols.append(measure(densities, setup, fwd.sgrid))
    return np.column_stack(cols)


def g_ks(
    params: KernelParams,
    setup: MeasurementSetup,
    fwd: ForwardConfig,
    diagnostics: ForwardDiagnostics | None = None,
) -> np.ndarray:
    """Keller-Segel measurement matrix via the macroscopic coefficients."""
    coeffs = compute_macro(params, fwd.vgrid, spatial_dim=1)
    t_final = max(setup.times)
    cols = []
    for profile in setup.initial_profiles:
        f0 = make_initial_kinetic(
            profile,
            fwd.sgrid,
            fwd.vgrid,
            velocity_weights=setup.velocity_weights(fwd.vgrid),
            c_rho=setup.c_rho,
        )
        rho0 = keller_segel.restrict_initial(f0, fwd.vgrid)
        states = solve_ks(
            rho0,
            coeffs,
            t_final,
            snapshot_times=setup.times,
            grid=fwd.sgrid,
            flux=fwd.ks_flux,
            dt_target=fwd.ks_dt_target,
        )
        if diagnostics is not None:
            diagnostics.record(
                keller_segel.total_mass(MacroState(rho0.values, 0.0), fwd.sgrid),
                [keller_segel.total_mass(s, fwd.sgrid) for s in states],
                [float(s.values.min()) for s in states],
            )
        cols.append(measure(states, setup, fwd.sgrid))
    return np.column_stack(cols)


def generate_data(g_truth: np.ndarray, gamma: float, seed: int) -> DataSet:
    """Additive iid Gaussian noise from a seeded generator; reproducible."""
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    rng = np.random.default_rng(seed)
    y = np.asarray(g_truth, dtype=float) + gamma * rng.standard_normal(
        np.shape(g_truth)
    )
    y.setflags(write=False)
    return DataSet(y=y, gamma=float(gamma), seed=int(seed))
