#!/usr/bin/env python3
"""Why the experiments use the exact constant-coefficient propagator.

The split scheme (relaxation substep + upwind transport at unit CFL) is the
textbook discretization, but its effective diffusion is enhanced by
(x/2) coth(x/2) with x = 2 lam h / eps when the relaxation substep uses the
exact matrix exponential: the relaxation is frozen between shifts, so the
walkers keep their velocity for a full step and over-diffuse.  Replacing the
exponential with the Crank-Nicolson factor makes the lattice diffusion exact
for the two-velocity model.  This script measures both variants against the
exact propagator.
"""

import numpy as np

from chemobayes import (
    GaussBump,
    KernelParams,
    SpatialGrid,
    build_velocity_grid,
    compute_macro,
    macro_density,
    make_initial_kinetic,
    solve_kinetic,
)

sgrid = SpatialGrid(n_cells=384, length=24.0)
vgrid = build_velocity_grid(1, 2)
params = KernelParams(lam=1.0, beta=0.0)
two_d = 2.0 * compute_macro(params, vgrid).diffusion_scalar
f0 = make_initial_kinetic(GaussBump(center=0.0, sigma=0.45), sgrid, vgrid)
x = sgrid.centers()
times = [0.1, 0.2, 0.3, 0.4, 0.5]
eps = 0.05


def variance_rate(states):
    variances = [sgrid.h * float((x**2) @ macro_density(s, vgrid)) for s in states]
    return np.polyfit(times, variances, 1)[0]


print(f"target variance growth rate 2D = {two_d}")
print(f"lattice parameter x = 2 lam h / eps = {2 * sgrid.h / eps:.3f}\n")
print(f"{'scheme':<28} {'variance rate':>14} {'relative error':>15}")
for label, kwargs in [
    ("exact propagator", dict(scheme="exact")),
    ("split + Crank-Nicolson", dict(scheme="split", relaxation="cn", splitting="lie")),
    ("split + matrix exponential", dict(scheme="split", relaxation="expm", splitting="strang")),
]:
    states = solve_kinetic(
        f0, params, eps, 0.5, snapshot_times=times, grid=sgrid, vgrid=vgrid, **kwargs
    )
    rate = variance_rate(states)
    print(f"{label:<28} {rate:14.6f} {abs(rate - two_d) / two_d:15.2%}")

xval = 2 * sgrid.h / eps
print(f"\npredicted exponential-relaxation enhancement (x/2) coth(x/2) "
      f"= {0.5 * xval / np.tanh(0.5 * xval):.4f}")
print("The convergence study needs errors far below the physical gaps, which")
print("is why the experiment paths default to the exact propagator.")
