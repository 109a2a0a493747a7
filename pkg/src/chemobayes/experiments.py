"""Experiment orchestration: forward convergence study and the scaling sweep.

The default configuration is calibrated so that every study has a clean
signal at desk scale: the initial velocity distribution is deliberately
out of equilibrium (all mass right-moving), which makes the kinetic and
macroscopic densities differ at first order in the scaling parameter via
the initial relaxation layer; with velocity-equilibrated data the gap of
the two-velocity model is second order by parity and no first-order rate
can be observed.  Initial spatial profiles are truncated Gaussians so the
spectral kinetic propagator preserves nonnegativity to round-off.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
import time
from dataclasses import asdict, dataclass

import numpy as np

from ._version import __version__
from .bayes import (
    ForwardCache,
    ForwardModel,
    PosteriorGrid,
    PriorSpec,
    compute_forward_table,
    hellinger,
    kl_divergence,
    posterior_from_table,
)
from .kernels import KernelParams, check_admissible
from .keller_segel import restrict_initial, solve_ks
from .kinetic import (
    CompositeProfile,
    ConstantProfile,
    GaussBump,
    PolyBump,
    SpatialGrid,
    equilibrium_gap,
    macro_density,
    make_initial_kinetic,
    solve_kinetic,
)
from .macro import compute_macro
from .measurement import (
    BumpTestFunction,
    DataSet,
    ForwardConfig,
    ForwardDiagnostics,
    MeasurementSetup,
    PointTestFunction,
    generate_data,
    g_chem,
    g_ks,
)
from .velocity import build_velocity_grid


class ConfigError(ValueError):
    """Experiment configuration failed validation."""


_PROFILE_KINDS = {
    "gauss": GaussBump,
    "poly": PolyBump,
    "constant": ConstantProfile,
}


def _profile_from_dict(spec: dict):
    kind = spec.get("kind")
    if kind == "composite":
        return CompositeProfile(
            parts=tuple(_profile_from_dict(p) for p in spec["parts"])
        )
    if kind not in _PROFILE_KINDS:
        raise ConfigError(f"unknown profile kind {kind!r}")
    kwargs = {k: v for k, v in spec.items() if k != "kind"}
    return _PROFILE_KINDS[kind](**kwargs)


def _profile_to_dict(profile) -> dict:
    if isinstance(profile, CompositeProfile):
        return {"kind": "composite", "parts": [_profile_to_dict(p) for p in profile.parts]}
    for name, cls in _PROFILE_KINDS.items():
        if isinstance(profile, cls):
            return {"kind": name, **asdict(profile)}
    raise ConfigError(f"cannot serialize profile {profile!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of one numerical study; JSON-serializable."""

    # velocity and spatial discretization
    velocity_dimension: int = 1
    velocity_points: int = 2
    n_cells: int = 384
    domain_length: float = 24.0

    # kernel family and admissibility constants
    truth_lam: float = 1.0
    truth_beta: float = 0.3
    truth_extras: tuple[float, ...] = ()
    extra_basis: tuple[str, ...] = ("dot",)
    alpha: float = 0.1
    c_bound: float = 10.0

    # initial data: profile specs (one per experiment k) and velocity start
    initial_profiles: tuple[dict, ...] = (
        {"kind": "gauss", "center": -0.6, "sigma": 0.45, "truncation": 8.0},
        {
            "kind": "composite",
            "parts": [
                {"kind": "gauss", "center": -0.3, "sigma": 0.3, "truncation": 8.0},
                {"kind": "gauss", "center": 1.1, "sigma": 0.3, "truncation": 8.0},
            ],
        },
    )
    initial_velocity_weights: tuple[float, ...] | None = (0.0, 1.0)

    # measurement design
    measurement_times: tuple[float, ...] = (0.1, 0.3, 0.5)
    blob_centers: tuple[float, ...] = (-1.0, 0.2, 1.6)
    blob_radius: float = 1.0
    blob_amplitude: float = 1.0
    pointwise_measurements: bool = False
    c_x: float = 4.0
    c_rho: float = 1.2

    # noise and data
    gamma_scale: float = 0.01
    seed: int = 2025
    truth_model: str = "chem"  # data generated from the kinetic model at min eps

    # sweep and prior
    eps_list: tuple[float, ...] = (0.2, 0.1, 0.05)
    t_final: float = 0.5
    lam_range: tuple[float, float] = (0.5, 2.0)
    lam_count: int = 41
    beta_range: tuple[float, float] = (-0.6, 0.6)
    beta_count: int = 21
    extras_ranges: tuple[tuple[float, float], ...] = ()
    extras_counts: tuple[int, ...] = ()

    # solver options
    kinetic_scheme: str = "exact"
    kinetic_cfl: float | None = None
    relaxation: str = "cn"
    splitting: str = "lie"
    transport_order: int = 1
    ks_flux: str = "sg"
    ks_dt_target: float = 0.00125

    # forward-convergence study sample set (spanning the prior box)
    forward_samples: tuple[tuple[float, float], ...] = (
        (1.0, 0.3),
        (0.7, -0.45),
        (0.7, 0.45),
        (1.85, 0.45),
        (1.85, -0.45),
    )

    # diagnostic switch: evaluate the kinetic posterior with the macroscopic
    # forward map (posterior distances must then vanish identically)
    substitute_ks_for_chem: bool = False

    @property
    def gamma(self) -> float:
        return self.gamma_scale * self.c_x * self.c_rho

    # -- constructors for the domain objects ------------------------------

    def velocity_grid(self):
        return build_velocity_grid(self.velocity_dimension, self.velocity_points)

    def spatial_grid(self) -> SpatialGrid:
        return SpatialGrid(n_cells=self.n_cells, length=self.domain_length)

    def truth_params(self) -> KernelParams:
        return KernelParams(
            lam=self.truth_lam,
            beta=self.truth_beta,
            extras=self.truth_extras,
            extra_basis=self.extra_basis,
        )

    def profiles(self) -> tuple:
        return tuple(_profile_from_dict(spec) for spec in self.initial_profiles)

    def measurement_setup(self) -> MeasurementSetup:
        if self.pointwise_measurements:
            chis = tuple(PointTestFunction(location=c) for c in self.blob_centers)
        else:
            chis = tuple(
                BumpTestFunction(
                    center=c, radius=self.blob_radius, amplitude=self.blob_amplitude
                )
                for c in self.blob_centers
            )
        return MeasurementSetup(
            test_functions=chis,
            times=self.measurement_times,
            initial_profiles=self.profiles(),
            c_x=self.c_x,
            c_rho=self.c_rho,
            initial_velocity_weights=self.initial_velocity_weights,
        )

    def forward_config(self) -> ForwardConfig:
        return ForwardConfig(
            sgrid=self.spatial_grid(),
            vgrid=self.velocity_grid(),
            kinetic_scheme=self.kinetic_scheme,
            kinetic_cfl=self.kinetic_cfl,
            relaxation=self.relaxation,
            splitting=self.splitting,
            transport_order=self.transport_order,
            ks_flux=self.ks_flux,
            ks_dt_target=self.ks_dt_target,
        )

    def prior(self) -> PriorSpec:
        return PriorSpec(
            lam_range=self.lam_range,
            lam_count=self.lam_count,
            beta_range=self.beta_range,
            beta_count=self.beta_count,
            extras_ranges=self.extras_ranges,
            extras_counts=self.extras_counts,
            extra_basis=self.extra_basis,
        )

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        out = asdict(self)
        out["initial_profiles"] = [dict(p) for p in self.initial_profiles]
        return out

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        known = {f for f in ExperimentConfig.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        for key, value in kwargs.items():
            if isinstance(value, list):
                if key == "initial_profiles":
                    kwargs[key] = tuple(value)
                elif value and isinstance(value[0], list):
                    kwargs[key] = tuple(tuple(v) for v in value)
                else:
                    kwargs[key] = tuple(value)
        return ExperimentConfig(**kwargs)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    # -- validation ----------------------------------------------------------

    def validate(self) -> None:
        problems = []
        eps = self.eps_list
        if not eps or any(e <= 0 for e in eps):
            problems.append("eps list must contain positive values")
        if not all(e1 > e2 for e1, e2 in zip(eps, eps[1:])):
            problems.append("eps list must be strictly decreasing")
        if not (self.lam_range[0] <= self.truth_lam <= self.lam_range[1]):
            problems.append("truth lam outside the prior box")
        if not (self.beta_range[0] <= self.truth_beta <= self.beta_range[1]):
            problems.append("truth beta outside the prior box")
        if self.truth_model not in ("chem", "ks"):
            problems.append("truth_model must be 'chem' or 'ks'")

        try:
            vgrid = self.velocity_grid()
            sgrid = self.spatial_grid()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

        # every prior node must be admissible; the kernel is affine in its
        # coefficients so the box corners are the extreme cases
        corner_axes = [self.lam_range, self.beta_range, *self.extras_ranges]
        corners = [
            KernelParams(
                lam=c[0], beta=c[1], extras=tuple(c[2:]), extra_basis=self.extra_basis
            )
            for c in itertools.product(*corner_axes)
        ]
        for p in corners:
            report = check_admissible(p, vgrid, self.alpha, self.c_bound)
            if not report.passed:
                problems.append(f"prior corner {p} inadmissible: {report.violations}")

        # periodic box must hold the initial support plus drift plus
        # diffusive spread (6 standard deviations) for any prior node
        d_max, drift_max = 0.0, 0.0
        if not problems:
            for p in corners:
                coeffs = compute_macro(p, vgrid, spatial_dim=1)
                d_max = max(d_max, coeffs.diffusion_scalar)
                drift_max = max(drift_max, abs(coeffs.drift_scalar))
        spread = 6.0 * np.sqrt(2.0 * d_max * self.t_final) + drift_max * self.t_final
        for spec in self.initial_profiles:
            profile = _profile_from_dict(spec)
            reach = profile.support_radius() + spread
            if reach > 0.5 * sgrid.length:
                problems.append(
                    f"profile {spec} may reach the periodic boundary: needs "
                    f"half-length {reach:.2f}, box has {0.5 * sgrid.length:.2f}"
                )

        if any(t > self.t_final + 1e-12 for t in self.measurement_times):
            problems.append("measurement times exceed t_final")

        try:
            self.measurement_setup()
        except ValueError as exc:
            problems.append(str(exc))

        if problems:
            raise ConfigError("; ".join(problems))


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


# ---------------------------------------------------------------------------
# forward convergence study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ForwardConvergenceRow:
    lam: float
    beta: float
    eps: float
    err_inf: float
    err_l1: float
    equilibrium_gap: float


def forward_errors(
    config: ExperimentConfig, params: KernelParams, eps: float
) -> tuple[float, float, float]:
    """Max-over-snapshots density gaps between the two models at one node."""
    sgrid = config.spatial_grid()
    vgrid = config.velocity_grid()
    setup = config.measurement_setup()
    fwd = config.forward_config()
    coeffs = compute_macro(params, vgrid, spatial_dim=1)
    err_inf = err_l1 = eq_gap = 0.0
    for profile in setup.initial_profiles:
        f0 = make_initial_kinetic(
            profile, sgrid, vgrid,
            velocity_weights=setup.velocity_weights(vgrid), c_rho=setup.c_rho,
        )
        kin = solve_kinetic(
            f0, params, eps, config.t_final, snapshot_times=setup.times,
            grid=sgrid, vgrid=vgrid, scheme=fwd.kinetic_scheme, cfl=fwd.kinetic_cfl,
            relaxation=fwd.relaxation, splitting=fwd.splitting,
            transport_order=fwd.transport_order,
        )
        mac = solve_ks(
            restrict_initial(f0, vgrid), coeffs, config.t_final,
            snapshot_times=setup.times, grid=sgrid, flux=fwd.ks_flux,
            dt_target=fwd.ks_dt_target,
        )
        for fstate, rstate in zip(kin, mac):
            gap = macro_density(fstate, vgrid) - rstate.values
            err_inf = max(err_inf, float(np.max(np.abs(gap))))
            err_l1 = max(err_l1, sgrid.h * float(np.sum(np.abs(gap))))
            eq_gap = max(eq_gap, equilibrium_gap(fstate, vgrid))
    return err_inf, err_l1, eq_gap


def run_forward_convergence(config: ExperimentConfig) -> list[ForwardConvergenceRow]:
    """Kinetic-vs-macroscopic density gaps for each sample and each epsilon."""
    config.validate()
    rows = []
    for lam, beta in config.forward_samples:
        params = KernelParams(lam=lam, beta=beta)
        for eps in config.eps_list:
            err_inf, err_l1, eq_gap = forward_errors(config, params, eps)
            rows.append(
                ForwardConvergenceRow(
                    lam=lam, beta=beta, eps=eps,
                    err_inf=err_inf, err_l1=err_l1, equilibrium_gap=eq_gap,
                )
            )
    return rows


# ---------------------------------------------------------------------------
# posterior sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EpsRecord:
    eps: float
    forward_error_inf: float
    forward_error_l1: float
    measurement_gap: float
    kl_forward: float
    kl_reverse: float
    hellinger: float
    log_z_chem: float


@dataclass(frozen=True)
class SweepResult:
    config: ExperimentConfig
    records: tuple[EpsRecord, ...]
    log_z_ks: float
    data_y: np.ndarray
    gamma: float
    seed: int
    max_mass_drift_chem: float
    max_mass_drift_ks: float
    min_density_chem: float | None
    min_density_ks: float | None
    runtimes: dict

    def empirical_orders(self) -> dict:
        """Fitted slopes of log(metric) against log(eps); reported only,
        never asserted (the underlying statements are qualitative)."""
        out = {}
        eps = np.log([r.eps for r in self.records])
        if eps.size < 2:
            return out
        for name in ("kl_forward", "kl_reverse", "hellinger", "measurement_gap"):
            vals = np.array([getattr(r, name) for r in self.records])
            if np.all(vals > 0.0):
                out[name] = float(np.polyfit(eps, np.log(vals), 1)[0])
        return out

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "config_hash": self.config.config_hash(),
            "version": __version__,
            "data": {
                "y": self.data_y.tolist(),
                "gamma": self.gamma,
                "seed": self.seed,
            },
            "log_z_ks": self.log_z_ks,
            "z_ks": float(np.exp(self.log_z_ks)),
            "empirical_orders": self.empirical_orders(),
            "per_eps": [
                {**asdict(r), "z_chem": float(np.exp(r.log_z_chem))}
                for r in self.records
            ],
            # audits cover the solves actually performed in this run; nodes
            # served from a warm cache are not re-audited
            "diagnostics": {
                "max_mass_drift_chem": self.max_mass_drift_chem,
                "max_mass_drift_ks": self.max_mass_drift_ks,
                "min_density_chem": self.min_density_chem,
                "min_density_ks": self.min_density_ks,
            },
            "runtimes": self.runtimes,
        }


def run_posterior_sweep(
    config: ExperimentConfig,
    cache_dir: str | None = None,
    n_workers: int = 1,
) -> SweepResult:
    """Build the kinetic posterior per epsilon and the macroscopic posterior
    once, all against one shared data set, and record their distances."""
    config.validate()
    t_start = time.perf_counter()
    setup = config.measurement_setup()
    fwd = config.forward_config()
    prior = config.prior()
    truth = config.truth_params()
    cache = ForwardCache(cache_dir) if cache_dir else None
    runtimes: dict = {}

    # shared data: truth forwarded through the most microscopic swept model
    eps_min = min(config.eps_list)
    if config.truth_model == "chem":
        g_truth = g_chem(truth, eps_min, setup, fwd)
    else:
        g_truth = g_ks(truth, setup, fwd)
    data = generate_data(g_truth, config.gamma, config.seed)

    diag_ks = ForwardDiagnostics()
    t0 = time.perf_counter()
    ks_table = compute_forward_table(
        ForwardModel("ks"), prior, setup, fwd,
        cache=cache, n_workers=n_workers, diagnostics=diag_ks,
    )
    posterior_ks = posterior_from_table(prior, ks_table, data, model_label="ks")
    runtimes["ks_posterior"] = time.perf_counter() - t0

    g_ks_truth = g_ks(truth, setup, fwd)
    diag_chem = ForwardDiagnostics()
    records = []
    runtimes["per_eps"] = {}
    for eps in config.eps_list:
        t0 = time.perf_counter()
        if config.substitute_ks_for_chem:
            chem_table = ks_table
        else:
            chem_table = compute_forward_table(
                ForwardModel("chem", eps), prior, setup, fwd,
                cache=cache, n_workers=n_workers, diagnostics=diag_chem,
            )
        posterior_chem = posterior_from_table(
            prior, chem_table, data, model_label=f"chem@{eps:g}"
        )
        err_inf, err_l1, _ = forward_errors(config, truth, eps)
        gap = float(np.max(np.abs(g_chem(truth, eps, setup, fwd) - g_ks_truth)))
        records.append(
            EpsRecord(
                eps=eps,
                forward_error_inf=err_inf,
                forward_error_l1=err_l1,
                measurement_gap=gap,
                kl_forward=kl_divergence(posterior_chem, posterior_ks),
                kl_reverse=kl_divergence(posterior_ks, posterior_chem),
                hellinger=hellinger(posterior_chem, posterior_ks),
                log_z_chem=posterior_chem.log_z,
            )
        )
        runtimes["per_eps"][f"{eps:g}"] = time.perf_counter() - t0

    runtimes["total"] = time.perf_counter() - t_start
    return SweepResult(
        config=config,
        records=tuple(records),
        log_z_ks=posterior_ks.log_z,
        data_y=data.y,
        gamma=data.gamma,
        seed=data.seed,
        max_mass_drift_chem=diag_chem.max_mass_drift,
        max_mass_drift_ks=diag_ks.max_mass_drift,
        min_density_chem=diag_chem.min_density if diag_chem.n_solves else None,
        min_density_ks=diag_ks.min_density if diag_ks.n_solves else None,
        runtimes=runtimes,
    )


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

_PLOT_METRICS = (
    "kl_forward",
    "kl_reverse",
    "hellinger",
    "forward_error_inf",
    "forward_error_l1",
    "measurement_gap",
)


def emit_report(result: SweepResult, out_dir: str) -> list[str]:
    """Write results.json, results.csv, and per-metric plot data files."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    json_path = os.path.join(out_dir, "results.json")
    with open(json_path, "w") as fh:
        json.dump(result.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    written.append(json_path)

    csv_path = os.path.join(out_dir, "results.csv")
    columns = ["eps", *_PLOT_METRICS, "log_z_chem", "log_z_ks"]
    with open(csv_path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for rec in result.records:
            row = [repr(rec.eps)]
            for name in _PLOT_METRICS:
                row.append(repr(getattr(rec, name)))
            row.append(repr(rec.log_z_chem))
            row.append(repr(result.log_z_ks))
            fh.write(",".join(row) + "\n")
    written.append(csv_path)

    plot_dir = os.path.join(out_dir, "plotdata")
    os.makedirs(plot_dir, exist_ok=True)
    for name in _PLOT_METRICS:
        path = os.path.join(plot_dir, f"{name}.csv")
        with open(path, "w") as fh:
            fh.write("eps," + name + "\n")
            for rec in result.records:
                fh.write(f"{rec.eps!r},{getattr(rec, name)!r}\n")
        written.append(path)
    return written


def strip_runtimes(report: dict) -> dict:
    """Copy of a results dictionary without its runtime fields, for
    byte-level determinism comparisons."""
    out = json.loads(json.dumps(report))
    out.pop("runtimes", None)
    return out
