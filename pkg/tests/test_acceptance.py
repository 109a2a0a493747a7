"""Acceptance suite: every criterion at its stated tolerance, one printed
pass/fail line per criterion."""

import dataclasses
import json
import time

import numpy as np
import pytest

from chemobayes.bayes import (
    ForwardModel,
    PosteriorGrid,
    PriorSpec,
    compute_forward_table,
    hellinger,
    kl_divergence,
    log_z_lower_bound,
    posterior_from_table,
)
from chemobayes.kernels import KernelParams
from chemobayes.kinetic import GaussBump, macro_density, make_initial_kinetic, solve_kinetic
from chemobayes.macro import compute_macro
from chemobayes.measurement import DataSet, g_chem, g_ks
from chemobayes.experiments import (
    default_config,
    emit_report,
    run_forward_convergence,
    run_posterior_sweep,
    strip_runtimes,
)

EPS_SWEEP = (0.2, 0.1, 0.05)


def _report(criterion: str, passed: bool, detail: str) -> None:
    print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} - {detail}")
    assert passed, detail


@pytest.fixture(scope="module")
def config():
    return default_config()


@pytest.fixture(scope="module")
def ks_table_and_data(config, default_sweep):
    """KS forward table on the default prior, plus the sweep's shared data."""
    table = compute_forward_table(
        ForwardModel("ks"), config.prior(), config.measurement_setup(),
        config.forward_config(),
    )
    data = DataSet(y=default_sweep.data_y, gamma=default_sweep.gamma,
                   seed=default_sweep.seed)
    return table, data


def test_criterion_1_macro_coefficient_oracle(config):
    t0 = time.perf_counter()
    vgrid = config.velocity_grid()
    worst = 0.0
    for lam, beta in [(1.0, 0.0), (1.0, 0.3), (2.0, 0.3), (0.5, -0.2)]:
        coeffs = compute_macro(KernelParams(lam=lam, beta=beta), vgrid)
        worst = max(
            worst,
            abs(coeffs.diffusion_scalar - 1.0 / (2.0 * lam)),
            abs(coeffs.drift_scalar - 2.0 * beta / lam),
        )
    elapsed = time.perf_counter() - t0
    _report(
        "1",
        worst <= 1e-12 and elapsed < 1.0,
        f"closed-form deviation {worst:.2e} (tol 1e-12), runtime {elapsed:.3f}s (< 1s)",
    )


def test_criterion_2_dynamics_consistency(config):
    t0 = time.perf_counter()
    vgrid = config.velocity_grid()
    sgrid = config.spatial_grid()
    params = KernelParams(lam=1.0, beta=0.3)
    coeffs = compute_macro(params, vgrid)
    gamma, two_d = coeffs.drift_scalar, 2.0 * coeffs.diffusion_scalar

    f0 = make_initial_kinetic(GaussBump(center=0.0, sigma=0.45), sgrid, vgrid)
    times = [0.1, 0.2, 0.3, 0.4, 0.5]
    states = solve_kinetic(
        f0, params, 0.05, 0.5, snapshot_times=times, grid=sgrid, vgrid=vgrid,
        scheme=config.kinetic_scheme,
    )
    x = sgrid.centers()
    centroids, variances = [0.0], []
    rho0 = macro_density(f0, vgrid)
    mass = sgrid.h * rho0.sum()
    c0 = sgrid.h * float(x @ rho0) / mass
    centroids = [c0]
    variances = [sgrid.h * float(((x - c0) ** 2) @ rho0) / mass]
    for s in states:
        rho = macro_density(s, vgrid)
        c = sgrid.h * float(x @ rho) / mass
        centroids.append(c)
        variances.append(sgrid.h * float(((x - c) ** 2) @ rho) / mass)
    tt = np.array([0.0] + times)
    drift_rate = np.polyfit(tt, centroids, 1)[0]
    var_rate = np.polyfit(tt, variances, 1)[0]
    drift_err = abs(drift_rate - gamma) / abs(gamma)
    var_err = abs(var_rate - two_d) / two_d
    elapsed = time.perf_counter() - t0
    _report(
        "2",
        drift_err <= 0.05 and var_err <= 0.05 and elapsed < 60.0,
        f"drift rate off by {drift_err:.2%}, variance rate off by {var_err:.2%} "
        f"(tol 5%), runtime {elapsed:.1f}s (< 60s)",
    )


def test_criterion_3_forward_diffusion_limit(config):
    t0 = time.perf_counter()
    rows = run_forward_convergence(config)
    by_sample: dict[tuple, list] = {}
    for row in rows:
        by_sample.setdefault((row.lam, row.beta), []).append(row)
    ok = True
    details = []
    for (lam, beta), sample_rows in by_sample.items():
        errs = [r.err_inf for r in sorted(sample_rows, key=lambda r: -r.eps)]
        decreasing = all(a > b for a, b in zip(errs, errs[1:]))
        ratios = [a / b for a, b in zip(errs, errs[1:])]
        in_band = all(1.5 <= r <= 2.6 for r in ratios)
        ok = ok and decreasing and in_band
        details.append(f"({lam},{beta}): ratios {[f'{r:.2f}' for r in ratios]}")
    elapsed = time.perf_counter() - t0
    _report(
        "3",
        ok and elapsed < 300.0,
        f"{'; '.join(details)}; runtime {elapsed:.1f}s (< 300s)",
    )


def test_criterion_4_conservation_and_positivity(default_sweep):
    drift = max(default_sweep.max_mass_drift_chem, default_sweep.max_mass_drift_ks)
    min_density = min(default_sweep.min_density_chem, default_sweep.min_density_ks)
    _report(
        "4",
        drift <= 1e-11 and min_density >= -1e-12,
        f"max relative mass drift {drift:.2e} (tol 1e-11), "
        f"min density {min_density:.2e} (tol -1e-12), every solve in the sweep",
    )


def test_criterion_5_measurement_lemmas(config):
    t0 = time.perf_counter()
    setup = config.measurement_setup()
    fwd = config.forward_config()
    bound = config.c_x * config.c_rho
    rng = np.random.default_rng(config.seed)
    pairs = [
        (
            KernelParams(
                lam=rng.uniform(*config.lam_range), beta=rng.uniform(*config.beta_range)
            ),
            KernelParams(
                lam=rng.uniform(*config.lam_range), beta=rng.uniform(*config.beta_range)
            ),
        )
        for _ in range(20)
    ]

    max_abs_g = 0.0
    quotients = {}
    for eps in EPS_SWEEP:
        worst = 0.0
        for pa, pb in pairs:
            ga = g_chem(pa, eps, setup, fwd)
            gb = g_chem(pb, eps, setup, fwd)
            max_abs_g = max(max_abs_g, float(np.abs(ga).max()), float(np.abs(gb).max()))
            # kernel-sup-norm distance: |d_lam| for the symmetric part,
            # 2 |d_beta| max|v - v'| / 2 = 2 |d_beta| for the antisymmetric one
            dist = max(abs(pa.lam - pb.lam), 2.0 * abs(pa.beta - pb.beta))
            worst = max(worst, float(np.max(np.abs(ga - gb))) / dist)
        quotients[eps] = worst

    truth = config.truth_params()
    ks = g_ks(truth, setup, fwd)
    max_abs_g = max(max_abs_g, float(np.abs(ks).max()))
    gaps = [float(np.max(np.abs(g_chem(truth, e, setup, fwd) - ks))) for e in EPS_SWEEP]
    gaps_decreasing = all(a > b for a, b in zip(gaps, gaps[1:]))

    bounded = max_abs_g <= bound
    lipschitz_ok = all(np.isfinite(q) for q in quotients.values()) and (
        quotients[0.05] <= 2.0 * quotients[0.2]
    )
    elapsed = time.perf_counter() - t0
    _report(
        "5",
        bounded and lipschitz_ok and gaps_decreasing and elapsed < 300.0,
        f"max |G| {max_abs_g:.3f} <= {bound}; Lipschitz quotients "
        f"{ {e: round(q, 3) for e, q in quotients.items()} } with "
        f"q(0.05)/q(0.2) = {quotients[0.05] / quotients[0.2]:.2f} (<= 2); "
        f"gaps {[f'{g:.4f}' for g in gaps]} strictly decreasing; "
        f"runtime {elapsed:.1f}s (< 300s)",
    )


def test_criterion_6_posterior_well_posedness(config, default_sweep, ks_table_and_data):
    t0 = time.perf_counter()
    table, data = ks_table_and_data
    prior = config.prior()

    log_z_values = [default_sweep.log_z_ks] + [
        r.log_z_chem for r in default_sweep.records
    ]
    neg_b = log_z_lower_bound(data, config.c_x, config.c_rho)
    z_ok = all(neg_b <= lz <= 0.0 for lz in log_z_values)

    base = posterior_from_table(prior, table, data)

    def perturbed(delta):
        shifted = DataSet(y=data.y + delta, gamma=data.gamma, seed=data.seed)
        return posterior_from_table(prior, table, shifted)

    h_full = hellinger(perturbed(1e-3), base)
    h_half = hellinger(perturbed(5e-4), base)
    ratio = h_full / h_half
    ratio_ok = 1.6 <= ratio <= 2.4
    elapsed = time.perf_counter() - t0
    _report(
        "6",
        z_ok and ratio_ok and elapsed < 300.0,
        f"log Z in [-B, 0] with -B = {neg_b:.3g} for all posteriors; "
        f"Hellinger(1e-3)/Hellinger(5e-4) = {ratio:.3f} in [1.6, 2.4]; "
        f"runtime {elapsed:.1f}s (< 300s)",
    )


def test_criterion_7_posterior_convergence(default_sweep):
    records = sorted(default_sweep.records, key=lambda r: -r.eps)
    kls = [r.kl_forward for r in records]
    klrs = [r.kl_reverse for r in records]
    hells = [r.hellinger for r in records]
    decreasing = (
        all(a > b for a, b in zip(kls, kls[1:]))
        and all(a > b for a, b in zip(klrs, klrs[1:]))
        and all(a > b for a, b in zip(hells, hells[1:]))
    )
    halving = hells[-1] <= 0.5 * hells[0]
    bound = all(
        r.hellinger**2 <= r.kl_forward + 1e-12
        and r.hellinger**2 <= r.kl_reverse + 1e-12
        for r in records
    )
    runtime = default_sweep.runtimes["total"]
    _report(
        "7",
        decreasing and halving and bound and runtime < 900.0,
        f"KL {[f'{v:.4f}' for v in kls]} and Hellinger {[f'{v:.4f}' for v in hells]} "
        f"strictly decreasing; Hell(0.05)/Hell(0.2) = {hells[-1] / hells[0]:.3f} (<= 0.5); "
        f"Hellinger^2 <= KL everywhere; sweep runtime {runtime:.0f}s (< 900s)",
    )


def test_criterion_8_metric_unit_values(config):
    prior = PriorSpec(lam_range=(1.0, 2.0), lam_count=2)
    pm = prior.prior_masses()
    p = PosteriorGrid.from_log_likelihoods(prior, np.log(np.array([0.5, 0.5]) / pm))
    q = PosteriorGrid.from_log_likelihoods(prior, np.log(np.array([0.25, 0.75]) / pm))

    kl_value = kl_divergence(p, q)
    kl_oracle = 0.5 * np.log(2.0) + 0.5 * np.log(2.0 / 3.0)  # direct two-term sum
    kl_ok = abs(kl_value - kl_oracle) <= 1e-12 and abs(kl_value - 0.143841) <= 1e-5

    hell_value = hellinger(p, q)
    # direct two-term sum of the defining formula
    hell_oracle = np.sqrt(
        0.5 * ((np.sqrt(0.5) - np.sqrt(0.25)) ** 2 + (np.sqrt(0.5) - np.sqrt(0.75)) ** 2)
    )
    hell_ok = abs(hell_value - hell_oracle) <= 1e-12 and abs(hell_value - 0.184592) <= 1e-5

    identity_ok = kl_divergence(p, p) == 0.0 and hellinger(q, q) == 0.0

    # diagnostic substitution: scoring the kinetic posterior with the
    # macroscopic forward map must give exactly coincident posteriors
    sub_cfg = dataclasses.replace(
        default_config(),
        substitute_ks_for_chem=True,
        eps_list=(0.2,),
        lam_count=5,
        beta_count=3,
    )
    sub = run_posterior_sweep(sub_cfg)
    substitution_ok = all(
        r.kl_forward == 0.0 and r.kl_reverse == 0.0 and r.hellinger == 0.0
        for r in sub.records
    )

    _report(
        "8",
        kl_ok and hell_ok and identity_ok and substitution_ok,
        f"KL two-node {kl_value:.6f} (oracle {kl_oracle:.6f}); "
        f"Hellinger two-node {hell_value:.6f} (oracle {hell_oracle:.6f}); "
        f"identities exactly 0; likelihood substitution gives KL = Hellinger = 0",
    )


def test_criterion_9_determinism(tmp_path, config, default_sweep):
    rerun = run_posterior_sweep(config)
    emit_report(default_sweep, str(tmp_path / "a"))
    emit_report(rerun, str(tmp_path / "b"))
    with open(tmp_path / "a" / "results.json") as fh:
        ra = strip_runtimes(json.load(fh))
    with open(tmp_path / "b" / "results.json") as fh:
        rb = strip_runtimes(json.load(fh))
    bytes_a = json.dumps(ra, sort_keys=True).encode()
    bytes_b = json.dumps(rb, sort_keys=True).encode()
    _report(
        "9",
        bytes_a == bytes_b,
        f"two sweeps with identical config and seed agree byte-for-byte "
        f"({len(bytes_a)} bytes, runtimes excluded)",
    )
