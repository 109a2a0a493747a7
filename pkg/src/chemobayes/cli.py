"""Command-line interface.

Subcommands mirror the library surface: forward solves, coefficient
extraction, data generation, posterior construction, posterior comparison,
and the full scaling sweep.  Exit codes: 0 success, 2 configuration
problems, 3 numerical failures (the offending node or setting is printed
on standard error).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .bayes import (
    ForwardCache,
    ForwardModel,
    NodeEvaluationError,
    PosteriorGrid,
    PriorSpec,
    build_posterior,
    hellinger,
    kl_divergence,
)
from .kernels import KernelParams
from .keller_segel import restrict_initial, solve_ks
from .kinetic import macro_density, make_initial_kinetic, solve_kinetic
from .macro import CellProblemError, compute_macro, solve_cells
from .measurement import DataSet, generate_data, g_chem
from .experiments import (
    ConfigError,
    ExperimentConfig,
    default_config,
    emit_report,
    run_posterior_sweep,
)


class NumericalFailure(RuntimeError):
    pass


def _load_config(path: str | None, seed: int | None = None) -> ExperimentConfig:
    if path is None:
        config = default_config()
    else:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        config = ExperimentConfig.from_dict(raw)
    if seed is not None:
        config = dataclasses.replace(config, seed=seed)
    config.validate()
    return config


def _write_density_csv(path: str, x: np.ndarray, rho: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write("x,rho\n")
        for xi, ri in zip(x, rho):
            fh.write(f"{xi!r},{ri!r}\n")


def _params_from_arg(arg: str | None, config: ExperimentConfig) -> KernelParams:
    if arg is None:
        return config.truth_params()
    pieces = [float(p) for p in arg.split(",")]
    if len(pieces) == 1:
        return KernelParams(lam=pieces[0])
    return KernelParams(lam=pieces[0], beta=pieces[1], extras=tuple(pieces[2:]))


def _cmd_forward_kinetic(args) -> int:
    config = _load_config(args.config, args.seed)
    params = _params_from_arg(args.params, config)
    eps = args.eps if args.eps is not None else min(config.eps_list)
    setup = config.measurement_setup()
    fwd = config.forward_config()
    os.makedirs(args.out, exist_ok=True)
    x = fwd.sgrid.centers()
    for k, profile in enumerate(setup.initial_profiles):
        f0 = make_initial_kinetic(
            profile, fwd.sgrid, fwd.vgrid,
            velocity_weights=setup.velocity_weights(fwd.vgrid), c_rho=setup.c_rho,
        )
        states = solve_kinetic(
            f0, params, eps, config.t_final, snapshot_times=setup.times,
            grid=fwd.sgrid, vgrid=fwd.vgrid, scheme=fwd.kinetic_scheme,
            cfl=fwd.kinetic_cfl, relaxation=fwd.relaxation,
            splitting=fwd.splitting, transport_order=fwd.transport_order,
        )
        for state in states:
            path = os.path.join(args.out, f"kinetic_rho_k{k}_t{state.time:.4f}.csv")
            _write_density_csv(path, x, macro_density(state, fwd.vgrid))
    print(f"wrote {len(setup.initial_profiles) * len(setup.times)} snapshots to {args.out}")
    return 0


def _cmd_forward_ks(args) -> int:
    config = _load_config(args.config, args.seed)
    params = _params_from_arg(args.params, config)
    setup = config.measurement_setup()
    fwd = config.forward_config()
    coeffs = compute_macro(params, fwd.vgrid, spatial_dim=1)
    os.makedirs(args.out, exist_ok=True)
    x = fwd.sgrid.centers()
    for k, profile in enumerate(setup.initial_profiles):
        f0 = make_initial_kinetic(
            profile, fwd.sgrid, fwd.vgrid,
            velocity_weights=setup.velocity_weights(fwd.vgrid), c_rho=setup.c_rho,
        )
        states = solve_ks(
            restrict_initial(f0, fwd.vgrid), coeffs, config.t_final,
            snapshot_times=setup.times, grid=fwd.sgrid, flux=fwd.ks_flux,
            dt_target=fwd.ks_dt_target,
        )
        for state in states:
            path = os.path.join(args.out, f"ks_rho_k{k}_t{state.time:.4f}.csv")
            _write_density_csv(path, x, state.values)
    print(f"wrote {len(setup.initial_profiles) * len(setup.times)} snapshots to {args.out}")
    return 0


def _cmd_coeffs(args) -> int:
    config = _load_config(args.config, args.seed)
    params = _params_from_arg(args.params, config)
    vgrid = config.velocity_grid()
    cells = solve_cells(params, vgrid, spatial_dim=1)
    coeffs = compute_macro(params, vgrid, spatial_dim=1)
    print(
        json.dumps(
            {
                "params": {"lam": params.lam, "beta": params.beta, "extras": list(params.extras)},
                "diffusion": coeffs.diffusion.tolist(),
                "drift": coeffs.drift.tolist(),
                "kappa": cells.kappa.tolist(),
                "theta": cells.theta.tolist(),
                "residuals": {
                    "kappa": cells.kappa_residual,
                    "theta": cells.theta_residual,
                },
            },
            indent=2,
            sort_keys=True,
        )
    )
    return 0


def _cmd_generate_data(args) -> int:
    config = _load_config(args.config, args.seed)
    setup = config.measurement_setup()
    fwd = config.forward_config()
    truth = config.truth_params()
    eps_min = min(config.eps_list)
    if config.truth_model == "chem":
        g_truth = g_chem(truth, eps_min, setup, fwd)
    else:
        from .measurement import g_ks

        g_truth = g_ks(truth, setup, fwd)
    data = generate_data(g_truth, config.gamma, config.seed)
    payload = {
        "setup_hash": setup.fingerprint(),
        "gamma": data.gamma,
        "seed": data.seed,
        "y": data.y.tolist(),
    }
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote data set with shape {data.y.shape} to {args.out}")
    return 0


def _posterior_payload(config: ExperimentConfig, post: PosteriorGrid, vgrid) -> dict:
    # push-forward of the posterior to the macroscopic coefficients,
    # emitted as a diagnostic alongside the parameter-space grid
    dg = [
        (
            compute_macro(p, vgrid, spatial_dim=1).diffusion_scalar,
            compute_macro(p, vgrid, spatial_dim=1).drift_scalar,
        )
        for p in post.node_params()
    ]
    mp = post.map_params()
    return {
        "prior": {
            "lam_range": list(post.prior.lam_range),
            "lam_count": post.prior.lam_count,
            "beta_range": list(post.prior.beta_range),
            "beta_count": post.prior.beta_count,
        },
        "model": post.model,
        "log_likelihoods": post.log_likelihoods.tolist(),
        "weights": post.weights.tolist(),
        "log_z": post.log_z,
        "z": float(np.exp(post.log_z)),
        "map": {"lam": mp.lam, "beta": mp.beta},
        "mean": post.mean(),
        "pushforward_diffusion": [d for d, _ in dg],
        "pushforward_drift": [g for _, g in dg],
    }


def _posterior_from_payload(payload: dict) -> PosteriorGrid:
    prior = PriorSpec(
        lam_range=tuple(payload["prior"]["lam_range"]),
        lam_count=payload["prior"]["lam_count"],
        beta_range=tuple(payload["prior"]["beta_range"]),
        beta_count=payload["prior"]["beta_count"],
    )
    return PosteriorGrid.from_log_likelihoods(
        prior, np.asarray(payload["log_likelihoods"]), model=payload.get("model", "")
    )


def _cmd_posterior(args) -> int:
    config = _load_config(args.config, args.seed)
    setup = config.measurement_setup()
    fwd = config.forward_config()
    with open(args.data) as fh:
        payload = json.load(fh)
    data = DataSet(
        y=np.asarray(payload["y"], dtype=float),
        gamma=float(payload["gamma"]),
        seed=int(payload["seed"]),
    )
    if args.model == "ks":
        model = ForwardModel("ks")
    else:
        eps = args.eps if args.eps is not None else min(config.eps_list)
        model = ForwardModel("chem", eps)
    cache = ForwardCache(args.cache) if args.cache else None
    post = build_posterior(
        model, config.prior(), data, setup, fwd,
        alpha=config.alpha, c_bound=config.c_bound,
        cache=cache, n_workers=args.threads,
    )
    with open(args.out, "w") as fh:
        json.dump(_posterior_payload(config, post, fwd.vgrid), fh, sort_keys=True)
        fh.write("\n")
    print(f"wrote posterior ({post.model}) to {args.out}")
    return 0


def _cmd_compare(args) -> int:
    with open(args.posterior_a) as fh:
        pa = _posterior_from_payload(json.load(fh))
    with open(args.posterior_b) as fh:
        pb = _posterior_from_payload(json.load(fh))
    print(
        json.dumps(
            {
                "kl_forward": kl_divergence(pa, pb),
                "kl_reverse": kl_divergence(pb, pa),
                "hellinger": hellinger(pa, pb),
            },
            indent=2,
            sort_keys=True,
        )
    )
    return 0


def _cmd_sweep(args) -> int:
    config = _load_config(args.config, args.seed)
    cache_dir = args.cache or (os.path.join(args.out, "cache") if args.cache_auto else None)
    result = run_posterior_sweep(config, cache_dir=cache_dir, n_workers=args.threads)
    written = emit_report(result, args.out)
    for rec in result.records:
        print(
            f"eps={rec.eps:g}: kl_forward={rec.kl_forward:.6f} "
            f"kl_reverse={rec.kl_reverse:.6f} hellinger={rec.hellinger:.6f}"
        )
    print(f"wrote {len(written)} files to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chemobayes",
        description="Chemotaxis forward models and Bayesian tumbling-kernel inversion",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file (defaults used if omitted)")
        p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("forward-kinetic", help="kinetic forward solve, densities as CSV")
    add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--eps", type=float)
    p.add_argument("--params", help="lam[,beta[,extras...]] (default: config truth)")
    p.set_defaults(func=_cmd_forward_kinetic)

    p = sub.add_parser("forward-ks", help="macroscopic forward solve, densities as CSV")
    add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--params")
    p.set_defaults(func=_cmd_forward_ks)

    p = sub.add_parser("coeffs", help="diffusion/drift coefficients and cell solutions")
    add_common(p)
    p.add_argument("--params")
    p.set_defaults(func=_cmd_coeffs)

    p = sub.add_parser("generate-data", help="synthetic noisy measurements as JSON")
    add_common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate_data)

    p = sub.add_parser("posterior", help="posterior grid for one forward model")
    add_common(p)
    p.add_argument("--model", choices=["chem", "ks"], required=True)
    p.add_argument("--eps", type=float)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cache")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_posterior)

    p = sub.add_parser("compare", help="distances between two posterior JSON files")
    p.add_argument("posterior_a")
    p.add_argument("posterior_b")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("sweep-eps", help="full posterior convergence sweep")
    add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--cache", help="directory for the forward-solve cache")
    p.add_argument(
        "--cache-auto", action="store_true",
        help="cache forward solves under OUT/cache",
    )
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (NodeEvaluationError, CellProblemError, NumericalFailure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
