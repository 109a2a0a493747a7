"""Priors on kernel parameters, grid posteriors, and posterior distances.

Posteriors are represented on a tensor grid of parameters with trapezoid
quadrature masses of the uniform prior.  ``weights`` stores the posterior
density relative to the prior, so node posterior masses are
weights * prior_masses and sum to one.  Kullback-Leibler values integrate
log(dp/dq) against the first argument; Hellinger uses the prior as the
common dominating measure (the value is independent of that choice).
"""

from __future__ import annotations

import hashlib
import itertools
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .kernels import KernelParams, check_admissible
from .measurement import DataSet, ForwardConfig, ForwardDiagnostics, MeasurementSetup, g_chem, g_ks
from .velocity import VelocityGrid


class NodeEvaluationError(RuntimeError):
    """Forward solve failed at an identified prior-grid node."""

    def __init__(self, index: int, params: KernelParams, cause: Exception):
        self.index = index
        self.params = params
        self.cause = cause
        super().__init__(f"forward solve failed at node {index} ({params}): {cause}")


@dataclass(frozen=True)
class ForwardModel:
    """Which forward map enters the likelihood: kinetic at some epsilon, or
    the macroscopic limit."""

    kind: str
    epsilon: float | None = None

    def __post_init__(self):
        if self.kind not in ("chem", "ks"):
            raise ValueError("model kind must be 'chem' or 'ks'")
        if self.kind == "chem" and (self.epsilon is None or self.epsilon <= 0.0):
            raise ValueError("the kinetic model needs a positive epsilon")

    def label(self) -> str:
        return "ks" if self.kind == "ks" else f"chem@{self.epsilon:g}"


@dataclass(frozen=True)
class PriorSpec:
    """Uniform prior over a box of kernel parameters on a tensor grid."""

    lam_range: tuple[float, float]
    lam_count: int
    beta_range: tuple[float, float] = (0.0, 0.0)
    beta_count: int = 1
    extras_ranges: tuple[tuple[float, float], ...] = ()
    extras_counts: tuple[int, ...] = ()
    extra_basis: tuple[str, ...] = ("dot",)

    def __post_init__(self):
        if self.lam_count < 1 or self.beta_count < 1:
            raise ValueError("grid resolutions must be positive")
        if len(self.extras_ranges) != len(self.extras_counts):
            raise ValueError("extras ranges and counts must align")

    def axes(self) -> list[tuple[str, np.ndarray]]:
        out = [
            ("lam", _axis(self.lam_range, self.lam_count)),
            ("beta", _axis(self.beta_range, self.beta_count)),
        ]
        for m, (rng, cnt) in enumerate(zip(self.extras_ranges, self.extras_counts)):
            out.append((f"extra{m}", _axis(rng, cnt)))
        return out

    def shape(self) -> tuple[int, ...]:
        return tuple(ax.size for _, ax in self.axes())

    def n_nodes(self) -> int:
        return int(np.prod(self.shape()))

    def nodes(self) -> list[KernelParams]:
        grids = [ax for _, ax in self.axes()]
        out = []
        for combo in itertools.product(*grids):
            lam, beta, *extras = combo
            out.append(
                KernelParams(
                    lam=float(lam),
                    beta=float(beta),
                    extras=tuple(float(e) for e in extras),
                    extra_basis=self.extra_basis,
                )
            )
        return out

    def prior_masses(self) -> np.ndarray:
        """Normalized tensor-trapezoid masses of the uniform prior density."""
        masses = np.ones(1)
        for _, ax in self.axes():
            w = np.ones(ax.size)
            if ax.size > 1:
                w[0] = w[-1] = 0.5
            masses = np.multiply.outer(masses, w)
        flat = masses.ravel()
        return flat / flat.sum()

    def grid_spacing(self) -> dict[str, float]:
        out = {}
        for name, ax in self.axes():
            out[name] = float(ax[1] - ax[0]) if ax.size > 1 else 0.0
        return out


def _axis(rng: tuple[float, float], count: int) -> np.ndarray:
    lo, hi = rng
    if count == 1:
        return np.array([0.5 * (lo + hi)])
    if hi <= lo:
        raise ValueError("axis range must be increasing")
    return np.linspace(lo, hi, count)


@dataclass(frozen=True)
class PosteriorGrid:
    """Posterior over the prior grid: densities w.r.t. the prior and log Z."""

    prior: PriorSpec
    log_likelihoods: np.ndarray
    weights: np.ndarray
    log_z: float
    model: str = ""

    def masses(self) -> np.ndarray:
        return self.weights * self.prior.prior_masses()

    def node_params(self) -> list[KernelParams]:
        return self.prior.nodes()

    def map_params(self) -> KernelParams:
        return self.prior.nodes()[int(np.argmax(self.log_likelihoods))]

    def mean(self) -> dict[str, float]:
        masses = self.masses()
        vecs = np.array([p.as_vector() for p in self.prior.nodes()])
        names = [name for name, _ in self.prior.axes()]
        avg = masses @ vecs
        return {name: float(avg[i]) for i, name in enumerate(names)}

    @staticmethod
    def from_log_likelihoods(
        prior: PriorSpec, log_likelihoods: np.ndarray, model: str = ""
    ) -> "PosteriorGrid":
        ll = np.asarray(log_likelihoods, dtype=float)
        if ll.shape != (prior.n_nodes(),):
            raise ValueError("one log-likelihood per prior node required")
        pm = prior.prior_masses()
        shift = ll.max()
        log_z = float(shift + np.log(np.sum(np.exp(ll - shift) * pm)))
        weights = np.exp(ll - log_z)
        return PosteriorGrid(
            prior=prior,
            log_likelihoods=ll,
            weights=weights,
            log_z=log_z,
            model=model,
        )


def log_likelihood(g_matrix: np.ndarray, data: DataSet) -> float:
    """Gaussian log-likelihood -||G - y||_F^2 / (2 gamma^2)."""
    g = np.asarray(g_matrix, dtype=float)
    if g.shape != data.y.shape:
        raise ValueError(f"measurement shape {g.shape} != data shape {data.y.shape}")
    resid = g - data.y
    return float(-np.sum(resid * resid) / (2.0 * data.gamma**2))


def log_z_lower_bound(data: DataSet, c_x: float, c_rho: float) -> float:
    """-B with B = (||y|| + sqrt(J K) C_x C_rho)^2 / (2 gamma^2); log Z >= -B."""
    norm_y = float(np.linalg.norm(data.y))
    bound = norm_y + np.sqrt(data.y.size) * c_x * c_rho
    return -(bound**2) / (2.0 * data.gamma**2)


# ---------------------------------------------------------------------------
# forward tables and posterior construction
# ---------------------------------------------------------------------------


class ForwardCache:
    """Disk cache of measurement matrices keyed by node, model, and setup."""

    def __init__(self, directory: str):
        self.directory = directory
        os.makedirs(directory, exist_ok=True)

    def _path(self, key: str) -> str:
        return os.path.join(self.directory, key + ".npy")

    def get(self, key: str) -> np.ndarray | None:
        path = self._path(key)
        if os.path.exists(path):
            return np.load(path)
        return None

    def put(self, key: str, value: np.ndarray) -> None:
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        with os.fdopen(fd, "wb") as fh:
            np.save(fh, value)
        os.replace(tmp, self._path(key))

    @staticmethod
    def node_key(
        model: ForwardModel,
        params: KernelParams,
        setup: MeasurementSetup,
        fwd: ForwardConfig,
    ) -> str:
        blob = "|".join(
            [
                model.label(),
                repr(params),
                setup.fingerprint(),
                fwd.fingerprint(),
            ]
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:32]


def _evaluate_node(args):
    model, params, setup, fwd = args
    if model.kind == "ks":
        return g_ks(params, setup, fwd)
    return g_chem(params, model.epsilon, setup, fwd)


def compute_forward_table(
    model: ForwardModel,
    prior: PriorSpec,
    setup: MeasurementSetup,
    fwd: ForwardConfig,
    cache: ForwardCache | None = None,
    n_workers: int = 1,
    diagnostics: ForwardDiagnostics | None = None,
) -> np.ndarray:
    """Measurement matrices at every prior node, shape (n_nodes, J, K).

    Node evaluations are independent; with ``n_workers`` > 1 they run in a
    process pool with a fixed ordering, so results are deterministic either
    way.  Collecting diagnostics forces the sequential path.  Failures abort
    with the offending node identified.
    """
    nodes = prior.nodes()
    results: list[np.ndarray | None] = [None] * len(nodes)
    pending = []
    for i, params in enumerate(nodes):
        if cache is not None:
            hit = cache.get(ForwardCache.node_key(model, params, setup, fwd))
            if hit is not None:
                results[i] = hit
                continue
        pending.append(i)

    def finish(i: int, value: np.ndarray) -> None:
        results[i] = value
        if cache is not None:
            cache.put(ForwardCache.node_key(model, nodes[i], setup, fwd), value)

    if n_workers > 1 and len(pending) > 1 and diagnostics is None:
        jobs = [(model, nodes[i], setup, fwd) for i in pending]
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for i, value in zip(pending, pool.map(_evaluate_node, jobs, chunksize=8)):
                finish(i, value)
    else:
        for i in pending:
            try:
                if model.kind == "ks":
                    value = g_ks(nodes[i], setup, fwd, diagnostics=diagnostics)
                else:
                    value = g_chem(
                        nodes[i], model.epsilon, setup, fwd, diagnostics=diagnostics
                    )
            except Exception as exc:  # noqa: BLE001 - node id matters more
                raise NodeEvaluationError(i, nodes[i], exc) from exc
            finish(i, value)
    return np.stack(results)


def posterior_from_table(
    prior: PriorSpec,
    table: np.ndarray,
    data: DataSet,
    model_label: str = "",
) -> PosteriorGrid:
    """Exponentiate and normalize a table of forward measurements."""
    ll = np.array([log_likelihood(g, data) for g in table])
    return PosteriorGrid.from_log_likelihoods(prior, ll, model=model_label)


def build_posterior(
    model: ForwardModel,
    prior: PriorSpec,
    data: DataSet,
    setup: MeasurementSetup,
    fwd: ForwardConfig,
    vgrid: VelocityGrid | None = None,
    alpha: float | None = None,
    c_bound: float | None = None,
    cache: ForwardCache | None = None,
    n_workers: int = 1,
) -> PosteriorGrid:
    """Per-node forward solves, Gaussian likelihood, prior-grid normalization."""
    if alpha is not None and c_bound is not None:
        grid = vgrid if vgrid is not None else fwd.vgrid
        for i, params in enumerate(prior.nodes()):
            report = check_admissible(params, grid, alpha, c_bound)
            if not report.passed:
                raise ValueError(
                    f"prior node {i} ({params}) is inadmissible: {report.violations}"
                )
    table = compute_forward_table(
        model, prior, setup, fwd, cache=cache, n_workers=n_workers
    )
    return posterior_from_table(prior, table, data, model_label=model.label())


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------


def _check_same_grid(p: PosteriorGrid, q: PosteriorGrid) -> None:
    if p.prior != q.prior:
        raise ValueError("posteriors live on different parameter grids")


def kl_divergence(p: PosteriorGrid, q: PosteriorGrid) -> float:
    """Sum of p-masses times log(p/q); nonnegative, zero iff p = q nodewise."""
    _check_same_grid(p, q)
    masses_p = p.masses()
    log_ratio = (p.log_likelihoods - p.log_z) - (q.log_likelihoods - q.log_z)
    return float(np.sum(masses_p * log_ratio))


def hellinger(p: PosteriorGrid, q: PosteriorGrid) -> float:
    """Hellinger distance with the shared prior as dominating measure."""
    _check_same_grid(p, q)
    pm = p.prior.prior_masses()
    diff = np.sqrt(p.weights) - np.sqrt(q.weights)
    return float(np.sqrt(0.5 * np.sum(pm * diff * diff)))


# ---------------------------------------------------------------------------
# random-walk Metropolis cross-check
# ---------------------------------------------------------------------------


def rw_metropolis(
    log_density,
    x0: np.ndarray,
    bounds: list[tuple[float, float]],
    n_steps: int,
    step_sizes: np.ndarray,
    seed: int,
) -> np.ndarray:
    """Random-walk Metropolis on a box; used only as a sanity cross-check of
    the grid posterior (never by the acceptance experiments)."""
    rng = np.random.default_rng(seed)
    x = np.asarray(x0, dtype=float)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    current = log_density(x)
    out = np.empty((n_steps, x.size))
    for i in range(n_steps):
        proposal = x + step_sizes * rng.standard_normal(x.size)
        if np.all(proposal >= lo) and np.all(proposal <= hi):
            cand = log_density(proposal)
            if np.log(rng.random()) < cand - current:
                x, current = proposal, cand
        out[i] = x
    return out
