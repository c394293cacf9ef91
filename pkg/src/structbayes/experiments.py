"""Synthetic-data experiments: truths, noise, losses, and rate studies.

Scenarios are JSON-serializable descriptions of (family, truth, noise,
signal strength, replicates, seed).  Truth generators calibrate signal
energy to ``snr^2 * epsilon(tau*)`` so that scaling studies probe the
regime where model selection is neither trivial nor hopeless; replicates
use order-independent substreams so sharded runs reproduce exactly.
"""

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .design import build_design
from .errors import CapExceeded, ConfigError
from .families import (
    BiclusteringFamily,
    BesovLevelFamily,
    DictionaryFamily,
    GroupSparsityFamily,
    GroupTwoLevelFamily,
    MultiTaskFamily,
    SbmFamily,
    SobolevFamily,
    SparseRegressionFamily,
    AggregationFamily,
    check_capacity,
    check_complexity_dominates,
    family_from_dict,
)
from .marginal import (
    PosteriorTable,
    exact_posterior_table,
    sample_q_conditional,
    sorted_logsumexp,
)
from .prior import PriorConfig
from .rates import effective_sparsity
from .sampler import ChainConfig, ChainResult, run_chain
from .structures import Structure
from .validation import check_rng, substream

__all__ = [
    "Scenario",
    "TruthRecord",
    "LossReport",
    "RateReport",
    "gaussian_design",
    "orthogonal_design",
    "resolve_family",
    "generate_truth",
    "generate_noise",
    "compute_losses",
    "restricted_constants",
    "run_rate_study",
    "theory_checks",
    "shipped_families",
    "StudySettings",
    "executor_jobs_default",
]


# ----------------------------------------------------------------------
# designs and scenarios
# ----------------------------------------------------------------------


def gaussian_design(n, p, seed=0):
    """Random design with every column scaled to norm sqrt(n)."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    return x * (math.sqrt(n) / np.linalg.norm(x, axis=0))


def orthogonal_design(n, p, seed=0):
    """Design with exactly orthogonal columns of norm sqrt(n)."""
    if p > n:
        raise ConfigError("orthogonal design needs p <= n")
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    return q * math.sqrt(n)


def _resolve_design_entry(entry):
    if isinstance(entry, dict):
        kind = entry.get("kind", "gaussian")
        if kind == "gaussian":
            return gaussian_design(entry["n"], entry["p"], entry.get("seed", 0))
        if kind == "orthogonal":
            return orthogonal_design(entry["n"], entry["p"], entry.get("seed", 0))
        if kind == "identity":
            return np.eye(entry["p"])
        raise ConfigError(f"unknown design spec kind {kind!r}")
    return np.asarray(entry, dtype=float)


def resolve_family(descriptor):
    """Build a family from a descriptor, expanding design specs."""
    descriptor = dict(descriptor)
    if "design" in descriptor:
        descriptor["design"] = _resolve_design_entry(descriptor["design"]).tolist()
    return family_from_dict(descriptor)


@dataclass(frozen=True)
class Scenario:
    """One experimental condition; JSON-serializable."""

    name: str
    family: dict
    truth_kind: str = "well_specified"
    truth_params: dict = field(default_factory=dict)
    noise_kind: str = "gaussian"
    snr: float = 1.0
    replicates: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.truth_kind not in (
            "well_specified",
            "graphon",
            "weak_lq",
            "approx_constant",
        ):
            raise ConfigError(f"unknown truth kind {self.truth_kind!r}")
        if self.noise_kind not in ("gaussian", "rademacher", "bernoulli_graph"):
            raise ConfigError(f"unknown noise kind {self.noise_kind!r}")
        if self.noise_kind == "bernoulli_graph" and self.truth_kind not in (
            "well_specified",
            "graphon",
            "approx_constant",
        ):
            raise ConfigError("bernoulli_graph noise needs a graph truth")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")

    def to_dict(self):
        return {
            "name": self.name,
            "family": self.family,
            "truth_kind": self.truth_kind,
            "truth_params": self.truth_params,
            "noise_kind": self.noise_kind,
            "snr": self.snr,
            "replicates": self.replicates,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            name=data["name"],
            family=data["family"],
            truth_kind=data.get("truth_kind", "well_specified"),
            truth_params=data.get("truth_params", {}),
            noise_kind=data.get("noise_kind", "gaussian"),
            snr=data.get("snr", 1.0),
            replicates=data.get("replicates", 1),
            seed=data.get("seed", 0),
        )


@dataclass(frozen=True)
class TruthRecord:
    """Ground truth signal plus the oracle model that generated/approximates it."""

    theta: np.ndarray
    tau: object
    structure: object
    q: object
    coefficients: object
    epsilon: float
    oracle_bias_sq: float = 0.0


# ----------------------------------------------------------------------
# truth generation
# ----------------------------------------------------------------------


def _balanced_labels(n, k, rng):
    labels = np.repeat(np.arange(k), -(-n // k))[:n]
    rng.shuffle(labels)
    return tuple(int(v) for v in labels)


def generate_truth(scenario, rng):
    """Draw the ground-truth signal and the oracle model record."""
    rng = check_rng(rng)
    family = resolve_family(scenario.family)
    kind = scenario.truth_kind
    if kind == "well_specified":
        return _well_specified_truth(scenario, family, rng)
    if kind == "graphon":
        return _graphon_truth(scenario, family, rng)
    if kind == "weak_lq":
        return _weak_lq_truth(scenario, family, rng)
    return _constant_truth(scenario, family, rng)


def _truth_tau(scenario, family):
    tau = scenario.truth_params.get("tau")
    if tau is None:
        raise ConfigError("well_specified truth needs truth_params['tau']")
    if isinstance(tau, list):
        tau = tuple(tau)
    if tau not in family.index_set():
        raise ConfigError(f"truth tau {tau!r} not in the family index set")
    return tau


def _draw_truth_structure(scenario, family, tau, rng):
    if isinstance(family, SbmFamily):
        return Structure(family.kind, tau, _balanced_labels(family.n, tau, rng))
    if isinstance(family, BiclusteringFamily):
        k, l = tau
        return Structure(
            family.kind,
            tau,
            (_balanced_labels(family.n, k, rng), _balanced_labels(family.m, l, rng)),
        )
    if isinstance(family, MultiTaskFamily):
        return Structure(family.kind, tau, _balanced_labels(family.m, tau, rng))
    if isinstance(family, GroupTwoLevelFamily):
        s, t = tau
        rows = sorted(int(v) for v in rng.choice(family.p, size=s, replace=False))
        # spread the cell budget over the chosen rows: one per row, then
        # round-robin extras, columns drawn per row
        per_row = [1] * s
        for i in range(t - s):
            per_row[i % s] += 1
        cells = []
        for row, count in zip(rows, per_row):
            cols = rng.choice(family.m, size=count, replace=False)
            cells.extend((row, int(c)) for c in cols)
        return Structure(family.kind, tau, tuple(sorted(cells)))
    from .prior import sample_valid_structure

    return sample_valid_structure(family, tau, rng)


def _block_pattern(tau):
    """Symmetric +-1 pattern distinguishing diagonal from off-diagonal blocks."""
    k = tau
    return np.where(np.eye(k, dtype=bool), 1.0, -1.0)


def _well_specified_truth(scenario, family, rng):
    tau = _truth_tau(scenario, family)
    structure = _draw_truth_structure(scenario, family, tau, rng)
    design = build_design(family, structure)
    eps = family.epsilon(tau)
    target_norm = scenario.snr * math.sqrt(eps)
    if scenario.noise_kind == "bernoulli_graph":
        q = _bernoulli_block_q(scenario, family, tau, eps)
    elif isinstance(family, SbmFamily):
        scale = scenario.snr * math.sqrt(eps / family.n_obs)
        q = (scale * _block_pattern(tau)).ravel()
    else:
        q0 = rng.standard_normal(design.ell)
        norm = np.linalg.norm(design.apply(q0))
        q = q0 * (target_norm / norm)
    theta = design.apply(q)
    return TruthRecord(
        theta=theta,
        tau=tau,
        structure=structure,
        q=q,
        coefficients=family.embed_coefficients(structure, q),
        epsilon=eps,
    )


def _bernoulli_block_q(scenario, family, tau, eps):
    """Edge-probability blocks centered at 1/2 with an snr-calibrated gap."""
    gap = min(0.9, 2.0 * scenario.snr * math.sqrt(eps / family.n_obs))
    if isinstance(family, SbmFamily):
        return (0.5 + 0.5 * gap * _block_pattern(tau)).ravel()
    if isinstance(family, BiclusteringFamily):
        k, l = tau
        a, b = np.meshgrid(np.arange(k), np.arange(l), indexing="ij")
        pattern = np.where((a + b) % 2 == 0, 1.0, -1.0)
        return (0.5 + 0.5 * gap * pattern).ravel()
    raise ConfigError("bernoulli_graph truth needs an sbm or biclustering family")


def _graphon_truth(scenario, family, rng):
    if not isinstance(family, SbmFamily):
        raise ConfigError("graphon truth needs an sbm family")
    alpha = scenario.truth_params.get("alpha", 0.5)
    radius = scenario.truth_params.get("L", 1.0)
    xi = rng.random(family.n)

    if alpha <= 1.0:
        def f(x, y):
            return np.clip(radius * ((x - 0.5) ** 2 + (y - 0.5) ** 2) ** (alpha / 2.0), 0.0, 1.0)
    else:
        def f(x, y):
            return np.clip(
                0.2 + 0.6 * radius * np.exp(-8.0 * ((x - 0.5) ** 2 + (y - 0.5) ** 2)),
                0.0,
                1.0,
            )

    theta_mat = f(xi[:, None], xi[None, :])
    np.fill_diagonal(theta_mat, 0.0)
    theta = family.matrix_to_vector(theta_mat)

    k_star = scenario.truth_params.get("k_star")
    if k_star is None:
        k_star = max(1, math.ceil(family.n ** (1.0 / (min(alpha, 1.0) + 1.0))))
    k_star = min(k_star, family.k_max, family.n // 2 if family.n >= 4 else 1)
    k_star = max(k_star, 1)
    labels = tuple(int(v) for v in np.minimum(
        (np.argsort(np.argsort(xi)) * k_star) // family.n, k_star - 1
    ))
    structure = Structure(family.kind, k_star, labels)
    design = build_design(family, structure)
    proj = design.project(theta)
    return TruthRecord(
        theta=theta,
        tau=k_star,
        structure=structure,
        q=proj.coefficients,
        coefficients=None,
        epsilon=family.epsilon(k_star),
        oracle_bias_sq=proj.resid_norm**2,
    )


def _weak_lq_truth(scenario, family, rng):
    if not isinstance(family, (SparseRegressionFamily, BesovLevelFamily)):
        raise ConfigError("weak_lq truth needs a sparse regression family")
    q_par = scenario.truth_params.get("q", 0.5)
    k_rad = scenario.truth_params.get("k", 1.0)
    p = family.p
    if q_par == 0:
        mags = np.zeros(p)
        mags[: int(min(k_rad, p))] = 1.0
    else:
        j = np.arange(1, p + 1)
        mags = (k_rad / j) ** (1.0 / q_par)
    signs = np.where(np.arange(p) % 2 == 0, 1.0, -1.0)
    beta = mags * signs
    theta = family.design @ beta
    s_star = max(1, effective_sparsity(q_par, k_rad, p, family.n))
    s_star = min(s_star, family.s_max)
    support = tuple(range(s_star))
    structure = Structure(family.kind, s_star, support)
    design = build_design(family, structure)
    proj = design.project(theta)
    return TruthRecord(
        theta=theta,
        tau=s_star,
        structure=structure,
        q=proj.coefficients,
        coefficients=beta,
        epsilon=family.epsilon(s_star),
        oracle_bias_sq=proj.resid_norm**2,
    )


def _constant_truth(scenario, family, rng):
    value = scenario.truth_params.get("value")
    if value is None:
        value = 0.5 if scenario.noise_kind == "bernoulli_graph" else scenario.snr
    theta = np.full(family.n_obs, float(value))
    if isinstance(family, SbmFamily):
        theta = family.matrix_to_vector(
            np.full((family.n, family.n), float(value)) - np.diag([value] * family.n)
        )
    tau = next(iter(family.index_set()))
    structure = next(family.iter_structures(tau))
    design = build_design(family, structure)
    proj = design.project(theta)
    return TruthRecord(
        theta=theta,
        tau=tau,
        structure=structure,
        q=proj.coefficients,
        coefficients=None,
        epsilon=family.epsilon(tau),
        oracle_bias_sq=proj.resid_norm**2,
    )


# ----------------------------------------------------------------------
# noise
# ----------------------------------------------------------------------


def generate_noise(kind, theta, rng, family=None):
    """Observed data from the truth signal under one noise model."""
    rng = check_rng(rng)
    theta = np.asarray(theta, dtype=float)
    if kind == "gaussian":
        return theta + rng.standard_normal(theta.shape[0])
    if kind == "rademacher":
        return theta + (2.0 * rng.integers(0, 2, size=theta.shape[0]) - 1.0)
    if kind == "bernoulli_graph":
        if not isinstance(family, SbmFamily):
            raise ConfigError("bernoulli_graph noise needs the sbm family")
        if np.any(theta < 0.0) or np.any(theta > 1.0):
            raise ConfigError("bernoulli_graph needs theta entries in [0, 1]")
        mat = family.vector_to_matrix(theta)
        n = family.n
        upper = rng.random((n, n)) < mat
        adj = np.zeros((n, n))
        iu = np.triu_indices(n, k=1)
        adj[iu] = upper[iu].astype(float)
        adj = adj + adj.T
        return family.matrix_to_vector(adj)
    raise ConfigError(f"unknown noise kind {kind!r}")


# ----------------------------------------------------------------------
# losses
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class LossReport:
    """Posterior loss summaries for one replicate."""

    prediction_mean: float
    prediction_median: float
    prediction_q95: float
    complexity_exceed: float
    n_draws: int
    l2_sq_median: float = None
    l1_sq_median: float = None
    linf_median: float = None
    linf_q95: float = None


def _weighted_quantile(values, weights, q):
    order = np.argsort(values)
    v = np.asarray(values)[order]
    w = np.asarray(weights)[order]
    cum = np.cumsum(w)
    cum = cum / cum[-1]
    idx = int(np.searchsorted(cum, q, side="left"))
    return float(v[min(idx, len(v) - 1)])


def compute_losses(
    posterior,
    family,
    truth,
    delta=0.5,
    y=None,
    lam=1.0,
    n_q=32,
    q_steps=150,
    rng=None,
    weight_floor=1e-8,
):
    """Posterior loss report against the truth record.

    ``posterior`` is either an exact table (``y`` is then required to
    draw conditional parameters) or a chain result whose retained draws
    already carry parameters.  Coefficient losses are included whenever
    both the family and the truth define coefficients.
    """
    rng = check_rng(rng)
    signals, weights, structures, qs = [], [], [], []
    exceed = 0.0
    if isinstance(posterior, PosteriorTable):
        if y is None:
            raise ConfigError("table losses need the observed data vector y")
        table_weights = posterior.weights()
        designs = {}
        for entry, w in zip(posterior.entries, table_weights):
            if family.epsilon(entry.tau) > (1.0 + delta) * truth.epsilon:
                exceed += float(w)
            if w < weight_floor:
                continue
            key = entry.structure.key()
            if key not in designs:
                designs[key] = build_design(family, entry.structure)
            design = designs[key]
            path = sample_q_conditional(design, y, lam, rng, steps=n_q, keep_path=True)
            for q in path:
                signals.append(design.apply(q))
                weights.append(w / n_q)
                structures.append(entry.structure)
                qs.append(q)
    elif isinstance(posterior, ChainResult):
        if not posterior.draws:
            raise ConfigError("chain result has no retained draws")
        designs = {}
        n_exceed = 0
        for draw in posterior.draws:
            if family.epsilon(draw.tau) > (1.0 + delta) * truth.epsilon:
                n_exceed += 1
            if draw.q is None:
                continue
            key = draw.structure.key()
            if key not in designs:
                designs[key] = build_design(family, draw.structure)
            signals.append(designs[key].apply(draw.q))
            weights.append(1.0)
            structures.append(draw.structure)
            qs.append(draw.q)
        exceed = n_exceed / len(posterior.draws)
    else:
        raise ConfigError(
            f"posterior must be a PosteriorTable or ChainResult, got "
            f"{type(posterior).__name__}"
        )

    if not signals:
        return LossReport(
            prediction_mean=math.nan,
            prediction_median=math.nan,
            prediction_q95=math.nan,
            complexity_exceed=float(exceed),
            n_draws=0,
        )

    weights = np.asarray(weights, dtype=float)
    pred = np.array([float(np.sum((s - truth.theta) ** 2)) for s in signals])
    report = {
        "prediction_mean": float(np.sum(weights * pred) / np.sum(weights)),
        "prediction_median": _weighted_quantile(pred, weights, 0.5),
        "prediction_q95": _weighted_quantile(pred, weights, 0.95),
        "complexity_exceed": float(exceed),
        "n_draws": len(pred),
    }
    if truth.coefficients is not None:
        coef_true = np.asarray(truth.coefficients, dtype=float)
        l2, l1, linf = [], [], []
        usable = []
        for structure, q in zip(structures, qs):
            coef = family.embed_coefficients(structure, q)
            if coef is None:
                continue
            diff = np.asarray(coef, dtype=float).ravel() - coef_true.ravel()
            l2.append(float(np.sum(diff**2)))
            l1.append(float(np.sum(np.abs(diff)) ** 2))
            linf.append(float(np.max(np.abs(diff))))
            usable.append(True)
        if l2 and len(l2) == len(pred):
            report["l2_sq_median"] = _weighted_quantile(l2, weights, 0.5)
            report["l1_sq_median"] = _weighted_quantile(l1, weights, 0.5)
            report["linf_median"] = _weighted_quantile(linf, weights, 0.5)
            report["linf_q95"] = _weighted_quantile(linf, weights, 0.95)
    return LossReport(**report)


# ----------------------------------------------------------------------
# restricted design constants
# ----------------------------------------------------------------------


def restricted_constants(x, s_star, delta=0.5, cap=1_000_000):
    """Compatibility and restricted-eigenvalue constants of a design.

    Exact minimization over every support of size floor((2 + delta) *
    s_star): the eigenvalue constant is the smallest restricted singular
    direction; the compatibility constant minimizes over supports and
    sign patterns via the stationary value of the constrained quadratic.
    """
    x = np.asarray(x, dtype=float)
    n, p = x.shape
    if s_star < 1:
        raise ConfigError("s_star must be >= 1")
    t = int(math.floor((2.0 + delta) * s_star))
    t = max(1, min(t, p))
    n_supports = math.comb(p, t)
    if n_supports > cap:
        raise CapExceeded(n_supports, cap)
    gram = x.T @ x
    sign_patterns = np.array(
        [[1.0] + list(bits) for bits in itertools.product((1.0, -1.0), repeat=t - 1)]
    )
    min_eig = math.inf
    max_quad = 0.0
    singular = False
    for support in itertools.combinations(range(p), t):
        sub = gram[np.ix_(support, support)]
        eigs = np.linalg.eigvalsh(sub)
        min_eig = min(min_eig, float(eigs[0]))
        if eigs[0] <= 1e-10 * max(1.0, float(eigs[-1])):
            singular = True
            continue
        inv = np.linalg.inv(sub)
        quad = np.einsum("ij,jk,ik->i", sign_patterns, inv, sign_patterns)
        max_quad = max(max_quad, float(np.max(quad)))
    kappa2 = math.sqrt(max(0.0, min_eig) / n)
    if singular or min_eig <= 0:
        return 0.0, 0.0
    kappa1 = math.sqrt(s_star / (n * max_quad))
    return kappa1, kappa2


# ----------------------------------------------------------------------
# rate studies
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class RateReport:
    """Per-replicate rows, per-scenario summaries, and the log-log slope."""

    replicate_rows: tuple
    summary_rows: tuple
    slope: float
    intercept: float

    def write_replicates_csv(self, fileobj):
        import csv as _csv

        writer = _csv.writer(fileobj, lineterminator="\n")
        writer.writerow(
            [
                "scenario",
                "replicate",
                "epsilon_star",
                "prediction_mean",
                "prediction_median",
                "prediction_q95",
                "complexity_exceed",
                "l2_sq_median",
                "l1_sq_median",
                "linf_median",
            ]
        )
        for row in self.replicate_rows:
            writer.writerow([_csv_cell(row[k]) for k in (
                "scenario",
                "replicate",
                "epsilon_star",
                "prediction_mean",
                "prediction_median",
                "prediction_q95",
                "complexity_exceed",
                "l2_sq_median",
                "l1_sq_median",
                "linf_median",
            )])

    def write_summary_csv(self, fileobj):
        import csv as _csv

        writer = _csv.writer(fileobj, lineterminator="\n")
        writer.writerow(
            ["scenario", "epsilon_star", "median_loss", "ratio", "mean_exceed"]
        )
        for row in self.summary_rows:
            writer.writerow(
                [
                    row["scenario"],
                    _csv_cell(row["epsilon_star"]),
                    _csv_cell(row["median_loss"]),
                    _csv_cell(row["ratio"]),
                    _csv_cell(row["mean_exceed"]),
                ]
            )

    def plot_data(self):
        return {
            "x": [row["epsilon_star"] for row in self.summary_rows],
            "y": [row["median_loss"] for row in self.summary_rows],
            "series": [row["scenario"] for row in self.summary_rows],
            "slope": self.slope,
            "intercept": self.intercept,
        }


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


@dataclass(frozen=True)
class StudySettings:
    """Estimator and chain settings shared by every grid point."""

    estimator: str = "exact"
    cap: int = 100_000
    lam: float = 1.0
    D: float = 2.0
    delta: float = 0.5
    steps: int = 20_000
    burn_in: int = 2_000
    thin: int = 10
    q_steps: int = 120
    n_q: int = 32
    warm_start: bool = True

    def __post_init__(self):
        if self.estimator not in ("exact", "mcmc"):
            raise ConfigError("estimator must be 'exact' or 'mcmc'")


def _chain_seed(scenario_seed, grid_index, replicate):
    ss = np.random.SeedSequence(scenario_seed, spawn_key=(grid_index, replicate, 99))
    return int(ss.generate_state(2, dtype=np.uint64)[0])


def run_replicate(scenario, grid_index, replicate, settings):
    """One replicate of one grid point; deterministic in its indices."""
    family = resolve_family(scenario.family)
    rng_truth = substream(scenario.seed, grid_index, replicate, 0)
    rng_noise = substream(scenario.seed, grid_index, replicate, 1)
    rng_loss = substream(scenario.seed, grid_index, replicate, 2)
    truth = generate_truth(scenario, rng_truth)
    y = generate_noise(scenario.noise_kind, truth.theta, rng_noise, family=family)
    if settings.estimator == "exact":
        prior = PriorConfig(lam=settings.lam, D=settings.D)
        posterior = exact_posterior_table(family, y, prior, cap=settings.cap)
    else:
        init = truth.structure if settings.warm_start else None
        config = ChainConfig(
            steps=settings.steps,
            burn_in=settings.burn_in,
            thin=settings.thin,
            prior=PriorConfig(lam=settings.lam, D=settings.D),
            seed=_chain_seed(scenario.seed, grid_index, replicate),
            q_steps=settings.q_steps,
            draw_q=True,
            init=init,
        )
        posterior = run_chain(family, y, config)
    losses = compute_losses(
        posterior,
        family,
        truth,
        delta=settings.delta,
        y=y,
        lam=settings.lam,
        n_q=settings.n_q,
        q_steps=settings.q_steps,
        rng=rng_loss,
    )
    return {
        "scenario": scenario.name,
        "replicate": replicate,
        "epsilon_star": truth.epsilon,
        "prediction_mean": losses.prediction_mean,
        "prediction_median": losses.prediction_median,
        "prediction_q95": losses.prediction_q95,
        "complexity_exceed": losses.complexity_exceed,
        "l2_sq_median": losses.l2_sq_median,
        "l1_sq_median": losses.l1_sq_median,
        "linf_median": losses.linf_median,
        "linf_q95": losses.linf_q95,
    }


def _run_replicate_task(args):
    scenario_dict, grid_index, replicate, settings = args
    scenario = Scenario.from_dict(scenario_dict)
    return run_replicate(scenario, grid_index, replicate, settings)


def executor_jobs_default():
    """Default worker count: the machine's available parallelism."""
    import os

    return max(1, os.cpu_count() or 1)


def run_rate_study(scenarios, settings=None, jobs=1):
    """Replicated losses over a scenario grid plus the log-log rate fit.

    Results do not depend on ``jobs``: substreams are keyed by (grid
    point, replicate) and rows are aggregated in submission order.
    """
    settings = settings or StudySettings()
    tasks = [
        (scenario.to_dict(), gi, rep, settings)
        for gi, scenario in enumerate(scenarios)
        for rep in range(scenario.replicates)
    ]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_replicate_task, tasks))
    else:
        rows = [_run_replicate_task(t) for t in tasks]

    summaries = []
    for scenario in scenarios:
        mine = [r for r in rows if r["scenario"] == scenario.name]
        med = float(np.median([r["prediction_median"] for r in mine]))
        eps = float(np.median([r["epsilon_star"] for r in mine]))
        summaries.append(
            {
                "scenario": scenario.name,
                "epsilon_star": eps,
                "median_loss": med,
                "ratio": med / eps if eps > 0 else math.nan,
                "mean_exceed": float(np.mean([r["complexity_exceed"] for r in mine])),
            }
        )
    slope, intercept = math.nan, math.nan
    if len(summaries) >= 2:
        xs = np.log([s["epsilon_star"] for s in summaries])
        ys = np.log([max(s["median_loss"], 1e-300) for s in summaries])
        slope, intercept = np.polyfit(xs, ys, 1)
    return RateReport(
        replicate_rows=tuple(rows),
        summary_rows=tuple(summaries),
        slope=float(slope),
        intercept=float(intercept),
    )


# ----------------------------------------------------------------------
# numeric theory checks
# ----------------------------------------------------------------------


def theory_checks(families=None, seed=0, t_max=200, beta=2.0, alphas=None):
    """Numeric verification of the structural conditions and identities.

    Runs, for every family: the complexity-domination scan, the capacity
    scan, and the exponential growth-sum bounds; plus least squares
    Pythagorean residuals on random designs.
    """
    if families is None:
        families = shipped_families(seed)
    if alphas is None:
        alphas = range(1, 21)
    results = {"families": {}, "pythagorean_max_residual": None, "passed": True}
    for family in families:
        eps = np.array([family.epsilon(tau) for tau in family.index_set()])
        growth_ok = True
        for alpha in alphas:
            lo = eps[eps <= alpha]
            hi = eps[eps > alpha]
            s1 = sorted_logsumexp(beta * lo) if lo.size else -math.inf
            b1 = math.log(4.0 * math.ceil(alpha)) + beta * math.ceil(alpha)
            s2 = sorted_logsumexp(-beta * hi) if hi.size else -math.inf
            b2 = math.log(4.0 * alpha) - beta * math.floor(alpha)
            s3 = sorted_logsumexp(-beta * lo) if lo.size else -math.inf
            b3 = math.log(6.0)
            if s1 > b1 + 1e-12 or s2 > b2 + 1e-12 or s3 > b3 + 1e-12:
                growth_ok = False
        dominates = check_complexity_dominates(family)
        capacity = check_capacity(family, t_max)
        ok = growth_ok and dominates.passed and capacity.passed
        results["families"][family.kind] = {
            "growth_sums": growth_ok,
            "complexity_dominates": dominates.passed,
            "capacity": capacity.passed,
            "violations": [list(map(str, v)) for v in dominates.violations],
        }
        results["passed"] = results["passed"] and ok

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        n, ell = 12, 4
        x = rng.standard_normal((n, ell))
        from .design import DenseDesign

        design = DenseDesign(x)
        y = rng.standard_normal(n) * 3.0
        q = rng.standard_normal(ell)
        proj = design.project(y)
        lhs = float(np.sum((design.apply(q) - y) ** 2))
        fitted = design.apply(proj.coefficients)
        rhs = float(np.sum((design.apply(q) - fitted) ** 2) + proj.resid_norm**2)
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    results["pythagorean_max_residual"] = worst
    results["passed"] = results["passed"] and worst < 1e-10
    return results


def shipped_families(seed=0):
    """Desk-scale instances of every family, for checks and demos."""
    return [
        SbmFamily(n=10),
        BiclusteringFamily(n=6, m=6),
        SparseRegressionFamily(design=gaussian_design(20, 10, seed)),
        GroupSparsityFamily(design=gaussian_design(18, 8, seed + 1), m=3),
        MultiTaskFamily(design=gaussian_design(12, 3, seed + 2), m=8),
        DictionaryFamily(n=3, d=4),
        SobolevFamily(n=50),
        BesovLevelFamily(level=4),
        AggregationFamily(design=gaussian_design(16, 12, seed + 3)),
        GroupTwoLevelFamily(p=8, m=4),
    ]
