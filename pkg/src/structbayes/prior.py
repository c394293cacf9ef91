"""Two-step selection prior with an elliptical Laplace parameter law.

Step 1 weighs model indices by a gamma-ratio correction factor times an
exponential complexity penalty; step 2 draws a structure uniformly among
the non-collinear members of the chosen space; step 3 draws the
continuous parameter from the elliptical Laplace distribution whose
density depends on the parameter only through the norm of the realized
signal.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .design import build_design, enumerate_structures, verify_structure
from .errors import CapExceeded, ConfigError, NoValidModels
from .structures import structure_to_json
from .validation import check_positive, check_rng

__all__ = [
    "PriorConfig",
    "log_correction_factor",
    "model_index_log_pmf",
    "sample_elliptical_laplace",
    "elliptical_laplace_log_density",
    "sample_prior",
    "sample_valid_structure",
    "PriorDraw",
]

_HALF_LOG_PI = 0.5 * math.log(math.pi)

# step 2 enumerates the structure space when it is at most this large,
# otherwise it rejection-samples against the rank test
ENUMERATION_LIMIT = 1_000_000
REJECTION_LIMIT = 10_000_000


@dataclass(frozen=True)
class PriorConfig:
    """Scale of the parameter law and strength of the complexity penalty."""

    lam: float = 1.0
    D: float = 2.0

    def __post_init__(self):
        check_positive(self.lam, "lam")
        check_positive(self.D, "D")


def log_correction_factor(ell):
    """ln Gamma(ell) - ln Gamma(ell / 2).

    Compensates the gamma ratio in the elliptical Laplace normalizer so
    that model weights depend on dimension only through the complexity
    penalty.
    """
    if ell < 1:
        raise ConfigError(f"ell must be >= 1, got {ell}")
    return float(gammaln(ell) - gammaln(ell / 2.0))


def model_index_log_pmf(family, config):
    """Normalized log probabilities of the model-index draw.

    Indices whose structure space has no non-collinear member are
    excluded before normalization.  Raises :class:`NoValidModels` when
    nothing remains.
    """
    taus = [tau for tau in family.index_set() if family.has_valid_structures(tau)]
    if not taus:
        raise NoValidModels(f"{family.kind}: every structure space is degenerate")
    scale = family.prior_energy_scale
    raw = np.array(
        [
            log_correction_factor(family.effective_dim(tau))
            - config.D * scale * family.epsilon(tau)
            for tau in taus
        ]
    )
    log_norm = _sorted_logsumexp(raw)
    return {tau: float(v - log_norm) for tau, v in zip(taus, raw)}


def _sorted_logsumexp(values):
    values = np.asarray(values, dtype=float)
    top = float(np.max(values))
    if not np.isfinite(top):
        return top
    return top + math.log(math.fsum(np.sort(np.exp(values - top))))


def sample_elliptical_laplace(design, lam, rng):
    """Draw q with density proportional to exp(-lam * ||X q||).

    Uses the radial decomposition: the image norm ||X q|| is
    Gamma(ell, lam), the image direction is uniform on the sphere, and
    the whitening map of the design converts image coordinates back to
    parameters, so ``||X q|| == radius`` holds exactly.
    """
    lam = check_positive(lam, "lam")
    rng = check_rng(rng)
    radius = rng.gamma(shape=design.ell, scale=1.0 / lam)
    direction = rng.standard_normal(design.ell)
    norm = np.linalg.norm(direction)
    while norm == 0.0:  # pragma: no cover - probability zero
        direction = rng.standard_normal(design.ell)
        norm = np.linalg.norm(direction)
    return design.whiten_from_sphere(direction * (radius / norm))


def elliptical_laplace_log_density(design, lam, q):
    """Exact log density of the elliptical Laplace law at q."""
    lam = check_positive(lam, "lam")
    q = np.asarray(q, dtype=float)
    if q.shape != (design.ell,):
        raise ConfigError(
            f"parameter has shape {q.shape}, expected ({design.ell},)"
        )
    ell = design.ell
    signal_norm = float(np.linalg.norm(design.apply(q)))
    return (
        0.5 * design.log_det_gram
        + ell * (math.log(lam) - _HALF_LOG_PI)
        + float(gammaln(ell / 2.0) - gammaln(ell))
        - math.log(2.0)
        - lam * signal_norm
    )


@dataclass(frozen=True)
class PriorDraw:
    tau: object
    structure: object
    q: np.ndarray
    signal: np.ndarray

    def to_json(self):
        return {
            "tau": structure_to_json(self.structure)["tau"],
            "structure": structure_to_json(self.structure),
            "q": self.q.tolist(),
            "signal": self.signal.tolist(),
        }


def sample_prior(family, config, rng):
    """One draw of (tau, structure, q, signal) from the full prior."""
    rng = check_rng(rng)
    pmf = model_index_log_pmf(family, config)
    taus = list(pmf)
    probs = np.exp(np.array([pmf[t] for t in taus]))
    probs = probs / probs.sum()
    tau = taus[int(rng.choice(len(taus), p=probs))]
    structure = sample_valid_structure(family, tau, rng)
    design = build_design(family, structure)
    q = sample_elliptical_laplace(design, config.lam, rng)
    return PriorDraw(tau=tau, structure=structure, q=q, signal=design.apply(q))


def sample_valid_structure(family, tau, rng):
    """Uniform draw over the non-collinear members of one structure space."""
    try:
        tagged = list(enumerate_structures(family, tau, cap=ENUMERATION_LIMIT))
    except CapExceeded:
        for _ in range(REJECTION_LIMIT):
            structure = family.sample_structure(tau, rng)
            if verify_structure(family, structure):
                return structure
        raise NoValidModels(
            f"{family.kind}: rejection sampling found no valid structure "
            f"for tau={tau!r} within {REJECTION_LIMIT} attempts"
        )
    valid = [s for s, ok in tagged if ok]
    if not valid:
        raise NoValidModels(f"{family.kind}: no valid structure for tau={tau!r}")
    return valid[int(rng.integers(len(valid)))]
