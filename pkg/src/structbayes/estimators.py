"""Scikit-learn style estimators wrapping the posterior engines.

Both estimators consume a fitted family plus prior parameters and expose
``fit`` / ``predict`` / ``get_params`` so they compose with scikit-learn
tooling (cloning, grid search over ``lam`` / ``D``).  ``fit`` takes the
observed signal vector; ``predict`` returns the posterior-mean signal.
"""

import numpy as np
from sklearn.base import BaseEstimator

from .design import build_design
from .errors import ConfigError
from .marginal import exact_posterior_table, sample_q_conditional
from .prior import PriorConfig
from .sampler import ChainConfig, run_chain
from .validation import check_rng, check_vector

__all__ = ["ExactPosterior", "CollapsedSampler"]


class ExactPosterior(BaseEstimator):
    """Posterior over structures by full enumeration of the model space.

    Parameters
    ----------
    family : ModelFamily
        Structured-model family describing index set, structures, designs.
    lam : float
        Scale of the elliptical Laplace parameter law.
    D : float
        Strength of the complexity penalty in the selection prior.
    cap : int
        Maximum total number of structures to enumerate.
    q_steps : int
        Kept iterations of the conditional parameter sampler per draw.

    Attributes
    ----------
    table_ : PosteriorTable
        Normalized log-weights over every valid (tau, structure) pair.
    log_evidence_ : float
        Log normalizer of the unnormalized weights.
    """

    def __init__(self, family=None, lam=1.0, D=2.0, cap=100_000, q_steps=200):
        self.family = family
        self.lam = lam
        self.D = D
        self.cap = cap
        self.q_steps = q_steps

    def fit(self, y, X=None):
        if self.family is None:
            raise ConfigError("family must be provided before fitting")
        self.y_ = check_vector(y, self.family.n_obs)
        config = PriorConfig(lam=self.lam, D=self.D)
        self.table_ = exact_posterior_table(self.family, self.y_, config, cap=self.cap)
        self.log_evidence_ = self.table_.log_normalizer
        self.n_entries_ = len(self.table_.entries)
        return self

    def tau_posterior(self):
        self._check_fitted()
        return self.table_.tau_marginal()

    def sample(self, n_draws=100, random_state=None):
        """Posterior draws of (structure, q, signal), structure-weighted."""
        self._check_fitted()
        rng = check_rng(random_state)
        weights = self.table_.weights()
        idx = rng.choice(len(weights), size=n_draws, p=weights / weights.sum())
        designs = {}
        out = []
        for i in idx:
            entry = self.table_.entries[int(i)]
            key = entry.structure.key()
            if key not in designs:
                designs[key] = build_design(self.family, entry.structure)
            design = designs[key]
            q = sample_q_conditional(
                design, self.y_, self.lam, rng, steps=self.q_steps
            )
            out.append((entry.structure, q, design.apply(q)))
        return out

    def predict(self, n_draws=200, random_state=None):
        """Posterior-mean signal estimated from conditional draws."""
        draws = self.sample(n_draws=n_draws, random_state=random_state)
        return np.mean([signal for _, _, signal in draws], axis=0)

    def _check_fitted(self):
        if not hasattr(self, "table_"):
            raise ConfigError("estimator is not fitted; call fit(y) first")


class CollapsedSampler(BaseEstimator):
    """Posterior over structures by collapsed Metropolis-Hastings.

    The scalable path when enumeration exceeds the cap.  Draws retained
    after burn-in and thinning each carry one conditional parameter
    draw, so ``predict`` averages exact posterior signals.

    Attributes
    ----------
    result_ : ChainResult
        Retained draws plus diagnostics.
    diagnostics_ : dict
        Acceptance rate, per-index visits, cache spot-check residual.
    """

    def __init__(
        self,
        family=None,
        lam=1.0,
        D=2.0,
        steps=20_000,
        burn_in=2_000,
        thin=10,
        seed=0,
        q_steps=150,
        draw_q=True,
        init=None,
    ):
        self.family = family
        self.lam = lam
        self.D = D
        self.steps = steps
        self.burn_in = burn_in
        self.thin = thin
        self.seed = seed
        self.q_steps = q_steps
        self.draw_q = draw_q
        self.init = init

    def fit(self, y, X=None):
        if self.family is None:
            raise ConfigError("family must be provided before fitting")
        self.y_ = check_vector(y, self.family.n_obs)
        config = ChainConfig(
            steps=self.steps,
            burn_in=self.burn_in,
            thin=self.thin,
            prior=PriorConfig(lam=self.lam, D=self.D),
            seed=self.seed,
            q_steps=self.q_steps,
            draw_q=self.draw_q,
            init=self.init,
        )
        self.result_ = run_chain(self.family, self.y_, config)
        self.diagnostics_ = self.result_.diagnostics
        self.draws_ = self.result_.draws
        return self

    def tau_posterior(self):
        self._check_fitted()
        return self.result_.tau_frequencies()

    def predict(self):
        """Posterior-mean signal over retained draws."""
        self._check_fitted()
        if not self.draws_:
            raise ConfigError("no retained draws")
        if any(d.q is None for d in self.draws_):
            raise ConfigError("fit with draw_q=True to enable predict()")
        designs = {}
        total = np.zeros(self.family.n_obs)
        for d in self.draws_:
            key = d.structure.key()
            if key not in designs:
                designs[key] = build_design(self.family, d.structure)
            total += designs[key].apply(d.q)
        return total / len(self.draws_)

    def _check_fitted(self):
        if not hasattr(self, "result_"):
            raise ConfigError("estimator is not fitted; call fit(y) first")
