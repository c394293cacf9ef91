"""Model family descriptors for structured linear signals.

Each family describes a finite index set of models, the discrete structure
space attached to every index, the effective dimension of the continuous
parameter, an exact log structure count, and a complexity value that
penalizes models inside the selection prior.  Families also know how to
realize a structure as a linear design, enumerate or sample structures,
and propose reversible neighborhood moves for the collapsed sampler.

Conventions: all logarithms are natural, all indices are 0-based, and a
family instance is immutable after construction (safe to share across
workers).
"""

import abc
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import ConfigError
from .structures import Structure
from .validation import check_matrix

__all__ = [
    "ComplexityValue",
    "ModelFamily",
    "SbmFamily",
    "BiclusteringFamily",
    "SparseRegressionFamily",
    "GroupSparsityFamily",
    "MultiTaskFamily",
    "DictionaryFamily",
    "SobolevFamily",
    "BesovLevelFamily",
    "AggregationFamily",
    "GroupTwoLevelFamily",
    "family_from_dict",
    "check_complexity_dominates",
    "check_capacity",
    "ConditionReport",
]

_LOG2 = math.log(2.0)


@dataclass(frozen=True)
class ComplexityValue:
    """Complexity of one model index: penalty exponent, dimension, count."""

    tau: object
    epsilon: float
    ell: int
    log_count: float


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of a structural-condition scan over a family's index set."""

    family_kind: str
    condition: str
    passed: bool
    violations: tuple

    def __bool__(self):
        return self.passed


def log_binom(n, k):
    """ln C(n, k) via log-gamma; overflow-safe for any sizes."""
    if k < 0 or k > n:
        return -math.inf
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


@lru_cache(maxsize=None)
def _surjection_count(n, k):
    """Exact number of surjections from [n] onto [k]."""
    return sum(
        (-1) ** i * math.comb(k, i) * (k - i) ** n for i in range(k + 1)
    )


@lru_cache(maxsize=None)
def _partitions_min_two(n, k):
    """Exact number of partitions of [n] into k unlabeled blocks, each >= 2."""
    if k == 0:
        return 1 if n == 0 else 0
    if n < 2 * k:
        return 0
    return k * _partitions_min_two(n - 1, k) + (n - 1) * _partitions_min_two(
        n - 2, k - 1
    )


@lru_cache(maxsize=None)
def _covering_cell_sets(s, m, t):
    """Exact number of t-subsets of an s x m grid touching every row."""
    return sum(
        (-1) ** i * math.comb(s, i) * math.comb((s - i) * m, t)
        for i in range(s + 1)
    )


class ModelFamily(abc.ABC):
    """Abstract structured-linear-model family.

    Subclasses fix the model index set, per-index structure spaces, the
    design realization ``structure -> X`` and the neighborhood moves.
    """

    kind = None
    # Step-1 prior exponent is -D * prior_energy_scale * epsilon(tau).
    prior_energy_scale = 1.0
    # True when every design column is a 0/1 indicator hit by each
    # observation at most once; enables the factorization-free fast path.
    indicator_design = False

    # ------------------------------------------------------------------
    # index set and complexity
    # ------------------------------------------------------------------

    @abc.abstractmethod
    def index_set(self):
        """All model indices tau, in deterministic order."""

    @abc.abstractmethod
    def effective_dim(self, tau):
        """Continuous parameter dimension for structures indexed by tau."""

    @abc.abstractmethod
    def epsilon(self, tau):
        """Complexity penalty exponent of the index tau."""

    @abc.abstractmethod
    def log_structure_count(self, tau):
        """Exact natural log of the structure-space size for tau."""

    @abc.abstractmethod
    def structure_count(self, tau):
        """Exact structure-space size for tau as a Python int."""

    def complexity(self, tau):
        self._validate_tau(tau)
        return ComplexityValue(
            tau=tau,
            epsilon=self.epsilon(tau),
            ell=self.effective_dim(tau),
            log_count=self.log_structure_count(tau),
        )

    def has_valid_structures(self, tau):
        """Whether the tau structure space contains a non-collinear member."""
        self._validate_tau(tau)
        return True

    def log_valid_structure_count(self, tau):
        """``(ln count, exact)`` of non-collinear structures for tau.

        Falls back to the unfiltered count with ``exact=False`` when no
        closed form is available for the family/design at hand.
        """
        return self.log_structure_count(tau), False

    def _validate_tau(self, tau):
        if tau not in self._tau_set():
            raise ConfigError(f"{self.kind}: model index {tau!r} not in the index set")

    def _tau_set(self):
        cached = getattr(self, "_tau_set_cache", None)
        if cached is None:
            cached = frozenset(self.index_set())
            self._tau_set_cache = cached
        return cached

    # ------------------------------------------------------------------
    # structures
    # ------------------------------------------------------------------

    @abc.abstractmethod
    def iter_structures(self, tau):
        """Yield every structure of the tau space once, lexicographically."""

    @abc.abstractmethod
    def sample_structure(self, tau, rng):
        """Draw a structure uniformly from the (unfiltered) tau space."""

    @abc.abstractmethod
    def validate_structure(self, structure):
        """Whether the payload is a consistent member of its tau space."""

    @abc.abstractmethod
    def propose_move(self, structure, rng):
        """One reversible neighborhood move.

        Returns ``(candidate, log_ratio)`` where ``log_ratio`` is
        ``ln q(current | candidate) - ln q(candidate | current)``.
        Boundary moves propose the current structure with ratio 0.

        Ratios are exact for transitions between non-collinear
        structures, which is what detailed balance requires: candidates
        with a singular design carry zero posterior mass and are
        rejected outright, so their ratios never enter an acceptance
        probability.
        """

    # ------------------------------------------------------------------
    # designs and signals
    # ------------------------------------------------------------------

    @property
    @abc.abstractmethod
    def n_obs(self):
        """Output dimension N of the realized signal."""

    @abc.abstractmethod
    def design_matrix(self, structure):
        """Dense N x ell design matrix realizing the structure."""

    def design_column_index(self, structure):
        """Column index per observation for indicator designs (-1 = none)."""
        raise NotImplementedError

    def embed_coefficients(self, structure, q):
        """Map (structure, q) to the family's coefficient object, if any."""
        return None

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------

    @abc.abstractmethod
    def to_dict(self):
        """JSON-compatible descriptor; matrices row-major."""

    def __repr__(self):
        fields = ", ".join(
            f"{k}={v}" for k, v in self.to_dict().items() if k not in ("family", "design")
        )
        return f"{type(self).__name__}({fields})"


# ----------------------------------------------------------------------
# shared move kernels
# ----------------------------------------------------------------------


def _relabel_one(labels, k, rng):
    if k == 1:
        return None
    i = int(rng.integers(len(labels)))
    off = int(rng.integers(k - 1))
    new = off + (off >= labels[i])
    return labels[:i] + (new,) + labels[i + 1 :]


def _grow_labels(labels, k, rng):
    """Split one class via fair coin flips; new class gets index k."""
    c = int(rng.integers(k))
    members = [i for i, z in enumerate(labels) if z == c]
    flips = rng.integers(0, 2, size=len(members))
    out = list(labels)
    for i, f in zip(members, flips):
        if f:
            out[i] = k
    return tuple(out), len(members) * _LOG2


def _shrink_labels(labels, k, rng):
    """Merge the last class into a uniformly chosen lower class."""
    a = int(rng.integers(k - 1))
    out = tuple(a if z == k - 1 else z for z in labels)
    n_merged = sum(1 for z in out if z == a)
    return out, -n_merged * _LOG2


def _propose_label_vector(labels, k, k_max, rng):
    """Shared relabel/grow/shrink kernel for label-vector structure spaces.

    Returns ``(labels', k', log_ratio)``; ``labels' is labels`` with
    ``k' == k`` marks a boundary self-proposal.
    """
    u = rng.random()
    if u < 0.8:
        new = _relabel_one(labels, k, rng)
        if new is None:
            return labels, k, 0.0
        return new, k, 0.0
    if u < 0.9:
        if k >= k_max:
            return labels, k, 0.0
        new, ratio = _grow_labels(labels, k, rng)
        return new, k + 1, ratio
    if k == 1:
        return labels, k, 0.0
    new, ratio = _shrink_labels(labels, k, rng)
    return new, k - 1, ratio


def _propose_support(support, p, s_max, rng):
    """Shared add/drop/swap kernel for support-set structure spaces."""
    s = len(support)
    u = rng.random()
    in_support = set(support)
    if u < 1.0 / 3.0:
        if s >= s_max or s >= p:
            return support, 0.0
        comp = [j for j in range(p) if j not in in_support]
        j = comp[int(rng.integers(len(comp)))]
        new = tuple(sorted(support + (j,)))
        return new, math.log(p - s) - math.log(s + 1)
    if u < 2.0 / 3.0:
        if s <= 1:
            return support, 0.0
        j = support[int(rng.integers(s))]
        new = tuple(x for x in support if x != j)
        return new, math.log(s) - math.log(p - s + 1)
    if s == 0 or s >= p:
        return support, 0.0
    j_out = support[int(rng.integers(s))]
    comp = [j for j in range(p) if j not in in_support]
    j_in = comp[int(rng.integers(len(comp)))]
    new = tuple(sorted(x for x in support if x != j_out) + [j_in])
    return tuple(sorted(new)), 0.0


def _support_iter(p, s):
    return itertools.combinations(range(p), s)


def _sample_support(p, s, rng):
    return tuple(sorted(int(j) for j in rng.choice(p, size=s, replace=False)))


# ----------------------------------------------------------------------
# concrete families
# ----------------------------------------------------------------------


class SbmFamily(ModelFamily):
    """Block-structured mean of a directed-pair graph with no self loops.

    Structures are node label vectors z in [k]^n; the signal vector runs
    over the N = n(n-1) ordered off-diagonal pairs, with theta_(i,j) equal
    to the block value Q[z(i), z(j)].
    """

    kind = "sbm"
    indicator_design = True

    def __init__(self, n, k_max=None):
        n = int(n)
        if n < 2:
            raise ConfigError("sbm requires n >= 2")
        self.n = n
        self.k_max = n if k_max is None else int(k_max)
        if not 1 <= self.k_max <= n:
            raise ConfigError("sbm k_max must lie in [1, n]")
        self._pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
        self._pair_i = np.array([i for i, _ in self._pairs])
        self._pair_j = np.array([j for _, j in self._pairs])

    @property
    def n_obs(self):
        return self.n * (self.n - 1)

    def index_set(self):
        return tuple(range(1, self.k_max + 1))

    def effective_dim(self, k):
        return k * k

    def epsilon(self, k):
        return k * k + self.n * math.log(k)

    def log_structure_count(self, k):
        self._validate_tau(k)
        return self.n * math.log(k)

    def structure_count(self, k):
        self._validate_tau(k)
        return k**self.n

    def has_valid_structures(self, k):
        self._validate_tau(k)
        # every class needs two members so that the diagonal block cell
        # (a, a) is hit by at least one ordered pair
        return k == 1 or 2 * k <= self.n

    def log_valid_structure_count(self, k):
        self._validate_tau(k)
        count = math.factorial(k) * _partitions_min_two(self.n, k)
        if count == 0:
            return -math.inf, True
        return math.log(count), True

    def iter_structures(self, k):
        self._validate_tau(k)
        for labels in itertools.product(range(k), repeat=self.n):
            yield Structure(self.kind, k, labels)

    def sample_structure(self, k, rng):
        self._validate_tau(k)
        labels = tuple(int(v) for v in rng.integers(0, k, size=self.n))
        return Structure(self.kind, k, labels)

    def validate_structure(self, structure):
        k = structure.tau
        if k not in self._tau_set():
            return False
        labels = structure.payload
        return len(labels) == self.n and all(0 <= z < k for z in labels)

    def propose_move(self, structure, rng):
        labels, k = structure.payload, structure.tau
        new, k_new, ratio = _propose_label_vector(labels, k, self.k_max, rng)
        return Structure(self.kind, k_new, new), ratio

    def design_column_index(self, structure):
        k = structure.tau
        z = np.asarray(structure.payload)
        return z[self._pair_i] * k + z[self._pair_j]

    def design_matrix(self, structure):
        cols = self.design_column_index(structure)
        ell = self.effective_dim(structure.tau)
        x = np.zeros((self.n_obs, ell))
        x[np.arange(self.n_obs), cols] = 1.0
        return x

    def matrix_to_vector(self, a):
        a = np.asarray(a, dtype=float)
        return np.array([a[i, j] for i, j in self._pairs])

    def vector_to_matrix(self, v):
        out = np.zeros((self.n, self.n))
        for val, (i, j) in zip(v, self._pairs):
            out[i, j] = val
        return out

    def to_dict(self):
        return {"family": self.kind, "n": self.n, "k_max": self.k_max}


class BiclusteringFamily(ModelFamily):
    """Row- and column-clustered mean of an n x m data matrix."""

    kind = "biclustering"
    indicator_design = True

    def __init__(self, n, m, k_max=None, l_max=None):
        self.n, self.m = int(n), int(m)
        if self.n < 1 or self.m < 1:
            raise ConfigError("biclustering requires n, m >= 1")
        self.k_max = self.n if k_max is None else int(k_max)
        self.l_max = self.m if l_max is None else int(l_max)
        if not (1 <= self.k_max <= self.n and 1 <= self.l_max <= self.m):
            raise ConfigError("biclustering k_max/l_max out of range")

    @property
    def n_obs(self):
        return self.n * self.m

    def index_set(self):
        return tuple(
            (k, l)
            for k in range(1, self.k_max + 1)
            for l in range(1, self.l_max + 1)
        )

    def effective_dim(self, tau):
        k, l = tau
        return k * l

    def epsilon(self, tau):
        k, l = tau
        return k * l + self.n * math.log(k) + self.m * math.log(l)

    def log_structure_count(self, tau):
        self._validate_tau(tau)
        k, l = tau
        return self.n * math.log(k) + self.m * math.log(l)

    def structure_count(self, tau):
        self._validate_tau(tau)
        k, l = tau
        return k**self.n * l**self.m

    def log_valid_structure_count(self, tau):
        self._validate_tau(tau)
        k, l = tau
        count = _surjection_count(self.n, k) * _surjection_count(self.m, l)
        if count == 0:
            return -math.inf, True
        return math.log(count), True

    def iter_structures(self, tau):
        self._validate_tau(tau)
        k, l = tau
        for z1 in itertools.product(range(k), repeat=self.n):
            for z2 in itertools.product(range(l), repeat=self.m):
                yield Structure(self.kind, tau, (z1, z2))

    def sample_structure(self, tau, rng):
        self._validate_tau(tau)
        k, l = tau
        z1 = tuple(int(v) for v in rng.integers(0, k, size=self.n))
        z2 = tuple(int(v) for v in rng.integers(0, l, size=self.m))
        return Structure(self.kind, tau, (z1, z2))

    def validate_structure(self, structure):
        if structure.tau not in self._tau_set():
            return False
        k, l = structure.tau
        z1, z2 = structure.payload
        return (
            len(z1) == self.n
            and len(z2) == self.m
            and all(0 <= z < k for z in z1)
            and all(0 <= z < l for z in z2)
        )

    def propose_move(self, structure, rng):
        k, l = structure.tau
        z1, z2 = structure.payload
        if rng.random() < 0.5:
            new, k_new, ratio = _propose_label_vector(z1, k, self.k_max, rng)
            return Structure(self.kind, (k_new, l), (new, z2)), ratio
        new, l_new, ratio = _propose_label_vector(z2, l, self.l_max, rng)
        return Structure(self.kind, (k, l_new), (z1, new)), ratio

    def design_column_index(self, structure):
        _, l = structure.tau
        z1 = np.asarray(structure.payload[0])
        z2 = np.asarray(structure.payload[1])
        return (z1[:, None] * l + z2[None, :]).ravel()

    def design_matrix(self, structure):
        cols = self.design_column_index(structure)
        x = np.zeros((self.n_obs, self.effective_dim(structure.tau)))
        x[np.arange(self.n_obs), cols] = 1.0
        return x

    def to_dict(self):
        return {
            "family": self.kind,
            "n": self.n,
            "m": self.m,
            "k_max": self.k_max,
            "l_max": self.l_max,
        }


class _SupportedRegressionFamily(ModelFamily):
    """Shared machinery for families whose structure is a column support."""

    def __init__(self, design):
        self.design = check_matrix(design)
        self.n, self.p = self.design.shape
        if self.p < 1:
            raise ConfigError("design needs at least one column")
        self.design_rank = int(np.linalg.matrix_rank(self.design))
        self.s_max = min(self.p, self.n)

    def index_set(self):
        return tuple(range(1, self.s_max + 1))

    def log_structure_count(self, s):
        if s == 0:
            return 0.0
        self._validate_tau(s)
        return log_binom(self.p, s)

    def structure_count(self, s):
        if s == 0:
            return 1
        self._validate_tau(s)
        return math.comb(self.p, s)

    def has_valid_structures(self, s):
        self._validate_tau(s)
        return s <= self.design_rank

    def log_valid_structure_count(self, s):
        self._validate_tau(s)
        if self.design_rank == self.p:
            # full-rank design: every support is non-collinear
            return log_binom(self.p, s), True
        return log_binom(self.p, s), False

    def iter_structures(self, s):
        self._validate_tau(s)
        for support in _support_iter(self.p, s):
            yield Structure(self.kind, s, support)

    def sample_structure(self, s, rng):
        self._validate_tau(s)
        return Structure(self.kind, s, _sample_support(self.p, s, rng))

    def validate_structure(self, structure):
        s = structure.tau
        if s not in self._tau_set():
            return False
        support = structure.payload
        return (
            len(support) == s
            and len(set(support)) == s
            and all(0 <= j < self.p for j in support)
        )

    def propose_move(self, structure, rng):
        new, ratio = _propose_support(structure.payload, self.p, self.s_max, rng)
        return Structure(self.kind, len(new), new), ratio


class SparseRegressionFamily(_SupportedRegressionFamily):
    """Fixed-design regression with a sparse coefficient vector."""

    kind = "sparse_regression"

    @property
    def n_obs(self):
        return self.n

    def effective_dim(self, s):
        return s

    def epsilon(self, s):
        return 2.0 * s * math.log(math.e * self.p / s)

    def design_matrix(self, structure):
        return self.design[:, list(structure.payload)]

    def embed_coefficients(self, structure, q):
        beta = np.zeros(self.p)
        beta[list(structure.payload)] = q
        return beta

    def to_dict(self):
        return {
            "family": self.kind,
            "n": self.n,
            "p": self.p,
            "design": self.design.tolist(),
        }


class GroupSparsityFamily(_SupportedRegressionFamily):
    """Multivariate regression whose coefficient rows share one support.

    The parameter for support S is the row block B[S, :], vectorized
    row-major; the realized signal is vec(X B), also row-major.
    """

    kind = "group_sparsity"

    def __init__(self, design, m):
        super().__init__(design)
        self.m = int(m)
        if self.m < 1:
            raise ConfigError("group_sparsity requires m >= 1")

    @property
    def n_obs(self):
        return self.n * self.m

    def effective_dim(self, s):
        return self.m * s

    def epsilon(self, s):
        return s * (self.m + math.log(math.e * self.p / s))

    def design_matrix(self, structure):
        xs = self.design[:, list(structure.payload)]
        return np.kron(xs, np.eye(self.m))

    def embed_coefficients(self, structure, q):
        b = np.zeros((self.p, self.m))
        b[list(structure.payload), :] = np.reshape(q, (len(structure.payload), self.m))
        return b

    def to_dict(self):
        return {
            "family": self.kind,
            "n": self.n,
            "p": self.p,
            "m": self.m,
            "design": self.design.tolist(),
        }


class MultiTaskFamily(ModelFamily):
    """Multivariate regression whose coefficient columns cluster.

    Column j of the p x m coefficient matrix equals prototype column
    Q[:, z(j)] for a label vector z in [k]^m.  The fixed design must have
    a non-singular Gram matrix.
    """

    kind = "multi_task"

    def __init__(self, design, m):
        self.design = check_matrix(design)
        self.n, self.p = self.design.shape
        self.m = int(m)
        if self.m < 1:
            raise ConfigError("multi_task requires m >= 1")
        if np.linalg.matrix_rank(self.design) < self.p:
            raise ConfigError("multi_task requires det(X^T X) > 0 for the fixed design")

    @property
    def n_obs(self):
        return self.n * self.m

    def index_set(self):
        return tuple(range(1, self.m + 1))

    def effective_dim(self, k):
        return self.p * k

    def epsilon(self, k):
        return self.p * k + self.m * math.log(k)

    def log_structure_count(self, k):
        self._validate_tau(k)
        return self.m * math.log(k)

    def structure_count(self, k):
        self._validate_tau(k)
        return k**self.m

    def log_valid_structure_count(self, k):
        self._validate_tau(k)
        count = _surjection_count(self.m, k)
        if count == 0:
            return -math.inf, True
        return math.log(count), True

    def iter_structures(self, k):
        self._validate_tau(k)
        for labels in itertools.product(range(k), repeat=self.m):
            yield Structure(self.kind, k, labels)

    def sample_structure(self, k, rng):
        self._validate_tau(k)
        labels = tuple(int(v) for v in rng.integers(0, k, size=self.m))
        return Structure(self.kind, k, labels)

    def validate_structure(self, structure):
        k = structure.tau
        if k not in self._tau_set():
            return False
        labels = structure.payload
        return len(labels) == self.m and all(0 <= z < k for z in labels)

    def propose_move(self, structure, rng):
        labels, k = structure.payload, structure.tau
        new, k_new, ratio = _propose_label_vector(labels, k, self.m, rng)
        return Structure(self.kind, k_new, new), ratio

    def design_matrix(self, structure):
        # parameter Q is the p x k prototype matrix vectorized row-major;
        # output is vec(X B) row-major over (observation, task)
        k = structure.tau
        z = structure.payload
        x = np.zeros((self.n * self.m, self.p * k))
        for c in range(self.m):
            rows = np.arange(self.n) * self.m + c
            for r in range(self.p):
                x[rows, r * k + z[c]] = self.design[:, r]
        return x

    def embed_coefficients(self, structure, q):
        k = structure.tau
        proto = np.reshape(q, (self.p, k))
        return proto[:, list(structure.payload)]

    def to_dict(self):
        return {
            "family": self.kind,
            "n": self.n,
            "p": self.p,
            "m": self.m,
            "design": self.design.tolist(),
        }


class DictionaryFamily(ModelFamily):
    """Signal factorization theta = Q Z with a ternary sparse code matrix.

    Z lives in {-1, 0, 1}^(p x d) with every column supporting at most s
    entries; the dictionary Q is n x p, vectorized column-major.
    """

    kind = "dictionary"

    def __init__(self, n, d):
        self.n, self.d = int(n), int(d)
        if self.n < 1 or self.d < 1:
            raise ConfigError("dictionary requires n, d >= 1")
        self.p_max = min(self.n, self.d)

    @property
    def n_obs(self):
        return self.n * self.d

    def index_set(self):
        return tuple(
            (p, s) for p in range(1, self.p_max + 1) for s in range(1, p + 1)
        )

    def effective_dim(self, tau):
        p, _ = tau
        return self.n * p

    def epsilon(self, tau):
        p, s = tau
        return 3.0 * (self.n * p + self.d * s * math.log(math.e * p / s))

    def _log_column_count(self, p, s):
        terms = [log_binom(p, t) + t * _LOG2 for t in range(0, s + 1)]
        return float(logsumexp(terms))

    def log_structure_count(self, tau):
        self._validate_tau(tau)
        p, s = tau
        return self.d * self._log_column_count(p, s)

    def structure_count(self, tau):
        self._validate_tau(tau)
        p, s = tau
        per_column = sum(math.comb(p, t) * 2**t for t in range(0, s + 1))
        return per_column**self.d

    def iter_structures(self, tau):
        self._validate_tau(tau)
        p, s = tau
        columns = [
            col
            for col in itertools.product((-1, 0, 1), repeat=p)
            if sum(1 for v in col if v != 0) <= s
        ]
        for chosen in itertools.product(columns, repeat=self.d):
            rows = tuple(tuple(chosen[j][i] for j in range(self.d)) for i in range(p))
            yield Structure(self.kind, tau, rows)

    def sample_structure(self, tau, rng):
        self._validate_tau(tau)
        p, s = tau
        log_wt = np.array([log_binom(p, t) + t * _LOG2 for t in range(s + 1)])
        prob = np.exp(log_wt - logsumexp(log_wt))
        z = np.zeros((p, self.d), dtype=int)
        for j in range(self.d):
            t = int(rng.choice(s + 1, p=prob))
            if t:
                support = rng.choice(p, size=t, replace=False)
                z[support, j] = rng.choice((-1, 1), size=t)
        return Structure(self.kind, tau, tuple(tuple(int(v) for v in row) for row in z))

    def validate_structure(self, structure):
        tau = structure.tau
        if tau not in self._tau_set():
            return False
        p, s = tau
        rows = structure.payload
        if len(rows) != p or any(len(r) != self.d for r in rows):
            return False
        if any(v not in (-1, 0, 1) for r in rows for v in r):
            return False
        col_supp = [sum(1 for i in range(p) if rows[i][j] != 0) for j in range(self.d)]
        return max(col_supp) <= s

    def propose_move(self, structure, rng):
        p, s = structure.tau
        rows = structure.payload
        u = rng.random()
        if u < 0.8:
            return self._flip_entry(rows, p, s, rng)
        if u < 0.85:
            return self._grow_rows(rows, p, s, rng)
        if u < 0.9:
            return self._shrink_rows(rows, p, s, rng)
        if u < 0.95:
            if s + 1 > p:
                return structure, 0.0
            return Structure(self.kind, (p, s + 1), rows), 0.0
        if s - 1 < 1:
            return structure, 0.0
        col_supp = max(
            sum(1 for i in range(p) if rows[i][j] != 0) for j in range(self.d)
        )
        if col_supp > s - 1:
            return structure, 0.0
        return Structure(self.kind, (p, s - 1), rows), 0.0

    def _flip_entry(self, rows, p, s, rng):
        i = int(rng.integers(p))
        j = int(rng.integers(self.d))
        current = rows[i][j]
        col_supp = sum(1 for r in range(p) if rows[r][j] != 0)
        if current == 0:
            allowed = (-1, 1) if col_supp < s else ()
        else:
            allowed = (0, -current)
        if not allowed:
            return Structure(self.kind, (p, s), rows), 0.0
        value = allowed[int(rng.integers(len(allowed)))]
        new_rows = tuple(
            tuple(value if (r == i and c == j) else rows[r][c] for c in range(self.d))
            for r in range(p)
        )
        # the reverse flip always has exactly two live choices: either the
        # entry is nonzero ({0, -v}), or it just became zero and the column
        # support dropped below the bound ({-1, +1}); ratio cancels
        return Structure(self.kind, (p, s), new_rows), 0.0

    def _grow_rows(self, rows, p, s, rng):
        if p + 1 > self.p_max:
            return Structure(self.kind, (p, s), rows), 0.0
        col_supp = [sum(1 for r in range(p) if rows[r][j] != 0) for j in range(self.d)]
        new_row = []
        log_fwd_choice = 0.0
        for j in range(self.d):
            allowed = (-1, 0, 1) if col_supp[j] < s else (0,)
            new_row.append(allowed[int(rng.integers(len(allowed)))])
            log_fwd_choice -= math.log(len(allowed))
        new_rows = rows + (tuple(new_row),)
        return Structure(self.kind, (p + 1, s), new_rows), -log_fwd_choice

    def _shrink_rows(self, rows, p, s, rng):
        if p - 1 < 1 or p - 1 < s:
            return Structure(self.kind, (p, s), rows), 0.0
        new_rows = rows[:-1]
        col_supp = [
            sum(1 for r in range(p - 1) if new_rows[r][j] != 0) for j in range(self.d)
        ]
        log_rev_choice = 0.0
        for j in range(self.d):
            allowed = 3 if col_supp[j] < s else 1
            log_rev_choice -= math.log(allowed)
        return Structure(self.kind, (p - 1, s), new_rows), log_rev_choice

    def design_matrix(self, structure):
        p, _ = structure.tau
        z = np.array(structure.payload, dtype=float)
        return np.kron(z.T, np.eye(self.n))

    def to_dict(self):
        return {"family": self.kind, "n": self.n, "d": self.d}


class SobolevFamily(ModelFamily):
    """Prefix-truncation family for a length-n coefficient sequence.

    Data should be brought to unit noise scale before fitting (sequence
    observations at noise level 1/sqrt(n) are multiplied by sqrt(n)).
    """

    kind = "sobolev_sequence"
    indicator_design = True

    def __init__(self, n):
        self.n = int(n)
        if self.n < 1:
            raise ConfigError("sobolev_sequence requires n >= 1")

    @property
    def n_obs(self):
        return self.n

    def index_set(self):
        return tuple(range(1, self.n + 1))

    def effective_dim(self, k):
        return k

    def epsilon(self, k):
        return 2.0 * k

    def log_structure_count(self, k):
        self._validate_tau(k)
        return 0.0

    def structure_count(self, k):
        self._validate_tau(k)
        return 1

    def log_valid_structure_count(self, k):
        self._validate_tau(k)
        return 0.0, True

    def iter_structures(self, k):
        self._validate_tau(k)
        yield Structure(self.kind, k, k)

    def sample_structure(self, k, rng):
        self._validate_tau(k)
        return Structure(self.kind, k, k)

    def validate_structure(self, structure):
        return structure.tau in self._tau_set() and structure.payload == structure.tau

    def propose_move(self, structure, rng):
        k = structure.tau
        step = 1 if rng.random() < 0.5 else -1
        k_new = k + step
        if not 1 <= k_new <= self.n:
            return structure, 0.0
        return Structure(self.kind, k_new, k_new), 0.0

    def design_column_index(self, structure):
        k = structure.tau
        cols = np.full(self.n, -1)
        cols[:k] = np.arange(k)
        return cols

    def design_matrix(self, structure):
        k = structure.tau
        return np.eye(self.n)[:, :k]

    def embed_coefficients(self, structure, q):
        theta = np.zeros(self.n)
        theta[: structure.tau] = q
        return theta

    def to_dict(self):
        return {"family": self.kind, "n": self.n}


class BesovLevelFamily(_SupportedRegressionFamily):
    """Sparse-support family on one dyadic resolution level.

    The level-j space has 2^j coefficients with identity design; data
    should be scaled to unit noise before fitting, as for the prefix
    family.
    """

    kind = "besov_level"
    indicator_design = True

    def __init__(self, level):
        self.level = int(level)
        if self.level < 0:
            raise ConfigError("besov_level requires level >= 0")
        super().__init__(np.eye(2**self.level))

    @property
    def n_obs(self):
        return self.p

    def effective_dim(self, s):
        return s

    def epsilon(self, s):
        return 2.0 * s * math.log(math.e * self.p / s)

    def log_valid_structure_count(self, s):
        self._validate_tau(s)
        return log_binom(self.p, s), True

    def design_column_index(self, structure):
        cols = np.full(self.p, -1)
        cols[list(structure.payload)] = np.arange(len(structure.payload))
        return cols

    def design_matrix(self, structure):
        return self.design[:, list(structure.payload)]

    def embed_coefficients(self, structure, q):
        theta = np.zeros(self.p)
        theta[list(structure.payload)] = q
        return theta

    def to_dict(self):
        return {"family": self.kind, "level": self.level}


class AggregationFamily(_SupportedRegressionFamily):
    """Sparse regression with a flat-complexity full-rank model.

    Supports of size below the design rank r behave as in sparse
    regression; the single size-r model uses the first r columns and the
    lighter penalty 2r, so the posterior never pays more than the
    intrinsic dimension of the design.
    """

    kind = "aggregation_regression"
    prior_energy_scale = 0.5

    def __init__(self, design):
        super().__init__(design)
        self.rank = self.design_rank
        if self.rank < 1:
            raise ConfigError("aggregation requires a nonzero design")
        if np.linalg.matrix_rank(self.design[:, : self.rank]) < self.rank:
            raise ConfigError(
                "aggregation requires the first rank(X) columns to span the "
                "column space; reorder the dictionary"
            )
        self.s_max = self.rank

    @property
    def n_obs(self):
        return self.n

    def index_set(self):
        return tuple(range(1, self.rank + 1))

    def effective_dim(self, s):
        return s

    def epsilon(self, s):
        if s == self.rank:
            return 2.0 * s
        return 2.0 * s * math.log(math.e * self.p / s)

    def log_structure_count(self, s):
        if s == 0:
            return 0.0
        self._validate_tau(s)
        if s == self.rank:
            return 0.0
        return log_binom(self.p, s)

    def structure_count(self, s):
        if s == 0:
            return 1
        self._validate_tau(s)
        if s == self.rank:
            return 1
        return math.comb(self.p, s)

    def log_valid_structure_count(self, s):
        self._validate_tau(s)
        if s == self.rank:
            return 0.0, True
        if self.design_rank == self.p:
            return log_binom(self.p, s), True
        return log_binom(self.p, s), False

    def iter_structures(self, s):
        self._validate_tau(s)
        if s == self.rank:
            yield Structure(self.kind, s, tuple(range(self.rank)))
            return
        for support in _support_iter(self.p, s):
            yield Structure(self.kind, s, support)

    def sample_structure(self, s, rng):
        self._validate_tau(s)
        if s == self.rank:
            return Structure(self.kind, s, tuple(range(self.rank)))
        return Structure(self.kind, s, _sample_support(self.p, s, rng))

    def validate_structure(self, structure):
        s = structure.tau
        if s not in self._tau_set():
            return False
        support = structure.payload
        if s == self.rank:
            return support == tuple(range(self.rank))
        return (
            len(support) == s
            and len(set(support)) == s
            and all(0 <= j < self.p for j in support)
        )

    def design_matrix(self, structure):
        return self.design[:, list(structure.payload)]

    def embed_coefficients(self, structure, q):
        beta = np.zeros(self.p)
        beta[list(structure.payload)] = q
        return beta

    def to_dict(self):
        return {
            "family": self.kind,
            "n": self.n,
            "p": self.p,
            "design": self.design.tolist(),
        }


class GroupTwoLevelFamily(ModelFamily):
    """Cell-level support selection for a p x m matrix under identity design.

    A structure is a nonempty set of cells T; its index is the pair
    (row-support size, cell count).  The penalty charges full rows for the
    row selection plus a per-cell refinement term, so the posterior can
    zero out cells inside active rows.
    """

    kind = "group_two_level"
    indicator_design = True

    def __init__(self, p, m):
        self.p, self.m = int(p), int(m)
        if self.p < 1 or self.m < 1:
            raise ConfigError("group_two_level requires p, m >= 1")

    @property
    def n_obs(self):
        return self.p * self.m

    def index_set(self):
        return tuple(
            (s, t)
            for s in range(1, self.p + 1)
            for t in range(s, s * self.m + 1)
        )

    def effective_dim(self, tau):
        _, t = tau
        return t

    def epsilon(self, tau):
        s, t = tau
        return (
            self.m * s
            + s * math.log(math.e * self.p / s)
            + t * math.log(math.e * self.m * s / t)
        )

    def log_structure_count(self, tau):
        self._validate_tau(tau)
        s, t = tau
        count = math.comb(self.p, s) * _covering_cell_sets(s, self.m, t)
        return math.log(count)

    def structure_count(self, tau):
        self._validate_tau(tau)
        s, t = tau
        return math.comb(self.p, s) * _covering_cell_sets(s, self.m, t)

    def log_valid_structure_count(self, tau):
        return self.log_structure_count(tau), True

    def iter_structures(self, tau):
        self._validate_tau(tau)
        s, t = tau
        for rows in _support_iter(self.p, s):
            cells = [(i, j) for i in rows for j in range(self.m)]
            for chosen in itertools.combinations(cells, t):
                if len({i for i, _ in chosen}) == s:
                    yield Structure(self.kind, tau, tuple(sorted(chosen)))

    def sample_structure(self, tau, rng):
        self._validate_tau(tau)
        s, t = tau
        rows = _sample_support(self.p, s, rng)
        cells = [(i, j) for i in rows for j in range(self.m)]
        while True:
            idx = rng.choice(len(cells), size=t, replace=False)
            chosen = [cells[i] for i in idx]
            if len({i for i, _ in chosen}) == s:
                return Structure(self.kind, tau, tuple(sorted(chosen)))

    def validate_structure(self, structure):
        tau = structure.tau
        if tau not in self._tau_set():
            return False
        s, t = tau
        cells = structure.payload
        if len(cells) != t or len(set(cells)) != t:
            return False
        if any(not (0 <= i < self.p and 0 <= j < self.m) for i, j in cells):
            return False
        return len({i for i, _ in cells}) == s

    def propose_move(self, structure, rng):
        s, t = structure.tau
        cells = set(structure.payload)
        u = rng.random()
        if u < 0.8:
            i = int(rng.integers(self.p))
            j = int(rng.integers(self.m))
            cell = (i, j)
            if cell in cells:
                if t == 1:
                    return structure, 0.0
                new = cells - {cell}
            else:
                new = cells | {cell}
            return self._make(new), 0.0
        rows = {i for i, _ in cells}
        if u < 0.9:
            free = [i for i in range(self.p) if i not in rows]
            if not free:
                return structure, 0.0
            i = free[int(rng.integers(len(free)))]
            new = cells | {(i, j) for j in range(self.m)}
            full_after = self._full_row_count(new)
            ratio = math.log(len(free)) - math.log(full_after)
            return self._make(new), ratio
        full = self._full_rows(cells)
        if not full:
            return structure, 0.0
        i = full[int(rng.integers(len(full)))]
        new = cells - {(i, j) for j in range(self.m)}
        if not new:
            return structure, 0.0
        ratio = math.log(len(full)) - math.log(self.p - (s - 1))
        return self._make(new), ratio

    def _full_rows(self, cells):
        counts = {}
        for i, _ in cells:
            counts[i] = counts.get(i, 0) + 1
        return sorted(i for i, c in counts.items() if c == self.m)

    def _full_row_count(self, cells):
        return len(self._full_rows(cells))

    def _make(self, cells):
        cells = tuple(sorted(cells))
        s = len({i for i, _ in cells})
        return Structure(self.kind, (s, len(cells)), cells)

    def design_column_index(self, structure):
        cols = np.full(self.n_obs, -1)
        for pos, (i, j) in enumerate(structure.payload):
            cols[i * self.m + j] = pos
        return cols

    def design_matrix(self, structure):
        x = np.zeros((self.n_obs, len(structure.payload)))
        for pos, (i, j) in enumerate(structure.payload):
            x[i * self.m + j, pos] = 1.0
        return x

    def embed_coefficients(self, structure, q):
        b = np.zeros((self.p, self.m))
        for pos, (i, j) in enumerate(structure.payload):
            b[i, j] = q[pos]
        return b

    def to_dict(self):
        return {"family": self.kind, "p": self.p, "m": self.m}


# ----------------------------------------------------------------------
# JSON descriptors
# ----------------------------------------------------------------------

_FAMILY_KINDS = {
    cls.kind: cls
    for cls in (
        SbmFamily,
        BiclusteringFamily,
        SparseRegressionFamily,
        GroupSparsityFamily,
        MultiTaskFamily,
        DictionaryFamily,
        SobolevFamily,
        BesovLevelFamily,
        AggregationFamily,
        GroupTwoLevelFamily,
    )
}


def family_from_dict(data):
    """Build a family from its JSON descriptor (matrices row-major)."""
    if "family" not in data:
        raise ConfigError("family descriptor needs a 'family' key")
    kind = data["family"]
    cls = _FAMILY_KINDS.get(kind)
    if cls is None:
        raise ConfigError(f"unknown family kind {kind!r}")
    try:
        if kind == "sbm":
            return cls(n=data["n"], k_max=data.get("k_max"))
        if kind == "biclustering":
            return cls(
                n=data["n"],
                m=data["m"],
                k_max=data.get("k_max"),
                l_max=data.get("l_max"),
            )
        if kind in ("sparse_regression", "aggregation_regression"):
            return cls(design=data["design"])
        if kind == "group_sparsity":
            return cls(design=data["design"], m=data["m"])
        if kind == "multi_task":
            return cls(design=data["design"], m=data["m"])
        if kind == "dictionary":
            return cls(n=data["n"], d=data["d"])
        if kind == "sobolev_sequence":
            return cls(n=data["n"])
        if kind == "besov_level":
            return cls(level=data["level"])
        if kind == "group_two_level":
            return cls(p=data["p"], m=data["m"])
    except KeyError as exc:
        raise ConfigError(f"family descriptor for {kind!r} is missing {exc}") from exc
    raise ConfigError(f"unhandled family kind {kind!r}")


# ----------------------------------------------------------------------
# structural-condition checks
# ----------------------------------------------------------------------


def check_complexity_dominates(family):
    """Verify epsilon(tau) >= ell(tau) + ln |Z_tau| over the entire index set.

    Violations are reported as data, not raised.
    """
    violations = []
    for tau in family.index_set():
        value = family.complexity(tau)
        bound = value.ell + value.log_count
        if value.epsilon < bound - 1e-9:
            violations.append((tau, value.epsilon, bound))
    return ConditionReport(
        family_kind=family.kind,
        condition="complexity_dominates",
        passed=not violations,
        violations=tuple(violations),
    )


def check_capacity(family, t_max):
    """Count indices with complexity in (t-1, t] and verify count <= t."""
    t_max = int(t_max)
    if t_max < 1:
        raise ConfigError("t_max must be >= 1")
    eps = np.array([family.epsilon(tau) for tau in family.index_set()])
    violations = []
    for t in range(1, t_max + 1):
        count = int(np.sum((eps > t - 1) & (eps <= t)))
        if count > t:
            violations.append((t, count))
    return ConditionReport(
        family_kind=family.kind,
        condition="capacity",
        passed=not violations,
        violations=tuple(violations),
    )
