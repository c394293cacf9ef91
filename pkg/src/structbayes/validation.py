"""Input validation helpers used across estimators and module functions."""

import numpy as np

from .errors import ConfigError, NumericFailure


def check_rng(random_state=None):
    """Coerce ``random_state`` into a ``numpy.random.Generator``.

    Accepts ``None`` (fresh OS-seeded generator), an integer seed, a
    ``SeedSequence`` or an existing ``Generator`` (returned as-is).
    """
    if isinstance(random_state, np.random.Generator):
        return random_state
    if random_state is None or isinstance(
        random_state, (int, np.integer, np.random.SeedSequence)
    ):
        return np.random.default_rng(random_state)
    raise ConfigError(
        f"random_state must be None, an int, a SeedSequence or a Generator, "
        f"got {type(random_state).__name__}"
    )


def substream(seed, *key):
    """Derive a reproducible generator from a base seed and an index key.

    Streams for distinct keys are statistically independent, and the
    mapping (seed, key) -> stream does not depend on execution order, so
    work sharded across processes stays reproducible.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def check_vector(y, n_expected=None, name="y"):
    """Validate a data vector: 1-d, finite, optionally of a fixed length."""
    arr = np.asarray(y, dtype=float)
    if arr.ndim != 1:
        raise ConfigError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if n_expected is not None and arr.shape[0] != n_expected:
        raise ConfigError(
            f"{name} has length {arr.shape[0]}, expected {n_expected}"
        )
    if not np.all(np.isfinite(arr)):
        raise NumericFailure(f"{name} contains non-finite entries")
    return arr


def check_matrix(x, name="design"):
    """Validate a 2-d finite matrix of floats."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ConfigError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericFailure(f"{name} contains non-finite entries")
    return arr


def check_positive(value, name):
    value = float(value)
    if not value > 0 or not np.isfinite(value):
        raise ConfigError(f"{name} must be a positive finite number, got {value}")
    return value


def check_positive_int(value, name):
    ivalue = int(value)
    if ivalue != value or ivalue < 1:
        raise ConfigError(f"{name} must be a positive integer, got {value}")
    return ivalue


def assert_finite(value, context):
    """Raise :class:`NumericFailure` if ``value`` has any NaN/Inf entries."""
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NumericFailure(f"non-finite value encountered in {context}")
    return value
