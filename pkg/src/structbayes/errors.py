"""Exception types shared across the package."""


class StructBayesError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(StructBayesError):
    """A configuration value or combination of values is invalid."""


class CollinearStructure(StructBayesError):
    """The design realized by a structure has a singular Gram matrix."""

    def __init__(self, structure=None, message=None):
        self.structure = structure
        if message is None:
            message = f"design for structure {structure!r} is collinear"
        super().__init__(message)


class CapExceeded(StructBayesError):
    """An enumeration would exceed the configured cap."""

    def __init__(self, count, cap, message=None):
        self.count = count
        self.cap = cap
        if message is None:
            message = (
                f"enumeration requires {count} structures, exceeding the cap "
                f"of {cap}; use the MCMC path instead"
            )
        super().__init__(message)


class NoValidModels(StructBayesError):
    """Every model index has an empty set of non-collinear structures."""


class NumericFailure(StructBayesError):
    """A NaN or infinity was produced where a finite value is required."""
