"""Realized linear designs with cached factorizations.

A design operator wraps the N x ell matrix realizing one structure,
exposing the pieces posterior computations need: the log determinant of
the Gram matrix, least squares projections of data vectors, and the
whitening map used to turn unit-sphere draws into parameter draws.

Two implementations share the interface: a dense one backed by a reduced
QR factorization, and an indicator one for designs whose columns are
disjoint 0/1 indicators (block means and coordinate selections), where
every quantity reduces to per-column counts and sums.
"""

import numpy as np
from scipy.linalg import solve_triangular

from .errors import CapExceeded, CollinearStructure, ConfigError
from .validation import check_vector

__all__ = [
    "DesignOperator",
    "build_design",
    "verify_structure",
    "enumerate_structures",
]

# relative pivot tolerance of the rank test: a Cholesky pivot is accepted
# when pivot^2 > tol * max Gram diagonal
PIVOT_RTOL = 1e-10


class Projection:
    """Least squares split of a data vector against one design."""

    __slots__ = ("coefficients", "proj_norm", "resid_norm")

    def __init__(self, coefficients, proj_norm, resid_norm):
        self.coefficients = coefficients
        self.proj_norm = proj_norm
        self.resid_norm = resid_norm


class DesignOperator:
    """Abstract interface; use :func:`build_design` to construct one."""

    ell = None
    n_obs = None
    log_det_gram = None

    def apply(self, q):
        """Signal X @ q realized by the parameter vector q."""
        raise NotImplementedError

    def project(self, y):
        """Least squares coefficients plus projection/residual norms."""
        raise NotImplementedError

    def whiten_from_sphere(self, u):
        """Map a unit vector u to q with ||X q|| == ||u||."""
        raise NotImplementedError

    @property
    def matrix(self):
        raise NotImplementedError


class DenseDesign(DesignOperator):
    def __init__(self, x, structure=None):
        x = np.asarray(x, dtype=float)
        if x.ndim != 2:
            raise ConfigError(f"design matrix must be 2-d, got shape {x.shape}")
        self._x = x
        self.n_obs, self.ell = x.shape
        if self.ell < 1:
            raise ConfigError("design needs at least one column")
        u, r = np.linalg.qr(x, mode="reduced")
        # normalize to the upper Cholesky factor of X^T X (positive diagonal)
        signs = np.sign(np.diag(r))
        signs[signs == 0] = 1.0
        r = signs[:, None] * r
        u = u * signs[None, :]
        gram_diag_max = float(np.max(np.sum(x * x, axis=0)))
        pivots = np.diag(r) ** 2
        if gram_diag_max <= 0 or np.min(pivots) <= PIVOT_RTOL * gram_diag_max:
            raise CollinearStructure(structure)
        self._u = u
        self.gram_factor = r
        self.log_det_gram = float(2.0 * np.sum(np.log(np.diag(r))))

    def apply(self, q):
        return self._x @ np.asarray(q, dtype=float)

    def project(self, y):
        y = check_vector(y, self.n_obs)
        image_coords = self._u.T @ y
        coeff = solve_triangular(self.gram_factor, image_coords, lower=False)
        resid = y - self._u @ image_coords
        return Projection(
            coefficients=coeff,
            proj_norm=float(np.linalg.norm(image_coords)),
            resid_norm=float(np.linalg.norm(resid)),
        )

    def whiten_from_sphere(self, u):
        return solve_triangular(
            self.gram_factor, np.asarray(u, dtype=float), lower=False
        )

    @property
    def matrix(self):
        return self._x


class IndicatorDesign(DesignOperator):
    """Design whose rows each load on at most one column with weight one."""

    def __init__(self, column_index, ell, structure=None):
        cols = np.asarray(column_index)
        self._cols = cols
        self._mask = cols >= 0
        self.n_obs = cols.shape[0]
        self.ell = int(ell)
        if self.ell < 1:
            raise ConfigError("design needs at least one column")
        counts = np.bincount(cols[self._mask], minlength=self.ell).astype(float)
        if counts.min() <= 0:
            raise CollinearStructure(structure)
        self._counts = counts
        self._sqrt_counts = np.sqrt(counts)
        self.log_det_gram = float(np.sum(np.log(counts)))

    def apply(self, q):
        q = np.asarray(q, dtype=float)
        out = np.zeros(self.n_obs)
        out[self._mask] = q[self._cols[self._mask]]
        return out

    def project(self, y):
        y = check_vector(y, self.n_obs)
        sums = np.bincount(self._cols[self._mask], weights=y[self._mask], minlength=self.ell)
        coeff = sums / self._counts
        resid = y - self.apply(coeff)
        return Projection(
            coefficients=coeff,
            proj_norm=float(np.sqrt(np.sum(sums * sums / self._counts))),
            resid_norm=float(np.linalg.norm(resid)),
        )

    def whiten_from_sphere(self, u):
        return np.asarray(u, dtype=float) / self._sqrt_counts

    @property
    def gram_factor(self):
        return np.diag(self._sqrt_counts)

    @property
    def matrix(self):
        x = np.zeros((self.n_obs, self.ell))
        rows = np.nonzero(self._mask)[0]
        x[rows, self._cols[rows]] = 1.0
        return x


def build_design(family, structure):
    """Realize a verified structure as a design operator.

    Raises :class:`CollinearStructure` when the Gram matrix fails the
    pivot test, and :class:`ConfigError` for payloads inconsistent with
    the family.
    """
    if not family.validate_structure(structure):
        raise ConfigError(
            f"structure {structure!r} is not a member of any {family.kind} "
            f"structure space"
        )
    ell = family.effective_dim(structure.tau)
    if family.indicator_design:
        cols = family.design_column_index(structure)
        return IndicatorDesign(cols, ell, structure=structure)
    x = family.design_matrix(structure)
    if x.shape != (family.n_obs, ell):
        raise ConfigError(
            f"family {family.kind} produced a design of shape {x.shape}, "
            f"expected {(family.n_obs, ell)}"
        )
    return DenseDesign(x, structure=structure)


def verify_structure(family, structure):
    """Whether the structure is valid and realizes a non-singular design."""
    if not family.validate_structure(structure):
        return False
    try:
        build_design(family, structure)
    except CollinearStructure:
        return False
    return True


def enumerate_structures(family, tau, cap=100_000):
    """Yield ``(structure, verified)`` over the whole tau space, in order.

    ``verified`` records whether the realized design passed the rank
    test.  Raises :class:`CapExceeded` (reporting the exact space size)
    when the space is larger than ``cap``; callers should switch to the
    sampling path in that case.
    """
    count = family.structure_count(tau)
    if count > cap:
        raise CapExceeded(count, cap)

    def generate():
        for structure in family.iter_structures(tau):
            yield structure, verify_structure(family, structure)

    return generate()
