"""Design realization: hand examples, brute-force round trips, projections."""

import math

import numpy as np
import pytest

from structbayes import (
    AggregationFamily,
    BesovLevelFamily,
    BiclusteringFamily,
    CollinearStructure,
    ConfigError,
    DictionaryFamily,
    GroupSparsityFamily,
    GroupTwoLevelFamily,
    MultiTaskFamily,
    SbmFamily,
    SobolevFamily,
    SparseRegressionFamily,
    Structure,
    build_design,
)
from structbayes.design import DenseDesign, IndicatorDesign
from structbayes.experiments import gaussian_design


class TestHandBuiltDesigns:
    def test_identity_subcolumn(self):
        fam = SparseRegressionFamily(design=np.eye(2))
        design = build_design(fam, Structure(fam.kind, 1, (0,)))
        np.testing.assert_array_equal(design.matrix, [[1.0], [0.0]])
        assert design.log_det_gram == pytest.approx(0.0, abs=1e-14)

    def test_single_block_graph_is_all_ones(self):
        fam = SbmFamily(n=3)
        design = build_design(fam, Structure(fam.kind, 1, (0, 0, 0)))
        assert design.n_obs == 6
        np.testing.assert_array_equal(design.matrix, np.ones((6, 1)))
        assert design.log_det_gram == pytest.approx(math.log(6.0))

    def test_dictionary_sign_column(self):
        fam = DictionaryFamily(n=1, d=2)
        structure = Structure(fam.kind, (1, 1), ((1, -1),))
        design = build_design(fam, structure)
        np.testing.assert_allclose(design.apply([2.0]), [2.0, -2.0])
        assert design.log_det_gram == pytest.approx(math.log(2.0))

    def test_collinear_structure_raises(self):
        x = np.ones((4, 2))
        fam = SparseRegressionFamily(design=x)
        with pytest.raises(CollinearStructure):
            build_design(fam, Structure(fam.kind, 2, (0, 1)))

    def test_inconsistent_payload_rejected(self):
        fam = SparseRegressionFamily(design=np.eye(3))
        with pytest.raises(ConfigError):
            build_design(fam, Structure(fam.kind, 2, (0, 0)))


def _brute_signal(family, structure, q):
    """Per-family explicit-loop signal construction, independent of the
    design-matrix path."""
    if isinstance(family, SbmFamily):
        k = structure.tau
        z = structure.payload
        qm = np.reshape(q, (k, k))
        out = []
        for i in range(family.n):
            for j in range(family.n):
                if i != j:
                    out.append(qm[z[i], z[j]])
        return np.array(out)
    if isinstance(family, BiclusteringFamily):
        k, l = structure.tau
        z1, z2 = structure.payload
        qm = np.reshape(q, (k, l))
        return np.array(
            [qm[z1[i], z2[j]] for i in range(family.n) for j in range(family.m)]
        )
    if isinstance(family, GroupSparsityFamily):
        s = structure.tau
        b = np.reshape(q, (s, family.m))
        xs = family.design[:, list(structure.payload)]
        return (xs @ b).reshape(-1)
    if isinstance(family, MultiTaskFamily):
        k = structure.tau
        proto = np.reshape(q, (family.p, k))
        cols = [family.design @ proto[:, structure.payload[j]] for j in range(family.m)]
        return np.column_stack(cols).reshape(-1)
    if isinstance(family, DictionaryFamily):
        p, _ = structure.tau
        z = np.array(structure.payload, dtype=float)
        qm = np.reshape(q, (family.n, p), order="F")
        return (qm @ z).reshape(-1, order="F")
    if isinstance(family, SobolevFamily):
        theta = np.zeros(family.n)
        theta[: structure.tau] = q
        return theta
    if isinstance(family, GroupTwoLevelFamily):
        b = np.zeros((family.p, family.m))
        for pos, (i, j) in enumerate(structure.payload):
            b[i, j] = q[pos]
        return b.reshape(-1)
    if isinstance(family, (SparseRegressionFamily, BesovLevelFamily, AggregationFamily)):
        beta = np.zeros(family.p)
        beta[list(structure.payload)] = q
        return family.design @ beta
    raise AssertionError(family)


class TestRoundTrips:
    @pytest.mark.parametrize(
        "family",
        [
            SbmFamily(n=5),
            BiclusteringFamily(n=4, m=3),
            SparseRegressionFamily(design=gaussian_design(9, 5, 0)),
            GroupSparsityFamily(design=gaussian_design(9, 4, 1), m=3),
            MultiTaskFamily(design=gaussian_design(7, 3, 2), m=4),
            DictionaryFamily(n=3, d=3),
            SobolevFamily(n=6),
            BesovLevelFamily(level=3),
            AggregationFamily(design=gaussian_design(9, 6, 3)),
            GroupTwoLevelFamily(p=4, m=3),
        ],
        ids=lambda f: f.kind,
    )
    def test_design_matches_explicit_loops(self, family, rng):
        from structbayes.prior import sample_valid_structure

        for tau in list(family.index_set())[:5]:
            if not family.has_valid_structures(tau):
                continue
            structure = sample_valid_structure(family, tau, rng)
            design = build_design(family, structure)
            q = rng.standard_normal(design.ell)
            np.testing.assert_allclose(
                design.apply(q), _brute_signal(family, structure, q), atol=1e-12
            )
            assert design.matrix.shape == (family.n_obs, design.ell)
            np.testing.assert_allclose(
                design.matrix @ q, design.apply(q), atol=1e-12
            )


class TestProjections:
    def test_pythagorean_identity_dense(self, rng):
        worst = 0.0
        for _ in range(100):
            x = rng.standard_normal((10, 3))
            design = DenseDesign(x)
            y = 3.0 * rng.standard_normal(10)
            q = rng.standard_normal(3)
            proj = design.project(y)
            lhs = np.sum((design.apply(q) - y) ** 2)
            rhs = (
                np.sum((design.apply(q) - design.apply(proj.coefficients)) ** 2)
                + proj.resid_norm**2
            )
            worst = max(worst, abs(lhs - rhs) / max(1.0, lhs))
        assert worst < 1e-10

    def test_projection_norms_split_energy(self, rng):
        x = rng.standard_normal((8, 3))
        design = DenseDesign(x)
        y = rng.standard_normal(8)
        proj = design.project(y)
        assert proj.proj_norm**2 + proj.resid_norm**2 == pytest.approx(
            float(y @ y), rel=1e-12
        )

    def test_indicator_agrees_with_dense(self, rng):
        fam = SbmFamily(n=6)
        structure = Structure(fam.kind, 2, (0, 0, 0, 1, 1, 1))
        fast = build_design(fam, structure)
        slow = DenseDesign(fam.design_matrix(structure))
        assert isinstance(fast, IndicatorDesign)
        assert fast.log_det_gram == pytest.approx(slow.log_det_gram, rel=1e-12)
        y = rng.standard_normal(fam.n_obs)
        pf, ps = fast.project(y), slow.project(y)
        assert pf.proj_norm == pytest.approx(ps.proj_norm, rel=1e-12)
        assert pf.resid_norm == pytest.approx(ps.resid_norm, rel=1e-12)
        np.testing.assert_allclose(pf.coefficients, ps.coefficients, atol=1e-12)
        q = rng.standard_normal(4)
        np.testing.assert_allclose(fast.apply(q), slow.apply(q), atol=1e-14)

    def test_whitening_preserves_signal_norm(self, rng):
        for make in (
            lambda: DenseDesign(rng.standard_normal((9, 4))),
            lambda: build_design(
                SbmFamily(n=5), Structure("sbm", 2, (0, 0, 1, 1, 0))
            ),
        ):
            design = make()
            u = rng.standard_normal(design.ell)
            q = design.whiten_from_sphere(u)
            assert np.linalg.norm(design.apply(q)) == pytest.approx(
                np.linalg.norm(u), rel=1e-10
            )
