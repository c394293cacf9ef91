"""Complexity values, structure counts, and structural-condition scans."""

import itertools
import math

import numpy as np
import pytest

from structbayes import (
    AggregationFamily,
    BesovLevelFamily,
    BiclusteringFamily,
    ConfigError,
    DictionaryFamily,
    GroupSparsityFamily,
    GroupTwoLevelFamily,
    MultiTaskFamily,
    SbmFamily,
    SobolevFamily,
    SparseRegressionFamily,
    check_capacity,
    check_complexity_dominates,
    family_from_dict,
)
from structbayes.experiments import gaussian_design, shipped_families


class TestComplexityValues:
    def test_sbm_single_block_has_unit_complexity(self):
        value = SbmFamily(n=10).complexity(1)
        assert value.epsilon == 1.0
        assert value.ell == 1
        assert value.log_count == 0.0

    def test_sparse_single_coefficient(self):
        fam = SparseRegressionFamily(design=np.eye(10))
        value = fam.complexity(1)
        assert value.epsilon == pytest.approx(6.605170185988092, abs=1e-12)
        assert value.ell == 1

    def test_sbm_two_blocks(self):
        value = SbmFamily(n=4).complexity(2)
        assert value.epsilon == pytest.approx(6.772588722239782, abs=1e-12)
        assert value.ell == 4

    def test_unknown_index_raises(self):
        with pytest.raises(ConfigError):
            SbmFamily(n=4).complexity(9)
        with pytest.raises(ConfigError):
            SparseRegressionFamily(design=np.eye(3)).complexity(7)

    @pytest.mark.parametrize(
        "family, tau, epsilon, ell",
        [
            (GroupSparsityFamily(design=np.eye(8), m=3), 2, 2 * (3 + math.log(4 * math.e)), 6),
            (MultiTaskFamily(design=np.eye(4), m=6), 2, 8 + 6 * math.log(2), 8),
            (SobolevFamily(n=9), 4, 8.0, 4),
            (BesovLevelFamily(level=3), 2, 4 * math.log(4 * math.e), 2),
        ],
    )
    def test_family_table(self, family, tau, epsilon, ell):
        value = family.complexity(tau)
        assert value.epsilon == pytest.approx(epsilon, rel=1e-12)
        assert value.ell == ell

    def test_dictionary_complexity(self):
        fam = DictionaryFamily(n=3, d=4)
        value = fam.complexity((2, 1))
        assert value.epsilon == pytest.approx(
            3 * (3 * 2 + 4 * 1 * math.log(2 * math.e)), rel=1e-12
        )
        assert value.ell == 6

    def test_aggregation_flat_top_model(self):
        fam = AggregationFamily(design=np.eye(5))
        assert fam.complexity(5).epsilon == pytest.approx(10.0)
        assert fam.complexity(2).epsilon == pytest.approx(
            4 * math.log(5 * math.e / 2), rel=1e-12
        )
        assert fam.complexity(5).log_count == 0.0

    def test_two_level_complexity(self):
        fam = GroupTwoLevelFamily(p=6, m=4)
        s, t = 2, 5
        expected = (
            4 * s + s * math.log(math.e * 6 / s) + t * math.log(math.e * 4 * s / t)
        )
        assert fam.complexity((s, t)).epsilon == pytest.approx(expected, rel=1e-12)
        assert fam.complexity((s, t)).ell == t


class TestStructureCounts:
    def test_sparse_counts(self):
        fam = SparseRegressionFamily(design=np.eye(10))
        assert fam.log_structure_count(0) == 0.0
        assert fam.log_structure_count(2) == pytest.approx(math.log(45), abs=1e-12)

    def test_sbm_count(self):
        assert SbmFamily(n=3).log_structure_count(2) == pytest.approx(
            3 * math.log(2), abs=1e-12
        )

    def test_binomial_matches_big_integer_product(self):
        # independent oracle: exact integer binomials up to p = 30
        fam = SparseRegressionFamily(design=np.eye(30))
        for s in range(1, 31):
            exact = math.log(math.comb(30, s))
            assert fam.log_structure_count(s) == pytest.approx(exact, rel=1e-10)

    def test_dictionary_count_matches_exact_integer(self):
        fam = DictionaryFamily(n=3, d=4)
        for tau in fam.index_set():
            p, s = tau
            per_col = sum(math.comb(p, t) * 2**t for t in range(s + 1))
            assert fam.log_structure_count(tau) == pytest.approx(
                4 * math.log(per_col), rel=1e-12
            )
            assert fam.structure_count(tau) == per_col**4

    def test_enumeration_counts_match_every_family(self):
        for family in _small_families():
            for tau in family.index_set():
                count = family.structure_count(tau)
                if count > 3000:
                    continue
                enumerated = sum(1 for _ in family.iter_structures(tau))
                assert enumerated == count, (family.kind, tau)

    def test_two_level_count_matches_direct_enumeration(self):
        fam = GroupTwoLevelFamily(p=4, m=3)
        for tau in [(1, 2), (2, 3), (2, 6), (3, 5)]:
            direct = sum(1 for _ in fam.iter_structures(tau))
            assert fam.structure_count(tau) == direct


class TestValidStructureCounts:
    """Closed-form counts of non-collinear structures vs verified enumeration."""

    def test_sbm_valid_count(self):
        from structbayes import enumerate_structures

        fam = SbmFamily(n=6)
        for k in (1, 2, 3):
            verified = sum(ok for _, ok in enumerate_structures(fam, k))
            log_count, exact = fam.log_valid_structure_count(k)
            assert exact
            assert round(math.exp(log_count)) == verified

    def test_sbm_degenerate_spaces_are_flagged(self):
        fam = SbmFamily(n=5)
        assert fam.has_valid_structures(2)
        assert not fam.has_valid_structures(3)
        assert fam.log_valid_structure_count(3) == (-math.inf, True)

    def test_biclustering_valid_count(self):
        from structbayes import enumerate_structures

        fam = BiclusteringFamily(n=4, m=3)
        for tau in [(1, 1), (2, 2), (3, 2), (4, 3)]:
            verified = sum(ok for _, ok in enumerate_structures(fam, tau))
            log_count, exact = fam.log_valid_structure_count(tau)
            assert exact
            assert round(math.exp(log_count)) == verified, tau

    def test_multi_task_valid_count(self):
        from structbayes import enumerate_structures

        fam = MultiTaskFamily(design=gaussian_design(6, 2, 3), m=4)
        for k in (1, 2, 3, 4):
            verified = sum(ok for _, ok in enumerate_structures(fam, k))
            log_count, exact = fam.log_valid_structure_count(k)
            assert exact
            assert round(math.exp(log_count)) == verified


class TestConditionChecks:
    @pytest.mark.parametrize(
        "family",
        [
            SparseRegressionFamily(design=np.eye(10)),
            SbmFamily(n=10),
            BiclusteringFamily(n=6, m=6),
            GroupTwoLevelFamily(p=8, m=4),
            DictionaryFamily(n=3, d=4),
        ],
        ids=lambda f: f.kind,
    )
    def test_complexity_dominates(self, family):
        assert check_complexity_dominates(family).passed

    def test_adversarial_family_fails_everywhere(self):
        class Halved(SbmFamily):
            def epsilon(self, k):
                return super().epsilon(k) / 2.0

        report = check_complexity_dominates(Halved(n=10))
        assert not report.passed
        assert len(report.violations) == len(Halved(n=10).index_set())

    def test_capacity_sobolev(self):
        assert check_capacity(SobolevFamily(n=50), 100).passed

    def test_capacity_sbm_scan(self):
        fam = SbmFamily(n=10)
        report = check_capacity(fam, 200)
        assert report.passed
        # independent oracle: epsilon is strictly increasing in k, so no
        # unit interval can hold two indices once spacing exceeds one
        eps = [fam.epsilon(k) for k in fam.index_set()]
        assert all(b > a for a, b in zip(eps, eps[1:]))

    def test_capacity_biclustering_exhaustive(self):
        fam = BiclusteringFamily(n=6, m=6)
        report = check_capacity(fam, 200)
        assert report.passed
        # oracle: count buckets directly
        eps = [fam.epsilon(t) for t in fam.index_set()]
        for t in range(1, 201):
            count = sum(1 for e in eps if t - 1 < e <= t)
            assert count <= t

    def test_capacity_rejects_bad_t_max(self):
        with pytest.raises(ConfigError):
            check_capacity(SobolevFamily(n=5), 0)


class TestDescriptors:
    def test_round_trip_every_family(self):
        for family in _small_families():
            rebuilt = family_from_dict(family.to_dict())
            assert rebuilt.kind == family.kind
            assert rebuilt.index_set() == family.index_set()
            assert rebuilt.n_obs == family.n_obs

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            family_from_dict({"family": "mystery"})
        with pytest.raises(ConfigError):
            family_from_dict({"n": 5})

    def test_missing_size_rejected(self):
        with pytest.raises(ConfigError):
            family_from_dict({"family": "sbm"})

    def test_multi_task_requires_full_rank(self):
        x = np.ones((4, 2))
        with pytest.raises(ConfigError):
            MultiTaskFamily(design=x, m=3)


class TestShippedRoster:
    def test_all_ten_kinds_present(self):
        kinds = {f.kind for f in shipped_families()}
        assert kinds == {
            "sbm",
            "biclustering",
            "sparse_regression",
            "group_sparsity",
            "multi_task",
            "dictionary",
            "sobolev_sequence",
            "besov_level",
            "aggregation_regression",
            "group_two_level",
        }


def _small_families():
    return [
        SbmFamily(n=4),
        BiclusteringFamily(n=3, m=2),
        SparseRegressionFamily(design=gaussian_design(8, 4, 0)),
        GroupSparsityFamily(design=gaussian_design(8, 3, 1), m=2),
        MultiTaskFamily(design=gaussian_design(6, 2, 2), m=3),
        DictionaryFamily(n=2, d=2),
        SobolevFamily(n=5),
        BesovLevelFamily(level=2),
        AggregationFamily(design=gaussian_design(8, 4, 3)),
        GroupTwoLevelFamily(p=3, m=2),
    ]
