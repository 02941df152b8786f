import math
from itertools import combinations_with_replacement

import numpy as np
import pytest
from scipy.stats import fisher_exact

from conftest import make_matrix
from mutexsets.analysis.exact_test import (
    PValueTriple,
    effective_members,
    fisher_upper,
    gamma_distribution,
    hypergeom_pmf,
    intersection_p,
    lower_p,
    upper_p,
)
from mutexsets.analysis.oracle import enumerate_gamma
from mutexsets.data.data_model import AlterationSet


def fisher_anti(n, c1, c2, union):
    """One-sided Fisher p for fewer joint occurrences than expected."""
    both = c1 + c2 - union
    table = [[both, c1 - both], [c2 - both, n - union]]
    return fisher_exact(table, alternative="less")[1]


def test_hypergeom_pmf_examples():
    assert hypergeom_pmf(10, 7, 4, 4) == pytest.approx(1 / 6, rel=1e-12)
    assert hypergeom_pmf(10, 7, 4, 0) == 0.0
    assert hypergeom_pmf(12, 12, 5, 5) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        hypergeom_pmf(10, 11, 4, 2)


def test_single_coverage_is_point_mass():
    dist = gamma_distribution(10, [4])
    assert dist.support_floor == 4
    assert dist.pmf(4) == pytest.approx(1.0)


def test_two_member_distribution():
    dist = gamma_distribution(10, [3, 4])
    for x in range(4, 8):
        assert dist.pmf(x) == pytest.approx(hypergeom_pmf(10, 7, 4, x - 3), rel=1e-12)
    assert dist.total_mass() == pytest.approx(1.0, abs=1e-12)


def test_three_members_match_enumeration():
    exact = gamma_distribution(8, [3, 3, 2])
    brute = enumerate_gamma(8, [3, 3, 2])
    support = range(0, 9)
    tv = 0.5 * sum(abs(exact.pmf(x) - brute.pmf(x)) for x in support)
    assert tv < 1e-12


@pytest.mark.parametrize("n", range(1, 9))
def test_small_grid_matches_enumeration(n):
    for n_members in range(1, 4):
        for coverages in combinations_with_replacement(range(min(4, n) + 1), n_members):
            exact = gamma_distribution(n, coverages)
            brute = enumerate_gamma(n, coverages)
            tv = 0.5 * sum(abs(exact.pmf(x) - brute.pmf(x)) for x in range(n + 1))
            assert tv < 1e-12, coverages


def test_distribution_ignores_member_order():
    a = gamma_distribution(30, [5, 12, 7, 0])
    b = gamma_distribution(30, [7, 0, 5, 12])
    assert np.allclose(a.masses, b.masses, atol=1e-14)
    assert a.support_floor == b.support_floor


def test_upper_p_worked_example():
    triple = upper_p(10, [3, 4], 7)
    assert triple.p == pytest.approx(1 / 6, rel=1e-12)
    assert triple.p_minus == 0.0
    assert triple.mid == pytest.approx(1 / 12, rel=1e-12)


def test_upper_p_degenerate_margin():
    triple = upper_p(10, [5, 0], 5)
    assert triple.p == pytest.approx(1.0)
    assert triple.p_minus == 0.0


def test_upper_p_above_support():
    with pytest.raises(ValueError):
        upper_p(10, [3, 4], 8)


def test_lower_p_worked_example():
    assert lower_p(10, [3, 4], 4).p == pytest.approx(1 / 30, rel=1e-12)


def test_upper_p_matches_fisher():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(2, 51))
        c1, c2 = (int(v) for v in rng.integers(0, n + 1, size=2))
        lo, hi = max(c1, c2), min(n, c1 + c2)
        union = int(rng.integers(lo, hi + 1))
        expected = fisher_anti(n, c1, c2, union)
        assert upper_p(n, [c1, c2], union).p == pytest.approx(expected, rel=1e-10)
        assert fisher_upper(n, c1, c2, union).p == pytest.approx(expected, rel=1e-10)


def test_upper_p_monotone_in_observed():
    ps = [upper_p(40, [10, 8, 6], x).p for x in range(10, 25)]
    assert all(a >= b for a, b in zip(ps, ps[1:]))


def test_truncated_tail_matches_full_distribution():
    full = gamma_distribution(60, [20, 15, 12, 9])
    for obs in (25, 40, 50):
        expected = math.fsum(full.pmf(x) for x in range(obs, 61))
        assert upper_p(60, [20, 15, 12, 9], obs).p == pytest.approx(expected, rel=1e-10)


def test_tiny_tails_keep_log_precision():
    triple = upper_p(2000, [400, 400, 400, 400, 400], 2000)
    assert math.isfinite(triple.log_p)
    assert triple.log_p < math.log(1e-300)


def test_intersection_test_both_tails():
    # intersection of sizes 3 and 4 in 10 samples equals 3 + 4 - union
    less = intersection_p(10, [3, 4], 0)
    assert less.p == pytest.approx(upper_p(10, [7, 6], 10).p)
    greater = intersection_p(10, [3, 4], 3, alternative="greater")
    assert greater.p == pytest.approx(lower_p(10, [7, 6], 7).p)
    with pytest.raises(ValueError):
        intersection_p(10, [3, 4], 1, alternative="two-sided")


def test_pvalue_triple_validation():
    with pytest.raises(ValueError):
        PValueTriple(0.2, 0.5)
    assert PValueTriple(0.5, 0.1).mid == pytest.approx(0.3)


def test_effective_members_fuse_same_gene():
    matrix = make_matrix(
        [
            [1, 1, 0, 0, 0, 0],
            [0, 1, 1, 0, 0, 0],
            [0, 0, 0, 1, 1, 0],
        ],
        labels=["TP53(A)", "TP53(D)", "KRAS"],
    )
    effective = effective_members(matrix, AlterationSet((0, 1, 2)))
    assert effective.coverages[:, 0].tolist() == [3, 2]
    assert effective.observed.tolist() == [5]
    assert effective.size == 3


def test_effective_members_single_gene_gives_p_one():
    matrix = make_matrix([[1, 1, 0, 0], [0, 0, 1, 0]], labels=["TP53(A)", "TP53(D)"])
    effective = effective_members(matrix, AlterationSet((0, 1)))
    assert effective.coverages.shape == (1, 1)
    triple = upper_p(4, effective.coverages[:, 0], int(effective.observed[0]))
    assert triple.p == pytest.approx(1.0)


def test_set_p_at_least_stepwise_product():
    rng = np.random.default_rng(17)
    for _ in range(30):
        dense = rng.random((4, 40)) < 0.25
        matrix = make_matrix(dense.astype(int).tolist())
        base = AlterationSet((0, 1, 2))
        full = AlterationSet((0, 1, 2, 3))
        covs = matrix.coverages.total
        gamma_base = int(matrix.group_coverages(base)[0])
        gamma_full = int(matrix.group_coverages(full)[0])
        p_base = upper_p(40, covs[:3], gamma_base).p
        p_full = upper_p(40, covs, gamma_full).p
        p_step = fisher_upper(40, gamma_base, int(covs[3]), gamma_full).p
        assert p_full >= p_step * p_base * (1 - 1e-9)


def test_stepwise_product_exact_when_exclusive():
    matrix = make_matrix(
        [
            [1, 1, 0, 0, 0, 0, 0, 0, 0, 0],
            [0, 0, 1, 1, 0, 0, 0, 0, 0, 0],
            [0, 0, 0, 0, 1, 1, 1, 0, 0, 0],
        ]
    )
    p_base = upper_p(10, [2, 2], 4).p
    p_full = upper_p(10, [2, 2, 3], 7).p
    p_step = fisher_upper(10, 4, 3, 7).p
    assert p_full == pytest.approx(p_step * p_base, rel=1e-12)
    assert int(matrix.group_coverages([0, 1, 2])[0]) == 7
