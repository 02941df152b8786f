"""
Slow reference implementations used to check the exact test.

enumerate_gamma counts union sizes over every tuple of subsets;
mc_permutation_p estimates the same tail by shuffling rows within groups.
"""

import logging
import math
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from mutexsets.analysis.exact_test import TailDistribution
from mutexsets.data.data_model import AlterationMatrix, coverage
from mutexsets.data.simulation import draw_rows
from mutexsets.utils.constants import DEFAULT_ENUMERATION_BUDGET, MIN_PERMUTATIONS, PERMUTATION_BATCH
from mutexsets.utils.errors import BudgetError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NullModel:
    """
    Independent rows with fixed margins.

    Without groups, margins holds one coverage per row over n samples. With
    groups (group label -> size), margins holds one row of per-group
    coverages per alteration, in the order of the groups mapping.
    """

    n: int
    margins: tuple
    groups: dict = None

    def __post_init__(self):
        margins = np.asarray(self.margins, dtype=np.int64)
        if self.groups is None:
            if margins.ndim != 1 or np.any(margins < 0) or np.any(margins > self.n):
                raise ValueError(f"margins must lie in [0, {self.n}]")
            return
        sizes = np.array(list(self.groups.values()), dtype=np.int64)
        if sizes.sum() != self.n:
            raise ValueError("group sizes must add up to n")
        if margins.ndim != 2 or margins.shape[1] != len(sizes):
            raise ValueError("grouped margins need one column per group")
        if np.any(margins < 0) or np.any(margins > sizes[None, :]):
            raise ValueError("a margin exceeds its group size")

    def sample(self, rng):
        """Draw one dense matrix (rows x n) from the model."""
        margins = np.asarray(self.margins, dtype=np.int64)
        if self.groups is None:
            return draw_rows([self.n], margins[:, None], rng)
        return draw_rows(list(self.groups.values()), margins, rng)


def _subset_masks(n, c):
    masks = [sum(1 << j for j in combo) for combo in combinations(range(n), c)]
    return np.array(masks, dtype=np.uint64)


def enumerate_gamma(n, coverages, budget=DEFAULT_ENUMERATION_BUDGET):
    """
    Null distribution of the union size by exhaustive enumeration.

    Every row picks a c_i-subset of n samples; all tuples are equally
    likely. Tuples over all rows but the last are walked one by one and the
    last row is handled with a vectorised popcount.

    Args:
        n: Number of samples (at most 64)
        coverages: Member coverages
        budget: Largest number of subset tuples to enumerate

    Returns:
        TailDistribution: The untruncated distribution
    """
    coverages = [int(c) for c in coverages]
    if not coverages:
        raise ValueError("at least one coverage is required")
    if n > 64:
        raise ValueError("enumeration supports at most 64 samples")
    for c in coverages:
        if not 0 <= c <= n:
            raise ValueError(f"coverage {c} outside [0, {n}]")
    n_tuples = math.prod(math.comb(n, c) for c in coverages)
    if n_tuples > budget:
        raise BudgetError(f"{n_tuples} subset tuples exceed the budget of {budget}", count=n_tuples)

    head = [_subset_masks(n, c).tolist() for c in coverages[:-1]]
    last = _subset_masks(n, coverages[-1])
    counts = np.zeros(n + 1, dtype=np.int64)
    for masks in product(*head):
        acc = np.uint64(0)
        for mask in masks:
            acc |= np.uint64(mask)
        counts += np.bincount(np.bitwise_count(last | acc), minlength=n + 1)

    support = np.flatnonzero(counts)
    lo, hi = int(support[0]), int(support[-1])
    with np.errstate(divide="ignore"):
        log_masses = np.log(counts[lo:hi + 1].astype(float)) - math.log(n_tuples)
    return TailDistribution(n, lo, log_masses, min(n, sum(coverages)))


def permute_rows(matrix, seed):
    """
    Shuffle every row independently within each group's columns.

    Args:
        matrix: AlterationMatrix
        seed: Seed for numpy's default generator

    Returns:
        AlterationMatrix: Same labels and per-group margins, shuffled bits
    """
    rng = np.random.default_rng(seed)
    dense = matrix.to_dense()
    for group in matrix.groups:
        columns = matrix.group_slices[group]
        dense[:, columns] = rng.permuted(dense[:, columns], axis=1)
    return AlterationMatrix(
        dense, matrix.row_labels, matrix.sample_ids, matrix.group_of, merged_from=matrix.merged_from
    )


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Permutation p-value with add-one smoothing and its binomial standard error."""

    p: float
    se: float
    exceed: int
    n_perm: int


def mc_permutation_p(matrix, alteration_set, n_perm, seed, batch_size=PERMUTATION_BATCH):
    """
    Monte Carlo p-value for the union size of a set.

    Only the member rows are permuted, each within every group's columns,
    so per-group margins are kept exactly. Batches get independent streams
    spawned from the seed.

    Args:
        matrix: AlterationMatrix
        alteration_set: AlterationSet
        n_perm: Number of permutations (at least 1000)
        seed: Master seed
        batch_size: Permutations drawn per batch

    Returns:
        MonteCarloEstimate: (r + 1) / (n_perm + 1) and its standard error
    """
    if n_perm < MIN_PERMUTATIONS:
        raise ValueError(f"n_perm must be at least {MIN_PERMUTATIONS}, got {n_perm}")
    members = list(alteration_set)
    observed = coverage(matrix, alteration_set)
    rows = matrix.to_dense()[members]

    n_batches = -(-n_perm // batch_size)
    streams = np.random.SeedSequence(seed).spawn(n_batches)
    exceed = 0
    done = 0
    for stream in streams:
        rng = np.random.default_rng(stream)
        size = min(batch_size, n_perm - done)
        union_sizes = np.zeros(size, dtype=np.int64)
        for group in matrix.groups:
            block = rows[:, matrix.group_slices[group]]
            tiled = np.broadcast_to(block, (size,) + block.shape).copy()
            shuffled = rng.permuted(tiled, axis=2)
            union_sizes += shuffled.any(axis=1).sum(axis=1)
        exceed += int(np.count_nonzero(union_sizes >= observed))
        done += size

    p = (exceed + 1) / (n_perm + 1)
    se = math.sqrt(p * (1.0 - p) / n_perm)
    logger.debug("permutation estimate %.4g (se %.2g) from %d draws", p, se, n_perm)
    return MonteCarloEstimate(p=p, se=se, exceed=exceed, n_perm=n_perm)
