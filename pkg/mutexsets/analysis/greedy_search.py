"""
Greedy generation of candidate alteration sets.

Every alteration starts as a set of size one. Each iteration adds the union
of the two pool entries whose indicators ("at least one member present")
are the most significantly anti-co-occurring, scored by per-group Fisher
mid-p-values combined with Stouffer. The size cap on new unions grows by
one per epoch.
"""

import heapq
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from tqdm import tqdm

from mutexsets.analysis.combine import p_from_z, pairwise_weight_batch, stouffer_z_batch
from mutexsets.analysis.exact_test import fisher_upper_batch
from mutexsets.data.data_model import AlterationSet, pack_rows, popcount
from mutexsets.utils.constants import DEFAULT_CLOSURE_BUDGET, DEFAULT_KMAX, DEFAULT_MAX_ITER
from mutexsets.utils.errors import BudgetError

logger = logging.getLogger(__name__)

_LOG_HALF = math.log(0.5)


@dataclass
class CandidatePool:
    """
    Deduplicated alteration sets produced by the greedy search.

    scores maps a set's members to the internal score of the pair whose
    union created it; origin maps it to (iteration, epoch). Singletons and
    sets added by subset closure have no entry in either.
    """

    sets: list
    max_iter: int = DEFAULT_MAX_ITER
    k_max: int = DEFAULT_KMAX
    scores: dict = field(default_factory=dict)
    origin: dict = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        unique = []
        for alteration_set in self.sets:
            if alteration_set.members not in seen:
                seen.add(alteration_set.members)
                unique.append(alteration_set)
        self.sets = unique

    def __len__(self):
        return len(self.sets)

    def __contains__(self, alteration_set):
        return any(s.members == alteration_set.members for s in self.sets)

    @property
    def singletons(self):
        return [s for s in self.sets if len(s) == 1]

    def candidates(self):
        """Sets of size >= 2, the ones that get tested."""
        return [s for s in self.sets if len(s) >= 2]


def indicator_scores_z(n_by_group, cov1, cov2, union_cov):
    """
    Stouffer z of the mid-p Fisher tests between one indicator and many.

    Args:
        n_by_group: Group sizes, shape (G,)
        cov1: Coverage of the first indicator per group, shape (G,)
        cov2: Coverages of the other indicators, shape (K, G)
        union_cov: Coverages of the pairwise unions, shape (K, G)

    Returns:
        np.ndarray: z-scores, shape (K,)
    """
    n_groups = len(n_by_group)
    log_mid = np.zeros((n_groups, cov2.shape[0]))
    weights = np.zeros((n_groups, cov2.shape[0]))
    for g in range(n_groups):
        n_g = int(n_by_group[g])
        weights[g] = pairwise_weight_batch(n_g, cov1[g], cov2[:, g])
        active = weights[g] > 0
        if not active.any():
            continue
        log_p, log_p_minus = fisher_upper_batch(n_g, cov1[g], cov2[active, g], union_cov[active, g])
        log_mid[g, active] = np.logaddexp(log_p, log_p_minus) + _LOG_HALF
    return stouffer_z_batch(log_mid, weights)


def score_pair_z(matrix, s1, s2):
    """Stouffer z-score behind score_pair (smaller is more significant)."""
    bits1 = matrix.union_bits(s1)
    bits2 = matrix.union_bits(s2)
    cov1 = popcount(bits1 & matrix.group_masks)
    cov2 = popcount(bits2 & matrix.group_masks)[None, :]
    union_cov = popcount((bits1 | bits2) & matrix.group_masks)[None, :]
    return float(indicator_scores_z(matrix.group_sizes, cov1, cov2, union_cov)[0])


def score_pair(matrix, s1, s2):
    """
    Anti-co-occurrence score of two alteration sets.

    Each set is reduced to the indicator "at least one member present"; the
    two indicators are compared by a one-sided Fisher test in every group,
    and the mid-p-values are combined with Stouffer's method.

    Args:
        matrix: AlterationMatrix
        s1, s2: AlterationSet

    Returns:
        float: Combined mid-p-value (1 when every group is degenerate)
    """
    z = score_pair_z(matrix, s1, s2)
    return 1.0 if z == math.inf else p_from_z(z)


def epoch_schedule(max_iter, k_max):
    """Iterations per epoch: equal shares, remainder to the last epoch."""
    n_epochs = k_max - 1
    share = max_iter // n_epochs
    schedule = [share] * n_epochs
    schedule[-1] += max_iter - share * n_epochs
    return schedule


class CandidateGenerator:
    """
    Stateful greedy search over a fixed matrix.

    Pair scores are computed once, when the younger entry of the pair joins
    the pool. Each entry keeps its partners sorted by (z, union size,
    union members); a heap holds every entry's best admissible partner and
    is refreshed lazily as unions join the pool.
    """

    def __init__(self, matrix, max_iter=DEFAULT_MAX_ITER, k_max=DEFAULT_KMAX, progress=True):
        if k_max < 2:
            raise ValueError(f"k_max must be at least 2, got {k_max}")
        if max_iter < 0:
            raise ValueError(f"max_iter must be non-negative, got {max_iter}")
        self.matrix = matrix
        self.max_iter = max_iter
        self.k_max = k_max
        self.progress = progress

        capacity = matrix.m + max_iter
        self._entries = []
        self._keys = {}
        self._bits = np.zeros((capacity, matrix.bits.shape[1]), dtype="<u8")
        self._membership = np.zeros((capacity, max(1, -(-matrix.m // 64))), dtype="<u8")
        self._group_cov = np.zeros((capacity, len(matrix.groups)), dtype=np.int64)
        self._partner_z = []
        self._partner_size = []
        self._partner_idx = []
        self._pos = []
        self._heap = []
        self._cap = 2
        self.scores = {}
        self.origin = {}

    # -- pool bookkeeping ----------------------------------------------------

    def _add_entry(self, alteration_set):
        u = len(self._entries)
        self._entries.append(alteration_set)
        self._keys[alteration_set.members] = u
        self._bits[u] = self.matrix.union_bits(alteration_set)
        member_mask = np.zeros(self.matrix.m, dtype=bool)
        member_mask[list(alteration_set)] = True
        self._membership[u] = pack_rows(member_mask)[0, : self._membership.shape[1]]
        self._group_cov[u] = popcount(self._bits[u] & self.matrix.group_masks)
        self._score_against_pool(u)

    def _score_against_pool(self, u):
        if u == 0:
            self._partner_z.append(np.zeros(0))
            self._partner_size.append(np.zeros(0, dtype=np.int64))
            self._partner_idx.append(np.zeros(0, dtype=np.int64))
            self._pos.append(0)
            return
        masks = self.matrix.group_masks
        union_bits = self._bits[:u] | self._bits[u]
        union_cov = np.stack([popcount(union_bits & masks[g]) for g in range(len(masks))], axis=1)
        z = indicator_scores_z(self.matrix.group_sizes, self._group_cov[u], self._group_cov[:u], union_cov)

        sizes = popcount(self._membership[:u])
        shared = popcount(self._membership[:u] & self._membership[u])
        union_size = sizes + len(self._entries[u]) - shared
        idx = np.arange(u)
        order = self._order_ties(u, np.lexsort((idx, union_size, z)), z, union_size)
        self._partner_z.append(z[order])
        self._partner_size.append(union_size[order])
        self._partner_idx.append(idx[order])
        self._pos.append(0)

    def _order_ties(self, u, order, z, union_size):
        """Within runs of equal (z, union size), order partners by the members of their union."""
        zs, sizes = z[order], union_size[order]
        change = np.flatnonzero((zs[1:] != zs[:-1]) | (sizes[1:] != sizes[:-1])) + 1
        starts = np.concatenate([[0], change])
        ends = np.concatenate([change, [len(order)]])
        for start, end in zip(starts, ends):
            if end - start > 1:
                run = order[start:end]
                order[start:end] = sorted(run, key=lambda j: self._entries[u].union(self._entries[j]).members)
        return order

    def _advance(self, i):
        """Move entry i to its next admissible partner and push it on the heap."""
        z, sizes, idx = self._partner_z[i], self._partner_size[i], self._partner_idx[i]
        pos = self._pos[i]
        while pos < len(idx):
            if sizes[pos] <= self._cap:
                j = int(idx[pos])
                union = self._entries[i].union(self._entries[j])
                if union.members not in self._keys:
                    self._pos[i] = pos
                    heapq.heappush(self._heap, (float(z[pos]), int(sizes[pos]), union.members, i, j))
                    return
            pos += 1
        self._pos[i] = pos

    def _rebuild_heap(self):
        self._heap = []
        for i in range(len(self._entries)):
            self._pos[i] = 0
            self._advance(i)

    def _pop_best(self):
        """Best admissible pair as (z, union, i, j), or None."""
        while self._heap:
            z, size, members, i, j = heapq.heappop(self._heap)
            if members in self._keys or size > self._cap:
                self._pos[i] += 1
                self._advance(i)
                continue
            return z, AlterationSet(members), i, j
        return None

    # -- search --------------------------------------------------------------

    def run(self):
        """
        Run the epochs and return the resulting pool.

        Returns:
            CandidatePool: Singletons plus every union added
        """
        for row in range(self.matrix.m):
            self._add_entry(AlterationSet((row,)))
        logger.info("scored %d seed pairs", self.matrix.m * (self.matrix.m - 1) // 2)

        iteration = 0
        schedule = epoch_schedule(self.max_iter, self.k_max)
        with tqdm(total=self.max_iter, desc="greedy search", disable=not self.progress) as bar:
            for epoch, n_iter in enumerate(schedule, start=1):
                self._cap = epoch + 1
                self._rebuild_heap()
                added = 0
                for _ in range(n_iter):
                    iteration += 1
                    bar.update(1)
                    best = self._pop_best()
                    if best is None:
                        skipped = n_iter - added
                        logger.warning(
                            "epoch %d: no admissible pair left, skipping %d iterations", epoch, skipped
                        )
                        bar.update(skipped - 1)
                        iteration += skipped - 1
                        break
                    z, union, i, j = best
                    self.scores[union.members] = 1.0 if z == math.inf else p_from_z(z)
                    self.origin[union.members] = (iteration, epoch)
                    self._add_entry(union)
                    self._advance(i)
                    self._advance(len(self._entries) - 1)
                    added += 1
                    logger.debug("iteration %d: added %s (z=%.3f)", iteration, union.members, z)
                logger.info("epoch %d (size cap %d): added %d sets", epoch, self._cap, added)

        return CandidatePool(
            sets=list(self._entries),
            max_iter=self.max_iter,
            k_max=self.k_max,
            scores=dict(self.scores),
            origin=dict(self.origin),
        )


def generate_candidates(matrix, max_iter=DEFAULT_MAX_ITER, k_max=DEFAULT_KMAX, progress=False):
    """
    Generate candidate alteration sets greedily.

    Args:
        matrix: Preprocessed AlterationMatrix
        max_iter: Total number of iterations across all epochs
        k_max: Largest set size allowed
        progress: Show a progress bar on standard error

    Returns:
        CandidatePool
    """
    return CandidateGenerator(matrix, max_iter=max_iter, k_max=k_max, progress=progress).run()


def subset_closure(pool, budget=DEFAULT_CLOSURE_BUDGET):
    """
    Add every subset of size >= 2 of every pool set.

    Args:
        pool: CandidatePool
        budget: Largest number of distinct sets allowed after closure

    Returns:
        CandidatePool: The closed pool (scores and origin carried over)
    """
    seen = {s.members for s in pool.sets}
    closed = list(pool.sets)
    for alteration_set in pool.sets:
        members = alteration_set.members
        for size in range(2, len(members)):
            for sub in combinations(members, size):
                if sub in seen:
                    continue
                seen.add(sub)
                closed.append(AlterationSet(sub))
                if len(closed) > budget:
                    raise BudgetError(
                        f"subset closure exceeds the budget of {budget} sets", count=len(closed)
                    )
    logger.info("subset closure: %d sets (%d before)", len(closed), len(pool.sets))
    return CandidatePool(
        sets=closed,
        max_iter=pool.max_iter,
        k_max=pool.k_max,
        scores=dict(pool.scores),
        origin=dict(pool.origin),
    )
