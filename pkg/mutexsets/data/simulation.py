"""
Synthetic alteration matrices with known structure.
"""

import logging
import math

import numpy as np

from mutexsets.data.data_model import AlterationMatrix
from mutexsets.utils.errors import DataError

logger = logging.getLogger(__name__)


def _group_labels(group_sizes):
    if isinstance(group_sizes, dict):
        return list(group_sizes.keys()), [int(v) for v in group_sizes.values()]
    sizes = [int(v) for v in group_sizes]
    return [f"T{i + 1}" for i in range(len(sizes))], sizes


def _sample_layout(labels, sizes):
    sample_ids = []
    group_of = {}
    for label, size in zip(labels, sizes):
        for _ in range(size):
            sample = f"S{len(sample_ids) + 1:05d}"
            sample_ids.append(sample)
            group_of[sample] = label
    return sample_ids, group_of


def draw_rows(group_sizes, margins, rng):
    """
    Draw rows that are uniform subsets of each group with fixed margins.

    Args:
        group_sizes: Sizes of the consecutive column blocks
        margins: Array (rows, groups) of per-group coverages
        rng: numpy Generator

    Returns:
        np.ndarray: Boolean array (rows, sum(group_sizes))
    """
    margins = np.asarray(margins, dtype=np.int64)
    blocks = []
    for g, size in enumerate(group_sizes):
        filled = np.arange(size)[None, :] < margins[:, g][:, None]
        blocks.append(rng.permuted(filled, axis=1))
    if not blocks:
        return np.zeros((margins.shape[0], 0), dtype=bool)
    return np.concatenate(blocks, axis=1)


def simulate_null(group_sizes, margins, seed, row_labels=None):
    """
    Independent rows with prescribed per-group margins.

    Args:
        group_sizes: Sequence of group sizes, or mapping group label -> size
        margins: Per-row, per-group coverages, shape (rows, groups)
        seed: Seed for numpy's default generator
        row_labels: Optional row labels (default A1, A2, ...)

    Returns:
        AlterationMatrix
    """
    labels, sizes = _group_labels(group_sizes)
    margins = np.asarray(margins, dtype=np.int64).reshape(-1, len(sizes))
    if np.any(margins < 0) or np.any(margins > np.array(sizes)[None, :]):
        raise DataError("infeasible margins: every margin must lie in [0, group size]")
    if row_labels is None:
        row_labels = [f"A{i + 1}" for i in range(margins.shape[0])]

    rng = np.random.default_rng(seed)
    dense = draw_rows(sizes, margins, rng)
    sample_ids, group_of = _sample_layout(labels, sizes)
    return AlterationMatrix(dense, row_labels, sample_ids, group_of)


def random_margins(group_sizes, rows, min_coverage, max_coverage, seed):
    """
    Per-group margins drawn uniformly between two coverage fractions.

    Returns:
        np.ndarray: Integer margins of shape (rows, groups)
    """
    if not 0.0 <= min_coverage <= max_coverage <= 1.0:
        raise DataError("coverage fractions must satisfy 0 <= min <= max <= 1")
    _, sizes = _group_labels(group_sizes)
    rng = np.random.default_rng(seed)
    columns = []
    for size in sizes:
        lo = math.ceil(min_coverage * size)
        hi = max(lo, math.floor(max_coverage * size))
        columns.append(rng.integers(lo, hi + 1, size=rows))
    return np.stack(columns, axis=1) if columns else np.zeros((rows, 0), dtype=np.int64)


def _split_coverage(total, sizes):
    """Split a coverage across groups in proportion to their sizes (largest remainder)."""
    n = sum(sizes)
    exact = [total * size / n for size in sizes]
    shares = [math.floor(x) for x in exact]
    order = sorted(range(len(sizes)), key=lambda g: (-(exact[g] - shares[g]), g))
    for g in order[: total - sum(shares)]:
        shares[g] += 1
    return shares


def simulate_planted(
    group_sizes,
    planted_size=3,
    planted_coverage=100,
    background_rows=17,
    min_coverage=0.02,
    max_coverage=0.2,
    seed=0,
):
    """
    A perfectly exclusive planted set among independent background rows.

    Planted rows come first and are labelled PL1..PLk; each covers
    `planted_coverage` samples split across groups by group size, and no
    two planted rows share a sample. Background rows BG1.. are drawn as in
    simulate_null with margins between the two coverage fractions.

    Returns:
        AlterationMatrix
    """
    labels, sizes = _group_labels(group_sizes)
    shares = _split_coverage(planted_coverage, sizes)
    for label, size, share in zip(labels, sizes, shares):
        if planted_size * share > size:
            raise DataError(
                f"group {label}: {planted_size} exclusive rows of coverage {share} "
                f"do not fit into {size} samples"
            )

    rng = np.random.default_rng(seed)
    planted = np.zeros((planted_size, sum(sizes)), dtype=bool)
    start = 0
    for size, share in zip(sizes, shares):
        columns = start + rng.permutation(size)[: planted_size * share]
        for row in range(planted_size):
            planted[row, columns[row * share:(row + 1) * share]] = True
        start += size

    margins = random_margins(sizes, background_rows, min_coverage, max_coverage, rng.integers(2**63))
    background = draw_rows(sizes, margins, rng)

    dense = np.concatenate([planted, background], axis=0)
    row_labels = [f"PL{i + 1}" for i in range(planted_size)] + [f"BG{i + 1}" for i in range(background_rows)]
    sample_ids, group_of = _sample_layout(labels, sizes)
    logger.debug("planted %d exclusive rows among %d background rows", planted_size, background_rows)
    return AlterationMatrix(dense, row_labels, sample_ids, group_of)
