import logging
import math
from dataclasses import dataclass

import numpy as np

from mutexsets.utils.errors import DataError
from mutexsets.utils.helpers import parse_row_label

logger = logging.getLogger(__name__)


def pack_rows(dense):
    """
    Pack a boolean matrix into little-endian uint64 words, one row per row.

    Args:
        dense: 2-D boolean array (rows x columns)

    Returns:
        np.ndarray: uint64 array of shape (rows, ceil(columns / 64))
    """
    dense = np.atleast_2d(np.asarray(dense, dtype=bool))
    packed = np.packbits(dense, axis=1, bitorder="little")
    n_bytes = packed.shape[1]
    padded_bytes = max(8, -(-n_bytes // 8) * 8)
    if padded_bytes != n_bytes:
        packed = np.pad(packed, ((0, 0), (0, padded_bytes - n_bytes)))
    return np.ascontiguousarray(packed).view("<u8")


def unpack_rows(packed, n_cols):
    """Inverse of pack_rows."""
    as_bytes = np.ascontiguousarray(packed).view(np.uint8)
    return np.unpackbits(as_bytes, axis=1, count=n_cols, bitorder="little").astype(bool)


def popcount(words):
    """Number of set bits along the last axis."""
    return np.bitwise_count(words).sum(axis=-1, dtype=np.int64)


@dataclass(frozen=True)
class AlterationSet:
    """A sorted, duplicate-free set of row indices."""

    members: tuple

    def __post_init__(self):
        ordered = tuple(sorted({int(i) for i in self.members}))
        object.__setattr__(self, "members", ordered)

    @classmethod
    def of(cls, *indices):
        if len(indices) == 1 and not isinstance(indices[0], (int, np.integer)):
            indices = tuple(indices[0])
        return cls(tuple(indices))

    @property
    def key(self):
        return self.members

    @property
    def size(self):
        return len(self.members)

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, item):
        return item in self.members

    def union(self, other):
        return AlterationSet(self.members + other.members)

    def issubset(self, other):
        return set(self.members) <= set(other.members)

    def labels(self, matrix):
        """Row labels of the members, in member order."""
        return [matrix.row_labels[i] for i in self.members]


@dataclass(frozen=True)
class CoverageVector:
    """Per-row total coverage and per-row, per-group coverage."""

    total: np.ndarray
    per_group: np.ndarray
    groups: tuple

    def for_group(self, group):
        return self.per_group[:, self.groups.index(group)]


class AlterationMatrix:
    """
    Immutable binary alteration-by-sample matrix.

    Columns are permuted once at construction so that every group occupies
    a contiguous column range; each row is stored as a packed bitset so a
    per-group coverage is a masked popcount.
    """

    def __init__(self, dense, row_labels, sample_ids, group_of, merged_from=None):
        """
        Build a matrix from a dense boolean array.

        Args:
            dense: Boolean array of shape (m, n)
            row_labels: m row labels (GENE, GENE(A) or GENE(D))
            sample_ids: n sample ids, in the column order of `dense`
            group_of: Mapping sample id -> group label
            merged_from: Optional per-row sequences of original labels
        """
        dense = np.asarray(dense, dtype=bool)
        if dense.ndim != 2:
            raise DataError("alteration matrix must be two-dimensional")
        m, n = dense.shape
        row_labels = tuple(str(label) for label in row_labels)
        sample_ids = tuple(str(s) for s in sample_ids)
        if len(row_labels) != m:
            raise DataError(f"expected {m} row labels, got {len(row_labels)}")
        if len(sample_ids) != n:
            raise DataError(f"expected {n} sample ids, got {len(sample_ids)}")
        if len(set(row_labels)) != m:
            raise DataError("duplicate row labels")
        if len(set(sample_ids)) != n:
            raise DataError("duplicate sample ids")
        missing = [s for s in sample_ids if s not in group_of]
        if missing:
            raise DataError(f"samples without a group: {', '.join(missing[:10])}")

        groups = tuple(sorted({group_of[s] for s in sample_ids}))
        group_rank = {g: i for i, g in enumerate(groups)}
        order = sorted(range(n), key=lambda j: (group_rank[group_of[sample_ids[j]]], j))

        self._row_labels = row_labels
        parsed = [parse_row_label(label) for label in row_labels]
        self._genes = tuple(gene for gene, _ in parsed)
        self._kinds = tuple(kind for _, kind in parsed)
        self._sample_ids = tuple(sample_ids[j] for j in order)
        self._group_of = {s: group_of[s] for s in self._sample_ids}
        self._groups = groups
        if merged_from is None:
            merged_from = [(label,) for label in row_labels]
        self._merged_from = tuple(tuple(labels) for labels in merged_from)

        ordered = dense[:, order] if n else dense
        self._bits = pack_rows(ordered) if m else np.zeros((0, max(1, -(-n // 64))), dtype="<u8")
        self._bits.setflags(write=False)

        self._group_slices = {}
        start = 0
        column_groups = [self._group_of[s] for s in self._sample_ids]
        for g in groups:
            size = column_groups.count(g)
            self._group_slices[g] = slice(start, start + size)
            start += size
        masks = np.zeros((len(groups), n), dtype=bool)
        for i, g in enumerate(groups):
            masks[i, self._group_slices[g]] = True
        self._group_masks = pack_rows(masks) if groups else np.zeros((0, self._bits.shape[1]), dtype="<u8")
        self._group_masks.setflags(write=False)
        self._group_sizes = np.array(
            [self._group_slices[g].stop - self._group_slices[g].start for g in groups], dtype=np.int64
        )

        if m:
            per_group = np.stack(
                [popcount(self._bits & self._group_masks[i]) for i in range(len(groups))], axis=1
            )
        else:
            per_group = np.zeros((0, len(groups)), dtype=np.int64)
        per_group.setflags(write=False)
        total = per_group.sum(axis=1)
        total.setflags(write=False)
        self._coverage = CoverageVector(total=total, per_group=per_group, groups=groups)
        self._label_index = {label: i for i, label in enumerate(row_labels)}

    # -- shape and labels --------------------------------------------------

    @property
    def m(self):
        return len(self._row_labels)

    @property
    def n(self):
        return len(self._sample_ids)

    @property
    def row_labels(self):
        return self._row_labels

    @property
    def genes(self):
        return self._genes

    @property
    def kinds(self):
        return self._kinds

    @property
    def sample_ids(self):
        return self._sample_ids

    @property
    def group_of(self):
        return dict(self._group_of)

    @property
    def groups(self):
        return self._groups

    @property
    def group_sizes(self):
        return self._group_sizes

    @property
    def group_slices(self):
        return dict(self._group_slices)

    @property
    def group_masks(self):
        return self._group_masks

    @property
    def merged_from(self):
        return self._merged_from

    @property
    def bits(self):
        return self._bits

    @property
    def coverages(self):
        return self._coverage

    def row_index(self, label):
        """Index of a row label, following merge provenance if needed."""
        if label in self._label_index:
            return self._label_index[label]
        for i, origin in enumerate(self._merged_from):
            if label in origin:
                return i
        raise DataError(f"unknown alteration label: {label}")

    def group_index(self, group):
        try:
            return self._groups.index(group)
        except ValueError:
            raise DataError(f"unknown group label: {group}") from None

    def to_dense(self):
        """Dense boolean copy, in the stored (group-contiguous) column order."""
        return unpack_rows(self._bits, self.n)

    def subset_rows(self, indices, merged_from=None):
        """New matrix restricted to the given rows, keeping sample order and groups."""
        indices = list(indices)
        dense = self.to_dense()[indices] if indices else np.zeros((0, self.n), dtype=bool)
        if merged_from is None:
            merged_from = [self._merged_from[i] for i in indices]
        return AlterationMatrix(
            dense,
            [self._row_labels[i] for i in indices],
            self._sample_ids,
            self._group_of,
            merged_from=merged_from,
        )

    # -- set queries --------------------------------------------------------

    def union_bits(self, members):
        """Packed indicator of samples carrying at least one member."""
        members = list(members)
        if not members:
            return np.zeros(self._bits.shape[1], dtype="<u8")
        return np.bitwise_or.reduce(self._bits[members], axis=0)

    def group_coverages(self, members):
        """Coverage of the union of `members` in every group, as an array."""
        return popcount(self.union_bits(members) & self._group_masks)

    def __repr__(self):
        return f"AlterationMatrix(m={self.m}, n={self.n}, groups={len(self._groups)})"


def coverage(matrix, alteration_set, group=None):
    """
    Number of samples carrying at least one alteration of the set.

    Args:
        matrix: AlterationMatrix
        alteration_set: AlterationSet (or iterable of row indices)
        group: Optional group label restricting the samples counted

    Returns:
        int: The coverage of the set
    """
    members = list(alteration_set)
    for i in members:
        if not 0 <= i < matrix.m:
            raise DataError(f"row index out of range: {i}")
    union = matrix.union_bits(members)
    if group is None:
        return int(popcount(union))
    g = matrix.group_index(group)
    return int(popcount(union & matrix.group_masks[g]))


def overlap(matrix, alteration_set):
    """Sum of member coverages minus the coverage of the set."""
    members = list(alteration_set)
    total = int(matrix.coverages.total[members].sum()) if members else 0
    return total - coverage(matrix, members)


def merge_identical_rows(matrix):
    """
    Merge rows with identical bit patterns into one row.

    The first row of each pattern (in row order) keeps its label; the
    merged_from field records every original label of the merged rows.

    Args:
        matrix: AlterationMatrix

    Returns:
        AlterationMatrix: A matrix with distinct rows
    """
    first_of = {}
    keep = []
    provenance = []
    for i in range(matrix.m):
        pattern = matrix.bits[i].tobytes()
        if pattern in first_of:
            provenance[first_of[pattern]].extend(matrix.merged_from[i])
            continue
        first_of[pattern] = len(keep)
        keep.append(i)
        provenance.append(list(matrix.merged_from[i]))

    removed = matrix.m - len(keep)
    if removed == 0:
        return matrix
    logger.info(
        "merged %d duplicate rows into %d representatives",
        removed,
        sum(len(p) > 1 for p in provenance),
    )
    return matrix.subset_rows(keep, merged_from=provenance)


def rarity_threshold(m_remaining):
    """Coverage a row must strictly exceed: log2(m_remaining - 1)."""
    if m_remaining <= 1:
        return -math.inf
    return math.log2(m_remaining - 1)


def filter_rare(matrix):
    """
    Remove rows too rare to reach significance, iterated to a fixpoint.

    A row is kept when its total coverage is strictly greater than
    log2(m_remaining - 1), where m_remaining is the current row count.

    Args:
        matrix: AlterationMatrix (identical rows already merged)

    Returns:
        AlterationMatrix: The filtered matrix
    """
    keep = np.arange(matrix.m)
    totals = matrix.coverages.total
    while True:
        threshold = rarity_threshold(len(keep))
        passing = keep[totals[keep] > threshold]
        if len(passing) == len(keep):
            break
        keep = passing

    removed = matrix.m - len(keep)
    if removed == 0:
        return matrix
    logger.info(
        "removed %d rare rows (final threshold > %.2f), %d remain",
        removed,
        rarity_threshold(len(keep)),
        len(keep),
    )
    return matrix.subset_rows(keep.tolist())


def preprocess(matrix):
    """Merge identical rows, then filter rare rows."""
    return filter_rare(merge_identical_rows(matrix))
