import numpy as np
import pytest

from mutexsets.data.data_model import AlterationMatrix


def make_matrix(rows, labels=None, groups=None):
    """Matrix from a list of 0/1 rows; every sample in group T1 unless groups is given."""
    dense = np.array(rows, dtype=bool)
    m, n = dense.shape
    labels = labels or [f"G{i + 1}" for i in range(m)]
    sample_ids = [f"S{j + 1}" for j in range(n)]
    groups = groups or ["T1"] * n
    return AlterationMatrix(dense, labels, sample_ids, dict(zip(sample_ids, groups)))


@pytest.fixture
def small_matrix():
    # two groups of four samples; G1/G2 exclusive, G3 overlapping both
    return make_matrix(
        [
            [1, 1, 0, 0, 1, 0, 0, 0],
            [0, 0, 1, 1, 0, 1, 0, 0],
            [1, 0, 1, 0, 0, 0, 1, 0],
            [0, 0, 0, 0, 0, 0, 0, 1],
        ],
        labels=["KRAS", "BRAF", "TP53(A)", "TP53(D)"],
        groups=["T1"] * 4 + ["T2"] * 4,
    )


@pytest.fixture
def write_inputs(tmp_path):
    """Write matrix and groups TSVs from text, return their paths."""

    def _write(matrix_text, groups_text):
        matrix_path = tmp_path / "matrix.tsv"
        groups_path = tmp_path / "groups.tsv"
        matrix_path.write_text(matrix_text, encoding="utf-8")
        groups_path.write_text(groups_text, encoding="utf-8")
        return matrix_path, groups_path

    return _write
