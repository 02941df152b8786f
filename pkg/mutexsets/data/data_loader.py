import logging
from collections import Counter
from pathlib import Path

import numpy as np
import pandas as pd

from mutexsets.data.data_model import AlterationMatrix
from mutexsets.utils.constants import (
    ALLOWED_CELL_VALUES,
    GROUPS_GROUP_COLUMN,
    GROUPS_SAMPLE_COLUMN,
    MATRIX_ROW_COLUMN,
)
from mutexsets.utils.errors import DataError

logger = logging.getLogger(__name__)


class DataLoader:
    """Class for loading and validating matrix and group files."""

    def load_matrix(self, matrix_path, groups_path):
        """
        Load and validate an alteration matrix and its sample groups.

        Missing cells (NA) are read as absent.

        Args:
            matrix_path: TSV with an "alteration" column followed by one column per sample
            groups_path: TSV with "sample" and "group" columns

        Returns:
            AlterationMatrix: The loaded matrix
        """
        group_of = self.load_groups(groups_path)
        table = self._read_tsv(matrix_path)

        if table.shape[1] == 0 or table.columns[0] != MATRIX_ROW_COLUMN:
            raise DataError(f"{matrix_path}: first column must be '{MATRIX_ROW_COLUMN}'")
        if table.shape[0] == 0:
            raise DataError(f"{matrix_path}: no rows")

        labels = [label.strip() for label in table[MATRIX_ROW_COLUMN]]
        duplicated = sorted(label for label, count in Counter(labels).items() if count > 1)
        if duplicated:
            raise DataError(f"{matrix_path}: duplicate row labels: {', '.join(duplicated)}")
        if any(not label for label in labels):
            raise DataError(f"{matrix_path}: empty row label")

        sample_ids = [str(s).strip() for s in table.columns[1:]]
        if not sample_ids:
            raise DataError(f"{matrix_path}: no sample columns")
        missing = [s for s in sample_ids if s not in group_of]
        if missing:
            raise DataError(f"{groups_path}: samples missing from groups file: {', '.join(missing)}")

        cells = table.iloc[:, 1:].apply(lambda col: col.str.strip())
        bad = ~cells.isin(ALLOWED_CELL_VALUES)
        if bad.to_numpy().any():
            row, col = np.argwhere(bad.to_numpy())[0]
            raise DataError(
                f"{matrix_path}: malformed cell value {cells.iat[row, col]!r} "
                f"at row {labels[row]}, sample {sample_ids[col]}"
            )
        dense = (cells == "1").to_numpy()

        logger.info(
            "loaded %d alterations x %d samples in %d groups from %s",
            dense.shape[0],
            dense.shape[1],
            len({group_of[s] for s in sample_ids}),
            matrix_path,
        )
        return AlterationMatrix(dense, labels, sample_ids, group_of)

    def load_groups(self, groups_path):
        """
        Load the sample-to-group mapping.

        Returns:
            dict: sample id -> group label
        """
        table = self._read_tsv(groups_path)
        required = [GROUPS_SAMPLE_COLUMN, GROUPS_GROUP_COLUMN]
        if list(table.columns[:2]) != required:
            raise DataError(f"{groups_path}: header must be '{GROUPS_SAMPLE_COLUMN}\\t{GROUPS_GROUP_COLUMN}'")

        group_of = {}
        for sample, group in zip(table[GROUPS_SAMPLE_COLUMN], table[GROUPS_GROUP_COLUMN]):
            sample, group = sample.strip(), group.strip()
            if not sample or not group:
                raise DataError(f"{groups_path}: empty sample or group field")
            if sample in group_of and group_of[sample] != group:
                raise DataError(f"{groups_path}: sample {sample} assigned to two groups")
            group_of[sample] = group
        return group_of

    def _read_tsv(self, path):
        path = Path(path)
        try:
            return pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False, na_filter=False)
        except pd.errors.EmptyDataError:
            raise DataError(f"{path}: no rows") from None
        except FileNotFoundError:
            raise DataError(f"{path}: file not found") from None
        except pd.errors.ParserError as e:
            raise DataError(f"{path}: {e}") from None


def load_matrix(matrix_path, groups_path):
    """Load a matrix and groups file (see DataLoader.load_matrix)."""
    return DataLoader().load_matrix(matrix_path, groups_path)
