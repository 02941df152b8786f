import json
import logging
from pathlib import Path

import networkx as nx
import pandas as pd

from mutexsets.utils.constants import (
    EXPORT_FILES,
    GROUPS_GROUP_COLUMN,
    GROUPS_SAMPLE_COLUMN,
    MATRIX_ROW_COLUMN,
    PAIRS_COLUMNS,
    POOL_COLUMNS,
    SETS_COLUMNS,
)
from mutexsets.utils.errors import DataError
from mutexsets.utils.helpers import format_fraction, format_log_pvalue

logger = logging.getLogger(__name__)


class ReportExporter:
    """
    Class for writing analysis results as TSV, GraphML and JSON files.
    """

    def export_report(self, report, out_dir, pdf=False):
        """
        Write every output file of a run.

        Args:
            report: ResultReport
            out_dir: Output directory (created if missing)
            pdf: Also write the PDF summary

        Returns:
            dict: File kind -> written path
        """
        out_dir = Path(out_dir)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise DataError(f"{out_dir}: cannot create output directory ({e.strerror})") from e

        written = {
            "sets": self._export_sets(out_dir / EXPORT_FILES["sets"], report.sets),
            "graph": self._export_graph(out_dir / EXPORT_FILES["graph"], report.graph),
            "metadata": self._export_json(out_dir / EXPORT_FILES["metadata"], report.metadata),
        }
        if report.pool_rows is not None:
            written["pool"] = self.write_table(
                out_dir / EXPORT_FILES["pool"], pd.DataFrame(report.pool_rows, columns=POOL_COLUMNS)
            )
        if report.pairwise is not None:
            written["pairs"] = self._export_pairs(out_dir / EXPORT_FILES["pairs"], report.pairwise)
            written["pair_graph"] = self._export_graph(out_dir / EXPORT_FILES["pair_graph"], report.pairwise.graph)
        if pdf:
            from mutexsets.export.pdf_report import PDFReportGenerator

            path = out_dir / EXPORT_FILES["pdf"]
            try:
                PDFReportGenerator().generate_report(path, report)
            except OSError as e:
                raise DataError(f"{path}: {e}") from e
            written["pdf"] = path

        for kind, path in written.items():
            logger.info("wrote %s: %s", kind, path)
        return written

    def _export_sets(self, path, rows):
        table = pd.DataFrame(
            [
                [
                    row.rank,
                    format_fraction(row.coverage_fraction),
                    format_log_pvalue(row.log_p_raw),
                    format_log_pvalue(row.log_p_adjusted),
                    ", ".join(row.members),
                ]
                for row in rows
            ],
            columns=SETS_COLUMNS,
        )
        return self.write_table(path, table)

    def _export_pairs(self, path, pairwise):
        table = pd.DataFrame(
            [
                [
                    rank,
                    format_fraction(pair.coverage_fraction),
                    format_log_pvalue(pair.log_p_raw),
                    format_log_pvalue(pair.log_p_adjusted),
                    ", ".join(pair.members),
                ]
                for rank, pair in enumerate(pairwise.pairs, start=1)
            ],
            columns=PAIRS_COLUMNS,
        )
        return self.write_table(path, table)

    def write_table(self, path, table):
        try:
            table.to_csv(path, sep="\t", index=False, lineterminator="\n", encoding="utf-8")
        except OSError as e:
            raise DataError(f"{path}: {e.strerror}") from e
        return path

    def _export_graph(self, path, graph):
        try:
            nx.write_graphml(graph, path, encoding="utf-8")
        except OSError as e:
            raise DataError(f"{path}: {e.strerror}") from e
        return path

    def _export_json(self, path, data):
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as handle:
                json.dump(data, handle, indent=2, ensure_ascii=False)
                handle.write("\n")
        except OSError as e:
            raise DataError(f"{path}: {e.strerror}") from e
        return path


def export_report(report, out_dir, pdf=False):
    """Write a ResultReport to a directory (see ReportExporter.export_report)."""
    return ReportExporter().export_report(report, out_dir, pdf=pdf)


def write_matrix(matrix, matrix_path, groups_path):
    """
    Write a matrix and its groups in the input TSV formats.

    Args:
        matrix: AlterationMatrix
        matrix_path: Destination of the matrix TSV
        groups_path: Destination of the groups TSV
    """
    table = pd.DataFrame(matrix.to_dense().astype(int), columns=list(matrix.sample_ids))
    table.insert(0, MATRIX_ROW_COLUMN, list(matrix.row_labels))
    groups = pd.DataFrame(
        {
            GROUPS_SAMPLE_COLUMN: list(matrix.sample_ids),
            GROUPS_GROUP_COLUMN: [matrix.group_of[s] for s in matrix.sample_ids],
        }
    )
    exporter = ReportExporter()
    exporter.write_table(Path(matrix_path), table)
    exporter.write_table(Path(groups_path), groups)
    logger.info("wrote %d x %d matrix to %s", matrix.m, matrix.n, matrix_path)
