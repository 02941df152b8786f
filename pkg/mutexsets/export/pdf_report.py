import io
import logging

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from reportlab.lib import colors  # noqa: E402
from reportlab.lib.pagesizes import letter  # noqa: E402
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet  # noqa: E402
from reportlab.lib.units import inch  # noqa: E402
from reportlab.platypus import Image, Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle  # noqa: E402

from mutexsets.utils.constants import APP_NAME, APP_VERSION, PDF_TOP_SETS  # noqa: E402
from mutexsets.utils.helpers import format_datetime, format_fraction, format_log_pvalue  # noqa: E402

logger = logging.getLogger(__name__)

_GRID_STYLE = [
    ("BACKGROUND", (0, 0), (-1, 0), colors.grey),
    ("TEXTCOLOR", (0, 0), (-1, 0), colors.whitesmoke),
    ("FONTNAME", (0, 0), (-1, 0), "Helvetica-Bold"),
    ("FONTSIZE", (0, 0), (-1, -1), 8),
    ("BOTTOMPADDING", (0, 0), (-1, -1), 3),
    ("TOPPADDING", (0, 0), (-1, -1), 3),
    ("GRID", (0, 0), (-1, -1), 0.5, colors.black),
]


class PDFReportGenerator:
    """
    Class for generating a PDF summary of an analysis run.
    """

    def __init__(self, top_sets=PDF_TOP_SETS):
        self.top_sets = top_sets
        self.styles = getSampleStyleSheet()
        self.styles.add(ParagraphStyle(
            name="ReportTitle",
            parent=self.styles["Title"],
            fontSize=16,
            spaceAfter=12,
            textColor=colors.darkblue,
        ))
        self.styles.add(ParagraphStyle(
            name="SectionHeading",
            parent=self.styles["Heading2"],
            fontSize=12,
            spaceAfter=8,
            textColor=colors.darkblue,
        ))
        self.styles.add(ParagraphStyle(
            name="Caption",
            parent=self.styles["Normal"],
            fontSize=9,
            spaceAfter=6,
            textColor=colors.gray,
            alignment=1,
        ))

    def generate_report(self, filename, report):
        """
        Generate the PDF summary.

        Args:
            filename: Path where to save the PDF report
            report: ResultReport
        """
        doc = SimpleDocTemplate(
            str(filename), pagesize=letter, rightMargin=54, leftMargin=54, topMargin=54, bottomMargin=54
        )
        elements = []
        self._add_header(elements)
        self._add_parameters(elements, report.metadata)
        self._add_counts(elements, report)
        if report.sets:
            self._add_size_chart(elements, report)
            self._add_top_sets(elements, report.sets)
        else:
            elements.append(Paragraph("No significant alteration sets were found.", self.styles["Normal"]))
        doc.build(elements)
        logger.debug("PDF report written to %s", filename)

    def _add_header(self, elements):
        elements.append(Paragraph(f"{APP_NAME} - Anti-co-occurrence Report", self.styles["ReportTitle"]))
        elements.append(Paragraph(
            f"Version {APP_VERSION}, generated on {format_datetime()}", self.styles["Normal"]
        ))
        elements.append(Spacer(1, 0.25 * inch))

    def _add_parameters(self, elements, metadata):
        elements.append(Paragraph("Run parameters", self.styles["SectionHeading"]))
        config = metadata.get("config", {})
        data = [["Parameter", "Value"]]
        for key in ("k_max", "max_iter", "alpha_w", "level", "correction", "seed"):
            data.append([key, str(config.get(key, ""))])
        inputs = metadata.get("input", {})
        data.append(["alterations (m)", str(inputs.get("m", ""))])
        data.append(["samples (n)", str(inputs.get("n", ""))])
        data.append(["groups", str(len(inputs.get("groups", {})))])
        table = Table(data, colWidths=[2 * inch, 3 * inch])
        table.setStyle(TableStyle(_GRID_STYLE))
        elements.append(table)
        elements.append(Spacer(1, 0.2 * inch))

    def _add_counts(self, elements, report):
        elements.append(Paragraph("Results", self.styles["SectionHeading"]))
        pool = report.metadata.get("pool", {})
        summary = report.summary()
        lines = [
            f"Candidate sets generated: {pool.get('generated', 0)}, tested after subset closure: "
            f"{pool.get('tested', 0)}.",
            f"Significant sets reported: {summary['sets']} covering {summary['alterations']} "
            f"alterations in {summary['genes']} genes.",
            f"Union graph: {summary['graph_nodes']} nodes, {summary['graph_edges']} edges, "
            f"{summary['connected_components']} connected components.",
        ]
        if summary["rarest_alteration"]:
            rarest = summary["rarest_alteration"]
            lines.append(f"Rarest reported alteration: {rarest['label']} (coverage {rarest['coverage']}).")
        for line in lines:
            elements.append(Paragraph(line, self.styles["Normal"]))
        elements.append(Spacer(1, 0.2 * inch))

    def _add_size_chart(self, elements, report):
        sizes = report.summary()["sets_per_size"]
        fig, ax = plt.subplots(figsize=(6, 3))
        ax.bar([int(s) for s in sizes], list(sizes.values()), color="steelblue")
        ax.set_xlabel("Set size")
        ax.set_ylabel("Significant sets")
        ax.set_xticks([int(s) for s in sizes])
        fig.tight_layout()
        buffer = io.BytesIO()
        fig.savefig(buffer, format="png", dpi=150)
        plt.close(fig)
        buffer.seek(0)
        elements.append(Image(buffer, width=6 * inch, height=3 * inch))
        elements.append(Paragraph("Number of reported sets per set size", self.styles["Caption"]))
        elements.append(Spacer(1, 0.2 * inch))

    def _add_top_sets(self, elements, rows):
        elements.append(Paragraph(f"Top {min(self.top_sets, len(rows))} sets", self.styles["SectionHeading"]))
        cell = ParagraphStyle(name="Cell", parent=self.styles["Normal"], fontSize=8, leading=10)
        data = [["Rank", "Coverage", "p (raw)", "p (adjusted)", "Alteration set"]]
        for row in rows[: self.top_sets]:
            data.append([
                str(row.rank),
                format_fraction(row.coverage_fraction),
                format_log_pvalue(row.log_p_raw),
                format_log_pvalue(row.log_p_adjusted),
                Paragraph(", ".join(row.members), cell),
            ])
        table = Table(data, colWidths=[0.5 * inch, 0.8 * inch, 0.9 * inch, 0.9 * inch, 3.4 * inch], repeatRows=1)
        table.setStyle(TableStyle(_GRID_STYLE + [("VALIGN", (0, 0), (-1, -1), "TOP")]))
        elements.append(table)
