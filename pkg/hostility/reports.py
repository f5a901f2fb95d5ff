"""
PDF evaluation report using reportlab.
"""

import logging
from io import BytesIO

from reportlab.lib import colors
from reportlab.lib.pagesizes import letter
from reportlab.lib.styles import getSampleStyleSheet, ParagraphStyle
from reportlab.lib.units import inch
from reportlab.platypus import SimpleDocTemplate, Table, TableStyle, Paragraph, Spacer

from services.evaluation import SOURCES, EvalReport

logger = logging.getLogger(__name__)


def _fmt(value, digits=3):
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return str(value)


def _table(rows, widths=None):
    table = Table(rows, colWidths=widths, repeatRows=1)
    table.setStyle(TableStyle([
        ('BACKGROUND', (0, 0), (-1, 0), colors.HexColor('#1f4788')),
        ('TEXTCOLOR', (0, 0), (-1, 0), colors.whitesmoke),
        ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
        ('FONTSIZE', (0, 0), (-1, -1), 9),
        ('GRID', (0, 0), (-1, -1), 0.5, colors.grey),
        ('ROWBACKGROUNDS', (0, 1), (-1, -1), [colors.white, colors.HexColor('#eef2f8')]),
    ]))
    return table


def render_evaluation_pdf(report: EvalReport) -> bytes:
    """
    Render an EvalReport: title, summary metrics and the per-scenario table.

    The document carries no generation time, so equal reports give equal bytes.
    """
    buffer = BytesIO()
    doc = SimpleDocTemplate(
        buffer,
        pagesize=letter,
        rightMargin=0.75 * inch,
        leftMargin=0.75 * inch,
        topMargin=0.75 * inch,
        bottomMargin=0.75 * inch,
        invariant=1,
        title="Hostile intent detection evaluation",
    )

    styles = getSampleStyleSheet()
    title_style = ParagraphStyle(
        'CustomTitle',
        parent=styles['Heading1'],
        fontSize=20,
        textColor=colors.HexColor('#1f4788'),
        spaceAfter=20,
        alignment=1
    )
    heading_style = ParagraphStyle(
        'CustomHeading',
        parent=styles['Heading2'],
        fontSize=13,
        textColor=colors.HexColor('#2b5fa3'),
        spaceAfter=10,
        spaceBefore=10,
    )

    story = [Paragraph("Hostile Intent Detection - Evaluation", title_style)]
    story.append(Paragraph(
        f"<b>Objects evaluated:</b> {len(report.objects)}<br/>"
        f"<b>Scenarios:</b> {len(report.scenarios)}<br/>"
        f"<b>Alert threshold:</b> {report.theta}",
        styles['BodyText'],
    ))
    story.append(Spacer(1, 0.25 * inch))

    story.append(Paragraph("Summary", heading_style))
    summary = [["Metric", "Value"]]
    summary += [[f"ROC AUC ({source})", _fmt(report.roc_auc.get(source), 4)] for source in SOURCES]
    summary += [
        ["True positives", _fmt(report.tp)],
        ["False positives", _fmt(report.fp)],
        ["True negatives", _fmt(report.tn)],
        ["False negatives", _fmt(report.fn)],
        ["Precision", _fmt(report.precision)],
        ["Recall", _fmt(report.recall)],
        ["Mean time to alert (s)", _fmt(report.mean_time_to_alert, 1)],
    ]
    story.append(_table(summary, widths=[3.0 * inch, 2.0 * inch]))
    story.append(Spacer(1, 0.25 * inch))

    story.append(Paragraph("Scenarios", heading_style))
    rows = [["Scenario", "Objects", "Hostile", "Flagged", "Misses"]]
    rows += [
        [s["scenario"], str(s["objects"]), str(s["hostile"]), str(s["flagged"]), str(s["misses"])]
        for s in report.scenarios
    ]
    story.append(_table(rows))

    doc.build(story)
    logger.info(f"Rendered evaluation PDF for {len(report.scenarios)} scenarios")
    return buffer.getvalue()
