import logging
from pathlib import Path

from hostility.management.base import SentryCommand, detection, find_reports, read_json, write_json
from hostility.reports import render_evaluation_pdf
from services.evaluation import evaluate_reports
from services.exceptions import EmptyInputError

logger = logging.getLogger(__name__)


class Command(SentryCommand):
    help = 'Aggregates run reports into an evaluation: ROC AUC per scorer, confusion counts, time to alert.'

    def add_arguments(self, parser):
        parser.add_argument('--reports', type=str, required=True, help='Directory searched recursively for run reports.')
        parser.add_argument('--out', type=str, required=True, help='Evaluation JSON to write.')
        parser.add_argument('--theta', type=float, help='Threshold for the confusion counts (default from settings).')
        parser.add_argument('--csv', type=str, help='Optional per-object table.')
        parser.add_argument('--pdf', type=str, help='Optional PDF rendering of the evaluation.')

    def run_command(self, *args, **options):
        found = find_reports(options['reports'])
        if not found:
            raise EmptyInputError(f"No run reports under {options['reports']}")
        theta = detection('THETA') if options['theta'] is None else options['theta']
        report = evaluate_reports([(name, read_json(path)) for name, path in found], theta)

        write_json(options['out'], report.to_dict())
        if options['csv']:
            report.object_frame().to_csv(options['csv'], index=False)
        if options['pdf']:
            Path(options['pdf']).write_bytes(render_evaluation_pdf(report))

        auc = report.roc_auc.get('neural')
        self.success(
            f"Evaluated {len(report.objects)} objects from {len(found)} reports: "
            f"AUC {'n/a' if auc is None else f'{auc:.4f}'}, "
            f"TP={report.tp} FP={report.fp} TN={report.tn} FN={report.fn}"
        )
