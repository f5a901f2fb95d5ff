import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from django.core.management.base import CommandError
from tqdm import tqdm

from hostility.management.base import (
    FRAMES_FILE,
    REPORT_FILE,
    SCENARIO_FILE,
    SCORES_FILE,
    TRUTH_FILE,
    SentryCommand,
    detection,
    engine_config,
    scenario_dirs,
    write_json,
)
from hostility.records import record_run
from hostility.runs import RunInputs, execute, report_payload, write_scores

logger = logging.getLogger(__name__)


class Command(SentryCommand):
    help = 'Runs the detection engine over a frame sequence, or over every scenario in a directory.'

    def add_arguments(self, parser):
        parser.add_argument('--model', type=str, required=True, help='Network checkpoint.')
        parser.add_argument('--frames', type=str, help='Frames file (.jsonl or t= lines).')
        parser.add_argument('--truth', type=str, help='Ground truth; enables the act oracle and retraining.')
        parser.add_argument('--scenario-config', type=str, dest='scenario_config', help='Scenario geometry; defaults to scenario.json beside the frames.')
        parser.add_argument('--scenarios', type=str, help='Batch mode: directory of scenario sub-directories.')
        parser.add_argument('--theta', type=float, help='Alert threshold (default from settings).')
        parser.add_argument('--seed', type=int, help='Seed for retraining draws.')
        parser.add_argument('--out', type=str, required=True, help='Report file, or output directory in batch mode.')
        parser.add_argument('--workers', type=int, help='Batch mode worker threads.')
        parser.add_argument('--persist', action='store_true', help='Store the run history in the database.')

    def run_command(self, *args, **options):
        if bool(options['frames']) == bool(options['scenarios']):
            raise CommandError('Give exactly one of --frames or --scenarios', returncode=2)
        config = engine_config(options['theta'], options['seed'])

        if options['frames']:
            inputs = RunInputs.resolved(options['model'], options['frames'], options['truth'],
                                        options['scenario_config'])
            out = Path(options['out'])
            payload = self._run_one(inputs, config, out)
            self._finish([(Path(options['frames']).stem, out, payload)], options)
            return

        workers = options['workers'] or detection('WORKERS')
        if workers < 1:
            raise CommandError('--workers must be at least 1', returncode=2)
        root = Path(options['out'])
        jobs = []
        for directory in scenario_dirs(options['scenarios']):
            truth = directory / TRUTH_FILE
            scenario = directory / SCENARIO_FILE
            inputs = RunInputs.resolved(
                options['model'], directory / FRAMES_FILE,
                truth if truth.exists() else None,
                scenario if scenario.exists() else None,
            )
            jobs.append((directory.name, inputs, root / directory.name / REPORT_FILE))

        with ThreadPoolExecutor(max_workers=workers) as pool:
            # map keeps submission order, so the merge is independent of scheduling
            results = pool.map(lambda job: self._run_one(job[1], config, job[2]), jobs)
            finished = [
                (name, out, payload)
                for (name, _, out), payload in tqdm(zip(jobs, results), total=len(jobs), desc='run',
                                                    disable=not self.show_progress)
            ]
        self._finish(finished, options)

    def _run_one(self, inputs: RunInputs, config, out: Path):
        report = execute(inputs, config)
        scores = out.with_name(SCORES_FILE) if out.name == REPORT_FILE else out.with_suffix('.csv')
        out.parent.mkdir(parents=True, exist_ok=True)
        write_scores(report, scores)
        payload = report_payload(report, inputs, config, scores_csv=scores.name)
        write_json(out, payload)
        return payload

    def _finish(self, finished, options):
        alerts = misses = 0
        for name, out, payload in finished:
            alerts += payload['alert_count']
            misses += len(payload['misses'])
            if options['persist']:
                record_run(name, payload, model_path=options['model'], report_path=str(out))
        self.success(
            f"Ran {len(finished)} scenario(s): {alerts} objects flagged, {misses} misses"
            + (" (recorded)" if options['persist'] else "")
        )
