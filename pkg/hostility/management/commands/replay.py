import logging

from hostility.management.base import SentryCommand, read_json
from hostility.runs import RunInputs, events_text, execute
from services.engine import EngineConfig
from services.exceptions import DeterminismError, RecordFormatError

logger = logging.getLogger(__name__)


class Command(SentryCommand):
    help = 'Re-executes a recorded run and checks that its event stream is reproduced byte for byte.'

    def add_arguments(self, parser):
        parser.add_argument('--report', type=str, required=True, help='Run report written by the run command.')
        parser.add_argument('--repeat', type=int, default=1, help='Number of re-executions to compare.')

    def run_command(self, *args, **options):
        payload = read_json(options['report'])
        try:
            inputs = RunInputs.from_dict(payload['inputs'])
            config = EngineConfig.from_dict(payload['config'])
            expected = events_text(payload['events'])
        except (KeyError, TypeError) as e:
            raise RecordFormatError(f"{options['report']} is not a replayable run report: missing {e}") from e

        for attempt in range(1, max(1, options['repeat']) + 1):
            actual = events_text(execute(inputs, config).events())
            if actual != expected:
                raise DeterminismError(
                    f"Replay {attempt} of {options['report']} diverged from the recorded events"
                )
            logger.debug(f"Replay {attempt} matched {len(payload['events'])} events")

        self.success(f"Replayed {options['report']} {max(1, options['repeat'])} time(s): events identical")
