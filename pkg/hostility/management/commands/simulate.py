import logging
from dataclasses import replace
from pathlib import Path

from django.core.management.base import CommandError
from tqdm import tqdm

from hostility.management.base import (
    FRAMES_FILE,
    SCENARIO_FILE,
    TRUTH_FILE,
    SentryCommand,
    effective_seed,
)
from services.simgen import ScenarioConfig, generate, load_scenario_config, save_scenario_config, write_truth
from services.track_model import write_frames

logger = logging.getLogger(__name__)


class Command(SentryCommand):
    help = 'Generates synthetic radar scenarios: frames.jsonl, truth.jsonl and scenario.json per scenario.'

    def add_arguments(self, parser):
        parser.add_argument('--config', type=str, help='Scenario config file (.json, or key = value text). Defaults apply when omitted.')
        parser.add_argument('--out', type=str, required=True, help='Output directory.')
        parser.add_argument('--seed', type=int, help='Base seed; scenario i uses seed + i.')
        parser.add_argument('--count', type=int, default=1, help='Number of scenarios. Above 1, each goes to its own sub-directory.')
        parser.add_argument(
            '--mixed',
            action='store_true',
            help='Remove the hostile vessels from odd-indexed scenarios.'
        )

    def run_command(self, *args, **options):
        base = load_scenario_config(options['config']) if options['config'] else ScenarioConfig()
        seed = effective_seed(options['seed'] if options['seed'] is not None else base.seed)
        count = options['count']
        if count < 1:
            raise CommandError('--count must be at least 1', returncode=2)
        out = Path(options['out'])

        for index in tqdm(range(count), desc='simulate', disable=not self.show_progress or count == 1):
            cfg = replace(base, seed=seed + index)
            if options['mixed'] and index % 2 == 1:
                cfg = replace(cfg, n_hostile=0)
            target = out if count == 1 else out / f"scenario_{index:03d}"
            target.mkdir(parents=True, exist_ok=True)
            frames, truth = generate(cfg)
            write_frames(target / FRAMES_FILE, frames)
            write_truth(target / TRUTH_FILE, truth)
            save_scenario_config(cfg, target / SCENARIO_FILE)
            logger.debug(f"Wrote scenario seed={cfg.seed} to {target}")

        self.success(f"Generated {count} scenario(s) under {out}")
