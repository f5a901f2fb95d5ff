"""
Shared plumbing for the detection management commands: exit-code mapping,
seed resolution and the scenario-directory loaders.
"""

import json
import logging
from pathlib import Path
from typing import List, Optional, Tuple

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from services.engine import EngineConfig
from services.exceptions import (
    ConfigError,
    DeterminismError,
    DimensionError,
    EmptyInputError,
    RecordFormatError,
)
from services.net_mlp import TrainConfig
from services.simgen import ScenarioConfig, load_scenario_config
from services.tagger_som import SomParams

logger = logging.getLogger(__name__)

FRAMES_FILE = "frames.jsonl"
TRUTH_FILE = "truth.jsonl"
SCENARIO_FILE = "scenario.json"
REPORT_FILE = "report.json"
SCORES_FILE = "scores.csv"

EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_DIMENSION = 5
EXIT_DETERMINISM = 6

# first match wins
EXIT_CODES = (
    (DeterminismError, EXIT_DETERMINISM),
    (DimensionError, EXIT_DIMENSION),
    (RecordFormatError, EXIT_FORMAT),
    (ConfigError, EXIT_FORMAT),
    (EmptyInputError, EXIT_FORMAT),
    (OSError, EXIT_IO),
)


def exit_code_for(error: BaseException) -> Optional[int]:
    for kind, code in EXIT_CODES:
        if isinstance(error, kind):
            return code
    return None


class SentryCommand(BaseCommand):
    """
    Base for the detection commands.

    Subclasses implement `run_command`; known pipeline errors become a
    one-line CommandError carrying the matching exit code.
    """

    def run_command(self, *args, **options):
        raise NotImplementedError("subclasses of SentryCommand must provide a run_command() method")

    def handle(self, *args, **options):
        self.verbosity = options.get("verbosity", 1)
        try:
            return self.run_command(*args, **options)
        except CommandError:
            raise
        except Exception as e:
            code = exit_code_for(e)
            if code is None:
                raise
            logger.error(f"{self.__module__.rsplit('.', 1)[-1]} failed: {e}", exc_info=True)
            raise CommandError(f"{type(e).__name__}: {e}", returncode=code) from e

    def success(self, message: str) -> None:
        if self.verbosity > 0:
            self.stdout.write(self.style.SUCCESS(message))

    @property
    def show_progress(self) -> bool:
        return getattr(self, "verbosity", 1) > 0


def detection(key: str):
    return settings.DETECTION[key]


def effective_seed(seed: Optional[int]) -> int:
    """SENTRY_SEED wins over any seed given on the command line or in a config."""
    if settings.SENTRY_SEED is not None:
        return settings.SENTRY_SEED
    return 0 if seed is None else seed


def engine_config(theta: Optional[float] = None, seed: Optional[int] = None) -> EngineConfig:
    return EngineConfig(
        theta=detection("THETA") if theta is None else theta,
        gate=detection("GATE"),
        max_coast=detection("MAX_COAST"),
        som_width=detection("SOM_WIDTH"),
        som_height=detection("SOM_HEIGHT"),
        som=SomParams(),
        retrain=TrainConfig(learning_rate=0.1, seed=effective_seed(seed)),
        retrain_target_loss=detection("RETRAIN_TARGET_LOSS"),
        retrain_max_steps=detection("RETRAIN_MAX_STEPS"),
    )


def scenario_config_for(frames_path: Path, explicit: Optional[str] = None) -> ScenarioConfig:
    """Scenario geometry: an explicit file, else scenario.json beside the frames, else defaults."""
    if explicit:
        return load_scenario_config(explicit)
    sibling = Path(frames_path).parent / SCENARIO_FILE
    if sibling.exists():
        return load_scenario_config(sibling)
    logger.warning(f"No {SCENARIO_FILE} beside {frames_path}; using the default scenario geometry")
    return ScenarioConfig()


def scenario_dirs(root) -> List[Path]:
    """Sub-directories of root holding a frames file, in sorted-name order."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(2, "No such scenario directory", str(root))
    found = sorted(p for p in root.iterdir() if p.is_dir() and (p / FRAMES_FILE).exists())
    if (root / FRAMES_FILE).exists():
        found.insert(0, root)
    skipped = [p.name for p in root.iterdir() if p.is_dir() and p not in found]
    if skipped:
        logger.warning(f"Skipping directories without {FRAMES_FILE}: {sorted(skipped)}")
    if not found:
        raise EmptyInputError(f"No scenario directories with {FRAMES_FILE} under {root}")
    return found


def write_json(path, data) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as e:
            raise RecordFormatError(f"{path} is not valid JSON: {e}") from e


def find_reports(root) -> List[Tuple[str, Path]]:
    """Run reports under root as (name relative to root, path), sorted by name."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(2, "No such reports directory", str(root))
    found = []
    for path in sorted(root.rglob("*.json")):
        data = read_json(path)
        if isinstance(data, dict) and data.get("kind") == "run_report":
            relative = path.parent.relative_to(root).as_posix()
            found.append((relative if relative != "." else path.stem, path))
    return found
