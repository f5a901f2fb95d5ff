"""
Engine execution shared by the run and replay commands.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

from services.engine import EngineConfig, EngineState, RunReport, run
from services.features import write_feature_csv
from services.net_mlp import load_mlp
from services.simgen import load_scenario_config, read_truth
from services.track_model import read_frames

from .management.base import scenario_config_for

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunInputs:
    model: str
    frames: str
    truth: Optional[str] = None
    scenario: Optional[str] = None

    def to_dict(self) -> Dict:
        return {"model": self.model, "frames": self.frames, "truth": self.truth, "scenario": self.scenario}

    @classmethod
    def from_dict(cls, data) -> "RunInputs":
        return cls(model=data["model"], frames=data["frames"],
                   truth=data.get("truth"), scenario=data.get("scenario"))

    @classmethod
    def resolved(cls, model, frames, truth=None, scenario=None) -> "RunInputs":
        """Absolute paths so a report replays from any working directory."""
        absolute = lambda p: None if p is None else str(Path(p).resolve())
        if scenario is None and (Path(frames).parent / "scenario.json").exists():
            scenario = Path(frames).parent / "scenario.json"
        return cls(absolute(model), absolute(frames), absolute(truth), absolute(scenario))


def execute(inputs: RunInputs, config: EngineConfig) -> RunReport:
    frames = read_frames(inputs.frames)
    truth = read_truth(inputs.truth) if inputs.truth else None
    if inputs.scenario:
        scenario = load_scenario_config(inputs.scenario)
    else:
        scenario = scenario_config_for(Path(inputs.frames))
    state = EngineState.initial(config, scenario.feature_config(), load_mlp(inputs.model))
    return run(state, frames, truth=truth)


def events_text(events) -> str:
    """Canonical bytes of an event list."""
    return "\n".join(json.dumps(e, sort_keys=True) for e in events) + "\n"


def report_payload(report: RunReport, inputs: RunInputs, config: EngineConfig,
                   scores_csv: Optional[str] = None) -> Dict:
    payload = report.to_dict(scores_csv=scores_csv, config=config.to_dict(), seed=config.retrain.seed)
    payload["inputs"] = inputs.to_dict()
    payload["events"] = report.events()
    return payload


def write_scores(report: RunReport, path) -> None:
    write_feature_csv(path, (s.csv_row() for s in report.scores))
