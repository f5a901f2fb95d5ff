"""
Evaluation metrics over engine runs.

The scoring unit is one true object in one scenario: its maximum hostility
probability while inside the target zone, labelled by ground-truth hostility.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import pandas as pd

from .exceptions import EmptyInputError
from .simgen import GroundTruth
from .tagger_som import Assignment

logger = logging.getLogger(__name__)

SOURCES = ("neural", "analytic", "template")


def roc_auc(scores: Iterable[Tuple[float, bool]]) -> float:
    """
    Probability that a random positive outscores a random negative, ties
    counted half. Computed from average ranks.
    """
    frame = pd.DataFrame(list(scores), columns=["p", "label"])
    positives = int(frame["label"].astype(bool).sum())
    negatives = len(frame) - positives
    if positives == 0 or negatives == 0:
        raise EmptyInputError(
            f"ROC AUC needs both classes, got {positives} positive and {negatives} negative"
        )
    ranks = frame["p"].rank(method="average")
    rank_sum = float(ranks[frame["label"].astype(bool)].sum())
    return (rank_sum - positives * (positives + 1) / 2.0) / (positives * negatives)


def identity_accuracy(assignments: Sequence[Assignment], truth: GroundTruth) -> float:
    """
    Fraction of (frame, blip) pairs whose tagged id matches the id first
    given to the same true object.
    """
    first: Dict[int, int] = {}
    hits = total = 0
    for assignment, row in zip(assignments, truth.correspondence):
        for blip_index, truth_id in enumerate(row):
            tagged = assignment.matches[blip_index]
            expected = first.setdefault(truth_id, tagged)
            hits += tagged == expected
            total += 1
    if total == 0:
        raise EmptyInputError("No tagged blips to score")
    return hits / total


@dataclass(frozen=True)
class ObjectOutcome:
    scenario: str
    truth_id: int
    hostile: bool
    max_p: Mapping[str, float]
    first_entry_time: Optional[float]
    first_alert_time: Optional[float]


@dataclass(frozen=True)
class EvalReport:
    theta: float
    roc_auc: Mapping[str, Optional[float]]
    tp: int
    fp: int
    tn: int
    fn: int
    mean_time_to_alert: Optional[float]
    scenarios: Tuple[Dict, ...] = ()
    objects: Tuple[ObjectOutcome, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("Confusion counts must be non-negative")

    @property
    def precision(self) -> Optional[float]:
        flagged = self.tp + self.fp
        return self.tp / flagged if flagged else None

    @property
    def recall(self) -> Optional[float]:
        hostile = self.tp + self.fn
        return self.tp / hostile if hostile else None

    def to_dict(self) -> Dict:
        return {
            "kind": "eval_report",
            "theta": self.theta,
            "roc_auc": dict(self.roc_auc),
            "confusion": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
            "precision": self.precision,
            "recall": self.recall,
            "mean_time_to_alert": self.mean_time_to_alert,
            "objects": len(self.objects),
            "scenarios": list(self.scenarios),
        }

    def object_frame(self) -> pd.DataFrame:
        rows = []
        for o in self.objects:
            row = {"scenario": o.scenario, "truth_id": o.truth_id, "hostile": o.hostile,
                   "first_entry_time": o.first_entry_time, "first_alert_time": o.first_alert_time}
            row.update({f"max_p_{source}": o.max_p.get(source, 0.0) for source in SOURCES})
            rows.append(row)
        return pd.DataFrame(rows)


def object_outcomes(scenario: str, report: Mapping) -> List[ObjectOutcome]:
    """Collapse a run report's tagged-object rows onto true objects."""
    grouped: Dict[int, Dict] = {}
    skipped = 0
    for row in report.get("objects", []):
        truth_id = row.get("truth_id")
        if truth_id is None:
            skipped += 1
            continue
        entry = grouped.setdefault(truth_id, {
            "hostile": bool(row["hostile"]),
            "max_p": {source: 0.0 for source in SOURCES},
            "entries": [],
            "alerts": [],
        })
        for source in SOURCES:
            entry["max_p"][source] = max(entry["max_p"][source], float(row["max_p"].get(source, 0.0)))
        if row.get("first_entry_time") is not None:
            entry["entries"].append(row["first_entry_time"])
        if row.get("first_alert", {}).get("neural") is not None:
            entry["alerts"].append(row["first_alert"]["neural"])
    if skipped:
        logger.warning(f"{scenario}: {skipped} tagged object(s) carry no ground truth and are not evaluated")
    return [
        ObjectOutcome(
            scenario=scenario,
            truth_id=truth_id,
            hostile=entry["hostile"],
            max_p=entry["max_p"],
            first_entry_time=min(entry["entries"], default=None),
            first_alert_time=min(entry["alerts"], default=None),
        )
        for truth_id, entry in sorted(grouped.items())
    ]


def evaluate_reports(reports: Sequence[Tuple[str, Mapping]], theta: float) -> EvalReport:
    """Aggregate named run reports into one EvalReport, with AUC per scoring source."""
    if not reports:
        raise EmptyInputError("No run reports to evaluate")
    outcomes: List[ObjectOutcome] = []
    scenarios = []
    for name, report in reports:
        mine = object_outcomes(name, report)
        outcomes.extend(mine)
        scenarios.append({
            "scenario": name,
            "objects": len(mine),
            "hostile": sum(o.hostile for o in mine),
            "flagged": sum(o.max_p["neural"] > theta for o in mine),
            "misses": len(report.get("misses", [])),
        })
    if not outcomes:
        raise EmptyInputError("Run reports carry no ground-truth-labelled objects; run with --truth")

    aucs: Dict[str, Optional[float]] = {}
    for source in SOURCES:
        try:
            aucs[source] = roc_auc((o.max_p[source], o.hostile) for o in outcomes)
        except EmptyInputError:
            logger.warning(f"ROC AUC for {source} is undefined: the evaluation set holds a single class")
            aucs[source] = None

    tp = fp = tn = fn = 0
    delays = []
    for o in outcomes:
        flagged = o.max_p["neural"] > theta
        if o.hostile and flagged:
            tp += 1
            if o.first_alert_time is not None and o.first_entry_time is not None:
                delays.append(o.first_alert_time - o.first_entry_time)
        elif o.hostile:
            fn += 1
        elif flagged:
            fp += 1
        else:
            tn += 1

    report = EvalReport(
        theta=theta,
        roc_auc=aucs,
        tp=tp, fp=fp, tn=tn, fn=fn,
        mean_time_to_alert=sum(delays) / len(delays) if delays else None,
        scenarios=tuple(scenarios),
        objects=tuple(outcomes),
    )
    logger.info(f"Evaluated {len(outcomes)} objects over {len(reports)} scenarios: AUC {aucs}")
    return report
