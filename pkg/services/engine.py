"""
Detection engine.

Runs the detection loop one frame at a time: tag the blips, feed the
located objects to the classifier, highlight in-zone objects whose
hostility crosses the threshold, check the act oracle and retrain on every
hostile act the classifier failed to flag in advance. Objects are scored
only while they are inside the target zone.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Protocol, Sequence, Tuple, Union

import numpy as np

from .exceptions import ConfigError, InsufficientHistoryError, OutOfOrderFrameError
from .features import FeatureConfig, FeaturePipeline, ObjectState, speed_violation_template
from .net_mlp import LabeledExample, Mlp, TrainConfig, forward, retrain_online
from .simgen import GroundTruth
from .tagger_som import Assignment, SomParams, TaggerState, tag_frame
from .track_model import Frame, Position

logger = logging.getLogger(__name__)

NEURAL = "neural"
ANALYTIC = "analytic"
TEMPLATE = "template"
SOURCES = (NEURAL, ANALYTIC, TEMPLATE)


@dataclass(frozen=True)
class EngineConfig:
    theta: float = 0.7
    gate: float = 60.0
    max_coast: int = 5
    som_width: int = 8
    som_height: int = 8
    som: SomParams = field(default_factory=SomParams)
    learn_som: bool = True
    retrain: TrainConfig = field(default_factory=lambda: TrainConfig(learning_rate=0.1))
    retrain_target_loss: float = 0.05
    retrain_max_steps: int = 2000
    replay_capacity: int = 2000
    speed_limit: float = 18.0
    speed_window: float = 10.0

    def __post_init__(self):
        if not 0 < self.theta < 1:
            raise ConfigError(f"theta must lie in (0, 1), got {self.theta}")
        if not self.gate > 0:
            raise ConfigError(f"gate must be positive, got {self.gate}")
        if self.max_coast < 0 or self.replay_capacity < 0 or self.retrain_max_steps < 0:
            raise ConfigError("max_coast, replay_capacity and retrain_max_steps must be non-negative")

    def to_dict(self) -> Dict:
        return {
            "theta": self.theta, "gate": self.gate, "max_coast": self.max_coast,
            "som_width": self.som_width, "som_height": self.som_height,
            "learn_som": self.learn_som,
            "retrain_learning_rate": self.retrain.learning_rate,
            "retrain_seed": self.retrain.seed,
            "retrain_target_loss": self.retrain_target_loss,
            "retrain_max_steps": self.retrain_max_steps,
            "replay_capacity": self.replay_capacity,
            "speed_limit": self.speed_limit, "speed_window": self.speed_window,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "EngineConfig":
        known = dict(data)
        retrain = TrainConfig(
            learning_rate=float(known.pop("retrain_learning_rate", 0.1)),
            seed=int(known.pop("retrain_seed", 0)),
        )
        casts = {"max_coast": int, "som_width": int, "som_height": int, "learn_som": bool,
                 "retrain_max_steps": int, "replay_capacity": int}
        try:
            kwargs = {key: casts.get(key, float)(value) for key, value in known.items()}
            return cls(retrain=retrain, **kwargs)
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"Malformed engine config: {e}") from e


@dataclass(frozen=True)
class AlertEvent:
    object_id: int
    timestamp: float
    p: float
    source: str

    def to_dict(self) -> Dict:
        return {"type": "alert", "object_id": self.object_id, "t": self.timestamp,
                "p": self.p, "source": self.source}


@dataclass(frozen=True)
class MissEvent:
    object_id: int
    act_time: float
    first_alert_time: Optional[float] = None

    def to_dict(self) -> Dict:
        return {"type": "miss", "object_id": self.object_id, "act_time": self.act_time,
                "first_alert_time": self.first_alert_time}


Event = Union[AlertEvent, MissEvent]


@dataclass(frozen=True)
class ActRecord:
    object_id: int
    act_time: float
    alerted: bool


@dataclass(frozen=True)
class FrameScore:
    """One scored object in one frame."""
    timestamp: float
    object_id: int
    d_t: float
    d_pn: float
    inefficiency: float
    speed: float
    heading: float
    p_neural: Optional[float]
    p_analytic: float
    template: bool

    def csv_row(self) -> Dict:
        return {"t": self.timestamp, "object_id": self.object_id, "d_t": self.d_t, "d_pn": self.d_pn,
                "I": self.inefficiency, "speed": self.speed, "heading": self.heading, "p": self.p_neural}


@dataclass(frozen=True, eq=False)
class Visit:
    """One stay of an object inside the target zone."""
    entry_time: float
    inputs: Tuple[Tuple[np.ndarray, int], ...] = ()
    alerted: FrozenSet[str] = frozenset()


class ActOracle(Protocol):
    """Reports the locations of hostile acts observed at a given time."""

    def acts_at(self, timestamp: float) -> List[Position]:
        ...


class SimulationOracle:
    """Act oracle backed by simulator ground truth."""

    def __init__(self, truth: GroundTruth):
        self._acts: Dict[float, List[Position]] = {}
        for obj in truth.objects:
            if obj.act_time is None:
                continue
            for t, p in obj.trajectory:
                if t == obj.act_time:
                    self._acts.setdefault(t, []).append(p)
                    break

    def acts_at(self, timestamp: float) -> List[Position]:
        return list(self._acts.get(timestamp, ()))


@dataclass(frozen=True, eq=False)
class EngineState:
    config: EngineConfig
    pipeline: FeaturePipeline
    tagger: TaggerState
    mlp: Mlp
    objects: Mapping[int, ObjectState] = field(default_factory=dict)
    visits: Mapping[int, Visit] = field(default_factory=dict)
    alerts: Tuple[AlertEvent, ...] = ()
    misses: Tuple[MissEvent, ...] = ()
    acts: Tuple[ActRecord, ...] = ()
    replay: Tuple[LabeledExample, ...] = ()
    pending: Mapping[int, Tuple[LabeledExample, ...]] = field(default_factory=dict)
    last_timestamp: Optional[float] = None
    last_assignment: Optional[Assignment] = None
    last_scores: Tuple[FrameScore, ...] = ()
    frames_processed: int = 0
    retrain_count: int = 0

    def __post_init__(self):
        missing = set(self.tagger.table.ids) - set(self.objects)
        if missing:
            raise ValueError(f"Location table ids {sorted(missing)} have no track")

    @classmethod
    def initial(
        cls,
        config: EngineConfig,
        features: FeatureConfig,
        mlp: Mlp,
        replay: Sequence[LabeledExample] = (),
    ) -> "EngineState":
        tagger = TaggerState.initial(features.area, config.som_width, config.som_height)
        return cls(config=config, pipeline=FeaturePipeline(features), tagger=tagger, mlp=mlp,
                   replay=tuple(replay)[-config.replay_capacity:] if config.replay_capacity else ())

    @property
    def theta(self) -> float:
        return self.config.theta


def _slot_example(vector: np.ndarray, slot: int, size: int, label: float) -> LabeledExample:
    target = np.zeros(size)
    mask = np.zeros(size, dtype=bool)
    target[slot] = label
    mask[slot] = True
    return LabeledExample(vector, target, mask)


def _visit_examples(visit: Visit, size: int, label: float) -> List[LabeledExample]:
    return [_slot_example(vector, slot, size, label) for vector, slot in visit.inputs]


def _bounded(buffer: Tuple[LabeledExample, ...], extra: Iterable[LabeledExample], capacity: int):
    if capacity == 0:
        return ()
    return (buffer + tuple(extra))[-capacity:]


def step(state: EngineState, frame: Frame, oracle: Optional[ActOracle] = None) -> Tuple[EngineState, List[Event]]:
    """
    Process one frame.

    Args:
        state: Engine state after the previous frame.
        frame: The next frame; its timestamp must be after the last one processed.
        oracle: Source of hostile acts. Without one no misses are detected and
            no benign examples are collected for replay.

    Returns:
        The successor state and the alert and miss events raised by this frame.

    Raises:
        OutOfOrderFrameError: the frame does not advance time.
    """
    if state.last_timestamp is not None and not frame.timestamp > state.last_timestamp:
        raise OutOfOrderFrameError(
            f"Frame at t={frame.timestamp} is not after the last processed frame t={state.last_timestamp}"
        )
    cfg = state.config
    pipeline = state.pipeline
    size = state.mlp.max_objects
    objects = dict(state.objects)
    visits = dict(state.visits)
    replay = state.replay
    pending = dict(state.pending)
    events: List[Event] = []

    def close_visit(object_id: int) -> None:
        # negatives wait in pending until the object retires without acting
        visit = visits.pop(object_id, None)
        if visit is not None and oracle is not None and not any(a.object_id == object_id for a in acts):
            pending[object_id] = pending.get(object_id, ()) + tuple(_visit_examples(visit, size, 0.0))

    acts = list(state.acts)

    # tag and update tracks
    tagger, assignment = tag_frame(state.tagger, frame, cfg.som, cfg.gate, cfg.max_coast, cfg.learn_som)
    for object_id in sorted(assignment.retired):
        objects.pop(object_id, None)
        close_visit(object_id)
        replay = _bounded(replay, pending.pop(object_id, ()), cfg.replay_capacity)
    present_ids = []
    for index, object_id in assignment.matches.items():
        objects[object_id] = pipeline.observe(objects.get(object_id), object_id, frame.timestamp,
                                              frame.blips[index].position)
        present_ids.append(object_id)
    present_ids.sort()

    # stacked attributes through the network
    present = [objects[i] for i in present_ids]
    vector, slots = pipeline.stack(present, size)
    probs = forward(state.mlp, vector) if slots else np.zeros(0)
    slot_of = {object_id: slot for slot, object_id in enumerate(slots)}

    # score in-zone objects and highlight
    alerts = list(state.alerts)
    scores = []
    for object_id in present_ids:
        obj = objects[object_id]
        if not obj.in_target_zone:
            close_visit(object_id)
            continue
        visit = visits.get(object_id)
        if visit is None or visit.entry_time != obj.target_entry.entry_time:
            if visit is not None:
                close_visit(object_id)
            visit = Visit(entry_time=obj.target_entry.entry_time)
        slot = slot_of.get(object_id)
        p_neural = None if slot is None else float(probs[slot])
        if slot is not None:
            visit = replace(visit, inputs=visit.inputs + ((vector, slot),))
        features = pipeline.feature_vector(obj)
        p_analytic = pipeline.analytic_score(obj, features).p
        try:
            template = speed_violation_template(obj.track, cfg.speed_limit, cfg.speed_window)
        except InsufficientHistoryError:
            template = False
        scores.append(FrameScore(frame.timestamp, object_id, features.d_t, features.d_pn,
                                 features.inefficiency, features.speed, features.heading,
                                 p_neural, p_analytic, template))
        fired = {
            NEURAL: p_neural is not None and p_neural > cfg.theta,
            ANALYTIC: p_analytic > cfg.theta,
            TEMPLATE: template,
        }
        for source in SOURCES:
            if fired[source] and source not in visit.alerted:
                p = {NEURAL: p_neural, ANALYTIC: p_analytic, TEMPLATE: 1.0}[source]
                event = AlertEvent(object_id, frame.timestamp, p, source)
                alerts.append(event)
                events.append(event)
                visit = replace(visit, alerted=visit.alerted | {source})
        visits[object_id] = visit

    # acts of hostility and retraining on misses
    mlp = state.mlp
    misses = list(state.misses)
    retrain_count = state.retrain_count
    if oracle is not None:
        for act_position in oracle.acts_at(frame.timestamp):
            object_id = _attribute_act(objects, act_position, cfg.gate)
            if object_id is None:
                logger.warning(f"Act at t={frame.timestamp} near ({act_position.x:.1f}, {act_position.y:.1f}) "
                               f"matches no tracked object")
                continue
            alerted = any(a.object_id == object_id and a.source == NEURAL for a in alerts)
            acts.append(ActRecord(object_id, frame.timestamp, alerted))
            pending.pop(object_id, None)
            if alerted:
                continue
            miss = MissEvent(object_id, frame.timestamp)
            misses.append(miss)
            events.append(miss)
            visit = visits.get(object_id)
            missed = _visit_examples(visit, size, 1.0) if visit is not None else []
            if not missed:
                logger.warning(f"Missed object {object_id} was never scored by the network; nothing to retrain on")
                continue
            logger.warning(f"Missed hostile object {object_id} at t={frame.timestamp}; retraining")
            mlp = retrain_online(mlp, missed, cfg.retrain, cfg.retrain_target_loss,
                                 cfg.retrain_max_steps, replay=replay)
            replay = _bounded(replay, missed, cfg.replay_capacity)
            retrain_count += 1

    next_state = replace(
        state,
        tagger=tagger,
        mlp=mlp,
        objects=objects,
        visits=visits,
        alerts=tuple(alerts),
        misses=tuple(misses),
        acts=tuple(acts),
        replay=replay,
        pending=pending,
        last_timestamp=frame.timestamp,
        last_assignment=assignment,
        last_scores=tuple(scores),
        frames_processed=state.frames_processed + 1,
        retrain_count=retrain_count,
    )
    return next_state, events


def settle(state: EngineState) -> EngineState:
    """Release held negatives once no more acts can follow: closed and open visits of objects that never acted."""
    acted = {a.object_id for a in state.acts}
    size = state.mlp.max_objects
    held = dict(state.pending)
    for object_id in sorted(state.visits):
        if object_id not in acted:
            held[object_id] = held.get(object_id, ()) + tuple(_visit_examples(state.visits[object_id], size, 0.0))
    replay = state.replay
    for object_id in sorted(held):
        replay = _bounded(replay, held[object_id], state.config.replay_capacity)
    return replace(state, replay=replay, pending={}, visits={})


def _attribute_act(objects: Mapping[int, ObjectState], position: Position, gate: float) -> Optional[int]:
    """Nearest tracked object to the act location, within the association gate."""
    best = None
    for object_id in sorted(objects):
        d = objects[object_id].track.last_position.distance_to(position)
        if d <= gate and (best is None or d < best[0]):
            best = (d, object_id)
    return None if best is None else best[1]


# --- Whole runs ---

@dataclass(frozen=True)
class ObjectSummary:
    """Per tagged object: zone-presence maxima and first alert times."""
    object_id: int
    truth_id: Optional[int]
    hostile: Optional[bool]
    max_p: Mapping[str, float]
    first_entry_time: Optional[float]
    first_alert: Mapping[str, Optional[float]]
    act_time: Optional[float]

    def to_dict(self) -> Dict:
        return {
            "object_id": self.object_id, "truth_id": self.truth_id, "hostile": self.hostile,
            "max_p": dict(self.max_p), "first_entry_time": self.first_entry_time,
            "first_alert": dict(self.first_alert), "act_time": self.act_time,
        }


@dataclass(frozen=True, eq=False)
class RunReport:
    alerts: Tuple[AlertEvent, ...]
    misses: Tuple[MissEvent, ...]
    acts: Tuple[ActRecord, ...]
    scores: Tuple[FrameScore, ...]
    objects: Tuple[ObjectSummary, ...]
    final_state: Optional[EngineState]
    frames_processed: int = 0

    @property
    def alerted_ids(self) -> List[int]:
        return sorted({a.object_id for a in self.alerts if a.source == NEURAL})

    @property
    def alert_count(self) -> int:
        return len(self.alerted_ids)

    def events(self) -> List[Dict]:
        """Alert and miss events in emission order."""
        merged = [(a.timestamp, 0, a.to_dict()) for a in self.alerts]
        merged += [(m.act_time, 1, m.to_dict()) for m in self.misses]
        return [record for _, _, record in sorted(merged, key=lambda item: (item[0], item[1]))]

    def to_dict(self, scores_csv: Optional[str] = None, config: Optional[Dict] = None,
                seed: Optional[int] = None) -> Dict:
        return {
            "kind": "run_report",
            "frames_processed": self.frames_processed,
            "alert_count": self.alert_count,
            "alerts": [a.to_dict() for a in self.alerts],
            "misses": [m.to_dict() for m in self.misses],
            "acts": [{"object_id": a.object_id, "act_time": a.act_time, "alerted": a.alerted} for a in self.acts],
            "objects": [o.to_dict() for o in self.objects],
            "scores_csv": scores_csv,
            "config": config or {},
            "seed": seed,
        }


def run(
    state: EngineState,
    frames: Sequence[Frame],
    truth: Optional[GroundTruth] = None,
    oracle: Optional[ActOracle] = None,
) -> RunReport:
    """
    Fold step over the frames.

    Args:
        state: Starting engine state.
        frames: Frames in time order.
        truth: Ground truth for these frames. Enables the simulated act
            oracle and labels the per-object summaries.
        oracle: Explicit act oracle; takes precedence over the one built from truth.

    Returns:
        The run report. Its final state holds the retrained network and a
        replay buffer that includes the visits of objects that never acted.

    Raises:
        RecordFormatError: truth does not describe the given frames.
    """
    if truth is not None:
        truth.check_frames(frames)
    if oracle is None and truth is not None:
        oracle = SimulationOracle(truth)
    assignments: List[Assignment] = []
    scores: List[FrameScore] = []
    for frame in frames:
        state, _ = step(state, frame, oracle)
        assignments.append(state.last_assignment)
        scores.extend(state.last_scores)
    if oracle is not None:
        state = settle(state)

    misses = tuple(_backfill_miss(m, state.alerts) for m in state.misses)
    summaries = _summaries(scores, state.alerts, assignments, truth)
    logger.info(
        f"Run finished: {len(frames)} frames, {len(state.alerts)} alerts, "
        f"{len(misses)} misses, {state.retrain_count} retrains"
    )
    return RunReport(
        alerts=state.alerts,
        misses=misses,
        acts=state.acts,
        scores=tuple(scores),
        objects=summaries,
        final_state=state,
        frames_processed=len(frames),
    )


def _backfill_miss(miss: MissEvent, alerts: Sequence[AlertEvent]) -> MissEvent:
    later = [a.timestamp for a in alerts if a.object_id == miss.object_id and a.source == NEURAL]
    return replace(miss, first_alert_time=min(later) if later else None)


def _summaries(
    scores: Sequence[FrameScore],
    alerts: Sequence[AlertEvent],
    assignments: Sequence[Assignment],
    truth: Optional[GroundTruth],
) -> Tuple[ObjectSummary, ...]:
    tagged = sorted({i for a in assignments for i in a.matches.values()})
    votes: Dict[int, Counter] = {i: Counter() for i in tagged}
    if truth is not None:
        for assignment, row in zip(assignments, truth.correspondence):
            for blip_index, object_id in assignment.matches.items():
                votes[object_id][row[blip_index]] += 1

    rows = []
    for object_id in tagged:
        mine = [s for s in scores if s.object_id == object_id]
        max_p = {
            NEURAL: max((s.p_neural for s in mine if s.p_neural is not None), default=0.0),
            ANALYTIC: max((s.p_analytic for s in mine), default=0.0),
            TEMPLATE: 1.0 if any(s.template for s in mine) else 0.0,
        }
        first_alert = {
            source: min((a.timestamp for a in alerts if a.object_id == object_id and a.source == source),
                        default=None)
            for source in SOURCES
        }
        truth_id = hostile = act_time = None
        if votes[object_id]:
            # majority vote, lowest id on ties
            truth_id = min(votes[object_id].items(), key=lambda kv: (-kv[1], kv[0]))[0]
            obj = truth.object(truth_id)
            hostile, act_time = obj.hostile, obj.act_time
        rows.append(ObjectSummary(
            object_id=object_id, truth_id=truth_id, hostile=hostile, max_p=max_p,
            first_entry_time=min((s.timestamp for s in mine), default=None),
            first_alert=first_alert, act_time=act_time,
        ))
    return tuple(rows)


def verify_retrain(initial: EngineState, frames: Sequence[Frame], report: RunReport) -> Dict[int, Optional[float]]:
    """
    Replay the frames from the initial state with the retrained network and
    return, for every missed object, its first neural alert time (None if it
    is still not flagged).
    """
    if report.final_state is None:
        raise ValueError("Report carries no final state to replay with")
    replayed = run(replace(initial, mlp=report.final_state.mlp), frames)
    first = {}
    for miss in report.misses:
        times = [a.timestamp for a in replayed.alerts if a.object_id == miss.object_id and a.source == NEURAL]
        first[miss.object_id] = min(times) if times else None
    return first
