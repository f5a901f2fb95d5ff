"""
Movement features and the deterministic scorers.

Computes suspect-target distance, suspect-destination distance and the
movement inefficiency index for a track, the analytic hostility score
derived from them, the speed-violation template, and the normalized
per-object attribute vector consumed by the classifier.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .exceptions import ConfigError, EmptyInputError, InsufficientHistoryError
from .net_mlp import ATTRIBUTES_PER_OBJECT, logistic
from .track_model import (
    Area,
    Position,
    Track,
    Zone,
    ZoneEntry,
    path_length,
    record_entry,
)

logger = logging.getLogger(__name__)

DEFAULT_CAP = 100.0
DEFAULT_EPS = 1e-6

FEATURE_COLUMNS = ["t", "object_id", "d_t", "d_pn", "I", "speed", "heading", "p"]


@dataclass(frozen=True)
class FeatureVector:
    d_t: float
    d_pn: float
    inefficiency: float
    speed: float
    heading: float
    position: Position


@dataclass(frozen=True)
class HostilityScore:
    object_id: int
    p: float
    timestamp: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"Hostility probability must lie in [0, 1], got {self.p}")


@dataclass(frozen=True)
class ScorerWeights:
    """Bias and weights of the analytic scorer's linear form."""
    w0: float = -1.0
    w1: float = 2.0
    w2: float = 1.0
    w3: float = 2.0

    def __post_init__(self):
        if not all(math.isfinite(w) for w in (self.w0, self.w1, self.w2, self.w3)):
            raise ConfigError("Scorer weights must be finite")


@dataclass(frozen=True)
class FeatureScales:
    """Normalization constants shared by the analytic scorer and the attribute vector."""
    s1: float
    s2: float
    v_ref: float = 20.0
    cap: float = DEFAULT_CAP
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if not (self.s1 > 0 and self.s2 > 0 and self.v_ref > 0 and self.eps > 0):
            raise ConfigError("Feature scales must be positive")
        if not self.cap > 1:
            raise ConfigError(f"Inefficiency cap must exceed 1, got {self.cap}")

    @classmethod
    def for_zone(cls, zone: Zone, **kwargs) -> "FeatureScales":
        """s1 = s2 = a quarter of the zone's characteristic radius."""
        quarter = zone.extent / 4.0
        return cls(s1=quarter, s2=quarter, **kwargs)


# --- Distances and the inefficiency index ---

def suspect_target_distance(suspect: Position, target: Position) -> float:
    return suspect.distance_to(target)


def suspect_destination_distance(suspect: Position, destinations: Sequence[Position]) -> float:
    if not destinations:
        raise EmptyInputError("At least one potential destination must be configured")
    return min(suspect.distance_to(d) for d in destinations)


def inefficiency_index(
    track: Track,
    entry: ZoneEntry,
    cap: float = DEFAULT_CAP,
    eps: float = DEFAULT_EPS,
) -> float:
    """
    Path length travelled since the entry point over the straight-line
    distance from the entry point to the current position, clamped to [1, cap].
    """
    if cap < 1:
        raise ConfigError(f"Inefficiency cap must be at least 1, got {cap}")
    actual = path_length(track, entry.entry_time)
    shortest = entry.entry_point.distance_to(track.last_position)
    if actual < eps and shortest < eps:
        return 1.0
    ratio = actual / max(shortest, eps)
    return min(max(ratio, 1.0), cap)


def velocity(track: Track, span: int = 2) -> Tuple[float, float]:
    """Speed and heading from the displacement over the last `span` intervals."""
    if len(track) < 2:
        return 0.0, 0.0
    first = max(0, len(track) - 1 - span)
    t0, p0 = track.history[first]
    t1, p1 = track.history[-1]
    dx, dy = p1.x - p0.x, p1.y - p0.y
    speed = math.hypot(dx, dy) / (t1 - t0)
    if speed == 0.0:
        return 0.0, 0.0
    heading = math.atan2(dy, dx)
    if heading >= math.pi:
        heading -= 2.0 * math.pi
    return speed, heading


def analytic_hostility(
    f: FeatureVector,
    w: ScorerWeights,
    scales: FeatureScales,
    object_id: int = 0,
    timestamp: float = 0.0,
) -> HostilityScore:
    """p = logistic(w0 + w1*exp(-d_t/s1) + w2*exp(-d_pn/s2) + w3*(I - 1))."""
    net = (
        w.w0
        + w.w1 * math.exp(-f.d_t / scales.s1)
        + w.w2 * math.exp(-f.d_pn / scales.s2)
        + w.w3 * (f.inefficiency - 1.0)
    )
    return HostilityScore(object_id=object_id, p=logistic(net), timestamp=timestamp)


def speed_violation_template(track: Track, limit: float, window: float) -> bool:
    """True iff the mean speed over the trailing window exceeds the limit."""
    if not window > 0:
        raise ConfigError(f"Template window must be positive, got {window}")
    start = track.last_time - window
    samples = [(t, p) for t, p in track.history if t >= start]
    if len(samples) < 2:
        raise InsufficientHistoryError(
            f"Track {track.object_id} has {len(samples)} sample(s) in the trailing {window}s window"
        )
    elapsed = samples[-1][0] - samples[0][0]
    travelled = path_length(track, samples[0][0])
    return travelled / elapsed > limit


def attributes(
    track: Track,
    target: Position,
    destinations: Sequence[Position],
    entry: Optional[ZoneEntry],
    bounds: Area,
    scales: FeatureScales,
    velocity_span: int = 2,
) -> List[float]:
    """
    Fixed-order normalized attributes:
    [x/width, y/height, speed/v_ref, sin(heading), cos(heading), exp(-d_t/s1), (I-1)/(cap-1)].

    The inefficiency slot is 0 when the object has no zone entry.
    """
    p = track.last_position
    speed, heading = velocity(track, velocity_span)
    d_t = suspect_target_distance(p, target)
    ineff_slot = 0.0
    if entry is not None:
        ineff = inefficiency_index(track, entry, scales.cap, scales.eps)
        ineff_slot = (min(ineff, scales.cap) - 1.0) / (scales.cap - 1.0)
    values = [
        p.x / bounds.width,
        p.y / bounds.height,
        speed / scales.v_ref,
        math.sin(heading),
        math.cos(heading),
        math.exp(-d_t / scales.s1),
        ineff_slot,
    ]
    return [min(max(v, -1.0), 1.0) for v in values]


# --- Per-object pipeline ---

@dataclass(frozen=True)
class ObjectState:
    """A tracked object with its current zone entries."""
    track: Track
    target_entry: Optional[ZoneEntry] = None
    suspect_entry: Optional[ZoneEntry] = None

    @property
    def object_id(self) -> int:
        return self.track.object_id

    @property
    def in_target_zone(self) -> bool:
        return self.target_entry is not None

    @property
    def anchor(self) -> Optional[ZoneEntry]:
        """Entry used for the inefficiency index: suspect zone first, target zone as fallback."""
        return self.suspect_entry or self.target_entry


@dataclass(frozen=True)
class FeatureConfig:
    """Geometry and constants of one monitored scene."""
    area: Area
    target: Position
    target_zone: Zone
    suspect_zone: Zone
    destinations: Tuple[Position, ...] = ()
    scales: Optional[FeatureScales] = None
    weights: ScorerWeights = field(default_factory=ScorerWeights)
    velocity_span: int = 2

    def __post_init__(self):
        object.__setattr__(self, "destinations", tuple(self.destinations) or (self.target,))
        if self.scales is None:
            object.__setattr__(self, "scales", FeatureScales.for_zone(self.target_zone))


class FeaturePipeline:
    """Maintains object states and derives features, attributes and analytic scores."""

    def __init__(self, config: FeatureConfig):
        self.config = config

    def observe(self, state: Optional[ObjectState], object_id: int, t: float, p: Position) -> ObjectState:
        """Append a sample and refresh both zone entries."""
        if state is None:
            track = Track.start(object_id, t, p)
            prior_target = prior_suspect = None
        else:
            track = state.track.append(t, p)
            prior_target, prior_suspect = state.target_entry, state.suspect_entry
        return ObjectState(
            track=track,
            target_entry=record_entry(track, self.config.target_zone, prior_target),
            suspect_entry=record_entry(track, self.config.suspect_zone, prior_suspect),
        )

    def feature_vector(self, state: ObjectState) -> FeatureVector:
        cfg = self.config
        track = state.track
        p = track.last_position
        speed, heading = velocity(track, cfg.velocity_span)
        anchor = state.anchor
        ineff = 1.0 if anchor is None else inefficiency_index(track, anchor, cfg.scales.cap, cfg.scales.eps)
        return FeatureVector(
            d_t=suspect_target_distance(p, cfg.target),
            d_pn=suspect_destination_distance(p, cfg.destinations),
            inefficiency=ineff,
            speed=speed,
            heading=heading,
            position=p,
        )

    def attributes(self, state: ObjectState) -> List[float]:
        cfg = self.config
        return attributes(state.track, cfg.target, cfg.destinations, state.anchor,
                          cfg.area, cfg.scales, cfg.velocity_span)

    def analytic_score(self, state: ObjectState, features: Optional[FeatureVector] = None) -> HostilityScore:
        features = features or self.feature_vector(state)
        return analytic_hostility(features, self.config.weights, self.config.scales,
                                  state.object_id, state.track.last_time)

    def stack(self, states: Sequence[ObjectState], max_objects: int) -> Tuple[np.ndarray, List[int]]:
        """
        Stacked classifier input for the given objects, slots sorted by ascending id.

        Returns the input vector and the object id held by each occupied slot.
        Objects beyond max_objects are left out.
        """
        ordered = sorted(states, key=lambda s: s.object_id)
        if len(ordered) > max_objects:
            logger.warning(
                f"{len(ordered)} objects present but the network has {max_objects} slots; "
                f"ids {[s.object_id for s in ordered[max_objects:]]} are not scored"
            )
            ordered = ordered[:max_objects]
        vector = np.zeros(ATTRIBUTES_PER_OBJECT * max_objects)
        for slot, state in enumerate(ordered):
            start = slot * ATTRIBUTES_PER_OBJECT
            vector[start:start + ATTRIBUTES_PER_OBJECT] = self.attributes(state)
        return vector, [s.object_id for s in ordered]


def write_feature_csv(path, rows: Iterable[dict]) -> None:
    """Feature dump with columns t,object_id,d_t,d_pn,I,speed,heading,p."""
    frame = pd.DataFrame(list(rows), columns=FEATURE_COLUMNS)
    frame.to_csv(path, index=False)


def read_feature_csv(path) -> pd.DataFrame:
    return pd.read_csv(path)
