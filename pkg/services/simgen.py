"""
Synthetic radar scenarios with ground truth.

Benign vessels either transit straight across the area or loiter on a small
closed loop; hostile vessels either beeline to the target or meander through
waypoints inside the suspect zone before the final approach. Every draw comes
from one seeded XorShift64 stream, so a config always yields the same frames.
"""

import json
import logging
import math
from dataclasses import dataclass, field, fields, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ConfigError, EmptyInputError, RecordFormatError, UnknownObjectError
from .features import FeatureConfig, FeaturePipeline, ObjectState
from .net_mlp import LabeledExample
from .rng import XorShift64
from .track_model import (
    Area,
    Blip,
    CircleZone,
    Frame,
    Position,
    Zone,
    zone_from_dict,
    zone_from_text,
    zone_to_dict,
    zone_to_text,
)

logger = logging.getLogger(__name__)

BENIGN_BEHAVIORS = ("transit", "loiter")
HOSTILE_BEHAVIORS = ("direct", "deceptive")


def _default_target() -> Position:
    return Position(1000.0, 1000.0)


@dataclass(frozen=True)
class ScenarioConfig:
    area_width: float = 2000.0
    area_height: float = 2000.0
    target: Position = field(default_factory=_default_target)
    target_zone: Zone = field(default_factory=lambda: CircleZone(_default_target(), 600.0))
    suspect_zone: Zone = field(default_factory=lambda: CircleZone(_default_target(), 900.0))
    n_benign: int = 4
    n_hostile: int = 1
    benign_mix: Tuple[float, float] = (0.7, 0.3)      # transit, loiter
    hostile_mix: Tuple[float, float] = (0.5, 0.5)     # direct, deceptive
    noise_sigma: float = 2.0
    dt: float = 2.0
    duration: float = 300.0
    act_radius: float = 50.0
    speed_min: float = 8.0
    speed_max: float = 14.0
    drop_probability: float = 0.0
    transit_clearance: float = 150.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "benign_mix", tuple(float(w) for w in self.benign_mix))
        object.__setattr__(self, "hostile_mix", tuple(float(w) for w in self.hostile_mix))
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.duration < self.dt:
            raise ConfigError(f"duration {self.duration} must be at least dt {self.dt}")
        if not self.act_radius > 0:
            raise ConfigError(f"act_radius must be positive, got {self.act_radius}")
        if self.n_benign < 0 or self.n_hostile < 0:
            raise ConfigError("Object counts must be non-negative")
        if not 0 < self.speed_min <= self.speed_max:
            raise ConfigError(f"Speed range [{self.speed_min}, {self.speed_max}] is invalid")
        if self.noise_sigma < 0 or not 0 <= self.drop_probability < 1:
            raise ConfigError("noise_sigma must be >= 0 and drop_probability in [0, 1)")
        if len(self.benign_mix) != 2 or len(self.hostile_mix) != 2:
            raise ConfigError("Behavior mixes need exactly two weights each")
        for name in ("target_zone", "suspect_zone"):
            if not getattr(self, name).contains(self.target):
                raise ConfigError(f"{name} must contain the target")

    @property
    def area(self) -> Area:
        return Area(self.area_width, self.area_height)

    @property
    def n_frames(self) -> int:
        return int(math.floor(self.duration / self.dt + 1e-9)) + 1

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(area=self.area, target=self.target,
                             target_zone=self.target_zone, suspect_zone=self.suspect_zone)

    # --- serialization ---

    def to_dict(self) -> Dict:
        data = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "target":
                value = [value.x, value.y]
            elif f.name in ("target_zone", "suspect_zone"):
                value = zone_to_dict(value)
            elif isinstance(value, tuple):
                value = list(value)
            data[f.name] = value
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "ScenarioConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise ConfigError(f"Unknown scenario keys: {sorted(unknown)}")
        kwargs = {}
        try:
            for key, value in data.items():
                if key == "target":
                    value = Position(float(value[0]), float(value[1]))
                elif key in ("target_zone", "suspect_zone"):
                    value = zone_from_dict(value)
                elif key in ("benign_mix", "hostile_mix"):
                    value = tuple(float(v) for v in value)
                elif key in ("n_benign", "n_hostile", "seed"):
                    value = int(value)
                else:
                    value = float(value)
                kwargs[key] = value
        except (TypeError, ValueError, IndexError) as e:
            raise RecordFormatError(f"Malformed scenario value: {e}") from e
        return cls(**kwargs)

    def to_text(self) -> str:
        """Flat `key = value` form."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "target":
                text = f"{value.x!r} {value.y!r}"
            elif f.name in ("target_zone", "suspect_zone"):
                text = zone_to_text(value)
            elif isinstance(value, tuple):
                text = " ".join(repr(v) for v in value)
            else:
                text = repr(value)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ScenarioConfig":
        data = {}
        for number, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise RecordFormatError(f"Line {number} is not 'key = value': {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in ("target_zone", "suspect_zone"):
                data[key] = zone_to_dict(zone_from_text(value))
            elif key in ("target", "benign_mix", "hostile_mix"):
                data[key] = value.split()
            else:
                data[key] = value
        return cls.from_dict(data)


def load_scenario_config(path) -> ScenarioConfig:
    """Read a scenario config from JSON (.json) or flat key-value text (anything else)."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if str(path).endswith(".json"):
        try:
            return ScenarioConfig.from_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise RecordFormatError(f"{path} is not valid JSON: {e}") from e
    return ScenarioConfig.from_text(text)


def save_scenario_config(cfg: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if str(path).endswith(".json"):
            json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        else:
            fh.write(cfg.to_text())


# --- Ground truth ---

@dataclass(frozen=True)
class ObjectTruth:
    object_id: int
    behavior: str
    hostile: bool
    trajectory: Tuple[Tuple[float, Position], ...]
    act_time: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "trajectory", tuple(self.trajectory))
        if self.act_time is not None and not self.hostile:
            raise ValueError(f"Benign object {self.object_id} cannot carry an act time")


@dataclass(frozen=True)
class GroundTruth:
    """Per-object truth plus, per frame, the object id behind each blip index."""
    objects: Tuple[ObjectTruth, ...]
    correspondence: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "correspondence", tuple(tuple(c) for c in self.correspondence))
        for index, row in enumerate(self.correspondence):
            if len(row) != len(set(row)):
                raise ValueError(f"Frame {index} maps two blips to the same object")

    def object(self, object_id: int) -> ObjectTruth:
        for obj in self.objects:
            if obj.object_id == object_id:
                return obj
        raise UnknownObjectError(object_id)

    @property
    def hostile_ids(self) -> List[int]:
        return [o.object_id for o in self.objects if o.hostile]

    def check_frames(self, frames: Sequence[Frame]) -> None:
        """Raise RecordFormatError unless the correspondence describes exactly these frames."""
        if len(self.correspondence) != len(frames):
            raise RecordFormatError(
                f"Truth covers {len(self.correspondence)} frames but {len(frames)} were given"
            )
        known = {o.object_id for o in self.objects}
        for index, (frame, row) in enumerate(zip(frames, self.correspondence)):
            if len(row) != len(frame.blips):
                raise RecordFormatError(
                    f"Frame {index} (t={frame.timestamp}) has {len(frame.blips)} blips "
                    f"but truth lists {len(row)} objects"
                )
            unknown = set(row) - known
            if unknown:
                raise RecordFormatError(f"Frame {index} refers to unknown truth objects {sorted(unknown)}")


def truth_to_jsonl(truth: GroundTruth) -> str:
    lines = []
    for obj in truth.objects:
        lines.append(json.dumps({
            "kind": "object",
            "id": obj.object_id,
            "behavior": obj.behavior,
            "hostile": obj.hostile,
            "act_time": obj.act_time,
            "trajectory": [[t, p.x, p.y] for t, p in obj.trajectory],
        }))
    for index, row in enumerate(truth.correspondence):
        lines.append(json.dumps({"kind": "frame", "index": index, "objects": list(row)}))
    return "\n".join(lines) + "\n"


def truth_from_jsonl(text: str) -> GroundTruth:
    objects, frames = [], []
    for number, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            if record["kind"] == "object":
                objects.append(ObjectTruth(
                    object_id=int(record["id"]),
                    behavior=record["behavior"],
                    hostile=bool(record["hostile"]),
                    trajectory=tuple((float(t), Position(float(x), float(y)))
                                     for t, x, y in record["trajectory"]),
                    act_time=record["act_time"],
                ))
            elif record["kind"] == "frame":
                frames.append((int(record["index"]), tuple(int(i) for i in record["objects"])))
            else:
                raise RecordFormatError(f"Unknown record kind {record['kind']!r}")
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise RecordFormatError(f"Bad truth record on line {number}: {e}") from e
    frames.sort()
    return GroundTruth(tuple(objects), tuple(row for _, row in frames))


def write_truth(path, truth: GroundTruth) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(truth_to_jsonl(truth))


def read_truth(path) -> GroundTruth:
    with open(path, "r", encoding="utf-8") as fh:
        return truth_from_jsonl(fh.read())


# --- Generation ---

@dataclass
class _Route:
    """Polyline route at constant speed, or a closed loop when `loop` is set."""
    points: List[Position]
    speed: float
    loop: bool = False

    def __post_init__(self):
        pts = np.array([p.as_tuple() for p in self.points])
        seg = np.hypot(*np.diff(pts, axis=0).T) if len(pts) > 1 else np.zeros(0)
        self._pts = pts
        self._cum = np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self._cum[-1])

    def position_at(self, t: float) -> Optional[Position]:
        """Position at time t, or None once a non-loop route is complete."""
        s = self.speed * t
        if self.loop:
            s = s % self.length
        elif s > self.length + 1e-9:
            return None
        s = min(s, self.length)
        k = int(np.searchsorted(self._cum, s, side="right")) - 1
        k = min(max(k, 0), len(self._pts) - 2)
        span = self._cum[k + 1] - self._cum[k]
        frac = 0.0 if span == 0 else (s - self._cum[k]) / span
        x, y = self._pts[k] + frac * (self._pts[k + 1] - self._pts[k])
        return Position(float(x), float(y))


def _segment_clearance(a: Position, b: Position, c: Position) -> float:
    """Distance from c to segment ab."""
    ax, ay, bx, by = a.x, a.y, b.x, b.y
    dx, dy = bx - ax, by - ay
    length2 = dx * dx + dy * dy
    u = 0.0 if length2 == 0 else max(0.0, min(1.0, ((c.x - ax) * dx + (c.y - ay) * dy) / length2))
    return math.hypot(ax + u * dx - c.x, ay + u * dy - c.y)


def _edge_point(rng: XorShift64, side: int, cfg: ScenarioConfig) -> Position:
    w, h = cfg.area_width, cfg.area_height
    u = rng.uniform(0.05, 0.95)
    return [Position(0.0, u * h), Position(w, u * h), Position(u * w, 0.0), Position(u * w, h)][side]


def _transit_route(rng: XorShift64, cfg: ScenarioConfig) -> _Route:
    speed = rng.uniform(cfg.speed_min, cfg.speed_max)
    for _ in range(100):
        side = rng.randint(0, 3)
        start, end = _edge_point(rng, side, cfg), _edge_point(rng, side ^ 1, cfg)
        if _segment_clearance(start, end, cfg.target) >= cfg.transit_clearance:
            return _Route([start, end], speed)
    logger.warning("Could not place a transit clear of the target after 100 draws; using the last one")
    return _Route([start, end], speed)


def _loiter_route(rng: XorShift64, cfg: ScenarioConfig) -> _Route:
    radius = rng.uniform(40.0, 120.0)
    margin = radius + 10.0
    center = None
    for _ in range(100):
        center = Position(rng.uniform(margin, cfg.area_width - margin),
                          rng.uniform(margin, cfg.area_height - margin))
        if center.distance_to(cfg.target) >= radius + 2 * cfg.transit_clearance:
            break
    phase = rng.uniform(0.0, 2.0 * math.pi)
    points = [
        Position(center.x + radius * math.cos(phase + k * math.pi / 12),
                 center.y + radius * math.sin(phase + k * math.pi / 12))
        for k in range(25)
    ]
    return _Route(points, rng.uniform(3.0, 6.0), loop=True)


def _approach_start(rng: XorShift64, cfg: ScenarioConfig) -> Position:
    t = cfg.target
    reach = 0.95 * min(t.x, cfg.area_width - t.x, t.y, cfg.area_height - t.y)
    angle = rng.uniform(0.0, 2.0 * math.pi)
    return Position(t.x + reach * math.cos(angle), t.y + reach * math.sin(angle))


def _direct_route(rng: XorShift64, cfg: ScenarioConfig) -> _Route:
    start = _approach_start(rng, cfg)
    return _Route([start, cfg.target], rng.uniform(cfg.speed_min, cfg.speed_max))


def _deceptive_route(rng: XorShift64, cfg: ScenarioConfig) -> _Route:
    """3-6 meander waypoints inside the suspect zone, then the final approach leg."""
    start = _approach_start(rng, cfg)
    t = cfg.target
    extent = cfg.suspect_zone.extent
    angle = math.atan2(start.y - t.y, start.x - t.x)
    points = [start]
    for _ in range(rng.randint(3, 6)):
        turn = rng.uniform(math.pi / 3, 5 * math.pi / 6)
        angle += turn if rng.random() < 0.5 else -turn
        radius = rng.uniform(0.35, 0.9) * extent
        waypoint = Position(t.x + radius * math.cos(angle), t.y + radius * math.sin(angle))
        if cfg.suspect_zone.contains(waypoint) and cfg.area.contains(waypoint):
            points.append(waypoint)
    points.append(t)
    route = _Route(points, rng.uniform(cfg.speed_min, cfg.speed_max))
    # the approach must finish inside the scenario
    needed = route.length / (0.9 * cfg.duration)
    if needed > route.speed:
        route = _Route(points, needed)
    return route


_ROUTES = {
    "transit": _transit_route,
    "loiter": _loiter_route,
    "direct": _direct_route,
    "deceptive": _deceptive_route,
}


def act_of_hostility(truth: GroundTruth, track_id: int, target: Position, act_radius: float) -> Optional[float]:
    """Earliest time the true trajectory comes within act_radius of the target."""
    if not act_radius > 0:
        raise ConfigError(f"act_radius must be positive, got {act_radius}")
    obj = truth.object(track_id)
    for t, p in obj.trajectory:
        if p.distance_to(target) <= act_radius:
            return t
    return None


def generate(cfg: ScenarioConfig) -> Tuple[List[Frame], GroundTruth]:
    """
    Frames and ground truth for one scenario; a pure function of cfg.

    Args:
        cfg: Scenario geometry, object counts, noise and seed.

    Returns:
        The frames in time order, with blips shuffled within each frame, and
        the ground truth: per-object trajectories and act times, plus the
        blip-to-object correspondence for every frame.

    Raises:
        EmptyInputError: the scenario has no objects.
    """
    if cfg.n_benign + cfg.n_hostile == 0:
        raise EmptyInputError("A scenario needs at least one object")
    rng = XorShift64(cfg.seed)
    behaviors = [rng.choice_weighted(BENIGN_BEHAVIORS, cfg.benign_mix) for _ in range(cfg.n_benign)]
    behaviors += [rng.choice_weighted(HOSTILE_BEHAVIORS, cfg.hostile_mix) for _ in range(cfg.n_hostile)]
    rng.shuffle(behaviors)

    times = [k * cfg.dt for k in range(cfg.n_frames)]
    trajectories = []
    for behavior in behaviors:
        route = _ROUTES[behavior](rng, cfg)
        samples = []
        for t in times:
            p = route.position_at(t)
            if p is None:
                # the route ends between two frames; report the arrival point once
                if not samples or samples[-1][1].distance_to(route.points[-1]) > 1e-9:
                    samples.append((t, route.points[-1]))
                break
            samples.append((t, p))
        trajectories.append(samples)

    objects = []
    for object_id, (behavior, samples) in enumerate(zip(behaviors, trajectories)):
        hostile = behavior in HOSTILE_BEHAVIORS
        obj = ObjectTruth(object_id, behavior, hostile, tuple(samples))
        if hostile:
            alone = GroundTruth((obj,), ())
            obj = replace(obj, act_time=act_of_hostility(alone, object_id, cfg.target, cfg.act_radius))
        objects.append(obj)

    by_time = [dict() for _ in times]
    for obj in objects:
        for k, (_, p) in enumerate(obj.trajectory):
            by_time[k][obj.object_id] = p

    frames, correspondence = [], []
    for k, t in enumerate(times):
        observed = []
        for object_id in sorted(by_time[k]):
            if cfg.drop_probability and rng.random() < cfg.drop_probability:
                continue
            p = by_time[k][object_id]
            if cfg.noise_sigma:
                p = Position(p.x + rng.gauss(0.0, cfg.noise_sigma), p.y + rng.gauss(0.0, cfg.noise_sigma))
            observed.append((object_id, p))
        rng.shuffle(observed)
        frames.append(Frame(t, tuple(Blip(p, t) for _, p in observed)))
        correspondence.append(tuple(object_id for object_id, _ in observed))

    logger.debug(f"Generated scenario seed={cfg.seed}: {len(objects)} objects, {len(frames)} frames")
    return frames, GroundTruth(tuple(objects), tuple(correspondence))


def label_examples(
    frames: Sequence[Frame],
    truth: GroundTruth,
    pipeline: FeaturePipeline,
    max_objects: int,
) -> List[LabeledExample]:
    """
    One supervised example per frame with at least one object in the target zone.

    Objects are keyed by their true ids; slot targets are the hostile flags
    and the mask marks the objects observed in that frame.
    """
    truth.check_frames(frames)
    hostile = {o.object_id: o.hostile for o in truth.objects}
    states: Dict[int, ObjectState] = {}
    examples = []
    for frame, row in zip(frames, truth.correspondence):
        present = []
        for blip, object_id in zip(frame.blips, row):
            states[object_id] = pipeline.observe(states.get(object_id), object_id, frame.timestamp, blip.position)
            present.append(states[object_id])
        if not any(s.in_target_zone for s in present):
            continue
        vector, slots = pipeline.stack(present, max_objects)
        target = np.zeros(max_objects)
        mask = np.zeros(max_objects, dtype=bool)
        for slot, object_id in enumerate(slots):
            target[slot] = 1.0 if hostile[object_id] else 0.0
            mask[slot] = True
        examples.append(LabeledExample(vector, target, mask))
    return examples
