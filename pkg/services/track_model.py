"""
Spatial substrate: positions, radar frames, tracks, zones and the location table.

All types are immutable; updates return new values. Coordinates are planar
meters (x east, y north), timestamps are seconds.
"""

import json
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import ConfigError, EmptyWindowError, RecordFormatError

logger = logging.getLogger(__name__)

# tolerance for boundary-inclusive containment
BOUNDARY_EPS = 1e-9


@dataclass(frozen=True)
class Position:
    """A point on the plane, in meters."""
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"Position coordinates must be finite, got ({self.x}, {self.y})")

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_tuple(self) -> Tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Blip:
    """A single unlabeled detection from one radar sweep."""
    position: Position
    timestamp: float

    def __post_init__(self):
        if not math.isfinite(self.timestamp) or self.timestamp < 0:
            raise ValueError(f"Blip timestamp must be finite and non-negative, got {self.timestamp}")


@dataclass(frozen=True)
class Frame:
    """One radar sweep: every blip shares the frame timestamp."""
    timestamp: float
    blips: Tuple[Blip, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "blips", tuple(self.blips))
        for blip in self.blips:
            if blip.timestamp != self.timestamp:
                raise ValueError(
                    f"Blip timestamp {blip.timestamp} differs from frame timestamp {self.timestamp}"
                )

    @classmethod
    def from_points(cls, timestamp: float, points: Iterable[Tuple[float, float]]) -> "Frame":
        return cls(timestamp, tuple(Blip(Position(float(x), float(y)), timestamp) for x, y in points))

    @property
    def positions(self) -> List[Position]:
        return [blip.position for blip in self.blips]

    def as_array(self) -> np.ndarray:
        return np.array([[b.position.x, b.position.y] for b in self.blips], dtype=float).reshape(-1, 2)


@dataclass(frozen=True)
class Track:
    """Identity-resolved position history with strictly increasing timestamps."""
    object_id: int
    history: Tuple[Tuple[float, Position], ...]

    def __post_init__(self):
        object.__setattr__(self, "history", tuple(self.history))
        if not self.history:
            raise ValueError(f"Track {self.object_id} must hold at least one sample")
        for (t0, _), (t1, _) in zip(self.history, self.history[1:]):
            if not t1 > t0:
                raise ValueError(f"Track {self.object_id} timestamps must strictly increase ({t0} -> {t1})")

    @classmethod
    def start(cls, object_id: int, timestamp: float, position: Position) -> "Track":
        return cls(object_id, ((timestamp, position),))

    def append(self, timestamp: float, position: Position) -> "Track":
        if not timestamp > self.last_time:
            raise ValueError(
                f"Track {self.object_id} cannot append t={timestamp} after t={self.last_time}"
            )
        return Track(self.object_id, self.history + ((timestamp, position),))

    @property
    def last_time(self) -> float:
        return self.history[-1][0]

    @property
    def last_position(self) -> Position:
        return self.history[-1][1]

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([t for t, _ in self.history], dtype=float)

    @property
    def points(self) -> np.ndarray:
        return np.array([[p.x, p.y] for _, p in self.history], dtype=float)

    def __len__(self) -> int:
        return len(self.history)


@dataclass(frozen=True)
class Area:
    """The monitored field, anchored at the origin."""
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ConfigError(f"Area extents must be positive, got {self.width} x {self.height}")

    @property
    def center(self) -> Position:
        return Position(self.width / 2.0, self.height / 2.0)

    def contains(self, p: Position) -> bool:
        return 0.0 <= p.x <= self.width and 0.0 <= p.y <= self.height


# --- Zones ---

@dataclass(frozen=True)
class CircleZone:
    center: Position
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigError(f"Circle zone radius must be positive, got {self.radius}")

    @property
    def extent(self) -> float:
        """Characteristic radius used to derive feature scales."""
        return self.radius

    def contains(self, p: Position) -> bool:
        return self.center.distance_to(p) <= self.radius + BOUNDARY_EPS


@dataclass(frozen=True)
class PolygonZone:
    """Convex polygon with counter-clockwise vertices."""
    vertices: Tuple[Position, ...]

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        if len(self.vertices) < 3:
            raise ConfigError(f"Polygon zone needs at least 3 vertices, got {len(self.vertices)}")
        turns = [_cross(a, b, c) for a, b, c in self._corners()]
        if any(turn < 0 for turn in turns) or not any(turn > 0 for turn in turns):
            raise ConfigError("Polygon zone must be convex with counter-clockwise vertices")

    def _corners(self):
        n = len(self.vertices)
        for i in range(n):
            yield self.vertices[i], self.vertices[(i + 1) % n], self.vertices[(i + 2) % n]

    def _edges(self):
        n = len(self.vertices)
        for i in range(n):
            yield self.vertices[i], self.vertices[(i + 1) % n]

    @property
    def centroid(self) -> Position:
        xs = [v.x for v in self.vertices]
        ys = [v.y for v in self.vertices]
        return Position(sum(xs) / len(xs), sum(ys) / len(ys))

    @property
    def extent(self) -> float:
        c = self.centroid
        return max(c.distance_to(v) for v in self.vertices)

    def contains(self, p: Position) -> bool:
        return all(_cross(a, b, p) >= -BOUNDARY_EPS * max(1.0, a.distance_to(b)) for a, b in self._edges())


Zone = Union[CircleZone, PolygonZone]


def _cross(a: Position, b: Position, c: Position) -> float:
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)


def contains(zone: Zone, p: Position) -> bool:
    """True iff p lies inside the zone or on its boundary."""
    return zone.contains(p)


def zone_to_text(zone: Zone) -> str:
    """Flat-text zone form: `circle cx cy r` or `polygon x1 y1 x2 y2 ...`."""
    if isinstance(zone, CircleZone):
        return f"circle {zone.center.x!r} {zone.center.y!r} {zone.radius!r}"
    coords = " ".join(f"{v.x!r} {v.y!r}" for v in zone.vertices)
    return f"polygon {coords}"


def zone_from_text(text: str) -> Zone:
    parts = text.split()
    if not parts:
        raise RecordFormatError("Empty zone description")
    try:
        values = [float(v) for v in parts[1:]]
    except ValueError as e:
        raise RecordFormatError(f"Zone coordinates must be numeric: {text!r}") from e
    kind = parts[0].lower()
    if kind == "circle" and len(values) == 3:
        return CircleZone(Position(values[0], values[1]), values[2])
    if kind == "polygon" and len(values) >= 6 and len(values) % 2 == 0:
        return PolygonZone(tuple(Position(x, y) for x, y in zip(values[::2], values[1::2])))
    raise RecordFormatError(f"Unrecognized zone description: {text!r}")


def zone_to_dict(zone: Zone) -> Dict:
    if isinstance(zone, CircleZone):
        return {"shape": "circle", "center": list(zone.center.as_tuple()), "radius": zone.radius}
    return {"shape": "polygon", "vertices": [list(v.as_tuple()) for v in zone.vertices]}


def zone_from_dict(data: Mapping) -> Zone:
    try:
        shape = data["shape"]
        if shape == "circle":
            cx, cy = data["center"]
            return CircleZone(Position(float(cx), float(cy)), float(data["radius"]))
        if shape == "polygon":
            return PolygonZone(tuple(Position(float(x), float(y)) for x, y in data["vertices"]))
    except (KeyError, TypeError, ValueError) as e:
        raise RecordFormatError(f"Malformed zone record {data!r}: {e}") from e
    raise RecordFormatError(f"Unknown zone shape {data.get('shape')!r}")


# --- Zone entries ---

@dataclass(frozen=True)
class ZoneEntry:
    """First observed position of an object inside a zone for the current visit."""
    object_id: int
    entry_point: Position
    entry_time: float


def record_entry(track: Track, zone: Zone, prior: Optional[ZoneEntry] = None) -> Optional[ZoneEntry]:
    """
    Resolve the zone entry for the object's current visit.

    Returns the prior entry while the object has stayed inside since it, a
    fresh entry at the first inside sample after the most recent outside
    sample otherwise, and None when the object is currently outside (or was
    never inside).
    """
    history = track.history
    if prior is not None:
        since = [p for t, p in history if t >= prior.entry_time]
        if since and all(zone.contains(p) for p in since):
            return prior

    entry_index = None
    for index in range(len(history) - 1, -1, -1):
        if not zone.contains(history[index][1]):
            break
        entry_index = index
    if entry_index is None:
        return None
    t, p = history[entry_index]
    return ZoneEntry(track.object_id, p, t)


def path_length(track: Track, from_time: float) -> float:
    """Sum of segment lengths over samples with timestamp >= from_time."""
    if from_time > track.last_time:
        raise EmptyWindowError(
            f"Window starting at t={from_time} is after the last sample of track {track.object_id}"
        )
    times = track.timestamps
    points = track.points[times >= from_time]
    if len(points) < 2:
        return 0.0
    steps = np.diff(points, axis=0)
    return float(np.hypot(steps[:, 0], steps[:, 1]).sum())


# --- Location table ---

@dataclass(frozen=True)
class LocationTable:
    """Object id -> latest position."""
    entries: Mapping[int, Position] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, object_id: int) -> bool:
        return object_id in self.entries

    def get(self, object_id: int) -> Optional[Position]:
        return self.entries.get(object_id)

    @property
    def ids(self) -> List[int]:
        return sorted(self.entries)

    def without(self, object_ids: Iterable[int]) -> "LocationTable":
        drop = set(object_ids)
        return LocationTable({k: v for k, v in self.entries.items() if k not in drop})

    def rows(self) -> List[Tuple[str, float, float]]:
        """Rows in display form, ids zero-padded to three digits."""
        return [(format_object_id(k), self.entries[k].x, self.entries[k].y) for k in self.ids]


def update_location_table(table: LocationTable, object_id: int, p: Position) -> LocationTable:
    entries = dict(table.entries)
    entries[object_id] = p
    return LocationTable(entries)


def format_object_id(object_id: int) -> str:
    return f"{object_id:03d}"


# --- Frame serialization ---

_LINE_HEADER = re.compile(r"^\s*t=([^;]+);(.*)$")
_LINE_POINT = re.compile(r"\(\s*([^,()\s]+)\s*,\s*([^,()\s]+)\s*\)")


def frame_to_line(frame: Frame) -> str:
    points = " ".join(f"({b.position.x!r},{b.position.y!r})" for b in frame.blips)
    return f"t={frame.timestamp!r}; {points}".rstrip()


def frame_from_line(line: str) -> Frame:
    match = _LINE_HEADER.match(line)
    if not match:
        raise RecordFormatError(f"Frame line lacks a 't=<seconds>;' header: {line!r}")
    body = match.group(2)
    points = _LINE_POINT.findall(body)
    if _LINE_POINT.sub("", body).strip():
        raise RecordFormatError(f"Frame line has stray text: {line!r}")
    try:
        return Frame.from_points(float(match.group(1)), ((float(x), float(y)) for x, y in points))
    except ValueError as e:
        raise RecordFormatError(f"Bad frame line {line!r}: {e}") from e


def frame_to_json(frame: Frame) -> str:
    return json.dumps({"t": frame.timestamp, "blips": [[b.position.x, b.position.y] for b in frame.blips]})


def frame_from_json(line: str) -> Frame:
    try:
        data = json.loads(line)
        return Frame.from_points(float(data["t"]), ((x, y) for x, y in data["blips"]))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise RecordFormatError(f"Bad frame record {line[:80]!r}: {e}") from e


def write_frames(path, frames: Sequence[Frame]) -> None:
    """Write frames as JSONL when the path ends in .jsonl, else as `t=` lines."""
    encode = frame_to_json if str(path).endswith(".jsonl") else frame_to_line
    with open(path, "w", encoding="utf-8") as fh:
        for frame in frames:
            fh.write(encode(frame) + "\n")


def read_frames(path) -> List[Frame]:
    decode = frame_from_json if str(path).endswith(".jsonl") else frame_from_line
    with open(path, "r", encoding="utf-8") as fh:
        frames = [decode(line) for line in fh if line.strip()]
    logger.debug(f"Read {len(frames)} frames from {path}")
    return frames
