"""
Object tagging.

A self-organizing map learns the spatial structure of the radar feed, and a
greedy gated nearest-neighbour match against the location table carries
persistent identity from frame to frame.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ConfigError, EmptyInputError, RecordFormatError
from .rng import XorShift64
from .track_model import Area, Frame, LocationTable, Position, update_location_table

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SomParams:
    """Kohonen schedule: alpha(t) = alpha0*exp(-t/alpha_tau), sigma(t) = sigma0*exp(-t/sigma_tau)."""
    alpha0: float = 0.5
    alpha_tau: float = 1000.0
    sigma0: float = 2.0
    sigma_tau: float = 500.0
    steps: int = 2000

    def __post_init__(self):
        if not 0 < self.alpha0 <= 1:
            raise ConfigError(f"alpha0 must lie in (0, 1], got {self.alpha0}")
        for name in ("alpha_tau", "sigma0", "sigma_tau", "steps"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"SomParams.{name} must be positive, got {getattr(self, name)}")

    def learning_rate(self, t: int) -> float:
        return self.alpha0 * math.exp(-t / self.alpha_tau)

    def radius(self, t: int) -> float:
        return self.sigma0 * math.exp(-t / self.sigma_tau)


@dataclass(frozen=True, eq=False)
class SomGrid:
    """
    A width x height lattice of 2-D prototypes in position space.

    Node i sits at lattice row i // width, column i % width (row-major).
    """
    width: int
    height: int
    prototypes: np.ndarray
    step_counter: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ConfigError(f"SOM lattice must be at least 1x1, got {self.width}x{self.height}")
        protos = np.array(self.prototypes, dtype=float).reshape(-1, 2)
        if protos.shape[0] != self.width * self.height:
            raise ConfigError(
                f"SOM needs {self.width * self.height} prototypes, got {protos.shape[0]}"
            )
        if not np.all(np.isfinite(protos)):
            raise ConfigError("SOM prototypes must be finite")
        protos.flags.writeable = False
        object.__setattr__(self, "prototypes", protos)

    @classmethod
    def lattice(cls, width: int, height: int, area: Area) -> "SomGrid":
        """Deterministic init: one prototype at the center of each lattice cell over the area."""
        xs = (np.arange(width) + 0.5) * (area.width / width)
        ys = (np.arange(height) + 0.5) * (area.height / height)
        grid_x, grid_y = np.meshgrid(xs, ys)
        return cls(width, height, np.column_stack([grid_x.ravel(), grid_y.ravel()]))

    @classmethod
    def random(cls, width: int, height: int, area: Area, seed: int) -> "SomGrid":
        rng = XorShift64(seed)
        protos = [(rng.uniform(0, area.width), rng.uniform(0, area.height)) for _ in range(width * height)]
        return cls(width, height, np.array(protos))

    @property
    def size(self) -> int:
        return self.width * self.height

    @property
    def lattice_coords(self) -> np.ndarray:
        index = np.arange(self.size)
        return np.column_stack([index // self.width, index % self.width])


def bmu(grid: SomGrid, p: Position) -> int:
    """Best-matching unit; ties go to the lowest row-major index."""
    diff = grid.prototypes - np.array([p.x, p.y])
    return int(np.argmin(np.einsum("ij,ij->i", diff, diff)))


def bmu_many(grid: SomGrid, points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    diff = points[:, None, :] - grid.prototypes[None, :, :]
    return np.argmin(np.einsum("ijk,ijk->ij", diff, diff), axis=1)


def train_step(grid: SomGrid, p: Position, params: SomParams) -> SomGrid:
    """One Kohonen update with a Gaussian neighbourhood over Manhattan lattice distance."""
    t = grid.step_counter
    alpha = params.learning_rate(t)
    # the neighbourhood collapses onto the winner once sigma underflows
    sigma = max(params.radius(t), 1e-12)
    winner = bmu(grid, p)
    coords = grid.lattice_coords
    d_grid = np.abs(coords - coords[winner]).sum(axis=1).astype(float)
    influence = alpha * np.exp(-(d_grid ** 2) / (2.0 * sigma ** 2))
    target = np.array([p.x, p.y])
    updated = grid.prototypes + influence[:, None] * (target - grid.prototypes)
    return SomGrid(grid.width, grid.height, updated, t + 1)


def quantization_error(grid: SomGrid, points: Sequence[Position]) -> float:
    """Mean distance from each point to its BMU prototype."""
    if not points:
        raise EmptyInputError("Quantization error needs at least one point")
    arr = np.array([[p.x, p.y] for p in points], dtype=float)
    diff = arr[:, None, :] - grid.prototypes[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return float(dist.min(axis=1).mean())


def train_grid(grid: SomGrid, points: Sequence[Position], params: SomParams, seed: int = 0) -> SomGrid:
    """Run params.steps train_steps, cycling through seeded shuffles of the points."""
    if not points:
        raise EmptyInputError("SOM training needs at least one point")
    rng = XorShift64(seed)
    order: List[int] = []
    for _ in range(params.steps):
        if not order:
            order = rng.permutation(len(points))
        grid = train_step(grid, points[order.pop()], params)
    logger.debug(f"SOM trained for {params.steps} steps, step counter now {grid.step_counter}")
    return grid


# --- Checkpoint text format ---

def grid_to_text(grid: SomGrid) -> str:
    lines = [f"som {grid.width} {grid.height} {grid.step_counter}"]
    lines.extend(f"{x!r} {y!r}" for x, y in grid.prototypes.tolist())
    return "\n".join(lines) + "\n"


def grid_from_text(text: str) -> SomGrid:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise RecordFormatError("Empty SOM checkpoint")
    header = lines[0].split()
    if len(header) != 4 or header[0] != "som":
        raise RecordFormatError(f"Bad SOM checkpoint header: {lines[0]!r}")
    try:
        width, height, steps = (int(v) for v in header[1:])
        protos = [tuple(float(v) for v in line.split()) for line in lines[1:]]
    except ValueError as e:
        raise RecordFormatError(f"Non-numeric value in SOM checkpoint: {e}") from e
    if any(len(row) != 2 for row in protos) or len(protos) != width * height:
        raise RecordFormatError(f"SOM checkpoint expects {width * height} 'x y' rows")
    return SomGrid(width, height, np.array(protos), steps)


# --- Data association ---

@dataclass(frozen=True)
class Assignment:
    """
    Outcome of associating one frame.

    matches maps blip index -> object id (injective); created lists the ids
    allocated for unmatched blips; coasting carries the consecutive-miss
    count of every unmatched id that is still kept; retired ids exceeded the
    coasting allowance and were dropped.
    """
    matches: Mapping[int, int]
    created: FrozenSet[int] = frozenset()
    nodes: Tuple[int, ...] = ()
    coasting: Mapping[int, int] = field(default_factory=dict)
    retired: FrozenSet[int] = frozenset()
    next_id: int = 1

    def __post_init__(self):
        ids = list(self.matches.values())
        if len(ids) != len(set(ids)):
            raise ValueError("Assignment maps two blips to the same object id")

    def object_for(self, blip_index: int) -> int:
        return self.matches[blip_index]


def associate(
    frame: Frame,
    table: LocationTable,
    grid: SomGrid,
    gate: float,
    *,
    next_id: int = 1,
    coasting: Optional[Mapping[int, int]] = None,
    max_coast: int = 5,
) -> Assignment:
    """
    Greedy globally-nearest matching of blips to table entries.

    Candidate pairs within the gate are taken in increasing distance; equal
    distances prefer pairs sharing a SOM node, then lower blip index, then
    lower object id. Unmatched blips get fresh sequential ids; unmatched
    entries coast for up to max_coast frames and are retired after that.

    Args:
        frame: Blips to tag.
        table: Last known location of every live object id.
        grid: SOM used to break distance ties.
        gate: Largest blip-to-entry distance that may be matched.
        next_id: First id handed to a new object.
        coasting: Consecutive missed frames per live id.
        max_coast: Missed frames an id survives before it is retired.

    Returns:
        The blip-to-id matches with the created, coasting and retired ids.

    Raises:
        ConfigError: gate is not positive.
    """
    if not gate > 0:
        raise ConfigError(f"Association gate must be positive, got {gate}")
    coasting = dict(coasting or {})
    blips = frame.as_array()
    ids = table.ids
    blip_nodes = bmu_many(grid, blips) if len(blips) else np.zeros(0, dtype=int)

    matches: Dict[int, int] = {}
    if len(blips) and ids:
        known = np.array([table.entries[i].as_tuple() for i in ids], dtype=float)
        known_nodes = bmu_many(grid, known)
        dist = np.hypot(blips[:, None, 0] - known[None, :, 0], blips[:, None, 1] - known[None, :, 1])
        candidates = [
            (dist[b, k], 0 if blip_nodes[b] == known_nodes[k] else 1, b, ids[k])
            for b, k in zip(*np.nonzero(dist <= gate))
        ]
        candidates.sort()
        used_ids = set()
        for _, _, b, object_id in candidates:
            b = int(b)
            if b in matches or object_id in used_ids:
                continue
            matches[b] = object_id
            used_ids.add(object_id)

    created = []
    for b in range(len(blips)):
        if b not in matches:
            matches[b] = next_id
            created.append(next_id)
            next_id += 1

    matched_ids = set(matches.values())
    kept: Dict[int, int] = {}
    retired = []
    for object_id in ids:
        if object_id in matched_ids:
            continue
        misses = coasting.get(object_id, 0) + 1
        if misses > max_coast:
            retired.append(object_id)
        else:
            kept[object_id] = misses

    return Assignment(
        matches=dict(sorted(matches.items())),
        created=frozenset(created),
        nodes=tuple(int(n) for n in blip_nodes),
        coasting=kept,
        retired=frozenset(retired),
        next_id=next_id,
    )


@dataclass(frozen=True)
class TaggerState:
    """Everything the tagger carries between frames."""
    table: LocationTable
    grid: SomGrid
    coasting: Mapping[int, int] = field(default_factory=dict)
    next_id: int = 1

    @classmethod
    def initial(cls, area: Area, width: int = 8, height: int = 8) -> "TaggerState":
        return cls(LocationTable(), SomGrid.lattice(width, height, area))


def tag_frame(
    state: TaggerState,
    frame: Frame,
    params: SomParams,
    gate: float,
    max_coast: int = 5,
    learn: bool = True,
) -> Tuple[TaggerState, Assignment]:
    """Associate a frame, refresh the location table and feed the blips to the SOM."""
    assignment = associate(
        frame, state.table, state.grid, gate,
        next_id=state.next_id, coasting=state.coasting, max_coast=max_coast,
    )
    table = state.table.without(assignment.retired)
    for index, object_id in assignment.matches.items():
        table = update_location_table(table, object_id, frame.blips[index].position)
    grid = state.grid
    if learn:
        for blip in frame.blips:
            grid = train_step(grid, blip.position, params)
    if assignment.retired:
        logger.debug(f"Retired ids {sorted(assignment.retired)} at t={frame.timestamp}")
    return replace(state, table=table, grid=grid, coasting=assignment.coasting,
                   next_id=assignment.next_id), assignment
