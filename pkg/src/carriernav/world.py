"""Deterministic 2-D grid world: planning, sensing, displacement.

The world owns a private deep copy of its scene, so ground-truth changes
(displaced objects, additions, removals) never leak into the belief graph
a robot carries around.  Planning runs on an 8-connected occupancy grid
with unit/diagonal step costs; sensing is a radius + field-of-view model
with optional wall occlusion.
"""

from __future__ import annotations

import copy
import heapq
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .graph import CrsgConfig, carrying_predicate, geometric_carrier_filter
from .scene import Box3, ObjectInstance, SceneMap

SQRT2 = math.sqrt(2.0)

Cell = Tuple[int, int]


class WorldError(ValueError):
    pass


class UnreachableGoalError(WorldError):
    """No free-cell path exists between the requested endpoints."""


class DisplacementError(WorldError):
    pass


@dataclass
class Pose:
    position: np.ndarray  # (x, y) meters
    heading: float = 0.0  # radians

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        if self.position.shape != (2,):
            raise WorldError("pose position must be a 2-vector")

    def copy(self) -> "Pose":
        return Pose(self.position.copy(), self.heading)


@dataclass
class SensorConfig:
    radius: float = 2.5
    fov: float = 2.0 * math.pi
    occlusion: bool = False

    def __post_init__(self):
        if self.radius <= 0:
            raise WorldError(f"sensor radius must be positive, got {self.radius}")
        if not (0.0 < self.fov <= 2.0 * math.pi + 1e-9):
            raise WorldError(f"sensor fov must be in (0, 2*pi], got {self.fov}")


@dataclass
class Observation:
    object_id: str
    observed_box: Box3
    observed_captions: List[str]
    text_feature: np.ndarray
    visual_feature: np.ndarray
    centroid: np.ndarray
    mean_depth: float


@dataclass
class DisplacementEvent:
    """Ground-truth scene change.

    ``move`` re-seats an existing object on ``target_carrier_id``; ``add``
    introduces ``new_object`` there; ``remove`` deletes the object.
    """

    kind: str
    object_id: str = ""
    target_carrier_id: Optional[str] = None
    new_object: Optional[dict] = None

    def __post_init__(self):
        if self.kind not in ("move", "add", "remove"):
            raise DisplacementError(f"unknown displacement kind {self.kind!r}")
        if self.kind in ("move", "remove") and not self.object_id:
            raise DisplacementError(f"{self.kind} event needs object_id")
        if self.kind == "move" and not self.target_carrier_id:
            raise DisplacementError("move event needs target_carrier_id")
        if self.kind == "add" and not self.new_object:
            raise DisplacementError("add event needs new_object payload")


@dataclass
class TravelLog:
    samples: List[Tuple[Pose, List[Observation]]]
    observations: Dict[str, Observation]  # first sighting per object id
    length: float


class GridWorld:
    """Simulator state: occupancy grid, object ground truth, robot pose."""

    def __init__(self, scene: SceneMap, start_pose: Optional[Pose] = None):
        self.scene = copy.deepcopy(scene)
        grid = self.scene.grid
        self.resolution = float(grid.resolution)
        self.width = int(grid.width)
        self.height = int(grid.height)
        self.origin = np.asarray(grid.origin, dtype=np.float64)
        self.occupancy = np.zeros((self.height, self.width), dtype=bool)
        for ix, iy in grid.blocked_cells:
            self.occupancy[iy, ix] = True

        if start_pose is None:
            start_pose = Pose(self._first_free_center())
        self.robot = start_pose.copy()
        start_cell = self.cell_of(self.robot.position)
        if self.occupancy[start_cell[1], start_cell[0]]:
            raise WorldError(f"robot start cell {start_cell} is blocked")

        self._graph_cache: Optional[tuple] = None
        self._centroid_cache: Optional[tuple] = None

    # ----- grid geometry -------------------------------------------------

    def _first_free_center(self) -> np.ndarray:
        free = np.argwhere(~self.occupancy)
        if free.size == 0:
            raise WorldError("grid has no free cells")
        iy, ix = free[0]
        return self.cell_center((int(ix), int(iy)))

    def cell_of(self, point: Sequence[float]) -> Cell:
        ix = int(math.floor((float(point[0]) - self.origin[0]) / self.resolution))
        iy = int(math.floor((float(point[1]) - self.origin[1]) / self.resolution))
        if not (0 <= ix < self.width and 0 <= iy < self.height):
            raise WorldError(f"point {tuple(point)} is outside the grid")
        return (ix, iy)

    def cell_center(self, cell: Cell) -> np.ndarray:
        ix, iy = cell
        return np.array(
            [
                self.origin[0] + (ix + 0.5) * self.resolution,
                self.origin[1] + (iy + 0.5) * self.resolution,
            ]
        )

    def is_free(self, cell: Cell) -> bool:
        ix, iy = cell
        return 0 <= ix < self.width and 0 <= iy < self.height and not self.occupancy[iy, ix]

    def snap_free_cell(self, point: Sequence[float]) -> Cell:
        """Nearest free cell to ``point`` by center distance, ties by (ix, iy)."""
        target = np.asarray(point[:2], dtype=np.float64)
        cx = min(max(int(math.floor((target[0] - self.origin[0]) / self.resolution)), 0), self.width - 1)
        cy = min(max(int(math.floor((target[1] - self.origin[1]) / self.resolution)), 0), self.height - 1)
        max_ring = max(self.width, self.height)
        best: Optional[Tuple[float, int, int]] = None
        for ring in range(max_ring):
            for ix, iy in self._ring_cells((cx, cy), ring):
                if not self.is_free((ix, iy)):
                    continue
                d = float(np.linalg.norm(self.cell_center((ix, iy)) - target))
                key = (d, ix, iy)
                if best is None or key < best:
                    best = key
            # extra rings after the first hit cover center-distance skew
            if best is not None and ring > best[0] / self.resolution + 2:
                break
        if best is None:
            raise WorldError("no free cell in grid")
        return (best[1], best[2])

    def _ring_cells(self, center: Cell, ring: int) -> Iterable[Cell]:
        cx, cy = center
        if ring == 0:
            yield (cx, cy)
            return
        for ix in range(cx - ring, cx + ring + 1):
            for iy in (cy - ring, cy + ring):
                if 0 <= ix < self.width and 0 <= iy < self.height:
                    yield (ix, iy)
        for iy in range(cy - ring + 1, cy + ring):
            for ix in (cx - ring, cx + ring):
                if 0 <= ix < self.width and 0 <= iy < self.height:
                    yield (ix, iy)

    # ----- planning -------------------------------------------------------

    def _neighbors(self, cell: Cell) -> Iterable[Tuple[Cell, bool]]:
        ix, iy = cell
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1),
                       (1, 1), (1, -1), (-1, 1), (-1, -1)):
            nx, ny = ix + dx, iy + dy
            if not self.is_free((nx, ny)):
                continue
            diagonal = dx != 0 and dy != 0
            if diagonal:
                # no corner cutting: both orthogonal cells must be free
                if not (self.is_free((ix + dx, iy)) and self.is_free((ix, iy + dy))):
                    continue
            yield (nx, ny), diagonal

    def shortest_path(self, start: Sequence[float], goal: Sequence[float]) -> Tuple[List[Cell], float]:
        """A* between grid cells; returns (cells incl. endpoints, length m).

        Step cost is the resolution for axis moves and sqrt(2) times it for
        diagonals; the Euclidean heuristic is admissible, so returned paths
        are length-optimal.  Length is reconstructed from step counts so it
        is exactly symmetric.
        """
        start_cell = self.snap_free_cell(start)
        goal_cell = self.snap_free_cell(goal)
        if start_cell == goal_cell:
            return [start_cell], 0.0

        def h(cell: Cell) -> float:
            return math.hypot(cell[0] - goal_cell[0], cell[1] - goal_cell[1])

        g: Dict[Cell, float] = {start_cell: 0.0}
        parent: Dict[Cell, Cell] = {}
        counter = 0
        openq: List[Tuple[float, int, Cell]] = [(h(start_cell), counter, start_cell)]
        closed = set()
        while openq:
            f, _, cell = heapq.heappop(openq)
            if cell in closed:
                continue
            if cell == goal_cell:
                break
            closed.add(cell)
            for (ncell, diagonal) in self._neighbors(cell):
                if ncell in closed:
                    continue
                ng = g[cell] + (SQRT2 if diagonal else 1.0)
                if ng < g.get(ncell, math.inf):
                    g[ncell] = ng
                    parent[ncell] = cell
                    counter += 1
                    heapq.heappush(openq, (ng + h(ncell), counter, ncell))
        if goal_cell not in g:
            raise UnreachableGoalError(f"no path from {start_cell} to {goal_cell}")

        path = [goal_cell]
        while path[-1] != start_cell:
            path.append(parent[path[-1]])
        path.reverse()
        n_diag = sum(
            1
            for a, b in zip(path, path[1:])
            if a[0] != b[0] and a[1] != b[1]
        )
        n_axis = len(path) - 1 - n_diag
        length = (n_axis + n_diag * SQRT2) * self.resolution
        return path, length

    def _free_graph(self):
        if self._graph_cache is not None:
            return self._graph_cache
        free = ~self.occupancy
        index = np.full(self.occupancy.shape, -1, dtype=np.int64)
        index[free] = np.arange(int(free.sum()))
        rows, cols, weights = [], [], []
        for dx, dy in ((1, 0), (0, 1), (1, 1), (1, -1)):
            src_free = free.copy()
            dst_free = np.roll(np.roll(free, -dy, axis=0), -dx, axis=1)
            # mask wrap-around rows/cols introduced by roll
            if dx > 0:
                src_free[:, -dx:] = False
            if dy > 0:
                src_free[-dy:, :] = False
            if dy < 0:
                src_free[:-dy, :] = False
            ok = src_free & dst_free
            if dx != 0 and dy != 0:
                ortho_x = np.roll(free, -dx, axis=1)
                if dx > 0:
                    ortho_x[:, -dx:] = False
                ortho_y = np.roll(free, -dy, axis=0)
                if dy > 0:
                    ortho_y[-dy:, :] = False
                if dy < 0:
                    ortho_y[:-dy, :] = False
                ok &= ortho_x & ortho_y
            src_idx = index[ok]
            dst_iy, dst_ix = np.nonzero(ok)
            dst_idx = index[dst_iy + dy, dst_ix + dx]
            w = (SQRT2 if dx != 0 and dy != 0 else 1.0) * self.resolution
            rows.append(src_idx)
            cols.append(dst_idx)
            weights.append(np.full(src_idx.shape, w))
        rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
        cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
        weights = np.concatenate(weights) if weights else np.zeros(0)
        n = int((~self.occupancy).sum())
        graph = csr_matrix((weights, (rows, cols)), shape=(n, n))
        self._graph_cache = (graph, index)
        return self._graph_cache

    def distance_field(self, start: Sequence[float]) -> "DistanceField":
        """Geodesic distance from ``start`` to every free cell (meters)."""
        graph, index = self._free_graph()
        start_cell = self.snap_free_cell(start)
        src = int(index[start_cell[1], start_cell[0]])
        dist = dijkstra(graph, directed=False, indices=src)
        return DistanceField(self, index, dist)

    # ----- sensing --------------------------------------------------------

    def _centroids(self):
        if self._centroid_cache is None:
            ids = sorted(self.scene.objects)
            arr = np.array([self.scene.objects[i].centroid[:2] for i in ids]) if ids else np.zeros((0, 2))
            self._centroid_cache = (ids, arr)
        return self._centroid_cache

    def _ray_clear(self, a: Cell, b: Cell) -> bool:
        """Bresenham walk from a to b; intermediate blocked cell occludes."""
        x0, y0 = a
        x1, y1 = b
        dx = abs(x1 - x0)
        dy = -abs(y1 - y0)
        sx = 1 if x0 < x1 else -1
        sy = 1 if y0 < y1 else -1
        err = dx + dy
        x, y = x0, y0
        while True:
            if (x, y) != a and (x, y) != b and self.occupancy[y, x]:
                return False
            if (x, y) == b:
                return True
            e2 = 2 * err
            if e2 >= dy:
                err += dy
                x += sx
            if e2 <= dx:
                err += dx
                y += sy

    def observe(self, pose: Pose, sensor: SensorConfig) -> List[Observation]:
        """Objects within radius and field of view, sorted by id."""
        ids, centroids = self._centroids()
        if not ids:
            return []
        deltas = centroids - pose.position
        dists = np.hypot(deltas[:, 0], deltas[:, 1])
        mask = dists <= sensor.radius
        if sensor.fov < 2.0 * math.pi - 1e-9:
            angles = np.arctan2(deltas[:, 1], deltas[:, 0])
            diff = np.abs((angles - pose.heading + math.pi) % (2.0 * math.pi) - math.pi)
            # an object at zero distance is always in view
            mask &= (diff <= sensor.fov / 2.0 + 1e-12) | (dists < 1e-12)
        out = []
        robot_cell = self.cell_of(pose.position)
        for i in np.nonzero(mask)[0]:
            oid = ids[int(i)]
            obj = self.scene.objects[oid]
            if sensor.occlusion:
                try:
                    obj_cell = self.cell_of(obj.centroid[:2])
                except WorldError:
                    continue
                if not self._ray_clear(robot_cell, obj_cell):
                    continue
            out.append(self._observation_of(obj, float(dists[i])))
        return out

    def _observation_of(self, obj: ObjectInstance, depth: float) -> Observation:
        return Observation(
            object_id=obj.id,
            observed_box=Box3(obj.box.min.copy(), obj.box.max.copy()),
            observed_captions=list(obj.captions),
            text_feature=obj.text_feature.copy(),
            visual_feature=obj.visual_feature.copy(),
            centroid=obj.centroid.copy(),
            mean_depth=depth,
        )

    def travel(self, path: Sequence[Cell], sensor: SensorConfig) -> TravelLog:
        """Advance cell-by-cell along ``path``, observing at every cell.

        Observations are deduplicated per object id, keeping the first
        sighting (and its depth).  A zero-length path produces an empty
        trajectory and moves nothing.
        """
        if len(path) == 0:
            return TravelLog(samples=[], observations={}, length=0.0)
        seen: Dict[str, Observation] = {}
        samples: List[Tuple[Pose, List[Observation]]] = []
        heading = self.robot.heading
        n_axis = n_diag = 0
        for i, cell in enumerate(path):
            if i + 1 < len(path):
                nxt = path[i + 1]
                step = (nxt[0] - cell[0], nxt[1] - cell[1])
                heading = math.atan2(step[1], step[0])
                if step[0] != 0 and step[1] != 0:
                    n_diag += 1
                else:
                    n_axis += 1
            pose = Pose(self.cell_center(cell), heading)
            fresh = []
            for obs in self.observe(pose, sensor):
                if obs.object_id not in seen:
                    seen[obs.object_id] = obs
                    fresh.append(obs)
            samples.append((pose, fresh))
        self.robot = Pose(self.cell_center(path[-1]), heading)
        length = (n_axis + n_diag * SQRT2) * self.resolution
        return TravelLog(samples=samples, observations=seen, length=length)

    # ----- ground truth ---------------------------------------------------

    def object(self, object_id: str) -> ObjectInstance:
        try:
            return self.scene.objects[object_id]
        except KeyError:
            raise WorldError(f"unknown object {object_id!r}") from None

    def has_object(self, object_id: str) -> bool:
        return object_id in self.scene.objects

    def position_of(self, object_id: str) -> np.ndarray:
        return self.object(object_id).centroid.copy()

    def ground_truth_carried(self, carrier_id: str, config: CrsgConfig) -> List[str]:
        """Ids currently resting on ``carrier_id`` per the carrying predicate.

        Exclusive like graph construction: an object counts for its nearest
        satisfying base only, and only furniture-scale ground-contact boxes
        qualify as bases, so stacked items never capture each other.
        """
        carrier = self.object(carrier_id)
        bases = geometric_carrier_filter(list(self.scene.objects.values()), config)
        out = []
        for obj in self.scene.objects.values():
            if obj.id == carrier_id:
                continue
            if not carrying_predicate(carrier, obj, config):
                continue
            best: Optional[Tuple[float, str]] = None
            for other in bases:
                if other.id == obj.id:
                    continue
                if not carrying_predicate(other, obj, config):
                    continue
                key = (float(np.linalg.norm(obj.centroid - other.centroid)), other.id)
                if best is None or key < best:
                    best = key
            if best is not None and best[1] == carrier_id:
                out.append(obj.id)
        return sorted(out)

    def carried_observations(self, carrier_id: str, pose: Pose, config: CrsgConfig) -> List[Observation]:
        """Full view of a carrier's current occupants, granted at its side."""
        out = []
        for oid in self.ground_truth_carried(carrier_id, config):
            obj = self.scene.objects[oid]
            depth = float(np.linalg.norm(obj.centroid[:2] - pose.position))
            out.append(self._observation_of(obj, depth))
        return out

    # ----- displacement ---------------------------------------------------

    def _free_spot_on(self, carrier: ObjectInstance, extents: np.ndarray,
                      config: CrsgConfig, skip_id: str = "",
                      start_index: int = 0) -> np.ndarray:
        """Deterministic spiral scan over the carrier top for a free spot."""
        half = extents[:2] / 2.0
        margin = 0.02
        lo = carrier.box.min[:2] + half + margin
        hi = carrier.box.max[:2] - half - margin
        if np.any(hi < lo):
            raise DisplacementError(
                f"object too large for carrier {carrier.id!r} footprint"
            )
        step = max(0.05, float(min(extents[0], extents[1])) / 2.0)
        xs = np.arange(lo[0], hi[0] + 1e-9, step)
        ys = np.arange(lo[1], hi[1] + 1e-9, step)
        center = carrier.centroid[:2]
        spots = sorted(
            ((float(np.hypot(x - center[0], y - center[1])), round(float(x), 6), round(float(y), 6))
             for x in xs for y in ys),
        )
        occupants = [
            self.scene.objects[oid]
            for oid in self.ground_truth_carried(carrier.id, config)
            if oid != skip_id
        ]
        n = len(spots)
        for k in range(n):
            _, x, y = spots[(start_index + k) % n]
            box_min = np.array([x - half[0], y - half[1]])
            box_max = np.array([x + half[0], y + half[1]])
            clear = True
            for occ in occupants:
                if (box_min[0] < occ.box.max[0] + margin and box_max[0] > occ.box.min[0] - margin
                        and box_min[1] < occ.box.max[1] + margin and box_max[1] > occ.box.min[1] - margin):
                    clear = False
                    break
            if clear:
                return np.array([x, y])
        raise DisplacementError(f"no free spot on carrier {carrier.id!r}")

    def apply_displacement(self, event: DisplacementEvent, config: CrsgConfig,
                           spot_index: int = 0) -> None:
        """Mutate ground truth per the event; belief graphs are untouched.

        ``spot_index`` rotates the spiral scan so seeded callers can vary
        placements deterministically.
        """
        if event.kind == "remove":
            if event.object_id not in self.scene.objects:
                raise DisplacementError(f"cannot remove unknown object {event.object_id!r}")
            del self.scene.objects[event.object_id]
            self._centroid_cache = None
            return

        if event.kind == "move":
            obj = self.object(event.object_id)
            carrier = self.object(event.target_carrier_id)
            extents = obj.box.extents
            xy = self._free_spot_on(carrier, extents, config,
                                    skip_id=obj.id, start_index=spot_index)
            zmin = float(carrier.box.max[2])
            new_min = np.array([xy[0] - extents[0] / 2.0, xy[1] - extents[1] / 2.0, zmin])
            new_max = new_min + extents
            obj.box = Box3(new_min, new_max)
            obj.centroid = (new_min + new_max) / 2.0
            if not carrying_predicate(carrier, obj, config):
                raise DisplacementError(
                    f"placement of {obj.id!r} on {carrier.id!r} violates the carrying predicate"
                )
            self._centroid_cache = None
            return

        # add
        payload = dict(event.new_object)
        oid = payload.get("id")
        if not oid:
            raise DisplacementError("add event payload needs an id")
        if oid in self.scene.objects:
            raise DisplacementError(f"add event id {oid!r} already exists")
        carrier_id = event.target_carrier_id or payload.get("carrier_id")
        if not carrier_id:
            raise DisplacementError("add event needs target_carrier_id")
        carrier = self.object(carrier_id)
        extents = np.asarray(payload.get("extents", [0.1, 0.1, 0.12]), dtype=np.float64)
        xy = self._free_spot_on(carrier, extents, config, start_index=spot_index)
        zmin = float(carrier.box.max[2])
        new_min = np.array([xy[0] - extents[0] / 2.0, xy[1] - extents[1] / 2.0, zmin])
        new_max = new_min + extents
        captions = payload.get("captions") or [oid]
        from .features import embed_text  # local import avoids cycle at module load

        joined = " ".join(captions)
        dim = self.scene.embedding_dim
        obj = ObjectInstance(
            id=oid,
            captions=list(captions),
            box=Box3(new_min, new_max),
            centroid=(new_min + new_max) / 2.0,
            text_feature=embed_text(joined, dim),
            visual_feature=embed_text(joined, dim),
        )
        self.scene.objects[oid] = obj
        self._centroid_cache = None


class DistanceField:
    """Read-only geodesic distances from one source over the free cells."""

    def __init__(self, world: GridWorld, index: np.ndarray, dist: np.ndarray):
        self._world = world
        self._index = index
        self._dist = dist

    def to_point(self, point: Sequence[float]) -> float:
        cell = self._world.snap_free_cell(point)
        return float(self._dist[self._index[cell[1], cell[0]]])

    def to_cell(self, cell: Cell) -> float:
        idx = self._index[cell[1], cell[0]]
        if idx < 0:
            return math.inf
        return float(self._dist[idx])
