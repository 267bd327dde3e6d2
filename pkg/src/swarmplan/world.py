"""Static environment: voxel occupancy grid and free-space queries.

The world is a uniform voxel grid over an axis-aligned bounding box. A voxel
is occupied iff its closed cell intersects any obstacle box. Free-space
queries inflate the query shape by an axis-aligned margin (the bounding cube
of the agent sphere), which is conservative and never unsafe. Occupied-cell
counting goes through a 3-D summed-area table, so box tests cost O(1).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from swarmplan.errors import InfeasibleSeedError

_EPS_CELLS = 1e-9  # index-space slack for exact-boundary decisions
_EPS_BOUNDS = 1e-9  # meters of slack on world-bounds containment


@dataclass(frozen=True)
class AxisBox:
    """Closed axis-aligned box, min_corner <= max_corner componentwise."""

    min_corner: tuple[float, float, float]
    max_corner: tuple[float, float, float]

    def __post_init__(self):
        lo = np.asarray(self.min_corner, dtype=float).reshape(3)
        hi = np.asarray(self.max_corner, dtype=float).reshape(3)
        if np.any(hi < lo):
            raise ValueError(f"box min {lo} exceeds max {hi}")
        object.__setattr__(self, "min_corner", (float(lo[0]), float(lo[1]), float(lo[2])))
        object.__setattr__(self, "max_corner", (float(hi[0]), float(hi[1]), float(hi[2])))

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.min_corner)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.max_corner)

    def contains(self, point, tol: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))

    def inflate(self, margin: float) -> "AxisBox":
        return AxisBox(tuple(self.lo - margin), tuple(self.hi + margin))


@dataclass(frozen=True)
class GridPath:
    """Ordered 6-connected voxel-center waypoints from a grid search."""

    waypoints: np.ndarray

    def __post_init__(self):
        wp = np.asarray(self.waypoints, dtype=float)
        wp.setflags(write=False)
        object.__setattr__(self, "waypoints", wp)

    def __len__(self):
        return len(self.waypoints)


class OccupancyGrid:
    """Voxelized static world with conservative inflated free-space queries."""

    def __init__(self, resolution, bounds_min, bounds_max, occupied=None, boxes=()):
        self.resolution = float(resolution)
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        self.bounds_min = np.asarray(bounds_min, dtype=float).reshape(3)
        self.bounds_max = np.asarray(bounds_max, dtype=float).reshape(3)
        extent = self.bounds_max - self.bounds_min
        if np.any(extent <= 0):
            raise ValueError("bounds must have positive extent")
        dims = np.round(extent / self.resolution).astype(int)
        if np.any(np.abs(dims * self.resolution - extent) > 1e-6):
            raise ValueError("bounds extent must be a multiple of resolution")
        self.dims = tuple(int(d) for d in dims)
        if occupied is None:
            occupied = np.zeros(self.dims, dtype=bool)
        occupied = np.asarray(occupied, dtype=bool)
        if occupied.shape != self.dims:
            raise ValueError(f"occupied mask shape {occupied.shape} != dims {self.dims}")
        occupied.setflags(write=False)
        self.occupied = occupied
        self.boxes = tuple(
            (np.array(lo, dtype=float), np.array(hi, dtype=float)) for lo, hi in boxes
        )
        # Summed-area table: _prefix[i, j, k] counts occupied cells below
        # (i, j, k) exclusive, giving O(1) occupied counts for index ranges.
        self._prefix = np.zeros((dims[0] + 1, dims[1] + 1, dims[2] + 1), dtype=np.int64)
        self._prefix[1:, 1:, 1:] = np.cumsum(
            np.cumsum(np.cumsum(occupied, axis=0), axis=1), axis=2
        )
        self._blocked_cache: dict[float, np.ndarray] = {}
        self._field_cache: dict = {}

    # -- construction ------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "OccupancyGrid":
        """Rasterize a map description: a voxel is occupied iff its closed
        cell intersects any obstacle box."""
        try:
            resolution = float(data["resolution"])
            bmin = np.asarray(data["bounds"]["min"], dtype=float)
            bmax = np.asarray(data["bounds"]["max"], dtype=float)
            raw_boxes = data.get("boxes", [])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed map description: {exc}") from exc
        grid = cls(resolution, bmin, bmax)
        occupied = np.zeros(grid.dims, dtype=bool)
        boxes = []
        for box in raw_boxes:
            lo = np.asarray(box["min"], dtype=float).reshape(3)
            hi = np.asarray(box["max"], dtype=float).reshape(3)
            if np.any(hi < lo):
                raise ValueError("obstacle box has min > max")
            boxes.append((lo, hi))
            rel_lo = (lo - grid.bounds_min) / resolution
            rel_hi = (hi - grid.bounds_min) / resolution
            i0 = [max(0, math.ceil(rel_lo[a] - 1 - _EPS_CELLS)) for a in range(3)]
            i1 = [
                min(grid.dims[a] - 1, math.floor(rel_hi[a] + _EPS_CELLS))
                for a in range(3)
            ]
            if all(i0[a] <= i1[a] for a in range(3)):
                occupied[i0[0] : i1[0] + 1, i0[1] : i1[1] + 1, i0[2] : i1[2] + 1] = True
        return cls(resolution, bmin, bmax, occupied, boxes)

    def to_dict(self) -> dict:
        return {
            "resolution": self.resolution,
            "bounds": {
                "min": [float(v) for v in self.bounds_min],
                "max": [float(v) for v in self.bounds_max],
            },
            "boxes": [
                {"min": [float(v) for v in lo], "max": [float(v) for v in hi]}
                for lo, hi in self.boxes
            ],
        }

    # -- index helpers -----------------------------------------------------

    def voxel_index(self, point) -> tuple[int, int, int]:
        """Cell containing a point, clamped into the grid."""
        rel = (np.asarray(point, dtype=float) - self.bounds_min) / self.resolution
        idx = np.floor(rel).astype(int)
        return tuple(int(np.clip(idx[a], 0, self.dims[a] - 1)) for a in range(3))

    def voxel_center(self, index) -> np.ndarray:
        return self.bounds_min + (np.asarray(index, dtype=float) + 0.5) * self.resolution

    def _overlap_range(self, lo: np.ndarray, hi: np.ndarray):
        """Inclusive index ranges of cells with positive-measure overlap
        with [lo, hi]; may be empty (min > max) for degenerate boxes."""
        rel_lo = (lo - self.bounds_min) / self.resolution
        rel_hi = (hi - self.bounds_min) / self.resolution
        i0 = np.floor(rel_lo - 1 + _EPS_CELLS).astype(int) + 1
        i1 = np.ceil(rel_hi - _EPS_CELLS).astype(int) - 1
        return i0, i1

    def _count_occupied(self, i0, i1) -> np.ndarray:
        """Occupied cells in inclusive index ranges (vectorized, clipped)."""
        i0 = np.asarray(i0, dtype=int)
        i1 = np.asarray(i1, dtype=int)
        dims = np.array(self.dims)
        a = np.clip(i0, 0, dims)
        b = np.clip(i1 + 1, 0, dims)
        b = np.maximum(a, b)
        p = self._prefix
        x0, y0, z0 = a[..., 0], a[..., 1], a[..., 2]
        x1, y1, z1 = b[..., 0], b[..., 1], b[..., 2]
        return (
            p[x1, y1, z1]
            - p[x0, y1, z1]
            - p[x1, y0, z1]
            - p[x1, y1, z0]
            + p[x0, y0, z1]
            + p[x0, y1, z0]
            + p[x1, y0, z0]
            - p[x0, y0, z0]
        )

    # -- free-space queries --------------------------------------------------

    def box_is_free(self, box: AxisBox, inflation: float) -> bool:
        """True iff the box inflated on every axis touches no occupied cell
        with positive measure and stays inside the world bounds."""
        if inflation < 0:
            raise ValueError("inflation must be non-negative")
        lo = box.lo - inflation
        hi = box.hi + inflation
        if np.any(lo < self.bounds_min - _EPS_BOUNDS) or np.any(
            hi > self.bounds_max + _EPS_BOUNDS
        ):
            return False
        i0, i1 = self._overlap_range(lo, hi)
        return int(self._count_occupied(i0, i1)) == 0

    def points_free(self, points, inflation: float) -> np.ndarray:
        """Vectorized box_is_free for point queries (inflated cubes)."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        lo = pts - inflation
        hi = pts + inflation
        inside = np.all(lo >= self.bounds_min - _EPS_BOUNDS, axis=1) & np.all(
            hi <= self.bounds_max + _EPS_BOUNDS, axis=1
        )
        i0, i1 = self._overlap_range(lo, hi)
        counts = self._count_occupied(i0, i1)
        return inside & (counts == 0)

    def point_is_free(self, point, inflation: float) -> bool:
        return bool(self.points_free(np.asarray(point)[None, :], inflation)[0])

    # -- safe-box growth -----------------------------------------------------

    def grow_free_box(self, seed, inflation: float, toward=None) -> AxisBox:
        """Largest-effort free box around a seed point.

        Starts from the cells covering the inflated seed cube and adds one
        voxel layer per direction round-robin until every direction is
        blocked by an occupied cell or the world border. The default
        direction order is +x, -x, +y, -y, +z, -z; passing `toward` reorders
        it by descending progress along that vector, which lets the box
        thread doorways before sideways growth walls them off. The returned
        box is the grown cell region eroded by the inflation on every face,
        so it always contains the seed and passes box_is_free at the same
        inflation.
        """
        seed = np.asarray(seed, dtype=float).reshape(3)
        if not self.point_is_free(seed, inflation):
            raise InfeasibleSeedError(
                f"seed {seed.tolist()} is not free under inflation {inflation}"
            )
        lo_idx, hi_idx = self._overlap_range(seed - inflation, seed + inflation)
        lo_idx = np.maximum(lo_idx, 0)
        hi_idx = np.minimum(hi_idx, np.array(self.dims) - 1)

        order = list(range(6))  # +x, -x, +y, -y, +z, -z
        if toward is not None:
            toward = np.asarray(toward, dtype=float).reshape(3)
            scores = [
                (1.0 if d % 2 == 0 else -1.0) * toward[d // 2] for d in range(6)
            ]
            order.sort(key=lambda d: (-scores[d], d))
        blocked = [False] * 6
        while not all(blocked):
            for d in order:
                if blocked[d]:
                    continue
                axis, sign = divmod(d, 2)
                sign = 1 if sign == 0 else -1
                layer_lo = lo_idx.copy()
                layer_hi = hi_idx.copy()
                if sign > 0:
                    new = hi_idx[axis] + 1
                    if new >= self.dims[axis]:
                        blocked[d] = True
                        continue
                    layer_lo[axis] = layer_hi[axis] = new
                else:
                    new = lo_idx[axis] - 1
                    if new < 0:
                        blocked[d] = True
                        continue
                    layer_lo[axis] = layer_hi[axis] = new
                if int(self._count_occupied(layer_lo, layer_hi)) > 0:
                    blocked[d] = True
                    continue
                if sign > 0:
                    hi_idx[axis] = new
                else:
                    lo_idx[axis] = new

        region_lo = self.bounds_min + lo_idx * self.resolution
        region_hi = self.bounds_min + (hi_idx + 1) * self.resolution
        return AxisBox(tuple(region_lo + inflation), tuple(region_hi - inflation))

    # -- grid search ---------------------------------------------------------

    def _static_blocked(self, inflation: float) -> np.ndarray:
        """Cells whose center, inflated, overlaps an obstacle or leaves the
        bounds. Cached per inflation value."""
        key = round(float(inflation), 12)
        mask = self._blocked_cache.get(key)
        if mask is not None:
            return mask
        centers = [
            self.bounds_min[a] + (np.arange(self.dims[a]) + 0.5) * self.resolution
            for a in range(3)
        ]
        grid_pts = np.stack(np.meshgrid(*centers, indexing="ij"), axis=-1).reshape(-1, 3)
        free = self.points_free(grid_pts, inflation).reshape(self.dims)
        mask = ~free
        mask.setflags(write=False)
        self._blocked_cache[key] = mask
        return mask

    def _goal_distance_field(self, goal_idx, inflation: float) -> np.ndarray:
        """Exact 6-connected hop count from every free cell to the goal cell
        (-1 where unreachable), used as a consistent search heuristic.

        Built by one vectorized breadth-first sweep and cached per (goal,
        inflation); goals are fixed for a whole run, so this pays once.
        """
        key = (tuple(goal_idx), round(float(inflation), 12))
        cached = self._field_cache.get(key)
        if cached is not None:
            return cached
        free = ~self._static_blocked(inflation)
        dist = np.full(self.dims, -1, dtype=np.int32)
        if free[tuple(goal_idx)]:
            frontier = np.zeros(self.dims, dtype=bool)
            frontier[tuple(goal_idx)] = True
            dist[tuple(goal_idx)] = 0
            hops = 0
            unseen = free & (dist < 0)
            while frontier.any():
                hops += 1
                grown = np.zeros_like(frontier)
                grown[1:, :, :] |= frontier[:-1, :, :]
                grown[:-1, :, :] |= frontier[1:, :, :]
                grown[:, 1:, :] |= frontier[:, :-1, :]
                grown[:, :-1, :] |= frontier[:, 1:, :]
                grown[:, :, 1:] |= frontier[:, :, :-1]
                grown[:, :, :-1] |= frontier[:, :, 1:]
                grown &= unseen
                dist[grown] = hops
                unseen &= ~grown
                frontier = grown
        dist.setflags(write=False)
        self._field_cache[key] = dist
        return dist

    def astar(
        self,
        start,
        goal,
        inflation: float,
        agent_obstacles=(),
        budget: int = 120000,
        downwash: float = 1.0,
    ) -> GridPath | None:
        """Shortest 6-connected path between the cells containing start and
        goal, or None.

        Cells whose inflated center overlaps an obstacle are blocked, as are
        cells within inflation + radius of an agent obstacle in the
        downwash-scaled metric (except the start cell, which is always
        traversable); passing the same downwash as the line-of-sight queries
        keeps paths inside the region sight checks can actually certify.
        Costs are uniform and the heuristic is the exact obstacle-aware hop
        count to the goal (a cached breadth-first field), which is
        consistent, prunes statically unreachable cells outright, and keeps
        expansions near the optimal corridor even around walls. Ties pop
        lowest heuristic first, then lowest flat cell index, so results are
        deterministic. Searches exceeding `budget` expansions return None.
        """
        nx, ny, nz = self.dims
        blocked = self._static_blocked(inflation)
        if agent_obstacles:
            blocked = blocked.copy()
            for pos, radius in agent_obstacles:
                self._block_near(
                    blocked, np.asarray(pos, float), inflation + radius, downwash
                )
        start_idx = self.voxel_index(start)
        goal_idx = self.voxel_index(goal)
        if blocked[start_idx]:
            # The caller guarantees the start position itself is free; its
            # cell center may still fail the conservative test or sit inside
            # another agent's disc, so keep the search startable.
            if not blocked.flags.writeable:
                blocked = blocked.copy()
            blocked[start_idx] = False
        if blocked[goal_idx]:
            return None

        field = self._goal_distance_field(goal_idx, inflation).reshape(-1)
        sy = nz
        sx = ny * nz
        start_flat = start_idx[0] * sx + start_idx[1] * sy + start_idx[2]
        goal_flat = goal_idx[0] * sx + goal_idx[1] * sy + goal_idx[2]
        flat_blocked = blocked.reshape(-1)

        g = np.full(nx * ny * nz, np.iinfo(np.int32).max, dtype=np.int32)
        parent = np.full(nx * ny * nz, -1, dtype=np.int32)
        g[start_flat] = 0

        # The start cell may be force-unblocked with no field value; 0 is
        # admissible there. Everywhere else a negative field means the goal
        # is statically unreachable from that cell, so it cannot help.
        h0 = int(field[start_flat])
        if h0 < 0:
            h0 = 0
            if not any(
                field[start_flat + df] >= 0
                for df in (sx, -sx, sy, -sy, 1, -1)
                if 0 <= start_flat + df < len(field)
            ):
                return None

        heap = [(h0, h0, start_flat)]
        pops = 0
        while heap:
            f, hv, flat = heapq.heappop(heap)
            gv = f - hv
            if gv > g[flat]:
                continue
            if flat == goal_flat:
                return self._reconstruct(parent, start_flat, goal_flat)
            pops += 1
            if pops > budget:
                return None
            i, rem = divmod(flat, sx)
            j, k = divmod(rem, sy)
            for di, dj, dk, df in (
                (1, 0, 0, sx),
                (-1, 0, 0, -sx),
                (0, 1, 0, sy),
                (0, -1, 0, -sy),
                (0, 0, 1, 1),
                (0, 0, -1, -1),
            ):
                ni, nj, nk = i + di, j + dj, k + dk
                if not (0 <= ni < nx and 0 <= nj < ny and 0 <= nk < nz):
                    continue
                nflat = flat + df
                if flat_blocked[nflat]:
                    continue
                nh = field[nflat]
                if nh < 0:
                    continue
                ng = gv + 1
                if ng < g[nflat]:
                    g[nflat] = ng
                    parent[nflat] = flat
                    heapq.heappush(heap, (ng + nh, nh, nflat))
        return None

    def _block_near(
        self, blocked: np.ndarray, pos: np.ndarray, radius: float, downwash: float = 1.0
    ):
        """Mark cells whose center lies within `radius` of pos in the
        downwash-scaled metric (z differences count 1/downwash)."""
        reach = np.array([radius, radius, radius * downwash])
        lo_idx, hi_idx = self._overlap_range(pos - reach, pos + reach)
        lo_idx = np.maximum(lo_idx, 0)
        hi_idx = np.minimum(hi_idx, np.array(self.dims) - 1)
        if np.any(lo_idx > hi_idx):
            return
        axes = [np.arange(lo_idx[a], hi_idx[a] + 1) for a in range(3)]
        centers = [
            self.bounds_min[a] + (axes[a] + 0.5) * self.resolution - pos[a]
            for a in range(3)
        ]
        d2 = (
            centers[0][:, None, None] ** 2
            + centers[1][None, :, None] ** 2
            + (centers[2][None, None, :] / downwash) ** 2
        )
        region = blocked[
            lo_idx[0] : hi_idx[0] + 1, lo_idx[1] : hi_idx[1] + 1, lo_idx[2] : hi_idx[2] + 1
        ]
        blocked[
            lo_idx[0] : hi_idx[0] + 1, lo_idx[1] : hi_idx[1] + 1, lo_idx[2] : hi_idx[2] + 1
        ] = region | (d2 <= radius * radius)

    def _reconstruct(self, parent, start_flat, goal_flat) -> GridPath:
        sy = self.dims[2]
        sx = self.dims[1] * self.dims[2]
        chain = [goal_flat]
        while chain[-1] != start_flat:
            chain.append(int(parent[chain[-1]]))
        chain.reverse()
        pts = np.empty((len(chain), 3))
        for row, flat in enumerate(chain):
            i, rem = divmod(flat, sx)
            j, k = divmod(rem, sy)
            pts[row] = self.voxel_center((i, j, k))
        return GridPath(pts)

    # -- line of sight -------------------------------------------------------

    def line_of_sight_free(
        self, p, q, inflation: float, agent_obstacles=(), downwash: float = 1.0
    ) -> bool:
        """True iff the segment pq, sampled every resolution/2, stays free
        under inflation and clear of every agent obstacle by more than
        inflation + its radius in the downwash-scaled metric."""
        p = np.asarray(p, dtype=float).reshape(3)
        q = np.asarray(q, dtype=float).reshape(3)
        dist = float(np.linalg.norm(q - p))
        count = max(2, int(math.ceil(dist / (self.resolution / 2))) + 1) if dist > 0 else 1
        samples = np.linspace(p, q, count)
        if not np.all(self.points_free(samples, inflation)):
            return False
        if agent_obstacles:
            scale = np.array([1.0, 1.0, 1.0 / downwash])
            for pos, radius in agent_obstacles:
                delta = (samples - np.asarray(pos, dtype=float)) * scale
                if np.any(np.linalg.norm(delta, axis=1) <= inflation + radius):
                    return False
        return True
