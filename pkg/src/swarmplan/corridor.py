"""Per-agent safe-box corridor and pairwise separating half-spaces.

Both constraint families are built from the shifted previous trajectories,
which is what makes them feasible by construction: the corridor reuses last
step's boxes for the segments it inherits, and each separating half-space is
certified by the closest point between the relative control-point hull and
the collision model, placed so that both agents' previous control points keep
strictly positive slack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from swarmplan.bernstein import PiecewiseTrajectory
from swarmplan.errors import PlannerError, SafetyDegeneracyError
from swarmplan.geometry import (
    EllipsoidModel,
    HalfSpaceConstraint,
    closest_points_to_origin,
    to_sphere_frame,
)
from swarmplan.world import AxisBox, OccupancyGrid

_DEGENERACY_EPS = 1e-9  # minimum hull-to-model clearance in the sphere frame
_CONTAINMENT_TOL = 1e-9


@dataclass(frozen=True)
class SafeBoxCorridor:
    """One free AxisBox per trajectory segment, confining its control points."""

    boxes: tuple[AxisBox, ...]

    def __len__(self):
        return len(self.boxes)


def advance_corridor(
    prev: SafeBoxCorridor | None,
    init_traj: PiecewiseTrajectory,
    grid: OccupancyGrid,
    radius: float,
    toward=None,
) -> SafeBoxCorridor:
    """Corridor for this step: inherit boxes 2..M, grow a fresh final box.

    On the first step every segment shares one box grown at the (constant)
    trajectory's terminal control point. Afterwards segment m reuses the
    previous step's box m+1, which contained the previous segment m+1 and
    therefore contains this step's inherited segment m; only the new final
    segment, constant at the previous terminal point, needs a new box grown
    at that point. `toward` biases the growth order of that fresh box (see
    grow_free_box). Every initial control point of segment m is verified to
    lie in box m.
    """
    terminal = init_traj.segments[-1].control_points[-1]
    fresh = grid.grow_free_box(terminal, radius, toward=toward)
    if prev is None:
        corridor = SafeBoxCorridor((fresh,) * init_traj.segment_count)
    else:
        if len(prev) != init_traj.segment_count:
            raise ValueError("previous corridor length does not match trajectory")
        corridor = SafeBoxCorridor(prev.boxes[1:] + (fresh,))
    for box, seg in zip(corridor.boxes, init_traj.segments):
        inside = np.all(seg.control_points >= box.lo - _CONTAINMENT_TOL) and np.all(
            seg.control_points <= box.hi + _CONTAINMENT_TOL
        )
        if not inside:
            raise PlannerError(
                "corridor does not contain the shifted trajectory; the previous "
                "plan must have violated its corridor constraints"
            )
    return corridor


@dataclass(frozen=True)
class SegmentSeparation:
    """Separating half-spaces for one segment of one agent against one neighbor.

    The constrained agent's control point l must satisfy
    (c_l - anchors[l]) . normal - margins[l] >= 0, where anchors are the
    neighbor's shifted control points. One normal serves all l of a segment.
    """

    normal: np.ndarray
    anchors: np.ndarray
    margins: np.ndarray

    def __post_init__(self):
        for name in ("normal", "anchors", "margins"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def residuals(self, control_points) -> np.ndarray:
        pts = np.asarray(control_points, dtype=float)
        return (pts - self.anchors) @ self.normal - self.margins

    def halfspaces(self) -> list[HalfSpaceConstraint]:
        return [
            HalfSpaceConstraint(tuple(self.normal), tuple(a), float(m))
            for a, m in zip(self.anchors, self.margins)
        ]


@dataclass(frozen=True)
class PairSeparation:
    """SegmentSeparation per trajectory segment, for one agent of a pair."""

    segments: tuple[SegmentSeparation, ...]


def build_pair_separations(
    init_a: PiecewiseTrajectory,
    init_b: PiecewiseTrajectory,
    model: EllipsoidModel,
    safety_buffer: float = 0.0,
) -> tuple[PairSeparation, PairSeparation]:
    """Separating half-spaces for both agents of a pair, one normal per segment.

    Per segment: transform the control-point differences a-b into the frame
    where the collision model is a sphere, take the closest hull point to the
    origin as the separating direction, map it back, and split the required
    separation evenly between the two agents. The two outputs are exact
    mirrors (negated normals, identical margins), computed once from the
    shared data; recomputing with swapped arguments yields bit-identical
    constraints because every geometric step is deterministic and odd under
    negation.

    Raises SafetyDegeneracyError if a hull clears the model by less than
    1e-9, i.e. the feasibility premise is already violated.
    """
    if init_a.segment_count != init_b.segment_count:
        raise ValueError("trajectories must have the same segment count")
    if init_a.degree != init_b.degree:
        raise ValueError("trajectories must have the same degree")
    pts_a = np.stack([seg.control_points for seg in init_a.segments])
    pts_b = np.stack([seg.control_points for seg in init_b.segments])
    diffs = pts_a - pts_b  # (M, n+1, 3)
    witnesses, dists = closest_points_to_origin(to_sphere_frame(diffs, model))

    clearance = dists - model.radius_sum
    if np.min(clearance) <= _DEGENERACY_EPS:
        m = int(np.argmin(clearance))
        raise SafetyDegeneracyError(
            f"segment {m}: relative control-point hull clears the collision "
            f"model by {clearance[m]:.3e} m"
        )
    sphere_normals = witnesses / dists[:, None]
    supports = np.einsum(
        "mld,md->ml", to_sphere_frame(diffs, model), sphere_normals
    )
    if np.min(supports - dists[:, None]) < -1e-9:
        m = int(np.argmin(np.min(supports - dists[:, None], axis=1)))
        raise SafetyDegeneracyError(
            f"segment {m}: closest-point direction fails to support the hull"
        )
    normals = sphere_normals * model.scale
    normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    reach = model.radius_sum * np.linalg.norm(
        normals * model.inverse_scale, axis=1
    )
    projections = np.einsum("mld,md->ml", diffs, normals)
    margins = 0.5 * (reach[:, None] + projections)
    slack = 0.5 * (projections - reach[:, None])
    if np.min(slack) <= 0.0:
        m = int(np.argmin(np.min(slack, axis=1)))
        raise SafetyDegeneracyError(
            f"segment {m}: non-positive separation slack {np.min(slack):.3e}"
        )
    segs_a = []
    segs_b = []
    for m in range(init_a.segment_count):
        segs_a.append(
            SegmentSeparation(normals[m], pts_b[m], margins[m] + safety_buffer)
        )
        segs_b.append(
            SegmentSeparation(-normals[m], pts_a[m], margins[m] + safety_buffer)
        )
    return PairSeparation(tuple(segs_a)), PairSeparation(tuple(segs_b))
