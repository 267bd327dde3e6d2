"""One agent's synchronized replanning step.

Every agent runs the same recipe on the same shared snapshot: shift the
previous plans by one segment, rebuild the safe-box corridor, build pairwise
separating half-spaces against every other agent, pick a goal, and solve the
QP warm-started at the shifted plan. The shifted plan provably satisfies
every constraint, so if the solver ever fails numerically the agent just
flies the shifted plan; safety never depends on the solver succeeding.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from swarmplan.bernstein import PiecewiseTrajectory, shift_for_initial
from swarmplan.corridor import (
    PairSeparation,
    SafeBoxCorridor,
    advance_corridor,
    build_pair_separations,
)
from swarmplan.errors import (
    PlannerError,
    QpInfeasibleError,
    StepAbortError,
    UnsupportedDisturbanceError,
)
from swarmplan.geometry import EllipsoidModel
from swarmplan.goalplan import AgentMotion, GoalContext, plan_current_goal
from swarmplan.params import PlanningParams
from swarmplan.qp import assemble, solve, trajectory_from_values
from swarmplan.world import OccupancyGrid

#: Largest constraint violation tolerated on the shifted plan before a step
#: aborts; anything beyond this means an assumption was broken upstream.
CANDIDATE_TOL = 1e-9

_SYNC_TOL = 1e-9


@dataclass(frozen=True)
class AgentSnapshot:
    """One agent's communicated state: everything others need to plan."""

    agent_id: int
    radius: float
    position: np.ndarray
    goal: np.ndarray
    previous_trajectory: PiecewiseTrajectory | None

    def __post_init__(self):
        for name in ("position", "goal"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(3)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.radius <= 0:
            raise ValueError("radius must be positive")


@dataclass
class PlannerState:
    """Mutable per-agent carry-over between steps (owned by one caller)."""

    agent_id: int
    radius: float
    params: PlanningParams
    previous_trajectory: PiecewiseTrajectory | None = None
    previous_corridor: SafeBoxCorridor | None = None


@dataclass
class StepDiagnostics:
    goal: np.ndarray
    candidate_violation: float
    solve_iterations: int = 0
    objective: float = float("nan")
    used_fallback: bool = False
    fallback_reason: str | None = None


@dataclass
class PlanStepResult:
    trajectory: PiecewiseTrajectory
    corridor: SafeBoxCorridor
    diagnostics: StepDiagnostics


class DisturbanceLevel(enum.Enum):
    NONE = "none"
    SMALL = "small"
    LARGE = "large"


def initial_trajectories(
    snapshots: list[AgentSnapshot], params: PlanningParams, now: float = 0.0
) -> dict[int, PiecewiseTrajectory]:
    """Shift every agent's previous plan to this step (identically on every
    caller, so decentralized planners agree bit-for-bit)."""
    out = {}
    for snap in snapshots:
        out[snap.agent_id] = shift_for_initial(
            snap.previous_trajectory,
            snap.position,
            segment_count=params.segment_count,
            degree=params.degree,
            segment_time=params.segment_time,
            start_time=now,
        )
    return out


def shared_pair_separations(
    inits: dict[int, PiecewiseTrajectory],
    radii: dict[int, float],
    params: PlanningParams,
) -> dict[tuple[int, int], tuple[PairSeparation, PairSeparation]]:
    """Separating half-spaces for every unordered pair, computed once.

    Keyed (low_id, high_id); values are (constraints for low, for high).
    """
    ids = sorted(inits)
    out = {}
    for pos, a in enumerate(ids):
        for b in ids[pos + 1 :]:
            model = EllipsoidModel(radii[a] + radii[b], params.downwash)
            out[(a, b)] = build_pair_separations(
                inits[a], inits[b], model, params.safety_buffer
            )
    return out


def plan_step(
    state: PlannerState,
    snapshots: list[AgentSnapshot],
    grid: OccupancyGrid,
    pair_separations=None,
    inits: dict[int, PiecewiseTrajectory] | None = None,
) -> PlanStepResult:
    """Produce this agent's next trajectory from the synchronized snapshot.

    `pair_separations` and `inits` allow a simulator driving many agents to
    share the per-pair work; both default to local recomputation, which is
    bit-identical. Raises StepAbortError when a sub-step detects broken
    assumptions (colliding start, occupied seed, unreachable goal); solver
    failures are absorbed by falling back to the shifted previous plan.
    """
    params = state.params
    me = state.agent_id
    by_id = {snap.agent_id: snap for snap in snapshots}
    if me not in by_id:
        raise ValueError(f"snapshot list is missing agent {me}")
    if state.previous_trajectory is not None:
        now = state.previous_trajectory.start_time + params.segment_time
    else:
        now = 0.0

    try:
        if inits is None:
            inits = initial_trajectories(snapshots, params, now)
        my_init = inits[me]
        if abs(my_init.start_time - now) > _SYNC_TOL:
            raise PlannerError("snapshots are not synchronized to this step")

        mine = []
        for other in sorted(by_id):
            if other == me:
                continue
            low, high = min(me, other), max(me, other)
            if pair_separations is not None and (low, high) in pair_separations:
                pair = pair_separations[(low, high)]
            else:
                model = EllipsoidModel(
                    state.radius + by_id[other].radius, params.downwash
                )
                pair = build_pair_separations(
                    inits[low], inits[high], model, params.safety_buffer
                )
            mine.append(pair[0] if me == low else pair[1])

        motions = {
            snap.agent_id: AgentMotion(
                position=inits[snap.agent_id].segments[0].control_points[0],
                horizon_end=inits[snap.agent_id].segments[-1].control_points[-1],
                goal=snap.goal,
                radius=snap.radius,
            )
            for snap in snapshots
        }
        goal = plan_current_goal(GoalContext(me, motions, params), grid)

        terminal = my_init.segments[-1].control_points[-1]
        corridor = advance_corridor(
            state.previous_corridor, my_init, grid, state.radius,
            toward=goal - terminal,
        )
    except PlannerError as exc:
        raise StepAbortError(f"agent {me}: {exc}", agent_id=me) from exc

    problem, candidate = assemble(my_init, goal, corridor, mine, params)
    report = problem.check(candidate)
    diagnostics = StepDiagnostics(goal=goal, candidate_violation=report.max_violation())
    if diagnostics.candidate_violation > CANDIDATE_TOL:
        raise StepAbortError(
            f"agent {me}: shifted plan violates its own constraints by "
            f"{diagnostics.candidate_violation:.3e}; planning assumptions broken",
            agent_id=me,
        )

    try:
        solution = solve(
            problem,
            tol=params.qp_tolerance,
            warm_start=candidate,
            max_iterations=params.qp_max_iterations,
        )
    except QpInfeasibleError as exc:
        diagnostics.used_fallback = True
        diagnostics.fallback_reason = str(exc)
        diagnostics.solve_iterations = exc.iterations
        return PlanStepResult(my_init, corridor, diagnostics)

    diagnostics.solve_iterations = solution.iterations
    diagnostics.objective = solution.objective
    if solution.objective > problem.objective(candidate) + params.qp_tolerance:
        diagnostics.used_fallback = True
        diagnostics.fallback_reason = "solver regressed below the feasible candidate"
        return PlanStepResult(my_init, corridor, diagnostics)

    trajectory = trajectory_from_values(solution.values, params, now)
    return PlanStepResult(trajectory, corridor, diagnostics)


def detect_disturbance(
    state: PlannerState, measured_position, threshold: float | None = None
) -> DisturbanceLevel:
    """Classify tracking error against the previously planned desired state.

    NONE means the measurement matches the desired position to numerical
    noise; SMALL means a deviation within `threshold` (default: the
    disturbance_large_threshold parameter), which replanning absorbs by
    keeping the desired state as its initial condition; LARGE deviations are
    out of scope for this planner and the caller should raise via
    `require_supported`.
    """
    if state.previous_trajectory is None:
        raise ValueError("no previous trajectory to compare against")
    if threshold is None:
        threshold = state.params.disturbance_large_threshold
    now = state.previous_trajectory.start_time + state.params.segment_time
    desired = state.previous_trajectory.eval(now)
    error = float(np.linalg.norm(np.asarray(measured_position, dtype=float) - desired))
    if error <= 1e-9:
        return DisturbanceLevel.NONE
    if error <= threshold:
        return DisturbanceLevel.SMALL
    return DisturbanceLevel.LARGE


def require_supported(level: DisturbanceLevel, agent_id: int | None = None):
    """Raise when the tracking error exceeds what replanning can absorb."""
    if level is DisturbanceLevel.LARGE:
        raise UnsupportedDisturbanceError(
            f"agent {agent_id}: tracking error too large; recovery planning "
            "is not part of this system"
        )
