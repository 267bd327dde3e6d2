import numpy as np
import pytest

from swarmplan.errors import GoalUnreachableError
from swarmplan.goalplan import AgentMotion, GoalContext, higher_priority_ids, plan_current_goal
from swarmplan.params import PlanningParams
from swarmplan.world import OccupancyGrid

PARAMS = PlanningParams()


def motion(position, goal, horizon_end=None, radius=0.15):
    position = np.asarray(position, dtype=float)
    return AgentMotion(
        position=position,
        horizon_end=position if horizon_end is None else np.asarray(horizon_end, float),
        goal=np.asarray(goal, dtype=float),
        radius=radius,
    )


def empty_grid():
    return OccupancyGrid(0.1, (0, 0, 0), (3.0, 3.0, 2.0))


class TestPriority:
    def test_approaching_closer_agent_outranks(self):
        ctx = GoalContext(
            0,
            {
                0: motion((0.5, 1.5, 1.0), (2.5, 1.5, 1.0)),
                # Agent 1 is closer to its goal, not there yet, and its
                # horizon displacement points at agent 0.
                1: motion((1.5, 1.5, 1.0), (1.0, 2.4, 1.0), horizon_end=(1.2, 1.5, 1.0)),
            },
            PARAMS,
        )
        assert higher_priority_ids(ctx) == {1}

    def test_receding_agent_ignored(self):
        ctx = GoalContext(
            0,
            {
                0: motion((0.5, 1.5, 1.0), (2.5, 1.5, 1.0)),
                1: motion((1.5, 1.5, 1.0), (2.0, 1.5, 1.0), horizon_end=(1.8, 1.5, 1.0)),
            },
            PARAMS,
        )
        assert higher_priority_ids(ctx) == set()

    def test_goal_reached_self_yields_to_active_neighbor(self):
        ctx = GoalContext(
            0,
            {
                0: motion((2.45, 1.5, 1.0), (2.5, 1.5, 1.0)),  # within d_g of goal
                1: motion((1.0, 1.5, 1.0), (0.2, 0.2, 1.0), horizon_end=(0.9, 1.4, 1.0)),
            },
            PARAMS,
        )
        assert higher_priority_ids(ctx) == {1}

    def test_goal_reached_neighbor_demoted(self):
        ctx = GoalContext(
            0,
            {
                0: motion((0.5, 1.5, 1.0), (2.5, 1.5, 1.0)),
                1: motion((1.5, 1.5, 1.0), (1.52, 1.5, 1.0), horizon_end=(1.4, 1.5, 1.0)),
            },
            PARAMS,
        )
        assert higher_priority_ids(ctx) == set()

    def test_antisymmetry_of_distance_rule(self):
        rng = np.random.default_rng(60)
        for _ in range(40):
            pa = rng.uniform(0.3, 2.7, size=3)
            pb = rng.uniform(0.3, 2.7, size=3)
            ga = rng.uniform(0.3, 2.7, size=3)
            gb = rng.uniform(0.3, 2.7, size=3)
            agents = {
                0: motion(pa, ga, horizon_end=pb),  # each moves toward the other
                1: motion(pb, gb, horizon_end=pa),
            }
            sets = [
                higher_priority_ids(GoalContext(0, agents, PARAMS)),
                higher_priority_ids(GoalContext(1, agents, PARAMS)),
            ]
            both_active = agents[0].goal_distance > PARAMS.goal_reach_dist and (
                agents[1].goal_distance > PARAMS.goal_reach_dist
            )
            if both_active:
                # At most one of two approaching active agents can defer.
                assert not (1 in sets[0] and 0 in sets[1])


class TestPlanCurrentGoal:
    def test_single_agent_empty_map(self):
        goal = np.array([2.5, 2.5, 1.5])
        ctx = GoalContext(0, {0: motion((0.5, 0.5, 0.5), goal)}, PARAMS)
        out = plan_current_goal(ctx, empty_grid())
        assert np.array_equal(out, goal)

    def test_repulsion_branch(self):
        # Nearest higher-priority agent at 0.3 < 0.4 triggers a goal at
        # exactly repulsion_dist from it along the separation ray.
        me = np.array([1.5, 1.5, 1.0])
        other = np.array([1.8, 1.5, 1.0])
        ctx = GoalContext(
            0,
            {
                0: motion(me, (2.8, 1.5, 1.0)),
                1: motion(other, (2.4, 1.5, 1.0), horizon_end=(1.7, 1.5, 1.0)),
            },
            PARAMS,
        )
        out = plan_current_goal(ctx, empty_grid())
        assert np.allclose(out, other + 0.5 * np.array([-1.0, 0.0, 0.0]), atol=1e-12)

    def test_repulsion_vertical_stack_pushes_horizontally(self):
        me = np.array([1.5, 1.5, 1.2])
        other = np.array([1.5, 1.5, 1.0])
        ctx = GoalContext(
            0,
            {
                0: motion(me, (2.8, 1.5, 1.2)),
                1: motion(other, (1.5, 2.6, 1.0), horizon_end=(1.5, 1.55, 1.05)),
            },
            PARAMS,
        )
        out = plan_current_goal(ctx, empty_grid())
        assert np.allclose(out, other + np.array([0.5, 0.0, 0.0]), atol=1e-12)

    def test_wall_detour_goal_visible(self):
        grid = OccupancyGrid.from_dict(
            {
                "resolution": 0.1,
                "bounds": {"min": [0, 0, 0], "max": [3, 3, 2]},
                "boxes": [{"min": [1.4, 0.0, 0.0], "max": [1.6, 2.2, 2.0]}],
            }
        )
        start = np.array([0.7, 1.0, 1.0])
        goal = np.array([2.3, 1.0, 1.0])
        ctx = GoalContext(0, {0: motion(start, goal)}, PARAMS)
        out = plan_current_goal(ctx, grid)
        # The wall blocks the straight shot; the chosen goal must be visible
        # from the start and differ from both endpoints.
        assert grid.line_of_sight_free(start, out, 0.15)
        assert not np.allclose(out, goal)
        assert np.linalg.norm(out - start) > 0.2

    def test_agent_blocking_path_forces_detour_goal(self):
        grid = empty_grid()
        start = np.array([0.5, 1.5, 1.0])
        goal = np.array([2.5, 1.5, 1.0])
        blocker = motion(
            (1.5, 1.5, 1.0), (1.5, 0.3, 1.0), horizon_end=(1.4, 1.4, 1.0)
        )
        ctx = GoalContext(0, {0: motion(start, goal), 1: blocker}, PARAMS)
        out = plan_current_goal(ctx, grid)
        seeing = 0.15 - grid.resolution / 4
        assert grid.line_of_sight_free(
            start, out, seeing, [(blocker.position, 0.15)], downwash=PARAMS.downwash
        )

    def test_unreachable_goal_raises(self):
        # Goal sealed inside a closed box.
        grid = OccupancyGrid.from_dict(
            {
                "resolution": 0.1,
                "bounds": {"min": [0, 0, 0], "max": [3, 3, 2]},
                "boxes": [{"min": [1.8, 0.9, 0.4], "max": [2.6, 1.9, 1.4]}],
            }
        )
        occupied = grid.occupied.copy()
        occupied[20:24, 11:17, 6:12] = False  # hollow interior, shell intact
        grid = OccupancyGrid(0.1, (0, 0, 0), (3, 3, 2), occupied)
        ctx = GoalContext(0, {0: motion((0.5, 1.5, 1.0), (2.15, 1.4, 0.9))}, PARAMS)
        with pytest.raises(GoalUnreachableError):
            plan_current_goal(ctx, grid)

    def test_deterministic(self):
        rng = np.random.default_rng(61)
        grid = empty_grid()
        agents = {
            i: motion(
                rng.uniform(0.4, 2.6, size=3) * [1, 1, 0.6],
                rng.uniform(0.4, 2.6, size=3) * [1, 1, 0.6],
                horizon_end=rng.uniform(0.4, 2.6, size=3) * [1, 1, 0.6],
            )
            for i in range(4)
        }
        for i in range(4):
            ctx = GoalContext(i, agents, PARAMS)
            a = plan_current_goal(ctx, grid)
            b = plan_current_goal(ctx, grid)
            assert np.array_equal(a, b)
