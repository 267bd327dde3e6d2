"""Per-agent convex QP: assembly and a deterministic active-set solver.

The decision vector stacks all control points of one agent's trajectory,
x[(m*(n+1) + l)*3 + axis]. The objective trades goal tracking at segment
endpoints against integrated squared jerk. Equalities pin the initial state,
enforce acceleration-level continuity at interior knots, and hold the final
segment constant; inequalities bound derivative control points per axis and
confine control points to the safe boxes and separating half-spaces.

The solver eliminates equalities through an orthonormal nullspace basis and
runs a primal active-set method on the reduced strictly convex problem. A
feasible warm start always exists for planner problems (the shifted previous
trajectory), every linear solve is direct with one step of iterative
refinement, and all tie-breaks are by lowest row index, so results are
deterministic and residuals reach solver precision rather than a first-order
method's tolerance floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from swarmplan.bernstein import PiecewiseTrajectory
from swarmplan.errors import QpInfeasibleError

_ZERO_ROW_TOL = 1e-300


def difference_operator(degree: int, duration: float) -> np.ndarray:
    """Matrix mapping segment control points to derivative control points."""
    op = np.zeros((degree, degree + 1))
    scale = degree / duration
    for l in range(degree):
        op[l, l] = -scale
        op[l, l + 1] = scale
    return op


def basis_product_integrals(degree: int) -> np.ndarray:
    """B[i, j] = integral over [0,1] of b_{i,p} b_{j,p} for p = degree."""
    p = degree
    out = np.empty((p + 1, p + 1))
    for i in range(p + 1):
        for j in range(p + 1):
            out[i, j] = (
                math.comb(p, i)
                * math.comb(p, j)
                / math.comb(2 * p, i + j)
                / (2 * p + 1)
            )
    return out


def jerk_gram_matrix(degree: int, duration: float) -> np.ndarray:
    """Closed-form Gram matrix of the integrated squared jerk of one segment.

    With D the three-fold difference operator and B the Bernstein product
    integrals of degree n-3, the jerk energy is duration * c^T D^T B D c per
    axis. Degrees below 3 have zero jerk everywhere.
    """
    n = degree
    if n < 3:
        return np.zeros((n + 1, n + 1))
    d3 = (
        difference_operator(n - 2, duration)
        @ difference_operator(n - 1, duration)
        @ difference_operator(n, duration)
    )
    return duration * d3.T @ basis_product_integrals(n - 3) @ d3


@dataclass
class ResidualReport:
    """Exact constraint residuals of a candidate point."""

    max_equality_residual: float
    max_inequality_violation: float
    group_violations: dict[str, float]

    def max_violation(self) -> float:
        return max(self.max_equality_residual, self.max_inequality_violation)


@dataclass
class QpProblem:
    """Dense convex QP: minimize 0.5 x'Px + q'x + c0 subject to
    eq_matrix x = eq_rhs and ineq_matrix x <= ineq_rhs."""

    quadratic: np.ndarray
    linear: np.ndarray
    constant: float
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray
    ineq_matrix: np.ndarray
    ineq_rhs: np.ndarray
    groups: dict[str, slice] = field(default_factory=dict)
    cache: "ParamMatrices | None" = None

    @property
    def dimension(self) -> int:
        return len(self.linear)

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.quadratic @ x + self.linear @ x + self.constant)

    def check(self, x) -> ResidualReport:
        """Recompute residuals of every row at x (never trusts the solver)."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise ValueError(f"candidate has shape {x.shape}, expected ({self.dimension},)")
        eq = 0.0
        if len(self.eq_rhs):
            eq = float(np.max(np.abs(self.eq_matrix @ x - self.eq_rhs)))
        viol = self.ineq_matrix @ x - self.ineq_rhs if len(self.ineq_rhs) else np.zeros(0)
        groups = {
            name: float(np.max(viol[sl])) if viol[sl].size else 0.0
            for name, sl in self.groups.items()
        }
        max_ineq = float(np.max(viol)) if viol.size else 0.0
        return ResidualReport(eq, max_ineq, groups)

    def validate(self):
        """Check the structural invariants (symmetry, positive semidefiniteness)."""
        scale = max(1.0, float(np.max(np.abs(self.quadratic))))
        asym = float(np.max(np.abs(self.quadratic - self.quadratic.T)))
        if asym > 1e-12 * scale:
            raise ValueError(f"quadratic cost asymmetric by {asym:.3e}")
        eigmin = float(np.linalg.eigvalsh(self.quadratic)[0])
        if eigmin < -1e-9 * scale:
            raise ValueError(f"quadratic cost indefinite, min eigenvalue {eigmin:.3e}")


@dataclass
class QpSolution:
    values: np.ndarray
    objective: float
    max_equality_residual: float
    max_inequality_violation: float
    stationarity_residual: float
    iterations: int


class ParamMatrices:
    """Static assembly pieces for one parameter set (shared across steps)."""

    def __init__(self, params):
        n = params.degree
        m_count = params.segment_count
        dt = params.segment_time
        self.params = params
        self.dim = 3 * m_count * (n + 1)
        pts_per_seg = n + 1

        def idx(m, l, axis):
            return ((m * pts_per_seg + l) * 3) + axis

        self.idx = idx

        # Quadratic cost: jerk energy plus goal-endpoint weights (static; the
        # goal position only enters the linear term).
        gram = jerk_gram_matrix(n, dt)
        p_mat = np.zeros((self.dim, self.dim))
        for m in range(m_count):
            base = m * pts_per_seg * 3
            block = 2.0 * params.jerk_weight * np.kron(gram, np.eye(3))
            p_mat[base : base + pts_per_seg * 3, base : base + pts_per_seg * 3] += block
        for m in range(m_count):
            w = params.goal_weights[m]
            for axis in range(3):
                p_mat[idx(m, n, axis), idx(m, n, axis)] += 2.0 * w
        self.quadratic = p_mat
        self.goal_indices = np.array(
            [[idx(m, n, axis) for axis in range(3)] for m in range(m_count)]
        )

        # Equalities: 9 initial-state rows, 9 per interior knot, 3n terminal.
        rows = []
        r = np.zeros((9, self.dim))
        for axis in range(3):
            r[axis, idx(0, 0, axis)] = 1.0
            r[3 + axis, idx(0, 1, axis)] = 1.0
            r[3 + axis, idx(0, 0, axis)] = -1.0
            r[6 + axis, idx(0, 2, axis)] = 1.0
            r[6 + axis, idx(0, 1, axis)] = -2.0
            r[6 + axis, idx(0, 0, axis)] = 1.0
        rows.append(r)
        for m in range(m_count - 1):
            r = np.zeros((9, self.dim))
            for axis in range(3):
                r[axis, idx(m, n, axis)] = 1.0
                r[axis, idx(m + 1, 0, axis)] = -1.0
                r[3 + axis, idx(m, n, axis)] = 1.0
                r[3 + axis, idx(m, n - 1, axis)] = -1.0
                r[3 + axis, idx(m + 1, 1, axis)] = -1.0
                r[3 + axis, idx(m + 1, 0, axis)] = 1.0
                r[6 + axis, idx(m, n, axis)] = 1.0
                r[6 + axis, idx(m, n - 1, axis)] = -2.0
                r[6 + axis, idx(m, n - 2, axis)] = 1.0
                r[6 + axis, idx(m + 1, 2, axis)] = -1.0
                r[6 + axis, idx(m + 1, 1, axis)] = 2.0
                r[6 + axis, idx(m + 1, 0, axis)] = -1.0
            rows.append(r)
        r = np.zeros((3 * n, self.dim))
        for l in range(1, n + 1):
            for axis in range(3):
                r[(l - 1) * 3 + axis, idx(m_count - 1, l, axis)] = 1.0
                r[(l - 1) * 3 + axis, idx(m_count - 1, 0, axis)] = -1.0
        rows.append(r)
        self.eq_matrix = np.vstack(rows)
        self.initial_rows = slice(0, 9)

        # Dynamic limits on derivative control points, one pair of rows per
        # point and axis.
        vel_rows = []
        vel_rhs = []
        k1 = n / dt
        for m in range(m_count):
            for l in range(n):
                for axis in range(3):
                    row = np.zeros(self.dim)
                    row[idx(m, l + 1, axis)] = k1
                    row[idx(m, l, axis)] = -k1
                    vel_rows.append(row)
                    vel_rhs.append(params.max_velocity[axis])
                    vel_rows.append(-row)
                    vel_rhs.append(params.max_velocity[axis])
        acc_rows = []
        acc_rhs = []
        k2 = n * (n - 1) / dt / dt
        for m in range(m_count):
            for l in range(n - 1):
                for axis in range(3):
                    row = np.zeros(self.dim)
                    row[idx(m, l + 2, axis)] = k2
                    row[idx(m, l + 1, axis)] = -2.0 * k2
                    row[idx(m, l, axis)] = k2
                    acc_rows.append(row)
                    acc_rhs.append(params.max_acceleration[axis])
                    acc_rows.append(-row)
                    acc_rhs.append(params.max_acceleration[axis])
        self.dyn_matrix = np.vstack([np.array(vel_rows), np.array(acc_rows)])
        self.dyn_rhs = np.array(vel_rhs + acc_rhs)
        self.velocity_rows = slice(0, len(vel_rhs))
        self.acceleration_rows = slice(len(vel_rhs), len(vel_rhs) + len(acc_rhs))

        # Safe-box rows: +-1 coefficient per control point and axis; the
        # right-hand side comes from the step's corridor.
        box_rows = []
        for m in range(m_count):
            for l in range(pts_per_seg):
                for axis in range(3):
                    row = np.zeros(self.dim)
                    row[idx(m, l, axis)] = 1.0
                    box_rows.append(row)
                    box_rows.append(-row)
        self.box_matrix = np.vstack(box_rows)

        # Nullspace machinery for the solver, shared across steps.
        self.eq_pinv = np.linalg.pinv(self.eq_matrix)
        u, s, vt = np.linalg.svd(self.eq_matrix)
        rank = int(np.sum(s > s[0] * 1e-12))
        self.nullspace = vt[rank:].T
        self.reduced_quadratic = self.nullspace.T @ self.quadratic @ self.nullspace
        self.dyn_reduced = self.dyn_matrix @ self.nullspace
        self.box_reduced = self.box_matrix @ self.nullspace

        # Column triples of each (segment, point) block, for fast separation
        # row fills, plus cached full inequality templates per neighbor count.
        self.sep_cols = np.array(
            [
                [idx(m, l, axis) for axis in range(3)]
                for m in range(m_count)
                for l in range(pts_per_seg)
            ]
        )
        self._ineq_templates: dict[int, np.ndarray] = {}

    def ineq_template(self, separation_rows: int) -> np.ndarray:
        """Full inequality matrix with zeroed separation rows (copy per use)."""
        cached = self._ineq_templates.get(separation_rows)
        if cached is None:
            n_static = self.dyn_matrix.shape[0] + self.box_matrix.shape[0]
            cached = np.zeros((n_static + separation_rows, self.dim))
            cached[: self.dyn_matrix.shape[0]] = self.dyn_matrix
            cached[self.dyn_matrix.shape[0] : n_static] = self.box_matrix
            cached.setflags(write=False)
            self._ineq_templates[separation_rows] = cached
        return cached.copy()


_MATRIX_CACHE: dict = {}


def param_matrices(params) -> ParamMatrices:
    cached = _MATRIX_CACHE.get(params)
    if cached is None:
        cached = ParamMatrices(params)
        _MATRIX_CACHE[params] = cached
    return cached


def assemble(
    init_traj: PiecewiseTrajectory,
    goal,
    corridor,
    separations,
    params,
) -> tuple[QpProblem, np.ndarray]:
    """Build the step QP around the shifted trajectory.

    Returns the problem and the candidate decision vector (the stacked
    control points of init_traj). The initial-state rows take their
    right-hand side from the candidate itself, which is exactly the desired
    state carried over from the previous plan.
    """
    if init_traj.degree != params.degree or init_traj.segment_count != params.segment_count:
        raise ValueError("trajectory shape does not match parameters")
    if len(corridor.boxes) != params.segment_count:
        raise ValueError("corridor length does not match parameters")
    mats = param_matrices(params)
    n = params.degree
    m_count = params.segment_count
    pts_per_seg = n + 1

    candidate = init_traj.control_point_stack().reshape(-1)
    goal = np.asarray(goal, dtype=float).reshape(3)

    linear = np.zeros(mats.dim)
    constant = 0.0
    for m in range(m_count):
        w = params.goal_weights[m]
        linear[mats.goal_indices[m]] = -2.0 * w * goal
        constant += w * float(goal @ goal)

    eq_rhs = np.zeros(mats.eq_matrix.shape[0])
    eq_rhs[mats.initial_rows] = mats.eq_matrix[mats.initial_rows] @ candidate

    # Box rows per (m, l, axis) are interleaved (upper, lower).
    his = np.array([box.hi for box in corridor.boxes])  # (M, 3)
    los = np.array([box.lo for box in corridor.boxes])
    box_pairs = np.empty((m_count, pts_per_seg, 3, 2))
    box_pairs[..., 0] = his[:, None, :]
    box_pairs[..., 1] = -los[:, None, :]
    box_rhs = box_pairs.reshape(-1)

    n_dyn = len(mats.dyn_rhs)
    n_box = len(box_rhs)
    rows_per_pair = m_count * pts_per_seg
    n_sep = len(separations) * rows_per_pair
    ineq = mats.ineq_template(n_sep)
    ineq_rhs = np.empty(n_dyn + n_box + n_sep)
    ineq_rhs[:n_dyn] = mats.dyn_rhs
    ineq_rhs[n_dyn : n_dyn + n_box] = box_rhs
    for p, pair in enumerate(separations):
        if len(pair.segments) != m_count:
            raise ValueError("separation constraint length does not match parameters")
        normals = np.stack([seg.normal for seg in pair.segments])  # (M, 3)
        offsets = np.stack(
            [seg.anchors @ seg.normal + seg.margins for seg in pair.segments]
        )  # (M, n+1)
        base = n_dyn + n_box + p * rows_per_pair
        row_idx = base + np.arange(rows_per_pair)
        ineq[row_idx[:, None], mats.sep_cols] = -np.repeat(normals, pts_per_seg, axis=0)
        ineq_rhs[row_idx] = -offsets.reshape(-1)

    groups = {
        "velocity": slice(mats.velocity_rows.start, mats.velocity_rows.stop),
        "acceleration": slice(mats.acceleration_rows.start, mats.acceleration_rows.stop),
        "safe_box": slice(n_dyn, n_dyn + n_box),
        "separation": slice(n_dyn + n_box, n_dyn + n_box + n_sep),
    }
    problem = QpProblem(
        quadratic=mats.quadratic,
        linear=linear,
        constant=constant,
        eq_matrix=mats.eq_matrix,
        eq_rhs=eq_rhs,
        ineq_matrix=ineq,
        ineq_rhs=ineq_rhs,
        groups=groups,
        cache=mats,
    )
    return problem, candidate


def trajectory_from_values(values, params, start_time: float) -> PiecewiseTrajectory:
    """Decode a decision vector back into a piecewise trajectory."""
    from swarmplan.bernstein import BernsteinSegment

    n = params.degree
    pts = np.asarray(values, dtype=float).reshape(params.segment_count, n + 1, 3)
    segs = [BernsteinSegment(p, params.segment_time) for p in pts]
    return PiecewiseTrajectory(segs, start_time)


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------


def solve(
    problem: QpProblem,
    tol: float = 1e-6,
    warm_start=None,
    max_iterations: int | None = None,
) -> QpSolution:
    """Solve the QP to within tol on feasibility and relative stationarity.

    Equalities are eliminated through an orthonormal nullspace; the reduced
    problem is handled by a primal active-set iteration warm-started at
    `warm_start` when given (a phase-1 subproblem constructs a feasible point
    otherwise). Raises QpInfeasibleError when the iteration budget is
    exhausted or no point within tolerance exists.
    """
    dim = problem.dimension
    me = len(problem.eq_rhs)
    mi = len(problem.ineq_rhs)
    if max_iterations is None:
        max_iterations = 3 * mi + 120
    if max_iterations <= 0:
        raise QpInfeasibleError("iteration budget exhausted before solving", 0)

    # Relative scaling keeps stationarity measures meaningful when the jerk
    # Gram entries are large.
    sigma = max(1.0, float(np.max(np.abs(problem.quadratic))) if dim else 1.0)

    if me:
        cache = problem.cache
        if cache is not None and cache.eq_matrix is problem.eq_matrix:
            x_part = cache.eq_pinv @ problem.eq_rhs
            null = cache.nullspace
        else:
            pinv = np.linalg.pinv(problem.eq_matrix)
            x_part = pinv @ problem.eq_rhs
            u, s, vt = np.linalg.svd(problem.eq_matrix)
            rank = int(np.sum(s > s[0] * 1e-12)) if len(s) else 0
            null = vt[rank:].T
        eq_err = float(np.max(np.abs(problem.eq_matrix @ x_part - problem.eq_rhs)))
        if eq_err > max(tol, 1e-9) * (1.0 + float(np.max(np.abs(problem.eq_rhs)))):
            raise QpInfeasibleError(f"inconsistent equality constraints ({eq_err:.3e})", 0)
    else:
        x_part = np.zeros(dim)
        null = np.eye(dim)

    k = null.shape[1]
    if k == 0:
        return _package(problem, x_part, 0, tol, stationarity=0.0)

    if me and problem.cache is not None and problem.cache.eq_matrix is problem.eq_matrix:
        h_red = problem.cache.reduced_quadratic / sigma
    else:
        h_red = null.T @ problem.quadratic @ null / sigma
    h_red = 0.5 * (h_red + h_red.T)
    reg = 1e-13 * max(1.0, float(np.trace(h_red)) / k)
    while True:
        try:
            np.linalg.cholesky(h_red)
            break
        except np.linalg.LinAlgError:
            h_red = h_red + reg * np.eye(k)
            reg *= 100.0
            if reg > 1e-3:
                raise QpInfeasibleError("quadratic cost is not positive definite", 0)
    f_red = null.T @ (problem.quadratic @ x_part + problem.linear) / sigma

    if mi:
        cache = problem.cache
        if cache is not None and cache.eq_matrix is problem.eq_matrix:
            n_static = len(cache.dyn_rhs) + cache.box_matrix.shape[0]
            extra = problem.ineq_matrix[n_static:]
            c_red = np.vstack([cache.dyn_reduced, cache.box_reduced, extra @ null])
        else:
            c_red = problem.ineq_matrix @ null
        d_red = problem.ineq_rhs - problem.ineq_matrix @ x_part
        row_norms = np.linalg.norm(problem.ineq_matrix, axis=1)
        if np.any(row_norms <= _ZERO_ROW_TOL):
            bad = np.nonzero(row_norms <= _ZERO_ROW_TOL)[0]
            if np.any(problem.ineq_rhs[bad] < -tol):
                raise QpInfeasibleError("zero inequality row with negative bound", 0)
            keep = row_norms > _ZERO_ROW_TOL
            c_red, d_red, row_norms = c_red[keep], d_red[keep], row_norms[keep]
        c_red = c_red / row_norms[:, None]
        d_red = d_red / row_norms
    else:
        c_red = np.zeros((0, k))
        d_red = np.zeros(0)

    iterations = 0
    if warm_start is not None:
        y0 = null.T @ (np.asarray(warm_start, dtype=float) - x_part)
    else:
        y0 = _refined_solve(h_red, -f_red)
    if len(d_red):
        worst = float(np.max(c_red @ y0 - d_red))
        # The slack subproblem anchors softly at the previous point, which
        # biases its optimum off feasibility in proportion to that distance;
        # re-anchoring shrinks the bias geometrically.
        for _ in range(4):
            if worst <= 1e-7:
                break
            y0, phase_iters = _phase_one(h_red, c_red, d_red, y0, max_iterations)
            iterations += phase_iters
            worst = float(np.max(c_red @ y0 - d_red))
        if worst > 1e-7:
            raise QpInfeasibleError(
                f"no feasible point found (violation {worst:.3e})", iterations
            )

    y, working, lam, used, ok = _active_set(h_red, f_red, c_red, d_red, y0, max_iterations)
    iterations += used
    if not ok:
        raise QpInfeasibleError("active-set iteration budget exhausted", iterations)

    # Stationarity straight from the terminating KKT system of the scaled
    # reduced problem; tiny negative multipliers within the optimality
    # tolerance are clipped.
    stat_vec = h_red @ y + f_red
    if working:
        stat_vec = stat_vec + c_red[working].T @ np.maximum(lam, 0.0)
    stationarity = float(np.max(np.abs(stat_vec)))
    x = x_part + null @ y
    return _package(problem, x, iterations, tol, stationarity)


def _package(problem, x, iterations, tol, stationarity) -> QpSolution:
    report = problem.check(x)
    solution = QpSolution(
        values=x,
        objective=problem.objective(x),
        max_equality_residual=report.max_equality_residual,
        max_inequality_violation=report.max_inequality_violation,
        stationarity_residual=stationarity,
        iterations=iterations,
    )
    if (
        solution.max_equality_residual > tol
        or solution.max_inequality_violation > tol
        or solution.stationarity_residual > tol
    ):
        raise QpInfeasibleError(
            f"solution outside tolerance (eq {solution.max_equality_residual:.2e}, "
            f"ineq {solution.max_inequality_violation:.2e}, "
            f"stat {solution.stationarity_residual:.2e})",
            iterations,
        )
    return solution


def _refined_solve(a, b):
    """Direct solve with one iterative-refinement pass."""
    z = np.linalg.solve(a, b)
    z += np.linalg.solve(a, b - a @ z)
    return z


def _active_set(h, f, c, d, y0, max_iterations):
    """Primal active-set iteration on min 0.5 y'Hy + f'y s.t. Cy <= d.

    Requires a feasible y0. Blocking constraints enter by lowest row index
    among minimal step ratios; constraints leave by most negative multiplier,
    switching to lowest-index (Bland-style) after a long degenerate streak.
    """
    k = len(y0)
    mi = len(d)
    y = np.array(y0, dtype=float)
    working: list[int] = []
    in_working = np.zeros(mi, dtype=bool)
    zero_streak = 0
    bland = False
    iterations = 0

    while iterations < max_iterations:
        iterations += 1
        grad = h @ y + f
        nw = len(working)
        if nw:
            kkt = np.zeros((k + nw, k + nw))
            kkt[:k, :k] = h
            rows = c[working]
            kkt[:k, k:] = rows.T
            kkt[k:, :k] = rows
            # The lower block restores working rows to their boundaries, so
            # epsilon-level drift (e.g. from phase 1) cannot persist.
            rhs = np.concatenate([-grad, d[working] - rows @ y])
            try:
                z = _refined_solve(kkt, rhs)
            except np.linalg.LinAlgError:
                z, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            p = z[:k]
            lam = z[k:]
        else:
            p = _refined_solve(h, -grad)
            lam = np.zeros(0)

        if float(np.max(np.abs(p))) <= 1e-11 * (1.0 + float(np.max(np.abs(y)))):
            if nw == 0:
                return y, working, lam, iterations, True
            if bland:
                negative = [i for i, v in enumerate(lam) if v < -1e-9]
                if not negative:
                    return y, working, lam, iterations, True
                drop = min(negative, key=lambda i: working[i])
            else:
                drop = int(np.argmin(lam))
                if lam[drop] >= -1e-9:
                    return y, working, lam, iterations, True
            in_working[working[drop]] = False
            working.pop(drop)
            continue

        step = 1.0
        blocking = -1
        if mi:
            cp = c @ p
            candidates = np.nonzero(~in_working & (cp > 1e-12))[0]
            if len(candidates):
                slack = np.maximum(d[candidates] - c[candidates] @ y, 0.0)
                ratios = slack / cp[candidates]
                best = float(np.min(ratios))
                if best < 1.0:
                    step = best
                    hit = candidates[ratios <= best + 1e-12 * (1.0 + best)]
                    blocking = int(np.min(hit))
        y = y + step * p
        if blocking >= 0:
            working.append(blocking)
            in_working[blocking] = True
            if step <= 1e-14:
                zero_streak += 1
                if zero_streak > k + 16:
                    bland = True
            else:
                zero_streak = 0
    return y, working, np.zeros(len(working)), iterations, False


def _phase_one(h, c, d, y0, max_iterations):
    """Feasible point of {Cy <= d} via a strictly convex slack problem."""
    k = len(y0)
    viol = c @ y0 - d
    violated = np.nonzero(viol > 0.0)[0]
    nv = len(violated)
    if nv == 0:
        return y0, 0
    scale = max(1.0, float(np.trace(h)) / k)
    eps = 1e-10 * scale
    h1 = np.zeros((k + nv, k + nv))
    h1[:k, :k] = eps * np.eye(k)
    h1[k:, k:] = np.eye(nv)
    f1 = np.concatenate([-eps * y0, np.zeros(nv)])

    rows = []
    rhs = []
    for slot, row_idx in enumerate(violated):
        row = np.zeros(k + nv)
        row[:k] = c[row_idx]
        row[k + slot] = -1.0
        rows.append(row)
        rhs.append(d[row_idx])
        srow = np.zeros(k + nv)
        srow[k + slot] = -1.0
        rows.append(srow)
        rhs.append(0.0)
    satisfied = np.nonzero(viol <= 0.0)[0]
    for row_idx in satisfied:
        row = np.zeros(k + nv)
        row[:k] = c[row_idx]
        rows.append(row)
        rhs.append(d[row_idx])
    c1 = np.vstack(rows)
    d1 = np.array(rhs)
    u0 = np.concatenate([y0, viol[violated] + 1.0])
    u, _, _, iterations, ok = _active_set(h1, f1, c1, d1, u0, max(max_iterations, 4 * len(d1)))
    if not ok:
        raise QpInfeasibleError("phase-1 iteration budget exhausted", iterations)
    return u[:k], iterations
