"""Shared test fixtures builders."""

from __future__ import annotations

import numpy as np

from swarmplan.bernstein import BernsteinSegment, PiecewiseTrajectory


def random_trajectory(rng, segments=5, degree=5, dt=0.2, start=0.0, scale=1.0):
    """Random C2-smooth piecewise trajectory (mirrors what the QP emits)."""
    segs = []
    prev = None
    for _ in range(segments):
        pts = np.empty((degree + 1, 3))
        if prev is None:
            pts[0] = rng.normal(size=3) * scale
            pts[1] = pts[0] + rng.normal(size=3) * 0.1 * scale
            pts[2] = pts[1] + rng.normal(size=3) * 0.1 * scale
        else:
            # Match position, velocity, and acceleration at the knot.
            pts[0] = prev[-1]
            pts[1] = pts[0] + (prev[-1] - prev[-2])
            pts[2] = 2 * pts[1] - pts[0] + (prev[-1] - 2 * prev[-2] + prev[-3])
        for l in range(3, degree + 1):
            pts[l] = pts[l - 1] + rng.normal(size=3) * 0.1 * scale
        segs.append(BernsteinSegment(pts, dt))
        prev = pts
    return PiecewiseTrajectory(segs, start)
