"""Closed-form operations on the curvature-parameterized Poincare ball.

A space with curvature factor ``c > 0`` is the open ball
``{x : c*||x||^2 < 1}`` of radius ``1/sqrt(c)``; ``c == 1`` is the unit
ball and ``c == 0`` degenerates to flat Euclidean space (handled as the
analytic limit of every formula).  Points are plain 1-D float64 arrays.

All functions are pure; the heavy lifting lives in the kernel backend.
"""

from dataclasses import dataclass

import numpy as np

from .backend import kernels

BOUNDARY_EPS = 1e-5  # projection pullback; keep in sync with the kernel backends


@dataclass(frozen=True)
class CurvatureSpace:
    """Ambient ball: dimension and non-negative curvature factor."""

    dim: int
    c: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.c < 0.0:
            raise ValueError(f"curvature factor must be >= 0, got {self.c}")

    @property
    def radius(self):
        """Ball radius 1/sqrt(c); infinite for the flat case."""
        return float("inf") if self.c == 0.0 else 1.0 / np.sqrt(self.c)

    def contains(self, x):
        return self.c * float(x @ x) < 1.0


def as_point(x):
    """Coerce to a contiguous 1-D float64 array."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 1:
        raise ValueError(f"expected a 1-D point, got shape {a.shape}")
    return a


def check_point(space, x, name="point"):
    """Validate dimension, finiteness and the ball invariant; return the array."""
    a = as_point(x)
    if a.shape[0] != space.dim:
        raise ValueError(f"{name} has dim {a.shape[0]}, space has dim {space.dim}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite coordinates")
    if not space.contains(a):
        raise ValueError(f"{name} violates the ball invariant c*||x||^2 < 1")
    return a


def mobius_add(space, u, v):
    """u (+) v, the noncommutative and nonassociative gyrovector sum."""
    u = check_point(space, u, "u")
    v = check_point(space, v, "v")
    return kernels.mobius_add(space.c, u, v)


def mobius_scalar_mul(space, r, v):
    """r (x) v, scaling along the geodesic ray through the origin; r (x) 0 = 0."""
    v = check_point(space, v, "v")
    return kernels.mobius_scalar_mul(space.c, float(r), v)


def distance(space, u, v):
    """Geodesic distance (2/sqrt(c)) * atanh(sqrt(c) * ||(-u) (+) v||).

    Symmetric, zero iff u == v; for c == 0 this is the limit 2*||u - v||.
    """
    u = check_point(space, u, "u")
    v = check_point(space, v, "v")
    return kernels.hyp_dist(space.c, u, v)


def project(space, theta):
    """Pull theta back just inside the ball if it escaped; no-op otherwise."""
    theta = as_point(theta)
    if not np.all(np.isfinite(theta)):
        raise ValueError("cannot project non-finite coordinates")
    return kernels.project_ball(space.c, theta)


def geodesic_point(space, a, b, t):
    """Point at parameter t on the geodesic through a (t=0) and b (t=1)."""
    a = check_point(space, a, "a")
    b = check_point(space, b, "b")
    c = space.c
    direction = kernels.mobius_add(c, -a, b)
    return kernels.mobius_add(c, a, kernels.mobius_scalar_mul(c, float(t), direction))


def cosine(u, v):
    """Cosine of the ambient angle between u and v; 0 if either is the origin."""
    u = as_point(u)
    v = as_point(v)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    return kernels.cosine(u, v)
