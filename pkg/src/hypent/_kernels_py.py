"""Pure-Python (numpy) kernel implementations.

This is the reference backend and the import-time fallback when the
compiled extension ``hypent._kernels_c`` is unavailable.  Both backends
expose the same functions with the same numeric conventions:

* all vectors are 1-D float64 arrays, matrices are 2-D float64,
* curvature ``c == 0`` short-circuits to the Euclidean forms,
* atanh arguments are clamped to ``<= 1 - 1e-12``,
* rational denominators carry a ``+ 1e-15`` guard,
* norms below ``1e-15`` are treated as zero (subgradient 0).

Keep formulas and guard values in sync with ``_kernels_c.pyx``.
"""

import math

import numpy as np

BOUNDARY_EPS = 1e-5  # pullback used when projecting onto the ball
ATANH_MAX = 1.0 - 1e-12
DENOM_GUARD = 1e-15
NORM_FLOOR = 1e-15


def mobius_add(c, u, v):
    """Gyrovector addition of u and v in the ball of curvature factor c."""
    if c == 0.0:
        return u + v
    uv = float(u @ v)
    uu = float(u @ u)
    vv = float(v @ v)
    a = 1.0 + 2.0 * c * uv + c * vv
    b = 1.0 - c * uu
    den = 1.0 + 2.0 * c * uv + c * c * uu * vv + DENOM_GUARD
    return (a * u + b * v) / den


def mobius_add_vjp(c, u, v, w, g):
    """Backward of mobius_add: grads w.r.t. u and v given output w and upstream g."""
    if c == 0.0:
        return g.copy(), g.copy()
    uv = float(u @ v)
    uu = float(u @ u)
    vv = float(v @ v)
    a = 1.0 + 2.0 * c * uv + c * vv
    b = 1.0 - c * uu
    den = 1.0 + 2.0 * c * uv + c * c * uu * vv + DENOM_GUARD
    gu_dot = float(g @ u)
    gv_dot = float(g @ v)
    gw_dot = float(g @ w)
    gu = (a * g + 2.0 * c * gu_dot * v - 2.0 * c * gv_dot * u
          - gw_dot * (2.0 * c * v + 2.0 * c * c * vv * u)) / den
    gv = (b * g + 2.0 * c * gu_dot * (u + v)
          - gw_dot * (2.0 * c * u + 2.0 * c * c * uu * v)) / den
    return gu, gv


def mobius_scalar_mul(c, r, v):
    """Scale v by r along its geodesic ray through the origin."""
    if c == 0.0:
        return r * v
    n = math.sqrt(float(v @ v))
    if n < NORM_FLOOR:
        return np.zeros_like(v)
    s = math.sqrt(c)
    arg = min(s * n, ATANH_MAX)
    m = math.tanh(r * math.atanh(arg))
    return (m / (s * n)) * v


def mobius_scalar_mul_vjp(c, r, v, g):
    """Backward of mobius_scalar_mul w.r.t. v (r is a constant)."""
    if c == 0.0:
        return r * g
    n = math.sqrt(float(v @ v))
    if n < NORM_FLOOR:
        # smooth limit: the map behaves like v -> r*v near the origin
        return r * g
    s = math.sqrt(c)
    arg = min(s * n, ATANH_MAX)
    m = math.tanh(r * math.atanh(arg))
    phi = m / (s * n)
    dphi = (1.0 - m * m) * r / (n * (1.0 - arg * arg)) - m / (s * n * n)
    gv_dot = float(g @ v)
    return phi * g + (dphi * gv_dot / n) * v


def hyp_dist(c, u, v):
    """Geodesic distance between u and v (2*||u-v|| in the flat case)."""
    if c == 0.0:
        d = u - v
        return 2.0 * math.sqrt(float(d @ d))
    m = mobius_add(c, -u, v)
    n = math.sqrt(float(m @ m))
    s = math.sqrt(c)
    arg = min(s * n, ATANH_MAX)
    return (2.0 / s) * math.atanh(arg)


def hyp_dist_vjp(c, u, v, g):
    """Backward of hyp_dist; subgradient 0 at coincident points."""
    if c == 0.0:
        d = u - v
        n = math.sqrt(float(d @ d))
        if n < NORM_FLOOR:
            z = np.zeros_like(u)
            return z, z.copy()
        gu = (2.0 * g / n) * d
        return gu, -gu
    m = mobius_add(c, -u, v)
    n = math.sqrt(float(m @ m))
    if n < NORM_FLOOR:
        z = np.zeros_like(u)
        return z, z.copy()
    # d = (2/sqrt(c)) * atanh(sqrt(c)*n): dd/dm = 2/(1 - c n^2) * m/n
    den = max(1.0 - c * n * n, 1e-12)
    gm = (g * 2.0 / (den * n)) * m
    ga, gv = mobius_add_vjp(c, -u, v, m, gm)
    return -ga, gv


def project_ball(c, theta):
    """Rescale theta just inside the ball when it has escaped; identity otherwise."""
    if c == 0.0:
        return theta
    nn = float(theta @ theta)
    if c * nn < 1.0:
        return theta
    n = math.sqrt(nn)
    return theta / (math.sqrt(c) * (n + BOUNDARY_EPS))


def cosine(u, v):
    """Cosine of the ambient angle between u and v; 0 when either is zero."""
    nu = math.sqrt(float(u @ u))
    nv = math.sqrt(float(v @ v))
    if nu < NORM_FLOOR or nv < NORM_FLOOR:
        return 0.0
    return float(u @ v) / (nu * nv)


def cosine_vjp(u, v, g):
    """Backward of cosine; zero-norm inputs get zero gradients."""
    nu = math.sqrt(float(u @ u))
    nv = math.sqrt(float(v @ v))
    if nu < NORM_FLOOR or nv < NORM_FLOOR:
        z = np.zeros_like(u)
        return z, z.copy()
    cval = float(u @ v) / (nu * nv)
    gu = g * (v / (nu * nv) - cval * u / (nu * nu))
    gv = g * (u / (nu * nv) - cval * v / (nv * nv))
    return gu, gv


def affine(W, b, x):
    """Dense layer: W @ x + b."""
    return W @ x + b


def affine_vjp(W, x, g):
    """Backward of affine: gradients for W, b, x."""
    return np.outer(g, x), g.copy(), W.T @ g


def relu(x):
    return np.maximum(x, 0.0)


def relu_vjp(x, g):
    return np.where(x > 0.0, g, 0.0)


def rsgd_update(c, theta, grad, eta):
    """One Riemannian SGD step: metric-inverse rescale, descend, project."""
    nn = float(theta @ theta)
    factor = (1.0 - c * nn)
    step = theta - eta * (factor * factor / 4.0) * grad
    return project_ball(c, step)


def sgd_update(param, grad, eta):
    """Plain in-place gradient step for Euclidean parameters."""
    param -= eta * grad
