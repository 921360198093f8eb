# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel core.

Mirrors hypent._kernels_py function-for-function; keep formulas and the
guard constants below in sync with that module.
"""

import numpy as np

from libc.math cimport atanh, fabs, sqrt, tanh

cdef double BOUNDARY_EPS = 1e-5
cdef double ATANH_MAX = 1.0 - 1e-12
cdef double DENOM_GUARD = 1e-15
cdef double NORM_FLOOR = 1e-15


cdef inline double _dot(double[::1] a, double[::1] b) nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


def mobius_add(double c, double[::1] u, double[::1] v):
    cdef Py_ssize_t i, n = u.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double uv, uu, vv, a, b, den
    if c == 0.0:
        for i in range(n):
            o[i] = u[i] + v[i]
        return out
    uv = _dot(u, v)
    uu = _dot(u, u)
    vv = _dot(v, v)
    a = 1.0 + 2.0 * c * uv + c * vv
    b = 1.0 - c * uu
    den = 1.0 + 2.0 * c * uv + c * c * uu * vv + DENOM_GUARD
    for i in range(n):
        o[i] = (a * u[i] + b * v[i]) / den
    return out


def mobius_add_vjp(double c, double[::1] u, double[::1] v, double[::1] w, double[::1] g):
    cdef Py_ssize_t i, n = u.shape[0]
    gu_arr = np.empty(n)
    gv_arr = np.empty(n)
    cdef double[::1] gu = gu_arr
    cdef double[::1] gv = gv_arr
    cdef double uv, uu, vv, a, b, den, gud, gvd, gwd
    if c == 0.0:
        for i in range(n):
            gu[i] = g[i]
            gv[i] = g[i]
        return gu_arr, gv_arr
    uv = _dot(u, v)
    uu = _dot(u, u)
    vv = _dot(v, v)
    a = 1.0 + 2.0 * c * uv + c * vv
    b = 1.0 - c * uu
    den = 1.0 + 2.0 * c * uv + c * c * uu * vv + DENOM_GUARD
    gud = _dot(g, u)
    gvd = _dot(g, v)
    gwd = _dot(g, w)
    for i in range(n):
        gu[i] = (a * g[i] + 2.0 * c * gud * v[i] - 2.0 * c * gvd * u[i]
                 - gwd * (2.0 * c * v[i] + 2.0 * c * c * vv * u[i])) / den
        gv[i] = (b * g[i] + 2.0 * c * gud * (u[i] + v[i])
                 - gwd * (2.0 * c * u[i] + 2.0 * c * c * uu * v[i])) / den
    return gu_arr, gv_arr


def mobius_scalar_mul(double c, double r, double[::1] v):
    cdef Py_ssize_t i, n = v.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double nrm, s, arg, m, scl
    if c == 0.0:
        for i in range(n):
            o[i] = r * v[i]
        return out
    nrm = sqrt(_dot(v, v))
    if nrm < NORM_FLOOR:
        for i in range(n):
            o[i] = 0.0
        return out
    s = sqrt(c)
    arg = s * nrm
    if arg > ATANH_MAX:
        arg = ATANH_MAX
    m = tanh(r * atanh(arg))
    scl = m / (s * nrm)
    for i in range(n):
        o[i] = scl * v[i]
    return out


def mobius_scalar_mul_vjp(double c, double r, double[::1] v, double[::1] g):
    cdef Py_ssize_t i, n = v.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double nrm, s, arg, m, phi, dphi, gvd
    if c == 0.0:
        for i in range(n):
            o[i] = r * g[i]
        return out
    nrm = sqrt(_dot(v, v))
    if nrm < NORM_FLOOR:
        for i in range(n):
            o[i] = r * g[i]
        return out
    s = sqrt(c)
    arg = s * nrm
    if arg > ATANH_MAX:
        arg = ATANH_MAX
    m = tanh(r * atanh(arg))
    phi = m / (s * nrm)
    dphi = (1.0 - m * m) * r / (nrm * (1.0 - arg * arg)) - m / (s * nrm * nrm)
    gvd = _dot(g, v)
    for i in range(n):
        o[i] = phi * g[i] + (dphi * gvd / nrm) * v[i]
    return out


def hyp_dist(double c, double[::1] u, double[::1] v):
    cdef Py_ssize_t i, n = u.shape[0]
    cdef double s, arg, nrm = 0.0
    cdef double d
    if c == 0.0:
        for i in range(n):
            d = u[i] - v[i]
            nrm += d * d
        return 2.0 * sqrt(nrm)
    m = mobius_add(c, np.negative(u), v)
    cdef double[::1] mv = m
    nrm = sqrt(_dot(mv, mv))
    s = sqrt(c)
    arg = s * nrm
    if arg > ATANH_MAX:
        arg = ATANH_MAX
    return (2.0 / s) * atanh(arg)


def hyp_dist_vjp(double c, double[::1] u, double[::1] v, double g):
    cdef Py_ssize_t i, n = u.shape[0]
    gu_arr = np.empty(n)
    gv_arr = np.empty(n)
    cdef double[::1] gu = gu_arr
    cdef double[::1] gv = gv_arr
    cdef double nrm, den, scl
    if c == 0.0:
        nrm = 0.0
        for i in range(n):
            scl = u[i] - v[i]
            nrm += scl * scl
        nrm = sqrt(nrm)
        if nrm < NORM_FLOOR:
            for i in range(n):
                gu[i] = 0.0
                gv[i] = 0.0
            return gu_arr, gv_arr
        for i in range(n):
            gu[i] = (2.0 * g / nrm) * (u[i] - v[i])
            gv[i] = -gu[i]
        return gu_arr, gv_arr
    neg_u = np.negative(u)
    m = mobius_add(c, neg_u, v)
    cdef double[::1] mv = m
    nrm = sqrt(_dot(mv, mv))
    if nrm < NORM_FLOOR:
        for i in range(n):
            gu[i] = 0.0
            gv[i] = 0.0
        return gu_arr, gv_arr
    den = 1.0 - c * nrm * nrm
    if den < 1e-12:
        den = 1e-12
    gm = np.empty(n)
    cdef double[::1] gmv = gm
    for i in range(n):
        gmv[i] = (g * 2.0 / (den * nrm)) * mv[i]
    ga_arr, gv_out = mobius_add_vjp(c, neg_u, v, m, gm)
    cdef double[::1] ga = ga_arr
    cdef double[::1] gvo = gv_out
    for i in range(n):
        gu[i] = -ga[i]
        gv[i] = gvo[i]
    return gu_arr, gv_arr


def project_ball(double c, theta):
    cdef double[::1] t = theta
    cdef Py_ssize_t i, n = t.shape[0]
    cdef double nn, nrm
    if c == 0.0:
        return theta
    nn = _dot(t, t)
    if c * nn < 1.0:
        return theta
    nrm = sqrt(nn)
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = t[i] / (sqrt(c) * (nrm + BOUNDARY_EPS))
    return out


def cosine(double[::1] u, double[::1] v):
    cdef double nu = sqrt(_dot(u, u))
    cdef double nv = sqrt(_dot(v, v))
    if nu < NORM_FLOOR or nv < NORM_FLOOR:
        return 0.0
    return _dot(u, v) / (nu * nv)


def cosine_vjp(double[::1] u, double[::1] v, double g):
    cdef Py_ssize_t i, n = u.shape[0]
    gu_arr = np.empty(n)
    gv_arr = np.empty(n)
    cdef double[::1] gu = gu_arr
    cdef double[::1] gv = gv_arr
    cdef double nu = sqrt(_dot(u, u))
    cdef double nv = sqrt(_dot(v, v))
    cdef double cval
    if nu < NORM_FLOOR or nv < NORM_FLOOR:
        for i in range(n):
            gu[i] = 0.0
            gv[i] = 0.0
        return gu_arr, gv_arr
    cval = _dot(u, v) / (nu * nv)
    for i in range(n):
        gu[i] = g * (v[i] / (nu * nv) - cval * u[i] / (nu * nu))
        gv[i] = g * (u[i] / (nu * nv) - cval * v[i] / (nv * nv))
    return gu_arr, gv_arr


def affine(W, b, x):
    cdef Py_ssize_t i, j, rows = W.shape[0], cols = W.shape[1]
    if rows * cols >= 8192:
        # BLAS wins over the naive loop for large layers
        return W @ x + b
    cdef double[:, ::1] Wv = W
    cdef double[::1] bv = b
    cdef double[::1] xv = x
    out = np.empty(rows)
    cdef double[::1] o = out
    cdef double s
    for i in range(rows):
        s = bv[i]
        for j in range(cols):
            s += Wv[i, j] * xv[j]
        o[i] = s
    return out


def affine_vjp(double[:, ::1] W, double[::1] x, double[::1] g):
    cdef Py_ssize_t i, j, rows = W.shape[0], cols = W.shape[1]
    gW = np.empty((rows, cols))
    gb = np.empty(rows)
    gx = np.zeros(cols)
    cdef double[:, ::1] gWv = gW
    cdef double[::1] gbv = gb
    cdef double[::1] gxv = gx
    cdef double gi
    for i in range(rows):
        gi = g[i]
        gbv[i] = gi
        for j in range(cols):
            gWv[i, j] = gi * x[j]
            gxv[j] += W[i, j] * gi
    return gW, gb, gx


def relu(double[::1] x):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = x[i] if x[i] > 0.0 else 0.0
    return out


def relu_vjp(double[::1] x, double[::1] g):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = g[i] if x[i] > 0.0 else 0.0
    return out


def rsgd_update(double c, double[::1] theta, double[::1] grad, double eta):
    cdef Py_ssize_t i, n = theta.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double nn = _dot(theta, theta)
    cdef double factor = 1.0 - c * nn
    cdef double scl = eta * factor * factor / 4.0
    for i in range(n):
        o[i] = theta[i] - scl * grad[i]
    return project_ball(c, out)


def sgd_update(param, grad, double eta):
    cdef double[::1] p = param.ravel()
    cdef double[::1] g = grad.ravel()
    cdef Py_ssize_t i
    for i in range(p.shape[0]):
        p[i] -= eta * g[i]
