"""Reverse-mode differentiation over per-sample computation graphs.

Each training sample gets its own small ``Graph``: a flat tape whose
insertion order is already topological.  Forward values are computed as
nodes are appended, so ``backward`` is a single reverse sweep that
accumulates gradients into a :class:`GradientRecord`.  Word-embedding
leaves (int parameter ids) and dense-layer leaves (str ids) are kept
apart because only the former get the Riemannian treatment.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .backend import kernels
from .errors import NumericalError


@dataclass
class GradientRecord:
    """Loss gradients keyed by parameter id, one entry per touched parameter."""

    words: dict = field(default_factory=dict)  # int word id -> (d,) array
    dense: dict = field(default_factory=dict)  # str name -> array shaped like the param


class Graph:
    """Append-only tape of operations with cached forward values."""

    def __init__(self):
        self.ops = []
        self.inputs = []
        self.values = []
        self.aux = []
        self.params = []

    def __len__(self):
        return len(self.ops)

    def value(self, i):
        return self.values[i]

    def _push(self, op, inputs, value, aux=None, param=None):
        self.ops.append(op)
        self.inputs.append(inputs)
        self.values.append(value)
        self.aux.append(aux)
        self.params.append(param)
        return len(self.ops) - 1

    # -- leaves ----------------------------------------------------------

    def leaf(self, value, param=None):
        """Constant or parameter leaf. ``param``: int word id or str name."""
        return self._push("leaf", (), value, param=param)

    # -- vector ops ------------------------------------------------------

    def neg(self, i):
        return self._push("neg", (i,), -self.values[i])

    def add(self, i, j):
        return self._push("add", (i, j), self.values[i] + self.values[j])

    def sub(self, i, j):
        return self._push("sub", (i, j), self.values[i] - self.values[j])

    def scale(self, i, a):
        return self._push("scale", (i,), a * self.values[i], aux=a)

    def hadamard(self, i, j):
        return self._push("hadamard", (i, j), self.values[i] * self.values[j])

    def abs(self, i):
        return self._push("abs", (i,), np.abs(self.values[i]))

    def relu(self, i):
        return self._push("relu", (i,), kernels.relu(self.values[i]))

    def concat(self, ids):
        parts = [np.atleast_1d(np.asarray(self.values[i], dtype=np.float64)) for i in ids]
        return self._push("concat", tuple(ids), np.concatenate(parts))

    def affine(self, w_id, b_id, x_id):
        value = kernels.affine(self.values[w_id], self.values[b_id], self.values[x_id])
        return self._push("affine", (w_id, b_id, x_id), value)

    def mobius_add(self, i, j, c):
        value = kernels.mobius_add(c, self.values[i], self.values[j])
        return self._push("mobius_add", (i, j), value, aux=c)

    def mobius_scalar(self, i, r, c):
        value = kernels.mobius_scalar_mul(c, r, self.values[i])
        return self._push("mobius_scalar", (i,), value, aux=(c, r))

    # -- scalar ops ------------------------------------------------------

    def dot(self, i, j):
        return self._push("dot", (i, j), float(self.values[i] @ self.values[j]))

    def norm(self, i):
        return self._push("norm", (i,), math.sqrt(float(self.values[i] @ self.values[i])))

    def sqnorm(self, i):
        return self._push("sqnorm", (i,), float(self.values[i] @ self.values[i]))

    def euclid_dist(self, i, j):
        d = self.values[i] - self.values[j]
        return self._push("edist", (i, j), math.sqrt(float(d @ d)))

    def hyp_dist(self, i, j, c):
        value = kernels.hyp_dist(c, self.values[i], self.values[j])
        return self._push("hdist", (i, j), value, aux=c)

    def cosine(self, i, j):
        return self._push("cosine", (i, j), kernels.cosine(self.values[i], self.values[j]))

    def hinge(self, i):
        """max(0, s) for a scalar node; subgradient 0 at the kink."""
        return self._push("hinge", (i,), max(0.0, self.values[i]))

    def combo(self, i, j, a, b):
        """a*s_i + b*s_j for scalar nodes."""
        return self._push("combo", (i, j), a * self.values[i] + b * self.values[j], aux=(a, b))

    def sub_from(self, i, a):
        """a - s_i for a scalar node (hinge margins)."""
        return self._push("sub_from", (i,), a - self.values[i], aux=a)

    def add_n(self, ids):
        return self._push("add_n", tuple(ids), sum(self.values[i] for i in ids))

    def softmax_ce(self, logits_id, gold):
        """Fused stable softmax + cross-entropy against a gold class index."""
        z = self.values[logits_id]
        z = z - np.max(z)
        ez = np.exp(z)
        probs = ez / ez.sum()
        loss = float(np.log(ez.sum()) - z[gold])
        return self._push("softmax_ce", (logits_id,), loss, aux=(gold, probs))

    def logsumexp_neg(self, ids):
        """log(sum_i exp(-s_i)) over scalar nodes, computed stably."""
        s = np.array([self.values[i] for i in ids])
        lo = s.min()
        value = float(-lo + np.log(np.exp(-(s - lo)).sum()))
        return self._push("lse_neg", tuple(ids), value, aux=s)


def backward(graph, loss_node):
    """Gradients of a scalar loss node w.r.t. every parameter leaf.

    Gradients of parameters used more than once accumulate by sum;
    untouched parameters are absent from the record.
    """
    if not isinstance(graph.values[loss_node], float):
        raise ValueError("loss node must be scalar")
    n = loss_node + 1
    grads = [None] * n
    grads[loss_node] = 1.0
    record = GradientRecord()

    ops = graph.ops
    inputs = graph.inputs
    values = graph.values
    aux = graph.aux
    params = graph.params

    def acc(i, g):
        grads[i] = g if grads[i] is None else grads[i] + g

    for i in range(loss_node, -1, -1):
        g = grads[i]
        if g is None:
            continue
        op = ops[i]
        if op == "leaf":
            pid = params[i]
            if pid is None:
                continue
            if isinstance(pid, int):
                if pid in record.words:
                    record.words[pid] = record.words[pid] + g
                else:
                    record.words[pid] = np.array(g, dtype=np.float64, copy=True)
            else:
                if pid in record.dense:
                    record.dense[pid] = record.dense[pid] + g
                else:
                    record.dense[pid] = np.array(g, dtype=np.float64, copy=True)
        elif op == "neg":
            acc(inputs[i][0], -g)
        elif op == "add":
            a, b = inputs[i]
            acc(a, g)
            acc(b, g)
        elif op == "sub":
            a, b = inputs[i]
            acc(a, g)
            acc(b, -g)
        elif op == "scale":
            acc(inputs[i][0], aux[i] * g)
        elif op == "hadamard":
            a, b = inputs[i]
            acc(a, g * values[b])
            acc(b, g * values[a])
        elif op == "abs":
            acc(inputs[i][0], g * np.sign(values[inputs[i][0]]))
        elif op == "relu":
            acc(inputs[i][0], kernels.relu_vjp(values[inputs[i][0]], g))
        elif op == "concat":
            off = 0
            for j in inputs[i]:
                v = values[j]
                if isinstance(v, float):
                    acc(j, float(g[off]))
                    off += 1
                else:
                    acc(j, g[off:off + v.shape[0]])
                    off += v.shape[0]
        elif op == "affine":
            w_id, b_id, x_id = inputs[i]
            gw, gb, gx = kernels.affine_vjp(values[w_id], values[x_id], g)
            acc(w_id, gw)
            acc(b_id, gb)
            acc(x_id, gx)
        elif op == "mobius_add":
            a, b = inputs[i]
            gu, gv = kernels.mobius_add_vjp(aux[i], values[a], values[b], values[i], g)
            acc(a, gu)
            acc(b, gv)
        elif op == "mobius_scalar":
            c, r = aux[i]
            acc(inputs[i][0], kernels.mobius_scalar_mul_vjp(c, r, values[inputs[i][0]], g))
        elif op == "dot":
            a, b = inputs[i]
            acc(a, g * values[b])
            acc(b, g * values[a])
        elif op == "norm":
            j = inputs[i][0]
            nrm = values[i]
            if nrm > 1e-15:
                acc(j, (g / nrm) * values[j])
        elif op == "sqnorm":
            j = inputs[i][0]
            acc(j, (2.0 * g) * values[j])
        elif op == "edist":
            a, b = inputs[i]
            nrm = values[i]
            if nrm > 1e-15:
                diff = (g / nrm) * (values[a] - values[b])
                acc(a, diff)
                acc(b, -diff)
        elif op == "hdist":
            a, b = inputs[i]
            gu, gv = kernels.hyp_dist_vjp(aux[i], values[a], values[b], g)
            acc(a, gu)
            acc(b, gv)
        elif op == "cosine":
            a, b = inputs[i]
            gu, gv = kernels.cosine_vjp(values[a], values[b], g)
            acc(a, gu)
            acc(b, gv)
        elif op == "hinge":
            j = inputs[i][0]
            if values[j] > 0.0:
                acc(j, g)
        elif op == "combo":
            a, b = inputs[i]
            ca, cb = aux[i]
            acc(a, ca * g)
            acc(b, cb * g)
        elif op == "sub_from":
            acc(inputs[i][0], -g)
        elif op == "add_n":
            for j in inputs[i]:
                acc(j, g)
        elif op == "softmax_ce":
            gold, probs = aux[i]
            gl = probs.copy()
            gl[gold] -= 1.0
            acc(inputs[i][0], g * gl)
        elif op == "lse_neg":
            s = aux[i]
            w = np.exp(-(s - s.min()))
            w /= w.sum()
            for k, j in enumerate(inputs[i]):
                acc(j, -g * float(w[k]))
        else:
            raise AssertionError(f"unknown op {op!r}")
    return record


def riemannian_rescale(space, theta, grad):
    """Multiply a Euclidean gradient by the inverse metric factor (1-c||x||^2)^2/4."""
    nn = float(theta @ theta)
    factor = 1.0 - space.c * nn
    return grad * (factor * factor / 4.0)


def rsgd_step(space, theta, grad, eta):
    """project(theta - eta * riemannian_rescale(grad)); stays inside the ball."""
    return kernels.rsgd_update(space.c, theta, grad, eta)


def finite_diff_check(build, params, h=1e-5):
    """Worst relative error between backward() and central differences.

    ``build(params) -> (graph, loss_node)`` must re-read ``params`` on
    every call.  Every coordinate of every entry of ``params`` is
    perturbed by +-h; the relative error uses the denominator
    ``max(|fd|, |analytic|, 1e-8)``.
    """
    if h <= 0:
        raise ValueError("step size h must be positive")
    graph, loss_node = build(params)
    base = graph.values[loss_node]
    if not math.isfinite(base):
        raise NumericalError(f"non-finite loss {base!r} at the evaluation point")
    record = backward(graph, loss_node)
    analytic = {}
    analytic.update(record.words)
    analytic.update(record.dense)

    worst = 0.0
    for key, value in params.items():
        flat = value.reshape(-1)
        ga = analytic.get(key)
        ga_flat = None if ga is None else np.asarray(ga).reshape(-1)
        for idx in range(flat.shape[0]):
            orig = flat[idx]
            flat[idx] = orig + h
            lp = _loss_of(build, params)
            flat[idx] = orig - h
            lm = _loss_of(build, params)
            flat[idx] = orig
            fd = (lp - lm) / (2.0 * h)
            an = 0.0 if ga_flat is None else float(ga_flat[idx])
            denom = max(abs(fd), abs(an), 1e-8)
            err = abs(fd - an) / denom
            if err > worst:
                worst = err
    return worst


def _loss_of(build, params):
    graph, loss_node = build(params)
    value = graph.values[loss_node]
    if not math.isfinite(value):
        raise NumericalError(f"non-finite loss {value!r} during finite differencing")
    return value
