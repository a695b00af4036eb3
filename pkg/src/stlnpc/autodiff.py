"""Minimal reverse-mode automatic differentiation on scalars and dense arrays.

A :class:`Tape` records every primitive operation in an append-only node
list; node inputs always reference earlier nodes, so a single reverse sweep
propagates adjoints.  Values are python floats or ``float64`` numpy arrays;
the only broadcasting supported is scalar-with-array and the bias row in
:func:`Tape.affine`.  One tape is single-threaded; independent tapes can run
concurrently.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["Tape", "DiffValue", "Gradients", "backward", "grad_check"]


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _unbroadcast(g, ref):
    """Sum ``g`` down to the shape of the forward input it belongs to."""
    if np.isscalar(ref) or (isinstance(ref, np.ndarray) and ref.ndim == 0):
        return float(np.sum(g))
    g = np.asarray(g)
    while g.ndim > ref.ndim:
        g = g.sum(axis=0)
    for ax, n in enumerate(ref.shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


class DiffValue:
    """Handle to one tape node: an id plus its cached forward value."""

    __slots__ = ("tape", "id", "value")

    def __init__(self, tape, node_id, value):
        self.tape = tape
        self.id = node_id
        self.value = value

    @property
    def shape(self):
        return np.shape(self.value)

    def __repr__(self):
        return f"DiffValue(id={self.id}, value={self.value!r})"

    # Operator sugar used heavily by dynamics/benchmark code.  Constants are
    # folded into a single scale-shift node instead of materialising a const.
    def __add__(self, other):
        if isinstance(other, DiffValue):
            return self.tape.add(self, other)
        return self.tape.scale_shift(self, 1.0, other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, DiffValue):
            return self.tape.sub(self, other)
        return self.tape.scale_shift(self, 1.0, -np.asarray(other) if isinstance(other, np.ndarray) else -other)

    def __rsub__(self, other):
        return self.tape.scale_shift(self, -1.0, other)

    def __mul__(self, other):
        if isinstance(other, DiffValue):
            return self.tape.mul(self, other)
        return self.tape.scale_shift(self, other, 0.0)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, DiffValue):
            return self.tape.div(self, other)
        return self.tape.scale_shift(self, 1.0 / other, 0.0)

    def __rtruediv__(self, other):
        return self.tape.div(self.tape.const(other), self)

    def __neg__(self):
        return self.tape.neg(self)


class Gradients:
    """Adjoint of every node after a backward pass, keyed by node id."""

    __slots__ = ("_adj",)

    def __init__(self, adj):
        self._adj = adj

    def of(self, dv: DiffValue):
        g = self._adj[dv.id]
        if g is None:
            return 0.0 if np.isscalar(dv.value) else np.zeros_like(dv.value)
        return g

    def __getitem__(self, key):
        node_id = key.id if isinstance(key, DiffValue) else key
        return self._adj[node_id]


class Tape:
    """Append-only record of primitive operations with cached forwards."""

    def __init__(self):
        self._ops = []
        self._args = []
        self._vals = []
        self._aux = []

    def __len__(self):
        return len(self._ops)

    def _push(self, op, args, val, aux=None):
        self._ops.append(op)
        self._args.append(args)
        self._vals.append(val)
        self._aux.append(aux)
        return DiffValue(self, len(self._ops) - 1, val)

    # -- leaves ------------------------------------------------------------
    def const(self, value):
        if isinstance(value, (int, float)):
            value = float(value)
        else:
            value = np.asarray(value, dtype=np.float64)
        return self._push("const", (), value)

    # -- elementwise binary -------------------------------------------------
    def add(self, a, b):
        return self._push("add", (a.id, b.id), a.value + b.value)

    def sub(self, a, b):
        return self._push("sub", (a.id, b.id), a.value - b.value)

    def mul(self, a, b):
        return self._push("mul", (a.id, b.id), a.value * b.value)

    def div(self, a, b):
        bv = np.asarray(b.value)
        if np.any(bv == 0.0):
            raise ZeroDivisionError("division by a zero forward value")
        return self._push("div", (a.id, b.id), a.value / b.value)

    # -- elementwise unary --------------------------------------------------
    def neg(self, a):
        return self._push("neg", (a.id,), -a.value)

    def square(self, a):
        return self._push("square", (a.id,), np.square(a.value))

    def exp(self, a):
        return self._push("exp", (a.id,), np.exp(a.value))

    def log(self, a):
        av = np.asarray(a.value)
        if np.any(av <= 0.0):
            raise ValueError("log of a non-positive forward value")
        return self._push("log", (a.id,), np.log(a.value))

    def sqrt(self, a):
        av = np.asarray(a.value)
        if np.any(av < 0.0):
            raise ValueError("sqrt of a negative forward value")
        return self._push("sqrt", (a.id,), np.sqrt(a.value))

    def tanh(self, a):
        return self._push("tanh", (a.id,), np.tanh(a.value))

    def sin(self, a):
        return self._push("sin", (a.id,), np.sin(a.value))

    def cos(self, a):
        return self._push("cos", (a.id,), np.cos(a.value))

    def abs(self, a):
        return self._push("abs", (a.id,), np.abs(a.value))

    def relu(self, a):
        return self._push("relu", (a.id,), np.maximum(a.value, 0.0))

    def mod_const(self, a, period):
        if period <= 0:
            raise ValueError("modulo period must be positive")
        return self._push("mod", (a.id,), np.mod(a.value, period))

    def scale_shift(self, a, alpha, beta):
        """alpha * a + beta with constant alpha/beta (scalar or array)."""
        return self._push("scale_shift", (a.id,), alpha * a.value + beta, (alpha,))

    # -- reductions and linear algebra ---------------------------------------
    def sum(self, a):
        return self._push("sum", (a.id,), float(np.sum(a.value)))

    def mean(self, a):
        return self._push("mean", (a.id,), float(np.mean(a.value)), (np.size(a.value),))

    def dot(self, a, b):
        if np.shape(a.value) != np.shape(b.value):
            raise ValueError("dot: shape mismatch")
        return self._push("dot", (a.id, b.id), float(np.dot(a.value, b.value)))

    def matvec(self, w, x):
        if np.shape(w.value)[1] != np.shape(x.value)[0]:
            raise ValueError("matvec: shape mismatch")
        return self._push("matvec", (w.id, x.id), w.value @ x.value)

    def affine(self, x, w, b):
        """x @ w.T + b for a batch matrix x, or w @ x + b for a vector x."""
        xv, wv = x.value, w.value
        if np.ndim(xv) == 1:
            if wv.shape[1] != xv.shape[0]:
                raise ValueError("affine: shape mismatch")
            val = wv @ xv + b.value
        else:
            if wv.shape[1] != xv.shape[1]:
                raise ValueError("affine: shape mismatch")
            val = xv @ wv.T + b.value
        return self._push("affine", (x.id, w.id, b.id), val)

    def select_col(self, x, j):
        return self._push("select_col", (x.id,), np.ascontiguousarray(x.value[:, j]), (j,))

    def column_stack(self, vecs):
        val = np.stack([v.value for v in vecs], axis=1)
        return self._push("column_stack", tuple(v.id for v in vecs), val)

    # -- soft operators -------------------------------------------------------
    def log_sum_exp(self, args, k):
        """(1/k) log(sum exp(k x_i)) across a list of same-shape values.

        Max-shifted so large k never overflows; a single argument passes
        through exactly.
        """
        if k <= 0:
            raise ValueError("log_sum_exp needs k > 0")
        if len(args) == 1:
            return args[0]
        stacked = np.stack([np.asarray(a.value, dtype=np.float64) for a in args], axis=0)
        m = stacked.max(axis=0)
        w = np.exp(k * (stacked - m))
        s = w.sum(axis=0)
        val = m + np.log(s) / k
        if val.ndim == 0:
            val = float(val)
        return self._push("lse", tuple(a.id for a in args), val, (w / s,))

    def smooth_max(self, args, k):
        return self.log_sum_exp(args, k)

    def smooth_min(self, args, k):
        if k <= 0:
            raise ValueError("smooth_min needs k > 0")
        if len(args) == 1:
            return args[0]
        stacked = np.stack([np.asarray(a.value, dtype=np.float64) for a in args], axis=0)
        m = (-stacked).max(axis=0)
        w = np.exp(k * (-stacked - m))
        s = w.sum(axis=0)
        val = -(m + np.log(s) / k)
        if val.ndim == 0:
            val = float(val)
        return self._push("smin", tuple(a.id for a in args), val, (w / s,))

    def softplus_k(self, a, k):
        """Smooth max(0, a): (1/k) log(1 + exp(k a)), overflow-safe."""
        z = k * np.asarray(a.value, dtype=np.float64)
        val = np.maximum(z, 0.0) / k + np.log1p(np.exp(-np.abs(z))) / k
        if val.ndim == 0:
            val = float(val)
        return self._push("softplus", (a.id,), val, (k,))

    def clip_smooth(self, a, lo, hi):
        """Squash into [lo, hi] with a scaled tanh; derivative never zero."""
        if not lo < hi:
            raise ValueError("clip_smooth needs lo < hi")
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        t = np.tanh((a.value - mid) / half)
        return self._push("clip_smooth", (a.id,), mid + half * t, (t,))

    def clip_hard(self, a, lo, hi):
        """Clamp with pass-through gradient strictly inside [lo, hi]."""
        return self._push("clip_hard", (a.id,), np.clip(a.value, lo, hi), (lo, hi))


def _vjp(op, args_vals, out_val, aux, g):
    """Gradients of one primitive, returned per input (pre-unbroadcast)."""
    if op == "add":
        return (g, g)
    if op == "sub":
        return (g, -g)
    if op == "mul":
        return (g * args_vals[1], g * args_vals[0])
    if op == "div":
        a, b = args_vals
        return (g / b, -g * a / (b * b))
    if op == "neg":
        return (-g,)
    if op == "square":
        return (2.0 * args_vals[0] * g,)
    if op == "exp":
        return (g * out_val,)
    if op == "log":
        return (g / args_vals[0],)
    if op == "sqrt":
        return (0.5 * g / out_val,)
    if op == "tanh":
        return (g * (1.0 - out_val * out_val),)
    if op == "sin":
        return (g * np.cos(args_vals[0]),)
    if op == "cos":
        return (-g * np.sin(args_vals[0]),)
    if op == "abs":
        return (g * np.sign(args_vals[0]),)
    if op == "relu":
        return (g * (np.asarray(args_vals[0]) > 0.0),)
    if op == "mod":
        return (g,)
    if op == "scale_shift":
        return (aux[0] * g,)
    if op == "sum":
        return (g * np.ones_like(args_vals[0]) if not np.isscalar(args_vals[0]) else g,)
    if op == "mean":
        n = aux[0]
        return (g / n * np.ones_like(args_vals[0]) if not np.isscalar(args_vals[0]) else g,)
    if op == "dot":
        a, b = args_vals
        return (g * b, g * a)
    if op == "matvec":
        w, x = args_vals
        return (np.outer(g, x), w.T @ g)
    if op == "affine":
        x, w, b = args_vals
        if np.ndim(x) == 1:
            return (w.T @ g, np.outer(g, x), g)
        return (g @ w, g.T @ x, g.sum(axis=0))
    if op == "select_col":
        x = args_vals[0]
        gx = np.zeros_like(x)
        gx[:, aux[0]] = g
        return (gx,)
    if op == "column_stack":
        return tuple(np.ascontiguousarray(g[:, j]) for j in range(len(args_vals)))
    if op in ("lse", "smin"):
        w = aux[0]
        return tuple(g * w[i] for i in range(len(args_vals)))
    if op == "softplus":
        return (g * _sigmoid(aux[0] * np.asarray(args_vals[0], dtype=np.float64)),)
    if op == "clip_smooth":
        return (g * (1.0 - aux[0] * aux[0]),)
    if op == "clip_hard":
        lo, hi = aux
        a = np.asarray(args_vals[0])
        return (g * ((a > lo) & (a < hi)),)
    raise AssertionError(f"no vjp for op {op!r}")


def backward(tape: Tape, output: DiffValue) -> Gradients:
    """Reverse sweep seeding d(output)/d(output) = 1; output must be scalar."""
    if np.ndim(output.value) != 0:
        raise ValueError("backward requires a scalar output")
    adj = [None] * len(tape)
    adj[output.id] = 1.0
    ops, args, vals, aux = tape._ops, tape._args, tape._vals, tape._aux
    for i in range(output.id, -1, -1):
        g = adj[i]
        if g is None or ops[i] == "const":
            continue
        in_ids = args[i]
        grads = _vjp(ops[i], tuple(vals[j] for j in in_ids), vals[i], aux[i], g)
        for j, gj in zip(in_ids, grads):
            gj = _unbroadcast(gj, vals[j])
            if adj[j] is None:
                adj[j] = gj
            else:
                adj[j] = adj[j] + gj
    return Gradients(adj)


def grad_check(f, x0, h=1e-5):
    """Max relative disagreement between f's reported gradient and central
    finite differences.

    ``f`` maps a parameter vector to ``(value, gradient)``; only the value is
    used at the perturbed points.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    _, grad = f(x0)
    grad = np.asarray(grad, dtype=np.float64)
    worst = 0.0
    for i in range(x0.size):
        e = np.zeros_like(x0)
        e[i] = h
        fp, _ = f(x0 + e)
        fm, _ = f(x0 - e)
        cd = (fp - fm) / (2.0 * h)
        err = abs(grad[i] - cd) / (abs(cd) + 1e-8)
        if err > worst:
            worst = err
    return worst
