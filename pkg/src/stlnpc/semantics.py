"""Boolean satisfaction and quantitative robustness of formula trees.

All three evaluators share one recursion; they differ only in how atoms and
the min/max reductions are realised.  The exact evaluators work on plain or
batched numpy traces, the soft evaluator builds tape nodes so robustness can
be differentiated.  Evaluating past the end of a trace raises
:class:`HorizonError` instead of silently truncating.
"""

from __future__ import annotations

import numpy as np

from .autodiff import DiffValue
from .formulas import (
    And, Always, EAbs, EAdd, EChan, EConst, EMod, EMul, ENeg, ENorm2, ESquare,
    ESub, Eventually, Formula, Implies, Not, Or, Pred, TrueF, Until,
    formula_horizon,
)

__all__ = ["HorizonError", "eval_boolean", "robustness", "smooth_robustness"]


class HorizonError(ValueError):
    """The formula looks further ahead than the trace provides."""

    def __init__(self, t, horizon, timesteps):
        self.t = t
        self.horizon = horizon
        self.timesteps = timesteps
        self.max_valid_t = timesteps - 1 - horizon
        if self.max_valid_t >= 0:
            hint = f"max valid t is {self.max_valid_t}"
        else:
            hint = "no valid t for this trace"
        super().__init__(
            f"formula horizon {horizon} at t={t} exceeds trace of {timesteps} steps ({hint})"
        )


def _check_horizon(trace, t, f):
    h = formula_horizon(f)
    if t < 0 or t + h > trace.timesteps - 1:
        raise HorizonError(t, h, trace.timesteps)


def _eval_expr_hard(trace, e, t):
    if isinstance(e, EConst):
        return e.value
    if isinstance(e, EChan):
        return trace.get(trace.channel_index(e.name), t)
    if isinstance(e, ENeg):
        return -_eval_expr_hard(trace, e.arg, t)
    if isinstance(e, EAdd):
        return _eval_expr_hard(trace, e.lhs, t) + _eval_expr_hard(trace, e.rhs, t)
    if isinstance(e, ESub):
        return _eval_expr_hard(trace, e.lhs, t) - _eval_expr_hard(trace, e.rhs, t)
    if isinstance(e, EMul):
        return _eval_expr_hard(trace, e.lhs, t) * _eval_expr_hard(trace, e.rhs, t)
    if isinstance(e, ESquare):
        v = _eval_expr_hard(trace, e.arg, t)
        return v * v
    if isinstance(e, EAbs):
        return np.abs(_eval_expr_hard(trace, e.arg, t))
    if isinstance(e, ENorm2):
        acc = 0.0
        for name in e.names:
            v = trace.get(trace.channel_index(name), t)
            acc = acc + v * v
        return np.sqrt(acc)
    if isinstance(e, EMod):
        return np.mod(_eval_expr_hard(trace, e.arg, t), e.period)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Boolean semantics (strict predicates: expr > 0)
# ---------------------------------------------------------------------------

def eval_boolean(trace, t: int, f: Formula):
    """Satisfaction at step ``t``; a scalar bool, or a bool vector for a
    batched trace."""
    _check_horizon(trace, t, f)
    memo = {}

    def rec(g, s):
        key = (id(g), s)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if isinstance(g, TrueF):
            out = _true_like(trace, s)
        elif isinstance(g, Pred):
            out = _eval_expr_hard(trace, g.expr, s) > 0
        elif isinstance(g, Not):
            out = np.logical_not(rec(g.child, s))
        elif isinstance(g, And):
            out = rec(g.children[0], s)
            for c in g.children[1:]:
                out = np.logical_and(out, rec(c, s))
        elif isinstance(g, Or):
            out = rec(g.children[0], s)
            for c in g.children[1:]:
                out = np.logical_or(out, rec(c, s))
        elif isinstance(g, Implies):
            out = np.logical_or(np.logical_not(rec(g.lhs, s)), rec(g.rhs, s))
        elif isinstance(g, Always):
            out = rec(g.child, s + g.interval.lo)
            for sp in range(s + g.interval.lo + 1, s + g.interval.hi + 1):
                out = np.logical_and(out, rec(g.child, sp))
        elif isinstance(g, Eventually):
            out = rec(g.child, s + g.interval.lo)
            for sp in range(s + g.interval.lo + 1, s + g.interval.hi + 1):
                out = np.logical_or(out, rec(g.child, sp))
        elif isinstance(g, Until):
            prefix = _true_like(trace, s)
            out = None
            for sp in range(s, s + g.interval.hi + 1):
                prefix = np.logical_and(prefix, rec(g.lhs, sp))
                if sp >= s + g.interval.lo:
                    hold = np.logical_and(rec(g.rhs, sp), prefix)
                    out = hold if out is None else np.logical_or(out, hold)
        else:
            raise TypeError(f"not a formula: {g!r}")
        memo[key] = out
        return out

    out = rec(f, t)
    if np.ndim(out) == 0:
        return bool(out)
    return out


def _true_like(trace, s):
    probe = trace.get(0, s)
    if np.ndim(probe) == 0:
        return True
    return np.ones(np.shape(probe), dtype=bool)


# ---------------------------------------------------------------------------
# Exact robustness
# ---------------------------------------------------------------------------

def robustness(trace, t: int, f: Formula):
    """Quantitative satisfaction margin; positive means satisfied."""
    _check_horizon(trace, t, f)
    memo = {}

    def rec(g, s):
        key = (id(g), s)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if isinstance(g, TrueF):
            out = 1.0
        elif isinstance(g, Pred):
            out = _eval_expr_hard(trace, g.expr, s)
        elif isinstance(g, Not):
            out = -rec(g.child, s)
        elif isinstance(g, And):
            out = np.minimum.reduce([np.asarray(rec(c, s), dtype=np.float64) for c in g.children])
        elif isinstance(g, Or):
            out = np.maximum.reduce([np.asarray(rec(c, s), dtype=np.float64) for c in g.children])
        elif isinstance(g, Implies):
            out = np.maximum(-np.asarray(rec(g.lhs, s)), rec(g.rhs, s))
        elif isinstance(g, Always):
            out = np.minimum.reduce(
                [np.asarray(rec(g.child, sp), dtype=np.float64) for sp in g.interval.steps(s)])
        elif isinstance(g, Eventually):
            out = np.maximum.reduce(
                [np.asarray(rec(g.child, sp), dtype=np.float64) for sp in g.interval.steps(s)])
        elif isinstance(g, Until):
            prefix = None
            cands = []
            for sp in range(s, s + g.interval.hi + 1):
                l = np.asarray(rec(g.lhs, sp), dtype=np.float64)
                prefix = l if prefix is None else np.minimum(prefix, l)
                if sp >= s + g.interval.lo:
                    cands.append(np.minimum(np.asarray(rec(g.rhs, sp), dtype=np.float64), prefix))
            out = np.maximum.reduce(cands)
        else:
            raise TypeError(f"not a formula: {g!r}")
        memo[key] = out
        return out

    out = rec(f, t)
    if np.ndim(out) == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Soft robustness on a tape
# ---------------------------------------------------------------------------

def _eval_expr_smooth(tape, dtrace, e, t):
    if isinstance(e, EConst):
        return e.value
    if isinstance(e, EChan):
        return dtrace.get(dtrace.channel_index(e.name), t)
    if isinstance(e, ENeg):
        v = _eval_expr_smooth(tape, dtrace, e.arg, t)
        return -v if isinstance(v, DiffValue) else -v
    if isinstance(e, EAdd):
        return _eval_expr_smooth(tape, dtrace, e.lhs, t) + _eval_expr_smooth(tape, dtrace, e.rhs, t)
    if isinstance(e, ESub):
        return _eval_expr_smooth(tape, dtrace, e.lhs, t) - _eval_expr_smooth(tape, dtrace, e.rhs, t)
    if isinstance(e, EMul):
        a = _eval_expr_smooth(tape, dtrace, e.lhs, t)
        b = _eval_expr_smooth(tape, dtrace, e.rhs, t)
        return a * b
    if isinstance(e, ESquare):
        v = _eval_expr_smooth(tape, dtrace, e.arg, t)
        return tape.square(v) if isinstance(v, DiffValue) else v * v
    if isinstance(e, EAbs):
        v = _eval_expr_smooth(tape, dtrace, e.arg, t)
        return tape.abs(v) if isinstance(v, DiffValue) else abs(v)
    if isinstance(e, ENorm2):
        acc = None
        for name in e.names:
            v = dtrace.get(dtrace.channel_index(name), t)
            sq = tape.square(v)
            acc = sq if acc is None else acc + sq
        return tape.sqrt(acc)
    if isinstance(e, EMod):
        v = _eval_expr_smooth(tape, dtrace, e.arg, t)
        return tape.mod_const(v, e.period) if isinstance(v, DiffValue) else float(np.mod(v, e.period))
    raise TypeError(f"not an expression: {e!r}")


def smooth_robustness(dtrace, t: int, f: Formula, k: float) -> DiffValue:
    """Robustness with every min/max replaced by its log-sum-exp softening.

    ``dtrace`` is a trace of tape values; the result participates in the same
    tape, so it can be driven through :func:`stlnpc.autodiff.backward`.
    """
    if k <= 0:
        raise ValueError("smoothness k must be positive")
    _check_horizon(dtrace, t, f)
    tape = _find_tape(dtrace)
    memo = {}

    def wrap(v):
        return v if isinstance(v, DiffValue) else tape.const(float(v))

    def rec(g, s):
        key = (id(g), s)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if isinstance(g, TrueF):
            out = tape.const(1.0)
        elif isinstance(g, Pred):
            out = wrap(_eval_expr_smooth(tape, dtrace, g.expr, s))
        elif isinstance(g, Not):
            out = tape.neg(rec(g.child, s))
        elif isinstance(g, And):
            out = tape.smooth_min([rec(c, s) for c in g.children], k)
        elif isinstance(g, Or):
            out = tape.smooth_max([rec(c, s) for c in g.children], k)
        elif isinstance(g, Implies):
            out = tape.smooth_max([tape.neg(rec(g.lhs, s)), rec(g.rhs, s)], k)
        elif isinstance(g, Always):
            out = tape.smooth_min([rec(g.child, sp) for sp in g.interval.steps(s)], k)
        elif isinstance(g, Eventually):
            out = tape.smooth_max([rec(g.child, sp) for sp in g.interval.steps(s)], k)
        elif isinstance(g, Until):
            lhs_prefix = []
            cands = []
            for sp in range(s, s + g.interval.hi + 1):
                lhs_prefix.append(rec(g.lhs, sp))
                if sp >= s + g.interval.lo:
                    inf_prefix = tape.smooth_min(list(lhs_prefix), k)
                    cands.append(tape.smooth_min([rec(g.rhs, sp), inf_prefix], k))
            out = tape.smooth_max(cands, k)
        else:
            raise TypeError(f"not a formula: {g!r}")
        memo[key] = out
        return out

    return rec(f, t)


def _find_tape(dtrace):
    for row in dtrace.grid:
        for v in row:
            if isinstance(v, DiffValue):
                return v.tape
    raise ValueError("trace contains no tape values")
