"""Temporal-logic formula trees over named real-valued trace channels.

Predicates are arithmetic expressions compared against zero; temporal
operators carry inclusive integer step intervals.  Nodes are frozen
dataclasses so structural equality is plain ``==``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

__all__ = [
    "Interval", "Expr", "EConst", "EChan", "ENeg", "EAdd", "ESub", "EMul",
    "ESquare", "EAbs", "ENorm2", "EMod",
    "Formula", "TrueF", "Pred", "Not", "And", "Or", "Implies",
    "Until", "Eventually", "Always",
    "formula_horizon", "expr_channels", "formula_channels",
    "smooth_depth", "max_arity", "smooth_gap", "rewrite_smooth",
    "safety_clauses",
]


@dataclass(frozen=True)
class Interval:
    """Inclusive step range [lo, hi] attached to a temporal operator."""

    lo: int
    hi: int

    def __post_init__(self):
        if not (isinstance(self.lo, int) and isinstance(self.hi, int)):
            raise TypeError("interval bounds must be integers")
        if self.lo < 0 or self.hi < self.lo:
            raise ValueError(f"invalid interval [{self.lo},{self.hi}]: need 0 <= lo <= hi")

    def steps(self, t):
        return range(t + self.lo, t + self.hi + 1)

    def __len__(self):
        return self.hi - self.lo + 1


# ---------------------------------------------------------------------------
# Arithmetic expressions
# ---------------------------------------------------------------------------

class Expr:
    pass


@dataclass(frozen=True)
class EConst(Expr):
    value: float


@dataclass(frozen=True)
class EChan(Expr):
    name: str


@dataclass(frozen=True)
class ENeg(Expr):
    arg: Expr


@dataclass(frozen=True)
class EAdd(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class ESub(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class EMul(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class ESquare(Expr):
    arg: Expr


@dataclass(frozen=True)
class EAbs(Expr):
    arg: Expr


@dataclass(frozen=True)
class ENorm2(Expr):
    """Euclidean norm over a list of channels."""

    names: Tuple[str, ...]


@dataclass(frozen=True)
class EMod(Expr):
    """Remainder of an expression modulo a positive constant."""

    arg: Expr
    period: float

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("modulo period must be positive")


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------

class Formula:
    pass


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class Pred(Formula):
    """Atomic constraint expr >= 0."""

    expr: Expr


@dataclass(frozen=True)
class Not(Formula):
    child: Formula


def _check_nary(children):
    if len(children) < 2:
        raise ValueError("n-ary connectives need at least two children")


@dataclass(frozen=True)
class And(Formula):
    children: Tuple[Formula, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        _check_nary(self.children)


@dataclass(frozen=True)
class Or(Formula):
    children: Tuple[Formula, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        _check_nary(self.children)


@dataclass(frozen=True)
class Implies(Formula):
    lhs: Formula
    rhs: Formula


@dataclass(frozen=True)
class Until(Formula):
    interval: Interval
    lhs: Formula
    rhs: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    interval: Interval
    child: Formula


@dataclass(frozen=True)
class Always(Formula):
    interval: Interval
    child: Formula


# ---------------------------------------------------------------------------
# Structural queries
# ---------------------------------------------------------------------------

def formula_horizon(f: Formula) -> int:
    """Number of future steps the formula inspects from its evaluation time."""
    if isinstance(f, (TrueF, Pred)):
        return 0
    if isinstance(f, Not):
        return formula_horizon(f.child)
    if isinstance(f, (And, Or)):
        return max(formula_horizon(c) for c in f.children)
    if isinstance(f, Implies):
        return max(formula_horizon(f.lhs), formula_horizon(f.rhs))
    if isinstance(f, (Eventually, Always)):
        return f.interval.hi + formula_horizon(f.child)
    if isinstance(f, Until):
        return f.interval.hi + max(formula_horizon(f.lhs), formula_horizon(f.rhs))
    raise TypeError(f"not a formula: {f!r}")


def expr_channels(e: Expr) -> set:
    if isinstance(e, EChan):
        return {e.name}
    if isinstance(e, ENorm2):
        return set(e.names)
    if isinstance(e, EConst):
        return set()
    if isinstance(e, (ENeg, ESquare, EAbs, EMod)):
        return expr_channels(e.arg)
    if isinstance(e, (EAdd, ESub, EMul)):
        return expr_channels(e.lhs) | expr_channels(e.rhs)
    raise TypeError(f"not an expression: {e!r}")


def formula_channels(f: Formula) -> set:
    if isinstance(f, TrueF):
        return set()
    if isinstance(f, Pred):
        return expr_channels(f.expr)
    if isinstance(f, Not):
        return formula_channels(f.child)
    if isinstance(f, (And, Or)):
        out = set()
        for c in f.children:
            out |= formula_channels(c)
        return out
    if isinstance(f, Implies):
        return formula_channels(f.lhs) | formula_channels(f.rhs)
    if isinstance(f, Until):
        return formula_channels(f.lhs) | formula_channels(f.rhs)
    if isinstance(f, (Eventually, Always)):
        return formula_channels(f.child)
    raise TypeError(f"not a formula: {f!r}")


def smooth_depth(f: Formula) -> int:
    """Worst-case number of nested soft min/max layers in the evaluation.

    Until counts three layers: the sup over switch times, the pairwise min,
    and the running inf over the prefix.
    """
    if isinstance(f, (TrueF, Pred)):
        return 0
    if isinstance(f, Not):
        return smooth_depth(f.child)
    if isinstance(f, (And, Or)):
        return 1 + max(smooth_depth(c) for c in f.children)
    if isinstance(f, Implies):
        return 1 + max(smooth_depth(f.lhs), smooth_depth(f.rhs))
    if isinstance(f, (Eventually, Always)):
        return 1 + smooth_depth(f.child)
    if isinstance(f, Until):
        return 3 + max(smooth_depth(f.lhs), smooth_depth(f.rhs))
    raise TypeError(f"not a formula: {f!r}")


def max_arity(f: Formula) -> int:
    """Largest argument count any single soft min/max has to reduce."""
    if isinstance(f, (TrueF, Pred)):
        return 1
    if isinstance(f, Not):
        return max_arity(f.child)
    if isinstance(f, (And, Or)):
        return max(len(f.children), *(max_arity(c) for c in f.children))
    if isinstance(f, Implies):
        return max(2, max_arity(f.lhs), max_arity(f.rhs))
    if isinstance(f, (Eventually, Always)):
        return max(len(f.interval), max_arity(f.child))
    if isinstance(f, Until):
        # prefix inf can span up to hi+1 steps
        return max(len(f.interval), f.interval.hi + 1, 2,
                   max_arity(f.lhs), max_arity(f.rhs))
    raise TypeError(f"not a formula: {f!r}")


def smooth_gap(f: Formula, k: float) -> float:
    """Upper bound on |soft robustness - exact robustness|: depth*ln(W)/k."""
    d = smooth_depth(f)
    w = max_arity(f)
    if d == 0 or w <= 1:
        return 0.0
    return d * math.log(w) / k


# ---------------------------------------------------------------------------
# Smooth-friendly rewriting
# ---------------------------------------------------------------------------

def _rewrite_expr(e: Expr) -> Expr:
    # |y| <= c appears as Pred(c - |y|); the sign-equivalent c^2 - y^2 has a
    # usable gradient through y = 0.  Mirror pattern for |y| >= c.
    if isinstance(e, ESub):
        lhs, rhs = e.lhs, e.rhs
        if isinstance(lhs, EConst) and isinstance(rhs, EAbs) and lhs.value > 0:
            return ESub(EConst(lhs.value ** 2), ESquare(rhs.arg))
        if isinstance(lhs, EAbs) and isinstance(rhs, EConst) and rhs.value > 0:
            return ESub(ESquare(lhs.arg), EConst(rhs.value ** 2))
    return e


def rewrite_smooth(f: Formula) -> Formula:
    """Rewrite predicates into forms whose kinks do not sit on the constraint
    boundary; signs of robustness are preserved."""
    if isinstance(f, (TrueF,)):
        return f
    if isinstance(f, Pred):
        return Pred(_rewrite_expr(f.expr))
    if isinstance(f, Not):
        return Not(rewrite_smooth(f.child))
    if isinstance(f, And):
        return And(tuple(rewrite_smooth(c) for c in f.children))
    if isinstance(f, Or):
        return Or(tuple(rewrite_smooth(c) for c in f.children))
    if isinstance(f, Implies):
        return Implies(rewrite_smooth(f.lhs), rewrite_smooth(f.rhs))
    if isinstance(f, Until):
        return Until(f.interval, rewrite_smooth(f.lhs), rewrite_smooth(f.rhs))
    if isinstance(f, Eventually):
        return Eventually(f.interval, rewrite_smooth(f.child))
    if isinstance(f, Always):
        return Always(f.interval, rewrite_smooth(f.child))
    raise TypeError(f"not a formula: {f!r}")


def safety_clauses(f: Formula):
    """Flatten a pure-safety formula into (interval, state-formula) pairs.

    Accepts conjunctions of Always clauses whose bodies look at the current
    step only; used to measure how long a trace prefix stays safe.
    """
    out = []
    if isinstance(f, And):
        for c in f.children:
            out.extend(safety_clauses(c))
        return out
    if isinstance(f, Always):
        if formula_horizon(f.child) != 0:
            raise ValueError("safety clause body must be a state formula")
        out.append((f.interval, f.child))
        return out
    raise ValueError("safety formula must be a conjunction of Always clauses")
