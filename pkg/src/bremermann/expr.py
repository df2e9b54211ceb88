"""Small arithmetic-expression evaluator for boundary traces.

Expressions use the real coordinates ``x1, y1, ..., xn, yn`` and the complex
coordinates ``z1, ..., zn``.  Only a whitelist of syntax is accepted; ``^``
means exponentiation.
"""
from __future__ import annotations

import ast
import operator

import numpy as np

from .errors import ExpressionError

_BIN = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def _vmax(*args):
    out = args[0]
    for a in args[1:]:
        out = np.maximum(out, a)
    return out


def _vmin(*args):
    out = args[0]
    for a in args[1:]:
        out = np.minimum(out, a)
    return out


FUNCS = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
    "abs": np.abs,
    "arg": np.angle,
    "re": np.real,
    "im": np.imag,
    "min": _vmin,
    "max": _vmax,
}
CONSTS = {"pi": np.pi, "e": np.e}


class TraceExpr:
    """Compiled expression; call with an ``(N, 2n)`` array of points."""

    def __init__(self, text, n):
        self.text = text
        self.n = n
        self.tree = parse(text, n)

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        env = {}
        for j in range(self.n):
            env[f"x{j + 1}"] = X[:, 2 * j]
            env[f"y{j + 1}"] = X[:, 2 * j + 1]
            env[f"z{j + 1}"] = X[:, 2 * j] + 1j * X[:, 2 * j + 1]
        with np.errstate(all="ignore"):
            val = _eval(self.tree.body, env, self.text)
        val = np.broadcast_to(np.asarray(val), (X.shape[0],))
        if np.iscomplexobj(val):
            if np.any(np.abs(val.imag) > 1e-12 * (1 + np.abs(val.real))):
                raise ExpressionError(f"{self.text!r} is not real-valued; wrap it in re() or abs()")
            val = val.real
        return np.array(val, dtype=float)

    def __repr__(self):
        return f"TraceExpr({self.text!r}, n={self.n})"


def _where(text, node):
    return f"line {node.lineno}, column {_orig_col(text, node.lineno, node.col_offset) + 1}"


def _orig_col(text, line, col):
    """Column in ``text`` of column ``col`` after each ``^`` became ``**``."""
    src = text.splitlines()[line - 1] if text.splitlines() else ""
    j = k = 0
    while j < len(src) and k < col:
        k += 2 if src[j] == "^" else 1
        j += 1
    return j


def parse(text, n):
    """Parse and validate ``text``; errors carry line and column."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression")
    src = text.replace("^", "**")
    try:
        tree = ast.parse(src.strip(), mode="eval")
    except SyntaxError as err:
        line = err.lineno or 1
        col = _orig_col(text.strip(), line, (err.offset or 1) - 1) + 1
        raise ExpressionError(f"syntax error at line {line}, column {col}: {err.msg}") from None
    names = {f"{c}{j + 1}" for j in range(n) for c in "xyz"}
    for node in ast.walk(tree):
        if isinstance(node, (ast.Expression, ast.Load)) or type(node) in _BIN or type(node) in _UNARY:
            continue
        if isinstance(node, (ast.BinOp, ast.UnaryOp)):
            op = node.op
            if type(op) not in _BIN and type(op) not in _UNARY:
                raise ExpressionError(f"operator {type(op).__name__} not allowed at {_where(text.strip(), node)}")
            continue
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ExpressionError(f"literal {node.value!r} not allowed at {_where(text.strip(), node)}")
            continue
        if isinstance(node, ast.Name):
            if node.id not in names and node.id not in CONSTS and node.id not in FUNCS:
                raise ExpressionError(f"unknown name {node.id!r} at {_where(text.strip(), node)}")
            continue
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCS or node.keywords:
                raise ExpressionError(f"call not allowed at {_where(text.strip(), node)}")
            if not node.args:
                raise ExpressionError(f"{node.func.id}() needs arguments at {_where(text.strip(), node)}")
            continue
        raise ExpressionError(f"{type(node).__name__} not allowed at {_where(text.strip(), node)}")
    return tree


def _eval(node, env, text):
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id in env:
            return env[node.id]
        if node.id in CONSTS:
            return CONSTS[node.id]
        raise ExpressionError(f"{node.id!r} used as a value at {_where(text.strip(), node)}")
    if isinstance(node, ast.BinOp):
        return _BIN[type(node.op)](_eval(node.left, env, text), _eval(node.right, env, text))
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_eval(node.operand, env, text))
    args = [_eval(a, env, text) for a in node.args]
    return FUNCS[node.func.id](*args)


def parse_trace_expr(text, n):
    """Compile ``text`` into a vectorized trace over real coordinates."""
    return TraceExpr(text, n)
