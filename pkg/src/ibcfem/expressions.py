"""Scalar fields from short formula strings such as ``"sin(x) * cos(pi*y) + 1"``.

Grammar: numbers, ``x``, ``y``, ``pi``, ``+ - * / ^`` (``**`` also accepted),
parentheses, unary minus and the functions ``sin`` and ``cos``. Parsing uses
the standard :mod:`ast` module; the tree is then checked against this
whitelist and compiled to a numpy closure, so no arbitrary code runs.
"""
from __future__ import annotations

import ast
import operator
from typing import Callable

import numpy as np

_BINARY = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"sin": np.sin, "cos": np.cos}
_NAMES = ("x", "y", "pi")


class ExpressionError(ValueError):
    pass


def _compile(node) -> Callable:
    if isinstance(node, ast.Expression):
        return _compile(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        c = float(node.value)
        return lambda x, y: c
    if isinstance(node, ast.Name):
        if node.id == "x":
            return lambda x, y: x
        if node.id == "y":
            return lambda x, y: y
        if node.id == "pi":
            return lambda x, y: np.pi
        raise ExpressionError(f"unknown name {node.id!r}; allowed: {', '.join(_NAMES)}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINARY:
        op = _BINARY[type(node.op)]
        a, b = _compile(node.left), _compile(node.right)
        return lambda x, y: op(a(x, y), b(x, y))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        op = _UNARY[type(node.op)]
        a = _compile(node.operand)
        return lambda x, y: op(a(x, y))
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise ExpressionError(f"unknown function; allowed: {', '.join(_FUNCS)}")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id}() takes exactly one argument")
        fn = _FUNCS[node.func.id]
        a = _compile(node.args[0])
        return lambda x, y: fn(a(x, y))
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")


def parse_expression(text: str) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Compile ``text`` to ``f(x, y)`` returning an array shaped like ``x``."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression")
    try:
        # "^" is rewritten before parsing: as XOR it would bind looser than "+"
        tree = ast.parse(text.strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    body = _compile(tree)

    def field(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="raise", invalid="raise", over="raise"):
            try:
                val = body(x, y)
            except (FloatingPointError, ZeroDivisionError, OverflowError):
                raise ExpressionError(f"{text!r} is not finite at some evaluation point") from None
        return np.broadcast_to(np.asarray(val, dtype=float), np.broadcast(x, y).shape).copy()

    field.source = text
    # evaluate once so bad input fails here rather than inside an assembly loop
    probe = field(np.array([0.25, 0.5]), np.array([0.75, 0.5]))
    if not np.all(np.isfinite(probe)):
        raise ExpressionError(f"{text!r} is not finite")
    return field
