"""A small closed-form expression language for user-defined scenario fields.

Vocabulary: numbers, ``+ - * / **``, ``exp``, ``sin``, ``cos``, the
variables ``t``, ``x[i]``, ``y[i]``, the constant ``pi`` and any named
parameter supplied at compile time. Expressions are parsed with :mod:`ast`
and compiled into closures; nothing is passed to ``eval``.
"""
from __future__ import annotations

import ast
import math
import operator
from typing import Callable, Mapping

import numpy as np

from . import diffkernel as dk


class ExpressionError(ValueError):
    """Expression uses syntax or names outside the supported vocabulary."""


FUNCTIONS = {"exp": dk.exp, "sin": dk.sin, "cos": dk.cos}
CONSTANTS = {"pi": math.pi}
_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def _compile(node, n: int, params: Mapping[str, float], vectors: tuple[str, ...]) -> Callable:
    if isinstance(node, ast.Expression):
        return _compile(node.body, n, params, vectors)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        c = float(node.value)
        return lambda env: c
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        a = _compile(node.left, n, params, vectors)
        b = _compile(node.right, n, params, vectors)
        if isinstance(node.op, ast.Pow) and isinstance(node.right, ast.Constant) and float(node.right.value).is_integer():
            p = int(node.right.value)
            return lambda env: op(a(env), p)
        return lambda env: op(a(env), b(env))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        op = _UNARY[type(node.op)]
        a = _compile(node.operand, n, params, vectors)
        return lambda env: op(a(env))
    if isinstance(node, ast.Name):
        name = node.id
        if name == "t" and "t" in vectors:
            return lambda env: env["t"]
        if name in params:
            c = float(params[name])
            return lambda env: c
        if name in CONSTANTS:
            c = CONSTANTS[name]
            return lambda env: c
        raise ExpressionError(f"unknown name {name!r}")
    if isinstance(node, ast.Subscript) and isinstance(node.value, ast.Name) and node.value.id in vectors and node.value.id != "t":
        idx = node.slice
        if not (isinstance(idx, ast.Constant) and isinstance(idx.value, int) and not isinstance(idx.value, bool)):
            raise ExpressionError(f"index of {node.value.id} must be an integer literal")
        i = idx.value
        if not 0 <= i < n:
            raise ExpressionError(f"index {node.value.id}[{i}] out of range for n={n}")
        var = node.value.id
        return lambda env: env[var][i]
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in FUNCTIONS:
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id} takes exactly one argument")
        f = FUNCTIONS[node.func.id]
        a = _compile(node.args[0], n, params, vectors)
        return lambda env: f(a(env))
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")


def compile_expression(
    src: str,
    n: int,
    params: Mapping[str, float] | None = None,
    variables: tuple[str, ...] = ("t", "x", "y"),
) -> Callable:
    """Compile ``src`` to a function of the given variables, in order.

    >>> f = compile_expression("0.5*y[0]**2 - k*x[0]", 1, {"k": 2.0})
    >>> f(0.0, [1.0], [2.0])
    0.0
    """
    if not isinstance(src, str):
        raise ExpressionError(f"expression must be a string, got {type(src).__name__}")
    try:
        tree = ast.parse(src.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {src!r}: {exc.msg}") from None
    body = _compile(tree, n, params or {}, variables)

    def fn(*args):
        if len(args) != len(variables):
            raise TypeError(f"expected {len(variables)} arguments")
        return body(dict(zip(variables, args)))

    fn.__doc__ = src
    return fn


def compile_vector(srcs, n: int, m: int, params=None, variables=("t", "x", "y")) -> Callable:
    """Compile a list of ``m`` expressions into a vector-valued function."""
    if not isinstance(srcs, (list, tuple)) or len(srcs) != m:
        raise ExpressionError(f"expected a list of {m} expressions")
    parts = [compile_expression(s, n, params, variables) for s in srcs]

    def fn(*args):
        out = np.empty(m, dtype=object)
        for i, p in enumerate(parts):
            out[i] = p(*args)
        return out

    return fn


__all__ = ["CONSTANTS", "ExpressionError", "FUNCTIONS", "compile_expression", "compile_vector"]
