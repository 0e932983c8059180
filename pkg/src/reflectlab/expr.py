"""A small arithmetic expression language for boundary data.

Expressions use ``+ - * / **``, parentheses, numeric literals, the
variables supplied by the caller (``x1``, ``x2`` and friends), the
constants ``pi`` and ``e`` and the functions listed in ``FUNCTIONS``.
Parsing goes through :mod:`ast` and only whitelisted node types are
accepted, so no Python code is ever executed.
"""

from __future__ import annotations

import ast
import operator

import numpy as np

from .errors import ConfigError

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "atan": np.arctan,
    "atan2": np.arctan2,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "abs": np.abs,
}
CONSTANTS = {"pi": np.pi, "e": np.e}

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def _compile(node, variables):
    if isinstance(node, ast.Expression):
        return _compile(node.body, variables)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        value = float(node.value)
        return lambda env: value
    if isinstance(node, ast.Name):
        name = node.id
        if name in variables:
            return lambda env: env[name]
        if name in CONSTANTS:
            value = CONSTANTS[name]
            return lambda env: value
        raise ConfigError(f"unknown name {name!r} in expression")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        left, right = _compile(node.left, variables), _compile(node.right, variables)
        return lambda env: op(left(env), right(env))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        op = _UNOPS[type(node.op)]
        inner = _compile(node.operand, variables)
        return lambda env: op(inner(env))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        fn = FUNCTIONS.get(node.func.id)
        if fn is None:
            raise ConfigError(f"unknown function {node.func.id!r} in expression")
        args = [_compile(a, variables) for a in node.args]
        expected = 2 if node.func.id == "atan2" else 1
        if len(args) != expected:
            raise ConfigError(f"{node.func.id} takes {expected} argument(s), got {len(args)}")
        return lambda env: fn(*(a(env) for a in args))
    raise ConfigError(f"unsupported syntax in expression: {ast.dump(node)[:60]}")


def compile_expression(text, variables=("x1", "x2")):
    """Compile ``text`` into ``f(**values) -> array``; raises ConfigError on bad input."""
    if not isinstance(text, str) or not text.strip():
        raise ConfigError("expression must be a non-empty string")
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None
    fn = _compile(tree, set(variables))

    def evaluate(**values):
        missing = set(variables) - set(values)
        if missing:
            raise ConfigError(f"missing variable(s) {sorted(missing)}")
        with np.errstate(all="ignore"):
            return np.asarray(fn(values), dtype=float)

    return evaluate
