"""Tiny expression language for prescribing h over model coordinates.

Grammar v1: numeric literals, the constants pi and e, coordinate names
(x, y, z on the torus; theta on the sphere; r on the radial model), the
binary operators + - * /, unary minus, and the functions sin, cos, exp.
Evaluation is vectorised over numpy coordinate arrays.
"""

from __future__ import annotations

import ast

import numpy as np

GRAMMAR_VERSION = 1

_FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_CONSTANTS = {"pi": np.pi, "e": np.e}
_COORDS = ("x", "y", "z", "theta", "r")

_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract,
           ast.Mult: np.multiply, ast.Div: np.divide}


class ExpressionError(ValueError):
    """Raised for anything outside the documented grammar."""


def parse_h_expression(text):
    """Compile an h expression into a callable of keyword coordinate arrays.

    >>> f = parse_h_expression("3 + 0.3*cos(theta)")
    >>> f(theta=np.array([0.0]))
    array([3.3])
    """
    text = text.replace("θ", "theta")  # accept a literal theta sign
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse h expression: {exc}") from None
    names = _validate(tree.body)

    def evaluate(**coords):
        missing = names - set(coords)
        if missing:
            raise ExpressionError(
                f"expression uses coordinates {sorted(missing)} not provided by the model")
        return _eval(tree.body, coords)

    evaluate.coordinates = names
    evaluate.source = text
    return evaluate


def _validate(node):
    """Whitelist walk; returns the set of coordinate names used."""
    if isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ExpressionError("only numeric literals are allowed")
        return set()
    if isinstance(node, ast.Name):
        if node.id in _CONSTANTS:
            return set()
        if node.id in _COORDS:
            return {node.id}
        raise ExpressionError(f"unknown name {node.id!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _validate(node.left) | _validate(node.right)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        return _validate(node.operand)
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            raise ExpressionError("only sin, cos and exp calls are allowed")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id} takes exactly one argument")
        return _validate(node.args[0])
    raise ExpressionError(f"disallowed syntax: {ast.dump(node)}")


def _eval(node, coords):
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id in _CONSTANTS:
            return _CONSTANTS[node.id]
        return coords[node.id]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, coords), _eval(node.right, coords))
    if isinstance(node, ast.UnaryOp):
        val = _eval(node.operand, coords)
        return -val if isinstance(node.op, ast.USub) else +val
    if isinstance(node, ast.Call):
        return _FUNCTIONS[node.func.id](_eval(node.args[0], coords))
    raise ExpressionError("unreachable")
