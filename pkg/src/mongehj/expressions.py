"""Space(-time) functions on a metric graph.

Functions are given as JSON-friendly specs:

* a number                                   -> constant
* an expression string                       -> evaluated with x (edge offset),
                                                t, e (edge index), len (edge length)
* {"expr": str, "edges": {"<e>": str, ...}}  -> per-edge overrides
* {"table": [...]}                           -> one value per mesh node (needs a mesh)

Expressions allow arithmetic, comparisons, ``min``, ``max``, ``abs``, ``exp``,
``log``, ``sqrt``, ``sin``, ``cos``, ``clip`` and ``where(cond, a, b)`` for
piecewise definitions. Nothing else is reachable from an expression.
"""
from __future__ import annotations

import ast
from functools import reduce
from typing import Any

import numpy as np


class ExpressionError(ValueError):
    pass


_FUNCS = {
    "abs": np.abs,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
    "min": lambda *a: reduce(np.minimum, a),
    "max": lambda *a: reduce(np.maximum, a),
    "clip": np.clip,
    "where": np.where,
}
_CONSTS = {"pi": np.pi}
_VARS = ("x", "t", "e", "len")
_ALLOWED = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Compare, ast.BoolOp, ast.Call,
    ast.Name, ast.Load, ast.Constant, ast.IfExp,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.Mod, ast.USub, ast.UAdd,
    ast.Lt, ast.LtE, ast.Gt, ast.GtE, ast.Eq, ast.NotEq, ast.And, ast.Or,
)


def _compile(src: str):
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {src!r}: {exc.msg}") from exc
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise ExpressionError(f"{type(node).__name__} not allowed in {src!r}")
        if isinstance(node, ast.Name) and node.id not in _FUNCS and node.id not in _VARS and node.id not in _CONSTS:
            raise ExpressionError(f"unknown name {node.id!r} in {src!r}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS):
            raise ExpressionError(f"only whitelisted functions may be called in {src!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ExpressionError(f"non-numeric literal in {src!r}")
        if isinstance(node, (ast.BoolOp, ast.IfExp)):
            raise ExpressionError(f"use where(cond, a, b) instead of and/or/if in {src!r}")
    return compile(tree, "<expr>", "eval"), _uses_t(tree)


def _uses_t(tree) -> bool:
    return any(isinstance(n, ast.Name) and n.id == "t" for n in ast.walk(tree))


class GraphFunction:
    """Vectorized f(edge, offset, t). Subclasses fill ``_eval``."""

    constant: float | None = None
    time_dependent: bool = False

    def __call__(self, edges, offsets, t=0.0) -> np.ndarray:
        edges = np.asarray(edges)
        offsets = np.asarray(offsets, dtype=float)
        t = np.asarray(t, dtype=float)
        shape = np.broadcast_shapes(edges.shape, offsets.shape, t.shape)
        out = self._eval(np.broadcast_to(edges, shape), np.broadcast_to(offsets, shape), np.broadcast_to(t, shape))
        return np.broadcast_to(np.asarray(out, dtype=float), shape)

    def at(self, p, t: float = 0.0) -> float:
        return float(self(np.array([p.edge]), np.array([p.offset]), t)[0])

    def _eval(self, edges, offsets, t):
        raise NotImplementedError

    def to_spec(self) -> Any:
        raise NotImplementedError


class Constant(GraphFunction):
    def __init__(self, value: float):
        self.value = float(value)
        self.constant = self.value

    def _eval(self, edges, offsets, t):
        return np.full(edges.shape, self.value)

    def to_spec(self):
        return self.value


class Expression(GraphFunction):
    def __init__(self, src: str, overrides: dict[int, str] | None = None, lengths=None):
        self.src = src
        self._code, uses_t = _compile(src)
        self.overrides = {int(k): v for k, v in (overrides or {}).items()}
        self._over = {k: _compile(v) for k, v in self.overrides.items()}
        self.time_dependent = uses_t or any(u for _, u in self._over.values())
        self.lengths = None if lengths is None else np.asarray(lengths, dtype=float)

    def bind(self, lengths) -> "Expression":
        return Expression(self.src, self.overrides, lengths)

    def _run(self, code, edges, offsets, t):
        env = dict(_FUNCS)
        env.update(_CONSTS)
        length = self.lengths[edges] if self.lengths is not None else np.full(edges.shape, np.nan)
        env.update(x=offsets, t=t, e=edges, len=length)
        with np.errstate(all="ignore"):
            val = eval(code, {"__builtins__": {}}, env)
        return np.broadcast_to(np.asarray(val, dtype=float), edges.shape)

    def _eval(self, edges, offsets, t):
        out = np.array(self._run(self._code, edges, offsets, t), dtype=float)
        for e, (code, _) in self._over.items():
            mask = edges == e
            if np.any(mask):
                out[mask] = self._run(code, edges[mask], offsets[mask], t[mask])
        return out

    def to_spec(self):
        if not self.overrides:
            return self.src
        return {"expr": self.src, "edges": {str(k): v for k, v in self.overrides.items()}}


class Table(GraphFunction):
    """Nodal values on a mesh, linearly interpolated along edges."""

    def __init__(self, mesh, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (mesh.size,):
            raise ExpressionError(f"table has {values.size} values, mesh has {mesh.size} nodes")
        self.mesh = mesh
        self.values = values

    def _eval(self, edges, offsets, t):
        flat = self.mesh.interpolate(self.values, edges.ravel(), offsets.ravel())
        return flat.reshape(edges.shape)

    def to_spec(self):
        return {"table": self.values.tolist()}


class Callable(GraphFunction):
    """Wraps a Python callable f(edges, offsets, t); not serializable."""

    def __init__(self, fn, time_dependent: bool = True):
        self.fn = fn
        self.time_dependent = time_dependent

    def _eval(self, edges, offsets, t):
        return self.fn(edges, offsets, t)

    def to_spec(self):
        raise ExpressionError("callable functions cannot be serialized")


def parse_function(spec: Any, graph=None, mesh=None) -> GraphFunction:
    if isinstance(spec, GraphFunction):
        return spec
    lengths = None if graph is None else graph.lengths
    if isinstance(spec, bool):
        raise ExpressionError("booleans are not functions")
    if isinstance(spec, (int, float)):
        return Constant(spec)
    if isinstance(spec, str):
        try:
            return Constant(float(spec))
        except ValueError:
            return Expression(spec, lengths=lengths)
    if isinstance(spec, dict):
        if "table" in spec:
            if mesh is None:
                raise ExpressionError("a table function needs a mesh")
            return Table(mesh, spec["table"])
        if "expr" in spec:
            return Expression(str(spec["expr"]), spec.get("edges"), lengths=lengths)
    raise ExpressionError(f"cannot interpret function spec {spec!r}")
