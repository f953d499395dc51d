"""Building fields from small closed-form expressions.

Accepted expressions are ordinary arithmetic over the coordinate names
``x`` (alias of ``x1``), ``x1``, ``x2``, ``x3`` and ``pi``, with the functions

    sin, cos         a linear argument must be an integer frequency dot x
    exp, sqrt, abs, tanh, maximum, minimum
    ball(center, radius)          indicator of a periodic ball
    arc(start, length)            indicator of an arc (d = 1)
    ramp(center, radius, width)   smooth 0 -> 1 transition outside a ball
    fourier([n, a, b], ...)       sum of a cos(n.x) + b sin(n.x)

Examples: ``"1 + 0.2*cos(x)"``, ``"sin(x1 + 2*x2)"``, ``"ramp(pi, 0.5, 0.3)"``.
"""

from __future__ import annotations

import ast
from numbers import Real

import numpy as np

from .grid import TWO_PI, TorusField, TorusGrid, periodic_distance


class FieldSpecError(ValueError):
    pass


def smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


def _center(grid, center):
    c = np.atleast_1d(np.asarray(center, dtype=float))
    if c.size == 1:
        c = np.full(grid.dim, c[0])
    if c.size != grid.dim:
        raise FieldSpecError(f"center {tuple(c)} has wrong dimension for d={grid.dim}")
    return c


def ball_indicator(grid: TorusGrid, center, radius: float) -> np.ndarray:
    return (periodic_distance(grid, _center(grid, center)) <= radius).astype(float)


def arc_indicator(grid: TorusGrid, start: float, length: float) -> np.ndarray:
    if grid.dim != 1:
        raise FieldSpecError("arc() is only defined for d = 1")
    rel = (grid.axis - start) % TWO_PI
    return (rel <= length + 1e-12).astype(float)


def ramp_profile(grid: TorusGrid, center, radius: float, width: float) -> np.ndarray:
    """Vanishes on the closed ball of given radius, rises smoothly to 1 over `width`."""
    dist = periodic_distance(grid, _center(grid, center))
    return smooth_step((dist - radius) / width)


def trig_values(grid: TorusGrid, terms) -> np.ndarray:
    out = np.zeros(grid.shape)
    for entry in terms:
        entry = list(entry)
        if len(entry) != 3:
            raise FieldSpecError(f"fourier entry {entry} must be [n, cos_coeff, sin_coeff]")
        n = np.atleast_1d(np.asarray(entry[0], dtype=float))
        if n.size != grid.dim:
            raise FieldSpecError(f"frequency {tuple(n)} has wrong dimension for d={grid.dim}")
        _check_frequency(grid, n)
        phase = sum(k * x for k, x in zip(n, grid.coords))
        out = out + entry[1] * np.cos(phase) + entry[2] * np.sin(phase)
    return out


def _check_frequency(grid: TorusGrid, n):
    n = np.asarray(n, dtype=float)
    if np.any(np.abs(n - np.round(n)) > 1e-9):
        raise FieldSpecError(f"frequency {tuple(n)} is not an integer vector")
    ni = tuple(int(round(v)) for v in n)
    if any(abs(v) > grid.n // 2 for v in ni):
        raise FieldSpecError(f"frequency {ni} outside representable range |n_i| <= {grid.n // 2}")


_UNARY = {"exp": np.exp, "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh}
_BINARY = {"maximum": np.maximum, "minimum": np.minimum, "max": np.maximum, "min": np.minimum}


class _Evaluator:
    def __init__(self, grid: TorusGrid):
        self.grid = grid
        self.names = {"pi": np.pi, "e": np.e}
        for i, c in enumerate(grid.coords):
            self.names[f"x{i + 1}"] = c
        self.names["x"] = grid.coords[0]
        self.coord_index = {f"x{i + 1}": i for i in range(grid.dim)}
        self.coord_index["x"] = 0

    def linear_form(self, node):
        """Coefficients of node as an affine function of the coordinates, or None."""
        if isinstance(node, ast.Constant) and isinstance(node.value, Real):
            return np.zeros(self.grid.dim), float(node.value)
        if isinstance(node, ast.Name):
            if node.id in self.coord_index:
                v = np.zeros(self.grid.dim)
                v[self.coord_index[node.id]] = 1.0
                return v, 0.0
            if node.id in ("pi", "e"):
                return np.zeros(self.grid.dim), float(self.names[node.id])
            return None
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = self.linear_form(node.operand)
            if inner is None:
                return None
            s = -1.0 if isinstance(node.op, ast.USub) else 1.0
            return s * inner[0], s * inner[1]
        if isinstance(node, ast.BinOp):
            left, right = self.linear_form(node.left), self.linear_form(node.right)
            if left is None or right is None:
                return None
            if isinstance(node.op, ast.Add):
                return left[0] + right[0], left[1] + right[1]
            if isinstance(node.op, ast.Sub):
                return left[0] - right[0], left[1] - right[1]
            if isinstance(node.op, ast.Mult):
                if not left[0].any():
                    return left[1] * right[0], left[1] * right[1]
                if not right[0].any():
                    return right[1] * left[0], right[1] * left[1]
                return None
            if isinstance(node.op, ast.Div) and not right[0].any():
                return left[0] / right[1], left[1] / right[1]
        return None

    def eval(self, node):
        if isinstance(node, ast.Expression):
            return self.eval(node.body)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, Real):
                return float(node.value)
            raise FieldSpecError(f"unsupported constant {node.value!r}")
        if isinstance(node, ast.Name):
            if node.id not in self.names:
                raise FieldSpecError(f"unknown name '{node.id}'")
            return self.names[node.id]
        if isinstance(node, (ast.Tuple, ast.List)):
            return [self.eval(e) for e in node.elts]
        if isinstance(node, ast.UnaryOp):
            v = self.eval(node.operand)
            if isinstance(node.op, ast.USub):
                return -v
            if isinstance(node.op, ast.UAdd):
                return v
        if isinstance(node, ast.BinOp):
            a, b = self.eval(node.left), self.eval(node.right)
            ops = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
                   ast.Div: np.divide, ast.Pow: np.power}
            for kind, fn in ops.items():
                if isinstance(node.op, kind):
                    return fn(a, b)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            return self.call(node)
        raise FieldSpecError(f"unsupported syntax: {ast.dump(node)[:60]}")

    def call(self, node: ast.Call):
        name = node.func.id
        args = [self.eval(a) for a in node.args]
        kwargs = {k.arg: self.eval(k.value) for k in node.keywords}
        if name in ("sin", "cos"):
            if len(node.args) != 1 or kwargs:
                raise FieldSpecError(f"{name}() takes exactly one argument")
            form = self.linear_form(node.args[0])
            if form is not None and form[0].any():
                _check_frequency(self.grid, form[0])
            return (np.sin if name == "sin" else np.cos)(args[0])
        if name in _UNARY:
            return _UNARY[name](*args)
        if name in _BINARY:
            return _BINARY[name](*args)
        if name == "ball":
            return ball_indicator(self.grid, *args, **kwargs)
        if name == "arc":
            return arc_indicator(self.grid, *args, **kwargs)
        if name == "ramp":
            return ramp_profile(self.grid, *args, **kwargs)
        if name == "fourier":
            return trig_values(self.grid, args)
        raise FieldSpecError(f"unknown function '{name}'")


def make_field(grid: TorusGrid, spec) -> TorusField:
    """Field from an expression string, a number, a TorusField or a callable of the coordinates."""
    if isinstance(spec, TorusField):
        if spec.grid != grid:
            raise FieldSpecError("field lives on a different grid")
        return spec
    if isinstance(spec, Real):
        return TorusField(grid, float(spec))
    if callable(spec):
        return TorusField(grid, np.broadcast_to(spec(*grid.coords), grid.shape))
    if not isinstance(spec, str):
        raise FieldSpecError(f"cannot build a field from {type(spec).__name__}")
    try:
        tree = ast.parse(spec.strip(), mode="eval")
    except SyntaxError as exc:
        raise FieldSpecError(f"cannot parse field expression {spec!r}: {exc.msg}") from None
    value = _Evaluator(grid).eval(tree)
    return TorusField(grid, np.broadcast_to(np.asarray(value, dtype=float), grid.shape))


def random_field(grid: TorusGrid, rng: np.random.Generator, degree: int = 8,
                 decay: float = 1.0, scale: float = 1.0) -> TorusField:
    """Random real band-limited field with coefficients damped like <n>^-decay."""
    c = np.zeros(grid.shape, dtype=complex)
    band = np.all([np.abs(f) <= degree for f in grid.freqs], axis=0)
    noise = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    c[band] = noise[band] * (1.0 + grid.k2[band]) ** (-decay / 2)
    return TorusField.from_spectral(grid, scale * c)
