"""Core domain types: problem definitions, grids, and mesh functions.

All types here are immutable values after construction and safe to share
between workers.  Beyond validation this module does no numerics; solvers
live elsewhere.

A problem describes the singular two-point BVP

    -s''(x) - n s'(x) - (m/x) s'(x) = f(x, s),   x in (0, 1),  m > 0,
    s'(0) = 0,    a1 s(1) + a2 s'(1) = C,        a1 > 0, a2 >= 0.

Node x = 0 is part of every grid even though m/x is singular there: the
boundary condition s'(0) = 0 makes the limit (m/x) s' -> m s''(0) finite,
and the discrete operators use that limit rule.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import EvaluationFailed, SingularityStrengthNonpositive, ValidationError
from .stencils import fd_weights

__all__ = [
    "BoundaryForm",
    "ProblemSpec",
    "GridSpec",
    "MeshFunction",
    "validate_problem",
    "grid_nodes",
    "eval_on_grid",
    "mesh_from_values",
    "compile_expression",
    "problem_to_text",
    "problem_from_text",
]


@dataclass(frozen=True)
class BoundaryForm:
    """Robin data at x = 1: a1*s(1) + a2*s'(1) = C."""

    a1: float
    a2: float
    C: float

    def __post_init__(self):
        for name in ("a1", "a2", "C"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValidationError(f"boundary field {name} must be finite, got {value!r}")
        if self.a1 <= 0:
            raise ValidationError(f"a1 must be positive, got {self.a1}")
        if self.a2 < 0:
            raise ValidationError(f"a2 must be non-negative, got {self.a2}")


@dataclass(frozen=True)
class ProblemSpec:
    """A singular nonlinear diffusion two-point BVP.

    Parameters
    ----------
    m : float
        Strength of the singular coefficient m/x; must be positive.
    n : float
        Constant drift coefficient.
    boundary : BoundaryForm
        Robin data at x = 1.
    f : callable
        Source term f(x, s); must accept numpy arrays and stay finite on
        [0, 1] x [s_lo, s_hi] for any bracket handed to the solver.
    df_ds : callable, optional
        Partial derivative of f with respect to s.  Estimated by central
        differences when absent.
    lipschitz_L : float, optional
        One-sided Lipschitz constant (f(x,w1) - f(x,w2) >= -L (w1 - w2) for
        w2 <= w1).  Estimated by slope sampling when absent.
    label : str
        Human-readable name.
    f_expr : str, optional
        Formula for f in the flat text grammar; required for serialization.
    """

    m: float
    n: float
    boundary: BoundaryForm
    f: Callable
    df_ds: Optional[Callable] = None
    lipschitz_L: Optional[float] = None
    label: str = ""
    f_expr: Optional[str] = None


def validate_problem(p: ProblemSpec) -> ProblemSpec:
    """Check all ProblemSpec invariants; return p unchanged when they hold."""
    if not isinstance(p.m, (int, float)) or not math.isfinite(p.m):
        raise ValidationError(f"m must be finite, got {p.m!r}")
    if p.m <= 0:
        raise SingularityStrengthNonpositive(f"m must be positive, got {p.m}")
    if not isinstance(p.n, (int, float)) or not math.isfinite(p.n):
        raise ValidationError(f"n must be finite, got {p.n!r}")
    # BoundaryForm validates itself on construction; re-check in case of
    # a hand-built or mutated instance.
    if p.boundary.a1 <= 0 or p.boundary.a2 < 0 or not math.isfinite(p.boundary.C):
        raise ValidationError(f"invalid boundary form {p.boundary}")
    if not callable(p.f):
        raise ValidationError("f must be callable")
    if p.df_ds is not None and not callable(p.df_ds):
        raise ValidationError("df_ds must be callable when provided")
    if p.lipschitz_L is not None:
        if not math.isfinite(p.lipschitz_L) or p.lipschitz_L < 0:
            raise ValidationError(f"lipschitz_L must be finite and >= 0, got {p.lipschitz_L}")
    return p


@dataclass(frozen=True)
class GridSpec:
    """Node layout on [0, 1].

    node_count must be odd and at least 9 so that x = 1/2 is a node on
    uniform grids and split-quadrature panels nest across refinements.
    """

    node_count: int
    grading: str = "uniform"
    grading_exponent: float = 1.0

    def __post_init__(self):
        if self.node_count < 9 or self.node_count % 2 == 0:
            raise ValidationError(f"node_count must be odd and >= 9, got {self.node_count}")
        if self.grading not in ("uniform", "graded_toward_0"):
            raise ValidationError(f"unknown grading {self.grading!r}")
        if not math.isfinite(self.grading_exponent) or self.grading_exponent < 1:
            raise ValidationError(f"grading_exponent must be >= 1, got {self.grading_exponent}")


def grid_nodes(g: GridSpec) -> np.ndarray:
    """Node coordinates of a GridSpec, with exact endpoints 0 and 1."""
    u = np.linspace(0.0, 1.0, g.node_count)
    if g.grading == "uniform" or g.grading_exponent == 1.0:
        return u
    return u ** g.grading_exponent


@dataclass(frozen=True)
class MeshFunction:
    """Scalar function sampled on a fixed grid over [0, 1].

    Carries one-sided endpoint derivative estimates alongside the nodal
    values.  Instances are immutable; the arrays are marked read-only.
    """

    nodes: np.ndarray
    values: np.ndarray
    d_at_0: float
    d_at_1: float

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        values = np.ascontiguousarray(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape:
            raise ValidationError("nodes and values must be 1-D arrays of equal length")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise ValidationError("grid must start at 0 and end at 1")
        if not np.all(np.diff(nodes) > 0):
            raise ValidationError("nodes must be strictly increasing")
        if not np.all(np.isfinite(values)):
            bad = nodes[~np.isfinite(values)][0]
            raise ValidationError(f"non-finite value at node x={bad!r}")
        if not (math.isfinite(self.d_at_0) and math.isfinite(self.d_at_1)):
            raise ValidationError("endpoint derivative estimates must be finite")
        nodes.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.nodes)

    def same_grid(self, other: "MeshFunction") -> bool:
        return self.nodes.shape == other.nodes.shape and np.array_equal(self.nodes, other.nodes)

    def sup_diff(self, other: "MeshFunction") -> float:
        return float(np.max(np.abs(self.values - other.values)))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


def mesh_from_values(nodes: np.ndarray, values: np.ndarray) -> MeshFunction:
    """Wrap nodal values as a MeshFunction, estimating endpoint slopes.

    Endpoint derivatives come from one-sided 3-point stencils (exact for
    quadratics).
    """
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    d0 = float(fd_weights(nodes[:3], nodes[0], 1) @ values[:3])
    d1 = float(fd_weights(nodes[-3:], nodes[-1], 1) @ values[-3:])
    return MeshFunction(nodes, values, d0, d1)


def eval_on_grid(g: GridSpec, phi: Callable) -> MeshFunction:
    """Sample phi pointwise on the grid (no interpolation).

    Exact at nodes for any smooth phi; endpoint derivative estimates use
    one-sided 3-point differences and are exact for quadratics.
    """
    nodes = grid_nodes(g)
    try:
        raw = phi(nodes)
    except (TypeError, ValueError):
        raw = np.array([phi(x) for x in nodes], dtype=float)
    values = np.asarray(raw, dtype=float)
    if values.shape != nodes.shape:
        values = np.broadcast_to(values, nodes.shape).astype(float)
    if not np.all(np.isfinite(values)):
        bad = nodes[~np.isfinite(np.atleast_1d(values))][0]
        raise EvaluationFailed(f"phi is non-finite at node x={bad!r}")
    return mesh_from_values(nodes, values)


# ---------------------------------------------------------------------------
# Formula grammar and the flat key-value problem format.
#
# Grammar: the variables x and s, numeric literals, + - * / ^ with unary
# minus, and the functions exp, log, sin, cos, sqrt.  '^' means power.
# ---------------------------------------------------------------------------

_FUNCS = {"exp": np.exp, "log": np.log, "sin": np.sin, "cos": np.cos, "sqrt": np.sqrt}
_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)


def _check_node(node: ast.AST, variables) -> None:
    if isinstance(node, ast.Expression):
        _check_node(node.body, variables)
    elif isinstance(node, ast.BinOp) and isinstance(node.op, _BINOPS):
        _check_node(node.left, variables)
        _check_node(node.right, variables)
    elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        _check_node(node.operand, variables)
    elif isinstance(node, ast.Call):
        if (
            not isinstance(node.func, ast.Name)
            or node.func.id not in _FUNCS
            or len(node.args) != 1
            or node.keywords
        ):
            raise ValidationError(f"only {sorted(_FUNCS)} may be called, with one argument")
        _check_node(node.args[0], variables)
    elif isinstance(node, ast.Name):
        if node.id not in variables:
            raise ValidationError(f"unknown symbol {node.id!r}; allowed: {variables}")
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ValidationError(f"non-numeric literal {node.value!r}")
    else:
        raise ValidationError(f"construct {type(node).__name__} is outside the formula grammar")


def compile_expression(text: str, variables=("x", "s")) -> Callable:
    """Compile a formula into a vectorized callable of the given variables.

    Only the minimal grammar is admitted; anything else raises
    ValidationError before any evaluation happens.
    """
    if not isinstance(text, str) or not text.strip():
        raise ValidationError("empty formula")
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ValidationError(f"cannot parse formula {text!r}: {exc}") from exc
    _check_node(tree, tuple(variables))
    code = compile(tree, f"<formula {text!r}>", "eval")

    def evaluate(*args):
        env = dict(zip(variables, args))
        env.update(_FUNCS)
        return eval(code, {"__builtins__": {}}, env)

    evaluate.expression = text
    return evaluate


_KV_KEYS = ("m", "n", "a1", "a2", "C", "f_expr", "label")


def problem_to_text(p: ProblemSpec) -> str:
    """Serialize a problem to the flat key-value format (one key per line)."""
    if p.f_expr is None:
        raise ValidationError("problem has no f_expr; cannot serialize the source term")
    lines = [
        f"m = {p.m!r}",
        f"n = {p.n!r}",
        f"a1 = {p.boundary.a1!r}",
        f"a2 = {p.boundary.a2!r}",
        f"C = {p.boundary.C!r}",
        f"f_expr = {p.f_expr}",
        f"label = {p.label}",
    ]
    return "\n".join(lines) + "\n"


def problem_from_text(text: str) -> ProblemSpec:
    """Parse the flat key-value format back into a validated ProblemSpec."""
    fields = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _KV_KEYS:
            raise ValidationError(f"line {lineno}: unknown key {key!r}")
        fields[key] = value.strip()
    missing = [k for k in _KV_KEYS if k not in fields and k != "label"]
    if missing:
        raise ValidationError(f"missing keys: {missing}")
    try:
        numbers = {k: float(fields[k]) for k in ("m", "n", "a1", "a2", "C")}
    except ValueError as exc:
        raise ValidationError(f"non-numeric field: {exc}") from exc
    f_expr = fields["f_expr"]
    f = compile_expression(f_expr)
    p = ProblemSpec(
        m=numbers["m"],
        n=numbers["n"],
        boundary=BoundaryForm(numbers["a1"], numbers["a2"], numbers["C"]),
        f=f,
        label=fields.get("label", ""),
        f_expr=f_expr,
    )
    return validate_problem(p)
