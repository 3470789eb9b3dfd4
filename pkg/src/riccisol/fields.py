"""Charts and coordinate fields.

Everything downstream works with fields on a coordinate chart: callables on
points that also know how to produce their partial derivatives.  Two backends
exist:

* expression-backed fields (:class:`ExprField`) differentiate symbolically and
  are exact to rounding;
* callable-backed fields (:class:`FuncField`) differentiate with 2nd-order
  central differences, step ``fd_step`` (default 1e-4), and each further
  derivative level scales the step by 10 to keep cancellation error down.

Points are 1-d numpy arrays (any sequence is accepted); stacked evaluation is
supported by expression fields.
"""

from __future__ import annotations

import itertools

import numpy as np

from .expr import Expr, parse, compile_expr

DEFAULT_FD_STEP = 1e-4
FD_NEST_FACTOR = 10.0

__all__ = [
    "Chart", "ScalarField", "ExprField", "FuncField", "ConstField",
    "VectorField", "OneFormField", "TwoFormField", "SymTensorField",
    "MetricField", "VectorMap", "TensorAtPoint", "DomainError",
    "SingularMetricError", "as_scalar_field", "as_point", "log_field",
]


class DomainError(ValueError):
    """Point cannot be evaluated with the required finite-difference margin."""


class SingularMetricError(ValueError):
    """Metric matrix is numerically singular (condition number too large)."""


def as_point(p):
    return np.asarray(p, dtype=float)


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------

class Chart:
    """A coordinate box with a finite-difference step policy.

    Parameters
    ----------
    coord_names : coordinate names, also the variables expression fields use.
    box : (dim, 2) array of [lo, hi] bounds.
    fd_step : base central-difference step.
    grid_counts : default per-axis sample counts for grids.
    margin : inset applied when generating grid/sample points so every sample
        keeps a safe finite-difference margin from the boundary.
    predicate : optional extra point test (e.g. to cut out singular loci).
    """

    def __init__(self, coord_names, box, fd_step=DEFAULT_FD_STEP,
                 grid_counts=None, margin=None, predicate=None):
        self.coord_names = list(coord_names)
        self.dim = len(self.coord_names)
        if self.dim not in (2, 3):
            raise ValueError("charts are 2- or 3-dimensional")
        self.box = np.asarray(box, dtype=float).reshape(self.dim, 2)
        if fd_step <= 0:
            raise ValueError("fd_step must be positive")
        self.fd_step = float(fd_step)
        self.grid_counts = tuple(grid_counts) if grid_counts else (5,) * self.dim
        widths = self.box[:, 1] - self.box[:, 0]
        self.margin = float(margin) if margin is not None else float(
            max(0.02 * widths.min(), 4.0 * self.fd_step))
        self.predicate = predicate

    @property
    def base_point(self):
        return self.box.mean(axis=1)

    def contains(self, p, pad=0.0):
        p = as_point(p)
        inside = np.all(p >= self.box[:, 0] - 1e-12 + pad) and \
            np.all(p <= self.box[:, 1] + 1e-12 - pad)
        if not inside:
            return False
        if self.predicate is not None and not self.predicate(p):
            return False
        return True

    def require_fd_safe(self, p):
        if not self.contains(p, pad=2.0 * self.fd_step):
            raise DomainError(f"point {np.asarray(p)} outside fd-safe domain of chart {self.coord_names}")

    def grid(self, counts=None, margin=None):
        """Deterministic box grid, inset by the chart margin."""
        counts = tuple(counts) if counts else self.grid_counts
        margin = self.margin if margin is None else margin
        axes = [np.linspace(lo + margin, hi - margin, c)
                for (lo, hi), c in zip(self.box, counts)]
        pts = [np.array(p) for p in itertools.product(*axes)]
        if self.predicate is not None:
            pts = [p for p in pts if self.predicate(p)]
        return pts

    def sample_points(self, n, seed):
        """Seeded uniform samples, margin-inset, deterministic order."""
        rng = np.random.default_rng(seed)
        lo = self.box[:, 0] + self.margin
        hi = self.box[:, 1] - self.margin
        pts = []
        while len(pts) < n:
            p = lo + (hi - lo) * rng.random(self.dim)
            if self.predicate is None or self.predicate(p):
                pts.append(p)
        return pts

    def product_with_interval(self, name, lo, hi, **kw):
        """Cartesian product chart (used to build M = N x (-delta, delta))."""
        box = np.vstack([self.box, [lo, hi]])
        return Chart(self.coord_names + [name], box,
                     fd_step=self.fd_step, margin=kw.get("margin", self.margin),
                     grid_counts=kw.get("grid_counts"),
                     predicate=(lambda p: self.predicate(p[:self.dim])) if self.predicate else None)


# ---------------------------------------------------------------------------
# scalar fields
# ---------------------------------------------------------------------------

class ScalarField:
    """Base scalar field; subclasses implement value and partials."""

    coord_names: list
    fd_step: float = DEFAULT_FD_STEP

    def __call__(self, p):
        raise NotImplementedError

    def partial(self, i) -> "ScalarField":
        raise NotImplementedError

    def grad_values(self, p):
        return np.array([self.partial(i)(p) for i in range(len(self.coord_names))])

    def hess_values(self, p):
        n = len(self.coord_names)
        H = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                H[i, j] = H[j, i] = self.second(i, j, p)
        return H

    def second(self, i, j, p):
        return self.partial(i).partial(j)(p)

    @property
    def is_exact(self):
        return False


class ExprField(ScalarField):
    """Expression-backed field with exact symbolic partials."""

    def __init__(self, expression, coord_names):
        self.expr = parse(expression)
        self.coord_names = list(coord_names)
        self._fn = compile_expr(self.expr, self.coord_names)
        self._partials = {}

    def __call__(self, p):
        return float(self._fn(as_point(p)))

    def values(self, pts):
        return self._fn(np.asarray(pts, dtype=float))

    def partial(self, i):
        f = self._partials.get(i)
        if f is None:
            f = ExprField(self.expr.diff(self.coord_names[i]), self.coord_names)
            self._partials[i] = f
        return f

    def second(self, i, j, p):
        return self.partial(i).partial(j)(p)

    @property
    def is_exact(self):
        return True

    def numeric_mode(self, fd_step=DEFAULT_FD_STEP):
        """Forget the symbolic partials; differentiate by central differences."""
        return FuncField(self._fn, self.coord_names, fd_step=fd_step)


class FuncField(ScalarField):
    """Callable-backed field; derivatives by central differences."""

    def __init__(self, func, coord_names, fd_step=DEFAULT_FD_STEP):
        self.func = func
        self.coord_names = list(coord_names)
        self.fd_step = float(fd_step)

    def __call__(self, p):
        return float(self.func(as_point(p)))

    def partial(self, i):
        h = self.fd_step
        f = self.func

        def dfunc(p, _f=f, _i=i, _h=h):
            q = np.array(p, dtype=float)
            q[_i] += _h
            up = float(_f(q))
            q[_i] -= 2.0 * _h
            lo = float(_f(q))
            return (up - lo) / (2.0 * _h)

        return FuncField(dfunc, self.coord_names, fd_step=h * FD_NEST_FACTOR)

    def second(self, i, j, p):
        h = self.fd_step
        p = as_point(p)
        f = self.func
        if i == j:
            e = np.zeros_like(p)
            e[i] = h
            return (float(f(p + e)) - 2.0 * float(f(p)) + float(f(p - e))) / (h * h)
        ei = np.zeros_like(p)
        ej = np.zeros_like(p)
        ei[i] = h
        ej[j] = h
        return (float(f(p + ei + ej)) - float(f(p + ei - ej))
                - float(f(p - ei + ej)) + float(f(p - ei - ej))) / (4.0 * h * h)


class ConstField(ScalarField):
    def __init__(self, value, coord_names):
        self.value = float(value)
        self.coord_names = list(coord_names)

    def __call__(self, p):
        return self.value

    def partial(self, i):
        return ConstField(0.0, self.coord_names)

    def second(self, i, j, p):
        return 0.0

    @property
    def is_exact(self):
        return True


def as_scalar_field(obj, coord_names, fd_step=DEFAULT_FD_STEP):
    """Coerce an expression string / Expr / number / callable into a field."""
    if isinstance(obj, ScalarField):
        return obj
    if isinstance(obj, (int, float)):
        return ConstField(obj, coord_names)
    if isinstance(obj, (str, Expr)):
        return ExprField(obj, coord_names)
    if callable(obj):
        return FuncField(obj, coord_names, fd_step=fd_step)
    raise TypeError(f"cannot interpret {obj!r} as a scalar field")


def log_field(field):
    """ln of a positive scalar field, exact when the field is an expression."""
    if isinstance(field, ExprField):
        from .expr import Call
        return ExprField(Call("log", field.expr), field.coord_names)
    if isinstance(field, ConstField):
        return ConstField(np.log(field.value), field.coord_names)
    step = getattr(field, "fd_step", DEFAULT_FD_STEP)
    return FuncField(lambda p, _f=field: np.log(_f(p)), field.coord_names, fd_step=step)


def pullback_scalar(field_on_base, projection):
    """field o projection; exact when both sides are expression-backed."""
    if isinstance(field_on_base, ConstField):
        return ConstField(field_on_base.value, projection.coord_names)
    if isinstance(field_on_base, ExprField) and projection.is_exact:
        mapping = {name: comp.expr for name, comp in
                   zip(field_on_base.coord_names, projection.components)}
        return ExprField(field_on_base.expr.subs(mapping), projection.coord_names)
    return FuncField(lambda p, _f=field_on_base, _pi=projection: _f(_pi(p)),
                     projection.coord_names, fd_step=projection.fd_step)


# ---------------------------------------------------------------------------
# tensor-at-a-point container
# ---------------------------------------------------------------------------

_TENSOR_KINDS = {"scalar", "vector", "oneform", "twoform", "threeform",
                 "symtensor", "christoffel", "riemann"}


class TensorAtPoint:
    """Component values of a tensor at a single point."""

    def __init__(self, kind, components):
        if kind not in _TENSOR_KINDS:
            raise ValueError(f"unknown tensor kind {kind!r}")
        self.kind = kind
        self.components = np.asarray(components, dtype=float)
        self._validate()

    def _validate(self):
        c = self.components
        if self.kind == "twoform" and not np.allclose(c, -c.T, atol=1e-10):
            raise ValueError("two-form components must be antisymmetric")
        if self.kind == "symtensor" and not np.allclose(c, c.T, atol=1e-10):
            raise ValueError("symmetric tensor components must be symmetric")
        if self.kind == "christoffel":
            if not np.allclose(c, np.swapaxes(c, 1, 2), atol=1e-10):
                raise ValueError("christoffel symbols must be symmetric in the lower indices")

    def __repr__(self):
        return f"TensorAtPoint({self.kind}, {self.components!r})"


# ---------------------------------------------------------------------------
# component fields (vectors, forms, symmetric tensors, maps)
# ---------------------------------------------------------------------------

class _ComponentField:
    """Shared machinery for fields with several scalar components."""

    def __init__(self, components, coord_names, fd_step=DEFAULT_FD_STEP):
        self.coord_names = list(coord_names)
        self.fd_step = fd_step
        self.components = [as_scalar_field(c, self.coord_names, fd_step) for c in components]

    def values(self, p):
        p = as_point(p)
        return np.array([c(p) for c in self.components])

    def partial_values(self, i, p):
        p = as_point(p)
        return np.array([c.partial(i)(p) for c in self.components])

    def jacobian(self, p):
        """J[a, i] = d(component a)/d(coordinate i)."""
        p = as_point(p)
        return np.array([[c.partial(i)(p) for i in range(len(self.coord_names))]
                         for c in self.components])

    @property
    def is_exact(self):
        return all(c.is_exact for c in self.components)

    def numeric_mode(self, fd_step=DEFAULT_FD_STEP):
        comps = [c.numeric_mode(fd_step) if isinstance(c, ExprField) else c
                 for c in self.components]
        return type(self)(comps, self.coord_names, fd_step=fd_step)


class VectorField(_ComponentField):
    def __call__(self, p):
        return self.values(p)


class OneFormField(_ComponentField):
    def __call__(self, p):
        return self.values(p)


class VectorMap(_ComponentField):
    """Smooth map between charts, componentwise (e.g. the projection phi)."""

    def __call__(self, p):
        return self.values(p)


class TwoFormField:
    """Antisymmetric rank-2 field, stored as the full component matrix."""

    def __init__(self, comp_matrix, coord_names, fd_step=DEFAULT_FD_STEP):
        self.coord_names = list(coord_names)
        self.fd_step = fd_step
        self.comps = [[as_scalar_field(c, self.coord_names, fd_step) for c in row]
                      for row in comp_matrix]

    def values(self, p):
        p = as_point(p)
        n = len(self.coord_names)
        M = np.array([[self.comps[i][j](p) for j in range(n)] for i in range(n)])
        return M

    def partial_values(self, k, p):
        p = as_point(p)
        n = len(self.coord_names)
        return np.array([[self.comps[i][j].partial(k)(p) for j in range(n)]
                         for i in range(n)])

    @classmethod
    def from_upper(cls, entries, coord_names, fd_step=DEFAULT_FD_STEP):
        """entries maps (i, j) with i<j to a component; the rest is filled in."""
        n = len(coord_names)
        mat = [[0.0] * n for _ in range(n)]
        for (i, j), val in entries.items():
            f = as_scalar_field(val, coord_names, fd_step)
            mat[i][j] = f
            mat[j][i] = _negate(f)
        return cls(mat, coord_names, fd_step)


def _negate(field):
    if isinstance(field, ExprField):
        from .expr import neg
        return ExprField(neg(field.expr), field.coord_names)
    if isinstance(field, ConstField):
        return ConstField(-field.value, field.coord_names)
    return FuncField(lambda p, _f=field: -_f(p), field.coord_names,
                     fd_step=getattr(field, "fd_step", DEFAULT_FD_STEP))


class SymTensorField:
    def __init__(self, comp_matrix, coord_names, fd_step=DEFAULT_FD_STEP):
        self.coord_names = list(coord_names)
        self.fd_step = fd_step
        n = len(coord_names)
        fields = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                f = as_scalar_field(comp_matrix[i][j], coord_names, fd_step)
                fields[i][j] = f
                fields[j][i] = f
        self.comps = fields

    def values(self, p):
        p = as_point(p)
        n = len(self.coord_names)
        return np.array([[self.comps[i][j](p) for j in range(n)] for i in range(n)])

    def partial_values(self, k, p):
        p = as_point(p)
        n = len(self.coord_names)
        out = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                out[i, j] = out[j, i] = self.comps[i][j].partial(k)(p)
        return out

    def second_values(self, k, l, p):
        p = as_point(p)
        n = len(self.coord_names)
        out = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                out[i, j] = out[j, i] = self.comps[i][j].second(k, l, p)
        return out

    @property
    def is_exact(self):
        n = len(self.coord_names)
        return all(self.comps[i][j].is_exact for i in range(n) for j in range(i, n))


# ---------------------------------------------------------------------------
# metric fields
# ---------------------------------------------------------------------------

CONDITION_CAP = 1e10


class MetricField:
    """Positive-definite symmetric rank-2 field with an orientation.

    Component values, inverses and Christoffel symbols are memoised per point
    (exact byte-level keys), which makes repeated stencil evaluation cheap.
    """

    def __init__(self, chart, comp_matrix, orientation=1):
        self.chart = chart
        if orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        self.orientation = orientation
        if isinstance(comp_matrix, SymTensorField):
            self.tensor = comp_matrix
        else:
            self.tensor = SymTensorField(comp_matrix, chart.coord_names, chart.fd_step)
        self._cache = {}

    # -- constructors -------------------------------------------------
    @classmethod
    def from_exprs(cls, chart, rows, orientation=1):
        return cls(chart, rows, orientation)

    @classmethod
    def from_matrix_callable(cls, chart, func, orientation=1, fd_step=None):
        """Build from p -> matrix; the matrix is cached so component fields share it."""
        step = fd_step if fd_step is not None else chart.fd_step
        cache = {}

        def entry(p, _i, _j):
            key = p.tobytes()
            M = cache.get(key)
            if M is None:
                M = np.asarray(func(p), dtype=float)
                if len(cache) > 400000:
                    cache.clear()
                cache[key] = M
            return M[_i, _j]

        n = chart.dim
        comps = [[FuncField((lambda p, i=i, j=j: entry(as_point(p), i, j)),
                            chart.coord_names, fd_step=step)
                  for j in range(n)] for i in range(n)]
        return cls(chart, comps, orientation)

    @classmethod
    def flat(cls, chart, orientation=1):
        n = chart.dim
        rows = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
        return cls(chart, rows, orientation)

    def scaled(self, factor):
        """Constant multiple c*g (used by the curvature scale-invariance test)."""
        n = self.chart.dim
        rows = [[_scale(self.tensor.comps[i][j], factor) for j in range(n)] for i in range(n)]
        return MetricField(self.chart, rows, self.orientation)

    def numeric_mode(self, fd_step=None):
        step = fd_step if fd_step is not None else self.chart.fd_step
        n = self.chart.dim
        rows = [[self.tensor.comps[i][j].numeric_mode(step)
                 if isinstance(self.tensor.comps[i][j], ExprField) else self.tensor.comps[i][j]
                 for j in range(n)] for i in range(n)]
        return MetricField(self.chart, rows, self.orientation)

    # -- evaluation ---------------------------------------------------
    def _memo(self, tag, p, builder):
        key = (tag, p.tobytes())
        val = self._cache.get(key)
        if val is None:
            val = builder()
            if len(self._cache) > 400000:
                self._cache.clear()
            self._cache[key] = val
        return val

    def matrix(self, p):
        p = as_point(p)
        return self._memo("g", p, lambda: self.tensor.values(p))

    def inverse(self, p):
        p = as_point(p)

        def build():
            M = self.matrix(p)
            if np.linalg.cond(M) > CONDITION_CAP:
                raise SingularMetricError(
                    f"metric condition number exceeds {CONDITION_CAP:g} at {p}")
            return np.linalg.inv(M)

        return self._memo("ginv", p, build)

    def partial_matrix(self, k, p):
        p = as_point(p)
        return self._memo(("dg", k), p, lambda: self.tensor.partial_values(k, p))

    def second_matrix(self, k, l, p):
        p = as_point(p)
        kk, ll = (k, l) if k <= l else (l, k)
        return self._memo(("ddg", kk, ll), p, lambda: self.tensor.second_values(kk, ll, p))

    def sqrt_det(self, p):
        return float(np.sqrt(np.linalg.det(self.matrix(p))))

    def norm_vector(self, X, p):
        X = np.asarray(X, dtype=float)
        return float(np.sqrt(max(X @ self.matrix(p) @ X, 0.0)))

    @property
    def is_exact(self):
        return self.tensor.is_exact


def _scale(field, factor):
    if isinstance(field, ExprField):
        from .expr import mul, Num
        return ExprField(mul(Num(factor), field.expr), field.coord_names)
    if isinstance(field, ConstField):
        return ConstField(factor * field.value, field.coord_names)
    return FuncField(lambda p, _f=field: factor * _f(p), field.coord_names,
                     fd_step=getattr(field, "fd_step", DEFAULT_FD_STEP))


# ---------------------------------------------------------------------------
# field algebra (exact when both operands are expression-backed)
# ---------------------------------------------------------------------------

def _combine(a, b, expr_op, func_op):
    if isinstance(a, (int, float)):
        a = ConstField(a, b.coord_names)
    if isinstance(b, (int, float)):
        b = ConstField(b, a.coord_names)
    names = a.coord_names
    if isinstance(a, ConstField) and isinstance(b, ConstField):
        return ConstField(func_op(a.value, b.value), names)
    ea = _to_expr(a)
    eb = _to_expr(b)
    if ea is not None and eb is not None:
        return ExprField(expr_op(ea, eb), names)
    step = max(getattr(a, "fd_step", DEFAULT_FD_STEP), getattr(b, "fd_step", DEFAULT_FD_STEP))
    return FuncField(lambda p, _a=a, _b=b: func_op(_a(p), _b(p)), names, fd_step=step)


def _to_expr(field):
    from .expr import Num
    if isinstance(field, ExprField):
        return field.expr
    if isinstance(field, ConstField):
        return Num(field.value)
    return None


def field_add(a, b):
    from .expr import add
    return _combine(a, b, add, lambda x, y: x + y)


def field_sub(a, b):
    from .expr import sub
    return _combine(a, b, sub, lambda x, y: x - y)


def field_mul(a, b):
    from .expr import mul
    return _combine(a, b, mul, lambda x, y: x * y)


def field_div(a, b):
    from .expr import div
    return _combine(a, b, div, lambda x, y: x / y)


def field_scale(a, c):
    return _scale(a, c)


def field_neg(a):
    return _negate(a)


def sqrt_field(field):
    if isinstance(field, ExprField):
        from .expr import Call
        return ExprField(Call("sqrt", field.expr), field.coord_names)
    if isinstance(field, ConstField):
        return ConstField(np.sqrt(field.value), field.coord_names)
    step = getattr(field, "fd_step", DEFAULT_FD_STEP)
    return FuncField(lambda p, _f=field: np.sqrt(_f(p)), field.coord_names, fd_step=step)
