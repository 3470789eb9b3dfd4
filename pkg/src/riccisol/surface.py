"""Surface data packs: the inputs of the soliton construction on (N^2, h).

A pack carries the four scalar fields (lambda, rho, nu, psi) and the constant
A on a 2-chart.  nu may be replaced by a raw vector field Y (then div Y-flat
substitutes for the Laplacian of ln nu and sym(nabla Y-flat) for its Hessian);
this generalised variant is accepted but carries no worked example, so it is
flagged experimental in reports.

The JSON document format uses expression strings for the metric components and
the fields; it is the shared input format of the command-line driver.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import tensor_lab as tl
from .fields import (Chart, ConstField, MetricField, OneFormField, ScalarField,
                     TwoFormField, VectorField, as_point, as_scalar_field,
                     field_add, field_mul, field_neg, field_scale, field_sub,
                     log_field, sqrt_field)

__all__ = ["SurfaceData", "SurfaceDataError", "load_surface_data",
           "surface_data_from_dict"]


class SurfaceDataError(ValueError):
    """Malformed surface-data document."""


@dataclass
class SurfaceData:
    chart: Chart
    h: MetricField
    lambda_bar: ScalarField
    rho_bar: ScalarField
    psi_bar: ScalarField
    A: float
    nu_bar: ScalarField | None = None
    Y_bar: VectorField | None = None
    name: str = ""

    def __post_init__(self):
        if (self.nu_bar is None) == (self.Y_bar is None):
            raise SurfaceDataError("exactly one of nu / Y must be given")

    @property
    def experimental(self):
        return self.Y_bar is not None

    # -- logs and gradients --------------------------------------------
    def ln_lambda(self):
        return log_field(self.lambda_bar)

    def ln_rho(self):
        return log_field(self.rho_bar)

    def ln_nu(self):
        if self.nu_bar is None:
            raise SurfaceDataError("pack uses the raw vector field variant; ln nu unavailable")
        return log_field(self.nu_bar)

    def x_oneform_values(self, p):
        """Values of the 1-form standing in for d ln nu."""
        p = as_point(p)
        if self.nu_bar is not None:
            return self.ln_nu().grad_values(p)
        return self.h.matrix(p) @ self.Y_bar.values(p)

    def x_vector_values(self, p):
        p = as_point(p)
        if self.nu_bar is not None:
            return self.h.inverse(p) @ self.ln_nu().grad_values(p)
        return self.Y_bar.values(p)

    def x_divergence(self, p):
        """Delta ln nu, or div Y-flat in the generalised variant."""
        p = as_point(p)
        if self.nu_bar is not None:
            return tl.laplacian(self.h, self.ln_nu(), p)
        flat = self._y_flat()
        return -tl.codifferential_oneform(self.h, flat, p)

    def x_hessian(self, p):
        """nabla d ln nu, or the symmetrised covariant derivative of Y-flat."""
        p = as_point(p)
        if self.nu_bar is not None:
            return tl.covariant_hessian(self.h, self.ln_nu(), p).components
        return 0.5 * tl.lie_derivative_metric(self.h, self.Y_bar, p).components

    def _y_flat(self):
        names = self.chart.coord_names
        comps = []
        for j in range(2):
            acc = ConstField(0.0, names)
            for k in range(2):
                acc = field_add(acc, field_mul(self.h.tensor.comps[j][k],
                                               self.Y_bar.components[k]))
            comps.append(acc)
        return OneFormField(comps, names)

    # -- derived forms ---------------------------------------------------
    def sigma_bar(self):
        """sigma = sqrt(2 psi) / lambda^2 (orientation-positive density)."""
        num = sqrt_field(field_scale(self.psi_bar, 2.0))
        den = field_mul(self.lambda_bar, self.lambda_bar)
        from .fields import field_div
        return field_div(num, den)

    def area_field(self):
        c = self.h.tensor.comps
        det = field_sub(field_mul(c[0][0], c[1][1]), field_mul(c[0][1], c[0][1]))
        return field_scale(sqrt_field(det), float(self.h.orientation))

    def omega_bar(self):
        """Omega-bar = sigma-bar times the area form of (N, h)."""
        names = self.chart.coord_names
        c01 = field_mul(self.sigma_bar(), self.area_field())
        return TwoFormField([[ConstField(0.0, names), c01],
                             [field_neg(c01), ConstField(0.0, names)]], names)

    def rho_omega_coefficient(self):
        """Scalar coefficient of the closed 2-form rho-bar Omega-bar."""
        return field_mul(self.rho_bar, field_mul(self.sigma_bar(), self.area_field()))


# ---------------------------------------------------------------------------
# document format
# ---------------------------------------------------------------------------

def _chart_from_dict(d):
    try:
        coords = d["coords"]
        box = d["box"]
    except KeyError as e:
        raise SurfaceDataError(f"chart needs {e.args[0]!r}")
    return Chart(coords, box,
                 fd_step=float(d.get("fd_step", 1e-4)),
                 grid_counts=d.get("grid"),
                 margin=d.get("margin"))


def surface_data_from_dict(doc) -> SurfaceData:
    if not isinstance(doc, dict):
        raise SurfaceDataError("surface data document must be a JSON object")
    for key in ("chart", "metric", "lambda", "rho", "psi", "A"):
        if key not in doc:
            raise SurfaceDataError(f"missing field {key!r}")
    chart = _chart_from_dict(doc["chart"])
    if chart.dim != 2:
        raise SurfaceDataError("surface chart must be 2-dimensional")
    names = chart.coord_names
    rows = doc["metric"]
    if len(rows) != 2 or any(len(r) != 2 for r in rows):
        raise SurfaceDataError("metric must be a 2x2 matrix of expressions")
    try:
        h = MetricField(chart, rows, orientation=int(doc.get("orientation", 1)))
        lam = as_scalar_field(doc["lambda"], names)
        rho = as_scalar_field(doc["rho"], names)
        psi = as_scalar_field(doc["psi"], names)
        nu = as_scalar_field(doc["nu"], names) if "nu" in doc else None
        Y = None
        if "Y" in doc:
            comps = doc["Y"]
            if len(comps) != 2:
                raise SurfaceDataError("Y must have 2 components")
            Y = VectorField(comps, names)
    except SurfaceDataError:
        raise
    except Exception as e:
        raise SurfaceDataError(f"cannot parse surface data fields: {e}") from e
    if ("nu" in doc) == ("Y" in doc):
        raise SurfaceDataError("give exactly one of 'nu' or 'Y'")
    return SurfaceData(chart=chart, h=h, lambda_bar=lam, rho_bar=rho,
                       psi_bar=psi, A=float(doc["A"]), nu_bar=nu, Y_bar=Y,
                       name=str(doc.get("name", "")))


def load_surface_data(path) -> SurfaceData:
    try:
        with open(path) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise SurfaceDataError(f"cannot read surface data {path}: {e}") from e
    return surface_data_from_dict(doc)


def validate_positivity(data: SurfaceData, points=None):
    """lambda, rho, nu > 0 and psi >= 0 on the grid; raises on violation."""
    pts = points if points is not None else data.chart.grid()
    for p in pts:
        if data.lambda_bar(p) <= 0 or data.rho_bar(p) <= 0:
            raise SurfaceDataError(f"nonpositive lambda/rho at {p}")
        if data.nu_bar is not None and data.nu_bar(p) <= 0:
            raise SurfaceDataError(f"nonpositive nu at {p}")
        if data.psi_bar(p) < -1e-12:
            raise SurfaceDataError(f"negative psi at {p}")
    return True
