"""Coordinate-chart tensor calculus.

Curvature, Lie derivatives, Hessians, exterior calculus and musical
isomorphisms on 2- and 3-dimensional charts.  Conventions:

* Ricci is fixed so the round unit 2-sphere has Ricci = +h and K = +1:
  Ric_ij = d_k G^k_ij - d_i G^k_kj + G^k_kl G^l_ij - G^k_il G^l_kj.
* The Laplacian is the metric trace of the covariant Hessian (f'' > 0 on
  convex functions, Delta f = f'' in one variable).
* For a 1-form, d*w = -g^{ij} (nabla_i w)_j; for a 2-form,
  (d*W)_j = -g^{ik} (nabla_i W)_{kj}.  This sign is pinned by the volume-form
  contraction identity d*(a mu) = -mu . grad a, which the test-suite checks on
  flat and hyperbolic charts.
* Tensor norms raise every slot with g, equal to orthonormal-frame sums over
  ordered index tuples (so ||W||^2 of a 2-form double counts each pair).
"""

from __future__ import annotations

import numpy as np

from .fields import (MetricField, ScalarField, TensorAtPoint, VectorField,
                     OneFormField, TwoFormField, as_point)

__all__ = [
    "christoffel", "christoffel_matrix", "christoffel_derivatives",
    "curvature", "CurvatureResult", "lie_derivative_metric",
    "covariant_hessian", "laplacian", "exterior_derivative",
    "codifferential_oneform", "codifferential_twoform", "sharp", "flat",
    "norm_sq", "volume_form", "sym_product", "trace_free_part",
]


# ---------------------------------------------------------------------------
# connection
# ---------------------------------------------------------------------------

def christoffel_matrix(g: MetricField, p):
    """Levi-Civita symbols G[k, i, j] at p (cached on the metric)."""
    p = as_point(p)

    def build():
        g.chart.require_fd_safe(p)
        ginv = g.inverse(p)
        n = g.chart.dim
        dg = np.array([g.partial_matrix(k, p) for k in range(n)])  # dg[k, i, j]
        # G^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)
        bracket = np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg
        return 0.5 * np.einsum("kl,lij->kij", ginv, bracket)

    return g._memo("gamma", p, build)


def christoffel(g: MetricField, p) -> TensorAtPoint:
    return TensorAtPoint("christoffel", christoffel_matrix(g, p))


def christoffel_derivatives(g: MetricField, p):
    """dG[m, k, i, j] = d_m G^k_ij, from first and second metric derivatives."""
    p = as_point(p)

    def build():
        n = g.chart.dim
        ginv = g.inverse(p)
        dg = np.array([g.partial_matrix(k, p) for k in range(n)])
        ddg = np.array([[g.second_matrix(m, k, p) for k in range(n)] for m in range(n)])
        # bracket_l_ij = d_i g_jl + d_j g_il - d_l g_ij
        bracket = np.einsum("ijl->lij", dg) + np.einsum("jli->lij", dg) - dg
        dbracket = (np.einsum("mijl->mlij", ddg) + np.einsum("mjli->mlij", ddg)
                    - ddg)
        dginv = -np.einsum("ka,mab,bl->mkl", ginv, dg, ginv)
        return (0.5 * np.einsum("mkl,lij->mkij", dginv, bracket)
                + 0.5 * np.einsum("kl,mlij->mkij", ginv, dbracket))

    return g._memo("dgamma", p, build)


# ---------------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------------

class CurvatureResult:
    """Riemann / Ricci / scalar curvature at a point (plus K in dim 2)."""

    def __init__(self, riemann, ricci, scalar, gauss=None):
        self.riemann = TensorAtPoint("riemann", riemann) if not isinstance(riemann, TensorAtPoint) else riemann
        self.ricci = TensorAtPoint("symtensor", ricci) if not isinstance(ricci, TensorAtPoint) else ricci
        self.scalar = scalar
        self.gauss = gauss


def curvature(g: MetricField, p) -> CurvatureResult:
    p = as_point(p)
    G = christoffel_matrix(g, p)
    dG = christoffel_derivatives(g, p)
    # R^a_bcd = d_c G^a_db - d_d G^a_cb + G^a_ce G^e_db - G^a_de G^e_cb
    riem = (np.einsum("cadb->abcd", dG) - np.einsum("dacb->abcd", dG)
            + np.einsum("ace,edb->abcd", G, G) - np.einsum("ade,ecb->abcd", G, G))
    ricci = np.einsum("abad->bd", riem)
    ricci = 0.5 * (ricci + ricci.T)
    scalar = float(np.einsum("ij,ij->", g.inverse(p), ricci))
    gauss = 0.5 * scalar if g.chart.dim == 2 else None
    return CurvatureResult(riem, ricci, scalar, gauss)


def riemann_norm(g: MetricField, p):
    """Invariant norm of the fully covariant Riemann tensor at p."""
    p = as_point(p)
    res = curvature(g, p)
    gm = g.matrix(p)
    gi = g.inverse(p)
    R = np.einsum("ae,ebcd->abcd", gm, res.riemann.components)
    sq = np.einsum("abcd,ax,by,cz,dw,xyzw->", R, gi, gi, gi, gi, R)
    return float(np.sqrt(max(sq, 0.0)))


# ---------------------------------------------------------------------------
# derivatives of tensors along fields
# ---------------------------------------------------------------------------

def lie_derivative_metric(g: MetricField, E: VectorField, p) -> TensorAtPoint:
    """(L_E g)_ij = E^k d_k g_ij + g_kj d_i E^k + g_ik d_j E^k."""
    p = as_point(p)
    n = g.chart.dim
    Ev = E.values(p)
    dE = np.array([E.partial_values(i, p) for i in range(n)])  # dE[i, k] = d_i E^k
    gm = g.matrix(p)
    dg = np.array([g.partial_matrix(k, p) for k in range(n)])
    out = np.einsum("k,kij->ij", Ev, dg) + dE @ gm + (dE @ gm).T
    return TensorAtPoint("symtensor", 0.5 * (out + out.T))


def covariant_hessian(g: MetricField, F: ScalarField, p) -> TensorAtPoint:
    """(nabla dF)_ij = d_i d_j F - G^k_ij d_k F."""
    p = as_point(p)
    G = christoffel_matrix(g, p)
    H = F.hess_values(p) - np.einsum("kij,k->ij", G, F.grad_values(p))
    return TensorAtPoint("symtensor", 0.5 * (H + H.T))


def laplacian(g: MetricField, F: ScalarField, p) -> float:
    return float(np.einsum("ij,ij->", g.inverse(p),
                           covariant_hessian(g, F, p).components))


# ---------------------------------------------------------------------------
# exterior calculus
# ---------------------------------------------------------------------------

def exterior_derivative(omega, p, degree=None) -> TensorAtPoint:
    """d of a 0-, 1- or 2-form field (metric independent).

    Degree-3 input on a 3-chart is rejected: the result is identically zero.
    """
    p = as_point(p)
    if isinstance(omega, ScalarField):
        return TensorAtPoint("oneform", omega.grad_values(p))
    if isinstance(omega, (OneFormField,)) or (degree == 1):
        n = len(omega.coord_names)
        dA = np.array([omega.partial_values(i, p) for i in range(n)])  # dA[i, j] = d_i w_j
        return TensorAtPoint("twoform", dA - dA.T)
    if isinstance(omega, TwoFormField) or (degree == 2):
        n = len(omega.coord_names)
        if n == 2:
            raise ValueError("d of a 2-form on a 2-chart is a 3-form: identically zero")
        d0 = omega.partial_values(0, p)
        d1 = omega.partial_values(1, p)
        d2 = omega.partial_values(2, p)
        comp = d0[1, 2] - d1[0, 2] + d2[0, 1]
        return TensorAtPoint("threeform", np.array([comp]))
    raise ValueError("degree-3 forms on a 3-chart have vanishing exterior derivative; not computed")


def _cov_deriv_oneform(g, omega, p):
    """(nabla_i w)_j = d_i w_j - G^k_ij w_k."""
    n = g.chart.dim
    G = christoffel_matrix(g, p)
    w = omega.values(p)
    dw = np.array([omega.partial_values(i, p) for i in range(n)])
    return dw - np.einsum("kij,k->ij", G, w)


def codifferential_oneform(g: MetricField, omega: OneFormField, p) -> float:
    p = as_point(p)
    nab = _cov_deriv_oneform(g, omega, p)
    return float(-np.einsum("ij,ij->", g.inverse(p), nab))


def codifferential_twoform(g: MetricField, W: TwoFormField, p) -> TensorAtPoint:
    """(d*W)_j = -g^{ik} (nabla_i W)_{kj}."""
    p = as_point(p)
    n = g.chart.dim
    G = christoffel_matrix(g, p)
    Wv = W.values(p)
    dW = np.array([W.partial_values(i, p) for i in range(n)])  # dW[i, k, j]
    nab = dW - np.einsum("lik,lj->ikj", G, Wv) - np.einsum("lij,kl->ikj", G, Wv)
    return TensorAtPoint("oneform", -np.einsum("ik,ikj->j", g.inverse(p), nab))


def volume_form(g: MetricField, p) -> TensorAtPoint:
    """sqrt(det g) dx^1 ^ ... ^ dx^n, times the chart orientation."""
    p = as_point(p)
    n = g.chart.dim
    s = g.orientation * g.sqrt_det(p)
    if n == 2:
        return TensorAtPoint("twoform", np.array([[0.0, s], [-s, 0.0]]))
    # threeform stored as its single dx1^dx2^dx3 coefficient
    return TensorAtPoint("threeform", np.array([s]))


# ---------------------------------------------------------------------------
# musicals and norms
# ---------------------------------------------------------------------------

def sharp(g: MetricField, omega_values, p):
    """Raise the index of a 1-form (component values)."""
    return g.inverse(p) @ np.asarray(omega_values, dtype=float)


def flat(g: MetricField, X_values, p):
    """Lower the index of a vector (component values)."""
    return g.matrix(p) @ np.asarray(X_values, dtype=float)


def norm_sq(g: MetricField, T, p, kind=None):
    """Invariant squared norm; all slots raised with g.

    Accepts a TensorAtPoint or raw components with ``kind`` given.
    """
    p = as_point(p)
    if isinstance(T, TensorAtPoint):
        kind, comps = T.kind, T.components
    else:
        comps = np.asarray(T, dtype=float)
    gi = g.inverse(p)
    if kind == "scalar":
        return float(comps ** 2)
    if kind == "vector":
        gm = g.matrix(p)
        return float(comps @ gm @ comps)
    if kind == "oneform":
        return float(comps @ gi @ comps)
    if kind in ("twoform", "symtensor"):
        return float(np.einsum("ij,ik,jl,kl->", comps, gi, gi, comps))
    if kind == "threeform":
        # ordered-tuple convention: eps.eps raised with g gives 3! det(g^-1)
        return float(6.0 * comps[0] ** 2 / np.linalg.det(g.matrix(p)))
    raise ValueError(f"no invariant norm for kind {kind!r}")


def norm(g, T, p, kind=None):
    return float(np.sqrt(max(norm_sq(g, T, p, kind), 0.0)))


def sym_product(a, b):
    """(a . b)_ij = (a_i b_j + a_j b_i)/2 for 1-form component arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return 0.5 * (np.outer(a, b) + np.outer(b, a))


def trace_free_part(g: MetricField, S, p):
    """S minus its g-trace part (symmetric 2-tensors)."""
    p = as_point(p)
    S = np.asarray(S, dtype=float)
    gm = g.matrix(p)
    tr = float(np.einsum("ij,ij->", g.inverse(p), S))
    return S - (tr / g.chart.dim) * gm
