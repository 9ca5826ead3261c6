"""Haar-measure densities of the expansion group and their lattice verification.

The closed-form right/left log-weights are pointwise formulas in the
curvature and the generator (plus its covariant derivatives).  The lattice
checks discretize the functional Jacobians of the group composition over a
periodic box of chart points:

* right side: the Jacobian with respect to the second factor couples lattice
  sites through the derivative operator; its dense log-determinant is the
  brute-force oracle.  On the lattice the covariant shift operator carries
  delta(x,x)-weighted Christoffel-diagonal traces that the continuum
  antisymmetry convention discards; they are computed from the background
  alone and itemized separately in the formula side (``christoffel_diagonal``),
  per the delta(x,x) -> 1/w(x) regularization.  Pure second-derivative traces
  are not compensated; they vanish identically for generators with constant
  chart components, which the acceptance checks use.

* left side: the composition depends on its first factor pointwise, so the
  Jacobian is block-diagonal and anomaly-free; chart data on a box is not
  box-periodic, so all coefficient derivatives here are evaluated pointwise
  through the chart machinery rather than by wrapping stencils.

* diffeomorphism measure: the passive map is pointwise in the generator; the
  identity D Y = h^{n/4} D_L is checked per point, with the non-covariant
  Christoffel-trace pieces reported separately and shown to cancel against
  the measured sqrt(h)-ratio.

The map must move fields by much less than one lattice spacing for the
discretized Jacobian to be a near-identity operator; the checks enforce
amplitude <= spacing/4 and raise LatticeError otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FitError, LatticeError
from .manifolds import VectorField, constant_field, covariant_derivative

__all__ = [
    "MeasureWeight",
    "right_log_weight",
    "left_log_weight",
    "FieldGrid",
    "compose_field",
    "product_jacobian_check",
    "invariance_check",
    "normal_metric_expansion_check",
    "diffeo_measure_check",
]

_D1 = ((-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0))


@dataclass(frozen=True)
class MeasureWeight:
    """Log-density of a Haar weight at a point, with itemized terms."""

    log_density: float
    base: np.ndarray
    kind: str                    # right | left | diffeo
    includes_volume_factor: bool
    terms: dict


def right_log_weight(manifold, x, v, include_volume=False, curvature=None):
    """Right-invariant Haar log-weight: -(1/6) R_ab v^a v^b (+ 1/2 log|h|)."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    cb = curvature if curvature is not None else manifold.curvature_at(x)
    terms = {"ricci_quadratic": -float(np.einsum("ab,a,b->", cb.ricci, v, v)) / 6.0}
    if include_volume:
        _, logdet = manifold.metric_at(x)
        terms["volume"] = 0.5 * logdet
    return MeasureWeight(log_density=float(sum(terms.values())), base=x,
                         kind="right", includes_volume_factor=include_volume,
                         terms=terms)


def left_log_weight(manifold, x, v, include_volume=False, curvature=None):
    """Left-invariant Haar log-weight:
    -div v + 1/2 (grad v)(grad v)^T-trace + (1/3) R_ab v^a v^b."""
    x = np.asarray(x, dtype=float)
    if not isinstance(v, VectorField):
        raise TypeError("left weight needs a VectorField (derivatives enter)")
    cb = curvature if curvature is not None else manifold.curvature_at(x)
    grad = covariant_derivative(manifold, v, x, order=1, curvature=cb)
    val = v(x)
    terms = {
        "divergence": -float(np.trace(grad)),
        "grad_product": 0.5 * float(np.einsum("ab,ba->", grad, grad)),
        "ricci_quadratic": float(np.einsum("ab,a,b->", cb.ricci, val, val)) / 3.0,
    }
    if include_volume:
        _, logdet = manifold.metric_at(x)
        terms["volume"] = 0.5 * logdet
    return MeasureWeight(log_density=float(sum(terms.values())), base=x,
                         kind="left", includes_volume_factor=include_volume,
                         terms=terms)


class FieldGrid:
    """Periodic uniform lattice over a chart box, with cached geometry.

    The box is centered at ``center`` with half-widths ``halfwidths``;
    nodes are offset half a spacing so the lattice is symmetric about the
    center (odd sums cancel exactly).  Vector fields are sampled as arrays
    of shape (*shape, n).
    """

    def __init__(self, manifold, center, halfwidths, points, fd_order=4):
        if fd_order != 4:
            raise ValueError("FieldGrid uses 4th-order central differences")
        self.manifold = manifold
        self.n = manifold.dim
        center = np.asarray(center, dtype=float)
        halfwidths = np.broadcast_to(np.asarray(halfwidths, dtype=float),
                                     (self.n,)).copy()
        points = np.broadcast_to(np.asarray(points, dtype=int), (self.n,)).copy()
        if (points < 8).any():
            raise LatticeError("need at least 8 points per axis")
        self.center = center
        self.halfwidths = halfwidths
        self.shape = tuple(int(p) for p in points)
        self.spacing = tuple(2.0 * w / p for w, p in zip(halfwidths, points))
        self.axes = tuple(center[i] - halfwidths[i] + (np.arange(self.shape[i]) + 0.5)
                          * self.spacing[i] for i in range(self.n))
        self._geom = None

    @property
    def npoints(self):
        return int(np.prod(self.shape))

    @property
    def weight(self):
        return float(np.prod(self.spacing))

    def coords(self):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def deriv(self, field, axis):
        dx = self.spacing[axis]
        field = np.asarray(field, dtype=float)
        out = np.zeros_like(field)
        for off, wgt in _D1:
            out += wgt * np.roll(field, -off, axis=axis)
        return out / dx

    def gradient(self, field):
        return np.stack([self.deriv(field, ax) for ax in range(self.n)], axis=self.n)

    def geometry(self):
        """Cached per-point h, log|h|, Gamma, dGamma, Riemann, Ricci."""
        if self._geom is None:
            pts = self.coords().reshape(-1, self.n)
            n = self.n
            h = np.empty((len(pts), n, n))
            logh = np.empty(len(pts))
            gam = np.empty((len(pts), n, n, n))
            dgam = np.empty((len(pts), n, n, n, n))
            rie = np.empty((len(pts), n, n, n, n))
            ric = np.empty((len(pts), n, n))
            for k, x in enumerate(pts):
                h[k], logh[k] = self.manifold.metric_at(x)
                cb = self.manifold.curvature_at(x)
                gam[k] = cb.gamma
                rie[k] = cb.riemann
                ric[k] = cb.ricci
                dgam[k] = self.manifold.d_christoffel(x)
            s = self.shape
            self._geom = {
                "h": h.reshape(s + (n, n)),
                "logh": logh.reshape(s),
                "gamma": gam.reshape(s + (n,) * 3),
                "dgamma": dgam.reshape(s + (n,) * 4),
                "riemann": rie.reshape(s + (n,) * 4),
                "ricci": ric.reshape(s + (n, n)),
            }
        return self._geom

    def check_amplitude(self, *fields):
        amp = max(float(np.abs(f).max()) for f in fields)
        gate = 0.25 * min(self.spacing)
        if amp > gate:
            raise LatticeError(
                f"generator amplitude {amp:.3g} exceeds spacing/4 = {gate:.3g}; "
                "the lattice is too coarse for this scale")

    def cov_vector(self, V):
        """nabla_b V^a on the lattice -> [..., a, b]."""
        gam = self.geometry()["gamma"]
        dV = self.gradient(V)               # (*s, b, a)
        return (np.einsum("...ba->...ab", dV)
                + np.einsum("...abc,...c->...ab", gam, V))

    def cov2_vector_sym(self, V):
        """Symmetrized nabla_c nabla_b V^a -> [..., a, b, c]."""
        gam = self.geometry()["gamma"]
        cov1 = self.cov_vector(V)           # (*s, a, b)
        dcov = self.gradient(cov1)          # (*s, c, a, b)
        out = (np.einsum("...cab->...abc", dcov)
               + np.einsum("...acd,...db->...abc", gam, cov1)
               - np.einsum("...dcb,...ad->...abc", gam, cov1))
        return 0.5 * (out + np.einsum("...acb->...abc", out))


def compose_field(grid, V1, V2, coeffs=None):
    """Grid version of the third-order group product (fields over the box).

    With ``coeffs=None`` the covariant derivatives of the second factor come
    from the lattice stencils (the right-side check differentiates through
    them); passing precomputed pointwise ``coeffs = (d1, d2)`` makes the map
    strictly local in the first factor (the left-side check).
    """
    geom = grid.geometry()
    if coeffs is None:
        d1 = grid.cov_vector(V2)
        d2 = grid.cov2_vector_sym(V2)
    else:
        d1, d2 = coeffs
    return (V1 + V2
            + np.einsum("...b,...ab->...a", V1, d1)
            + 0.5 * np.einsum("...b,...c,...abc->...a", V1, V1, d2)
            + np.einsum("...abcd,...b,...c,...d->...a", geom["riemann"],
                        V2 + 0.5 * V1, V2, V1) / 3.0)


def _pointwise_coeffs(grid, v2):
    """Per-point covariant derivatives of the second factor, via the chart
    machinery (no box stencils): d1[a,b] = nabla_b v2^a,
    d2[a,b,c] = nabla_c nabla_b v2^a (unsymmetrized)."""
    from .manifolds import VectorField as VF

    if not isinstance(v2, VF):
        v2 = np.asarray(v2, dtype=float)
        if v2.ndim != 1:
            raise TypeError("left-side checks need the second factor as a "
                            "VectorField or constant components (its pointwise "
                            "derivatives enter the map)")
    field = v2 if isinstance(v2, VF) else constant_field(v2)
    pts = grid.coords().reshape(-1, grid.n)
    n = grid.n
    d1 = np.empty((len(pts), n, n))
    d2 = np.empty((len(pts), n, n, n))
    for k, x in enumerate(pts):
        cb = grid.manifold.curvature_at(x)
        d1[k] = covariant_derivative(grid.manifold, field, x, order=1, curvature=cb)
        d2[k] = covariant_derivative(grid.manifold, field, x, order=2, curvature=cb)
    return (d1.reshape(grid.shape + (n, n)), d2.reshape(grid.shape + (n, n, n)))


def _dense_jacobian_logdet(grid, V1, V2, side, coeffs=None, step=None):
    """Brute-force dense log-determinant of the composition Jacobian."""
    nd = V1.size
    scale = max(1.0, float(np.abs(V1).max()), float(np.abs(V2).max()))
    s = step if step is not None else 1e-6 * scale
    jac = np.empty((nd, nd))
    target = V2 if side == "right" else V1
    flat = target.reshape(-1)
    for k in range(nd):
        old = flat[k]
        flat[k] = old + s
        fp = compose_field(grid, V1, V2, coeffs=coeffs)
        flat[k] = old - s
        fm = compose_field(grid, V1, V2, coeffs=coeffs)
        flat[k] = old
        jac[:, k] = (fp - fm).reshape(-1) / (2.0 * s)
    sign, logdet = np.linalg.slogdet(jac)
    if sign <= 0:
        raise LatticeError("composition Jacobian not orientation-preserving; "
                           "generator scale too large for the lattice")
    return float(logdet)


def _christoffel_diagonal_terms(grid, V1):
    """delta(x,x)-weighted Christoffel traces of the lattice shift operator.

    tr_lattice [V1.nabla + 1/2 V1 V1 nabla nabla - 1/2 (V1.nabla)^2]
        = sum_x [Gamma^a_{ca} V1^c - 1/2 (V1.nabla V1)^d Gamma^a_{da}](x);

    pure derivative parts have exactly vanishing lattice trace (central
    differences are antisymmetric), and pure second-derivative traces vanish
    for constant generator components.
    """
    gam = grid.geometry()["gamma"]
    gtrace = np.einsum("...aca->...c", gam)          # Gamma^a_{ca}
    lin = float(np.sum(np.einsum("...c,...c->...", V1, gtrace)))
    adv = np.einsum("...c,...dc->...d", V1, grid.cov_vector(V1))
    quad = -0.5 * float(np.sum(np.einsum("...d,...d->...", adv, gtrace)))
    return {"christoffel_linear": lin, "christoffel_quadratic": quad}


def product_jacobian_check(manifold, grid, v1, v2, side="right"):
    """Lattice Jacobian of the group product against the printed exponent.

    ``v1``/``v2``: VectorFields or constant component arrays, sampled on the
    grid.  For ``side='right'`` the numeric log-determinant is the dense
    brute-force Jacobian over all lattice degrees of freedom and the formula
    is the quadrature of (1/3) R v2 v1 + (1/6) R v1 v1 plus the itemized
    Christoffel-diagonal lattice terms; for ``side='left'`` the Jacobian is
    block-diagonal and the formula is the printed left exponent difference.
    """
    if side not in ("right", "left"):
        raise ValueError("side must be 'right' or 'left'")
    coords = grid.coords()
    V1 = _sample(v1, coords)
    V2 = _sample(v2, coords)
    grid.check_amplitude(V1, V2)
    ric = grid.geometry()["ricci"]

    if side == "right":
        numeric = _dense_jacobian_logdet(grid, V1, V2, "right")
        terms = {
            "ricci_cross": float(np.sum(np.einsum("...ab,...a,...b->...",
                                                  ric, V2, V1))) / 3.0,
            "ricci_first": float(np.sum(np.einsum("...ab,...a,...b->...",
                                                  ric, V1, V1))) / 6.0,
        }
        terms.update(_christoffel_diagonal_terms(grid, V1))
    else:
        # pointwise coefficients keep the map strictly local in V1; chart
        # data on a box is not box-periodic, so coefficient fields must not
        # be differentiated by the wrapping stencils here
        coeffs = _pointwise_coeffs(grid, v2)
        numeric = _dense_jacobian_logdet(grid, V1, V2, "left", coeffs=coeffs)
        terms = _left_exponent_terms(grid, V1, V2, coeffs, ric, v1=v1)
    formula = float(sum(terms.values()))
    return {"numeric_logdet": numeric, "formula_logdet": formula,
            "residual": numeric - formula, "terms": terms}


def _left_derivative_data(grid, V1, v1, V2, coeffs):
    """Pointwise nabla V1 and the composed field with its covariant gradient
    through second order in the generators."""
    d1_2, d2_2 = coeffs
    if isinstance(v1, VectorField):
        pts = grid.coords().reshape(-1, grid.n)
        n = grid.n
        d1_1 = np.empty((len(pts), n, n))
        for k, x in enumerate(pts):
            d1_1[k] = covariant_derivative(grid.manifold, v1, x, order=1)
        d1_1 = d1_1.reshape(grid.shape + (n, n))
    else:
        gam = grid.geometry()["gamma"]
        d1_1 = np.einsum("...abc,...c->...ab", gam, V1)
    comp = compose_field(grid, V1, V2, coeffs=coeffs)
    # nabla comp = nabla V1 + nabla V2 + (nabla V1)(nabla V2) + V1 nabla nabla V2
    # (+ O(eps^3), inside the residual budget); d2_2[a,b,c] = nabla_c nabla_b
    dcomp = (d1_1 + d1_2
             + np.einsum("...ac,...cb->...ab", d1_2, d1_1)
             + np.einsum("...c,...acb->...ab", V1, d2_2))
    return d1_1, comp, dcomp


def _left_exponent_terms(grid, V1, V2, coeffs, ric, v1=None):
    d1_1, comp, dcomp = _left_derivative_data(grid, V1, v1, V2, coeffs)
    return {
        "div_composed": float(np.sum(np.einsum("...aa->...", dcomp))),
        "div_first": -float(np.sum(np.einsum("...aa->...", d1_1))),
        "grad_composed": -0.5 * float(np.sum(np.einsum("...ab,...ba->...",
                                                       dcomp, dcomp))),
        "grad_first": 0.5 * float(np.sum(np.einsum("...ab,...ba->...",
                                                   d1_1, d1_1))),
        "ricci_composed": -float(np.sum(np.einsum("...ab,...a,...b->...",
                                                  ric, comp, comp))) / 3.0,
        "ricci_first": float(np.sum(np.einsum("...ab,...a,...b->...",
                                              ric, V1, V1))) / 3.0,
    }


def _sample(v, coords):
    if isinstance(v, VectorField):
        flat = coords.reshape(-1, coords.shape[-1])
        vals = np.stack([v(x) for x in flat])
        return vals.reshape(coords.shape)
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        return np.broadcast_to(v, coords.shape).copy()
    return v.copy()


def invariance_check(manifold, grid, v1, v2, side="right"):
    """Direct Haar-invariance statement on the lattice.

    The measure transforms with the inverse Jacobian of the composition:

    right:  -numeric_logdet + right-exponent(v2)  = right-exponent(composed),
    left:   -numeric_logdet + left-exponent(v1)   = left-exponent(composed),

    each up to O(eps^3); on the right the itemized Christoffel-diagonal
    lattice traces are removed from the numeric log-determinant first (they
    belong to the lattice realization, not the continuum statement).
    Returns the defect.
    """
    coords = grid.coords()
    V1 = _sample(v1, coords)
    V2 = _sample(v2, coords)
    grid.check_amplitude(V1, V2)
    ric = grid.geometry()["ricci"]

    def right_exp(V):
        return -float(np.sum(np.einsum("...ab,...a,...b->...", ric, V, V))) / 6.0

    if side == "right":
        comp = compose_field(grid, V1, V2)
        numeric = _dense_jacobian_logdet(grid, V1, V2, "right")
        lattice = _christoffel_diagonal_terms(grid, V1)
        defect = (-(numeric - sum(lattice.values())) + right_exp(V2)) - right_exp(comp)
    else:
        coeffs = _pointwise_coeffs(grid, v2)
        numeric = _dense_jacobian_logdet(grid, V1, V2, "left", coeffs=coeffs)
        terms = _left_exponent_terms(grid, V1, V2, coeffs, ric, v1=v1)
        # formula == left-exp(v1) - left-exp(composed) assembled from the same
        # derivative data, so the defect is numeric minus that difference
        defect = numeric - float(sum(terms.values()))
    return float(defect)


def normal_metric_expansion_check(manifold, x0, radius=0.1, n_rings=3,
                                  n_angles=12, rcond_limit=1e6):
    """Fit of the normal-coordinate metric deviation to a quadratic form.

    Samples h^Y over rings inside ``radius``, fits
    h_ab(Y) - h_ab(0) = C[a, b, c, d] Y^c Y^d (symmetric monomials), and
    compares the fitted coefficients with -(1/3) R^Y_{acbd} at the origin.
    """
    from .geodesics import normal_chart

    x0 = np.asarray(x0, dtype=float)
    n = manifold.dim
    chart = normal_chart(manifold, x0, radius=1.25 * radius)
    if n != 2:
        raise NotImplementedError("sampling pattern implemented for dim 2")
    radii = radius * (np.arange(1, n_rings + 1) / n_rings)
    angles = np.arange(n_angles) * (2.0 * math.pi / n_angles) + 0.1
    samples = []
    for r in radii:
        for a in angles:
            samples.append([r * math.cos(a), r * math.sin(a)])
    samples = np.array(samples)

    h0 = chart.metric(np.zeros(n))
    monomials = [(c, d) for c in range(n) for d in range(c, n)]
    design = np.stack([samples[:, c] * samples[:, d] * (1.0 if c == d else 2.0)
                       for (c, d) in monomials], axis=1)
    cond = np.linalg.cond(design)
    if cond > rcond_limit:
        raise FitError(f"quadratic fit design condition number {cond:.3g}")

    targets = np.stack([chart.metric(y) for y in samples])   # (ns, n, n)
    fitted = np.zeros((n, n, n, n))
    for a in range(n):
        for b in range(a, n):
            rhs = targets[:, a, b] - h0[a, b]
            coef, *_ = np.linalg.lstsq(design, rhs, rcond=None)
            for (c, d), val in zip(monomials, coef):
                fitted[a, b, c, d] = fitted[a, b, d, c] = val
                fitted[b, a, c, d] = fitted[b, a, d, c] = val

    cb = manifold.curvature_at(x0)
    h = manifold.metric(x0)
    rl = cb.riemann_lower(h)
    E = chart.frame                                           # columns e_i
    rl_frame = np.einsum("pqrs,pa,qc,rb,sd->acbd", rl, E, E, E, E)
    # target for the symmetric-monomial fit: -(1/3) sym_(c,d) R_{a c b d}
    target = -(np.einsum("acbd->abcd", rl_frame)
               + np.einsum("adbc->abcd", rl_frame)) / 6.0
    deviation = float(np.abs(fitted - target).max())
    return {"fitted": fitted, "target": target, "deviation": deviation,
            "condition": float(cond)}


def _displacement_field(grid, V):
    """Third-order expansion displacement T(x) = Y(x) - x at each grid point."""
    geom = grid.geometry()
    gam, dgam = geom["gamma"], geom["dgamma"]
    coeff = (-np.einsum("...dabc->...abcd", dgam)
             + 2.0 * np.einsum("...ade,...ebc->...abcd", gam, gam))
    return (V
            - 0.5 * np.einsum("...abc,...b,...c->...a", gam, V, V)
            + np.einsum("...abcd,...b,...c,...d->...a", coeff, V, V, V) / 6.0)


def _displacement_jacobian_blocks(grid, V, step=1e-7):
    """Per-point d Y^a / d v^b by central differences (the map is pointwise);
    the identity block is carried by the linear term of the displacement."""
    n = grid.n
    blocks = np.zeros(grid.shape + (n, n))
    for b in range(n):
        dV = np.zeros_like(V)
        dV[..., b] = step
        fp = _displacement_field(grid, V + dV)
        fm = _displacement_field(grid, V - dV)
        blocks[..., :, b] = (fp - fm) / (2.0 * step)
    return blocks


def _field_jacobians(grid, v):
    """Pointwise d_b v^a of the generator field over the grid (exact zero for
    constant components; the field's own stencil otherwise).  Chart data on a
    box is not box-periodic, so wrapping lattice stencils must not touch it;
    every derivative in the diffeomorphism check is pointwise."""
    if not isinstance(v, VectorField):
        return np.zeros(grid.shape + (grid.n, grid.n))
    pts = grid.coords().reshape(-1, grid.n)
    n = grid.n
    step = v._step(grid.manifold)
    out = np.empty((len(pts), n, n))
    for k, x in enumerate(pts):
        out[k] = v.jacobian(x, step)
    return out.reshape(grid.shape + (n, n))


def diffeo_measure_check(manifold, grid, v):
    """Verification of the diffeomorphism-measure identity D Y = h^{n/4} D_L.

    Returns the measured passive log-determinant (per-point blocks of
    dY/d(generator)), the measured sqrt(h)-ratio from the metric
    transformation law applied with the passive coordinate Jacobian dY/dx,
    the covariant formula, the non-covariant Christoffel-trace pieces
    (formula side and measured side, which must cancel), and the identity
    residual.
    """
    coords = grid.coords()
    V = _sample(v, coords)
    grid.check_amplitude(V)
    geom = grid.geometry()
    gam, dgam, ric, h = geom["gamma"], geom["dgamma"], geom["ricci"], geom["h"]

    # measured: per-point blocks of the passive map's generator Jacobian
    blocks = _displacement_jacobian_blocks(grid, V)
    sign, logdet_blocks = np.linalg.slogdet(blocks)
    if (sign <= 0).any():
        raise LatticeError("passive map folds; generator too large")
    passive_numeric = float(np.sum(logdet_blocks))

    # passive coordinate Jacobian dY^a/dx^b through second order in the
    # generator (the cubic term's position derivative is O(eps^3))
    dV = _field_jacobians(grid, v)
    J = (np.eye(grid.n) + dV
         - 0.5 * np.einsum("...bacd,...c,...d->...ab", dgam, V, V)
         - np.einsum("...acd,...cb,...d->...ab", gam, dV, V))
    # measured sqrt(h)-ratio via the metric transformation law
    Jinv = np.linalg.inv(J)
    hY = np.einsum("...ca,...cd,...db->...ab", Jinv, h, Jinv)
    signY, loghY = np.linalg.slogdet(hY)
    if (signY <= 0).any():
        raise LatticeError("transformed metric lost positivity")
    sqrt_ratio = 0.5 * float(np.sum(loghY - geom["logh"]))

    # covariant formula (the left-exponent), pointwise covariant derivatives
    covV = dV + np.einsum("...abc,...c->...ab", gam, V)
    covariant = (-float(np.sum(np.einsum("...aa->...", covV)))
                 + 0.5 * float(np.sum(np.einsum("...ab,...ba->...", covV, covV)))
                 + float(np.sum(np.einsum("...ab,...a,...b->...", ric, V, V))) / 3.0)

    # non-covariant pieces: Gamma-trace terms of the printed passive Jacobian
    gtrace = np.einsum("...aab->...b", gam)            # Gamma^a_{ab}
    dgtrace = np.einsum("...caab->...cb", dgam)        # d_c Gamma^a_{ab}
    cov_gtrace = dgtrace - np.einsum("...dcb,...d->...cb", gam, gtrace)
    nc_formula = (-float(np.sum(np.einsum("...b,...b->...", gtrace, V)))
                  - 0.5 * float(np.sum(np.einsum("...cb,...c,...b->...",
                                                 cov_gtrace, V, V))))
    # measured non-covariant content of the sqrt(h)-ratio: subtract its
    # covariant prediction -(div - 1/2 grad grad - 1/2 R v v)
    sqrt_ratio_covariant = -(float(np.sum(np.einsum("...aa->...", covV)))
                             - 0.5 * float(np.sum(np.einsum("...ab,...ba->...",
                                                            covV, covV)))
                             - 0.5 * float(np.sum(np.einsum("...ab,...a,...b->...",
                                                            ric, V, V))))
    nc_measured = sqrt_ratio - sqrt_ratio_covariant
    residual = passive_numeric + sqrt_ratio - covariant
    return {
        "passive_numeric_logdet": passive_numeric,
        "sqrt_ratio": sqrt_ratio,
        "covariant_formula_logdet": covariant,
        "noncovariant_terms": {"jacobian_formula": nc_formula,
                               "sqrt_ratio_measured": nc_measured,
                               "cancellation": nc_formula + nc_measured},
        "residual": float(residual),
    }
