"""Finite-dimensional Riemannian chart kernel.

A manifold is described by a single chart: a metric function over chart
coordinates, an optional pair of analytic derivative functions, and a box
domain with optional periodic identifications.  Everything downstream
(Christoffel symbols, Riemann and Ricci tensors, covariant derivatives of
vector fields) is assembled either from the analytic derivatives or from
4th-order central finite differences of the metric.

Index conventions
-----------------
Christoffel symbols ``gamma[a, b, c]`` = Gamma^a_{bc} (symmetric in b, c).
Riemann tensor ``riemann[a, b, c, d]`` = R^a_{bcd}
    = d_c Gamma^a_{bd} - d_d Gamma^a_{bc}
      + Gamma^a_{ce} Gamma^e_{bd} - Gamma^a_{de} Gamma^e_{bc},
Ricci ``ricci[a, b]`` = R^c_{acb}.  With this sign the unit 2-sphere has
Ricci = +h and the Poincare half-plane Ricci = -h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ChartDomainError, SignatureViolationError

__all__ = [
    "ChartDomain",
    "ManifoldSpec",
    "CurvatureBundle",
    "Vector",
    "VectorField",
    "constant_field",
    "covariant_derivative",
    "euclidean",
    "sphere",
    "poincare_half_plane",
    "flat_torus",
    "from_expression",
    "builtin_manifold",
]

# 4th-order central first/second derivative stencils (offset: weight).
_D1_STENCIL = ((-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0))
_D2_STENCIL = ((-2, -1.0 / 12.0), (-1, 16.0 / 12.0), (0, -30.0 / 12.0),
               (1, 16.0 / 12.0), (2, -1.0 / 12.0))


@dataclass(frozen=True)
class ChartDomain:
    """Box domain with optional periodic identification per coordinate.

    ``lower[i] = -inf`` / ``upper[i] = +inf`` mark unbounded axes.  A
    periodic axis wraps by its period; containment is then automatic.
    """

    lower: tuple
    upper: tuple
    periodic: tuple

    @staticmethod
    def box(lower, upper, periodic=None):
        n = len(lower)
        periodic = tuple(periodic) if periodic is not None else (False,) * n
        return ChartDomain(tuple(float(l) for l in lower),
                           tuple(float(u) for u in upper), periodic)

    @staticmethod
    def unbounded(dim):
        return ChartDomain((-math.inf,) * dim, (math.inf,) * dim, (False,) * dim)

    def contains(self, x, margin=0.0):
        for i, xi in enumerate(x):
            if self.periodic[i]:
                continue
            if not (self.lower[i] + margin <= xi <= self.upper[i] - margin):
                return False
        return True

    def clearance(self, x):
        """Smallest distance from x to a non-periodic boundary (inf if none)."""
        c = math.inf
        for i, xi in enumerate(x):
            if self.periodic[i]:
                continue
            if math.isfinite(self.lower[i]):
                c = min(c, xi - self.lower[i])
            if math.isfinite(self.upper[i]):
                c = min(c, self.upper[i] - xi)
        return c


@dataclass(frozen=True)
class CurvatureBundle:
    """Connection and curvature of a metric at one chart point."""

    point: np.ndarray
    gamma: np.ndarray     # Gamma^a_{bc}
    riemann: np.ndarray   # R^a_{bcd}
    ricci: np.ndarray     # R_{ab} = R^c_{acb}

    def riemann_lower(self, h):
        """R_{abcd} = h_{ae} R^e_{bcd}."""
        return np.einsum("ae,ebcd->abcd", h, self.riemann)


@dataclass(frozen=True)
class Vector:
    """Contravariant vector attached to a chart point."""

    base: np.ndarray
    components: np.ndarray


class ManifoldSpec:
    """Chart with a metric field and derived geometric quantities.

    Parameters
    ----------
    dim : int
        Chart dimension n.
    metric_fn : callable
        Map from a length-n coordinate array to a symmetric (n, n) matrix.
    d_metric_fn, dd_metric_fn : callable, optional
        Analytic first/second metric derivatives: ``d_metric_fn(x)[c, a, b]``
        = d_c h_ab and ``dd_metric_fn(x)[c, d, a, b]`` = d_c d_d h_ab.  When
        absent, central finite differences of ``metric_fn`` are used.
    fd_step : float
        Finite-difference step in chart units.
    domain : ChartDomain
        Chart domain; stencils and geodesics must stay inside it.
    injectivity_hint : float, optional
        Known lower bound on the injectivity radius (used for trust radii).
    """

    def __init__(self, dim, metric_fn, d_metric_fn=None, dd_metric_fn=None,
                 fd_step=1e-3, domain=None, name="manifold",
                 injectivity_hint=None):
        if dim < 1:
            raise ValueError("dim must be a positive integer")
        if fd_step <= 0:
            raise ValueError("fd_step must be positive")
        self.dim = int(dim)
        self.metric_fn = metric_fn
        self.d_metric_fn = d_metric_fn
        self.dd_metric_fn = dd_metric_fn
        self.fd_step = float(fd_step)
        self.domain = domain if domain is not None else ChartDomain.unbounded(dim)
        self.name = name
        self.injectivity_hint = injectivity_hint

    # -- basic metric access -------------------------------------------------

    def require_inside(self, x, stencil=False):
        margin = 2.5 * self.fd_step if stencil else 0.0
        if not self.domain.contains(x, margin=margin):
            what = "finite-difference stencil" if stencil else "point"
            raise ChartDomainError(
                f"{self.name}: {what} leaves chart domain at {tuple(float(c) for c in x)}")

    def metric(self, x):
        x = np.asarray(x, dtype=float)
        h = np.asarray(self.metric_fn(x), dtype=float)
        if not np.all(np.isfinite(h)):
            raise ChartDomainError(f"{self.name}: metric not finite at {tuple(x)}")
        return 0.5 * (h + h.T)

    def metric_at(self, x):
        """Metric matrix and log|det h| via Cholesky factorization.

        Raises
        ------
        SignatureViolationError
            If the matrix is not positive-definite, naming the point.
        """
        x = np.asarray(x, dtype=float)
        self.require_inside(x)
        h = self.metric(x)
        try:
            chol = np.linalg.cholesky(h)
        except np.linalg.LinAlgError as exc:
            raise SignatureViolationError(x, str(exc)) from None
        logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
        return h, logdet

    def inverse_metric(self, x):
        return np.linalg.inv(self.metric(x))

    def norm(self, x, v):
        """Metric norm of a contravariant vector at x."""
        h = self.metric(x)
        return float(np.sqrt(np.einsum("a,ab,b->", v, h, v)))

    # -- metric derivatives --------------------------------------------------

    def d_metric(self, x, step=None):
        """d_c h_ab as an (n, n, n) array (index order c, a, b)."""
        x = np.asarray(x, dtype=float)
        if self.d_metric_fn is not None and step is None:
            return np.asarray(self.d_metric_fn(x), dtype=float)
        s = self.fd_step if step is None else step
        self.require_inside(x, stencil=True)
        out = np.empty((self.dim, self.dim, self.dim))
        for c in range(self.dim):
            acc = np.zeros((self.dim, self.dim))
            for off, wgt in _D1_STENCIL:
                xp = x.copy()
                xp[c] += off * s
                acc += wgt * self.metric(xp)
            out[c] = acc / s
        return out

    def dd_metric(self, x, step=None):
        """d_c d_d h_ab as an (n, n, n, n) array, symmetric in (c, d)."""
        x = np.asarray(x, dtype=float)
        if self.dd_metric_fn is not None and step is None:
            return np.asarray(self.dd_metric_fn(x), dtype=float)
        s = self.fd_step if step is None else step
        self.require_inside(x, stencil=True)
        n = self.dim
        out = np.empty((n, n, n, n))
        for c in range(n):
            acc = np.zeros((n, n))
            for off, wgt in _D2_STENCIL:
                xp = x.copy()
                xp[c] += off * s
                acc += wgt * self.metric(xp)
            out[c, c] = acc / (s * s)
        for c in range(n):
            for d in range(c + 1, n):
                acc = np.zeros((n, n))
                for offc, wc in _D1_STENCIL:
                    for offd, wd in _D1_STENCIL:
                        xp = x.copy()
                        xp[c] += offc * s
                        xp[d] += offd * s
                        acc += wc * wd * self.metric(xp)
                out[c, d] = out[d, c] = acc / (s * s)
        return out

    # -- connection and curvature ---------------------------------------------

    @staticmethod
    def _christoffel_from(h_inv, dh):
        # Gamma^a_bc = 1/2 h^{ad} (d_b h_dc + d_c h_db - d_d h_bc)
        return 0.5 * (np.einsum("ad,bdc->abc", h_inv, dh)
                      + np.einsum("ad,cdb->abc", h_inv, dh)
                      - np.einsum("ad,dbc->abc", h_inv, dh))

    def christoffel(self, x):
        """Gamma^a_{bc} at x."""
        return self._christoffel_from(self.inverse_metric(x), self.d_metric(x))

    def d_christoffel(self, x):
        """d_c Gamma^a_{bd} indexed [c, a, b, d].

        Assembled by the chain rule from first and second metric derivatives,
        so its accuracy tracks the underlying derivative source.
        """
        h_inv = self.inverse_metric(x)
        dh = self.d_metric(x)
        ddh = self.dd_metric(x)
        # d_c h^{ae} = -h^{af} (d_c h_fg) h^{ge}
        dh_inv = -np.einsum("af,cfg,ge->cae", h_inv, dh, h_inv)
        # bracket_{e b d} = d_b h_ed + d_d h_eb - d_e h_bd
        bracket = (np.einsum("bed->ebd", dh) + np.einsum("deb->ebd", dh)
                   - np.einsum("ebd->ebd", dh))
        # d_c bracket_{e b d} = dd_{cb} h_ed + dd_{cd} h_eb - dd_{ce} h_bd
        dbracket = (np.einsum("cbed->cebd", ddh) + np.einsum("cdeb->cebd", ddh)
                    - np.einsum("cebd->cebd", ddh))
        return 0.5 * (np.einsum("cae,ebd->cabd", dh_inv, bracket)
                      + np.einsum("ae,cebd->cabd", h_inv, dbracket))

    def curvature_at(self, x, validate=False):
        """Connection and curvature bundle at x.

        Uses analytic metric derivatives when supplied, else 4th-order central
        differences.  With ``validate=True`` the Riemann symmetries and first
        Bianchi identity are checked against ``10 * fd_step**2 * scale`` and a
        Richardson-extrapolated recomputation is attempted on failure.
        """
        x = np.asarray(x, dtype=float)
        self.require_inside(x, stencil=self.d_metric_fn is None)
        bundle = self._curvature(x)
        if validate and not self._curvature_ok(bundle):
            bundle = self._curvature(x, richardson=True)
        return bundle

    def _curvature(self, x, richardson=False):
        h_inv = self.inverse_metric(x)
        if not richardson:
            dh, ddh = self.d_metric(x), self.dd_metric(x)
        else:
            # Richardson fallback: eliminate the O(step^4) term of the stencil.
            s = self.fd_step
            dh = (16.0 * self.d_metric(x, step=s / 2) - self.d_metric(x, step=s)) / 15.0
            ddh = (16.0 * self.dd_metric(x, step=s / 2) - self.dd_metric(x, step=s)) / 15.0
        gamma = self._christoffel_from(h_inv, dh)
        dh_inv = -np.einsum("af,cfg,ge->cae", h_inv, dh, h_inv)
        bracket = (np.einsum("bed->ebd", dh) + np.einsum("deb->ebd", dh)
                   - np.einsum("ebd->ebd", dh))
        dbracket = (np.einsum("cbed->cebd", ddh) + np.einsum("cdeb->cebd", ddh)
                    - np.einsum("cebd->cebd", ddh))
        dgamma = 0.5 * (np.einsum("cae,ebd->cabd", dh_inv, bracket)
                        + np.einsum("ae,cebd->cabd", h_inv, dbracket))
        riemann = (np.einsum("cabd->abcd", dgamma) - np.einsum("dabc->abcd", dgamma)
                   + np.einsum("ace,ebd->abcd", gamma, gamma)
                   - np.einsum("ade,ebc->abcd", gamma, gamma))
        ricci = np.einsum("cacb->ab", riemann)
        return CurvatureBundle(point=x, gamma=gamma, riemann=riemann, ricci=ricci)

    def _curvature_ok(self, bundle):
        scale = max(1.0, float(np.max(np.abs(bundle.riemann))))
        tol = 10.0 * self.fd_step ** 2 * scale
        h = self.metric(bundle.point)
        rl = bundle.riemann_lower(h)
        anti_cd = np.max(np.abs(rl + np.einsum("abdc->abcd", rl)))
        anti_ab = np.max(np.abs(rl + np.einsum("bacd->abcd", rl)))
        bianchi = np.max(np.abs(bundle.riemann
                                + np.einsum("acdb->abcd", bundle.riemann)
                                + np.einsum("adbc->abcd", bundle.riemann)))
        return max(anti_cd, anti_ab, bianchi) <= tol

    def trust_radius(self, x=None):
        """Default expansion gate: half the injectivity-radius estimate."""
        if self.injectivity_hint is not None:
            r = self.injectivity_hint
        else:
            r = math.inf
        if x is not None:
            c = self.domain.clearance(np.asarray(x, dtype=float))
            r = min(r, c) if math.isfinite(c) else r
        return 0.5 * r if math.isfinite(r) else math.inf


class VectorField:
    """Chart-coordinate vector field with finite-difference derivatives.

    ``fn`` maps a coordinate array to contravariant components.  Partial
    derivatives come from 4th-order central differences with step ``step``
    (default: the manifold's fd_step at call time); covariant derivatives are
    assembled with independently computed Christoffel symbols.
    """

    def __init__(self, fn, step=None):
        self.fn = fn
        self.step = step

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)

    def _step(self, manifold):
        return self.step if self.step is not None else manifold.fd_step

    def jacobian(self, x, step):
        """d_b v^a indexed [a, b]."""
        x = np.asarray(x, dtype=float)
        n = x.size
        out = np.empty((n, n))
        for b in range(n):
            acc = 0.0
            for off, wgt in _D1_STENCIL:
                xp = x.copy()
                xp[b] += off * step
                acc = acc + wgt * self(xp)
            out[:, b] = acc / step
        return out

    def hessian(self, x, step):
        """d_b d_c v^a indexed [a, b, c] (symmetric in b, c)."""
        x = np.asarray(x, dtype=float)
        n = x.size
        out = np.empty((n, n, n))
        for b in range(n):
            acc = 0.0
            for off, wgt in _D2_STENCIL:
                xp = x.copy()
                xp[b] += off * step
                acc = acc + wgt * self(xp)
            out[:, b, b] = acc / (step * step)
        for b in range(n):
            for c in range(b + 1, n):
                acc = 0.0
                for offb, wb in _D1_STENCIL:
                    for offc, wc in _D1_STENCIL:
                        xp = x.copy()
                        xp[b] += offb * step
                        xp[c] += offc * step
                        acc = acc + wb * wc * self(xp)
                out[:, b, c] = out[:, c, b] = acc / (step * step)
        return out


class _ConstantField(VectorField):
    """Promotion of a bare vector: chart-constant components, exact derivatives."""

    def __init__(self, components):
        self.components = np.asarray(components, dtype=float)
        super().__init__(lambda x: self.components)

    def jacobian(self, x, step):
        n = self.components.size
        return np.zeros((n, n))

    def hessian(self, x, step):
        n = self.components.size
        return np.zeros((n, n, n))


def constant_field(components):
    """VectorField with chart-constant components (bare-Vector promotion)."""
    return _ConstantField(components)


def covariant_derivative(manifold, v, x, order=1, curvature=None):
    """First or second covariant derivative of a vector field at x.

    Returns ``D[a, b] = nabla_b v^a`` for order 1 and
    ``DD[a, b, c] = nabla_c nabla_b v^a`` for order 2 (derivative indices
    appended to the right, outermost derivative last).
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    x = np.asarray(x, dtype=float)
    if not isinstance(v, VectorField):
        raise TypeError("v must be a VectorField (promote bare vectors with constant_field)")
    step = v._step(manifold)
    cb = curvature if curvature is not None else manifold.curvature_at(x)
    val = v(x)
    jac = v.jacobian(x, step)
    nabla = jac + np.einsum("abc,c->ab", cb.gamma, val)
    if order == 1:
        return nabla
    hess = v.hessian(x, step)
    dgamma = manifold.d_christoffel(x)
    # d_c (nabla_b v^a) = d_c d_b v^a + (d_c Gamma^a_{bd}) v^d + Gamma^a_{bd} d_c v^d
    dnabla = (np.einsum("abc->abc", np.transpose(hess, (0, 1, 2)))
              + np.einsum("cabd,d->abc", dgamma, val)
              + np.einsum("abd,dc->abc", cb.gamma, jac))
    # nabla_c T^a_b = d_c T^a_b + Gamma^a_{cd} T^d_b - Gamma^d_{cb} T^a_d
    return (dnabla
            + np.einsum("acd,db->abc", cb.gamma, nabla)
            - np.einsum("dcb,ad->abc", cb.gamma, nabla))


# -- builtin manifolds ---------------------------------------------------------


def euclidean(dim=2):
    """Flat R^n in Cartesian coordinates (n <= 4)."""
    if not 1 <= dim <= 4:
        raise ValueError("euclidean builtin supports 1 <= dim <= 4")
    eye = np.eye(dim)
    zero3 = np.zeros((dim, dim, dim))
    zero4 = np.zeros((dim, dim, dim, dim))
    return ManifoldSpec(dim, lambda x: eye,
                        d_metric_fn=lambda x: zero3,
                        dd_metric_fn=lambda x: zero4,
                        name=f"euclidean{dim}")


def sphere(radius=1.0, collar=0.1):
    """Round 2-sphere of given radius in (theta, phi) coordinates.

    The chart excludes a polar collar: theta in [collar, pi - collar].
    """
    r2 = float(radius) ** 2

    def h(x):
        return np.array([[r2, 0.0], [0.0, r2 * math.sin(x[0]) ** 2]])

    def dh(x):
        out = np.zeros((2, 2, 2))
        out[0, 1, 1] = r2 * math.sin(2.0 * x[0])
        return out

    def ddh(x):
        out = np.zeros((2, 2, 2, 2))
        out[0, 0, 1, 1] = 2.0 * r2 * math.cos(2.0 * x[0])
        return out

    domain = ChartDomain.box((collar, -math.inf), (math.pi - collar, math.inf),
                             periodic=(False, True))
    return ManifoldSpec(2, h, d_metric_fn=dh, dd_metric_fn=ddh, domain=domain,
                        name=f"sphere(r={radius})",
                        injectivity_hint=math.pi * float(radius))


def sphere_normal(radius=1.0, extent=None):
    """Round 2-sphere in Riemannian normal coordinates about a point.

    h(Y) = P + (R sin(r/R)/r)^2 (I - P) with r = |Y| and P the radial
    projector; evaluated through sinc so the origin is regular.  Numerically
    identical to the pullback chart produced by ``normal_chart`` on the
    (theta, phi) sphere; shipped in closed form because lattice checks
    evaluate it densely.
    """
    R = float(radius)
    ext = 0.45 * math.pi * R if extent is None else float(extent)

    def h(y):
        r = math.hypot(*y)
        f = np.sinc(r / (math.pi * R)) ** 2     # (sin(r/R)/(r/R))^2
        if r < 1e-12:
            return np.eye(2)
        P = np.outer(y, y) / (r * r)
        return P + f * (np.eye(2) - P)

    domain = ChartDomain.box((-ext, -ext), (ext, ext))
    return ManifoldSpec(2, h, fd_step=5e-3, domain=domain,
                        name=f"sphere_normal(r={radius})",
                        injectivity_hint=math.pi * R)


def poincare_half_plane(y_min=0.05):
    """Hyperbolic upper half-plane, metric (dx^2 + dy^2) / y^2."""

    def h(x):
        s = 1.0 / (x[1] * x[1])
        return np.array([[s, 0.0], [0.0, s]])

    def dh(x):
        out = np.zeros((2, 2, 2))
        g = -2.0 / x[1] ** 3
        out[1, 0, 0] = g
        out[1, 1, 1] = g
        return out

    def ddh(x):
        out = np.zeros((2, 2, 2, 2))
        g = 6.0 / x[1] ** 4
        out[1, 1, 0, 0] = g
        out[1, 1, 1, 1] = g
        return out

    domain = ChartDomain.box((-math.inf, y_min), (math.inf, math.inf))
    return ManifoldSpec(2, h, d_metric_fn=dh, dd_metric_fn=ddh, domain=domain,
                        name="poincare_half_plane")


def flat_torus(dim=2, period=2.0 * math.pi):
    """Flat torus: identity metric with periodic identification."""
    eye = np.eye(dim)
    zero3 = np.zeros((dim, dim, dim))
    zero4 = np.zeros((dim, dim, dim, dim))
    periods = (period,) * dim if np.isscalar(period) else tuple(period)
    domain = ChartDomain.box((0.0,) * dim, periods, periodic=(True,) * dim)
    return ManifoldSpec(dim, lambda x: eye,
                        d_metric_fn=lambda x: zero3,
                        dd_metric_fn=lambda x: zero4,
                        domain=domain, name=f"flat_torus{dim}",
                        injectivity_hint=0.5 * min(periods))


_EXPR_NAMES = {name: getattr(np, name) for name in
               ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh",
                "tanh", "arcsin", "arccos", "arctan", "abs")}
_EXPR_NAMES["pi"] = math.pi


def from_expression(dim, entries, fd_step=1e-3, lower=None, upper=None,
                    periodic=None, name="expression"):
    """Manifold whose metric entries are numeric expression strings.

    ``entries[a][b]`` is evaluated with coordinates bound to ``x0 .. x{n-1}``
    (and ``x``, the full array) in a restricted numpy namespace.  Metric
    derivatives fall back to finite differences.
    """
    compiled = [[compile(entries[a][b], f"<metric[{a}][{b}]>", "eval")
                 for b in range(dim)] for a in range(dim)]

    def h(x):
        env = {f"x{i}": x[i] for i in range(dim)}
        env["x"] = x
        env.update(_EXPR_NAMES)
        out = np.empty((dim, dim))
        for a in range(dim):
            for b in range(dim):
                out[a, b] = eval(compiled[a][b], {"__builtins__": {}}, env)
        return out

    if lower is None and upper is None and periodic is None:
        domain = ChartDomain.unbounded(dim)
    else:
        domain = ChartDomain.box(lower if lower is not None else (-math.inf,) * dim,
                                 upper if upper is not None else (math.inf,) * dim,
                                 periodic)
    return ManifoldSpec(dim, h, fd_step=fd_step, domain=domain, name=name)


def builtin_manifold(spec):
    """Construct a builtin manifold from a config mapping.

    Recognized ``builtin`` ids: euclidean, sphere, poincare_half_plane,
    flat_torus; or an ``expression`` block for metric-from-expression.
    """
    spec = dict(spec)
    if "expression" in spec:
        e = dict(spec["expression"])
        return from_expression(int(e["dim"]), e["entries"],
                               fd_step=float(e.get("fd_step", 1e-3)),
                               lower=e.get("lower"), upper=e.get("upper"),
                               periodic=e.get("periodic"),
                               name=e.get("name", "expression"))
    kind = spec.pop("builtin")
    if kind == "euclidean":
        return euclidean(int(spec.get("dim", 2)))
    if kind == "sphere":
        return sphere(radius=float(spec.get("radius", 1.0)),
                      collar=float(spec.get("collar", 0.1)))
    if kind == "poincare_half_plane":
        return poincare_half_plane(y_min=float(spec.get("y_min", 0.05)))
    if kind == "flat_torus":
        return flat_torus(dim=int(spec.get("dim", 2)),
                          period=spec.get("period", 2.0 * math.pi))
    raise ValueError(f"unknown builtin manifold '{kind}'")
