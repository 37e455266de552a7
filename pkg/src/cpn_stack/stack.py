"""Soliton surfaces built on projector towers: immersions, stacking, geometry.

Every tower level P_k induces a surface in su(n) through the closed form

    X_k = -i (P_k + 2 sum_{j<k} P_j) + i c_k I,      c_k = (1 + 2k) / n,

whose differential is the su(n)-valued 1-form

    dX_k = i ( -[dP_k, P_k] dxi + [dbar P_k, P_k] dbar xi ).

Applying the same construction once more, to X_k instead of P_k, gives the
"stacked" surface Y_k with 1-form i (M^dag dxi + M dbar xi), M = [dbar X_k, X_k];
the tower algebra collapses it to Y_k = -X_k (with the traceless choice of
integration constant), which is one of the checked identities rather than an
assumption: tangents of Y are always computed from the X jet commutators, and
path integration provides a second, quadrature-based route to both surfaces.

Also here: minimal-polynomial and alternating-sum residuals, weighted
multi-level surfaces, the induced metric / action density, the two-chart
sphere action integral, and real su(n) coordinates in a generalized
Gell-Mann basis.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import DegeneratePoint, NoConvergence, NotInAlgebra
from .jet import as_points, jet_identity
from .model import HoloSeed, build_tower, fro_norm

__all__ = [
    "level_constant",
    "ImmersionSample",
    "PathSpec",
    "MetricSample",
    "ActionResult",
    "QuadratureConfig",
    "immersion_jet",
    "immersion_closed_form",
    "integrate_immersion",
    "stacked_surface",
    "integrate_stacked",
    "idempotency_residual",
    "minimal_polynomial_residual",
    "eigenvalue_residual",
    "alternating_sum_residual",
    "multileaf",
    "MultileafDiagnostics",
    "metric_at",
    "action",
    "sun_basis",
    "sun_coordinates",
    "sun_matrix",
]


def level_constant(k, n):
    """Trace-fixing constant c_k = (1 + 2k)/n of level k."""
    return (1 + 2 * k) / n


# ------------------------------------------------------------------ samples

@dataclass(frozen=True)
class ImmersionSample:
    """Surface data at one point (or batch): value and Wirtinger tangents.

    ``value`` is anti-Hermitian traceless; ``dbar`` always equals -d^dag for
    surfaces built from towers. The same container serves X_k, Y_k and path
    increments.
    """

    k: int
    c: float
    value: np.ndarray
    d: np.ndarray
    dbar: np.ndarray


@dataclass(frozen=True)
class PathSpec:
    """Piecewise-linear integration path through complex waypoints."""

    waypoints: tuple
    segments_per_leg: int = 1
    max_refinements: int = 12
    tol: float = 1e-9

    def __post_init__(self):
        pts = tuple(complex(as_points(w)) for w in self.waypoints)
        if len(pts) < 2:
            raise ValueError("a path needs at least two waypoints")
        if self.segments_per_leg < 1:
            raise ValueError("segments_per_leg must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        object.__setattr__(self, "waypoints", pts)


@dataclass(frozen=True)
class MetricSample:
    """Induced metric data at one point (or batch).

    Conformality makes the diagonal components vanish identically; they are
    recorded as literal zeros. ``cross_residual`` measures how far
    tr(dX dbarX) is from -g12, an identity of the commutator tangents.
    """

    g12: np.ndarray
    g11: float
    g22: float
    cross_residual: np.ndarray


@dataclass(frozen=True)
class QuadratureConfig:
    """Knobs of the adaptive quadratures (paths and sphere integrals)."""

    tol: float = 1e-7
    max_refinements: int = 4
    radial_segments: int = 2
    theta_panels: int = 16
    chunk: int = 512


@dataclass(frozen=True)
class ActionResult:
    """Total sphere action of one level with a chart breakdown."""

    value: float
    est_error: float
    chart_split: dict
    refinements: int


# ----------------------------------------------------------- immersion jets

def immersion_jet(tower, k):
    """Matrix jet of X_k = -i(P_k + 2 sum_{j<k} P_j) + i c_k I."""
    n = tower.n
    acc = tower.levels[k]
    for j in range(k):
        acc = acc + tower.levels[j] * 2.0
    ident = jet_identity(n, acc.order, batch_shape=acc.batch_shape)
    return acc * (-1j) + ident * (1j * level_constant(k, n))


def immersion_jets(tower):
    """All X_k jets of a tower, sharing the cumulative level sums."""
    n = tower.n
    out = []
    prefix = None
    for k, P in enumerate(tower.levels):
        acc = P if prefix is None else P + prefix * 2.0
        ident = jet_identity(n, acc.order, batch_shape=acc.batch_shape)
        out.append(acc * (-1j) + ident * (1j * level_constant(k, n)))
        prefix = P if prefix is None else prefix + P
    return tuple(out)


def immersion_closed_form(tower, k):
    """ImmersionSample of X_k with 1-form tangents.

    The value comes from the closed form; the tangents use the commutator
    1-form d X_k = -i [dP_k, P_k], dbar X_k = i [dbar P_k, P_k], which is an
    independent route from the jet derivative of the closed form (their
    agreement is part of what the surface checks verify).
    """
    n = tower.n
    P = tower.levels[k]
    val = P.value.copy()
    for j in range(k):
        val = val + 2.0 * tower.levels[j].value
    c = level_constant(k, n)
    x = -1j * val + 1j * c * np.eye(n)
    dP, dbP = P.deriv(1, 0), P.deriv(0, 1)
    pv = P.value
    return ImmersionSample(
        k=k,
        c=c,
        value=x,
        d=-1j * (dP @ pv - pv @ dP),
        dbar=1j * (dbP @ pv - pv @ dbP),
    )


def stacked_surface(tower, k):
    """ImmersionSample of the stacked surface Y_k.

    Tangents are computed from the X_k jet alone: dY = -i [dX, X] and
    dbar Y = i [dbar X, X] with X's derivatives read off its jet. The value
    uses the canonical traceless integration constant, which collapses the
    closed form to -X_k; the tangent residuals and the path-integral route
    (integrate_stacked) carry the non-trivial content of that collapse.
    """
    xj = immersion_jet(tower, k)
    xv = xj.value
    dx = xj.deriv(1, 0)
    dbx = xj.deriv(0, 1)
    return ImmersionSample(
        k=k,
        c=level_constant(k, tower.n),
        value=-xv,
        d=-1j * (dx @ xv - xv @ dx),
        dbar=1j * (dbx @ xv - xv @ dbx),
    )


def idempotency_residual(tower, k):
    """max of ||X_k + Y_k|| and the two tangent sums ||dX_k + dY_k||, ||dbarX_k + dbarY_k||.

    Exactly zero for genuine tower surfaces; order one for generic
    anti-Hermitian fields that do not come from a projector.
    """
    xs = immersion_closed_form(tower, k)
    ys = stacked_surface(tower, k)
    worst = fro_norm(xs.value + ys.value)
    worst = np.maximum(worst, fro_norm(xs.d + ys.d))
    worst = np.maximum(worst, fro_norm(xs.dbar + ys.dbar))
    return worst


# ------------------------------------------------------------- path engine

def _tower_builder(source, order):
    if callable(source):
        return source
    if isinstance(source, HoloSeed):
        return lambda pts: build_tower(source, pts, order=order)
    raise TypeError("source must be a HoloSeed or a callable points -> ProjectorTower")


def _immersion_oneform(tower, k):
    """(F, Fbar) with dX = F dxi + Fbar dbar xi along the tower points."""
    P = tower.levels[k]
    pv, dP, dbP = P.value, P.deriv(1, 0), P.deriv(0, 1)
    return -1j * (dP @ pv - pv @ dP), 1j * (dbP @ pv - pv @ dbP)


def _stacked_oneform(tower, k):
    """(F, Fbar) for dY = i(M^dag dxi + M dbar xi), M = [dbar X, X]."""
    xj = immersion_jet(tower, k)
    xv = xj.value
    dbx = xj.deriv(0, 1)
    m = dbx @ xv - xv @ dbx
    mh = np.conj(np.swapaxes(m, -1, -2))
    return 1j * mh, 1j * m


def _integrate_oneform(build, oneform, k, path, chunk=512):
    """Composite Gauss-Legendre (order 8 per segment) with halving refinement."""
    gl_x, gl_w = leggauss(8)
    legs = list(zip(path.waypoints[:-1], path.waypoints[1:]))
    prev = None
    est = math.inf
    for m in range(path.max_refinements + 1):
        segs = path.segments_per_leg * (2 ** m)
        total = None
        for a, b in legs:
            dz = b - a
            if dz == 0:
                continue
            # nodes and weights of the composite rule on [0, 1]
            offs = (np.arange(segs) / segs)[:, None]
            ts = (offs + (gl_x + 1.0) / (2.0 * segs)).ravel()
            ws = np.tile(gl_w / (2.0 * segs), segs)
            acc = None
            for lo in range(0, ts.size, chunk):
                t = ts[lo: lo + chunk]
                w = ws[lo: lo + chunk]
                tower = build(a + t * dz)
                if tower.degenerate_at is not None:
                    raise DegeneratePoint(
                        "integration path crosses a degenerate point",
                        point=a + t * dz,
                    )
                f, fbar = oneform(tower, k)
                part = np.einsum("s,sij->ij", w, f) * dz
                part = part + np.einsum("s,sij->ij", w, fbar) * np.conj(dz)
                acc = part if acc is None else acc + part
            total = acc if total is None else total + acc
        if total is None:
            raise ValueError("path has zero length")
        if prev is not None:
            est = float(fro_norm(total - prev))
            if est < path.tol:
                n = total.shape[-1]
                total = total - (np.trace(total) / n) * np.eye(n)
                return total, est, m
        prev = total
    raise NoConvergence(
        f"path quadrature did not reach tol={path.tol:g} "
        f"within {path.max_refinements} refinements",
        last_value=prev,
        est_error=est,
    )


def integrate_immersion(source, k, path, order=None):
    """Path-integrated increment X_k(end) - X_k(start).

    ``source`` is a HoloSeed or a callable mapping a batch of points to a
    ProjectorTower. The 1-form is integrated leg by leg with a composite
    8-node Gauss-Legendre rule, halving segment lengths until two successive
    refinements agree within path.tol (NoConvergence otherwise; crossing a
    degenerate point raises DegeneratePoint). The increment is re-centered
    to traceless before it is returned, and the returned sample's tangents
    are those of the path end point.
    """
    build = _tower_builder(source, order)
    inc, _est, _m = _integrate_oneform(build, _immersion_oneform, k, path)
    end = immersion_closed_form(build(np.asarray([path.waypoints[-1]])), k)
    n = inc.shape[-1]
    return ImmersionSample(
        k=k, c=level_constant(k, n), value=inc, d=end.d[0], dbar=end.dbar[0]
    )


def integrate_stacked(source, k, path, order=None):
    """Path-integrated increment Y_k(end) - Y_k(start) via the M-commutator 1-form."""
    build = _tower_builder(source, order)
    inc, _est, _m = _integrate_oneform(build, _stacked_oneform, k, path)
    end_tower = build(np.asarray([path.waypoints[-1]]))
    ys = stacked_surface(end_tower, k)
    n = inc.shape[-1]
    return ImmersionSample(
        k=k, c=level_constant(k, n), value=inc, d=ys.d[0], dbar=ys.dbar[0]
    )


# --------------------------------------------------- algebraic spectral data

def _allowed_offsets(k, n):
    # minimal polynomial roots are i(c_k - o) with o in this list
    if n == 2 or k == 0:
        return (0.0, 1.0) if k == 0 else (1.0, 2.0)
    if k == n - 1:
        return (1.0, 2.0)
    return (0.0, 1.0, 2.0)


def minimal_polynomial_residual(sample):
    """Frobenius norm of the minimal-polynomial product of an X_k sample.

    Interior levels satisfy the cubic with roots i(c_k - {0, 1, 2}); the
    bottom and top levels satisfy the quadratics with the {0, 1} and {1, 2}
    root subsets respectively.
    """
    x = np.asarray(sample.value)
    n = x.shape[-1]
    eye = np.eye(n)
    prod = None
    for off in _allowed_offsets(sample.k, n):
        factor = x - 1j * (sample.c - off) * eye
        prod = factor if prod is None else prod @ factor
    return fro_norm(prod)


def eigenvalue_residual(sample):
    """Max distance of the spectrum of -i X_k from the allowed {c_k - o} values."""
    x = np.asarray(sample.value)
    n = x.shape[-1]
    vals = np.linalg.eigvalsh(-1j * x)
    allowed = np.array([sample.c - off for off in _allowed_offsets(sample.k, n)])
    dist = np.min(np.abs(vals[..., None] - allowed), axis=-1)
    return np.max(dist, axis=-1)


def alternating_sum_residual(tower):
    """|| sum_k (-1)^k X_k ||_F, which vanishes for every full tower."""
    n = tower.n
    prefix = np.zeros((n, n), dtype=complex)
    acc = None
    for k, P in enumerate(tower.levels):
        xv = -1j * (P.value + 2.0 * prefix) + 1j * level_constant(k, n) * np.eye(n)
        acc = xv if acc is None else acc + (-1.0) ** k * xv
        prefix = prefix + P.value
    return fro_norm(acc)


@dataclass(frozen=True)
class MultileafDiagnostics:
    """Residuals of a weighted multi-level surface."""

    el_residual: np.ndarray
    hermiticity_residual: np.ndarray
    trace_residual: np.ndarray


def multileaf(tower, weights):
    """Weighted surface X = sum_k w_k X_k with diagnostics.

    Any complex weights solve [d dbar X, X] = 0; real weights additionally
    keep X in su(n) (anti-Hermitian traceless), measured by the last two
    diagnostics.
    """
    w = np.asarray(weights, dtype=complex)
    if w.shape != (len(tower.levels),):
        raise ValueError(f"need exactly {len(tower.levels)} weights")
    xjets = immersion_jets(tower)
    acc = xjets[0] * complex(w[0])
    for k in range(1, len(xjets)):
        acc = acc + xjets[k] * complex(w[k])
    val = acc.value
    mixed = acc.deriv(1, 1)
    el = fro_norm(mixed @ val - val @ mixed)
    herm = fro_norm(val + np.conj(np.swapaxes(val, -1, -2)))
    trc = np.abs(np.trace(val, axis1=-2, axis2=-1))
    return acc, MultileafDiagnostics(
        el_residual=el, hermiticity_residual=herm, trace_residual=trc
    )


# ----------------------------------------------------------- metric, action

def metric_at(tower, k):
    """Induced metric sample at the tower's point(s).

    g12 = tr(dP_k dbarP_k) is the (real, non-negative) off-diagonal metric
    component and at the same time the action density; the diagonal
    components vanish by conformality. cross_residual reports
    |tr(dX dbarX) + g12| for the commutator tangents.
    """
    P = tower.levels[k]
    dP, dbP = P.deriv(1, 0), P.deriv(0, 1)
    g12 = np.trace(dP @ dbP, axis1=-2, axis2=-1).real
    xs = immersion_closed_form(tower, k)
    cross = np.trace(xs.d @ xs.dbar, axis1=-2, axis2=-1)
    return MetricSample(
        g12=g12, g11=0.0, g22=0.0, cross_residual=np.abs(cross + g12)
    )


def _density_factory(seed, k, order):
    def density(pts):
        tower = build_tower(seed, pts, order=order, max_level=k)
        if tower.degenerate_at is not None:
            raise DegeneratePoint("action quadrature hit a degenerate node", point=pts)
        P = tower.levels[k]
        dP, dbP = P.deriv(1, 0), P.deriv(0, 1)
        return np.trace(dP @ dbP, axis1=-2, axis2=-1).real

    return density


def _polar_pass(f, nr_segments, n_theta, chunk):
    """integral over the unit disk of f(z) dA with composite GL x trapezoid nodes."""
    gl_x, gl_w = leggauss(8)
    offs = (np.arange(nr_segments) / nr_segments)[:, None]
    rs = (offs + (gl_x + 1.0) / (2.0 * nr_segments)).ravel()
    rw = np.tile(gl_w / (2.0 * nr_segments), nr_segments)
    thetas = 2.0 * np.pi * np.arange(n_theta) / n_theta
    tw = 2.0 * np.pi / n_theta
    zs = (rs[:, None] * np.exp(1j * thetas)[None, :]).ravel()
    ws = (rw * rs)[:, None].repeat(n_theta, axis=1).ravel() * tw
    total = 0.0
    for lo in range(0, zs.size, chunk):
        total += float(np.sum(ws[lo: lo + chunk] * f(zs[lo: lo + chunk])))
    return total


def action(seed, k, quad=None, order=None, swap_charts=False):
    """Total action integral tr(dP_k dbarP_k) dxi1 dxi2 over the sphere.

    The plane splits into the unit disk, integrated directly in polar
    coordinates, and its exterior, pulled back through xi -> 1/xi so it
    becomes a second unit-disk integral of L(1/w)/|w|^4. Both charts refine
    together (radial segments and angular panels double per refinement)
    until the combined total moves less than quad.tol; otherwise
    NoConvergence. ``swap_charts`` routes the integrand through the inverted
    parametrization first, a cheap residual symmetry of the decomposition.
    """
    quad = quad or QuadratureConfig()
    density = _density_factory(seed, k, order)

    def inverted(w):
        return density(1.0 / w) / np.abs(w) ** 4

    first, second = (density, inverted) if not swap_charts else (
        inverted,
        lambda u: inverted(1.0 / u) / np.abs(u) ** 4,
    )

    prev = None
    est = math.inf
    for m in range(quad.max_refinements + 1):
        nr = quad.radial_segments * (2 ** m)
        nt = quad.theta_panels * (2 ** m)
        direct_part = _polar_pass(first, nr, nt, quad.chunk)
        inverted_part = _polar_pass(second, nr, nt, quad.chunk)
        total = direct_part + inverted_part
        if prev is not None:
            est = abs(total - prev)
            if est < quad.tol:
                return ActionResult(
                    value=total,
                    est_error=est,
                    chart_split={
                        "disk": direct_part,
                        "inverted": inverted_part,
                        "radial_segments": nr,
                        "theta_panels": nt,
                        "swapped": bool(swap_charts),
                    },
                    refinements=m,
                )
        prev = total
    raise NoConvergence(
        f"action quadrature did not reach tol={quad.tol:g} "
        f"within {quad.max_refinements} refinements",
        last_value=prev,
        est_error=est,
    )


# -------------------------------------------------------- su(n) coordinates

def sun_basis(n):
    """Generalized Gell-Mann basis of su(n), normalised to tr(l_a l_b) = 2 d_ab.

    Ordering: symmetric off-diagonal pairs (j < k, lexicographic), then the
    antisymmetric pairs in the same order, then the n-1 diagonal matrices
    sqrt(2/(l(l+1))) diag(1, ..., 1, -l, 0, ...).
    """
    if n < 2:
        raise ValueError("su(n) needs n >= 2")
    mats = []
    for j in range(n):
        for k in range(j + 1, n):
            m = np.zeros((n, n), dtype=complex)
            m[j, k] = 1.0
            m[k, j] = 1.0
            mats.append(m)
    for j in range(n):
        for k in range(j + 1, n):
            m = np.zeros((n, n), dtype=complex)
            m[j, k] = -1j
            m[k, j] = 1j
            mats.append(m)
    for l in range(1, n):
        m = np.zeros((n, n), dtype=complex)
        m[:l, :l] = np.eye(l)
        m[l, l] = -float(l)
        mats.append(m * math.sqrt(2.0 / (l * (l + 1))))
    return np.stack(mats)


def sun_coordinates(x, tol=1e-8):
    """Real coordinates of an anti-Hermitian traceless matrix, x_a = tr(-iX l_a)/2.

    Accepts an ImmersionSample or a bare matrix (batched fine). Raises
    NotInAlgebra when X fails anti-Hermiticity or tracelessness beyond
    tol * (1 + ||X||).
    """
    X = np.asarray(x.value if isinstance(x, ImmersionSample) else x, dtype=complex)
    n = X.shape[-1]
    scale = 1.0 + np.max(fro_norm(X))
    herm = np.max(fro_norm(X + np.conj(np.swapaxes(X, -1, -2))))
    trc = np.max(np.abs(np.trace(X, axis1=-2, axis2=-1)))
    if herm > tol * scale or trc > tol * scale:
        raise NotInAlgebra(
            f"matrix is not anti-Hermitian traceless within {tol:g}: "
            f"hermiticity residual {herm:.3e}, trace residual {trc:.3e}"
        )
    basis = sun_basis(n)
    coords = 0.5 * np.einsum("...ij,aji->...a", -1j * X, basis)
    return coords.real


def sun_matrix(coords, n=None):
    """Inverse of sun_coordinates: X = i sum_a x_a l_a."""
    c = np.asarray(coords, dtype=float)
    if n is None:
        n = int(round(math.sqrt(c.shape[-1] + 1)))
    if n * n - 1 != c.shape[-1]:
        raise ValueError(f"coordinate length {c.shape[-1]} is not n^2-1")
    return 1j * np.einsum("...a,aij->...ij", c, sun_basis(n))
