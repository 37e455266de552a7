"""Truncated mixed-derivative jet arithmetic over complex scalars, vectors, matrices.

A jet stores the coefficients of a bidegree-(p, q) expansion of a smooth field
F about a base point xi0,

    F(xi0 + t) = sum_{a<=p, b<=q} c[a, b] t^a conj(t)^b + O(t^{p+1}, conj(t)^{q+1})

with Taylor-normalised coefficients c[a, b] = (d^a dbar^b F)(xi0) / (a! b!),
where d and dbar are the Wirtinger derivatives of xi = xi1 + i xi2:

    d    = (d/dxi1 - i d/dxi2) / 2
    dbar = (d/dxi1 + i d/dxi2) / 2

Taylor normalisation keeps multiplication a plain truncated Cauchy product.

Coefficient arrays have shape (p+1, q+1, *batch, *tail): the two leading axes
index derivative orders, optional batch axes hold one lane per base point, and
the tail is () for scalars, (n,) for vectors, (n, n) for matrices. A jet's
array extent IS its valid order: every operation returns a jet trimmed to the
bidegree it can vouch for, and reading past that extent raises
InsufficientOrder. Jets are immutable.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import DegeneratePoint, InsufficientOrder

#: Default absolute threshold below which a normalizer counts as degenerate.
DEGENERACY_EPS = 1e-12

_TAIL_RANK = {"scalar": 0, "vector": 1, "matrix": 2}


class EvalPoint(NamedTuple):
    """A point xi = xi1 + i*xi2 of the equatorial chart."""

    xi1: float
    xi2: float

    @property
    def xi(self):
        return complex(self.xi1, self.xi2)

    @classmethod
    def from_complex(cls, z):
        z = complex(z)
        return cls(z.real, z.imag)


class BidegreeOrder(NamedTuple):
    """Truncation order: p holomorphic steps, q antiholomorphic steps."""

    p: int
    q: int


def as_points(pointlike):
    """Normalise a point argument to a finite complex scalar or ndarray.

    Accepts EvalPoint, complex/real scalars, or array-likes of complex points
    (a batch, one jet lane per entry).
    """
    if isinstance(pointlike, EvalPoint):
        z = complex(pointlike.xi1, pointlike.xi2)
    else:
        z = np.asarray(pointlike, dtype=complex)
        if z.ndim == 0:
            z = complex(z)
    if not np.all(np.isfinite(np.atleast_1d(z))):
        raise ValueError("evaluation points must be finite")
    return z


def _merge_points(pa, pb):
    if pa is None:
        return pb
    if pb is None:
        return pa
    if np.array_equal(np.asarray(pa), np.asarray(pb)):
        return pa
    raise ValueError("cannot combine jets based at different points")


@dataclass(frozen=True, eq=False)
class Jet:
    """One truncated bidegree expansion; see the module docstring for layout.

    ``point`` is the base point (complex scalar or batch array) or None for a
    constant field, which combines with jets at any point.
    """

    coeffs: np.ndarray
    kind: str
    point: object = None

    # numpy must defer to our operators instead of coercing to object arrays
    __array_ufunc__ = None

    def __post_init__(self):
        if self.kind not in _TAIL_RANK:
            raise ValueError(f"unknown jet kind {self.kind!r}")
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim < 2 + _TAIL_RANK[self.kind]:
            raise ValueError(f"{self.kind} jet needs rank >= {2 + _TAIL_RANK[self.kind]}")
        object.__setattr__(self, "coeffs", c)

    # ------------------------------------------------------------- structure
    @property
    def order(self):
        return BidegreeOrder(self.coeffs.shape[0] - 1, self.coeffs.shape[1] - 1)

    @property
    def tail(self):
        r = _TAIL_RANK[self.kind]
        return self.coeffs.shape[self.coeffs.ndim - r:]

    @property
    def batch_shape(self):
        r = _TAIL_RANK[self.kind]
        return self.coeffs.shape[2: self.coeffs.ndim - r]

    @property
    def dim(self):
        """Object dimension n for vector/matrix jets."""
        if self.kind == "scalar":
            raise ValueError("scalar jets have no object dimension")
        return self.tail[-1]

    def _check_slot(self, a, b):
        p, q = self.order
        if not (0 <= a <= p and 0 <= b <= q):
            raise InsufficientOrder(
                f"slot ({a},{b}) requested but jet is only valid to bidegree ({p},{q})"
            )

    def coeff(self, a, b):
        """Taylor-normalised coefficient c[a, b] = d^a dbar^b F / (a! b!)."""
        self._check_slot(a, b)
        return self.coeffs[a, b]

    def deriv(self, a, b):
        """Mixed derivative d^a dbar^b F at the base point."""
        return self.coeff(a, b) * (math.factorial(a) * math.factorial(b))

    @property
    def value(self):
        return self.coeffs[0, 0]

    # ------------------------------------------------------------ derivative
    def d(self):
        """Jet of the holomorphic derivative; valid p drops by one."""
        p, q = self.order
        if p < 1:
            raise InsufficientOrder("cannot differentiate: no holomorphic headroom left")
        mult = np.arange(1, p + 1, dtype=float).reshape((p,) + (1,) * (self.coeffs.ndim - 1))
        return Jet(self.coeffs[1:, :] * mult, self.kind, self.point)

    def dbar(self):
        """Jet of the antiholomorphic derivative; valid q drops by one."""
        p, q = self.order
        if q < 1:
            raise InsufficientOrder("cannot differentiate: no antiholomorphic headroom left")
        mult = np.arange(1, q + 1, dtype=float).reshape((1, q) + (1,) * (self.coeffs.ndim - 2))
        return Jet(self.coeffs[:, 1:] * mult, self.kind, self.point)

    def hconj(self):
        """Hermitian conjugate field: orders swap, coefficients conjugate.

        For matrices the object axes transpose as well; for vectors the result
        holds the conjugated components (a "bra" in inner/outer products).
        """
        c = np.conj(np.swapaxes(self.coeffs, 0, 1))
        if self.kind == "matrix":
            c = np.swapaxes(c, -1, -2)
        return Jet(c, self.kind, self.point)

    def trace(self):
        """Scalar jet of tr F for a matrix jet."""
        if self.kind != "matrix":
            raise ValueError("trace needs a matrix jet")
        return Jet(np.trace(self.coeffs, axis1=-2, axis2=-1), "scalar", self.point)

    def reciprocal(self, eps=DEGENERACY_EPS):
        """Jet of 1/F for a scalar jet; DegeneratePoint if |value| < eps."""
        if self.kind != "scalar":
            raise ValueError("reciprocal needs a scalar jet")
        if np.any(np.abs(self.coeffs[0, 0]) < eps):
            raise DegeneratePoint(
                f"scalar jet value below degeneracy threshold {eps:g}", point=self.point
            )
        return self._reciprocal_unchecked()

    def _reciprocal_unchecked(self):
        # standard power-series reciprocal, diagonal by total order
        u = self.coeffs
        p, q = self.order
        out = np.zeros_like(u)
        inv0 = 1.0 / u[0, 0]
        out[0, 0] = inv0
        for s in range(1, p + q + 1):
            for a in range(max(0, s - q), min(p, s) + 1):
                b = s - a
                acc = np.zeros(np.shape(u[0, 0]), dtype=complex)
                for i in range(a + 1):
                    for j in range(b + 1):
                        if i == 0 and j == 0:
                            continue
                        acc = acc + u[i, j] * out[a - i, b - j]
                out[a, b] = -inv0 * acc
        return Jet(out, "scalar", self.point)

    # ------------------------------------------------------------- operators
    def __add__(self, other):
        if not isinstance(other, Jet):
            return NotImplemented
        if self.kind != other.kind:
            raise ValueError(f"cannot add {self.kind} jet to {other.kind} jet")
        p = min(self.order.p, other.order.p)
        q = min(self.order.q, other.order.q)
        c = self.coeffs[: p + 1, : q + 1] + other.coeffs[: p + 1, : q + 1]
        return Jet(c, self.kind, _merge_points(self.point, other.point))

    def __sub__(self, other):
        return self.__add__(-other) if isinstance(other, Jet) else NotImplemented

    def __neg__(self):
        return Jet(-self.coeffs, self.kind, self.point)

    def __mul__(self, other):
        if isinstance(other, Jet):
            return jet_mul(self, other)
        if isinstance(other, (int, float, complex, np.number)):
            return Jet(self.coeffs * other, self.kind, self.point)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return Jet(self.coeffs / other, self.kind, self.point)
        return NotImplemented

    def __matmul__(self, other):
        if not isinstance(other, Jet):
            return NotImplemented
        if self.kind != "matrix" or other.kind not in ("matrix", "vector"):
            raise ValueError(f"@ undefined for {self.kind} x {other.kind}")
        return jet_mul(self, other)


# ---------------------------------------------------------------- construction

def jet_from_poly(poly_coeffs, point, order):
    """Jet of a holomorphic polynomial, Taylor-shifted to the base point.

    Parameters
    ----------
    poly_coeffs : sequence of complex
        Coefficients in ascending powers of xi.
    point : EvalPoint, complex or array of complex
        Base point(s); an array produces a batched jet.
    order : BidegreeOrder or (p, q) pair

    The expansion is exact, so the result is valid to the full requested
    order (all dbar coefficients vanish: the field is holomorphic).
    """
    z = as_points(point)
    p, q = order
    c = np.atleast_1d(np.asarray(poly_coeffs, dtype=complex))
    if c.ndim != 1:
        raise ValueError("polynomial coefficients must be one-dimensional")
    batch = np.shape(z)
    out = np.zeros((p + 1, q + 1) + batch, dtype=complex)
    deriv = c
    for a in range(p + 1):
        if deriv.size == 0:
            break
        out[a, 0] = npoly.polyval(z, deriv) / math.factorial(a)
        deriv = npoly.polyder(deriv)
    return Jet(out, "scalar", z)


def jet_constant(value, order, point=None, kind=None, batch_shape=()):
    """Jet of a constant field (scalar, vector or matrix by the value's rank).

    batch_shape prepends broadcast lanes so the constant lines up with
    batched jets in arithmetic.
    """
    v = np.asarray(value, dtype=complex)
    if kind is None:
        kind = {0: "scalar", 1: "vector", 2: "matrix"}.get(v.ndim)
        if kind is None:
            raise ValueError("pass kind= explicitly for batched constants")
    p, q = order
    out = np.zeros((p + 1, q + 1) + tuple(batch_shape) + v.shape, dtype=complex)
    out[0, 0] = v
    return Jet(out, kind, point)


def jet_identity(n, order, point=None, batch_shape=()):
    """Constant jet of the n x n identity matrix."""
    return jet_constant(np.eye(n), order, point=point, batch_shape=batch_shape)


def jet_xi(point, order):
    """Jet of the coordinate field xi."""
    return jet_from_poly([0.0, 1.0], point, order)


def jet_xibar(point, order):
    """Jet of the conjugate coordinate field conj(xi)."""
    p, q = order
    return jet_xi(point, BidegreeOrder(q, p)).hconj()


def jet_stack(components):
    """Stack scalar jets (same point) into a vector jet, trimming to common order."""
    components = list(components)
    if not components:
        raise ValueError("need at least one component")
    p = min(j.order.p for j in components)
    q = min(j.order.q for j in components)
    point = None
    for j in components:
        if j.kind != "scalar":
            raise ValueError("jet_stack expects scalar jets")
        point = _merge_points(point, j.point)
    c = np.stack([j.coeffs[: p + 1, : q + 1] for j in components], axis=-1)
    return Jet(c, "vector", point)


# --------------------------------------------------------------- cauchy engine

def _cauchy(a, b, combine, out_kind):
    """Truncated Cauchy product with a custom coefficient-level product.

    combine(a_coef, b_block) must accept one coefficient of ``a`` (shape
    (*batch, *tail_a)) against a leading block of ``b``'s coefficients
    (shape (x, y, *batch, *tail_b)) and broadcast. Zero coefficient blocks
    of ``a`` are skipped, which makes holomorphic factors cheap.
    """
    p = min(a.order.p, b.order.p)
    q = min(a.order.q, b.order.q)
    A = a.coeffs
    B = b.coeffs[: p + 1, : q + 1]
    probe = combine(A[0, 0], B[:1, :1])
    out = np.zeros((p + 1, q + 1) + probe.shape[2:], dtype=complex)
    for i in range(p + 1):
        for j in range(q + 1):
            blk = A[i, j]
            if not blk.any():
                continue
            out[i:, j:] += combine(blk, B[: p + 1 - i, : q + 1 - j])
    return Jet(out, out_kind, _merge_points(a.point, b.point))


def _scale_combine(tail_rank_b):
    pad = (Ellipsis,) + (None,) * tail_rank_b

    def combine(a, b):
        return (a[pad] if tail_rank_b else a) * b

    return combine


def jet_mul(a, b):
    """Product jet, valid to the componentwise minimum of the operand orders.

    Supports scalar*scalar, scalar*vector/matrix (either side), matrix@matrix
    and matrix@vector. Use jet_outer / jet_inner for vector-vector products.
    """
    ka, kb = a.kind, b.kind
    if ka == "scalar":
        return _cauchy(a, b, _scale_combine(_TAIL_RANK[kb]), kb)
    if kb == "scalar":
        # commute the scalar to the left; Cauchy weights are symmetric
        return _cauchy(b, a, _scale_combine(_TAIL_RANK[ka]), ka)
    if ka == "matrix" and kb == "matrix":
        return _cauchy(a, b, np.matmul, "matrix")
    if ka == "matrix" and kb == "vector":
        def matvec(m, vblock):
            return (m @ vblock[..., None])[..., 0]
        return _cauchy(a, b, matvec, "vector")
    raise ValueError(f"jet_mul undefined for {ka} x {kb}; see jet_outer/jet_inner")


def jet_outer(f, g):
    """Matrix jet of the rank-1 field f (x) g^dag from two vector jets."""
    if f.kind != "vector" or g.kind != "vector":
        raise ValueError("jet_outer expects vector jets")

    def outer(fc, gblock):
        return fc[..., :, None] * gblock[..., None, :]

    return _cauchy(f, g.hconj(), outer, "matrix")


def jet_inner(g, f):
    """Scalar jet of the Hermitian inner product g^dag f."""
    if f.kind != "vector" or g.kind != "vector":
        raise ValueError("jet_inner expects vector jets")

    def inner(gc, fblock):
        return np.sum(gc * fblock, axis=-1)

    return _cauchy(g.hconj(), f, inner, "scalar")


# ------------------------------------------------------ free-function aliases

def jet_hconj(a):
    """Hermitian conjugate jet (see Jet.hconj)."""
    return a.hconj()


def jet_inv_scalar(a, eps=DEGENERACY_EPS):
    """Reciprocal of a scalar jet; DegeneratePoint if the value is below eps."""
    return a.reciprocal(eps)


def jet_d(a):
    """Holomorphic-derivative jet (see Jet.d)."""
    return a.d()


def jet_dbar(a):
    """Antiholomorphic-derivative jet (see Jet.dbar)."""
    return a.dbar()


# ------------------------------------------------------- finite differences

@dataclass(frozen=True)
class FdDerivatives:
    """Central-difference estimates of d, dbar and the mixed d dbar."""

    d: np.ndarray
    dbar: np.ndarray
    ddbar: np.ndarray


def fd_oracle(field, point, h):
    """Second-order finite-difference estimates of d, dbar, d dbar.

    ``field`` maps a complex point to an array value and is evaluated on the
    axis-aligned stencil around ``point`` with real step ``h``. Combining
    the real-axis and imaginary-axis central differences per the Wirtinger
    definitions gives O(h^2) accuracy for smooth fields; the mixed estimate
    is a quarter of the 5-point Laplacian (the d1 d2 cross terms cancel).

    This is the independent oracle route: it never touches jet arithmetic.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    z = as_points(point)
    f_pr = np.asarray(field(z + h), dtype=complex)
    f_mr = np.asarray(field(z - h), dtype=complex)
    f_pi = np.asarray(field(z + 1j * h), dtype=complex)
    f_mi = np.asarray(field(z - 1j * h), dtype=complex)
    f_00 = np.asarray(field(z), dtype=complex)
    d1 = (f_pr - f_mr) / (2.0 * h)
    d2 = (f_pi - f_mi) / (2.0 * h)
    lap = (f_pr + f_mr + f_pi + f_mi - 4.0 * f_00) / (h * h)
    return FdDerivatives(d=(d1 - 1j * d2) / 2.0, dbar=(d1 + 1j * d2) / 2.0, ddbar=lap / 4.0)
