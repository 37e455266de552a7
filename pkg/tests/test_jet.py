"""Jet arithmetic against hand values, a symbolic oracle, and finite differences."""

import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from cpn_stack import (
    BidegreeOrder,
    DegeneratePoint,
    EvalPoint,
    InsufficientOrder,
    Jet,
    as_points,
    fd_oracle,
    jet_constant,
    jet_from_poly,
    jet_identity,
    jet_inner,
    jet_mul,
    jet_outer,
    jet_stack,
    jet_xi,
    jet_xibar,
)


def test_eval_point_roundtrip():
    pt = EvalPoint(0.25, -0.5)
    assert pt.xi == 0.25 - 0.5j
    assert EvalPoint.from_complex(pt.xi) == pt


def test_as_points_accepts_scalars_and_arrays():
    assert as_points(1.0 + 2.0j) == 1.0 + 2.0j
    assert as_points(EvalPoint(1.0, 2.0)) == 1.0 + 2.0j
    arr = as_points(np.array([0.0, 1.0j, 2.0]))
    assert arr.shape == (3,)
    with pytest.raises(ValueError):
        as_points(np.array([np.nan + 0j]))


def test_poly_jet_value_and_derivatives():
    # F = 1 + 3 xi + xi^2 at xi = 0.5 + 0.5j
    z = 0.5 + 0.5j
    j = jet_from_poly([1.0, 3.0, 1.0], z, (3, 3))
    assert j.value == pytest.approx(1 + 3 * z + z * z)
    assert j.deriv(1, 0) == pytest.approx(3 + 2 * z)
    assert j.deriv(2, 0) == pytest.approx(2.0)
    assert j.deriv(0, 1) == 0.0  # holomorphic: no dbar dependence
    assert j.deriv(1, 1) == 0.0


def test_mixed_product_hand_oracle():
    # F = (1 + xi conj(xi))^2 at xi = 1:
    #   value 4, dF = 2(1+|xi|^2) conj(xi) -> 4, ddbar F = 2(1 + 2|xi|^2) -> 6
    z = 1.0 + 0.0j
    u = jet_constant(1.0, (2, 2)) + jet_xi(z, (2, 2)) * jet_xibar(z, (2, 2))
    f = u * u
    assert f.value == pytest.approx(4.0)
    assert f.deriv(1, 0) == pytest.approx(4.0)
    assert f.deriv(0, 1) == pytest.approx(4.0)
    assert f.deriv(1, 1) == pytest.approx(6.0)
    # Taylor-normalised storage: coeff(1,1) = ddbar F / (1! 1!)
    assert f.coeff(1, 1) == pytest.approx(6.0)


def test_reciprocal_series_at_zero():
    # 1/(1 + xi conj(xi)) = 1 - xi conj(xi) + ... : mixed slot is -1 at 0
    z = 0.0 + 0.0j
    u = jet_constant(1.0, (3, 3)) + jet_xi(z, (3, 3)) * jet_xibar(z, (3, 3))
    r = u.reciprocal()
    assert r.value == pytest.approx(1.0)
    assert r.deriv(1, 1) == pytest.approx(-1.0)
    assert r.deriv(1, 0) == pytest.approx(0.0)
    # u * (1/u) is the constant-one jet on the shared extent
    prod = u * r
    assert prod.value == pytest.approx(1.0)
    assert abs(prod.deriv(1, 1)) < 1e-14
    assert abs(prod.deriv(1, 0)) < 1e-14


def test_reciprocal_degenerate_point_raises():
    z = 0.0 + 0.0j
    with pytest.raises(DegeneratePoint):
        jet_xi(z, (2, 2)).reciprocal()


def test_derivative_headroom_is_tracked():
    j = jet_from_poly([1.0, 1.0], 0.0j, (1, 1))
    dj = j.d()
    assert dj.order == BidegreeOrder(0, 1)
    with pytest.raises(InsufficientOrder):
        dj.d()
    with pytest.raises(InsufficientOrder):
        j.deriv(2, 0)


def _sympy_slots(expr, z, w, z0, order):
    """Bidegree derivative table of expr(z, w) at (z0, conj z0), w = conj(xi)."""
    p, q = order
    out = np.zeros((p + 1, q + 1), dtype=complex)
    for a in range(p + 1):
        for b in range(q + 1):
            d = sp.diff(expr, z, a, w, b)
            out[a, b] = complex(d.subs({z: z0, w: np.conj(z0)}))
    return out


def test_scalar_product_against_sympy():
    z0 = 0.3 - 0.7j
    order = (2, 2)
    f = jet_from_poly([1.0, 2.0, 0.5j], z0, order)
    g = jet_from_poly([0.5, -1.0j, 2.0], z0, order)
    F = f * g.hconj()

    z, w = sp.symbols("z w")
    fe = 1 + 2 * z + sp.Rational(1, 2) * sp.I * z**2
    ge = sp.Rational(1, 2) + sp.I * w + 2 * w**2  # conjugated coefficients in w
    ref = _sympy_slots(sp.expand(fe * ge), z, w, z0, order)
    for a in range(3):
        for b in range(3):
            assert F.deriv(a, b) == pytest.approx(
                ref[a, b] * 1.0, abs=1e-12, rel=1e-12
            )


def test_matrix_product_against_sympy():
    z0 = -0.4 + 0.2j
    order = (2, 1)
    a11 = jet_from_poly([1.0, 1.0], z0, order)
    a12 = jet_from_poly([0.0, 2.0], z0, order)
    b11 = jet_from_poly([1.0, -1.0], z0, order)
    b21 = jet_from_poly([3.0], z0, order)
    A = jet_stack([a11, a12])          # row as a vector
    B = jet_stack([b11, b21])
    # inner product <A, B> = conj(a11) b11 + conj(a12) b21
    F = jet_inner(A, B)

    z, w = sp.symbols("z w")
    expr = (1 + w) * (1 - z) + (2 * w) * 3
    # conjugating the first argument swaps its orders, so the product
    # trims to bidegree (min(1,2), min(2,1)) = (1,1)
    assert F.order == BidegreeOrder(1, 1)
    ref = _sympy_slots(sp.expand(expr), z, w, z0, (1, 1))
    for a in range(2):
        for b in range(2):
            assert F.deriv(a, b) == pytest.approx(ref[a, b], abs=1e-12, rel=1e-12)


def test_outer_and_trace():
    z0 = 0.2 + 0.1j
    f = jet_stack(
        [jet_from_poly([1.0], z0, (2, 2)), jet_from_poly([0.0, 1.0], z0, (2, 2))]
    )
    M = jet_outer(f, f)
    assert M.kind == "matrix"
    tr = M.trace()
    n2 = jet_inner(f, f)
    assert np.allclose(tr.coeffs, n2.coeffs)
    assert n2.value == pytest.approx(1 + abs(z0) ** 2)


def test_identity_jet_and_matmul():
    z0 = 0.5j
    ident = jet_identity(2, (2, 2))
    f = jet_stack(
        [jet_from_poly([1.0], z0, (2, 2)), jet_from_poly([0.0, 1.0], z0, (2, 2))]
    )
    g = jet_mul(ident, jet_outer(f, f))
    assert np.allclose(g.coeffs, jet_outer(f, f).coeffs)


def test_fd_oracle_matches_hand_derivatives():
    # F(xi) = (1 + |xi|^2)^2, with d F = 2(1+|xi|^2) conj(xi),
    # dbar F = 2(1+|xi|^2) xi, d dbar F = 2(1 + 2|xi|^2)
    z0 = 0.3 + 0.2j

    def field(z):
        return (1.0 + abs(z) ** 2) ** 2

    fd = fd_oracle(field, z0, 1e-4)
    s = abs(z0) ** 2
    assert fd.d == pytest.approx(2 * (1 + s) * np.conj(z0), abs=1e-7)
    assert fd.dbar == pytest.approx(2 * (1 + s) * z0, abs=1e-7)
    assert fd.ddbar == pytest.approx(2 * (1 + 2 * s), abs=1e-6)


def test_fd_oracle_second_order_convergence():
    z0 = 0.7 - 0.4j

    def field(z):
        return 1.0 / (1.0 + abs(z) ** 2)

    s = abs(z0) ** 2
    exact = -np.conj(z0) / (1 + s) ** 2  # d of 1/(1+|xi|^2)
    e1 = abs(fd_oracle(field, z0, 1e-2).d - exact)
    e2 = abs(fd_oracle(field, z0, 5e-3).d - exact)
    rate = math.log2(e1 / e2)
    assert rate == pytest.approx(2.0, abs=0.2)


# --------------------------------------------------------------- properties

coeffs_st = st.lists(
    st.complex_numbers(
        min_magnitude=0.0, max_magnitude=2.0, allow_nan=False, allow_infinity=False
    ),
    min_size=1,
    max_size=4,
)
point_st = st.complex_numbers(
    min_magnitude=0.0, max_magnitude=1.5, allow_nan=False, allow_infinity=False
)


@settings(max_examples=60, deadline=None)
@given(coeffs_st, coeffs_st, point_st)
def test_product_value_is_pointwise(cf, cg, z0):
    f = jet_from_poly(cf, z0, (2, 2))
    g = jet_from_poly(cg, z0, (2, 2))
    fg = f * g.hconj()
    scale = 1.0 + abs(f.value) * abs(g.value)
    assert abs(fg.value - f.value * np.conj(g.value)) <= 1e-10 * scale


@settings(max_examples=60, deadline=None)
@given(coeffs_st, coeffs_st, point_st)
def test_leibniz_rule_for_d(cf, cg, z0):
    f = jet_from_poly(cf, z0, (3, 2))
    g = jet_from_poly(cg, z0, (3, 2)).hconj()
    lhs = (f * g).d()
    rhs = f.d() * g + f * g.d()
    scale = 1.0 + np.max(np.abs(lhs.coeffs)) + np.max(np.abs(rhs.coeffs))
    assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) <= 1e-10 * scale


@settings(max_examples=60, deadline=None)
@given(coeffs_st, point_st)
def test_hconj_is_an_involution(cf, z0):
    f = jet_from_poly(cf, z0, (2, 3))
    back = f.hconj().hconj()
    assert back.order == f.order
    assert np.array_equal(back.coeffs, f.coeffs)
