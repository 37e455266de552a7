"""Projector towers over holomorphic seeds and their defining identities.

A polynomial seed f0 : C -> C^n (components given by ascending coefficient
lists) generates the rank-1 Hermitian projector field

    P(f) = f f^dag / (f^dag f),

and repeated application of the raising map f_{k+1} = (I - P(f_k)) d f_k
yields the full tower P_0 ... P_{n-1} of solutions of the Euler-Lagrange
equations [d dbar P_k, P_k] = 0 on the Riemann sphere. This module builds
towers out of jets and exposes the residuals of every identity a tower is
supposed to satisfy: Euler-Lagrange in projector and vector form,
orthogonality/completeness, the neighbour product annihilation identities with their
summed forms, the d dbar decomposition over neighbours, and the behaviour of
weighted projector combinations.

All residual helpers accept batched towers and return per-lane arrays
(0-d arrays for unbatched towers).
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegeneratePoint, InvalidSeed
from .jet import (
    DEGENERACY_EPS,
    BidegreeOrder,
    Jet,
    as_points,
    jet_from_poly,
    jet_inner,
    jet_mul,
    jet_outer,
    jet_stack,
    jet_xi,
    jet_xibar,
)

__all__ = [
    "HoloSeed",
    "veronese_seed",
    "seed_jet",
    "projector_from_vector",
    "raise_vector",
    "lower_vector",
    "raise_projector",
    "lower_projector",
    "ProjectorTower",
    "build_tower",
    "el_residual_projector",
    "el_residual_vector",
    "orthocompleteness_residual",
    "AlphaCoeffs",
    "alpha_coeffs",
    "alpha_imag_residual",
    "decomposition_residual",
    "neighbour_product_residual",
    "CombinationDiagnostics",
    "combine_projectors",
    "nonharmonic_control",
    "fro_norm",
    "vec_norm",
]


def fro_norm(m):
    """Frobenius norm over the trailing two axes (batch aware)."""
    return np.sqrt(np.sum(np.abs(m) ** 2, axis=(-2, -1)))


def vec_norm(v):
    """Euclidean norm over the trailing axis (batch aware)."""
    return np.sqrt(np.sum(np.abs(v) ** 2, axis=-1))


# ------------------------------------------------------------------- seeds

@dataclass(frozen=True)
class HoloSeed:
    """Holomorphic polynomial seed: one ascending coefficient list per component.

    The target dimension n is the number of components; at least one
    coefficient must be nonzero for the seed to define a map to CP^{n-1}.
    """

    components: tuple
    label: str = ""

    def __post_init__(self):
        try:
            comps = tuple(np.atleast_1d(np.asarray(c, dtype=complex)) for c in self.components)
        except (TypeError, ValueError) as exc:
            raise InvalidSeed(f"seed components are not coefficient lists: {exc}") from exc
        if len(comps) < 2:
            raise InvalidSeed("seed needs at least two components (n >= 2)")
        for i, c in enumerate(comps):
            if c.ndim != 1:
                raise InvalidSeed(f"component {i} must be a flat coefficient list")
            if not np.all(np.isfinite(c)):
                raise InvalidSeed(f"component {i} has non-finite coefficients")
        if not any(c.any() for c in comps):
            raise InvalidSeed("all seed components are zero")
        object.__setattr__(self, "components", comps)

    @property
    def n(self):
        return len(self.components)

    def describe(self):
        """JSON-ready dict of the seed (components as [re, im] pairs)."""
        return {
            "label": self.label,
            "n": self.n,
            "components": [
                [[float(z.real), float(z.imag)] for z in comp] for comp in self.components
            ],
        }


def veronese_seed(n, label=None):
    """Rational-curve seed with components sqrt(binom(n-1, j)) xi^j.

    These are the maximally symmetric seeds; their towers are branch-free on
    the whole sphere.
    """
    if n < 2:
        raise InvalidSeed("veronese seed needs n >= 2")
    comps = []
    for j in range(n):
        c = np.zeros(j + 1, dtype=complex)
        c[j] = math.sqrt(math.comb(n - 1, j))
        comps.append(c)
    return HoloSeed(tuple(comps), label=label or f"veronese-n{n}")


def seed_jet(seed, point, order):
    """Vector jet of the seed polynomials at the given point(s)."""
    return jet_stack(jet_from_poly(c, point, order) for c in seed.components)


# -------------------------------------------------------------- projectors

def _projector_masked(f, eps):
    """(P(f), bad) where bad flags lanes with f^dag f below eps.

    Bad lanes get their normaliser value replaced by 1 so the arithmetic
    stays finite; their output is garbage and must be masked by the caller.
    """
    norm2 = jet_inner(f, f)
    bad = np.abs(norm2.coeffs[0, 0]) < eps
    if np.any(bad):
        c = norm2.coeffs.copy()
        c[0, 0] = np.where(bad, 1.0, c[0, 0])
        norm2 = Jet(c, "scalar", norm2.point)
    return jet_mul(norm2._reciprocal_unchecked(), jet_outer(f, f)), bad


def projector_from_vector(f, eps=DEGENERACY_EPS):
    """Rank-1 projector jet P = f f^dag / (f^dag f).

    Raises DegeneratePoint when the squared-norm value falls below eps at
    any lane (build_tower provides flag-don't-fail semantics for batches).
    """
    P, bad = _projector_masked(f, eps)
    if np.any(bad):
        raise DegeneratePoint(f"f^dag f below degeneracy threshold {eps:g}", point=f.point)
    return P


def raise_vector(f, eps=DEGENERACY_EPS):
    """One step up the tower: (I - P(f)) d f.

    Validity drops by one holomorphic order. Raising a rank-exhausted vector
    (d f parallel to f) yields the zero vector jet, which is not an error;
    feeding that zero vector back in is (DegeneratePoint from the projector).
    """
    P = projector_from_vector(f, eps)
    fd = f.d()
    return fd - P @ fd


def lower_vector(f, eps=DEGENERACY_EPS):
    """One step down the tower: (I - P(f)) dbar f."""
    P = projector_from_vector(f, eps)
    fb = f.dbar()
    return fb - P @ fb


def _normalized_triple(num, eps):
    tr = num.trace()
    bad = np.abs(tr.coeffs[0, 0]) < eps
    if np.any(bad):
        c = tr.coeffs.copy()
        c[0, 0] = np.where(bad, 1.0, c[0, 0])
        tr = Jet(c, "scalar", tr.point)
    return jet_mul(tr._reciprocal_unchecked(), num), bad


def raise_projector(P, eps=DEGENERACY_EPS):
    """Projector-route raising dP . P . dbarP / tr(dP . P . dbarP).

    Equivalent to the vector route wherever both are defined. The
    normalising trace vanishes identically on the top tower level, which
    surfaces here as DegeneratePoint.
    """
    num = P.d() @ P @ P.dbar()
    out, bad = _normalized_triple(num, eps)
    if np.any(bad):
        raise DegeneratePoint(f"raising trace below degeneracy threshold {eps:g}", point=P.point)
    return out


def lower_projector(P, eps=DEGENERACY_EPS):
    """Projector-route lowering dbarP . P . dP / tr(dbarP . P . dP)."""
    num = P.dbar() @ P @ P.d()
    out, bad = _normalized_triple(num, eps)
    if np.any(bad):
        raise DegeneratePoint(f"lowering trace below degeneracy threshold {eps:g}", point=P.point)
    return out


# ------------------------------------------------------------------- towers

@dataclass(frozen=True)
class ProjectorTower:
    """All tower levels at one point or one batch of points.

    ``levels[k]`` is the matrix jet of P_k and ``vectors[k]`` the vector jet
    of f_k it came from. ``degenerate_at`` is None for a clean tower, or an
    integer array (-1 for clean lanes, else the level at which the degeneracy
    guard tripped). Flagged lanes carry garbage from that level on and must
    be excluded from any aggregation.
    """

    seed: HoloSeed
    point: object
    order: BidegreeOrder
    levels: tuple
    vectors: tuple
    degenerate_at: Optional[np.ndarray] = None

    @property
    def n(self):
        return self.seed.n

    @property
    def batch_shape(self):
        return np.shape(self.point)

    def ok_mask(self):
        """Boolean lane mask of non-degenerate samples (True for clean)."""
        if self.degenerate_at is None:
            return np.ones(self.batch_shape, dtype=bool)
        return self.degenerate_at < 0


def build_tower(seed, point, order=None, max_level=None, eps=DEGENERACY_EPS):
    """Build P_0 .. P_top (top = n-1 or max_level) at the given point(s).

    The default working order (n+1, n+1) leaves every level valid to at
    least bidegree (2, 2), enough for all second-derivative residuals. For a
    scalar point a degeneracy anywhere raises DegeneratePoint; for a batch
    the offending lanes are flagged in ``degenerate_at`` instead and the
    remaining lanes stay trustworthy.
    """
    z = as_points(point)
    scalar_input = np.ndim(z) == 0
    n = seed.n
    order = BidegreeOrder(n + 1, n + 1) if order is None else BidegreeOrder(*order)
    top = n - 1 if max_level is None else int(max_level)
    if not 0 <= top <= n - 1:
        raise ValueError(f"max_level must lie in [0, {n - 1}]")

    deg_at = np.full(np.shape(z), -1, dtype=int)
    f = seed_jet(seed, z, order)
    vectors, levels = [], []
    for k in range(top + 1):
        P, bad = _projector_masked(f, eps)
        newly = bad & (deg_at < 0)
        if np.any(newly):
            if scalar_input:
                raise DegeneratePoint(f"tower degenerate at level {k}", level=k, point=z)
            deg_at = np.where(newly, k, deg_at)
        vectors.append(f)
        levels.append(P)
        if k < top:
            fd = f.d()
            f = fd - P @ fd
    return ProjectorTower(
        seed=seed,
        point=z,
        order=order,
        levels=tuple(levels),
        vectors=tuple(vectors),
        degenerate_at=deg_at if np.any(deg_at >= 0) else None,
    )


# ---------------------------------------------------------------- residuals

def el_residual_projector(P):
    """|| [d dbar P, P] ||_F, the projector-form Euler-Lagrange residual."""
    mixed = P.deriv(1, 1)
    val = P.value
    return fro_norm(mixed @ val - val @ mixed)


def el_residual_vector(f, eps=DEGENERACY_EPS, strict=True):
    """Euclidean norm of the vector-form Euler-Lagrange expression.

    (I - f f^dag / f^dag f) [ d dbar f
        - ((f^dag dbar f) d f + (f^dag d f) dbar f) / (f^dag f) ]

    With strict=False, degenerate batch lanes (f^dag f below eps) yield an
    unusable number instead of raising; callers are expected to mask them.
    """
    f00 = f.value
    f10 = f.deriv(1, 0)
    f01 = f.deriv(0, 1)
    f11 = f.deriv(1, 1)
    fc = np.conj(f00)
    n2 = np.asarray(np.sum(fc * f00, axis=-1).real)
    bad = n2 < eps
    if np.any(bad):
        if strict:
            raise DegeneratePoint("f^dag f below degeneracy threshold", point=f.point)
        n2 = np.where(bad, 1.0, n2)
    inner_db = np.sum(fc * f01, axis=-1)[..., None]
    inner_d = np.sum(fc * f10, axis=-1)[..., None]
    expr = f11 - (inner_db * f10 + inner_d * f01) / n2[..., None]
    proj = np.sum(fc * expr, axis=-1)[..., None]
    expr = expr - f00 * proj / n2[..., None]
    return vec_norm(expr)


def orthocompleteness_residual(tower):
    """max over pairs of ||P_k P_j - delta_kj P_k|| plus ||sum P_j - I||.

    Only meaningful for full towers; a truncated tower (max_level set) has
    no completeness relation to check.
    """
    vals = [P.value for P in tower.levels]
    worst = fro_norm(sum(vals) - np.eye(tower.n))
    for k in range(len(vals)):
        for j in range(len(vals)):
            prod = vals[k] @ vals[j]
            if k == j:
                prod = prod - vals[k]
            worst = np.maximum(worst, fro_norm(prod))
    return worst


@dataclass(frozen=True)
class AlphaCoeffs:
    """The two neighbour-coupling traces of one tower level.

    alpha weights the downstairs neighbour and alpha_bar the upstairs one in
    the d dbar decomposition. Both are real (their defining matrices are
    Hermitian up to cyclic permutation); alpha vanishes identically on the
    bottom level and alpha_bar on the top one. alpha_bar is an independent
    trace, not the complex conjugate of alpha.
    """

    k: int
    alpha: np.ndarray
    alpha_bar: np.ndarray

    @property
    def lagrangian_density(self):
        """alpha + alpha_bar = tr(dP dbarP), the action density."""
        return self.alpha + self.alpha_bar


def alpha_coeffs(tower, k):
    """AlphaCoeffs for level k: alpha = tr(P dP dbarP), alpha_bar = tr(dP P dbarP)."""
    P = tower.levels[k]
    val, dP, dbP = P.value, P.deriv(1, 0), P.deriv(0, 1)
    alpha = np.trace(val @ dP @ dbP, axis1=-2, axis2=-1)
    alpha_bar = np.trace(dP @ val @ dbP, axis1=-2, axis2=-1)
    return AlphaCoeffs(k=k, alpha=alpha.real, alpha_bar=alpha_bar.real)


def alpha_imag_residual(tower, k):
    """Imaginary parts of the two coupling traces (a reality check, ~0)."""
    P = tower.levels[k]
    val, dP, dbP = P.value, P.deriv(1, 0), P.deriv(0, 1)
    a = np.trace(val @ dP @ dbP, axis1=-2, axis2=-1)
    ab = np.trace(dP @ val @ dbP, axis1=-2, axis2=-1)
    return np.maximum(np.abs(a.imag), np.abs(ab.imag))


def decomposition_residual(tower, k):
    """Residual of d dbar P_k = alpha P_{k-1} - (alpha+alpha_bar) P_k + alpha_bar P_{k+1}.

    Missing neighbours at the tower edges contribute nothing; their
    coefficients vanish identically there (alpha at k=0, alpha_bar on top).
    """
    ab = alpha_coeffs(tower, k)
    P = tower.levels[k]
    mixed = P.deriv(1, 1)
    a = ab.alpha[..., None, None]
    b = ab.alpha_bar[..., None, None]
    rhs = -(a + b) * P.value
    if k - 1 >= 0:
        rhs = rhs + a * tower.levels[k - 1].value
    if k + 1 < len(tower.levels):
        rhs = rhs + b * tower.levels[k + 1].value
    return fro_norm(mixed - rhs)


def neighbour_product_residual(tower):
    """Neighbour-product identities plus their summed forms.

    Checks, over all applicable k:
      P_{k+1} dP_{k+1} = -dP_k P_k            and its dbar mirror,
      P_0 dP_0 = 0, dbarP_0 P_0 = 0           (bottom annihilations),
      dP_top P_top = 0, P_top dbarP_top = 0   (top annihilations),
      sum_{j<k} dP_j = -P_k dP_k              and its dbar mirror.
    Returns the max Frobenius residual over all of them.
    """
    vals = [P.value for P in tower.levels]
    dps = [P.deriv(1, 0) for P in tower.levels]
    dbs = [P.deriv(0, 1) for P in tower.levels]
    top = len(vals) - 1
    worst = fro_norm(vals[0] @ dps[0])
    worst = np.maximum(worst, fro_norm(dbs[0] @ vals[0]))
    worst = np.maximum(worst, fro_norm(dps[top] @ vals[top]))
    worst = np.maximum(worst, fro_norm(vals[top] @ dbs[top]))
    for k in range(top):
        worst = np.maximum(worst, fro_norm(vals[k + 1] @ dps[k + 1] + dps[k] @ vals[k]))
        worst = np.maximum(worst, fro_norm(dbs[k + 1] @ vals[k + 1] + vals[k] @ dbs[k]))
    run_d = np.zeros_like(vals[0])
    run_db = np.zeros_like(vals[0])
    for k in range(len(vals)):
        worst = np.maximum(worst, fro_norm(run_d + vals[k] @ dps[k]))
        worst = np.maximum(worst, fro_norm(run_db + dbs[k] @ vals[k]))
        run_d = run_d + dps[k]
        run_db = run_db + dbs[k]
    return worst


@dataclass(frozen=True)
class CombinationDiagnostics:
    """Residuals attached to a weighted projector combination."""

    el_residual: np.ndarray
    idempotency_residual: np.ndarray
    hermiticity_residual: np.ndarray


def combine_projectors(tower, weights):
    """Weighted combination sum_k w_k P_k with its diagnostics.

    Any complex weights give an Euler-Lagrange solution; the combination is
    itself a projector exactly when every weight is 0 or 1, which the
    idempotency residual measures.
    """
    w = np.asarray(weights, dtype=complex)
    if w.shape != (len(tower.levels),):
        raise ValueError(f"need exactly {len(tower.levels)} weights")
    comb = tower.levels[0] * complex(w[0])
    for k in range(1, len(tower.levels)):
        comb = comb + tower.levels[k] * complex(w[k])
    val = comb.value
    mixed = comb.deriv(1, 1)
    el = fro_norm(mixed @ val - val @ mixed)
    idem = fro_norm(val @ val - val)
    herm = fro_norm(val - np.conj(np.swapaxes(val, -1, -2)))
    return comb, CombinationDiagnostics(
        el_residual=el, idempotency_residual=idem, hermiticity_residual=herm
    )


def nonharmonic_control(point, order=(2, 2)):
    """Manufactured non-solution f = (1, xi + conj(xi)), the negative control.

    Its Euler-Lagrange residuals are strictly positive away from the
    imaginary axis, which is how the verification suite proves its detectors
    can fail.
    """
    order = BidegreeOrder(*order)
    one = jet_from_poly([1.0], point, order)
    mixed = jet_xi(point, order) + jet_xibar(point, order)
    return jet_stack([one, mixed])
