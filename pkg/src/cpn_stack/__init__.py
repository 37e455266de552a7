"""Rank-one projector towers of the two-dimensional sigma model on the sphere,
their soliton surfaces in su(n), and a residual verification suite.

The package is organised bottom-up:

- ``jet``: truncated bidegree jets in (xi, conj xi) with exact arithmetic,
  plus an independent finite-difference oracle.
- ``model``: holomorphic seeds, the raising/lowering ladder, projector towers
  and their Euler-Lagrange / orthogonality residuals.
- ``stack``: immersions X_k, stacked surfaces, path and sphere quadratures,
  spectral identities and su(n) coordinates.
- ``verify``: a chunked, deterministic grid suite over all identities.
- ``cli``: the ``cpn-stack`` command.
"""

from .errors import (
    CpnStackError,
    DegeneratePoint,
    InsufficientOrder,
    InvalidSeed,
    NoConvergence,
    NotInAlgebra,
)
from .jet import (
    DEGENERACY_EPS,
    BidegreeOrder,
    EvalPoint,
    FdDerivatives,
    Jet,
    as_points,
    fd_oracle,
    jet_constant,
    jet_d,
    jet_dbar,
    jet_from_poly,
    jet_hconj,
    jet_identity,
    jet_inner,
    jet_inv_scalar,
    jet_mul,
    jet_outer,
    jet_stack,
    jet_xi,
    jet_xibar,
)
from .model import (
    AlphaCoeffs,
    CombinationDiagnostics,
    HoloSeed,
    ProjectorTower,
    alpha_coeffs,
    alpha_imag_residual,
    build_tower,
    combine_projectors,
    decomposition_residual,
    el_residual_projector,
    el_residual_vector,
    neighbour_product_residual,
    lower_projector,
    lower_vector,
    nonharmonic_control,
    orthocompleteness_residual,
    projector_from_vector,
    raise_projector,
    raise_vector,
    seed_jet,
    veronese_seed,
)
from .stack import (
    ActionResult,
    ImmersionSample,
    MetricSample,
    MultileafDiagnostics,
    PathSpec,
    QuadratureConfig,
    action,
    alternating_sum_residual,
    eigenvalue_residual,
    idempotency_residual,
    immersion_closed_form,
    immersion_jet,
    integrate_immersion,
    integrate_stacked,
    level_constant,
    metric_at,
    minimal_polynomial_residual,
    multileaf,
    stacked_surface,
    sun_basis,
    sun_coordinates,
    sun_matrix,
)
from .verify import (
    CHECK_NAMES,
    CHUNK,
    DEFAULT_TOLERANCES,
    CheckRecord,
    GridSpec,
    VerificationReport,
    default_seed_catalog,
    grid_points,
    run_suite,
)

__version__ = "0.1.0"
