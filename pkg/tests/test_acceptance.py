"""Acceptance gate: the nine headline guarantees, one printed verdict each.

Each test evaluates one guarantee over the full seed catalog on a shared
21 x 21 grid of half-width 3 (441 evaluation lanes per seed), records a
single PASS/FAIL line (emitted by conftest in an "acceptance gate" summary
section, immune to output capture), and then asserts. Tolerances are
pinned here and nowhere else.
"""

import math
import time

import numpy as np
import pytest

from cpn_stack import (
    GridSpec,
    PathSpec,
    action,
    alternating_sum_residual,
    build_tower,
    combine_projectors,
    decomposition_residual,
    default_seed_catalog,
    eigenvalue_residual,
    el_residual_projector,
    el_residual_vector,
    fd_oracle,
    grid_points,
    idempotency_residual,
    immersion_closed_form,
    integrate_immersion,
    minimal_polynomial_residual,
    multileaf,
    nonharmonic_control,
    veronese_seed,
)
from cpn_stack.cli import main as cli_main
from cpn_stack.model import fro_norm

GRID_POINTS = grid_points(GridSpec(counts=(21, 21), extent=3.0))
CATALOG = default_seed_catalog()

_cache = {}


def _towers():
    """Batched towers of every catalog seed over the shared grid, built once."""
    if not _cache:
        t0 = time.perf_counter()
        for seed in CATALOG:
            _cache[seed.label] = build_tower(seed, GRID_POINTS)
        _cache["_build_s"] = time.perf_counter() - t0
    return _cache


def _announce(log, num, name, ok, detail):
    verdict = "PASS" if ok else "FAIL"
    log.append(f"[{verdict}] criterion {num}: {name} ({detail})")


def test_criterion_1_stacked_surfaces_reproduce_immersions(gate_log):
    tol = 1e-9
    t0 = time.perf_counter()
    towers = _towers()
    worst = 0.0
    for seed in CATALOG:
        tower = towers[seed.label]
        for k in range(seed.n):
            worst = max(worst, float(np.max(idempotency_residual(tower, k))))
    elapsed = time.perf_counter() - t0
    ok = worst < tol and elapsed < 10.0
    _announce(
        gate_log,
        1,
        "stacked surface equals minus the immersion (values and tangents)",
        ok,
        f"max residual {worst:.3e} < {tol:.0e}, {elapsed:.2f}s < 10s",
    )
    assert worst < tol
    assert elapsed < 10.0


def test_criterion_2_euler_lagrange_everywhere_and_control(gate_log):
    tol = 1e-9
    floor = 1e-3
    towers = _towers()
    worst = 0.0
    for seed in CATALOG:
        tower = towers[seed.label]
        for k in range(seed.n):
            worst = max(worst, float(np.max(el_residual_projector(tower.levels[k]))))
            worst = max(worst, float(np.max(el_residual_vector(tower.vectors[k]))))
    control = float(np.max(el_residual_vector(nonharmonic_control(GRID_POINTS))))
    ok = worst < tol and control > floor
    _announce(
        gate_log,
        2,
        "Euler-Lagrange residuals vanish on towers, not on the control",
        ok,
        f"max residual {worst:.3e} < {tol:.0e}, control {control:.3e} > {floor:.0e}",
    )
    assert worst < tol
    assert control > floor


def test_criterion_3_second_derivative_decomposition(gate_log):
    tol = 1e-9
    towers = _towers()
    worst = 0.0
    for seed in CATALOG:
        tower = towers[seed.label]
        for k in range(seed.n):  # edge levels included: their couplings vanish
            worst = max(worst, float(np.max(decomposition_residual(tower, k))))
    ok = worst < tol
    _announce(
        gate_log,
        3,
        "mixed second derivative decomposes over neighbouring levels",
        ok,
        f"max residual {worst:.3e} < {tol:.0e}",
    )
    assert worst < tol


def test_criterion_4_spectra_and_alternating_sum(gate_log):
    tol = 1e-8
    towers = _towers()
    worst_poly = 0.0
    worst_eig = 0.0
    worst_alt = 0.0
    for seed in CATALOG:
        tower = towers[seed.label]
        worst_alt = max(worst_alt, float(np.max(alternating_sum_residual(tower))))
        for k in range(seed.n):
            s = immersion_closed_form(tower, k)
            worst_poly = max(worst_poly, float(np.max(minimal_polynomial_residual(s))))
            worst_eig = max(worst_eig, float(np.max(eigenvalue_residual(s))))
    ok = worst_poly < tol and worst_eig < tol and worst_alt < tol
    _announce(
        gate_log,
        4,
        "minimal polynomials, level spectra, and alternating sum",
        ok,
        f"poly {worst_poly:.3e}, spectra {worst_eig:.3e}, "
        f"alternating {worst_alt:.3e}, all < {tol:.0e}",
    )
    assert worst_poly < tol
    assert worst_eig < tol
    assert worst_alt < tol


def test_criterion_5_path_integrals_match_closed_form(gate_log):
    tol = 1e-7
    rng = np.random.default_rng(29)
    worst = 0.0
    worst_loop = 0.0
    for seed in CATALOG:
        for i in range(10):
            a, b = (rng.uniform(-1.2, 1.2, 2) + 1j * rng.uniform(-1.2, 1.2, 2))
            k = i % seed.n
            inc = integrate_immersion(seed, k, PathSpec(waypoints=(a, b)))
            xa = immersion_closed_form(build_tower(seed, complex(a)), k)
            xb = immersion_closed_form(build_tower(seed, complex(b)), k)
            worst = max(worst, float(fro_norm(inc.value - (xb.value - xa.value))))
        # homotopic pair: straight segment against a two-leg detour
        a, b = 0.2 + 0.3j, 1.0 - 0.4j
        straight = integrate_immersion(seed, 0, PathSpec(waypoints=(a, b)))
        detour = integrate_immersion(
            seed, 0, PathSpec(waypoints=(a, -0.4 - 0.6j, b))
        )
        worst_loop = max(
            worst_loop, float(fro_norm(straight.value - detour.value))
        )
    ok = worst < tol and worst_loop < tol
    _announce(
        gate_log,
        5,
        "path-integrated increments match the closed form, path independent",
        ok,
        f"max mismatch {worst:.3e}, homotopy gap {worst_loop:.3e}, both < {tol:.0e}",
    )
    assert worst < tol
    assert worst_loop < tol


def test_criterion_6_action_quantization(gate_log):
    t0 = time.perf_counter()
    a2 = action(veronese_seed(2), 0)
    dt2 = time.perf_counter() - t0
    t0 = time.perf_counter()
    a3 = action(veronese_seed(3), 0)
    dt3 = time.perf_counter() - t0
    err2 = abs(a2.value - math.pi)
    err3 = abs(a3.value - 2 * math.pi)
    ok = err2 < 1e-5 and err3 < 1e-4 and dt2 < 5.0 and dt3 < 5.0
    _announce(
        gate_log,
        6,
        "sphere actions land on pi and 2 pi",
        ok,
        f"pi err {err2:.2e} < 1e-5 ({dt2:.2f}s), "
        f"2pi err {err3:.2e} < 1e-4 ({dt3:.2f}s), both < 5s",
    )
    assert err2 < 1e-5
    assert err3 < 1e-4
    assert dt2 < 5.0 and dt3 < 5.0


def test_criterion_7_weighted_combinations(gate_log):
    tol_el = 1e-9
    tol_corner = 1e-9
    floor_generic = 1e-2
    tol_real = 1e-10
    rng = np.random.default_rng(13)
    towers = _towers()
    worst_el = 0.0
    worst_corner = 0.0
    min_generic = np.inf
    worst_real = 0.0
    for seed in CATALOG:
        tower = towers[seed.label]
        L = seed.n
        draws = rng.uniform(-1, 1, (100, L)) + 1j * rng.uniform(-1, 1, (100, L))
        for w in draws:
            _, pd = combine_projectors(tower, w)
            worst_el = max(worst_el, float(np.max(pd.el_residual)))
            _, xd = multileaf(tower, w)
            worst_el = max(worst_el, float(np.max(xd.el_residual)))
            far = np.minimum(np.abs(w), np.abs(w - 1.0)) > 0.15
            if np.any(far):
                min_generic = min(
                    min_generic, float(np.max(pd.idempotency_residual))
                )
        for m in range(1, 2**L):
            corner = np.array([(m >> j) & 1 for j in range(L)], dtype=complex)
            _, cd = combine_projectors(tower, corner)
            worst_corner = max(worst_corner, float(np.max(cd.idempotency_residual)))
        for w in rng.uniform(-1, 1, (100, L)):
            _, rd = multileaf(tower, w.astype(complex))
            worst_real = max(
                worst_real,
                float(np.max(rd.hermiticity_residual)),
                float(np.max(rd.trace_residual)),
            )
    ok = (
        worst_el < tol_el
        and worst_corner < tol_corner
        and min_generic > floor_generic
        and worst_real < tol_real
    )
    _announce(
        gate_log,
        7,
        "weighted towers stay solutions; projectors exactly at 0/1 weights",
        ok,
        f"EL {worst_el:.3e} < {tol_el:.0e}, corners {worst_corner:.3e} < "
        f"{tol_corner:.0e}, generic {min_generic:.3e} > {floor_generic:.0e}, "
        f"real leaves {worst_real:.3e} < {tol_real:.0e}",
    )
    assert worst_el < tol_el
    assert worst_corner < tol_corner
    assert min_generic > floor_generic
    assert worst_real < tol_real


def test_criterion_8_jet_derivatives_against_finite_differences(gate_log):
    rate_tol = 0.2
    sample = [0.73 - 0.31j, 1.29 + 0.88j, -1.11 + 0.57j, 0.41 - 1.23j]
    worst_rate_gap = 0.0
    for seed in CATALOG:
        def field(z, _seed=seed):
            t = build_tower(_seed, complex(z))
            return np.stack([P.value for P in t.levels])

        errs = {}
        for h in (1e-3, 5e-4):
            acc = []
            for z in sample:
                tower = build_tower(seed, z)
                ref = {
                    "d": np.stack([P.deriv(1, 0) for P in tower.levels]),
                    "dbar": np.stack([P.deriv(0, 1) for P in tower.levels]),
                    "ddbar": np.stack([P.deriv(1, 1) for P in tower.levels]),
                }
                fd = fd_oracle(field, z, h)
                scale = 1.0 + max(float(np.max(fro_norm(v))) for v in ref.values())
                acc.append(
                    max(
                        float(np.max(fro_norm(fd.d - ref["d"]))),
                        float(np.max(fro_norm(fd.dbar - ref["dbar"]))),
                        float(np.max(fro_norm(fd.ddbar - ref["ddbar"]))),
                    )
                    / scale
                )
            errs[h] = float(np.sqrt(np.mean(np.square(acc))))
        rate = math.log2(errs[1e-3] / errs[5e-4])
        worst_rate_gap = max(worst_rate_gap, abs(rate - 2.0))
    ok = worst_rate_gap <= rate_tol
    _announce(
        gate_log,
        8,
        "jet slots agree with the finite-difference oracle at second order",
        ok,
        f"max |rate - 2| = {worst_rate_gap:.3f} <= {rate_tol}",
    )
    assert worst_rate_gap <= rate_tol


def test_criterion_9_exported_sphere_radius(gate_log, tmp_path):
    tol = 1e-9
    out = tmp_path / "sphere.csv"
    code = cli_main(
        ["surface", "--veronese", "2", "--k", "0", "--grid", "21x21",
         "--extent", "3", "--out", str(out)]
    )
    lines = out.read_text().strip().splitlines()
    rows = [line.split(",") for line in lines[1:] if not line.startswith("#")]
    norms = np.array(
        [np.linalg.norm([float(v) for v in row[2:]]) for row in rows]
    )
    worst = float(np.max(np.abs(norms - 0.5)))
    ok = code == 0 and len(rows) == 441 and worst < tol
    _announce(
        gate_log,
        9,
        "exported base surface lies on the radius-1/2 sphere",
        ok,
        f"exit {code}, {len(rows)} rows, max radius error {worst:.3e} < {tol:.0e}",
    )
    assert code == 0
    assert len(rows) == 441
    assert worst < tol
