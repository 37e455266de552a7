"""Grid verification suite: every tower identity checked over a point grid.

A suite run sweeps a grid of evaluation points in fixed chunks of 64 lanes,
builds one batched projector tower per chunk, and evaluates a registry of
residual checks against it. Each check reduces to a single worst residual
with the point where it happened, and passes when that residual stays within
its (pinned but overridable) tolerance and no more than a 5% fraction of the
grid was degenerate.

Two checks are deliberately inverted: the non-harmonic control field must
*fail* the Euler-Lagrange detector somewhere on the grid, and generically
weighted projector combinations must fail idempotency; both are recorded as
shortfall residuals (zero when the expected failure was observed).

Chunking is fixed at 64 lanes and reduction happens in chunk order, so
reports are bit-identical regardless of worker count. Parallelism (processes)
is opt-in via the ``workers`` argument or the CPN_STACK_THREADS variable.
"""

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .jet import fd_oracle
from .model import (
    HoloSeed,
    build_tower,
    decomposition_residual,
    el_residual_vector,
    fro_norm,
    neighbour_product_residual,
    nonharmonic_control,
    veronese_seed,
)
from .stack import (
    alternating_sum_residual,
    eigenvalue_residual,
    idempotency_residual,
    immersion_closed_form,
    metric_at,
    minimal_polynomial_residual,
)

__all__ = [
    "CHUNK",
    "MAX_DEGENERATE_FRACTION",
    "GridSpec",
    "grid_points",
    "CheckRecord",
    "VerificationReport",
    "run_suite",
    "default_seed_catalog",
    "DEFAULT_TOLERANCES",
    "CHECK_NAMES",
]

#: Fixed evaluation chunk size; part of the report-determinism contract.
CHUNK = 64

#: A grid with more degenerate lanes than this fraction fails every check.
MAX_DEGENERATE_FRACTION = 0.05

_CONTROL_FLOOR = 1e-3
_NONIDEM_FLOOR = 1e-2
_FD_H = 1e-3
_FD_POINTS = 8


# ------------------------------------------------------------------- grids

@dataclass(frozen=True)
class GridSpec:
    """Evaluation grid: cartesian square, polar disk, or uniform random square.

    counts: (nx, ny) for cartesian, (n_r, n_theta) for disk-polar, (n,) for
    random. extent is the half-width of the square or the disk radius.
    """

    kind: str = "cartesian"
    counts: tuple = (21, 21)
    extent: float = 2.5
    prng_seed: int = 2024

    def __post_init__(self):
        if self.kind not in ("cartesian", "disk-polar", "random"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if any(c < 1 for c in self.counts):
            raise ValueError("grid counts must be positive")
        if not self.extent > 0:
            raise ValueError("grid extent must be positive")


def grid_points(spec):
    """Complex evaluation points of a GridSpec, flattened in a fixed order."""
    e = float(spec.extent)
    if spec.kind == "cartesian":
        nx, ny = (spec.counts * 2)[:2]
        xs = np.linspace(-e, e, nx)
        ys = np.linspace(-e, e, ny)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return (X + 1j * Y).ravel()
    if spec.kind == "disk-polar":
        nr, nt = (spec.counts * 2)[:2]
        rs = (np.arange(nr) + 0.5) / nr * e
        ts = 2.0 * np.pi * np.arange(nt) / nt
        return (rs[:, None] * np.exp(1j * ts)[None, :]).ravel()
    rng = np.random.default_rng(spec.prng_seed)
    n = spec.counts[0]
    return rng.uniform(-e, e, n) + 1j * rng.uniform(-e, e, n)


# ------------------------------------------------------------------ records

@dataclass(frozen=True)
class CheckRecord:
    """Outcome of a single named check over the whole grid."""

    name: str
    identity: str
    max_residual: float
    argmax_point: tuple
    samples: int
    degenerate_samples: int
    tolerance: float
    passed: bool

    def to_dict(self):
        pt = None
        if self.argmax_point is not None:
            pt = [_sig12(self.argmax_point[0]), _sig12(self.argmax_point[1])]
        return {
            "name": self.name,
            "identity": self.identity,
            "max_residual": self.max_residual,
            "argmax_point": pt,
            "samples": self.samples,
            "degenerate_samples": self.degenerate_samples,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class VerificationReport:
    """Full suite outcome for one seed and grid."""

    seed: dict
    grid: dict
    order: tuple
    samples: int
    degenerate_samples: int
    records: tuple
    wall_time_s: float

    @property
    def passed(self):
        return all(r.passed for r in self.records)

    def to_json(self, include_timing=False, indent=2):
        payload = {
            "suite": "cpn-stack-verification",
            "seed": self.seed,
            "grid": self.grid,
            "order": list(self.order),
            "samples": self.samples,
            "degenerate_samples": self.degenerate_samples,
            "passed": self.passed,
            "checks": [r.to_dict() for r in self.records],
        }
        if include_timing:
            payload["timing"] = {"wall_time_s": self.wall_time_s}
        return json.dumps(payload, indent=indent)

    def to_text(self):
        lines = [
            f"seed: {self.seed.get('label', '?')}   n={self.seed.get('n', '?')}   "
            f"samples={self.samples} (degenerate {self.degenerate_samples})",
            f"order: {self.order}   wall time: {self.wall_time_s:.2f}s",
            "",
        ]
        width = max(len(r.name) for r in self.records)
        for r in self.records:
            mark = "PASS" if r.passed else "FAIL"
            lines.append(
                f"  [{mark}] {r.name.ljust(width)}  "
                f"residual {r.max_residual:.3e}  tol {r.tolerance:.1e}"
            )
        lines.append("")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _sig12(x):
    return float(f"{float(x):.12g}")


# ------------------------------------------------------------ the registry

DEFAULT_TOLERANCES = {
    "tower_projectors": 1e-9,
    "el_projector": 1e-8,
    "el_vector": 1e-8,
    "neighbour_products": 1e-8,
    "decomposition": 1e-8,
    "alpha_edges": 1e-9,
    "surface_idempotency": 1e-9,
    "minimal_polynomial": 1e-8,
    "alternating_sum": 1e-9,
    "metric_consistency": 1e-8,
    "combination_el": 1e-7,
    "combination_idempotency_corners": 1e-9,
    "combination_nonidempotency_generic": 0.0,
    "multileaf_el": 1e-7,
    "multileaf_reality": 1e-9,
    "jet_fd_oracle": 0.25,
    "negative_control_detection": 0.0,
}

_IDENTITIES = {
    "tower_projectors": (
        "max over k of ||P_k^2-P_k||, ||P_k^dag-P_k||, |tr P_k - 1|, "
        "plus ||sum_k P_k - I|| and max_{j<k} ||P_j P_k||"
    ),
    "el_projector": "max over k of ||[d dbar P_k, P_k]||",
    "el_vector": "max over k of the projected second-order residual of f_k",
    "neighbour_products": (
        "max over k of ||P_{k+1} dP_{k+1} + dP_k P_k||, its dbar mirror, the "
        "outer-edge annihilations, and the running-sum identities"
    ),
    "decomposition": (
        "max over k of ||d dbar P_k - a_k P_{k-1} + (a_k+abar_k) P_k "
        "- abar_k P_{k+1}||"
    ),
    "alpha_edges": (
        "max of |a_0|, |abar_top|, and |Im| of every a_k, abar_k"
    ),
    "surface_idempotency": (
        "max over k of ||X_k + Y_k|| and the tangent sums, Y_k the stacked surface"
    ),
    "minimal_polynomial": (
        "max over k of the minimal-polynomial product norm of X_k and the "
        "spectral distance of -i X_k from the allowed c_k offsets"
    ),
    "alternating_sum": "||sum_k (-1)^k X_k||",
    "metric_consistency": (
        "max over k of |tr(dX_k dbarX_k) + g12|, |g12 - (a_k+abar_k)|, and "
        "the negativity shortfall of g12"
    ),
    "combination_el": (
        "max over complex weight draws of ||[d dbar P(w), P(w)]||, "
        "P(w) = sum_k w_k P_k"
    ),
    "combination_idempotency_corners": (
        "max over 0/1 weight corners of ||P(w)^2 - P(w)||"
    ),
    "combination_nonidempotency_generic": (
        f"shortfall max(0, {_NONIDEM_FLOOR:g} - min over generic draws of "
        "max-over-grid ||P(w)^2 - P(w)||)"
    ),
    "multileaf_el": (
        "max over complex weight draws of ||[d dbar X(w), X(w)]||, "
        "X(w) = sum_k w_k X_k"
    ),
    "multileaf_reality": (
        "max over real weight draws of ||X(w) + X(w)^dag|| and |tr X(w)|"
    ),
    "jet_fd_oracle": (
        "|log2 of the centered finite-difference error ratio at h and h/2 - 2| "
        "over sampled points and the d, dbar, d dbar slots"
    ),
    "negative_control_detection": (
        f"shortfall max(0, {_CONTROL_FLOOR:g} - max-over-grid EL residual of "
        "the non-harmonic control field)"
    ),
}

#: Registry order; also the order of records in every report.
CHECK_NAMES = tuple(_IDENTITIES)

_MAX_KIND = {
    name
    for name in CHECK_NAMES
    if name
    not in (
        "combination_nonidempotency_generic",
        "jet_fd_oracle",
        "negative_control_detection",
    )
}


# ----------------------------------------------------- chunk-level evaluation

class _ChunkData:
    """Shared per-chunk intermediates: one batched tower plus slot stacks."""

    def __init__(self, seed, pts, order):
        self.pts = pts
        self.tower = build_tower(seed, pts, order=order)
        self.ok = self.tower.ok_mask()
        self.n = self.tower.n
        self.L = len(self.tower.levels)
        levels = self.tower.levels
        self.PV = np.stack([P.value for P in levels])
        self.PD = np.stack([P.deriv(1, 0) for P in levels])
        self.PB = np.stack([P.deriv(0, 1) for P in levels])
        self.PM = np.stack([P.deriv(1, 1) for P in levels])
        # X_k value and mixed-derivative stacks from cumulative level sums
        csum_v = np.cumsum(self.PV, axis=0)
        csum_m = np.cumsum(self.PM, axis=0)
        below_v = np.concatenate([np.zeros_like(self.PV[:1]), csum_v[:-1]])
        below_m = np.concatenate([np.zeros_like(self.PM[:1]), csum_m[:-1]])
        cks = (1.0 + 2.0 * np.arange(self.L)) / self.n
        eye = np.eye(self.n)
        self.XV = -1j * (self.PV + 2.0 * below_v) + 1j * np.einsum(
            "l,ij->lij", cks, eye
        ).reshape(self.L, *([1] * (self.PV.ndim - 3)), self.n, self.n)
        self.XM = -1j * (self.PM + 2.0 * below_m)

    def masked_max(self, lanes):
        """Max of a per-lane residual over clean lanes, with its point."""
        lanes = np.asarray(lanes, dtype=float)
        ok = self.ok
        if not np.any(ok):
            return np.inf, None
        vals = np.where(ok, lanes, -np.inf)
        i = int(np.argmax(vals))
        return float(vals[i]), complex(self.pts[i])


def _combo(weights, stack):
    return np.einsum("ml,lbij->mbij", weights, stack)


def _chunk_payloads(seed, pts, order, weights, corners, names):
    """Evaluate every requested check on one chunk; returns name -> payload."""
    cd = _ChunkData(seed, pts, order)
    tower = cd.tower
    out = {
        "_meta": {
            "samples": int(cd.pts.size),
            "degenerate": int(cd.pts.size - np.count_nonzero(cd.ok)),
            "ok": np.asarray(cd.ok, dtype=bool),
        }
    }

    def lane_payload(lanes):
        mx, arg = cd.masked_max(lanes)
        return {"max": mx, "arg": arg}

    for name in names:
        if name == "tower_projectors":
            idem = fro_norm(cd.PV @ cd.PV - cd.PV).max(axis=0)
            herm = fro_norm(cd.PV - np.conj(np.swapaxes(cd.PV, -1, -2))).max(axis=0)
            trc = np.abs(
                np.trace(cd.PV, axis1=-2, axis2=-1) - 1.0
            ).max(axis=0)
            comp = fro_norm(cd.PV.sum(axis=0) - np.eye(cd.n))
            res = np.maximum.reduce([idem, herm, trc, comp])
            for j in range(cd.L):
                for k in range(j + 1, cd.L):
                    res = np.maximum(res, fro_norm(cd.PV[j] @ cd.PV[k]))
            out[name] = lane_payload(res)
        elif name == "el_projector":
            res = fro_norm(cd.PM @ cd.PV - cd.PV @ cd.PM).max(axis=0)
            out[name] = lane_payload(res)
        elif name == "el_vector":
            res = None
            for f in tower.vectors:
                r = el_residual_vector(f, strict=False)
                res = r if res is None else np.maximum(res, r)
            out[name] = lane_payload(res)
        elif name == "neighbour_products":
            out[name] = lane_payload(neighbour_product_residual(tower))
        elif name == "decomposition":
            res = None
            for k in range(cd.L):
                r = decomposition_residual(tower, k)
                res = r if res is None else np.maximum(res, r)
            out[name] = lane_payload(res)
        elif name == "alpha_edges":
            a = np.einsum("lbij,lbjk,lbki->lb", cd.PV, cd.PD, cd.PB)
            ab = np.einsum("lbij,lbjk,lbki->lb", cd.PD, cd.PV, cd.PB)
            res = np.maximum(np.abs(a.imag).max(axis=0), np.abs(ab.imag).max(axis=0))
            res = np.maximum(res, np.abs(a[0]))
            res = np.maximum(res, np.abs(ab[-1]))
            out[name] = lane_payload(res)
        elif name == "surface_idempotency":
            res = None
            for k in range(cd.L):
                r = idempotency_residual(tower, k)
                res = r if res is None else np.maximum(res, r)
            out[name] = lane_payload(res)
        elif name == "minimal_polynomial":
            res = None
            for k in range(cd.L):
                s = immersion_closed_form(tower, k)
                r = np.maximum(
                    minimal_polynomial_residual(s), eigenvalue_residual(s)
                )
                res = r if res is None else np.maximum(res, r)
            out[name] = lane_payload(res)
        elif name == "alternating_sum":
            out[name] = lane_payload(alternating_sum_residual(tower))
        elif name == "metric_consistency":
            res = None
            a = np.einsum("lbij,lbjk,lbki->lb", cd.PV, cd.PD, cd.PB).real
            ab = np.einsum("lbij,lbjk,lbki->lb", cd.PD, cd.PV, cd.PB).real
            for k in range(cd.L):
                ms = metric_at(tower, k)
                r = np.asarray(ms.cross_residual, dtype=float)
                r = np.maximum(r, np.abs(ms.g12 - (a[k] + ab[k])))
                r = np.maximum(r, np.maximum(0.0, -ms.g12))
                res = r if res is None else np.maximum(res, r)
            out[name] = lane_payload(res)
        elif name == "combination_el":
            PVw = _combo(weights["complex"], cd.PV)
            PMw = _combo(weights["complex"], cd.PM)
            res = fro_norm(PMw @ PVw - PVw @ PMw).max(axis=0)
            out[name] = lane_payload(res)
        elif name == "combination_idempotency_corners":
            PVc = _combo(corners, cd.PV)
            res = fro_norm(PVc @ PVc - PVc).max(axis=0)
            out[name] = lane_payload(res)
        elif name == "combination_nonidempotency_generic":
            PVw = _combo(weights["generic"], cd.PV)
            per = fro_norm(PVw @ PVw - PVw)  # (M, B)
            per = np.where(cd.ok[None, :], per, -np.inf)
            idx = np.argmax(per, axis=1)
            out[name] = {
                "per_draw_max": per[np.arange(per.shape[0]), idx],
                "per_draw_arg": cd.pts[idx],
            }
        elif name == "multileaf_el":
            XVw = _combo(weights["complex"], cd.XV)
            XMw = _combo(weights["complex"], cd.XM)
            res = fro_norm(XMw @ XVw - XVw @ XMw).max(axis=0)
            out[name] = lane_payload(res)
        elif name == "multileaf_reality":
            XVw = _combo(weights["real"].astype(complex), cd.XV)
            herm = fro_norm(XVw + np.conj(np.swapaxes(XVw, -1, -2))).max(axis=0)
            trc = np.abs(np.trace(XVw, axis1=-2, axis2=-1)).max(axis=0)
            out[name] = lane_payload(np.maximum(herm, trc))
        elif name == "negative_control_detection":
            g = nonharmonic_control(cd.pts)
            out[name] = {"max": _pair(el_residual_vector(g), cd.pts)}
        elif name == "jet_fd_oracle":
            pass  # evaluated once, post-sweep
        else:
            raise ValueError(f"unknown check {name!r}")
    return out


def _pair(lanes, pts):
    i = int(np.argmax(lanes))
    return float(lanes[i]), complex(pts[i])


def _run_chunk(args):
    seed, pts, order, weights, corners, names = args
    return _chunk_payloads(seed, pts, order, weights, corners, names)


# ------------------------------------------------------------- fd oracle

def _fd_check(seed, pts, ok, order):
    """Convergence-rate check of jet slots against centered finite differences."""
    cand = pts[ok]
    if cand.size == 0:
        return np.inf, None
    stride = max(1, cand.size // _FD_POINTS)
    sample = cand[::stride][:_FD_POINTS]

    def field(z):
        t = build_tower(seed, complex(z), order=order)
        return np.stack([P.value for P in t.levels])

    errs = {1: [], 2: []}
    worst = (-1.0, None)
    for z in sample:
        t = build_tower(seed, complex(z), order=order)
        ref = {
            "d": np.stack([P.deriv(1, 0) for P in t.levels]),
            "dbar": np.stack([P.deriv(0, 1) for P in t.levels]),
            "ddbar": np.stack([P.deriv(1, 1) for P in t.levels]),
        }
        scale = 1.0 + max(np.max(fro_norm(v)) for v in ref.values())
        for lvl, h in ((1, _FD_H), (2, _FD_H / 2)):
            fd = fd_oracle(field, complex(z), h)
            err = max(
                float(np.max(fro_norm(fd.d - ref["d"]))),
                float(np.max(fro_norm(fd.dbar - ref["dbar"]))),
                float(np.max(fro_norm(fd.ddbar - ref["ddbar"]))),
            ) / scale
            errs[lvl].append(err)
            if lvl == 1 and err > worst[0]:
                worst = (err, complex(z))
    e1 = float(np.sqrt(np.mean(np.square(errs[1]))))
    e2 = float(np.sqrt(np.mean(np.square(errs[2]))))
    if e1 < 1e-11:
        residual = 0.0  # agreement at roundoff level: nothing left to rate-check
    else:
        residual = abs(np.log2(e1 / e2) - 2.0)
        if e1 > 1e-2:
            residual = max(residual, e1)
    return residual, worst[1]


# ------------------------------------------------------------- weight draws

def _draw_weights(levels, count, seed_value):
    rng = np.random.default_rng(seed_value)
    w = rng.uniform(-1.0, 1.0, (count, levels)) + 1j * rng.uniform(
        -1.0, 1.0, (count, levels)
    )
    near = np.minimum(np.abs(w), np.abs(w - 1.0))
    generic = w[np.any(near > 0.15, axis=1)]
    if generic.size == 0:  # vanishingly unlikely, but keep the check total
        generic = w
    real = rng.uniform(-1.0, 1.0, (count, levels))
    return {"complex": w, "generic": generic, "real": real}


def _corner_weights(levels):
    if levels <= 6:
        rows = [
            [(m >> k) & 1 for k in range(levels)] for m in range(1, 2 ** levels)
        ]
    else:
        rows = [[1 if i == k else 0 for i in range(levels)] for k in range(levels)]
        rows.append([1] * levels)
    return np.asarray(rows, dtype=complex)


# -------------------------------------------------------------- suite runner

def default_seed_catalog():
    """The standard seeds the acceptance checks sweep."""
    return (
        veronese_seed(2),
        veronese_seed(3),
        veronese_seed(4),
        HoloSeed(
            components=(np.array([1.0, 2.0]), np.array([0.0, 1.0, 1.0])),
            label="quadratic-n2",
        ),
        HoloSeed(
            components=(
                np.array([1.0]),
                np.array([0.0, 1.0]),
                np.array([0.0, 0.0, 1.0]),
            ),
            label="plain-powers-n3",
        ),
    )


def _resolve_workers(workers):
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("CPN_STACK_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def run_suite(
    seed,
    grid=None,
    tolerances=None,
    checks=None,
    order=None,
    weight_count=100,
    weight_seed=7,
    workers=None,
):
    """Run the verification suite for one seed over a grid.

    Returns a VerificationReport whose payload is independent of the worker
    count and of wall-clock conditions (timing is carried separately).
    """
    t0 = time.perf_counter()
    grid = grid or GridSpec()
    names = tuple(checks) if checks is not None else CHECK_NAMES
    unknown = set(names) - set(CHECK_NAMES)
    if unknown:
        raise ValueError(f"unknown checks: {sorted(unknown)}")
    tols = dict(DEFAULT_TOLERANCES)
    tols.update(tolerances or {})

    pts = grid_points(grid)
    levels = seed.n
    weights = _draw_weights(levels, weight_count, weight_seed)
    corners = _corner_weights(levels)
    chunk_args = [
        (seed, pts[lo: lo + CHUNK], order, weights, corners, names)
        for lo in range(0, pts.size, CHUNK)
    ]

    nworkers = _resolve_workers(workers)
    if nworkers == 1 or len(chunk_args) == 1:
        payloads = [_run_chunk(a) for a in chunk_args]
    else:
        with ProcessPoolExecutor(max_workers=nworkers) as pool:
            payloads = list(pool.map(_run_chunk, chunk_args))

    samples = sum(p["_meta"]["samples"] for p in payloads)
    degenerate = sum(p["_meta"]["degenerate"] for p in payloads)
    deg_ok = degenerate <= MAX_DEGENERATE_FRACTION * samples

    records = []
    for name in names:
        if name == "jet_fd_oracle":
            ok_mask = np.concatenate([p["_meta"]["ok"] for p in payloads])
            residual, arg = _fd_check(seed, pts, ok_mask, order)
        elif name in _MAX_KIND:
            residual, arg = -np.inf, None
            for p in payloads:
                if p[name]["max"] > residual:
                    residual, arg = p[name]["max"], p[name]["arg"]
            if residual == -np.inf:
                residual, arg = np.inf, None
        elif name == "negative_control_detection":
            gmax, arg = -np.inf, None
            for p in payloads:
                if p[name]["max"][0] > gmax:
                    gmax, arg = p[name]["max"]
            residual = max(0.0, _CONTROL_FLOOR - gmax)
        elif name == "combination_nonidempotency_generic":
            per = None
            args_ = None
            for p in payloads:
                pm = p[name]["per_draw_max"]
                pa = p[name]["per_draw_arg"]
                if per is None:
                    per, args_ = pm.copy(), pa.copy()
                else:
                    upd = pm > per
                    per = np.where(upd, pm, per)
                    args_ = np.where(upd, pa, args_)
            if per is None or per.size == 0:
                residual, arg = np.inf, None
            else:
                j = int(np.argmin(per))
                residual = max(0.0, _NONIDEM_FLOOR - float(per[j]))
                arg = complex(args_[j])
        else:  # pragma: no cover - registry and dispatch stay in sync
            raise AssertionError(name)

        tol = float(tols[name])
        arg_pair = None if arg is None else (float(arg.real), float(arg.imag))
        records.append(
            CheckRecord(
                name=name,
                identity=_IDENTITIES[name],
                max_residual=float(residual),
                argmax_point=arg_pair,
                samples=samples,
                degenerate_samples=degenerate,
                tolerance=tol,
                passed=bool(residual <= tol and deg_ok),
            )
        )

    order_used = order
    if order_used is None:
        order_used = (seed.n + 1, seed.n + 1)
    report = VerificationReport(
        seed=seed.describe(),
        grid={
            "kind": grid.kind,
            "counts": list(grid.counts),
            "extent": grid.extent,
            "prng_seed": grid.prng_seed,
        },
        order=tuple(order_used),
        samples=samples,
        degenerate_samples=degenerate,
        records=tuple(records),
        wall_time_s=time.perf_counter() - t0,
    )
    return report
