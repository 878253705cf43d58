"""Extension of boundary data into the interior.

Two operators are provided.  ``extend_besov`` is linear: each Whitney ball
carries the H-average of f over its boundary patch and the partition of
unity blends these averages.  ``extend_lp`` is nonlinear: f is approximated
by Lipschitz functions f_k (infimal convolutions), each f_k is extended
linearly, and the extensions are stacked in boundary layers of widths
rho_k with piecewise linear cutoffs psi_k.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .functionals import BesovParams, besov_norm_gks, lip_field
from .space import PointCloudSpace, Region, ScalarField
from .trace import trace
from .whitney import WhitneyCover, partition_matrix, patch_matrix

__all__ = [
    "ExtensionReport", "GradientReport", "LipschitzApproximation",
    "extend_besov", "shell_estimates", "extension_gradient_report",
    "lipschitz_constant", "lipschitz_approximation", "layer_schedule",
    "check_schedule", "cutoffs", "extend_lp", "roundtrip_error", "besov_extension_report",
]


@dataclass
class ExtensionReport:
    F: ScalarField
    lip_F: ScalarField
    norm_ratios: Dict[str, float]
    roundtrip_error: float
    layer_table: List[Tuple[int, float, float, float]] = field(default_factory=list)
    invariants: Dict[str, bool] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(norm_ratios={k: float(v) for k, v in sorted(self.norm_ratios.items())},
                    roundtrip_error=float(self.roundtrip_error),
                    layer_table=[dict(k=int(k), rho=float(r), lip=float(L), step=float(s))
                                 for k, r, L, s in self.layer_table],
                    invariants=dict(sorted(self.invariants.items())),
                    warnings=list(self.warnings))


def _boundary(f: ScalarField):
    if f.region is not Region.BOUNDARY:
        raise ValueError("f must be a boundary field")


def _lip_radius(space: PointCloudSpace) -> float:
    return 2.0 * space.spacing


# ---------------------------------------------------------------------------
# linear extension
# ---------------------------------------------------------------------------

def extend_besov(space: PointCloudSpace, cover: WhitneyCover, f: ScalarField) -> ScalarField:
    """F(x) = sum_B a_B phi_B(x) with a_B the H-mean of f over B's patch."""
    _boundary(f)
    P = patch_matrix(space, cover, 1.0)
    W = partition_matrix(space, cover)
    return ScalarField(Region.INTERIOR, W @ (P @ f.values))


def _codim_lower(space: PointCloudSpace) -> float:
    from .space import default_probe_radii, estimate_codim_bounds
    return estimate_codim_bounds(space, default_probe_radii(space)).vartheta


def shell_estimates(space: PointCloudSpace, cover: WhitneyCover, f: ScalarField, z: int,
                    r: float, rho: float, p: float, vartheta: Optional[float] = None,
                    F: Optional[ScalarField] = None):
    """Local and global layer bounds for |F|^p in the shell Omega(rho).

    Returns ((lhs, rhs) for the ball B(z, r), (lhs, rhs) for the whole
    layer).  The local bound is min(r, rho)^vartheta * int_{B(z, 2^8 r)} |f|^p dH;
    the global one is rho^vartheta * int |f|^p dH.
    """
    _boundary(f)
    if not space.is_boundary[z]:
        raise ValueError("z must be a boundary point")
    if not np.any(f.values):
        return (0.0, 0.0), (0.0, 0.0)
    vt = _codim_lower(space) if vartheta is None else vartheta
    F = extend_besov(space, cover, f) if F is None else F
    Fp = np.abs(F.values) ** p * space.mu
    fp = np.abs(f.values) ** p * space.hmass
    delta = space.boundary_distance()
    shell = delta < rho
    nb = space.neighborhoods(np.array([z]), r, Region.INTERIOR)
    inball = np.zeros(shell.size, dtype=bool)
    inball[nb.indices] = True
    lhs_loc = float(Fp[inball & shell].sum())
    nbb = space.neighborhoods(np.array([z]), 2.0 ** 8 * r, Region.BOUNDARY)
    rhs_loc = float(min(r, rho) ** vt * fp[nbb.indices].sum())
    lhs_glob = float(Fp[shell].sum())
    rhs_glob = float(rho ** vt * fp.sum())
    return (lhs_loc, rhs_loc), (lhs_glob, rhs_glob)


def _pair_mean_abs(v: np.ndarray, w: np.ndarray) -> float:
    """sum_{i,j} w_i w_j |v_i - v_j| / (sum w)^2 in O(m log m)."""
    o = np.argsort(v, kind="stable")
    v, w = v[o], w[o]
    cw = np.cumsum(w) - w
    cvw = np.cumsum(v * w) - v * w
    s = 2.0 * float(np.sum(w * (v * cw - cvw)))
    return s / float(w.sum()) ** 2


@dataclass
class GradientReport:
    lip_F: ScalarField
    lip_norm: float
    besov_norm: float
    ratio: float
    pointwise_ratio: float            # worst r_B * max_B Lip F / mean-mean oscillation on U*
    layer_ratios: Dict[float, float]  # rho -> ||Lip F||_p^p on Omega(rho) / (mu(Omega(rho)) LIP(f)^p)

    def to_dict(self) -> dict:
        return dict(lip_norm=self.lip_norm, besov_norm=self.besov_norm, ratio=self.ratio,
                    pointwise_ratio=self.pointwise_ratio,
                    layer_ratios={repr(float(k)): float(v) for k, v in sorted(self.layer_ratios.items())})


def extension_gradient_report(space: PointCloudSpace, cover: WhitneyCover, f: ScalarField,
                              p: float, vartheta: float, layers: int = 4) -> GradientReport:
    _boundary(f)
    if p < max(1.0, vartheta):
        raise ValueError("p must be at least max(1, vartheta)")
    F = extend_besov(space, cover, f)
    L = lip_field(space, F, _lip_radius(space))
    lip_norm = space.lp_norm(L, p)
    alpha = 1.0 - vartheta / p
    bnorm = besov_norm_gks(space, f, BesovParams(alpha, p, p))[1]
    ratio = lip_norm / bnorm if bnorm > 0 else (0.0 if lip_norm == 0 else math.inf)

    # pointwise bound per Whitney ball against the expanded patch oscillation
    nb = space.neighborhoods(cover.centers, cover.radii, Region.INTERIOR)
    nbp = space.neighborhoods(cover.anchors, 64.0 * cover.radii, Region.BOUNDARY)
    H = space.hmass
    worst = 0.0
    tol = 1e-12 * max(1.0, float(np.abs(f.values).max()))   # roundoff in a constant F
    for b in range(len(cover)):
        idx, _ = nb.row(b)
        if idx.size == 0:
            continue
        top = float(L.values[idx].max()) * cover.radii[b]
        if top <= tol:
            continue
        pidx, _ = nbp.row(b)
        osc = _pair_mean_abs(f.values[pidx], H[pidx]) if pidx.size else 0.0
        worst = max(worst, top / osc if osc > 0 else math.inf)

    lipf = lipschitz_constant(space, f)
    layer_ratios = {}
    if lipf > 0:
        delta = space.boundary_distance()
        diam = space.diam_interior
        for k in range(1, layers + 1):
            rho = diam / 2 ** k
            sel = delta < rho
            m = float(space.mu[sel].sum())
            if m > 0:
                layer_ratios[rho] = float(np.sum(space.mu[sel] * L.values[sel] ** p)) / (m * lipf ** p)
    return GradientReport(L, lip_norm, bnorm, ratio, worst, layer_ratios)


# ---------------------------------------------------------------------------
# nonlinear L^p extension
# ---------------------------------------------------------------------------

def _bd_dist(space: PointCloudSpace) -> np.ndarray:
    cache = space.__dict__
    if "_bd_dmat" not in cache:
        bd = space.region_indices(Region.BOUNDARY)
        cache["_bd_dmat"] = space.distances(bd, bd)
    return cache["_bd_dmat"]


def lipschitz_constant(space: PointCloudSpace, f: ScalarField) -> float:
    """max_{z != w} |f(z) - f(w)| / d(z, w) by a full pairwise sweep."""
    D = _bd_dist(space) if f.region is Region.BOUNDARY else None
    if D is None:
        ids = space.region_indices(f.region)
        D = space.distances(ids, ids)
    v = f.values
    best = 0.0
    for s in range(0, v.size, 512):
        d = D[s:s + 512]
        diff = np.abs(v[s:s + 512, None] - v[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(d > 0, diff / np.where(d > 0, d, 1.0), 0.0)
        best = max(best, float(q.max()))
    return best


def _inf_convolution(v: np.ndarray, D: np.ndarray, L: float) -> np.ndarray:
    out = np.empty_like(v)
    for s in range(0, v.size, 512):
        out[s:s + 512] = np.min(v[None, :] + L * D[s:s + 512], axis=1)
    return out


class LipschitzApproximation(list):
    """List of boundary fields f_1, f_2, ... with the chosen constants in ``L``."""

    def __init__(self, fields, L):
        super().__init__(fields)
        self.L = list(L)


def lipschitz_approximation(space: PointCloudSpace, f: ScalarField, k_max: int,
                            p: float = 2.0, e_range: Tuple[int, int] = (-40, 80)) -> LipschitzApproximation:
    """f_1 = 0 and, for k >= 2, f_k = inf_w (f(w) + L_k d(., w)).

    L_k is the smallest power of two with ||f_k - f||_p <= 2^-k ||f||_p.
    The error is nonincreasing in L, so the exponent is found by bisection.
    """
    _boundary(f)
    if not np.all(np.isfinite(f.values)):
        raise ValueError("f must be finite")
    zero = f.copy(np.zeros_like(f.values))
    fields, Ls = [zero], [0.0]
    fn = space.lp_norm(f, p)
    if fn == 0:
        return LipschitzApproximation([zero] * k_max, [0.0] * k_max)
    D = _bd_dist(space)
    cache: Dict[int, Tuple[np.ndarray, float]] = {}

    def at(e):
        if e not in cache:
            g = _inf_convolution(f.values, D, 2.0 ** e)
            cache[e] = (g, space.lp_norm(f.copy(g - f.values), p))
        return cache[e]

    lo_e, hi_e = e_range
    if at(hi_e)[1] > 0:
        # discrete inputs are Lipschitz, so this only happens for absurd scales
        raise ValueError("Lipschitz search range exhausted")
    for k in range(2, k_max + 1):
        target = 2.0 ** (-k) * fn
        lo, hi = lo_e - 1, hi_e     # at(hi) satisfies the target
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if at(mid)[1] <= target:
                hi = mid
            else:
                lo = mid
        fields.append(f.copy(at(hi)[0].copy()))
        Ls.append(2.0 ** hi)
    return LipschitzApproximation(fields, Ls)


def layer_schedule(space: PointCloudSpace, approx: Sequence[ScalarField], f_norm: float,
                   lips: Optional[Sequence[float]] = None) -> List[float]:
    """rho_1 .. rho_{K-1} for approximations f_1 .. f_K.

    rho_k = min(rho_{k-1}/2, 2^-k f_norm / (1 + LIP(f_{k+1}))), and
    rho_1 = min(diam/2, f_norm / (2 (1 + LIP(f_2)))).  A layer whose next
    approximation has LIP = 0 adds nothing to sum rho_k LIP(f_{k+1}), so its
    width is only halved.
    """
    if lips is None:
        lips = [lipschitz_constant(space, g) for g in approx]
    diam = space.diam_interior
    rho = []
    prev = diam
    for k in range(1, len(approx)):
        Lk = lips[k]            # LIP(f_{k+1}); list is 0-based
        budget = 2.0 ** (-k) * f_norm / (1.0 + Lk) if Lk > 0 else math.inf
        prev = min(prev / 2.0, budget)
        rho.append(prev)
    return rho


def check_schedule(space: PointCloudSpace, rho: Sequence[float], lips: Sequence[float],
                   steps: Sequence[float], f_norm: float) -> Dict[str, bool]:
    """The three layer invariants, evaluated on the output."""
    rho = np.asarray(rho, dtype=float)
    L = np.asarray(lips[1:1 + rho.size], dtype=float)
    k = np.arange(1, len(steps) + 1)
    out = {
        "rho_first": bool(rho.size == 0 or rho[0] <= space.diam_interior / 2.0),
        "rho_halving": bool(np.all(rho[1:] <= rho[:-1] / 2.0) and np.all(rho > 0)),
        "steps": bool(np.all(np.asarray(steps) <= 2.0 ** (2 - k) * f_norm * (1 + 1e-12))),
        "budget": bool(float(np.sum(rho * L)) <= f_norm * (1 + 1e-12)),
    }
    return out


def cutoffs(delta: np.ndarray, rho: Sequence[float]) -> np.ndarray:
    """psi_k(x) for k = 1 .. len(rho) - 1 (rows)."""
    rho = np.asarray(rho, dtype=float)
    out = np.empty((rho.size - 1, delta.size))
    for k in range(rho.size - 1):
        out[k] = np.clip((rho[k] - delta) / (rho[k] - rho[k + 1]), 0.0, 1.0)
    return out


def extend_lp(space: PointCloudSpace, cover: WhitneyCover, f: ScalarField, p: float,
              k_max: int = 12, theta: Optional[float] = None) -> ExtensionReport:
    _boundary(f)
    notes = []
    if theta is not None and abs(theta - p) > 0.05:
        msg = f"intended for theta = p; got theta={theta}, p={p}"
        warnings.warn(msg)
        notes.append(msg)
    fn = space.lp_norm(f, p)
    approx = lipschitz_approximation(space, f, k_max + 1, p)
    lips = [lipschitz_constant(space, g) for g in approx]
    rho = layer_schedule(space, approx, fn, lips)
    steps = [space.lp_norm(f.copy(approx[k + 1].values - approx[k].values), p)
             for k in range(len(approx) - 1)]
    table = [(k + 1, rho[k], lips[k + 1], steps[k]) for k in range(len(rho))]
    inv = check_schedule(space, rho, lips, steps, fn)

    # Once rho_m is below every interior distance to the boundary, psi_m
    # vanishes on the cloud and the layer sum is exact at k = m.
    delta = space.boundary_distance()
    dmin = float(delta.min())
    m = 2
    while m < len(rho) and rho[m - 1] > dmin:
        m += 1
    if rho[m - 1] > dmin:
        notes.append(f"layer sum truncated at k={m} above resolution; raise k_max")
    psi = cutoffs(delta, rho[:m])          # psi_1 .. psi_{m-1}
    F = np.zeros(delta.size)
    for k in range(2, m):
        Ek = extend_besov(space, cover, approx[k - 1]).values
        F += (psi[k - 2] - psi[k - 1]) * Ek
    F += psi[m - 2] * extend_besov(space, cover, approx[m - 1]).values
    Ff = ScalarField(Region.INTERIOR, F)
    L = lip_field(space, Ff, _lip_radius(space))
    diam = space.diam_interior
    Hb = space.total_mass(Region.BOUNDARY)
    ratios = {}
    if fn > 0:
        ratios["lp"] = space.lp_norm(Ff, p) / (diam ** p * fn)
        ratios["lip"] = space.lp_norm(L, p) / ((1.0 + Hb ** (1.0 / p)) * fn)
    err = space.lp_norm(f.copy(trace(space, Ff).values - f.values), p)
    return ExtensionReport(Ff, L, ratios, err, table, inv, notes)


def besov_extension_report(space: PointCloudSpace, cover: WhitneyCover, f: ScalarField, p: float,
                           vartheta: Optional[float] = None) -> ExtensionReport:
    """Linear extension with its norm ratios and roundtrip error."""
    vt = _codim_lower(space) if vartheta is None else vartheta
    F = extend_besov(space, cover, f)
    fn = space.lp_norm(f, p)
    ratios = {}
    notes = []
    if fn > 0:
        ratios["lp"] = space.lp_norm(F, p) / (space.diam_interior ** (vt / p) * fn)
    try:
        g = extension_gradient_report(space, cover, f, p, vt)
        L = g.lip_F
        if g.besov_norm > 0:
            ratios["lip_besov"] = g.ratio
    except ValueError as exc:
        notes.append(str(exc))
        L = lip_field(space, F, _lip_radius(space))
    err = space.lp_norm(f.copy(trace(space, F).values - f.values), p)
    return ExtensionReport(F, L, ratios, err, [], {}, notes)


def roundtrip_error(space: PointCloudSpace, cover: WhitneyCover, f: ScalarField, p: float,
                    mode: str = "besov", k_max: int = 12) -> float:
    """||T(extension of f) - f||_{L^p} with T at the smallest resolvable radius."""
    mode = mode.lower()
    if mode == "besov":
        F = extend_besov(space, cover, f)
    elif mode == "lp":
        F = extend_lp(space, cover, f, p, k_max).F
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return space.lp_norm(f.copy(trace(space, F).values - f.values), p)
