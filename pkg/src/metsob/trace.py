"""Boundary traces by ball averaging.

T_r u(z) is the mu-weighted mean of u over B(z, r) in the interior.  On a
finite cloud the trace is T_r at the smallest resolvable radius, and the
convergence claims become statements about the gaps between consecutive
dyadic radii and about trends under refinement.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from .functionals import BesovParams, besov_norm_gks, frac_maximal
from .space import Ball, PointCloudSpace, Region, ScalarField, ball_members

__all__ = [
    "TraceReport", "trace_at_radius", "smallest_radius", "trace_values", "trace",
    "trace_field", "trace_besov_report", "weighted_trace", "make_weight",
    "detect_no_trace", "local_trace_estimate", "log_orlicz_integral",
]


@dataclass
class TraceReport:
    trace: ScalarField
    radii: np.ndarray
    cauchy_gaps: np.ndarray
    fitted_rate: float
    besov_seminorms: Dict[float, float] = field(default_factory=dict)
    values: Optional[np.ndarray] = None      # T_r u(z) per radius (rows) and point
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(radii=[float(r) for r in self.radii],
                    cauchy_gaps=[float(g) for g in self.cauchy_gaps],
                    fitted_rate=None if not np.isfinite(self.fitted_rate) else float(self.fitted_rate),
                    besov_seminorms={repr(float(k)): float(v) for k, v in sorted(self.besov_seminorms.items())},
                    warnings=list(self.warnings))


def _interior(u: ScalarField):
    if u.region is not Region.INTERIOR:
        raise ValueError("u must be an interior field")


def trace_at_radius(space: PointCloudSpace, u: ScalarField, z: int, r: float) -> float:
    _interior(u)
    if not space.is_boundary[z]:
        raise ValueError("z must be a boundary point")
    mem = ball_members(space, Ball(int(z), r), Region.INTERIOR)
    if mem.size == 0:
        raise ValueError("radius below resolution")
    w = space.weights[mem]
    return float(np.dot(w, u.values[space._pos[mem]]) / w.sum())


def smallest_radius(space: PointCloudSpace) -> float:
    """Twice the median distance from a boundary point to the interior."""
    bd = space.region_coords(Region.BOUNDARY)
    d, _ = space.tree(Region.INTERIOR).query(bd)
    return 2.0 * float(np.median(d))


def trace_values(space: PointCloudSpace, u: ScalarField, radii: Sequence[float]) -> np.ndarray:
    """T_r u(z) for every radius (rows) and boundary point (columns).

    Entries whose ball misses the interior are NaN.  Radii beyond the largest
    boundary-interior distance give the global mean directly.
    """
    _interior(u)
    bd = space.region_indices(Region.BOUNDARY)
    w = space.mu
    out = np.full((len(radii), bd.size), np.nan)
    far = space.diam(Region.INTERIOR) + _max_gap(space)
    mean = float(np.dot(w, u.values) / w.sum())
    for i, r in enumerate(radii):
        if r > far:
            out[i] = mean
            continue
        nb = space.neighborhoods(bd, r, Region.INTERIOR)
        mass = nb.weighted_sum(w)
        ok = mass > 0
        out[i, ok] = nb.weighted_sum(w, u.values)[ok] / mass[ok]
    return out


def _max_gap(space):
    cache = space.__dict__
    if "_bd_gap" not in cache:
        d, _ = space.tree(Region.INTERIOR).query(space.region_coords(Region.BOUNDARY))
        cache["_bd_gap"] = float(d.max())
    return cache["_bd_gap"]


def _fill_down(vals: np.ndarray) -> np.ndarray:
    """Replace NaN at small radii by the value at the next larger radius."""
    out = vals.copy()
    for i in range(1, out.shape[0]):
        bad = np.isnan(out[i])
        out[i, bad] = out[i - 1, bad]
    return out


def trace(space: PointCloudSpace, u: ScalarField, r: Optional[float] = None) -> ScalarField:
    """The discrete trace: T at the smallest resolvable radius.

    Boundary points whose ball at that radius misses the interior (cusp tips)
    use the smallest dyadic multiple that reaches it.
    """
    r = smallest_radius(space) if r is None else r
    vals = trace_values(space, u, [r])[0]
    k = 1
    while np.isnan(vals).any():
        bad = np.isnan(vals)
        more = trace_values(space, u, [r * 2 ** k])[0]
        vals[bad] = more[bad]
        k += 1
    return ScalarField(Region.BOUNDARY, vals)


def _fit_rate(radii, gaps):
    ok = gaps > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(radii[ok]), np.log(gaps[ok]), 1)[0])


def trace_field(space: PointCloudSpace, u: ScalarField, p: float, k_max: int,
                R: Optional[float] = None, fit_below: Optional[float] = None,
                alphas: Sequence[float] = ()) -> TraceReport:
    """Dyadic trace schedule R 2^-k with Cauchy gaps and their log-log rate.

    R defaults to 2 diam of the interior, where T_R u is the global mean.
    The rate is fitted on radii below ``fit_below`` (default diam/4) where
    balls are not saturated.
    """
    _interior(u)
    R = 2.0 * space.diam_interior if R is None else float(R)
    rmin = smallest_radius(space)
    radii = R * 2.0 ** -np.arange(k_max + 1)
    notes = []
    if radii[-1] < rmin * (1 - 1e-12):
        radii = radii[radii >= rmin * (1 - 1e-12)]
        notes.append(f"schedule truncated at k={radii.size - 1}: smaller radii are below resolution")
        warnings.warn(notes[-1])
    vals = _fill_down(trace_values(space, u, radii))
    H = space.hmass
    gaps = np.array([float(np.dot(H, np.abs(vals[k - 1] - vals[k]) ** p) ** (1.0 / p))
                     for k in range(1, radii.size)])
    fb = space.diam_interior / 4.0 if fit_below is None else fit_below
    sel = radii[1:] <= fb
    rate = _fit_rate(radii[1:][sel], gaps[sel])
    tr = ScalarField(Region.BOUNDARY, vals[-1])
    semis = {}
    for a in alphas:
        semis[float(a)] = besov_norm_gks(space, tr, BesovParams(a, p, math.inf))[0]
    return TraceReport(tr, radii, gaps, rate, semis, vals, notes)


def trace_besov_report(space: PointCloudSpace, u: ScalarField, g: ScalarField, p: float,
                       theta: float, extra_alphas: Sequence[float] = ()) -> Dict:
    """Besov norms of the trace and the Hajlasz-type pair ratio."""
    if p <= theta:
        raise ValueError("supercritical trace only (use weighted_trace for p = theta)")
    _interior(u)
    _interior(g)
    alpha = 1.0 - theta / p
    tr = trace(space, u)
    semi_inf, full_inf = besov_norm_gks(space, tr, BesovParams(alpha, p, math.inf))
    semi_p, full_p = besov_norm_gks(space, tr, BesovParams(alpha, p, p))
    M = frac_maximal(space, g, theta, p).values
    bd = space.region_indices(Region.BOUNDARY)
    D = space.distances(bd, bd)
    iu = np.triu_indices(bd.size, 1)
    d = D[iu]
    num = np.abs(tr.values[iu[0]] - tr.values[iu[1]])
    den = d ** alpha * (M[iu[0]] + M[iu[1]])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(num > 0, num / den, 0.0)
    base = space.lp_norm(u, p) + space.lp_norm(g, p)
    extra = {float(a): besov_norm_gks(space, tr, BesovParams(a, p, math.inf))[0] for a in extra_alphas}
    return dict(alpha=alpha, besov_pinf=semi_inf, besov_pinf_full=full_inf,
                besov_pp=semi_p, besov_pp_full=full_p,
                hajlasz_ratio=float(ratio.max(initial=0.0)),
                norm_ratio_pinf=full_inf / base if base > 0 else 0.0,
                norm_ratio_pp=full_p / base if base > 0 else 0.0,
                extra_seminorms=extra)


def make_weight(spec: Union[dict, Callable]) -> Callable[[np.ndarray], np.ndarray]:
    """Weight w(t) from a spec and check it is nonincreasing and >= 1.

    ``{"kind": "log", "scale": s, "power": a}`` gives w(t) = max(1, log(s/t))^a;
    scale e and power 1+eps is the admissible weight log(e/t)^{1+eps} (t < 1).
    """
    if callable(spec):
        fn = spec
    else:
        kind = spec.get("kind", "log")
        if kind == "log":
            s = float(spec.get("scale", math.e))
            a = float(spec.get("power", 1.0 + float(spec.get("eps", 0.5))))
            fn = lambda t: np.maximum(1.0, np.log(s / np.asarray(t, float))) ** a
        elif kind == "one":
            fn = lambda t: np.ones_like(np.asarray(t, float))
        else:
            raise ValueError(f"unknown weight kind {kind!r}")
    probe = np.geomspace(1e-9, 1e3, 400)
    wv = np.asarray(fn(probe), float)
    if np.any(np.diff(wv) > 1e-12 * np.abs(wv[1:])) or np.any(wv < 1 - 1e-12):
        raise ValueError("weight must be nonincreasing and >= 1")
    return fn


def weighted_trace(space: PointCloudSpace, u: ScalarField, g: ScalarField, p: float,
                   weight, theta: Optional[float] = None, r: Optional[float] = None) -> Dict:
    """Critical case theta = p: trace against g~ = g * w(dist(x, boundary))."""
    if theta is not None and abs(theta - p) > 0.2:
        raise ValueError("weighted trace needs theta = p")
    _interior(u)
    _interior(g)
    w = make_weight(weight)
    delta = space.boundary_distance()
    gt = ScalarField(Region.INTERIOR, g.values * w(delta))
    gt_norm = space.lp_norm(gt, p)
    tr = trace(space, u, r)
    uo = space.mean(u)
    num = space.lp_norm(tr.copy(tr.values - uo), p)
    if gt_norm == 0:
        ratio = 0.0 if num <= 1e-12 * max(1.0, abs(uo)) else math.inf
    else:
        ratio = num / gt_norm
    return dict(g_tilde_norm=gt_norm, trace_dev_norm=num, ratio=ratio, trace=tr,
                exact_match=bool(gt_norm == 0 and ratio == 0.0))


def detect_no_trace(space: PointCloudSpace, u: ScalarField, radii: Sequence[float],
                    eps: float, frac: float = 0.9, tol: float = 0.1) -> Dict:
    """Divergence test: T_R u increases along the whole schedule at >= frac of
    the boundary points and its mean fits c log(e/R)^eps within tol."""
    radii = np.sort(np.asarray(radii, float))[::-1]
    vals = trace_values(space, u, radii)
    ok = ~np.isnan(vals).any(axis=0)
    inc = np.all(np.diff(vals[:, ok], axis=0) > 0, axis=0)
    frac_inc = float(inc.mean()) if inc.size else 0.0
    mean = np.nanmean(vals[:, ok], axis=1)
    prof = np.log(math.e / radii) ** eps
    c = float(np.dot(mean, prof) / np.dot(prof, prof))
    resid = float(np.max(np.abs(mean / (c * prof) - 1.0)))
    lower_ok = bool(np.all(vals[:, ok] >= prof[:, None] * (1 - 1e-12)))
    return dict(no_trace=bool(frac_inc >= frac and resid <= tol), fraction_increasing=frac_inc,
                fit_constant=c, fit_residual=resid, radii=radii, mean_trace=mean,
                lower_bound_holds=lower_ok)


def local_trace_estimate(space: PointCloudSpace, u: ScalarField, g: ScalarField, p: float,
                         q: float, ball: Ball, p_tilde: float, s: float, theta: float) -> float:
    """||Tu - u_{B}||_{L^pt(B on boundary)} / (rad^{(1/pt - 1/p*)(s - theta)} ||g||_{L^p(B)})."""
    if not (theta < p < s):
        raise ValueError("need theta < p < s")
    if not (q < p):
        raise ValueError("need q < p")
    p_star = p * (s - theta) / (s - p)
    if not (p < p_tilde < p_star):
        raise ValueError("need p < p_tilde < p*")
    if not space.is_boundary[int(ball.center)]:
        raise ValueError("ball must be boundary-centered")
    tr = trace(space, u)
    bmem = ball_members(space, ball, Region.BOUNDARY)
    imem = ball_members(space, ball, Region.INTERIOR)
    if imem.size == 0:
        raise ValueError("radius below resolution")
    wi = space.weights[imem]
    ui = u.values[space._pos[imem]]
    uB = float(np.dot(wi, ui) / wi.sum())
    hb = space.weights[bmem]
    num = float(np.dot(hb, np.abs(tr.values[space._pos[bmem]] - uB) ** p_tilde) ** (1 / p_tilde))
    gn = float(np.dot(wi, g.values[space._pos[imem]] ** p) ** (1 / p))
    scale = ball.radius ** ((1 / p_tilde - 1 / p_star) * (s - theta))
    if num == 0:
        return 0.0
    return num / (scale * gn) if gn > 0 else math.inf


def log_orlicz_integral(space: PointCloudSpace, g: ScalarField, p: float, eps: float) -> float:
    """int g^p log(e + g)^(1+eps) dmu, a diagnostic for log-Orlicz gradients.

    No bound is attached to it; it is reported so that trace runs at the
    critical exponent can be compared against gradients that are slightly
    better than L^p.
    """
    _interior(g)
    if eps < 0 or p < 1:
        raise ValueError("need p >= 1 and eps >= 0")
    v = np.abs(g.values)
    return float(np.dot(space.mu, v ** p * np.log(math.e + v) ** (1.0 + eps)))
