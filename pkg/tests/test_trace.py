import math

import numpy as np
import pytest

from metsob import experiments as ex
from metsob.corpus import random_corpus
from metsob.space import Ball, Region, ScalarField
from metsob.trace import (
    detect_no_trace, local_trace_estimate, log_orlicz_integral, make_weight, smallest_radius,
    trace, trace_at_radius, trace_besov_report, trace_field, trace_values,
    weighted_trace,
)

from conftest import domain


def bd_point(sp, x):
    bd = sp.region_indices("bd")
    return int(bd[np.argmin(((sp.coords[bd] - x) ** 2).sum(axis=1))])


def test_constant_trace(square32):
    u = square32.field("mu", lambda X: np.full(X.shape[0], 2.5))
    z = int(square32.region_indices("bd")[3])
    assert trace_at_radius(square32, u, z, 0.2) == pytest.approx(2.5)
    rep = trace_field(square32, u, 2.0, 6)
    assert np.allclose(rep.trace.values, 2.5)
    assert np.all(rep.cauchy_gaps <= 1e-12)


def test_half_disc_mean(square64):
    u = square64.field("mu", lambda X: X[:, 0])
    r = 0.2
    z = bd_point(square64, [0.0, 0.5])
    # first moment of a half disc: 4 r / (3 pi)
    assert trace_at_radius(square64, u, z, r) == pytest.approx(4 * r / (3 * math.pi), rel=0.05)


def test_large_radius_gives_global_mean(square32):
    u = square32.field("mu", lambda X: X[:, 0] ** 2 + X[:, 1])
    z = int(square32.region_indices("bd")[0])
    assert trace_at_radius(square32, u, z, 5.0) == pytest.approx(square32.mean(u))
    vals = trace_values(square32, u, [10.0])
    assert np.allclose(vals, square32.mean(u))


def test_radius_below_resolution(square32):
    u = square32.field("mu", lambda X: X[:, 0])
    with pytest.raises(ValueError, match="below resolution"):
        trace_at_radius(square32, u, int(square32.region_indices("bd")[5]), 1e-4)


def test_trace_requires_interior_field(square32):
    with pytest.raises(ValueError):
        trace(square32, square32.field("bd", lambda X: X[:, 0]))


def test_smallest_radius(square64):
    # boundary samples sit half a cell away from the nearest grid centroid
    assert 0.5 / 64 < smallest_radius(square64) < 4 / 64


def test_linear_field_rate(square64):
    u = square64.field("mu", lambda X: X[:, 0])
    with pytest.warns(UserWarning, match="truncated"):
        rep = trace_field(square64, u, 2.0, 12)
    assert rep.fitted_rate >= 0.5 - 0.25
    assert abs(rep.fitted_rate - 1.0) <= 0.25
    assert rep.warnings and "truncated" in rep.warnings[0]


def test_trace_of_linear_field_is_close(square64):
    u = square64.field("mu", lambda X: X[:, 0])
    tr = trace(square64, u)
    x = square64.region_coords("bd")[:, 0]
    assert np.max(np.abs(tr.values - x)) <= 2 * smallest_radius(square64)


def test_weighted_disc_lower_bound():
    sp = domain("weighted_disc", 48)
    eps = 0.25
    d = ex._disc_delta(sp)
    u = ScalarField(Region.INTERIOR, np.log(math.e / d) ** eps)
    det = detect_no_trace(sp, u, ex._schedule(sp), eps)
    assert det["lower_bound_holds"]
    assert det["fraction_increasing"] >= 0.9
    assert np.all(np.diff(det["mean_trace"]) > 0)


def test_besov_report_constant(square32):
    u = square32.field("mu", lambda X: np.ones(X.shape[0]))
    g = u.copy(np.zeros(len(u)))
    rep = trace_besov_report(square32, u, g, 2.0, 1.0)
    assert rep["besov_pinf"] == 0 and rep["besov_pp"] == 0 and rep["hajlasz_ratio"] == 0


def test_besov_report_needs_supercritical(square32):
    u = square32.field("mu", lambda X: X[:, 0])
    with pytest.raises(ValueError, match="supercritical"):
        trace_besov_report(square32, u, u, 1.0, 1.0)


def test_cusp_trace_seminorm_stable_vs_growing():
    p = 2.5
    a0 = 1 - 2 / p
    vals = []
    for res in (64, 128):
        sp = domain("cusp", res)
        u, g = ex.cusp_field(sp, p)
        rep = trace_besov_report(sp, u, g, p, 2.0, extra_alphas=(a0 + 0.1,))
        vals.append((rep["besov_pinf"], rep["extra_seminorms"][a0 + 0.1]))
    assert abs(vals[1][0] / vals[0][0] - 1) <= 0.15
    assert vals[1][1] / vals[0][1] > vals[1][0] / vals[0][0]


def test_weight_validation():
    w = make_weight(dict(kind="log", scale=math.e, power=1.5))
    assert w(np.array([1.0]))[0] == 1.0
    with pytest.raises(ValueError):
        make_weight(lambda t: 1 + np.asarray(t))
    with pytest.raises(ValueError):
        make_weight(dict(kind="cubic"))


def test_weighted_trace_zero_gradient(square32):
    u = square32.field("mu", lambda X: np.full(X.shape[0], 3.0))
    g = u.copy(np.zeros(len(u)))
    out = weighted_trace(square32, u, g, 2.0, dict(kind="log", scale=3.0, power=1.5))
    assert out["ratio"] == 0.0 and out["exact_match"]


def test_weighted_trace_needs_critical_case(square32):
    u = square32.field("mu", lambda X: X[:, 0])
    with pytest.raises(ValueError):
        weighted_trace(square32, u, u, 2.0, dict(kind="one"), theta=1.0)


def test_weighted_trace_ratio_bounded():
    sp = domain("weighted_disc", 48)
    fields = random_corpus(sp, "mu", 6, seed=3, families=("trig", "tent"))
    w = dict(kind="log", scale=2 * sp.diam_interior, power=1.25)
    from metsob.functionals import lip_field
    ratios = [weighted_trace(sp, u, lip_field(sp, u, 2.5 * sp.spacing), 2.0, w, theta=2.0)["ratio"]
              for u in fields]
    assert max(ratios) < 5


def test_sharpness_weighted_ratio_matches_frozen():
    sp = domain("sharpness_disc", 48, eps=0.5, n=4)
    frozen = ex.load_constants()["weighted_trace.sharpness_disc"]
    r = ex.sharpness_weighted_ratio(sp)["ratio"]
    assert frozen / 1.5 <= r <= 1.5 * frozen


def test_local_trace(square64):
    u = square64.field("mu", lambda X: np.ones(X.shape[0]))
    g = u.copy(np.ones(len(u)))
    z = bd_point(square64, [0.5, 0.0])
    assert local_trace_estimate(square64, u, g, 1.5, 1.0, Ball(z, 0.2), 2.0, 2.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        local_trace_estimate(square64, u, g, 1.5, 1.0, Ball(z, 0.2), 4.0, 2.0, 1.0)


def test_local_trace_scale_stable(square64):
    per_r = ex.local_trace_ratios(square64)
    vals = list(per_r.values())
    assert max(vals) / min(vals) <= 2.0
    assert max(vals) <= 1.5 * ex.load_constants()["local_trace.square"]


def test_log_orlicz_integral(square32):
    g = square32.field("mu", lambda X: np.full(X.shape[0], 2.0))
    expect = square32.total_mass("mu") * 4.0 * math.log(math.e + 2.0) ** 1.5
    assert log_orlicz_integral(square32, g, 2.0, 0.5) == pytest.approx(expect)
    zero = g.copy(np.zeros(len(g)))
    assert log_orlicz_integral(square32, zero, 2.0, 0.5) == 0.0
    # dominates the plain L^p integral
    h = g.copy(np.abs(np.random.default_rng(0).normal(size=len(g))))
    assert log_orlicz_integral(square32, h, 2.0, 0.1) >= square32.integrate(h, 2.0)
