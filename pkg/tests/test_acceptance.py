"""Acceptance criteria 1-9.  Each test records one PASS/FAIL line that the
terminal summary prints, then asserts the same condition."""
import math
import time

import numpy as np
import pytest

from metsob import experiments as ex
from metsob.corpus import random_corpus
from metsob.extension import extend_besov, lipschitz_constant
from metsob.functionals import BesovParams, besov_norm_gks, inequality_suite
from metsob.space import Ball, PointCloudSpace, Region, ScalarField, ball_members
from metsob.trace import smallest_radius, trace
from metsob.whitney import build_cover, check_cover

from conftest import ACCEPTANCE, domain

FROZEN = ex.load_constants()
SLACK = ex.SLACK


def record(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    ACCEPTANCE[n] = line
    print(line)
    return ok


def within(value, frozen):
    return frozen / SLACK <= value <= SLACK * frozen


@pytest.fixture(scope="module")
def squares():
    """Spaces, covers and corpora shared by criteria 4 and 5, with setup time."""
    t0 = time.perf_counter()
    out = {}
    for r in (64, 128, 256):
        sp = ex._space("square", r)
        out[r] = (sp, build_cover(sp), ex.lipschitz_corpus(sp))
    return out, time.perf_counter() - t0


def test_criterion_1_norm_equivalence():
    t0 = time.perf_counter()
    sp = ex._space("square", 64)
    fields = random_corpus(sp, Region.BOUNDARY, 200, 0)
    r = ex.norm_equivalence_ratios(sp, fields)
    C = float(max(r.max(), 1 / r.min()))
    dt = time.perf_counter() - t0
    ok = sp.is_boundary.sum() == 512 and C <= SLACK * FROZEN["norm_equivalence"] and dt <= 60
    assert record(1, ok, f"BP/GKS in [{r.min():.3f}, {r.max():.3f}], C={C:.4f} "
                         f"(frozen {FROZEN['norm_equivalence']:.4f}), {dt:.1f}s")


def test_criterion_2_exact_suite():
    t0 = time.perf_counter()
    sp = ex._space("square", 64)
    rep = inequality_suite(sp, random_corpus(sp, Region.BOUNDARY, 200, 0))
    dt = time.perf_counter() - t0
    worst = {k: v["worst"] for k, v in rep["exact"].items()}
    ok = rep["passed"] and len(worst) == 4 and dt <= 120
    detail = ", ".join(f"{k}={v:.6f}" for k, v in sorted(worst.items()))
    assert record(2, ok, f"worst lhs/rhs {detail} (<= 1+1e-9), {dt:.1f}s")


def test_criterion_3_whitney():
    t0 = time.perf_counter()
    parts, ok = [], True
    for kind in ("square", "cusp", "weighted_disc"):
        sp = ex._space(kind, ex.REFERENCE[kind])
        cv = build_cover(sp)
        rep = check_cover(sp, cv)
        frozen = FROZEN[f"whitney_overlap.{kind}"]
        good = rep["passed"] and rep["max_overlap"] <= frozen and rep["partition_max_error"] <= 1e-12
        ok &= good
        parts.append(f"{kind}@{ex.REFERENCE[kind]} overlap {rep['max_overlap']}/{frozen:g} "
                     f"sum err {rep['partition_max_error']:.1e}")
    dt = time.perf_counter() - t0
    ok &= dt <= 60
    assert record(3, ok, "; ".join(parts) + f", {dt:.1f}s")


def test_criterion_4_extension_bounds(squares):
    squares, setup = squares
    t0 = time.perf_counter() - setup
    parts, ok = [], True
    for r, (sp, cv, fields) in squares.items():
        rat = ex.extension_ratios(sp, cv, fields, 2.0)
        good = within(rat["lp"], FROZEN["extension_lp.square"]) and \
            within(rat["lip_besov"], FROZEN["extension_lip_besov.square"])
        ok &= good
        parts.append(f"{r}: lp {rat['lp']:.3f} lip {rat['lip_besov']:.3f}")
    dt = time.perf_counter() - t0
    ok &= dt <= 180
    assert record(4, ok, "; ".join(parts) + f" (frozen {FROZEN['extension_lp.square']:.3f}/"
                         f"{FROZEN['extension_lip_besov.square']:.3f}, x1.5 both sides), {dt:.1f}s")


def test_criterion_5_roundtrip(squares):
    squares, setup = squares
    t0 = time.perf_counter() - setup
    errs, bounds = [], []
    for r, (sp, cv, fields) in squares.items():
        rmin = smallest_radius(sp)
        errs.append([sp.lp_norm(f.copy(trace(sp, extend_besov(sp, cv, f)).values - f.values), 2.0)
                     for f in fields])
        bounds.append([4 * rmin * lipschitz_constant(sp, f) for f in fields])
    E, B = np.array(errs), np.array(bounds)
    mono = bool(np.all(np.diff(E, axis=0) < 0))
    worst = float(np.max(E[-1] / B[-1]))
    dt = time.perf_counter() - t0
    ok = mono and worst <= 1.0 and E.shape[1] == 20 and dt <= 300
    assert record(5, ok, f"max error {' > '.join(f'{e:.4f}' for e in E.max(axis=1))}, monotone={mono}, "
                         f"finest err/(4 r L) <= {worst:.3f}, {dt:.1f}s")


def test_criterion_6_cusp_trace():
    t0 = time.perf_counter()
    res = ex.e1_cusp_trace((64, 128, 256), p=2.5)
    dt = time.perf_counter() - t0
    c = res.checks
    ok = res.passed and dt <= 300
    assert record(6, ok, f"q=6 growth {c['q6_growth']['value']:.4f} (need >= 1.5), "
                         f"q=4 change {c['q4_change']['value']:.2e}, g change {c['g_stable']['value']:.4f}, "
                         f"{dt:.1f}s")


def test_criterion_7_no_trace_and_sharpness():
    t0 = time.perf_counter()
    e3 = ex.e3_weighted_disc((48, 96))
    e4 = ex.e4_sharpness_disc((48, 96), constants=FROZEN)
    dt = time.perf_counter() - t0
    l3, l4 = e3.rows[-1], e4.rows[-1]
    ratios = [row["weighted_trace_ratio"] for row in e4.rows]
    ok = e3.passed and e4.passed and dt <= 300
    assert record(7, ok, f"weighted disc increasing {l3['fraction_increasing']:.2f} residual "
                         f"{l3['fit_residual']:.3f}; sharpness disc increasing {l4['fraction_increasing']:.2f}, "
                         f"g~ change {e4.checks['g_tilde_stable']['value']:.4f}, ratio "
                         f"{'/'.join(f'{x:.4f}' for x in ratios)} (frozen "
                         f"{FROZEN['weighted_trace.sharpness_disc']:.4f}), {dt:.1f}s")


def test_criterion_8_selection():
    t0 = time.perf_counter()
    out = ex.selection_trials(500, 64, 64, 10.0, 0.1)
    dt = time.perf_counter() - t0
    ok = out["verified"] == 500 and dt <= 5
    assert record(8, ok, f"{out['verified']}/500 verified (guaranteed card {out['min_card']}), {dt:.2f}s")


def naive_members(sp, c, r, region):
    ids = sp.region_indices(region)
    d = np.sqrt(((sp.coords[ids] - sp.coords[c]) ** 2).sum(axis=1))
    return np.sort(ids[d < r])


def test_criterion_9_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    worst = 0.0
    for i in range(50):
        X = rng.uniform(size=(50, 2))
        bd = np.zeros(50, bool)
        bd[:10] = True
        sp = PointCloudSpace(X, bd, rng.uniform(0.5, 2, 50))
        u = ScalarField(Region.INTERIOR, rng.normal(size=40))
        q = math.inf if i % 5 == 0 else float(rng.uniform(1, 4))
        prm = BesovParams(float(rng.uniform(0.1, 0.7)), float(rng.uniform(1, 3)), q)
        exact = besov_norm_gks(sp, u, prm)[0]
        quad = besov_norm_gks(sp, u, prm, method="quadrature")[0]
        worst = max(worst, abs(quad - exact) / exact)
    sp = ex._space("square", 32)
    mism = 0
    for _ in range(200):
        c = int(rng.integers(sp.n))
        r = float(rng.uniform(0.005, 1.5))
        region = Region.INTERIOR if rng.random() < 0.5 else Region.BOUNDARY
        mism += not np.array_equal(ball_members(sp, Ball(c, r), region), naive_members(sp, c, r, region))
    dt = time.perf_counter() - t0
    ok = worst <= 0.02 and mism == 0 and dt <= 60
    assert record(9, ok, f"exact vs quadrature max rel diff {worst:.2e}; ball query mismatches {mism}/200, "
                         f"{dt:.1f}s")
