import math

import numpy as np
import pytest

from metsob import experiments as ex
from metsob.extension import (
    check_schedule, cutoffs, extend_besov, extend_lp, extension_gradient_report,
    layer_schedule, lipschitz_approximation, lipschitz_constant, roundtrip_error,
    shell_estimates,
)
from metsob.corpus import random_corpus
from metsob.space import Region, ScalarField
from metsob.trace import smallest_radius
from metsob.whitney import build_cover

from conftest import domain


@pytest.fixture(scope="module")
def sq(square32):
    return square32, build_cover(square32)


def bfield(sp, func):
    return sp.field("bd", func)


def test_constant_is_reproduced(sq):
    sp, cv = sq
    F = extend_besov(sp, cv, bfield(sp, lambda X: np.full(X.shape[0], 3.25)))
    assert np.max(np.abs(F.values - 3.25)) <= 1e-12


def test_linearity(sq):
    sp, cv = sq
    f, g = random_corpus(sp, "bd", 2, seed=7)
    lhs = extend_besov(sp, cv, f.copy(2.0 * f.values - 0.5 * g.values)).values
    rhs = 2.0 * extend_besov(sp, cv, f).values - 0.5 * extend_besov(sp, cv, g).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.abs(rhs).max())


def test_maximum_principle(sq):
    sp, cv = sq
    for f in random_corpus(sp, "bd", 10, seed=2):
        F = extend_besov(sp, cv, f).values
        assert f.values.min() - 1e-12 <= F.min() and F.max() <= f.values.max() + 1e-12


def test_requires_boundary_field(sq):
    sp, cv = sq
    with pytest.raises(ValueError):
        extend_besov(sp, cv, sp.field("mu", lambda X: X[:, 0]))


def test_lp_extension_is_nonlinear(sq):
    sp, cv = sq
    f = ex.step_field(sp)
    g = bfield(sp, lambda X: np.where(X[:, 1] > 0.5, 1.0, 0.0))
    Ff = extend_lp(sp, cv, f, 1.0, 8).F.values
    Fg = extend_lp(sp, cv, g, 1.0, 8).F.values
    Fs = extend_lp(sp, cv, f.copy(f.values + g.values), 1.0, 8).F.values
    assert np.max(np.abs(Fs - (Ff + Fg))) > 1e-3


def test_shell_zero_field(sq):
    sp, cv = sq
    z = int(sp.region_indices("bd")[0])
    assert shell_estimates(sp, cv, bfield(sp, lambda X: 0 * X[:, 0]), z, 0.1, 0.1, 2.0) == ((0, 0), (0, 0))


def test_shell_large_rho_is_global(sq):
    sp, cv = sq
    f = random_corpus(sp, "bd", 1, seed=3)[0]
    z = int(sp.region_indices("bd")[0])
    rho = 10.0
    (a, b), (c, d) = shell_estimates(sp, cv, f, z, 10.0, rho, 2.0, 1.0)
    F = extend_besov(sp, cv, f)
    assert c == pytest.approx(sp.integrate(F.copy(np.abs(F.values)), 2.0))
    assert a == pytest.approx(c)
    assert d == pytest.approx(rho * sp.integrate(f.copy(np.abs(f.values)), 2.0))


def test_shell_ratios_frozen(square64):
    cv = build_cover(square64)
    r = ex.shell_ratios(square64, cv, ex.lipschitz_corpus(square64, 4))
    k = ex.load_constants()
    assert r["local"] <= 1.5 * k["shell_local.square"]
    assert r["glob"] <= 1.5 * k["shell_global.square"]


def test_gradient_report_constant(sq):
    sp, cv = sq
    rep = extension_gradient_report(sp, cv, bfield(sp, lambda X: np.ones(X.shape[0])), 2.0, 1.0)
    assert rep.lip_norm <= 1e-12 and rep.pointwise_ratio == 0.0
    assert rep.ratio <= 1e-12


def test_gradient_report_exponent_check(sq):
    sp, cv = sq
    with pytest.raises(ValueError, match="max"):
        extension_gradient_report(sp, cv, bfield(sp, lambda X: X[:, 0]), 1.5, 2.0)


def test_gradient_ratio_frozen(sq):
    sp, cv = sq
    k = ex.load_constants()
    for f in ex.lipschitz_corpus(sp, 5):
        rep = extension_gradient_report(sp, cv, f, 2.0, 1.0)
        assert rep.ratio <= 1.5 * k["extension_lip_besov.square"]
        assert max(rep.layer_ratios.values()) <= 1.5 * k["lip_layer.square"]


def test_lipschitz_approximation_basics(sq):
    sp, _ = sq
    f = ex.step_field(sp)
    ap = lipschitz_approximation(sp, f, 10, p=2.0)
    assert np.all(ap[0].values == 0)
    fn = sp.lp_norm(f, 2.0)
    for k in range(2, 11):
        fk = ap[k - 1]
        assert sp.lp_norm(f.copy(fk.values - f.values), 2.0) <= 2.0 ** -k * fn * (1 + 1e-12)
        assert lipschitz_constant(sp, fk) <= ap.L[k - 1] * (1 + 1e-12)
    for k in range(1, 10):
        step = sp.lp_norm(f.copy(ap[k].values - ap[k - 1].values), 2.0)
        assert step <= 2.0 ** (2 - k) * fn * (1 + 1e-12)


def test_chosen_constant_is_minimal(sq):
    sp, _ = sq
    f = ex.step_field(sp)
    ap = lipschitz_approximation(sp, f, 6, p=2.0)
    fn = sp.lp_norm(f, 2.0)
    bd = sp.region_indices("bd")
    D = sp.distances(bd, bd)
    for k in range(2, 7):
        half = ap.L[k - 1] / 2
        g = np.min(f.values[None, :] + half * D, axis=1)
        assert sp.lp_norm(f.copy(g - f.values), 2.0) > 2.0 ** -k * fn


def test_lipschitz_input_is_fixed_point(sq):
    sp, _ = sq
    f = bfield(sp, lambda X: 0.3 * X[:, 0] - 0.2 * X[:, 1])
    L0 = lipschitz_constant(sp, f)
    ap = lipschitz_approximation(sp, f, 30)
    for fk, L in zip(ap[1:], ap.L[1:]):
        if L >= L0:
            assert np.array_equal(fk.values, f.values)


def test_zero_field_approximation(sq):
    sp, _ = sq
    ap = lipschitz_approximation(sp, bfield(sp, lambda X: 0 * X[:, 0]), 5)
    assert len(ap) == 5 and all(np.all(g.values == 0) for g in ap)


def test_schedule_all_zero(sq):
    sp, _ = sq
    zero = [bfield(sp, lambda X: 0 * X[:, 0])] * 6
    rho = layer_schedule(sp, zero, 1.0)
    diam = sp.diam_interior
    assert rho == pytest.approx([diam / 2 ** k for k in range(1, 6)])


def test_schedule_recomputation(sq):
    sp, _ = sq
    f = ex.step_field(sp)
    ap = lipschitz_approximation(sp, f, 9, p=1.0)
    fn = sp.lp_norm(f, 1.0)
    lips = [lipschitz_constant(sp, g) for g in ap]
    rho = layer_schedule(sp, ap, fn, lips)
    expect, prev = [], sp.diam_interior
    for k in range(1, 9):
        b = 2.0 ** -k * fn / (1 + lips[k]) if lips[k] > 0 else math.inf
        prev = min(prev / 2, b)
        expect.append(prev)
    assert rho == expect
    steps = [sp.lp_norm(f.copy(ap[k + 1].values - ap[k].values), 1.0) for k in range(8)]
    assert all(check_schedule(sp, rho, lips, steps, fn).values())
    assert sum(r * L for r, L in zip(rho, lips[1:])) <= fn


def test_cutoff_telescoping():
    rho = [0.4, 0.2, 0.1, 0.05, 0.02]
    delta = np.linspace(0, 0.6, 301)
    psi = cutoffs(delta, rho)
    assert np.all((psi >= 0) & (psi <= 1))
    tele = sum(psi[k - 1] - psi[k] for k in range(1, psi.shape[0])) + psi[-1]
    assert np.allclose(tele, psi[0])
    assert np.all(psi[0][delta < rho[1]] == 1.0)


def test_extend_lp_constant_deep_layers(sq):
    sp, cv = sq
    rep = extend_lp(sp, cv, bfield(sp, lambda X: np.full(X.shape[0], 2.0)), 2.0, 10)
    rho = [r for _, r, _, _ in rep.layer_table]
    delta = sp.boundary_distance()
    deep = delta < rho[1]
    assert np.allclose(rep.F.values[deep], 2.0, atol=2.0 * 2 ** -3)
    assert all(rep.invariants.values())


def test_extend_lp_warns_off_critical(sq):
    sp, cv = sq
    with pytest.warns(UserWarning, match="theta"):
        rep = extend_lp(sp, cv, ex.step_field(sp), 2.0, 6, theta=1.0)
    assert rep.warnings


def test_extend_lp_ratios_frozen(square64):
    cv = build_cover(square64)
    k = ex.load_constants()
    rep = extend_lp(square64, cv, ex.step_field(square64), 1.0, 16)
    assert rep.norm_ratios["lp"] <= 1.5 * k["extend_lp_lp.square"]
    assert rep.norm_ratios["lip"] <= 1.5 * k["extend_lp_lip.square"]


def test_roundtrip_constant(sq):
    sp, cv = sq
    c = bfield(sp, lambda X: np.full(X.shape[0], -1.5))
    assert roundtrip_error(sp, cv, c, 2.0) <= 1e-12
    assert roundtrip_error(sp, cv, c, 2.0, mode="lp", k_max=6) <= 1e-12
    with pytest.raises(ValueError):
        roundtrip_error(sp, cv, c, 2.0, mode="nope")


def test_roundtrip_lipschitz_bound(sq):
    sp, cv = sq
    r = smallest_radius(sp)
    for f in ex.lipschitz_corpus(sp, 6):
        assert roundtrip_error(sp, cv, f, 2.0) <= 4 * r * lipschitz_constant(sp, f)


def test_cusp_besov_roundtrip_decreases():
    errs = []
    for res in (64, 128):
        sp = domain("cusp", res)
        f = bfield(sp, lambda X: np.abs(X[:, 0] - 0.5) ** 0.7 + X[:, 1])
        errs.append(roundtrip_error(sp, build_cover(sp), f, 2.5))
    assert errs[1] < errs[0]
