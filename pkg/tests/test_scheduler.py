import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import schedule_loss_by_summation, shi_partial_sum
from riccilab.errors import HypothesisViolation, InvalidInput, RadiusExhausted
from riccilab.scheduler import (Disc, SchedulePack, collar_length, cutoff, extend_once, growth,
                                hochard_complete, pyramid_build, pyramid_member, radius_budget,
                                run_schedule, shi_horizon, wire_constants)
from riccilab.surface import ConformalGrid

packs = st.builds(SchedulePack, c0=st.floats(1.0, 100.0), tau=st.floats(0.01, 10.0),
                  alpha0=st.floats(0.01, 10.0))


# Shi horizon
def test_shi_examples():
    assert shi_horizon(1) == 1 / 16
    assert shi_horizon(1, iterated=True) == 1 / 8
    assert shi_horizon(2) == 1 / 32
    assert shi_horizon(2, iterated=True) == 1 / 16


@pytest.mark.parametrize("K,N", [(1, 1), (1, 10), (4, 7), (0.5, 30)])
def test_shi_partial_sums_exact(K, N):
    assert Fraction(shi_horizon(K, terms=N)) == shi_partial_sum(Fraction(K), N)


@pytest.mark.parametrize("K,N", [(3, 7), (0.1, 12)])
def test_shi_partial_sums_to_rounding(K, N):
    assert shi_horizon(K, terms=N) == pytest.approx(float(shi_partial_sum(Fraction(K), N)), rel=4e-16)


def test_shi_partial_sum_literal():
    assert shi_partial_sum(1, 10) == Fraction(1023, 8192)


@given(K=st.floats(1e-6, 1e6), lam=st.sampled_from([0.5, 2.0, 4.0, 0.125]))
def test_shi_scaling_covariance(K, lam):
    assert shi_horizon(lam * K) == shi_horizon(K) / lam
    assert shi_horizon(lam * K, iterated=True) == shi_horizon(K, iterated=True) / lam


@pytest.mark.parametrize("K", [0, -1, math.inf])
def test_shi_rejects_bad_curvature(K):
    with pytest.raises(InvalidInput):
        shi_horizon(K)


# constant wiring
def test_wire_constants_examples():
    pack = wire_constants(alpha0=1.0, C0=3.0, T_hat=0.5, S_hat=0.2, gamma=2.0)
    assert pack.c0 == 24
    assert pack.delta0 == pytest.approx(1 / 2400, rel=1e-15)
    assert pack.tau == 0.2
    assert pack.gate == pytest.approx(1 / 24000, rel=1e-15)


@pytest.mark.parametrize("kw", [{"v0": 0}, {"alpha0": -1}, {"C0": 0.5}, {"gamma": 0.5}, {"T_hat": 0}])
def test_wire_constants_rejects(kw):
    with pytest.raises(InvalidInput):
        wire_constants(**kw)


# extension step
def test_extend_once_worked_example():
    pack = SchedulePack(1.0, 1.0, 0.05)
    ell2, r2 = extend_once(0.1, 5.0, pack)
    assert ell2 == 0.125
    assert r2 == 5 - 6 * math.sqrt(0.125)
    assert r2 == pytest.approx(2.8787, abs=1e-4)


@given(pack=packs, frac=st.floats(1e-9, 1.0))
def test_extend_once_growth_factor_exact(pack, frac):
    ell1 = pack.gate * frac
    try:
        ell2, _ = extend_once(ell1, 1e6, pack)
    except RadiusExhausted:
        return
    assert ell2 == ell1 * (1 + 1 / (4 * pack.c0))


@given(C0=st.floats(1, 50), gamma=st.floats(1, 10), alpha0=st.floats(0.01, 10), tau=st.floats(0.01, 5))
def test_step4_rescaled_bound(C0, gamma, alpha0, tau):
    pack = wire_constants(alpha0=alpha0, C0=C0, T_hat=tau, S_hat=tau, gamma=gamma)
    ell2, _ = extend_once(pack.gate, 1e6, pack)
    assert alpha0 * ell2 / pack.tau <= 2 * alpha0 * pack.gate / pack.tau * (1 + 1e-15)
    assert 2 * alpha0 * pack.gate / pack.tau <= pack.delta0 * (1 + 1e-15)


def test_extend_once_errors():
    pack = SchedulePack(1.0, 1.0, 0.05)
    with pytest.raises(HypothesisViolation):
        extend_once(0.2, 5.0, pack)
    with pytest.raises(HypothesisViolation):
        extend_once(0.1, 1.5, pack)
    with pytest.raises(RadiusExhausted):
        extend_once(0.1, 2.5, pack)


# schedules
def test_zero_step_success_above_gate():
    pack = SchedulePack(1.0, 1.0, 0.05)
    s = run_schedule(0.2, 5.0, 1.0, pack)
    assert s.steps == 0 and s.success


@given(pack=packs, e=st.floats(-12, 0))
def test_step_count_identity(pack, e):
    ell1 = pack.gate * 10**e
    s = run_schedule(ell1, 1e3, 1.0, pack)
    assert s.success
    q = growth(pack.c0)
    N = s.steps
    assert q**N * ell1 > pack.gate >= q ** (N - 1) * ell1 or N == 0
    assert np.all(np.diff(s.ell) > 0) and np.all(np.diff(s.r) < 0) and np.all(s.r >= 1)


@given(pack=packs, e=st.floats(-12, 0), r1=st.floats(2, 50), rt=st.floats(1, 1.99))
def test_schedule_matches_plain_summation(pack, e, r1, rt):
    ell1 = pack.gate * 10**e
    s = run_schedule(ell1, r1, rt, pack)
    steps, loss, ok = schedule_loss_by_summation(ell1, r1, rt, pack.c0, pack.tau, pack.alpha0)
    assert (s.steps, s.success) == (steps, ok)
    assert s.radius_loss == pytest.approx(loss, rel=1e-12, abs=1e-12)


@given(pack=packs)
@settings(max_examples=25)
def test_radius_budget_sweep(pack):
    B = radius_budget(pack)
    losses = []
    for e in np.linspace(-12, 0, 49):
        s = run_schedule(pack.gate * 10**e, 1e3, 1.0, pack)
        assert s.success
        losses.append(s.radius_loss)
    assert max(losses) <= B
    # smaller starting times lose no more than the budget either way
    assert losses[0] <= B


def test_run_schedule_rejects_targets():
    with pytest.raises(InvalidInput):
        run_schedule(0.01, 2.0, 3.0, SchedulePack(1, 1, 0.05))
    with pytest.raises(InvalidInput):
        run_schedule(0.01, 2.0, 0.5, SchedulePack(1, 1, 0.05))


def test_radius_exhausted_outcome():
    s = run_schedule(1e-6, 1.1, 1.0, SchedulePack(1.0, 1e-4, 0.05))
    assert s.outcome == "radius-exhausted" and not s.success


# pyramid domains
@pytest.fixture(scope="module")
def pyramid():
    return pyramid_build(6, wire_constants())


def test_pyramid_examples(pyramid):
    T = pyramid.T
    assert np.all(T > 0) and np.all(np.diff(T) <= 0)
    assert pyramid_member(pyramid, 0.5, T[0])
    assert not pyramid_member(pyramid, pyramid.k_max + 1, 1e-12)
    assert not pyramid_member(pyramid, 0.5, T[0] * (1 + 1e-9))


def test_pyramid_member_matches_union_definition(pyramid):
    T = pyramid.T
    ds = np.linspace(0, pyramid.k_max + 1, 57)
    ts = np.linspace(0, 1.2 * T[0], 41)
    for d, t in itertools.product(ds, ts):
        union = any(d < k and t <= T[k - 1] for k in range(1, pyramid.k_max + 1))
        assert pyramid_member(pyramid, d, t) == union


@given(d=st.floats(0, 8), t=st.floats(0, 1e-3), fd=st.floats(0, 1), ft=st.floats(0, 1))
def test_pyramid_monotone(pyramid, d, t, fd, ft):
    if pyramid_member(pyramid, d, t):
        assert pyramid_member(pyramid, d * fd, t * ft)


def test_pyramid_truncates_on_failure():
    dom = pyramid_build(4, SchedulePack(1.0, 1e-4, 0.05), ell1=1e-6, r1=lambda k: k + 0.01)
    assert dom.truncated_at == 1 and dom.k_max == 0
    assert not pyramid_member(dom, 0.1, 0.0)


def test_pyramid_rejects_bad_kmax():
    with pytest.raises(InvalidInput):
        pyramid_build(0, wire_constants())


# conformal completion
def test_cutoff_endpoints():
    x = np.array([0.0, 1.0, 1.5, 2.0, 3.0])
    c = cutoff(x)
    assert c[0] == 1 and c[1] == 1 and c[3] == 0 and c[4] == 0
    assert c[2] == pytest.approx(0.5)
    assert np.all(np.diff(cutoff(np.linspace(0, 3, 301))) <= 0)


def flat_square(R, h):
    L = R + 2 * h
    return ConformalGrid.from_function(lambda X, Y: 0 * X, h, (-L, L), (-L, L))


@pytest.mark.parametrize("rho", [1.0, 0.5])
def test_hochard_identity_far_from_boundary(rho):
    g = flat_square(3.0, rho / 10)
    res = hochard_complete(g, Disc((0.0, 0.0), 3.0), rho)
    assert res.unchanged.any()
    assert np.array_equal(res.grid.u[res.unchanged], g.u[res.unchanged])
    X, Y = g.coords()
    far = np.hypot(X, Y) <= 3.0 - 2 * rho - 1e-9
    assert np.all(res.unchanged[far])
    near = res.grid.domain & (res.boundary_distance < rho)
    assert np.all(res.grid.u[near] > 0)


def test_hochard_precondition():
    g = ConformalGrid.from_function(lambda X, Y: 3 * (X * X + Y * Y), 0.05, (-1, 1), (-1, 1))
    with pytest.raises(InvalidInput):
        hochard_complete(g, Disc((0.0, 0.0), 0.9), 0.5)
    with pytest.raises(InvalidInput):
        hochard_complete(flat_square(1.0, 0.1), Disc((0.0, 0.0), 1.0), 1.5)


def test_hochard_gamma_stable_across_rho():
    gammas = [hochard_complete(flat_square(4.0, rho / 20), Disc((0.0, 0.0), 4.0), rho).gamma_fit
              for rho in (1.0, 0.5, 0.25)]
    assert max(gammas) / min(gammas) - 1 <= 0.2


def test_hochard_collar_grows_under_refinement():
    rho, R = 0.5, 2.0
    hs = [0.1, 0.05, 0.025]
    lengths = []
    for h in hs:
        g = flat_square(R, h)
        res = hochard_complete(g, Disc((0.0, 0.0), R), rho)
        lengths.append(collar_length(res, g.nearest_node(0.0, 0.0)))
    assert lengths[0] < lengths[1] < lengths[2]
    slope = np.polyfit(np.log(1 / np.array(hs)), lengths, 1)[0]
    assert slope >= 0.5 * rho
