import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from riccilab.errors import InvalidInput, NoPath, TriangleViolation
from riccilab.surface import (ConeSpace, ConformalGrid, FiniteMetricSpace, ModelMetric,
                              RadialProfile, SmoothedCone, area, ball_area, cone_distance,
                              distance, gauss_curvature, make_model, metric_closure, sample_fms)

SPHERE = lambda X, Y: np.log(2 / (1 + X * X + Y * Y))
POINCARE = lambda X, Y: np.log(2 / (1 - X * X - Y * Y))
CUSP = lambda X, Y: -np.log(np.hypot(X, Y) * np.log(1 / np.hypot(X, Y)))


def flat(h=0.1, L=1.0):
    return ConformalGrid.from_function(lambda X, Y: 0 * X, h, (0, L), (0, L))


# curvature
def test_flat_curvature_is_zero():
    K = gauss_curvature(flat())
    assert np.all(K[np.isfinite(K)] == 0)


def test_boundary_nodes_are_unavailable():
    g = flat()
    K = gauss_curvature(g)
    assert np.all(np.isnan(K[g.boundary_mask]))
    assert np.all(np.isfinite(K[g.interior_mask]))


def test_tiny_grid_rejected():
    with pytest.raises(InvalidInput):
        gauss_curvature(ConformalGrid(np.zeros((2, 5)), 0.1))


@pytest.mark.parametrize("u_expr,func,box", [
    (oracles.SPHERE_U, SPHERE, (-1.0, 1.0)),
    (oracles.POINCARE_U, POINCARE, (-0.5, 0.5)),
    (oracles.CUSP_U, CUSP, (0.2, 0.5)),
])
def test_curvature_matches_symbolic_and_is_second_order(u_expr, func, box):
    exact = oracles.symbolic_curvature(u_expr)
    errs = []
    for lev, h in enumerate([0.02, 0.01, 0.005]):
        g = ConformalGrid.from_function(func, h, box, box)
        X, Y = g.coords()
        err = np.abs(gauss_curvature(g) - exact(X, Y))
        errs.append(np.nanmax(err[:: 2**lev, :: 2**lev]))
    assert errs[0] < 5e-3
    assert errs[0] / errs[1] >= 3.5
    assert errs[1] / errs[2] >= 3.5


@given(st.floats(-3, 3), st.integers(0, 2**31 - 1))
def test_curvature_scales_under_constant_shift(kappa, seed):
    rng = np.random.default_rng(seed)
    g = ConformalGrid(0.3 * rng.standard_normal((6, 7)), 0.1)
    K = gauss_curvature(g)
    K2 = gauss_curvature(g.shifted(kappa))
    ok = np.isfinite(K)
    np.testing.assert_allclose(K2[ok], np.exp(-2 * kappa) * K[ok], rtol=1e-12, atol=1e-12)


# area
def test_unit_square_area():
    assert area(flat(0.01)) == pytest.approx(1.0, rel=0.03)


def test_stereographic_area_of_radius_ten_disc():
    g = ConformalGrid.from_function(SPHERE, 0.05, (-10, 10), (-10, 10), "sphere-stereographic",
                                    lambda X, Y: X * X + Y * Y < 100)
    assert area(g) == pytest.approx(oracles.stereographic_area(10.0), rel=0.05 * 0.05)


@given(st.floats(0.01, 100.0))
def test_area_scales_exactly(lam):
    g = ConformalGrid.from_function(SPHERE, 0.1, (-1, 1), (-1, 1))
    assert area(g.shifted(0.5 * math.log(lam))) == pytest.approx(lam * area(g), rel=1e-12)


def test_area_is_additive_and_rejects_empty_region():
    g = ConformalGrid.from_function(SPHERE, 0.1, (-1, 1), (-1, 1))
    X, _ = g.coords()
    left = X < 0
    assert area(g, left) + area(g, ~left) == pytest.approx(area(g), rel=1e-13)
    with pytest.raises(InvalidInput):
        area(g, np.zeros(g.shape, bool))


# distances
def test_flat_grid_distance():
    g = ConformalGrid.from_function(lambda X, Y: 0 * X, 0.05, (0, 3), (0, 4))
    assert distance(g, (0, 0), (60, 80)) == pytest.approx(5.0, rel=0.02)


def test_poincare_distance_from_center():
    g = make_model("poincare-disc", chart="grid", h=0.01)
    d = distance(g, g.nearest_node(0, 0), g.nearest_node(0.5, 0))
    assert d == pytest.approx(oracles.hyperbolic_center_distance(0.5), rel=0.03)


def test_disconnected_nodes_have_no_path():
    dom = np.ones((7, 7), bool)
    dom[3, :] = False
    g = ConformalGrid(np.where(dom, 0.0, np.nan), 0.1, domain=dom)
    with pytest.raises(NoPath):
        distance(g, (0, 0), (6, 6))


@given(st.integers(0, 2**31 - 1))
def test_grid_distance_is_a_metric(seed):
    rng = np.random.default_rng(seed)
    g = ConformalGrid(0.5 * rng.standard_normal((6, 6)), 0.2)
    pts = [tuple(p) for p in rng.integers(0, 6, (3, 2))]
    d = lambda a, b: distance(g, a, b)
    a, b, c = pts
    assert d(a, b) == d(b, a)
    assert d(a, c) <= d(a, b) + d(b, c) + 1e-12


def test_cone_vertex_to_unit_radius():
    for theta in (0.0, 1.0, 4.0):
        assert cone_distance(ConeSpace(0.5), (0, 0), (1, theta)) == pytest.approx(1.0, abs=1e-15)


def test_cone_distance_examples():
    assert cone_distance(ConeSpace(1.0), (1, 0), (1, math.pi / 2)) == pytest.approx(math.sqrt(2))
    assert cone_distance(ConeSpace(0.5), (1, 0), (1, math.pi)) == pytest.approx(math.sqrt(2))
    assert cone_distance(ConeSpace(0.5), (1, 0), (1, 3)) == pytest.approx(math.sqrt(2 - 2 * math.cos(1.5)))


@pytest.mark.parametrize("c", [0.0, -0.1, 1.2])
def test_cone_constant_out_of_range(c):
    with pytest.raises(InvalidInput):
        cone_distance(ConeSpace(c) if 0 < c <= 1 else c, (1, 0), (1, 1))


polar = st.tuples(st.floats(0, 5), st.floats(0, 2 * math.pi))


@given(polar, polar)
def test_unit_cone_is_the_plane(p, q):
    x1 = p[0] * complex(math.cos(p[1]), math.sin(p[1]))
    x2 = q[0] * complex(math.cos(q[1]), math.sin(q[1]))
    assert cone_distance(ConeSpace(1.0), p, q) == pytest.approx(abs(x1 - x2), abs=1e-12)


@given(st.floats(0.05, 1.0), polar, polar)
def test_cone_distance_matches_unrolled_oracle(c, p, q):
    assert cone_distance(ConeSpace(c), p, q) == pytest.approx(oracles.cone_unrolled(c, p, q), abs=1e-12)


@given(st.floats(0.05, 1.0), st.floats(0.01, 5.0))
def test_cone_vertex_ball_area(c, r):
    assert ConeSpace(c).ball_area((0, 0), r) == pytest.approx(math.pi * c * r * r, rel=1e-12)


@pytest.mark.parametrize("c", [0.3, 0.5, 0.9])
def test_cone_ball_area_against_symbolic_integral(c):
    assert ConeSpace(c).ball_area((0, 0), 1.5) == pytest.approx(oracles.cone_vertex_ball_area(c, 1.5), rel=1e-12)


def test_off_vertex_cone_ball_area_between_bounds():
    cone = ConeSpace(0.5)
    # a small ball away from the vertex is a flat disc
    assert cone.ball_area((2.0, 0.0), 0.5) == pytest.approx(math.pi * 0.25, rel=1e-9)
    # a ball containing the vertex loses area to the missing wedge
    assert cone.ball_area((1.0, 0.0), 2.0) < math.pi * 4


# models
def test_flat_model_is_zero():
    g = make_model("flat")
    assert np.all(g.u == 0)


def test_thin_cylinder_total_area():
    p = make_model("thin-cylinder", {"epsilon": 0.01, "length": 2.0})
    assert p.total_area() == pytest.approx(8 * math.pi * 0.01, rel=0.01)


@pytest.mark.parametrize("kind,params", [
    ("cone-smoothed", {"c": 1.2}), ("cone-smoothed", {"delta": 0.0}),
    ("thin-cylinder", {"circumference": -1.0}), ("round-sphere", {"radius": 0.0}), ("torus", {}),
])
def test_model_parameter_ranges(kind, params):
    with pytest.raises(InvalidInput):
        make_model(kind, params)


def test_smoothed_cone_is_c1_with_nonnegative_curvature():
    m = ModelMetric("cone-smoothed", {"c": 0.7, "delta": 0.1})
    s0, e = m.seam_s, 1e-7
    assert abs(m.w(s0 + e) - m.w(s0 - e)) < 1e-6
    left = (m.w(s0) - m.w(s0 - e)) / e
    right = (m.w(s0 + e) - m.w(s0)) / e
    assert left == pytest.approx(right, abs=1e-5)
    K = gauss_curvature(m.profile())
    assert np.nanmin(K) > -1e-6


def test_smoothed_cone_distances_approach_cone():
    cone = ConeSpace(0.7)
    P = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 2.5], [0.6, 4.0], [1.4, 1.0]])
    errs = []
    for d in (0.2, 0.1, 0.05):
        sc = SmoothedCone(0.7, d)
        Q = P.copy()
        Q[1:, 0] += sc.seam_distance - d  # same cone point measured from the tip
        errs.append(np.max(np.abs(sc.pairwise(Q) - cone.pairwise(P))))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.05


def test_sphere_double_chart_agrees_under_inversion():
    s = make_model("round-sphere")
    np.testing.assert_allclose(s.inverted().u, s.u, atol=1e-12)
    assert s.total_area() == pytest.approx(4 * math.pi, rel=1e-9)


def test_profile_rejects_unordered_nodes():
    with pytest.raises(InvalidInput):
        RadialProfile(np.array([1.0, 0.5, 2.0]), np.zeros(3))


def test_profile_ball_areas_match_closed_forms():
    s = make_model("round-sphere", n=4097)
    for r in (0.1, 1.0, 2.5):
        assert ball_area(s, "inner", r) == pytest.approx(oracles.sphere_ball_area(r), rel=1e-5)


# finite metric spaces
def test_fms_validation():
    with pytest.raises(InvalidInput):
        FiniteMetricSpace(np.array([[0, 1], [2, 0]], float))
    with pytest.raises(InvalidInput):
        FiniteMetricSpace(np.array([[0, 0], [0, 0]], float))
    with pytest.raises(TriangleViolation):
        FiniteMetricSpace(np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], float))


@given(st.integers(2, 7), st.integers(0, 2**31 - 1))
def test_metric_closure_produces_metrics(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.1, 2.0, (n, n))
    a = np.minimum(a, a.T)
    np.fill_diagonal(a, 0)
    d = metric_closure(a)
    FiniteMetricSpace(d)  # validates the triangle inequality
    assert np.all(d <= a + 1e-15)


def test_sample_single_point():
    f = sample_fms(flat(), (5, 5), 1.0, 1)
    assert f.n == 1 and f.basepoint == 0


def test_sample_flat_grid_is_a_metric():
    f = sample_fms(flat(), (5, 5), 1.0, 4)
    assert f.n == 4 and not f.short
    d = f.d
    for i in range(4):
        for j in range(4):
            for k in range(4):
                assert d[i, k] <= d[i, j] + d[j, k]


def test_short_sample_is_flagged():
    f = sample_fms(flat(), (5, 5), 0.05, 4)
    assert f.short and f.n == 1


def test_smoothed_cone_sample_diameter():
    f = sample_fms(SmoothedCone(0.7, 0.1), (0.0, 0.0), 1.0, 50)
    assert f.n == 50
    assert f.d.max() <= 2.0
    assert np.all(f.d[0] <= 1.0 + 1e-12)
