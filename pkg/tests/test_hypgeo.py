import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq, minimize, minimize_scalar

from millefeuille.errors import CrossingGeodesics, DegenerateQuadruple, ModelMismatch
from millefeuille.hypgeo import (
    DISK, HALFPLANE, INF, ORIGIN, BoundaryPoint, Isometry, ModelPoint,
    closest_point, common_perpendicular, convert_model, cross_ratio_r,
    cross_ratio_r_points, cross_ratio_rbar, crosses, distance_from_crossratio,
    geodesic, geodesic_distance, geodesic_from_json, geodesic_to_json,
    intersection_angle, perpendicular_through, point, point_distance,
    point_geodesic_distance, reflect_geodesic, reflect_point, sample_geodesic,
    scale_constant, scaled_distance, side,
)

finite = st.floats(-50, 50, allow_nan=False)


def brute_geodesic_distance(g1, g2):
    """Minimize point distance over arc-length parameters of both curves."""
    def f(ts):
        z1 = sample_geodesic(g1, [ts[0]])[0]
        z2 = sample_geodesic(g2, [ts[1]])[0]
        return point_distance(point(z1.real, z1.imag), point(z2.real, z2.imag))
    best = min((minimize(f, x0, method="Nelder-Mead",
                         options={"xatol": 1e-11, "fatol": 1e-13, "maxiter": 20000})
                for x0 in ([0, 0], [2, -2], [-2, 2])), key=lambda r: r.fun)
    return best.fun


def random_quadruple(rng):
    while True:
        q = rng.uniform(-20, 20, size=4)
        if np.min(np.abs(np.subtract.outer(q, q)) + np.eye(4)) > 1e-3:
            return q


# ------------------------------------------------------------ cross-ratios

def test_rbar_example():
    assert cross_ratio_rbar(-3, -1, 1, 3) == pytest.approx(4 / 3, abs=1e-15)


def test_rbar_shift_invariant():
    q = np.array([-2.5, 0.3, 1.7, 9.0])
    assert cross_ratio_rbar(*(q + 5)) == pytest.approx(cross_ratio_rbar(*q), abs=1e-12)


def test_rbar_degenerate():
    with pytest.raises(DegenerateQuadruple):
        cross_ratio_rbar(1.0, 2.0, 1.0, 3.0)


def test_r_examples():
    assert cross_ratio_r(geodesic(-3, -1), geodesic(1, 3)) == pytest.approx(1 / 3, abs=1e-15)
    assert cross_ratio_r(geodesic(-2, -1), geodesic(1, 2)) == pytest.approx(1 / 8, abs=1e-15)


@pytest.mark.parametrize("x", [2, 3, 5, 10, 100])
def test_r_closed_form(x):
    r = cross_ratio_r_points(-x - 1, -x + 1, x - 1, x + 1)
    assert abs(r - 1 / (x * x - 1)) < 1e-12


def test_rbar_minus_r_is_one():
    rng = np.random.default_rng(0)
    for _ in range(2000):
        q = random_quadruple(rng)
        assert abs(cross_ratio_rbar(*q) - cross_ratio_r_points(*q) - 1) < 1e-12 * max(1, abs(cross_ratio_rbar(*q)))


def test_infinite_endpoint_limits():
    # R with an infinite point equals the limit of large finite values
    for pos in range(4):
        q = [-3.0, -1.0, 1.0, 3.0]
        q[pos] = INF
        qf = list(q)
        qf[pos] = 1e9 if pos == 3 else (-1e9 if pos == 0 else None)
        if qf[pos] is None:
            continue
        assert cross_ratio_rbar(*q) == pytest.approx(cross_ratio_rbar(*qf), rel=1e-7)
        assert cross_ratio_r_points(*q) == pytest.approx(cross_ratio_r_points(*qf), rel=1e-7)


def test_r_nested_pair_matches_concentric_distance():
    # concentric semicircles of radii 1 and 3 are ln 3 apart
    g1, g2 = geodesic(-3, 3), geodesic(-1, 1)
    assert cross_ratio_r(g1, g2) == pytest.approx(3.0)
    assert geodesic_distance(g1, g2) == pytest.approx(math.log(3), abs=1e-12)


def test_r_invariant_under_isometries():
    rng = np.random.default_rng(1)
    for _ in range(300):
        q = np.sort(random_quadruple(rng))
        g1, g2 = geodesic(q[0], q[1]), geodesic(q[2], q[3])
        m = Isometry.random(rng, scale=1.5)
        assert cross_ratio_r(m(g1), m(g2)) == pytest.approx(cross_ratio_r(g1, g2), rel=1e-9, abs=1e-12)


def test_r_same_in_both_models():
    g1, g2 = geodesic(-5, -0.5), geodesic(0.2, 7)
    d1, d2 = convert_model(g1, DISK), convert_model(g2, DISK)
    assert cross_ratio_r(d1, d2) == pytest.approx(cross_ratio_r(g1, g2), abs=1e-10)


# -------------------------------------------------------------- distances

def test_point_distance_examples():
    assert point_distance(point(0, 1), point(0, math.e)) == pytest.approx(1.0, abs=1e-15)
    assert point_distance(point(-2, 1), point(2, 1)) == pytest.approx(math.acosh(9), abs=1e-12)


def test_point_distance_symmetric_and_model_free():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        p = point(rng.uniform(-5, 5), rng.uniform(0.1, 5))
        q = point(rng.uniform(-5, 5), rng.uniform(0.1, 5))
        d = point_distance(p, q)
        assert d == point_distance(q, p)
        assert point_distance(convert_model(p, DISK), convert_model(q, DISK)) == pytest.approx(d, abs=1e-9)
    assert point_distance(point(1, 2), point(1, 2)) == 0.0


def test_point_distance_model_mismatch():
    with pytest.raises(ModelMismatch):
        point_distance(point(0, 1), ModelPoint(0, 0, DISK))


def test_geodesic_distance_identical_is_zero():
    g = geodesic(-1, 4)
    assert geodesic_distance(g, g) == 0.0


def test_geodesic_distance_crossing_flag():
    d, flag = geodesic_distance(geodesic(-1, 1), geodesic(0, 2), with_flag=True)
    assert d == 0.0 and flag
    d, flag = geodesic_distance(geodesic(-1, 1), geodesic(2, 3), with_flag=True)
    assert d > 0 and not flag


def test_far_pair_distance_against_minimization():
    # the +-100 unit semicircles: distance is ln(4 x^2) to leading order,
    # not ln(x^2); the oracle is direct minimization over both curves
    g1, g2 = geodesic(-101, -99), geodesic(99, 101)
    d = geodesic_distance(g1, g2)
    assert d == pytest.approx(brute_geodesic_distance(g1, g2), abs=1e-6)
    assert d == pytest.approx(2 * math.asinh(math.sqrt(100.0 ** 2 - 1)), abs=1e-12)
    assert d - math.log(100.0 ** 2) == pytest.approx(math.log(4), abs=1e-3)


def test_geodesic_distance_equals_feet_distance():
    rng = np.random.default_rng(3)
    for _ in range(200):
        q = np.sort(random_quadruple(rng))
        g1, g2 = geodesic(q[0], q[1]), geodesic(q[2], q[3])
        _, f1, f2 = common_perpendicular(g1, g2)
        assert point_distance(f1, f2) == pytest.approx(geodesic_distance(g1, g2), abs=1e-9)


def test_scale_constant():
    d0 = scale_constant()
    assert d0 == pytest.approx(2 * math.asinh(1.0), abs=1e-12)
    s = math.sqrt(2)
    assert scaled_distance(geodesic(-s - 1, -s + 1), geodesic(s - 1, s + 1)) == pytest.approx(1.0, abs=1e-9)
    # an independent pair with R = 1: the vertical axis and a semicircle (1, t)
    t = brentq(lambda t: cross_ratio_r(geodesic(0, INF), geodesic(1, t)) - 1.0, 1.5, 100.0, xtol=1e-15)
    g1, g2 = geodesic(0, INF), geodesic(1, t)
    _, f1, f2 = common_perpendicular(g1, g2)
    assert point_distance(f1, f2) == pytest.approx(d0, abs=1e-9)


def test_scaled_distance_diverges():
    vals = [scaled_distance(geodesic(-x - 1, -x + 1), geodesic(x - 1, x + 1)) for x in (2, 10, 100, 1e4)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 10


def test_monotone_in_crossratio():
    xs = np.linspace(1.5, 40, 60)
    rs = [cross_ratio_r(geodesic(-x - 1, -x + 1), geodesic(x - 1, x + 1)) for x in xs]
    ds = [geodesic_distance(geodesic(-x - 1, -x + 1), geodesic(x - 1, x + 1)) for x in xs]
    order = np.argsort(rs)
    assert np.all(np.diff(np.array(ds)[order]) < 0)


def test_distance_ratio_trend():
    # d / ln(1/alpha) decreases to 1; the gap d - ln(1/alpha) tends to ln 4
    alphas = [10.0 ** -k for k in range(2, 9)]
    ratios = [distance_from_crossratio(a) / math.log(1 / a) for a in alphas]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert all(r > 1 for r in ratios)
    gap = distance_from_crossratio(1e-8) - math.log(1e8)
    assert gap == pytest.approx(math.log(4), abs=1e-7)


# ------------------------------------------------------ reflections etc.

def test_reflect_examples():
    r = reflect_geodesic(geodesic(3, 5), geodesic(-1, 1))
    assert r.e1.value == pytest.approx(1 / 5, abs=1e-15)
    assert r.e2.value == pytest.approx(1 / 3, abs=1e-15)
    g = geodesic(-2, 7)
    back = reflect_geodesic(g, g)
    assert back.e1.value == pytest.approx(-2) and back.e2.value == pytest.approx(7)


def test_reflect_twice_identity():
    rng = np.random.default_rng(4)
    for _ in range(200):
        q = random_quadruple(rng)
        g, m = geodesic(q[0], q[1]), geodesic(q[2], q[3])
        gg = reflect_geodesic(reflect_geodesic(g, m), m)
        assert gg.e1.value == pytest.approx(g.e1.value, abs=1e-9)
        assert gg.e2.value == pytest.approx(g.e2.value, abs=1e-9)


def test_reflection_is_isometry():
    m = geodesic(-0.5, 3.0)
    p, q = point(0.3, 0.7), point(-2.0, 1.5)
    assert point_distance(reflect_point(p, m), reflect_point(q, m)) == pytest.approx(point_distance(p, q), abs=1e-12)


def test_common_perpendicular_example():
    perp, f1, f2 = common_perpendicular(geodesic(-3, -1), geodesic(1, 3))
    assert perp.e1.value == pytest.approx(-math.sqrt(3), abs=1e-12)
    assert perp.e2.value == pytest.approx(math.sqrt(3), abs=1e-12)
    with pytest.raises(CrossingGeodesics):
        common_perpendicular(geodesic(-1, 1), geodesic(0, 2))


def test_common_perpendicular_orthogonal():
    rng = np.random.default_rng(5)
    for _ in range(200):
        q = np.sort(random_quadruple(rng))
        pairs = [(geodesic(q[0], q[1]), geodesic(q[2], q[3])),
                 (geodesic(q[0], q[3]), geodesic(q[1], q[2])),
                 (geodesic(q[0], INF), geodesic(q[1], q[2]))]
        for g1, g2 in pairs:
            perp, f1, f2 = common_perpendicular(g1, g2)
            assert point_geodesic_distance(f1, g1) < 1e-9 and point_geodesic_distance(f2, g2) < 1e-9
            assert intersection_angle(perp, g1, f1) == pytest.approx(math.pi / 2, abs=1e-9)
            assert intersection_angle(perp, g2, f2) == pytest.approx(math.pi / 2, abs=1e-9)


def test_perpendicular_through_examples():
    g = geodesic(0, INF)
    perp = perpendicular_through(point(0, 5), g)
    assert (perp.e1.value, perp.e2.value) == pytest.approx((-5.0, 5.0))
    # reflecting p across the perpendicular fixes g setwise
    p = point(2.0, 0.5)
    perp = perpendicular_through(p, geodesic(-1, 3))
    img = reflect_geodesic(geodesic(-1, 3), perp)
    assert (img.e1.value, img.e2.value) == pytest.approx((-1.0, 3.0), abs=1e-12)
    assert point_geodesic_distance(p, perp) < 1e-12


def test_closest_point_examples():
    c = closest_point(geodesic(-1, 1), point(0, 5))
    assert (c.x, c.y) == pytest.approx((0.0, 1.0), abs=1e-12)
    p = point(0.25, 0.5)
    g = geodesic(-1, 1)
    q = closest_point(g, point(0.3, math.sqrt(1 - 0.09)))
    assert (q.x, q.y) == pytest.approx((0.3, math.sqrt(1 - 0.09)), abs=1e-12)
    # 1-D minimization over an arc-length parameterization
    f = lambda t: point_distance(p, point(*_xy(sample_geodesic(g, [t])[0])))
    res = minimize_scalar(f, bounds=(-10, 10), method="bounded", options={"xatol": 1e-12})
    c = closest_point(g, p)
    assert point_distance(p, c) == pytest.approx(res.fun, abs=1e-6)
    assert point_geodesic_distance(p, g) == pytest.approx(res.fun, abs=1e-6)


def _xy(z):
    return z.real, z.imag


def test_perpendicular_foot_is_closest():
    rng = np.random.default_rng(6)
    for _ in range(100):
        q = np.sort(rng.uniform(-5, 5, 2))
        g = geodesic(*q)
        p = point(rng.uniform(-5, 5), rng.uniform(0.2, 3))
        perp = perpendicular_through(p, g)
        c = closest_point(g, p)
        assert point_geodesic_distance(c, perp) < 1e-9
        assert intersection_angle(perp, g, c) == pytest.approx(math.pi / 2, abs=1e-9)


# -------------------------------------------------------------- models

def test_convert_round_trip():
    assert convert_model(ORIGIN, DISK).z == pytest.approx(0j, abs=1e-15)
    back = convert_model(convert_model(ORIGIN, DISK), HALFPLANE)
    assert (back.x, back.y) == pytest.approx((0.0, 1.0), abs=1e-15)
    rng = np.random.default_rng(7)
    for _ in range(500):
        p = point(rng.uniform(-10, 10), rng.uniform(0.05, 10))
        b = convert_model(convert_model(p, DISK), HALFPLANE)
        assert (b.x, b.y) == pytest.approx((p.x, p.y), abs=1e-12 * max(1, abs(p.x), p.y) ** 2)
        x = rng.uniform(-10, 10)
        bp = convert_model(convert_model(BoundaryPoint(x), DISK), HALFPLANE)
        assert bp.value == pytest.approx(x, abs=1e-12 * max(1, x * x))


def test_boundary_stays_on_absolute():
    b = convert_model(BoundaryPoint(INF), DISK)
    assert b.value == 0.0
    assert convert_model(BoundaryPoint(0.0), DISK).value == pytest.approx(math.pi)
    assert convert_model(BoundaryPoint(0.0, DISK), HALFPLANE).is_infinite


def test_orientation_counterclockwise():
    xs = [-3.0, -1.0, 0.0, 0.5, 2.0, 40.0]
    angles = [convert_model(BoundaryPoint(x), DISK).value for x in xs]
    assert all(b > a for a, b in zip(angles, angles[1:]))


def test_disk_geodesic_canonical_shorter_arc():
    g = geodesic(0.1, 6.0, DISK)
    assert g.e1.value == pytest.approx(6.0) and g.e2.value == pytest.approx(0.1)


def test_side_of_geodesic():
    g = geodesic(-1, 1)
    assert side(point(0, 0.5), g) == -1 and side(point(0, 2), g) == 1
    v = geodesic(0, INF)
    assert side(point(1, 1), v) == 1 and side(point(-1, 1), v) == -1


def test_json_round_trip():
    for g in (geodesic(-1, INF), geodesic(0.25, 3.5), geodesic(1.0, 2.0, DISK)):
        h = geodesic_from_json(geodesic_to_json(g))
        assert h == g
    assert geodesic_to_json(geodesic(2, INF))["e2"] == "inf"


def test_isometry_composition_and_inverse():
    rng = np.random.default_rng(8)
    for _ in range(100):
        f, g = Isometry.random(rng), Isometry.random(rng)
        z = complex(rng.uniform(-3, 3), rng.uniform(0.1, 3))
        assert complex((f @ g).apply_complex(z)) == pytest.approx(complex(f.apply_complex(g.apply_complex(z))), abs=1e-9)
        assert complex(f.inverse().apply_complex(f.apply_complex(z))) == pytest.approx(z, abs=1e-9)


def test_translation_along_moves_by_distance():
    g = geodesic(-2, 5)
    p = closest_point(g, ORIGIN)
    q = Isometry.translation_along(g, 1.7)(p)
    assert point_distance(p, q) == pytest.approx(1.7, abs=1e-12)
    assert point_geodesic_distance(q, g) < 1e-12


# ----------------------------------------------------------- properties

@settings(max_examples=300, deadline=None)
@given(st.lists(finite, min_size=4, max_size=4, unique=True))
def test_property_rbar_minus_r(q):
    q = np.array(q)
    if np.min(np.abs(np.subtract.outer(q, q)) + np.eye(4)) < 1e-6:
        return
    rb = cross_ratio_rbar(*q)
    assert abs(rb - cross_ratio_r_points(*q) - 1) < 1e-12 * max(1.0, abs(rb))


@settings(max_examples=300, deadline=None)
@given(st.floats(0.01, 8), st.floats(0.01, 8))
def test_property_right_triangle(a, b):
    # right angle at Y = i between the vertical axis and the unit semicircle
    x = point(0.0, math.exp(a))
    zt = Isometry.translation_along(geodesic(-1, 1), b)(ORIGIN)
    c = point_distance(x, zt)
    assert math.cosh(c) == pytest.approx(math.cosh(a) * math.cosh(b), rel=1e-9)
    assert c >= a + b - 2 * math.log(2) - 1e-12


@settings(max_examples=200, deadline=None)
@given(st.floats(-10, 10), st.floats(0.01, 10), st.floats(0.01, 5))
def test_property_distance_decreases_with_crossratio(c, r, gap):
    g1 = geodesic(c - r, c + r)
    g2 = geodesic(c + r + gap, c + r + gap + 1.0)
    g3 = geodesic(c + r + 2 * gap, c + r + 2 * gap + 1.0)
    if cross_ratio_r(g1, g3) < cross_ratio_r(g1, g2):
        assert geodesic_distance(g1, g3) > geodesic_distance(g1, g2)


def test_crosses_predicate():
    assert crosses(geodesic(-1, 1), geodesic(0, 5))
    assert not crosses(geodesic(-1, 1), geodesic(2, 5))
    assert not crosses(geodesic(-3, 3), geodesic(-1, 1))
    assert crosses(geodesic(0, INF), geodesic(-1, 1))
