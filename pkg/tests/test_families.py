import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from millefeuille import families as F
from millefeuille import hypgeo as hg
from millefeuille.errors import (
    CrossingGeodesics, EmptyFamily, HypothesisViolated, MalformedSpec,
    NoSolution, ParameterOutOfRange,
)
from millefeuille.hypgeo import ORIGIN, Isometry, geodesic, point

warnings.filterwarnings("ignore", message="alpha/eta above 0.2")


def symmetric_pair(r):
    d = hg.distance_from_crossratio(r)
    return geodesic(-math.exp(-d / 2), math.exp(-d / 2)), geodesic(-math.exp(d / 2), math.exp(d / 2))


# ------------------------------------------------------------ construction 1

def test_construct1_depth0_pair():
    fam = F.construct1(0.01, 0)
    assert len(fam) == 2
    assert hg.cross_ratio_r(*fam.geodesics) == pytest.approx(0.01, abs=1e-9)
    # centrally symmetric about the origin: z -> -1/z swaps the two curves
    g1, g2 = fam.geodesics
    flip = Isometry(0.0, -1.0, 1.0, 0.0)
    assert flip(g1).e2.value == pytest.approx(g2.e2.value, rel=1e-12)
    assert hg.point_geodesic_distance(ORIGIN, g1) == pytest.approx(hg.point_geodesic_distance(ORIGIN, g2))


@pytest.mark.parametrize("alpha", [0.01, 0.05, 0.1])
@pytest.mark.parametrize("depth", [1, 2, 3])
def test_construct1_neighbor_crossratios(alpha, depth):
    fam = F.construct1(alpha, depth)
    nr = F.neighbor_crossratios(fam)
    assert len(nr) >= len(fam) - 1
    for r in nr.values():
        assert r == pytest.approx(alpha, abs=1e-9)


@pytest.mark.parametrize("alpha", [0.05, 0.1])
def test_construct1_verifies_at_alpha(alpha):
    fam = F.construct1(alpha, 3)
    rep = F.verify_geodesical(fam, alpha * (1 + 1e-6))
    assert rep["pass"] and rep["crossings"] == 0


def test_construct1_depth2_verifies():
    rep = F.verify_geodesical(F.construct1(0.01, 2), 0.0101)
    assert rep["pass"]


def test_construct1_first_generation_is_reflection_ladder():
    # Gamma_1 = semicircles about 0 with radii e^{(j+1/2)L}
    alpha = 0.1
    d = hg.distance_from_crossratio(alpha)
    fam = F.construct1(alpha, 1)
    hraw = fam.horizon * hg.scale_constant()
    radii = sorted(0.5 * (g.e2.value - g.e1.value) for g in fam.geodesics
                   if abs(g.e1.value + g.e2.value) < 1e-9 * g.e2.value)
    expect = [math.exp((j + 0.5) * d) for j in range(-40, 40) if abs(j + 0.5) * d <= hraw]
    assert np.allclose(radii, expect, rtol=1e-9)


def test_construct1_growth_and_horizon():
    sizes = [len(F.construct1(0.05, k)) for k in range(4)]
    assert sizes == sorted(sizes) and len(set(sizes)) == 4
    fam = F.construct1(0.05, 3, horizon=5.0)
    hraw = 5.0 * hg.scale_constant()
    assert max(hg.point_geodesic_distance(ORIGIN, g) for g in fam.geodesics) <= hraw + 1e-9


def test_construct1_rejects_bad_alpha():
    with pytest.raises(ParameterOutOfRange):
        F.construct1(1.5, 1)
    with pytest.raises(ParameterOutOfRange):
        F.construct1(0.0, 1)


def test_large_alpha_warns():
    with pytest.warns(UserWarning):
        F.FamilyParams(0.5, 0.5, 1)


# ------------------------------------------------------------ construction 2

def test_construct2_single_step():
    fam = F.construct2(0.05, 0.08, 1)
    assert len(fam) == 1
    assert hg.on_geodesic(ORIGIN, fam.geodesics[0])
    assert fam.sign_at(point(0.5, 1.0)) == 1
    assert fam.sign_at(point(-0.5, 1.0)) == -1


def test_construct2_fig3_count():
    assert len(F.construct2(0.05, 0.08, 18)) == 18


def region_probes(fam, eps=1e-3):
    """Points just on either side of every curve, at its foot from the origin."""
    pts = []
    for g in fam.geodesics:
        foot = hg.closest_point(g, ORIGIN)
        perp = hg.perpendicular_through(foot, g)
        zs = hg.sample_geodesic(perp, [-eps, eps], base=foot)
        pts.append(zs)
    return pts


@pytest.mark.parametrize("steps", [1, 2, 5, 12, 30])
def test_construct2_chessboard_regions(steps):
    fam = F.construct2(0.05, 0.1, steps)
    assert len(fam) == steps
    ends = fam.endpoints()
    probes = region_probes(fam)
    keys = set()
    for k, (z1, z2) in enumerate(probes):
        s1, s2 = fam.sign_of([z1, z2])
        assert s1 == -s2
        for z in (z1, z2):
            keys.add(tuple(bool(hg._side_hp(np.array([z]), a, b)[0] > 0) for a, b in ends))
    assert len(keys) == steps + 1


def test_construct2_neighbor_parameter_follows_phase():
    alpha, eta = 0.05, 0.12
    fam = F.construct2(alpha, eta, 40)
    assert F.verify_geodesical(fam, eta * (1 + 1e-6))["crossings"] == 0
    used = set()
    for (i, j), r in F.neighbor_crossratios(fam).items():
        _, f1, f2 = hg.common_perpendicular(fam.geodesics[i], fam.geodesics[j])
        mid = F._midpoint(f1, f2)
        expect = alpha if fam.sign_at(mid) > 0 else eta
        assert r == pytest.approx(expect, abs=1e-9)
        used.add(expect)
    assert used == {alpha, eta}


def test_construct2_phase_record_matches_region():
    fam = F.construct2(0.05, 0.12, 25)
    assert fam.phases[0] == 1
    assert set(fam.phases[1:]) == {1, -1}
    assert fam.cases[1] == "a"


def test_construct2_equal_params_prefix_matches_construct1():
    # the first strips are symmetric about the origin, so both constructions
    # place the same curves there
    a = 0.1
    d = hg.distance_from_crossratio(a)
    f2 = F.construct2(a, a, 10)
    f1 = F.construct1(a, 4)
    align = Isometry(math.exp(-d / 4), 0, 0, math.exp(d / 4)) @ Isometry.rotation_about(ORIGIN, math.pi / 2)
    th1 = F._disk_angles(f1.endpoints())
    th2 = F._disk_angles(np.array([hg._hp_ends(align(g)) for g in f2.geodesics]))
    for t in th2:
        assert np.abs(th1 - t).max(axis=1).min() < 1e-9


def test_construct2_selected_arc_advances_clockwise():
    fam = F.construct2(0.05, 0.05, 2)
    # after placing in the positive half-line the next arc is the negative one
    assert fam.selected_arc == (math.inf, 0.0)
    fam3 = F.construct2(0.05, 0.05, 3)
    assert fam3.geodesics[2].e2.value < 0


# ------------------------------------------------------------------ solvers

def test_double_crossratio_symmetric():
    g1 = geodesic(-3.0, -1.0)
    g2 = geodesic(1.0, 3.0)
    new = F.solve_double_crossratio(g1, g2, 0.05, arc=(-1.0, 1.0))
    assert new.e1.value == pytest.approx(-new.e2.value, abs=1e-9)
    assert hg.cross_ratio_r(new, g1) == pytest.approx(0.05, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.floats(0.05, 3), st.floats(0.01, 2), st.floats(0.05, 3), st.floats(1e-3, 0.9))
def test_double_crossratio_recomputed(t, w1, gap, w2, alpha):
    g1 = geodesic(t, t + w1)
    g2 = geodesic(t + w1 + gap, t + w1 + gap + w2)
    x, y = t + w1, t + w1 + gap
    new = F.solve_double_crossratio(g1, g2, alpha, arc=(x, y))
    assert hg.cross_ratio_r(new, g1) == pytest.approx(alpha, abs=1e-9)
    assert hg.cross_ratio_r(new, g2) == pytest.approx(alpha, abs=1e-9)
    assert x < new.e1.value < new.e2.value < y


def test_double_crossratio_default_arc_and_infinity():
    g1 = geodesic(0.0, math.inf)
    g2 = geodesic(1.0, 2.0)
    new = F.solve_double_crossratio(g2, g1, 0.1, arc=(2.0, math.inf))
    assert 2.0 < new.e1.value < new.e2.value
    assert hg.cross_ratio_r(new, g1) == pytest.approx(0.1, abs=1e-9)
    new2 = F.solve_double_crossratio(geodesic(-2.0, -1.0), geodesic(1.0, 2.0), 0.1)
    assert hg.cross_ratio_r(new2, geodesic(1.0, 2.0)) == pytest.approx(0.1, abs=1e-9)


def test_double_crossratio_tight_arc():
    x = 1.0
    g1 = geodesic(0.0, x)
    g2 = geodesic(x + 3e-12, 2.0)
    with pytest.raises(NoSolution):
        F.solve_double_crossratio(g1, g2, 0.999, arc=(x, x + 3e-12))


def test_perpendicular_push_symmetric():
    g = geodesic(-2.0, 2.0)
    new = F.solve_crossratio_perpendicular(g, 0.02, ORIGIN)
    assert new.e1.value == pytest.approx(-new.e2.value, rel=1e-12)
    assert new.e2.value > 2.0
    assert hg.cross_ratio_r(new, g) == pytest.approx(0.02, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.floats(-4, 4), st.floats(0.1, 5), st.floats(1e-4, 0.9))
def test_perpendicular_push_properties(c, r, alpha):
    g = geodesic(c - r, c + r)
    if hg.point_geodesic_distance(ORIGIN, g) < 1e-3:
        return
    new = F.solve_crossratio_perpendicular(g, alpha, ORIGIN)
    assert hg.cross_ratio_r(new, g) == pytest.approx(alpha, abs=1e-9)
    axis = hg.perpendicular_through(ORIGIN, g)
    assert not hg.crosses(new, g)
    # the axis meets the result at a right angle
    s = Isometry.to_standard(axis)
    a, b = sorted(s.apply_boundary(v) for v in hg._hp_ends(new))
    # orthogonal to (0, inf) means centered at 0
    assert a == pytest.approx(-b, rel=1e-9)
    # reflecting in the axis fixes the result setwise
    img = Isometry.reflection_in(axis)(new)
    assert np.allclose(F._disk_angles(np.array([hg._hp_ends(img)])),
                       F._disk_angles(np.array([hg._hp_ends(new)])), atol=1e-8)
    # pushed away from the origin
    assert hg.point_geodesic_distance(ORIGIN, new) > hg.point_geodesic_distance(ORIGIN, g)


def test_perpendicular_push_needs_side_on_axis():
    g = geodesic(0.0, math.inf)
    with pytest.raises(NoSolution):
        F.solve_crossratio_perpendicular(g, 0.1, ORIGIN)
    right = F.solve_crossratio_perpendicular(g, 0.1, ORIGIN, arc=(0.0, math.inf))
    left = F.solve_crossratio_perpendicular(g, 0.1, ORIGIN, arc=(math.inf, 0.0))
    assert right.e1.value > 0 and left.e2.value < 0
    assert right.e1.value * right.e2.value == pytest.approx(1.0)


# ------------------------------------------------------------- verification

def family_of(geos):
    fam = F.empty_family()
    fam.geodesics = list(geos)
    return fam


def test_verify_crossing_pair():
    rep = F.verify_geodesical(family_of([geodesic(-1, 1), geodesic(0, 2)]), 1.0)
    assert rep["crossings"] == 1 and not rep["pass"]


def test_verify_close_pair():
    # R = 2 needs d < L(1); pick the pair with R exactly 2
    g1, g2 = symmetric_pair(2.0)
    rep = F.verify_geodesical(family_of([g1, g2]), 1.0)
    assert rep["max_pairwise_R"] == pytest.approx(2.0, rel=1e-9)
    assert not rep["pass"]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=4, max_size=4, unique=True))
def test_pairwise_scan_matches_exact_crossratio(xs):
    xs = sorted(xs)
    if min(np.diff(xs)) < 1e-3:
        return
    pairs = [(geodesic(xs[0], xs[1]), geodesic(xs[2], xs[3])),
             (geodesic(xs[0], xs[3]), geodesic(xs[1], xs[2])),
             (geodesic(xs[0], math.inf), geodesic(xs[1], xs[3]))]
    for g1, g2 in pairs:
        rep = F.pairwise_report(family_of([g1, g2]))
        assert rep["max_pairwise_R"] == pytest.approx(hg.cross_ratio_r(g1, g2), rel=1e-8)


def test_sign_parity_by_ray_count():
    fam = F.construct1(0.05, 2)
    rng = np.random.default_rng(3)
    zs = rng.uniform(-3, 3, 200) + 1j * np.exp(rng.uniform(-3, 2, 200))
    signs = fam.sign_of(zs)
    # count crossings of the segment from the origin along the path i -> z
    for z, s in zip(zs[:40], signs[:40]):
        ts = np.linspace(0, 1, 4001)
        path = 1j + ts * (z - 1j)
        path = path.real + 1j * np.maximum(path.imag, 1e-9)
        flips = 0
        for a, b in fam.endpoints():
            side = hg._side_hp(path, a, b)
            flips += int(np.count_nonzero(np.diff(side) != 0))
        assert s == (1 if flips % 2 == 0 else -1)


# ----------------------------------------------------------------- surgery

def test_surgery_identity_zero():
    g1, g2 = symmetric_pair(0.01)
    par, _ = F.swap_surgeries(g1, g2)
    ident = F.SurgerySpec(par.points, (0, 1, 2, 3), par.curves)
    assert F.surgery_increment(ident) == 0.0


def test_surgery_swap_bound():
    g1, g2 = symmetric_pair(0.01)
    d12 = hg.geodesic_distance(g1, g2)
    par, crossed = F.swap_surgeries(g1, g2, t=15.0)
    dpar = F.surgery_increment(par)
    dcross = F.surgery_increment(crossed)
    assert dpar >= 2 * d12 - 4 * (2 * math.log(2)) - 0.1
    assert dcross > dpar > 0


def test_surgery_malformed():
    g1, g2 = symmetric_pair(0.01)
    par, _ = F.swap_surgeries(g1, g2)
    with pytest.raises(MalformedSpec):
        F.surgery_increment(F.SurgerySpec(par.points, (0, 0, 1, 2)))
    with pytest.raises(MalformedSpec):
        F.surgery_increment(F.SurgerySpec(par.points[:3], (0, 1, 2)))
    with pytest.raises(MalformedSpec):
        F.surgery_increment(F.SurgerySpec(par.points, (0, 1, 2, 3), (g2, g1)))


def test_surgery_positive_on_family_pairs():
    fam = F.construct1(0.05, 2)
    geos = fam.geodesics[:8]
    for i in range(len(geos)):
        for j in range(i + 1, len(geos)):
            for spec in F.swap_surgeries(geos[i], geos[j], t=12.0):
                assert F.surgery_increment(spec) > 0


def truncated_length_oracle(g, center, T):
    """Length of g inside the disc of radius T, by root finding on samples."""
    foot = hg.closest_point(g, center)
    h = hg.point_distance(foot, center)
    if h >= T:
        return 0.0

    def f(t):
        z = hg.sample_geodesic(g, [t], base=foot)[0]
        return hg.point_distance(point(z.real, z.imag), center) - T
    hi = 1.0
    while f(hi) < 0:
        hi *= 2
    t1 = brentq(f, 0.0, hi, xtol=1e-13)
    lo = -1.0
    while f(lo) < 0:
        lo *= 2
    t0 = brentq(f, lo, 0.0, xtol=1e-13)
    return t1 - t0


def test_length_in_disc_matches_oracle():
    center = point(0.3, 0.7)
    for g in [geodesic(-1, 2), geodesic(0.5, math.inf), geodesic(3, 4)]:
        h = hg.point_geodesic_distance(center, g)
        for T in (h + 0.5, h + 3.0, 12.0):
            assert F._length_in_disc(h, T) == pytest.approx(truncated_length_oracle(g, center, T), abs=1e-8)


def test_wrong_pairing_small_r():
    g1, g2 = symmetric_pair(1e-4)
    s = F.wrong_pairing_surplus(g1, g2)
    assert 0.8 <= s / (2 * math.log(1e4)) <= 1.2


@pytest.mark.parametrize("r", [0.5, 0.1, 1e-2, 1e-3])
def test_wrong_pairing_closed_form(r):
    # measured relation, exact to the truncation tolerance
    g1, g2 = symmetric_pair(r)
    assert F.wrong_pairing_surplus(g1, g2) == pytest.approx(2 * math.log(1 / r), abs=1e-5)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(0.05, 3), st.floats(0.01, 3), st.floats(0.05, 3))
def test_wrong_pairing_sign_and_symmetry(t, w1, gap, w2):
    g1 = geodesic(t, t + w1)
    g2 = geodesic(t + w1 + gap, t + w1 + gap + w2)
    s = F.wrong_pairing_surplus(g1, g2)
    # the crossed pairing is longer exactly for pairs with R < 1
    r = hg.cross_ratio_r(g1, g2)
    if abs(r - 1) > 1e-6:
        assert (s > 0) == (r < 1)
    assert F.wrong_pairing_surplus(g2, g1) == pytest.approx(s, abs=1e-5)


def test_wrong_pairing_crossing():
    with pytest.raises(CrossingGeodesics):
        F.wrong_pairing_surplus(geodesic(-1, 1), geodesic(0, 2))


# ----------------------------------------------------------------- density

def test_density_empty():
    with pytest.raises(EmptyFamily):
        F.density_radius(F.empty_family())


def test_density_decreases_with_depth():
    r3 = F.density_radius(F.construct1(0.05, 3), window_radius=5.0, samples=3000)
    r4 = F.density_radius(F.construct1(0.05, 4), window_radius=5.0, samples=3000)
    assert math.isfinite(r3) and 0 < r3 < 5.0
    assert r4 <= r3 + 1e-12


def test_disc_samples_inside_window():
    center = point(1.0, 2.0)
    zs = F.hyperbolic_disc_samples(center, 3.0, 500)
    d = hg.halfplane_distance(zs, np.full(zs.shape, center.z))
    assert d.max() <= 3.0 + 1e-9
    # area-uniform: about half the points beyond the median-area radius
    rm = math.acosh(1 + 0.5 * (math.cosh(3.0) - 1))
    assert abs(np.mean(d > rm) - 0.5) < 0.01


# ------------------------------------------------------------------- decay

def test_decay_single_term():
    p = F.decay_profile([(2.0, 0.5)], 10.0, 2.0)
    assert len(p.terms) == 1
    assert p.terms[0][1] == pytest.approx(hg.geodesic_distance(geodesic(-11, -9), geodesic(1.5, 2.5)))


def test_decay_max_packing_x10():
    p = F.decay_profile(F.max_packing(10.0), 10.0, 2.0)
    assert p.sum <= 1e-3


@pytest.mark.parametrize("X", [50.0, 100.0, 1000.0])
def test_decay_formula_offset_is_ln4(X):
    p = F.decay_profile(F.max_packing(X), X, 2.0)
    for _, dist, formula in p.terms:
        assert dist - formula == pytest.approx(math.log(4), abs=2e-3)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from([10.0, 30.0, 100.0]), st.floats(1.05, 4.0))
def test_decay_sum_below_bound(seed, X, beta):
    circles = F.random_packing(X, np.random.default_rng(seed))
    if not circles:
        return
    p = F.decay_profile(circles, X, beta)
    assert p.sum <= p.bound


def test_decay_hypotheses():
    with pytest.raises(HypothesisViolated):
        F.decay_profile([(2.0, 0.6)], 10.0, 2.0)
    with pytest.raises(HypothesisViolated):
        F.decay_profile([(2.0, 0.5), (2.5, 0.5)], 10.0, 2.0)
    with pytest.raises(HypothesisViolated):
        F.decay_profile([(2.0, 0.5)], 10.0, 1.0)


# -------------------------------------------------------------------- json

def test_family_json_roundtrip():
    for fam in (F.construct1(0.05, 2), F.construct2(0.05, 0.1, 12)):
        text = json.dumps(F.family_to_json(fam))
        back = F.family_from_json(json.loads(text))
        assert len(back) == len(fam)
        assert back.construction == fam.construction
        assert np.array_equal(back.endpoints(), fam.endpoints())
        zs = np.array([0.3 + 0.8j, -2 + 0.1j, 5 + 3j])
        assert np.array_equal(back.sign_of(zs), fam.sign_of(zs))
