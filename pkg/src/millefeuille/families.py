"""Geodesical families: the two constructions, verification and the
length/decay estimates built on them.

Everything is computed in the upper half-plane with the origin at i.
Construction 1 puts the common perpendicular of the initial pair on the
imaginary axis; Construction 2 starts from the imaginary axis itself with the
positive half-line as the selected arc and the right half-plane in the
(+)-phase.
"""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import hypgeo as hg
from .errors import (
    ConvergenceFailure, CrossingGeodesics, DegenerateQuadruple, EmptyFamily,
    HypothesisViolated, MalformedSpec, NoSolution, ParameterOutOfRange,
)
from .hypgeo import HALFPLANE, INF, ORIGIN, Isometry, ModelPoint

# default horizon in units of the scale constant d0; see the README for why
# this is far below what double precision would need for larger values
DEFAULT_HORIZON = 8.0


@dataclass(frozen=True)
class FamilyParams:
    alpha: float
    eta: float
    depth_or_steps: int

    def __post_init__(self):
        for name in ("alpha", "eta"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ParameterOutOfRange(f"{name} must lie in (0, 1), got {v}")
        if self.depth_or_steps < 0:
            raise ParameterOutOfRange("depth/steps must be non-negative")
        if max(self.alpha, self.eta) > 0.2:
            warnings.warn("alpha/eta above 0.2 is outside the small-parameter regime", stacklevel=3)


@dataclass
class SignedGeodesicFamily:
    """Ordered geodesics plus a parity sign rule.

    The sign of a point is base_sign * (-1)^(number of geodesics separating
    it from base_point).
    """
    geodesics: list
    params: FamilyParams
    construction: str
    base_point: ModelPoint = ORIGIN
    base_sign: int = 1
    selected_arc: tuple = None
    seed_arc: tuple = None
    horizon: float = None
    phases: list = field(default_factory=list)
    cases: list = field(default_factory=list)

    def __len__(self):
        return len(self.geodesics)

    def endpoints(self):
        """(N, 2) array of half-plane endpoints (inf allowed)."""
        if not self.geodesics:
            return np.zeros((0, 2))
        return np.array([[g.e1.value, g.e2.value] for g in self.geodesics], dtype=float)

    def sign_of(self, z):
        """Sign at half-plane complex point(s) z."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return self.base_sign * parity_signs(self.endpoints(), z, self.base_point.z)

    def sign_at(self, p):
        z = hg._hp_point(p)
        return int(self.sign_of(z)[0])


def parity_signs(ends, z, base):
    """(-1)^(number of geodesics separating z from base)."""
    z = np.asarray(z, dtype=complex)
    flips = np.zeros(z.shape, dtype=np.int64)
    for a, b in ends:
        s_base = hg._side_hp(np.array([base]), a, b)[0] > 0
        flips += (hg._side_hp(z, a, b) > 0) != s_base
    return np.where(flips % 2 == 0, 1, -1)


def min_side_distance(ends, z):
    """Distance from each point of z to the nearest geodesic."""
    z = np.asarray(z, dtype=complex)
    best = np.full(z.shape, np.inf)
    for a, b in ends:
        best = np.minimum(best, hg._point_geodesic_hp(z, a, b))
    return best


# ----------------------------------------------------------------- solvers

def _arc_map(x, y):
    """Orientation preserving isometry taking x -> 0 and y -> infinity.

    The counterclockwise arc from x to y goes to the positive half-line.
    """
    if math.isinf(y):
        return Isometry(1.0, -x, 0.0, 1.0)
    if math.isinf(x):
        return Isometry(0.0, 1.0, -1.0, y)
    if x > y:
        return Isometry(1.0, -x, 1.0, -y)
    return Isometry(-1.0, x, 1.0, -y)


def _other_end(g, x):
    a, b = hg._hp_ends(g)
    if hg._same_boundary(a, x, HALFPLANE):
        return b
    if hg._same_boundary(b, x, HALFPLANE):
        return a
    raise ValueError("point is not an end of the geodesic")


def _in_ccw_arc(p, x, y):
    """Whether boundary value p lies strictly inside the ccw arc from x to y."""
    if hg._same_boundary(p, x, HALFPLANE) or hg._same_boundary(p, y, HALFPLANE):
        return False
    m = _arc_map(x, y)
    q = m.apply_boundary(p)
    return (not math.isinf(q)) and q > 0


def solve_double_crossratio(g_left, g_right, alpha, arc=None):
    """The geodesic (u, v) inside the free arc between g_left and g_right with
    R(new, g_left) = R(new, g_right) = alpha.

    `arc` = (x, y) is the counterclockwise arc from an end x of g_left to an
    end y of g_right.  Without it the unique arc joining an end of g_left to
    an end of g_right and containing no other of their ends is used.
    """
    if not (0.0 < alpha):
        raise ParameterOutOfRange("alpha must be positive")
    if arc is None:
        arc = _adjacent_arc(g_left, g_right)
    x, y = (hg._hp_value(p) for p in arc)
    t = _other_end(g_left, x)
    z = _other_end(g_right, y)
    m = _arc_map(x, y)
    tp, zp = m.apply_boundary(t), m.apply_boundary(z)
    if not (zp < tp < 0):
        raise NoSolution("arc is not free between the two geodesics")
    at, az = -tp, -zp
    # (1 + a) u^2 + a |z'| u - |t'||z'| = 0, then v = u + a (u + |z'|)
    disc = alpha * alpha * az * az + 4.0 * (1.0 + alpha) * az * at
    u = 2.0 * az * at / (alpha * az + math.sqrt(disc))
    v = u + alpha * (u + az)
    minv = m.inverse()
    try:
        g = hg.geodesic(minv.apply_boundary(u), minv.apply_boundary(v))
    except DegenerateQuadruple as exc:
        raise NoSolution("arc too tight for the requested cross-ratio") from exc
    for e in hg._hp_ends(g):
        if not _in_ccw_arc(e, x, y):
            raise NoSolution("solution left the arc (numerical collapse)")
    _check_residual(g, g_left, alpha)
    _check_residual(g, g_right, alpha)
    return g


def _check_residual(g, h, alpha, tol=1e-9):
    r = hg.cross_ratio_r(g, h)
    if not abs(r - alpha) <= tol * max(1.0, alpha) and not abs(r - alpha) <= 1e-7 * alpha:
        raise ConvergenceFailure(f"cross-ratio residual {r - alpha:.3e}")


def _adjacent_arc(g1, g2):
    ends = [(v, 0) for v in hg._hp_ends(g1)] + [(v, 1) for v in hg._hp_ends(g2)]
    ends.sort(key=lambda e: e[0])
    for i in range(4):
        (p, gi), (q, gj) = ends[i], ends[(i + 1) % 4]
        if gi == 0 and gj == 1:
            return p, q
    raise NoSolution("geodesics cross")


def solve_crossratio_perpendicular(g, alpha, origin=ORIGIN, arc=None):
    """Push g by the cross-ratio alpha along the perpendicular from origin.

    The result (u, v) is orthogonal to the geodesic through origin
    perpendicular to g, has R(g, result) = alpha and lies on the side of g
    given by `arc` (the counterclockwise arc between the two ends of g);
    by default the side away from origin.
    """
    if not (0.0 < alpha):
        raise ParameterOutOfRange("alpha must be positive")
    s = Isometry.to_standard(g)
    p = complex(s.apply_complex(hg._hp_point(origin)))
    r = abs(p)
    scale = Isometry(1.0 / math.sqrt(r), 0.0, 0.0, math.sqrt(r))
    m = scale @ s
    a, b = hg._hp_ends(g)
    if arc is not None:
        x = hg._hp_value(arc[0])
        positive = hg._same_boundary(x, a, HALFPLANE)
    else:
        if abs(p.real) <= 1e-14 * r:
            raise NoSolution("origin lies on g; the side must be given by an arc")
        positive = p.real < 0
    u = 1.0 / math.sqrt(1.0 + alpha)
    pair = (u, 1.0 / u) if positive else (-1.0 / u, -u)
    minv = m.inverse()
    try:
        out = hg.geodesic(minv.apply_boundary(pair[0]), minv.apply_boundary(pair[1]))
    except DegenerateQuadruple as exc:
        raise NoSolution("pushed geodesic collapsed numerically") from exc
    _check_residual(out, g, alpha)
    return out


# ---------------------------------------------------------- construction 1

def _bisector(g1, g2):
    """Perpendicular bisector of the common perpendicular of g1 and g2,
    returned with the midpoint."""
    _, f1, f2 = hg.common_perpendicular(g1, g2)
    mid = _midpoint(f1, f2)
    perp = hg.perpendicular_through(mid, hg.geodesic(*_through(f1, f2)))
    return perp, mid


def _through(p, q):
    """Endpoints of the geodesic through two half-plane points."""
    z1, z2 = hg._hp_point(p), hg._hp_point(q)
    if abs(z1.real - z2.real) <= 1e-14 * max(1.0, abs(z1), abs(z2)):
        return z1.real, INF
    c = (abs(z2) ** 2 - abs(z1) ** 2) / (2.0 * (z2.real - z1.real))
    rho = abs(z1 - c)
    return c - rho, c + rho


def _midpoint(p, q):
    a, b = _through(p, q)
    g = hg.geodesic(a, b)
    d = hg.point_distance(p, q)
    s = Isometry.to_standard(g)
    zp = complex(s.apply_complex(p.z))
    zq = complex(s.apply_complex(q.z))
    sign = 1.0 if abs(zq) > abs(zp) else -1.0
    return hg.ModelPoint(*_xy(Isometry.translation_along(g, sign * 0.5 * d).apply_complex(p.z)))


def _xy(z):
    z = complex(z)
    return z.real, z.imag


def _origin_distance(g):
    return hg.point_geodesic_distance(ORIGIN, g)


class _EndpointSet:
    """Deduplicating store of geodesics keyed by rounded endpoints."""

    def __init__(self, tol=1e-9):
        self.tol = tol
        self.items = []
        self.keys = set()

    def _key(self, g):
        def k(v):
            if math.isinf(v):
                return "inf"
            # relative rounding keeps tiny and huge endpoints distinct
            return round(math.log(abs(v)) / self.tol) * (1 if v > 0 else -1) if v != 0 else 0
        return tuple(k(v) for v in hg._hp_ends(g))

    def add(self, g):
        key = self._key(g)
        if key in self.keys:
            return False
        for h in self.items[-64:]:
            if _same_geodesic(g, h, self.tol):
                return False
        self.keys.add(key)
        self.items.append(g)
        return True


def _same_geodesic(g, h, tol):
    return all(hg._same_boundary(a, b, HALFPLANE, tol) for a, b in zip(hg._hp_ends(g), hg._hp_ends(h)))


def construct1(alpha, depth, horizon=None):
    """Construction 1 truncated at `horizon` (scaled units, default 8).

    depth 0 is the initial pair; depth k is the family Gamma_{k+1}.
    """
    params = FamilyParams(alpha, alpha, depth)
    hraw = (DEFAULT_HORIZON if horizon is None else horizon) * hg.scale_constant()
    d = hg.distance_from_crossratio(alpha)
    g1 = hg.geodesic(-math.exp(-0.5 * d), math.exp(-0.5 * d))
    g2 = hg.geodesic(-math.exp(0.5 * d), math.exp(0.5 * d))
    fam = [g1, g2]
    if depth >= 1:
        fam = _reflection_closure(fam, hraw)
        for _ in range(depth):
            fam = fam + _fill_arcs(fam, alpha, d, hraw)
    return SignedGeodesicFamily(
        geodesics=fam, params=params, construction="c1", base_point=ORIGIN,
        base_sign=1, horizon=hraw / hg.scale_constant(),
    )


def _reflection_closure(initial, hraw):
    store = _EndpointSet()
    for g in initial:
        store.add(g)
    newest = list(initial)
    while newest:
        added = []
        for mirror in newest:
            m = Isometry.reflection_in(mirror)
            for g in list(store.items):
                try:
                    img = m(g)
                except DegenerateQuadruple:
                    # image collapsed to a boundary point: far past any horizon
                    continue
                if _origin_distance(img) > hraw + 1e-9:
                    continue
                if store.add(img):
                    added.append(img)
        newest = added
    return store.items


def _adjacent_end_arcs(fam):
    """Counterclockwise arcs (x, y, i, j) between consecutive ends that
    belong to different geodesics i != j."""
    pts = []
    for i, g in enumerate(fam):
        for v in hg._hp_ends(g):
            pts.append((v, i))
    pts.sort(key=lambda e: e[0])
    arcs = []
    n = len(pts)
    for k in range(n):
        (x, i), (y, j) = pts[k], pts[(k + 1) % n]
        if i != j:
            arcs.append((x, y, i, j))
    return arcs


def _fill_arcs(fam, alpha, d, hraw):
    out = []
    for x, y, i, j in _adjacent_end_arcs(fam):
        chi = solve_double_crossratio(fam[i], fam[j], alpha, arc=(x, y))
        if _origin_distance(chi) > hraw:
            continue
        out.extend(_ladder(chi, fam[i], fam[j], d, hraw))
    return out


def _ladder(chi0, g, gp, d, hraw):
    """chi_0, chi_1, ... translated by d along the bisector of g and gp,
    away from the strip, until the horizon."""
    axis, mid = _bisector(g, gp)
    foot = hg.closest_point(chi0, mid)
    s = Isometry.to_standard(axis)
    direction = 1.0 if abs(complex(s.apply_complex(foot.z))) > abs(complex(s.apply_complex(mid.z))) else -1.0
    # in the frame where the axis is (0, inf) the rungs are exact dilations
    sinv = s.inverse()
    p0, q0 = (s.apply_boundary(v) for v in hg._hp_ends(chi0))
    out = [chi0]
    i = 1
    while True:
        k = math.exp(direction * i * d)
        nxt = hg.geodesic(sinv.apply_boundary(p0 * k), sinv.apply_boundary(q0 * k))
        if _origin_distance(nxt) > hraw:
            break
        out.append(nxt)
        i += 1
        if i > 10000:
            raise ConvergenceFailure("ladder does not reach the horizon")
    return out


# ---------------------------------------------------------- construction 2

def _c2_base_point(alpha, eta):
    # a point of the (+) region x > 0, well inside the first strip
    t = 0.25 * hg.distance_from_crossratio(max(alpha, eta))
    z = Isometry.translation_along(hg.geodesic(-1.0, 1.0), min(t, 0.5)).apply_complex(1j)
    return hg.ModelPoint(*_xy(z))


def _boundary_parity(ends, m, base):
    """Number of geodesics separating the boundary point m from base, mod 2."""
    flips = 0
    for a, b in ends:
        s_base = hg._side_hp(np.array([base]), a, b)[0] > 0
        if math.isinf(m):
            s_m = True if not math.isinf(b) else None
            if s_m is None:
                raise ValueError("boundary point coincides with an end")
        elif math.isinf(b):
            s_m = m > a
        else:
            s_m = not (a < m < b)
        flips += s_m != s_base
    return flips % 2


def _arc_midpoint(x, y):
    """A boundary value inside the ccw arc from x to y (disk-angle midpoint)."""
    tx, ty = hg.boundary_to_disk(x), hg.boundary_to_disk(y)
    span = (ty - tx) % hg.TWO_PI
    return hg.boundary_to_halfplane((tx + 0.5 * span) % hg.TWO_PI)


def construct2(alpha, eta, steps):
    """Construction 2 after `steps` steps (steps geodesics)."""
    if steps < 1:
        raise ParameterOutOfRange("steps must be at least 1")
    params = FamilyParams(alpha, eta, steps)
    fam = [hg.geodesic(0.0, INF)]
    base = _c2_base_point(alpha, eta)
    # sorted endpoint list with owner index
    pts = [(0.0, 0), (INF, 0)]
    selected = (0.0, INF)       # counterclockwise start and end of the arc
    phases = [1]
    cases = ["seed"]
    for _ in range(steps - 1):
        values = [p[0] for p in pts]
        j = values.index(selected[0])
        x, i = pts[j]
        y, jj = pts[(j + 1) % len(pts)]
        ends = np.array([hg._hp_ends(g) for g in fam])
        m = _arc_midpoint(x, y)
        sign = 1 if _boundary_parity(ends, m, base.z) == 0 else -1
        a = alpha if sign > 0 else eta
        if i == jj:
            new = solve_crossratio_perpendicular(fam[i], a, ORIGIN, arc=(x, y))
        else:
            new = solve_double_crossratio(fam[i], fam[jj], a, arc=(x, y))
        fam.append(new)
        phases.append(sign)
        cases.append("a" if i == jj else "b")
        k = len(fam) - 1
        pts.extend([(v, k) for v in hg._hp_ends(new)])
        pts.sort(key=lambda e: e[0])
        # the next arc clockwise ends where the current one started
        values = [p[0] for p in pts]
        jx = values.index(x)
        prev = pts[(jx - 1) % len(pts)][0]
        selected = (prev, x)
    return SignedGeodesicFamily(
        geodesics=fam, params=params, construction="c2", base_point=base,
        base_sign=1, selected_arc=selected, seed_arc=(0.0, INF), phases=phases,
        cases=cases,
    )


# ------------------------------------------------------------ verification

def _disk_angles(ends):
    th = np.vectorize(hg.boundary_to_disk, otypes=[float])(ends)
    return np.sort(th, axis=1)


def pairwise_report(family, block=512):
    """Vectorized scan of all pairs: maximum R among disjoint pairs,
    crossing count and the worst pair."""
    ends = family.endpoints()
    n = len(ends)
    if n < 2:
        return {"max_pairwise_R": 0.0, "pair": None, "crossings": 0, "crossing_pairs": []}
    th = _disk_angles(ends)
    p = np.exp(1j * th)
    best, best_pair, crossings, cross_pairs = -np.inf, None, 0, []
    for s in range(0, n, block):
        a = th[s:s + block, 0][:, None]
        b = th[s:s + block, 1][:, None]
        c, d = th[None, :, 0], th[None, :, 1]
        inside_c = (a < c) & (c < b)
        inside_d = (a < d) & (d < b)
        cross = inside_c != inside_d
        rows = np.arange(s, min(n, s + block))[:, None]
        upper = np.arange(n)[None, :] > rows
        pa, pb = p[s:s + block, 0][:, None], p[s:s + block, 1][:, None]
        pc, pd = p[None, :, 0], p[None, :, 1]
        ab, cd = np.abs(pa - pb), np.abs(pc - pd)
        ac, bd, ad, bc = np.abs(pa - pc), np.abs(pb - pd), np.abs(pa - pd), np.abs(pb - pc)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = ab * cd / np.minimum(ac * bd, ad * bc)
        valid = upper & ~cross
        cmask = upper & cross
        crossings += int(cmask.sum())
        for i, j in zip(*np.nonzero(cmask)):
            if len(cross_pairs) < 20:
                cross_pairs.append((int(rows[i, 0]), int(j)))
        r = np.where(valid, r, -np.inf)
        k = np.unravel_index(np.argmax(r), r.shape)
        if r[k] > best:
            best, best_pair = float(r[k]), (int(rows[k[0], 0]), int(k[1]))
    return {"max_pairwise_R": best, "pair": best_pair, "crossings": crossings, "crossing_pairs": cross_pairs}


def verify_geodesical(family, threshold):
    """pass iff no two geodesics cross and every pairwise R < threshold."""
    rep = pairwise_report(family)
    rep["threshold"] = threshold
    rep["pass"] = rep["crossings"] == 0 and rep["max_pairwise_R"] < threshold
    return rep


def neighbor_pairs(family):
    """Index pairs of neighboring geodesics (adjacent ends, distinct curves)."""
    pairs = set()
    for _, _, i, j in _adjacent_end_arcs(family.geodesics):
        pairs.add((min(i, j), max(i, j)))
    return sorted(pairs)


def neighbor_crossratios(family):
    return {p: hg.cross_ratio_r(family.geodesics[p[0]], family.geodesics[p[1]]) for p in neighbor_pairs(family)}


# ------------------------------------------------------- surgery / lengths

@dataclass(frozen=True)
class SurgerySpec:
    """Segments [points[2i], points[2i+1]] on `curves[i]`, replaced by
    geodesic segments joining points[perm[2i]] and points[perm[2i+1]]."""
    points: tuple
    perm: tuple
    curves: tuple = None


def surgery_increment(spec):
    pts = list(spec.points)
    perm = list(spec.perm)
    if len(pts) % 2 or len(pts) == 0:
        raise MalformedSpec("need an even, positive number of segment endpoints")
    if sorted(perm) != list(range(len(pts))):
        raise MalformedSpec("perm must be a bijection of the endpoint indices")
    if spec.curves is not None:
        if len(spec.curves) != len(pts) // 2:
            raise MalformedSpec("one curve per segment expected")
        for i, g in enumerate(spec.curves):
            for p in pts[2 * i:2 * i + 2]:
                # a half-plane point is only resolved to ~eps*|z|/y in hyperbolic distance
                z = hg._hp_point(p)
                tol = max(1e-7, 64 * np.finfo(float).eps * max(1.0, abs(z)) / z.imag)
                if hg.point_geodesic_distance(p, g) > tol:
                    raise MalformedSpec(f"segment {i} endpoint is not on its curve")
    old = sum(hg.point_distance(pts[2 * i], pts[2 * i + 1]) for i in range(len(pts) // 2))
    new = sum(hg.point_distance(pts[perm[2 * i]], pts[perm[2 * i + 1]]) for i in range(len(pts) // 2))
    return new - old


def far_segment_points(g, t, base=None):
    """The two points of g at arc length +-t from base (default: foot from origin)."""
    zs = hg.sample_geodesic(g, [-t, t], base=base)
    return tuple(hg.ModelPoint(z.real, z.imag) for z in zs)


def swap_surgeries(g1, g2, t=12.0):
    """The two non-identity reconnections of far segments on g1 and g2,
    centered on the feet of the common perpendicular."""
    _, f1, f2 = hg.common_perpendicular(g1, g2)
    a1, b1 = far_segment_points(g1, t, base=f1)
    a2, b2 = far_segment_points(g2, t, base=f2)
    # orient so that a1, a2 sit on the same side of the common perpendicular
    if hg.point_distance(a1, a2) > hg.point_distance(a1, b2):
        a2, b2 = b2, a2
    pts = (a1, b1, a2, b2)
    curves = (g1, g2)
    parallel = SurgerySpec(pts, (0, 2, 1, 3), curves)
    crossed = SurgerySpec(pts, (0, 3, 1, 2), curves)
    return parallel, crossed


def _length_in_disc(h, T):
    """Length of a geodesic at distance h from the center inside a disc of radius T."""
    c = math.cosh(T) / math.cosh(h)
    return 2.0 * math.acosh(c) if c > 1.0 else 0.0


def wrong_pairing_surplus(g1, g2, tol=1e-6, t0=10.0, t_max=300.0):
    """Asymptotic extra length of the reconnection (x1', x2''), (x1'', x2')
    over (x1', x1''), (x2', x2''), measured inside growing discs centered at
    the midpoint of the common perpendicular."""
    if hg.crosses(g1, g2):
        raise CrossingGeodesics("wrong pairing needs disjoint geodesics")
    _, f1, f2 = hg.common_perpendicular(g1, g2)
    center = _midpoint(f1, f2)
    a, b, c, d = hg.cyclic_orientation(g1, g2)
    wrong = [hg.geodesic(a, d), hg.geodesic(b, c)]
    right = [g1, g2]
    hw = [hg.point_geodesic_distance(center, g) for g in wrong]
    hr = [hg.point_geodesic_distance(center, g) for g in right]

    def surplus(T):
        return sum(_length_in_disc(h, T) for h in hw) - sum(_length_in_disc(h, T) for h in hr)

    T = max(t0, 2.0 + max(hw + hr))
    prev = surplus(T)
    while T < t_max:
        T *= 1.5
        cur = surplus(T)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    raise ConvergenceFailure("truncated surplus did not stabilize")


# ---------------------------------------------------------------- density

def hyperbolic_disc_samples(center, radius, samples):
    """Quasi-uniform points (sunflower pattern, area-uniform radii) in the
    hyperbolic disc about `center`, as half-plane complex numbers."""
    k = np.arange(samples) + 0.5
    u = k / samples
    r = np.arccosh(1.0 + u * (math.cosh(radius) - 1.0))
    phi = k * math.pi * (3.0 - math.sqrt(5.0))
    w = np.tanh(0.5 * r) * np.exp(1j * phi)          # disk about 0
    z = hg.cayley_inverse(w)                          # half-plane about i
    zc = hg._hp_point(center)
    move = Isometry(math.sqrt(zc.imag), zc.real / math.sqrt(zc.imag), 0.0, 1.0 / math.sqrt(zc.imag))
    return move.apply_complex(z)


def density_radius(family, center=ORIGIN, window_radius=5.0, samples=4000):
    """Largest distance from a sampled window point to the nearest curve."""
    if len(family.geodesics) == 0:
        raise EmptyFamily("density radius of an empty family")
    z = hyperbolic_disc_samples(center, window_radius, samples)
    return float(np.max(min_side_distance(family.endpoints(), z)))


# ------------------------------------------------------------- decay sums

@dataclass
class DecayProfile:
    terms: list            # (index, distance, formula value)
    beta: float
    X: float
    bound: float
    sum: float
    formula_sum: float


def decay_profile(semicircles, X, beta):
    """Sum of exp(-beta * rho_i), rho_i = dist(O_0^-, O_i), O_0^- the unit
    semicircle at -X, against the bound X^(1 - 2 beta).

    rho_i is the exact geodesic distance; the cross-ratio expression
    -ln(2 * 2 r_i / ((X + 1 + x_i + r_i)(X - 1 + x_i - r_i))) is recorded next
    to it (it differs from the distance by ln 4 asymptotically)."""
    if not beta > 1:
        raise HypothesisViolated("beta must exceed 1")
    circles = sorted(((float(x), float(r)) for x, r in semicircles), reverse=True)
    for x, r in circles:
        if not (0 < r <= 0.5):
            raise HypothesisViolated(f"radius {r} outside (0, 1/2]")
        if not (x - r >= 0 and x + r <= X - 1):
            raise HypothesisViolated(f"semicircle at {x} leaves (0, X - 1)")
    for (x1, r1), (x2, r2) in zip(circles, circles[1:]):
        if x1 - r1 < x2 + r2 - 1e-15:
            raise HypothesisViolated("semicircles overlap")
    o0 = hg.geodesic(-X - 1.0, -X + 1.0)
    terms = []
    for i, (x, r) in enumerate(circles, start=1):
        dist = hg.geodesic_distance(o0, hg.geodesic(x - r, x + r))
        formula = -math.log(2.0 * 2.0 * r / ((X + 1 + x + r) * (X - 1 + x - r)))
        terms.append((i, dist, formula))
    total = sum(math.exp(-beta * t[1]) for t in terms)
    ftotal = sum(math.exp(-beta * t[2]) for t in terms)
    return DecayProfile(terms, beta, X, X ** (1.0 - 2.0 * beta), total, ftotal)


def max_packing(X, r=0.5):
    """Touching semicircles of radius r filling (0, X - 1)."""
    n = int(math.floor((X - 1) / (2 * r) + 1e-12))
    return [((2 * j + 1) * r, r) for j in range(n)]


def random_packing(X, rng, max_radius=0.5):
    """Random disjoint semicircles with radii <= max_radius inside (0, X - 1)."""
    out = []
    pos = 0.0
    while True:
        gap = rng.exponential(0.3)
        r = rng.uniform(0.01, max_radius)
        if pos + gap + 2 * r > X - 1:
            break
        out.append((pos + gap + r, r))
        pos += gap + 2 * r
    return out


# ---------------------------------------------------------------- json io

def family_to_json(fam):
    def enc(v):
        return "inf" if math.isinf(v) else v
    return {
        "params": {"alpha": fam.params.alpha, "eta": fam.params.eta, "depth": fam.params.depth_or_steps},
        "model": HALFPLANE,
        "geodesics": [{"e1": enc(g.e1.value), "e2": enc(g.e2.value)} for g in fam.geodesics],
        "base_sign": fam.base_sign,
        "base_point": [fam.base_point.x, fam.base_point.y],
        "construction": fam.construction,
        "seed_arc": None if fam.seed_arc is None else [enc(v) for v in fam.seed_arc],
        "selected_arc": None if fam.selected_arc is None else [enc(v) for v in fam.selected_arc],
        "horizon": fam.horizon,
        "phases": list(fam.phases),
    }


def family_from_json(obj):
    def dec(v):
        return INF if v == "inf" else float(v)
    p = obj["params"]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        params = FamilyParams(p["alpha"], p.get("eta", p["alpha"]), p.get("depth", 0))
    model = obj.get("model", HALFPLANE)
    geos = [hg.geodesic(dec(g["e1"]), dec(g["e2"]), model) for g in obj["geodesics"]]
    geos = [hg.convert_model(g, HALFPLANE) for g in geos]
    bp = obj.get("base_point", [0.0, 1.0])
    return SignedGeodesicFamily(
        geodesics=geos, params=params, construction=obj.get("construction", "c1"),
        base_point=hg.ModelPoint(bp[0], bp[1]), base_sign=int(obj.get("base_sign", 1)),
        selected_arc=None if obj.get("selected_arc") is None else tuple(dec(v) for v in obj["selected_arc"]),
        seed_arc=None if obj.get("seed_arc") is None else tuple(dec(v) for v in obj["seed_arc"]),
        horizon=obj.get("horizon"), phases=list(obj.get("phases", [])),
    )


def empty_family(base_sign=1):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        params = FamilyParams(0.5, 0.5, 0)
    return SignedGeodesicFamily(geodesics=[], params=params, construction="empty", base_sign=base_sign)
