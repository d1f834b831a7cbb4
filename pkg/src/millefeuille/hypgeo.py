"""Hyperbolic plane geometry (curvature -1).

The upper half-plane is the working model; the Poincare disk is reached
through the Cayley transform w = (z - i) / (z + i).  The point i of the
half-plane corresponds to the disk center and plays the role of the origin.
On the absolute, the half-plane point x corresponds to the angle theta with
x = -cot(theta / 2); infinity sits at theta = 0 and increasing x means
counterclockwise motion on the circle.
"""
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CrossingGeodesics, DegenerateQuadruple, ModelMismatch

HALFPLANE = "halfplane"
DISK = "disk"
MODELS = (HALFPLANE, DISK)
INF = math.inf
TWO_PI = 2.0 * math.pi

# two boundary points closer than this are treated as the same point
DEGENERACY_TOL = 1e-12


def _check_model(model):
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")


@dataclass(frozen=True)
class BoundaryPoint:
    """A point on the absolute.

    In the half-plane `value` is a real number or math.inf; in the disk it
    is an angle in [0, 2pi).
    """
    value: float
    model: str = HALFPLANE

    def __post_init__(self):
        _check_model(self.model)
        v = float(self.value)
        if math.isnan(v):
            raise ValueError("boundary point is nan")
        if self.model == HALFPLANE:
            if v == -INF:
                v = INF
        else:
            if math.isinf(v):
                raise ValueError("disk boundary angle must be finite")
            v = v % TWO_PI
            if v >= TWO_PI:
                v = 0.0
        object.__setattr__(self, "value", v)

    @property
    def is_infinite(self):
        return self.model == HALFPLANE and math.isinf(self.value)


@dataclass(frozen=True)
class ModelPoint:
    x: float
    y: float
    model: str = HALFPLANE

    def __post_init__(self):
        _check_model(self.model)
        x, y = float(self.x), float(self.y)
        if self.model == HALFPLANE:
            if not y > 0:
                raise ValueError(f"half-plane point needs y > 0, got {y}")
        elif not x * x + y * y < 1.0:
            raise ValueError("disk point must lie inside the unit disk")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def z(self):
        return complex(self.x, self.y)


ORIGIN = ModelPoint(0.0, 1.0, HALFPLANE)


@dataclass(frozen=True)
class Geodesic:
    """Complete geodesic given by its endpoints.

    Orientation is canonical: in the half-plane e1 < e2 with infinity
    greatest; in the disk the counterclockwise arc from e1 to e2 is the
    shorter one (ties broken by e1 < e2).
    """
    e1: BoundaryPoint
    e2: BoundaryPoint

    def __post_init__(self):
        a, b = self.e1, self.e2
        if not isinstance(a, BoundaryPoint):
            a = BoundaryPoint(a)
        if not isinstance(b, BoundaryPoint):
            b = BoundaryPoint(b, a.model)
        if a.model != b.model:
            raise ModelMismatch("geodesic endpoints in different models")
        if _same_boundary(a.value, b.value, a.model):
            raise DegenerateQuadruple("geodesic endpoints coincide")
        if a.model == HALFPLANE:
            if b.value < a.value:
                a, b = b, a
        else:
            ccw = (b.value - a.value) % TWO_PI
            if ccw > math.pi or (ccw == math.pi and b.value < a.value):
                a, b = b, a
        object.__setattr__(self, "e1", a)
        object.__setattr__(self, "e2", b)

    @property
    def model(self):
        return self.e1.model

    @property
    def ends(self):
        return self.e1.value, self.e2.value


def geodesic(a, b, model=HALFPLANE):
    """Geodesic from two raw endpoint values."""
    return Geodesic(BoundaryPoint(a, model), BoundaryPoint(b, model))


def point(x, y, model=HALFPLANE):
    return ModelPoint(x, y, model)


def _same_boundary(u, v, model, tol=DEGENERACY_TOL):
    if model == HALFPLANE:
        if math.isinf(u) or math.isinf(v):
            return math.isinf(u) and math.isinf(v)
        return abs(u - v) <= tol * max(1.0, abs(u), abs(v))
    d = abs(u - v) % TWO_PI
    return min(d, TWO_PI - d) <= tol


# ---------------------------------------------------------------- models

def boundary_to_disk(x):
    """Half-plane absolute value -> disk angle."""
    if math.isinf(x):
        return 0.0
    return (2.0 * math.atan2(1.0, -x)) % TWO_PI


def boundary_to_halfplane(theta):
    """Disk angle -> half-plane absolute value."""
    theta = theta % TWO_PI
    if theta == 0.0 or min(theta, TWO_PI - theta) < 1e-300:
        return INF
    return -math.cos(theta / 2.0) / math.sin(theta / 2.0)


def cayley(z):
    """Half-plane complex coordinate(s) -> disk coordinate(s)."""
    return (z - 1j) / (z + 1j)


def cayley_inverse(w):
    """Disk complex coordinate(s) -> half-plane coordinate(s)."""
    return 1j * (1.0 + w) / (1.0 - w)


def convert_model(obj, target):
    """Express a boundary point, point, geodesic or list of them in `target`."""
    _check_model(target)
    if isinstance(obj, (list, tuple)):
        return type(obj)(convert_model(o, target) for o in obj)
    if isinstance(obj, BoundaryPoint):
        if obj.model == target:
            return obj
        if target == DISK:
            return BoundaryPoint(boundary_to_disk(obj.value), DISK)
        return BoundaryPoint(boundary_to_halfplane(obj.value), HALFPLANE)
    if isinstance(obj, ModelPoint):
        if obj.model == target:
            return obj
        if target == DISK:
            w = cayley(obj.z)
        else:
            w = cayley_inverse(obj.z)
            w = complex(w.real, max(w.imag, 5e-324))
        return ModelPoint(w.real, w.imag, target)
    if isinstance(obj, Geodesic):
        if obj.model == target:
            return obj
        return Geodesic(convert_model(obj.e1, target), convert_model(obj.e2, target))
    raise TypeError(f"cannot convert {type(obj).__name__}")


def _hp_value(p):
    if isinstance(p, BoundaryPoint):
        if p.model == DISK:
            return boundary_to_halfplane(p.value)
        return p.value
    return float(p)


def _hp_ends(g):
    if g.model == HALFPLANE:
        return g.e1.value, g.e2.value
    a = boundary_to_halfplane(g.e1.value)
    b = boundary_to_halfplane(g.e2.value)
    return (a, b) if a < b else (b, a)


def _hp_point(p):
    if p.model == HALFPLANE:
        return p.z
    return complex(cayley_inverse(p.z))


def _from_hp_point(z, model):
    z = complex(z.real, max(z.imag, 5e-324))
    p = ModelPoint(z.real, z.imag, HALFPLANE)
    return p if model == HALFPLANE else convert_model(p, model)


def _from_hp_geodesic(a, b, model):
    g = Geodesic(BoundaryPoint(a), BoundaryPoint(b))
    return g if model == HALFPLANE else convert_model(g, model)


# ---------------------------------------------------------- cross-ratios

def _diff(p, q):
    """p - q with the convention that factors holding infinity cancel."""
    if math.isinf(p):
        return 1.0
    if math.isinf(q):
        return -1.0
    return p - q


def _check_distinct(pts):
    for i in range(4):
        for j in range(i + 1, 4):
            if _same_boundary(pts[i], pts[j], HALFPLANE):
                raise DegenerateQuadruple(f"points {i} and {j} coincide")


def cross_ratio_rbar(a, b, c, d):
    """Rbar = ((c - a)(d - b)) / ((c - b)(d - a)).

    (a, b) are the ends of the first geodesic and (c, d) those of the second.
    """
    pts = [_hp_value(p) for p in (a, b, c, d)]
    _check_distinct(pts)
    a, b, c, d = pts
    num = _diff(c, a) * _diff(d, b)
    den = _diff(c, b) * _diff(d, a)
    return num / den


def cross_ratio_r_points(a, b, c, d):
    """R = -((b - a)(d - c)) / ((b - c)(d - a)); equals Rbar - 1."""
    pts = [_hp_value(p) for p in (a, b, c, d)]
    _check_distinct(pts)
    a, b, c, d = pts
    num = _diff(b, a) * _diff(d, c)
    den = _diff(b, c) * _diff(d, a)
    return -num / den


def _interleaved(a, b, c, d):
    # a < b and c < d on the extended line
    inside_c = a < c < b
    inside_d = a < d < b
    return inside_c != inside_d


def crosses(g1, g2):
    """True if the two geodesics meet at an interior point."""
    a, b = _hp_ends(g1)
    c, d = _hp_ends(g2)
    if any(_same_boundary(p, q, HALFPLANE) for p in (a, b) for q in (c, d)):
        return False
    return _interleaved(a, b, c, d)


def cyclic_orientation(g1, g2):
    """Endpoint values (a, b, c, d) of two disjoint geodesics, oriented so
    that a, b, c, d appear in cyclic order on the absolute."""
    a, b = _hp_ends(g1)
    c, d = _hp_ends(g2)
    if _interleaved(a, b, c, d):
        return a, b, c, d
    if a < c < b:          # g2 nested inside g1
        return b, a, c, d
    if c < a < d:          # g1 nested inside g2
        return a, b, d, c
    return a, b, c, d


def cross_ratio_r(g1, g2):
    """The cross-ratio R of two geodesics.

    For disjoint geodesics the ends are taken in cyclic order, which makes R
    positive and independent of labelling; for crossing geodesics R < 0.
    """
    return cross_ratio_r_points(*cyclic_orientation(g1, g2))


def distance_from_crossratio(r):
    """Distance between disjoint geodesics with cross-ratio R: R = 1/sinh^2(d/2)."""
    if r <= 0:
        raise ValueError("cross-ratio of disjoint geodesics is positive")
    if math.isinf(r):
        return 0.0
    return 2.0 * math.asinh(1.0 / math.sqrt(r))


def crossratio_from_distance(d):
    if d <= 0:
        raise ValueError("distance must be positive")
    return 1.0 / math.sinh(d / 2.0) ** 2


# ------------------------------------------------------------- distances

def point_distance(p, q):
    if p.model != q.model:
        raise ModelMismatch("points in different models")
    dz = abs(p.z - q.z)
    if p.model == HALFPLANE:
        s = dz / (2.0 * math.sqrt(p.y * q.y))
    else:
        s = dz / math.sqrt((1.0 - abs(p.z) ** 2) * (1.0 - abs(q.z) ** 2))
    return 2.0 * math.asinh(s)


def halfplane_distance(z1, z2):
    """Vectorized half-plane distance between complex arrays."""
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    return 2.0 * np.arcsinh(np.abs(z1 - z2) / (2.0 * np.sqrt(z1.imag * z2.imag)))


def disk_distance(w1, w2):
    """Vectorized disk distance between complex arrays."""
    w1 = np.asarray(w1, dtype=complex)
    w2 = np.asarray(w2, dtype=complex)
    den = np.sqrt((1.0 - np.abs(w1) ** 2) * (1.0 - np.abs(w2) ** 2))
    return 2.0 * np.arcsinh(np.abs(w1 - w2) / den)


def geodesic_distance(g1, g2, with_flag=False):
    """Infimum distance between two geodesics.

    Crossing geodesics give 0; with `with_flag` the pair (distance, crossing)
    is returned so callers can tell a crossing from asymptotic contact.
    """
    a, b = _hp_ends(g1)
    c, d = _hp_ends(g2)
    same = [_same_boundary(p, q, HALFPLANE) for p in (a, b) for q in (c, d)]
    if any(same):
        dist, crossing = 0.0, False
    elif _interleaved(a, b, c, d):
        dist, crossing = 0.0, True
    else:
        dist, crossing = distance_from_crossratio(cross_ratio_r(g1, g2)), False
    return (dist, crossing) if with_flag else dist


@lru_cache(maxsize=None)
def scale_constant():
    """d0: distance between disjoint geodesics whose cross-ratio R equals 1.

    Computed from the feet of the common perpendicular of a reference pair
    (semicircles of radius 1 centered at -sqrt(2) and sqrt(2)).
    """
    s = math.sqrt(2.0)
    g1 = geodesic(-s - 1.0, -s + 1.0)
    g2 = geodesic(s - 1.0, s + 1.0)
    _, f1, f2 = common_perpendicular(g1, g2)
    return point_distance(f1, f2)


def scaled_distance(g1, g2):
    return geodesic_distance(g1, g2) / scale_constant()


def point_geodesic_distance(p, g):
    """Distance from a point to a geodesic."""
    z = _hp_point(p)
    return float(_point_geodesic_hp(np.array([z]), *_hp_ends(g))[0])


def _point_geodesic_hp(z, a, b):
    # sinh(d) = |x - a| / y for vertical lines, ||z - c|^2 - rho^2| / (2 rho y)
    z = np.asarray(z, dtype=complex)
    if math.isinf(b):
        s = np.abs(z.real - a) / z.imag
    else:
        c, rho = 0.5 * (a + b), 0.5 * (b - a)
        s = np.abs(np.abs(z - c) ** 2 - rho * rho) / (2.0 * rho * z.imag)
    return np.arcsinh(s)


def side(p, g):
    """+1 / -1 according to the side of g containing p (0 if p lies on g).

    In the half-plane: +1 to the right of a vertical line and outside a
    semicircle.
    """
    z = _hp_point(p) if isinstance(p, ModelPoint) else complex(p)
    a, b = _hp_ends(g)
    return int(np.sign(_side_hp(np.array([z]), a, b)[0]))


def _side_hp(z, a, b):
    z = np.asarray(z, dtype=complex)
    if math.isinf(b):
        return z.real - a
    c, rho = 0.5 * (a + b), 0.5 * (b - a)
    # scaled so that the value is comparable to a distance near the curve
    return (np.abs(z - c) ** 2 - rho * rho) / (2.0 * rho * z.imag)


# ------------------------------------------------------------- isometries

@dataclass(frozen=True)
class Isometry:
    """z -> (a w + b) / (c w + d) with w = z, or w = -conj(z) if `reflect`.

    Coefficients are real with determinant normalized to +1; reflections
    are orientation reversing.
    """
    a: float
    b: float
    c: float
    d: float
    reflect: bool = False

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if not det > 0:
            raise ValueError("isometry needs a positive determinant")
        s = math.sqrt(det)
        for name in "abcd":
            object.__setattr__(self, name, float(getattr(self, name)) / s)
        object.__setattr__(self, "reflect", bool(self.reflect))

    @staticmethod
    def identity():
        return Isometry(1.0, 0.0, 0.0, 1.0)

    @property
    def matrix(self):
        return np.array([[self.a, self.b], [self.c, self.d]])

    def compose(self, other):
        """self after other."""
        a2, b2, c2, d2 = other.a, other.b, other.c, other.d
        if self.reflect:
            b2, c2 = -b2, -c2
        m = np.array([[self.a, self.b], [self.c, self.d]]) @ np.array([[a2, b2], [c2, d2]])
        return Isometry(m[0, 0], m[0, 1], m[1, 0], m[1, 1], self.reflect != other.reflect)

    def __matmul__(self, other):
        return self.compose(other)

    def inverse(self):
        a, b, c, d = self.d, -self.b, -self.c, self.a
        if self.reflect:
            b, c = -b, -c
        return Isometry(a, b, c, d, self.reflect)

    def apply_complex(self, z):
        z = np.asarray(z, dtype=complex)
        if self.reflect:
            z = -np.conj(z)
        return (self.a * z + self.b) / (self.c * z + self.d)

    def apply_boundary(self, x):
        if math.isinf(x):
            return INF if self.c == 0.0 else self.a / self.c
        if self.reflect:
            x = -x
        den = self.c * x + self.d
        if den == 0.0:
            return INF
        return (self.a * x + self.b) / den

    def __call__(self, obj):
        if isinstance(obj, BoundaryPoint):
            v = self.apply_boundary(_hp_value(obj))
            bp = BoundaryPoint(v)
            return bp if obj.model == HALFPLANE else convert_model(bp, obj.model)
        if isinstance(obj, ModelPoint):
            z = complex(self.apply_complex(_hp_point(obj)))
            return _from_hp_point(z, obj.model)
        if isinstance(obj, Geodesic):
            a, b = _hp_ends(obj)
            return _from_hp_geodesic(self.apply_boundary(a), self.apply_boundary(b), obj.model)
        if isinstance(obj, (int, float)):
            return self.apply_boundary(float(obj))
        return self.apply_complex(obj)

    @staticmethod
    def to_standard(g):
        """Orientation preserving map sending e1 -> 0 and e2 -> infinity."""
        a, b = _hp_ends(g)
        if math.isinf(b):
            return Isometry(1.0, -a, 0.0, 1.0)
        return Isometry(1.0, -a, -1.0, b)

    @staticmethod
    def reflection_in(g):
        s = Isometry.to_standard(g)
        flip = Isometry(1.0, 0.0, 0.0, 1.0, reflect=True)
        return s.inverse() @ flip @ s

    @staticmethod
    def translation_along(g, t):
        """Hyperbolic translation by distance t along g, towards e2 if t > 0."""
        s = Isometry.to_standard(g)
        h = math.exp(0.5 * t)
        return s.inverse() @ Isometry(h, 0.0, 0.0, 1.0 / h) @ s

    @staticmethod
    def rotation_about(p, angle):
        z = _hp_point(p)
        move = Isometry(1.0, -z.real, 0.0, z.imag)
        c, s = math.cos(0.5 * angle), math.sin(0.5 * angle)
        return move.inverse() @ Isometry(c, s, -s, c) @ move

    @staticmethod
    def random(rng, scale=1.0, reflect=None):
        """Random isometry: rotation about i, translation, optional reflection."""
        theta = rng.uniform(0.0, TWO_PI)
        t = rng.normal(0.0, scale)
        rot = Isometry.rotation_about(ORIGIN, theta)
        tr = Isometry(math.exp(0.5 * t), 0.0, 0.0, math.exp(-0.5 * t))
        flip = rng.random() < 0.5 if reflect is None else reflect
        f = Isometry(1.0, 0.0, 0.0, 1.0, reflect=bool(flip))
        return rot @ tr @ f


def reflect_geodesic(g, mirror):
    return Isometry.reflection_in(mirror)(g)


def reflect_point(p, mirror):
    return Isometry.reflection_in(mirror)(p)


# ---------------------------------------------------------- perpendiculars

def common_perpendicular(g1, g2):
    """Common perpendicular of disjoint geodesics and its feet on g1, g2."""
    model = g1.model
    if g2.model != model:
        raise ModelMismatch("geodesics in different models")
    if crosses(g1, g2):
        raise CrossingGeodesics("crossing geodesics have no common perpendicular")
    a, b = _hp_ends(g1)
    c, d = _hp_ends(g2)
    if any(_same_boundary(p, q, HALFPLANE) for p in (a, b) for q in (c, d)):
        raise DegenerateQuadruple("asymptotic geodesics have no common perpendicular")
    s = Isometry.to_standard(g1)
    u, v = sorted((s.apply_boundary(c), s.apply_boundary(d)))
    # g2 is now a semicircle on one side of 0; the perpendicular is centered 0
    rho = math.sqrt(u * v)
    xf = 2.0 * u * v / (u + v)
    yf = rho * abs(v - u) / abs(u + v)
    sinv = s.inverse()
    foot1 = complex(sinv.apply_complex(1j * rho))
    foot2 = complex(sinv.apply_complex(complex(xf, yf)))
    perp = _from_hp_geodesic(sinv.apply_boundary(-rho), sinv.apply_boundary(rho), model)
    return perp, _from_hp_point(foot1, model), _from_hp_point(foot2, model)


def perpendicular_through(p, g):
    """The geodesic through p orthogonal to g."""
    s = Isometry.to_standard(g)
    r = abs(complex(s.apply_complex(_hp_point(p))))
    sinv = s.inverse()
    return _from_hp_geodesic(sinv.apply_boundary(-r), sinv.apply_boundary(r), g.model)


def closest_point(g, p):
    """Foot of the perpendicular from p to g."""
    s = Isometry.to_standard(g)
    r = abs(complex(s.apply_complex(_hp_point(p))))
    foot = complex(s.inverse().apply_complex(1j * r))
    return _from_hp_point(foot, p.model)


def sample_geodesic(g, ts, base=None):
    """Half-plane points of g at signed arc length ts from `base`.

    `base` defaults to the point of g closest to the origin; positive ts
    move towards e2.
    """
    base = closest_point(g, ORIGIN) if base is None else base
    s = Isometry.to_standard(g)
    r = abs(complex(s.apply_complex(_hp_point(base))))
    ts = np.asarray(ts, dtype=float)
    return s.inverse().apply_complex(1j * r * np.exp(ts))


def _tangent(g, z):
    a, b = _hp_ends(g)
    if math.isinf(b):
        return 1j
    c = 0.5 * (a + b)
    t = 1j * (z - c)
    return t / abs(t)


def intersection_angle(g1, g2, at):
    """Angle in [0, pi/2] between the tangents of g1 and g2 at point `at`."""
    z = _hp_point(at)
    t1, t2 = _tangent(g1, z), _tangent(g2, z)
    cosang = abs((t1 * t2.conjugate()).real)
    return math.acos(min(1.0, cosang))


def on_geodesic(p, g, tol=1e-9):
    return point_geodesic_distance(p, g) <= tol


# ------------------------------------------------------------ serialization

def _enc(v):
    return "inf" if math.isinf(v) else v


def _dec(v):
    return INF if v in ("inf", "Infinity") else float(v)


def geodesic_to_json(g):
    return {"model": g.model, "e1": _enc(g.e1.value), "e2": _enc(g.e2.value)}


def geodesic_from_json(obj, model=None):
    m = obj.get("model", model or HALFPLANE)
    return geodesic(_dec(obj["e1"]), _dec(obj["e2"]), m)
