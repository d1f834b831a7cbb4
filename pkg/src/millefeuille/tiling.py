"""Hyperbolic tessellations L_{p,q}, Cayley trees and spin projection of
geodesic families onto their vertices.

Coordinates are stored in the Poincare disk as complex numbers.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from . import hypgeo as hg
from .errors import DegenerateIncidence, NotHyperbolic, ParameterOutOfRange, RadiusExceedsGeneration
from .families import SignedGeodesicFamily, min_side_distance

MERGE_TOL = 1e-7


@dataclass
class LatticeGraph:
    kind: str                      # "tessellation" or "tree"
    params: dict                   # {"p", "q"} or {"n"}
    coords: np.ndarray             # complex disk coordinates
    edges: np.ndarray              # (E, 2) int, i < j
    faces: list = field(default_factory=list)
    generations: int = 0
    gen: np.ndarray = None         # graph distance from vertex 0
    complete: np.ndarray = None    # all neighbors of the vertex are generated
    parent: np.ndarray = None      # trees: parent index (-1 for the root)

    def __post_init__(self):
        n = len(self.coords)
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        order = np.lexsort((dst, src))
        self._indices = dst[order]
        self._indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=self._indptr[1:])
        if self.gen is None:
            self.gen = bfs_distances(self, 0) if n else np.zeros(0, dtype=np.int64)

    @property
    def n_vertices(self):
        return len(self.coords)

    def neighbors(self, v):
        return self._indices[self._indptr[v]:self._indptr[v + 1]]

    def degrees(self):
        return np.diff(self._indptr)

    def csr(self):
        """(indptr, indices) adjacency arrays, neighbors sorted."""
        return self._indptr, self._indices

    def children_of(self, v):
        """Trees: children of v in planar left-to-right order (breadth-first
        numbering makes them a contiguous block)."""
        lo = np.searchsorted(self.parent[1:], v, side="left") + 1
        hi = np.searchsorted(self.parent[1:], v, side="right") + 1
        return np.arange(lo, hi, dtype=np.int64)

    def halfplane_coords(self):
        return hg.cayley_inverse(self.coords)


@dataclass
class BoxRegion:
    graph: LatticeGraph
    center: int
    radius: int
    interior: np.ndarray
    boundary: np.ndarray
    dist: np.ndarray


@dataclass
class BoundarySpinAssignment:
    signs: np.ndarray              # +-1 per vertex of the graph
    family: SignedGeodesicFamily   # the family actually used (possibly moved)
    perturbation: float            # size of the translation applied (0 if none)


def bfs_distances(graph, source):
    indptr, indices = graph.csr()
    n = graph.n_vertices
    adj = csr_matrix((np.ones(len(indices), dtype=np.int8), indices, indptr), shape=(n, n))
    d = shortest_path(adj, unweighted=True, indices=source)
    return np.where(np.isfinite(d), d, -1).astype(np.int64)


# ------------------------------------------------------------- tessellation

def _reflect_in_chord(z, a, b):
    """Reflect disk points z in the geodesic through disk points a and b.

    Conjugated by the disk automorphism taking a to 0, where the geodesic is
    a diameter; this stays well conditioned near the boundary circle.
    """
    z = np.asarray(z, dtype=complex)
    ac = np.conj(a)
    bp = (b - a) / (1.0 - ac * b)
    u2 = (bp / abs(bp)) ** 2
    w = (z - a) / (1.0 - ac * z)
    w = u2 * np.conj(w)
    return (w + a) / (1.0 + ac * w)


class _VertexIndex:
    """Merges points closer than tol in the local hyperbolic scale: grids
    with cell size tol * (1 - |z|^2) / 2, one grid per dyadic band of
    1 - |z|^2."""

    def __init__(self, tol=MERGE_TOL):
        self.tol = tol
        self.cells = {}
        self.coords = []

    @staticmethod
    def _band(z):
        return int(math.floor(math.log2(max(1.0 - abs(z) ** 2, 1e-300))))

    def _key(self, z, band):
        h = self.tol * 2.0 ** band
        return band, int(math.floor(z.real / h)), int(math.floor(z.imag / h))

    def get(self, z):
        band = self._band(z)
        scale = 0.5 * (1.0 - abs(z) ** 2)
        for bd in (band - 1, band, band + 1):
            _, cx, cy = self._key(z, bd)
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    for k in self.cells.get((bd, cx + dx, cy + dy), ()):
                        if abs(self.coords[k] - z) <= self.tol * scale:
                            return k
        k = len(self.coords)
        self.coords.append(complex(z))
        self.cells.setdefault(self._key(z, band), []).append(k)
        return k


def seed_polygon(p, q):
    """Disk vertices of the regular p-gon with interior angles 2 pi / q centered at 0."""
    cosh_r = 1.0 / (math.tan(math.pi / p) * math.tan(math.pi / q))
    r = math.tanh(0.5 * math.acosh(cosh_r))
    k = np.arange(p)
    return r * np.exp(1j * (0.5 * math.pi + 2.0 * math.pi * k / p))


def build_tiling(p, q, generations):
    """Patch of L_{p,q} grown in vertex layers.

    Generation 0 is the seed face; each further generation completes the
    fan of q faces around every vertex present so far (by reflecting
    incident faces across their edges at that vertex).
    """
    if p < 3 or q < 3:
        raise ParameterOutOfRange("p and q must be at least 3")
    if 1.0 / p + 1.0 / q >= 0.5:
        raise NotHyperbolic(f"1/{p} + 1/{q} >= 1/2")
    if generations < 0:
        raise ParameterOutOfRange("generations must be non-negative")
    index = _VertexIndex()
    face0 = tuple(index.get(z) for z in seed_polygon(p, q))
    faces = [face0]
    seen = {frozenset(face0)}
    at = {v: [0] for v in face0}

    def add(face):
        key = frozenset(face)
        if key in seen:
            return False
        seen.add(key)
        faces.append(face)
        for v in face:
            at.setdefault(v, []).append(len(faces) - 1)
        return True

    for _ in range(generations):
        for v in [v for v in list(at) if len(at[v]) < q]:
            _complete_fan(v, p, q, faces, at, index, add)
    coords = np.array(index.coords)
    edges = set()
    for f in faces:
        for e in range(p):
            i, j = f[e], f[(e + 1) % p]
            edges.add((min(i, j), max(i, j)))
    g = LatticeGraph(
        kind="tessellation", params={"p": p, "q": q}, coords=coords,
        edges=np.array(sorted(edges)), faces=faces, generations=generations,
    )
    g.complete = _face_counts(faces, len(coords)) == q
    return g


def _complete_fan(v, p, q, faces, at, index, add):
    changed = True
    while len(at[v]) < q and changed:
        changed = False
        for fi in list(at[v]):
            face = faces[fi]
            k = face.index(v)
            pts = np.array([index.coords[u] for u in face])
            for w in (face[(k + 1) % p], face[(k - 1) % p]):
                img = _reflect_in_chord(pts, index.coords[v], index.coords[w])
                # reflection reverses orientation; reverse to stay counterclockwise
                changed |= add(tuple(index.get(z) for z in img[::-1]))
    if len(at[v]) != q:
        raise RuntimeError(f"fan around vertex {v} did not close ({len(at[v])} faces)")


def _face_counts(faces, n):
    count = np.zeros(n, dtype=np.int64)
    for f in faces:
        for v in f:
            count[v] += 1
    return count


def tiling_for_radius(p, q, radius, margin=2):
    """Patch generated `margin` layers beyond a box of the given radius
    about vertex 0 (the box and its boundary are then complete)."""
    return build_tiling(p, q, radius + margin)


# ------------------------------------------------------------------- trees

def build_cayley_tree(n, depth, step=None):
    """Rooted planar tree: the root has n + 1 children, every other vertex n.

    Vertices are numbered breadth first with children in counterclockwise
    (left-to-right) order; generation k sits at hyperbolic radius k * step.
    """
    if n < 2:
        raise ParameterOutOfRange("n must be at least 2")
    if depth < 0:
        raise ParameterOutOfRange("depth must be non-negative")
    step = math.log(2.0 * n) if step is None else step
    coords = [np.zeros(1, dtype=complex)]
    parent = [np.array([-1], dtype=np.int64)]
    gen = [np.zeros(1, dtype=np.int64)]
    lo, width = np.zeros(1), np.full(1, 2.0 * math.pi)
    level = np.zeros(1, dtype=np.int64)
    first = 1
    for k in range(1, depth + 1):
        m = n + 1 if k == 1 else n
        par = np.repeat(level, m)
        slot = np.tile(np.arange(m), len(level))
        w = np.repeat(width, m) / m
        lo = np.repeat(lo, m) + slot * w
        width = w
        r = math.tanh(0.5 * k * step)
        coords.append(r * np.exp(1j * (lo + 0.5 * w)))
        parent.append(par)
        gen.append(np.full(len(par), k, dtype=np.int64))
        level = np.arange(first, first + len(par), dtype=np.int64)
        first += len(par)
    parent = np.concatenate(parent)
    gen = np.concatenate(gen)
    kids = np.arange(1, len(parent), dtype=np.int64)
    edges = np.stack([parent[1:], kids], axis=1)
    g = LatticeGraph(kind="tree", params={"n": n}, coords=np.concatenate(coords), edges=edges,
                     generations=depth, gen=gen, parent=parent)
    g.complete = gen < depth
    return g


def tree_vertex_count(n, depth):
    return 1 + (n + 1) * (n ** depth - 1) // (n - 1)


# -------------------------------------------------------------------- balls

def graph_ball(graph, center, radius):
    if not 0 <= center < graph.n_vertices:
        raise ParameterOutOfRange("center is not a vertex")
    if radius < 0:
        raise ParameterOutOfRange("radius must be non-negative")
    dist = bfs_distances(graph, center)
    interior = np.nonzero((dist >= 0) & (dist <= radius))[0]
    if graph.complete is not None and not np.all(graph.complete[interior]):
        raise RadiusExceedsGeneration(f"radius {radius} reaches the edge of the generated patch")
    boundary = np.nonzero(dist == radius + 1)[0]
    return BoxRegion(graph, center, radius, interior, boundary, dist)


def sphere_ball_ratios(graph, center, max_radius):
    dist = bfs_distances(graph, center)
    out = []
    for r in range(1, max_radius + 1):
        ball = np.count_nonzero((dist >= 0) & (dist <= r))
        sphere = np.count_nonzero(dist == r)
        out.append(sphere / ball)
    return out


# -------------------------------------------------------------------- signs

def assign_signs(graph, family, perturb=1e-6, tol=1e-9, attempts=5):
    """Region sign of every vertex; the family is moved by a tiny translation
    if a vertex lies on one of its geodesics."""
    z = graph.halfplane_coords()
    if len(family.geodesics) == 0:
        return BoundarySpinAssignment(np.full(len(z), family.base_sign, dtype=np.int64), family, 0.0)
    fam = family
    shift = 0.0
    for k in range(attempts + 1):
        if np.min(min_side_distance(fam.endpoints(), z)) > tol:
            signs = fam.sign_of(z).astype(np.int64)
            return BoundarySpinAssignment(signs, fam, shift)
        shift = perturb * (k + 1)
        fam = move_family(family, nudge(shift))
    raise DegenerateIncidence("vertices stay on family geodesics after perturbation")


def nudge(eps):
    """A fixed generic isometry of size ~eps: rotation about the origin by eps
    followed by translation by eps along the imaginary axis. It fixes no
    geodesic, so it moves every curve off a vertex it passes through."""
    rot = hg.Isometry.rotation_about(hg.ORIGIN, eps)
    return hg.Isometry.translation_along(hg.geodesic(0.0, hg.INF), eps) @ rot


def move_family(family, iso):
    geos = [iso(g) for g in family.geodesics]
    bp = iso(family.base_point)
    return SignedGeodesicFamily(
        geodesics=geos, params=family.params, construction=family.construction,
        base_point=hg.ModelPoint(bp.x, bp.y), base_sign=family.base_sign,
        selected_arc=family.selected_arc, seed_arc=family.seed_arc, horizon=family.horizon,
        phases=list(family.phases), cases=list(family.cases),
    )


# ---------------------------------------------------------------------- json

def graph_to_json(graph):
    out = {"kind": graph.kind, **graph.params, "generations": graph.generations,
           "vertices": [{"x": float(z.real), "y": float(z.imag), "gen": int(k)}
                        for z, k in zip(graph.coords, graph.gen)],
           "edges": graph.edges.tolist(),
           "faces": [list(map(int, f)) for f in graph.faces]}
    if graph.kind == "tree":
        out["parent"] = graph.parent.tolist()
    return out


def graph_from_json(obj):
    coords = np.array([complex(v["x"], v["y"]) for v in obj["vertices"]])
    gen = np.array([v["gen"] for v in obj["vertices"]], dtype=np.int64)
    kind = obj["kind"]
    if kind == "tree":
        params = {"n": obj["n"]}
        parent = np.array(obj["parent"], dtype=np.int64)
        g = LatticeGraph(kind, params, coords, np.array(obj["edges"]), [], obj["generations"], gen,
                         parent=parent)
        g.complete = gen < obj["generations"]
    else:
        params = {"p": obj["p"], "q": obj["q"]}
        faces = [tuple(f) for f in obj["faces"]]
        g = LatticeGraph(kind, params, coords, np.array(obj["edges"]), faces, obj["generations"], gen)
        g.complete = _face_counts(faces, len(coords)) == params["q"]
    return g
