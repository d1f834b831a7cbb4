"""SVG scenes of the Poincare disk: geodesic families with sign tint, tilings,
spin states with their interfaces, and tree coverings.

Coordinates: the unit disk is drawn with radius SCALE about the image
center, y pointing up (SVG's y axis is flipped).
"""
import numpy as np

from . import hypgeo as hg

SCALE = 400.0
PAD = 10.0
PLUS, MINUS = "#d9e6f5", "#f6d8d2"


def _xy(w):
    return (PAD + SCALE * (1 + w.real), PAD + SCALE * (1 - w.imag))


def _fmt(v):
    return f"{v:.4f}"


def _pt(w):
    x, y = _xy(w)
    return f"{_fmt(x)} {_fmt(y)}"


def arc_path(w1, w2):
    """SVG path of the hyperbolic segment (or full geodesic, for points on
    the unit circle) between disk points w1 and w2."""
    w1, w2 = complex(w1), complex(w2)
    # a circle orthogonal to the absolute through w has Re(w conj(c)) = (|w|^2 + 1) / 2
    a = np.array([[w1.real, w1.imag], [w2.real, w2.imag]])
    if abs(np.linalg.det(a)) < 1e-12:
        return f"M {_pt(w1)} L {_pt(w2)}"
    cx, cy = np.linalg.solve(a, [(abs(w1) ** 2 + 1) / 2, (abs(w2) ** 2 + 1) / 2])
    c = complex(cx, cy)
    rad = abs(w1 - c)
    # orientation on screen of w1 -> w2 around c decides the sweep flag
    s1, s2, sc = np.array(_xy(w1)), np.array(_xy(w2)), np.array(_xy(c))
    cross = (s1[0] - sc[0]) * (s2[1] - sc[1]) - (s1[1] - sc[1]) * (s2[0] - sc[0])
    sweep = 1 if cross > 0 else 0
    return f"M {_pt(w1)} A {_fmt(rad * SCALE)} {_fmt(rad * SCALE)} 0 0 {sweep} {_pt(w2)}"


class Scene:
    def __init__(self, title=""):
        self.items = []
        self.title = title

    def add(self, text):
        self.items.append(text)

    def path(self, d, cls, stroke, width=1.0):
        self.add(f'<path class="{cls}" d="{d}" fill="none" stroke="{stroke}" stroke-width="{width}"/>')

    def dot(self, w, r, fill, cls):
        x, y = _xy(complex(w))
        self.add(f'<circle class="{cls}" cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r)}" fill="{fill}"/>')

    def svg(self, run_id=None):
        size = 2 * (SCALE + PAD)
        c = SCALE + PAD
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(size)}" height="{_fmt(size)}" '
                f'viewBox="0 0 {_fmt(size)} {_fmt(size)}">')
        out = [head]
        if self.title:
            out.append(f"<title>{self.title}</title>")
        if run_id:
            out.append(f"<desc>run_id {run_id}</desc>")
        out.append(f'<circle class="absolute" cx="{_fmt(c)}" cy="{_fmt(c)}" r="{_fmt(SCALE)}" '
                   'fill="white" stroke="black" stroke-width="1.5"/>')
        out.extend(self.items)
        out.append("</svg>")
        return "\n".join(out) + "\n"


def _geodesic_disk_ends(g):
    d = hg.convert_model(g, hg.DISK)
    return np.exp(1j * d.e1.value), np.exp(1j * d.e2.value)


def family_scene(family, tint=True, grid=48):
    sc = Scene(f"family {family.construction}, {len(family.geodesics)} geodesics")
    if tint and family.geodesics:
        xs = (np.arange(grid) + 0.5) / grid * 2 - 1
        w = (xs[None, :] + 1j * xs[:, None]).ravel()
        w = w[np.abs(w) < 0.995]
        z = hg.cayley_inverse(w)
        signs = family.sign_of(z)
        r = SCALE / grid
        for v, s in zip(w, signs):
            sc.dot(v, r, PLUS if s > 0 else MINUS, "tint")
    for g in family.geodesics:
        a, b = _geodesic_disk_ends(g)
        sc.path(arc_path(a, b), "geodesic", "black", 1.0)
    return sc


def graph_scene(graph, spins=None, interfaces=None):
    sc = Scene(f"{graph.kind} with {graph.n_vertices} vertices")
    z = graph.coords
    for i, j in graph.edges:
        sc.path(arc_path(z[i], z[j]), "edge", "#888888", 0.4)
    if interfaces is not None:
        for i, j in interfaces:
            sc.path(arc_path(z[i], z[j]), "interface", "#c0392b", 1.6)
    if spins is not None:
        for v in range(graph.n_vertices):
            if spins[v] == 0:
                continue
            sc.dot(z[v], 1.6, "#1f4e9c" if spins[v] > 0 else "#c0392b", "spin")
    return sc


def covering_scene(tree, chain_id, bond):
    sc = Scene(f"covering of a tree with {tree.n_vertices} vertices")
    z = tree.coords
    for i, j in tree.edges:
        same = chain_id[i] == chain_id[j]
        if bond[j]:
            sc.path(arc_path(z[i], z[j]), "dimer", "black", 2.2)
        else:
            sc.path(arc_path(z[i], z[j]), "chain" if same else "edge", "#4a7bd0" if same else "#bbbbbb",
                    1.2 if same else 0.5)
    return sc

