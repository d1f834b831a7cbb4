"""Ising sampling on lattice boxes with frozen boundary spins, interface
extraction and the rigidity / partition / phase observables.

All statistics here are empirical sampling of the finite-volume Gibbs state
by single-site Markov chains; equilibrium is only checked exactly on
enumerable instances (see the tests).
"""
import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numba
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import hypgeo as hg
from .errors import HypothesisViolated, InconsistentBoundary, ParameterOutOfRange
from .tiling import assign_signs

DYNAMICS = ("metropolis", "heat_bath")


@dataclass
class SpinState:
    graph: object
    spins: np.ndarray          # int8, one per graph vertex
    free: np.ndarray           # bool mask of updatable vertices
    active: np.ndarray         # bool mask of vertices in the system

    def copy(self):
        return SpinState(self.graph, self.spins.copy(), self.free.copy(), self.active.copy())

    @property
    def free_indices(self):
        return np.nonzero(self.free)[0]

    def frozen_hash(self):
        return hash((self.spins[self.active & ~self.free]).tobytes())


@dataclass(frozen=True)
class SamplerConfig:
    beta: float
    sweeps: int
    burn_in: int = 0
    replicas: int = 1
    seed: int = 0
    dynamics: str = "metropolis"
    record_every: int = 1

    def __post_init__(self):
        if not self.beta >= 0:
            raise ParameterOutOfRange("beta must be non-negative")
        if self.replicas < 1 or self.sweeps < 0 or self.burn_in < 0 or self.record_every < 1:
            raise ParameterOutOfRange("replicas >= 1, sweeps/burn_in >= 0, record_every >= 1")
        if self.dynamics not in DYNAMICS:
            raise ParameterOutOfRange(f"dynamics must be one of {DYNAMICS}")


def replica_rng(seed, replica):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replica,))))


def worker_count():
    env = os.environ.get("MILLEFEUILLE_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# ------------------------------------------------------------------ states

def box_state(graph, box, spins):
    """State on interior + boundary of a box, boundary frozen."""
    active = np.zeros(graph.n_vertices, dtype=bool)
    active[box.interior] = True
    active[box.boundary] = True
    free = np.zeros(graph.n_vertices, dtype=bool)
    free[box.interior] = True
    return SpinState(graph, np.asarray(spins, dtype=np.int8).copy(), free, active)


def ground_state(graph, box, family):
    """The configuration sigma_Gamma restricted to the box."""
    signs = assign_signs(graph, family).signs
    return box_state(graph, box, signs)


def plus_state(graph, box):
    return box_state(graph, box, np.ones(graph.n_vertices, dtype=np.int8))


def _active_edges(state):
    e = state.graph.edges
    return e[state.active[e[:, 0]] & state.active[e[:, 1]]]


def energy(state):
    """H = - sum over nearest neighbour pairs inside the system."""
    e = _active_edges(state)
    s = state.spins.astype(np.int64)
    return float(-np.sum(s[e[:, 0]] * s[e[:, 1]]))


def magnetization(state):
    return float(np.mean(state.spins[state.free])) if state.free.any() else 0.0


# ------------------------------------------------------------------ kernel

@numba.njit(cache=True, nogil=True)
def _sweep(spins, order, indptr, indices, active, beta, u, heat_bath):
    """Single-site updates at the sites listed in `order`; returns the energy
    change."""
    de_total = 0.0
    for k in range(order.shape[0]):
        v = order[k]
        h = 0
        for p in range(indptr[v], indptr[v + 1]):
            w = indices[p]
            if active[w]:
                h += spins[w]
        s = spins[v]
        de = 2.0 * s * h
        if heat_bath:
            if math.isinf(beta):
                if h > 0:
                    new = 1
                elif h < 0:
                    new = -1
                else:
                    new = 1 if u[k] < 0.5 else -1
            else:
                pplus = 1.0 / (1.0 + math.exp(-2.0 * beta * h))
                new = 1 if u[k] < pplus else -1
            if new != s:
                spins[v] = new
                de_total += de
        else:
            if de <= 0.0:
                accept = True
            elif math.isinf(beta):
                accept = False
            else:
                accept = u[k] < math.exp(-beta * de)
            if accept:
                spins[v] = -s
                de_total += de
    return de_total


@dataclass
class ChainResult:
    state: SpinState
    energy: np.ndarray          # after every sweep (burn-in included)
    magnetization: np.ndarray
    records: list = field(default_factory=list)


def run_chain(state, config, replica=0, observe=None):
    """Run one replica. `observe(state, sweep)` is called after burn-in every
    `record_every` sweeps; its results are collected in `records`."""
    st = state.copy()
    g = st.graph
    indptr, indices = g.csr()
    order = st.free_indices.astype(np.int64)
    rng = replica_rng(config.seed, replica)
    total = config.burn_in + config.sweeps
    en = np.empty(total)
    mag = np.empty(total)
    e = energy(st)
    heat = config.dynamics == "heat_bath"
    records = []
    n = order.shape[0]
    for t in range(total):
        # random scan: n uniform site picks per sweep (a fixed order is not
        # ergodic for metropolis at beta = 0)
        sites = order[rng.integers(0, n, n)] if n else order
        u = rng.random(n)
        e += _sweep(st.spins, sites, indptr, indices, st.active, float(config.beta), u, heat)
        en[t] = e
        mag[t] = st.spins[order].mean() if order.size else 0.0
        if observe is not None and t >= config.burn_in and (t - config.burn_in + 1) % config.record_every == 0:
            records.append(observe(st, t))
    return ChainResult(st, en, mag, records)


def run_replicas(state, config, observe=None, workers=None):
    workers = worker_count() if workers is None else workers
    if workers <= 1 or config.replicas == 1:
        return [run_chain(state, config, r, observe) for r in range(config.replicas)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        futs = [ex.submit(run_chain, state, config, r, observe) for r in range(config.replicas)]
        return [f.result() for f in futs]


# -------------------------------------------------------------- interfaces

@dataclass
class ContourSet:
    edges: np.ndarray           # (D, 2) disagreement edges
    edge_ids: np.ndarray        # indices into the context edge list
    labels: np.ndarray          # component label per disagreement edge
    open: dict                  # component label -> tuple of attachment indices
    closed: list                # labels of closed components
    points: np.ndarray = None   # half-plane dual points (edge midpoints)

    @property
    def n_components(self):
        return len(self.open) + len(self.closed)


@dataclass(frozen=True)
class Partition:
    pairs: frozenset            # frozenset of frozenset({a, b}) of attachment labels

    @staticmethod
    def from_pairs(pairs):
        return Partition(frozenset(frozenset(p) for p in pairs))

    def __len__(self):
        return len(self.pairs)


class InterfaceContext:
    """Precomputed box data for repeated interface extraction."""

    def __init__(self, graph, box, family, boundary_signs=None):
        self.graph = graph
        self.box = box
        self.family = family
        active = np.zeros(graph.n_vertices, dtype=bool)
        active[box.interior] = True
        active[box.boundary] = True
        interior = np.zeros(graph.n_vertices, dtype=bool)
        interior[box.interior] = True
        self.active = active
        e = graph.edges
        self.edges = e[active[e[:, 0]] & active[e[:, 1]]]
        self.edge_index = {(int(i), int(j)): k for k, (i, j) in enumerate(self.edges)}
        links = []
        ring_links = []
        for f in graph.faces:
            if not all(active[v] for v in f):
                continue
            ids = [self._eid(f[a], f[(a + 1) % len(f)]) for a in range(len(f))]
            for a in range(len(ids)):
                for b in range(a + 1, len(ids)):
                    links.append((ids[a], ids[b]))
            if any(interior[v] for v in f):
                for a in range(len(f)):
                    u, w = f[a], f[(a + 1) % len(f)]
                    if not interior[u] and not interior[w]:
                        ring_links.append((u, w))
        self.links = np.array(links, dtype=np.int64).reshape(-1, 2)
        self.ring = self._ring_cycle(ring_links, box.boundary)
        if boundary_signs is None:
            self.assignment = assign_signs(graph, family)
            boundary_signs = self.assignment.signs
            fam = self.assignment.family
        else:
            self.assignment = None
            fam = family
        self.boundary_signs = np.asarray(boundary_signs)
        self._attachments(fam)
        zd = graph.coords
        self.midpoints = _disk_midpoints(zd[self.edges[:, 0]], zd[self.edges[:, 1]])
        self.hp_midpoints = hg.cayley_inverse(self.midpoints)

    def _eid(self, u, w):
        return self.edge_index[(min(u, w), max(u, w))]

    @staticmethod
    def _ring_cycle(ring_links, boundary):
        nb = {}
        for u, w in set((min(a, b), max(a, b)) for a, b in ring_links):
            nb.setdefault(u, []).append(w)
            nb.setdefault(w, []).append(u)
        bset = set(int(v) for v in boundary)
        if set(nb) != bset or any(len(v) != 2 for v in nb.values()):
            raise InconsistentBoundary("box boundary is not a simple cycle")
        start = min(nb)
        cycle = [start]
        prev, cur = None, start
        while True:
            a, b = nb[cur]
            nxt = a if a != prev else b
            if nxt == start:
                break
            cycle.append(nxt)
            prev, cur = cur, nxt
        if len(cycle) != len(bset):
            raise InconsistentBoundary("box boundary splits into several cycles")
        return np.array(cycle, dtype=np.int64)

    def _attachments(self, fam):
        ring = self.ring
        s = self.boundary_signs
        ends = fam.endpoints()
        z = self.graph.halfplane_coords()
        att, geo = [], []
        for k in range(len(ring)):
            u, w = ring[k], ring[(k + 1) % len(ring)]
            if s[u] == s[w]:
                continue
            sep = [i for i, (a, b) in enumerate(ends)
                   if (hg._side_hp(np.array([z[u]]), a, b)[0] > 0) != (hg._side_hp(np.array([z[w]]), a, b)[0] > 0)]
            if len(sep) != 1:
                raise InconsistentBoundary(f"boundary edge {u}-{w} is crossed by {len(sep)} geodesics")
            att.append(self._eid(u, w))
            geo.append(sep[0])
        self.attach_edges = np.array(att, dtype=np.int64)
        self.attach_geodesic = np.array(geo, dtype=np.int64)
        pairs = []
        self.crossing_geodesics = sorted(set(geo))
        for i in self.crossing_geodesics:
            idx = [a for a in range(len(geo)) if geo[a] == i]
            if len(idx) != 2:
                raise InconsistentBoundary(f"geodesic {i} meets the box boundary {len(idx)} times")
            pairs.append(tuple(idx))
        self.ground_partition = Partition.from_pairs(pairs)
        self.k = len(pairs)

    def disagreement(self, spins):
        s = spins
        return s[self.edges[:, 0]] != s[self.edges[:, 1]]

    def extract(self, spins):
        dis = self.disagreement(spins)
        ids = np.nonzero(dis)[0]
        if ids.size == 0:
            return (ContourSet(np.zeros((0, 2), dtype=np.int64), ids, ids, {}, [], np.zeros(0, dtype=complex)),
                    Partition(frozenset()))
        pos = np.full(len(self.edges), -1, dtype=np.int64)
        pos[ids] = np.arange(ids.size)
        live = dis[self.links[:, 0]] & dis[self.links[:, 1]]
        l0, l1 = pos[self.links[live, 0]], pos[self.links[live, 1]]
        adj = coo_matrix((np.ones(l0.size), (l0, l1)), shape=(ids.size, ids.size))
        _, labels = connected_components(adj, directed=False)
        att_comp = labels[pos[self.attach_edges]] if self.attach_edges.size else np.zeros(0, dtype=np.int64)
        open_ = {}
        for a, c in enumerate(att_comp):
            open_.setdefault(int(c), []).append(a)
        closed = sorted(set(int(c) for c in np.unique(labels)) - set(open_))
        pairs = []
        for c, atts in open_.items():
            if len(atts) % 2:
                raise InconsistentBoundary("open interface with an odd number of boundary attachments")
            atts = sorted(atts)
            pairs.extend((atts[i], atts[i + 1]) for i in range(0, len(atts), 2))
        contours = ContourSet(self.edges[ids], ids, labels, {c: tuple(v) for c, v in open_.items()}, closed,
                              self.hp_midpoints[ids])
        return contours, Partition.from_pairs(pairs)

    def component_edges(self, contours, geodesic_index):
        """Context edge ids of the open component holding the first boundary
        attachment of the given geodesic."""
        first = int(np.nonzero(self.attach_geodesic == geodesic_index)[0][0])
        for c, atts in contours.open.items():
            if first in atts:
                return contours.edge_ids[contours.labels == c]
        return np.zeros(0, dtype=np.int64)


def _disk_midpoints(a, b):
    """Hyperbolic midpoints of disk segments (via the Klein model)."""
    ka = 2 * a / (1 + np.abs(a) ** 2)
    kb = 2 * b / (1 + np.abs(b) ** 2)
    ga = 1 / np.sqrt(1 - np.abs(ka) ** 2)
    gb = 1 / np.sqrt(1 - np.abs(kb) ** 2)
    km = (ga * ka + gb * kb) / (ga + gb)
    return km / (1 + np.sqrt(1 - np.abs(km) ** 2))


def extract_interfaces(state, box, family, context=None):
    ctx = InterfaceContext(state.graph, box, family) if context is None else context
    return ctx.extract(state.spins)


# -------------------------------------------------------------- containment

def _gamma_samples(gamma, z, span, step=0.1):
    base = hg.closest_point(gamma, z)
    ts = np.arange(-span, span + step / 2, step)
    ys = hg.sample_geodesic(gamma, ts, base=base)
    return ys


def cm_membership(points_hp, gamma, z, m, span=None, step=0.1):
    """Whether half-plane points lie in C_m = union of B(y, max(m, d(y, z)))
    over y on gamma (sampled at arc-length step `step`)."""
    points_hp = np.atleast_1d(np.asarray(points_hp, dtype=complex))
    zc = hg._hp_point(z)
    if span is None:
        far = hg.halfplane_distance(points_hp, np.full(points_hp.shape, zc)).max() if points_hp.size else 0.0
        span = far + m + 5.0
    ys = _gamma_samples(gamma, z, span, step)
    r = np.maximum(m, hg.halfplane_distance(ys, np.full(ys.shape, zc)))
    inside = np.zeros(points_hp.shape, dtype=bool)
    for y, ry in zip(ys, r):
        inside |= hg.halfplane_distance(points_hp, np.full(points_hp.shape, y)) <= ry
    return inside


def containment_check(contours, gamma, z, m, context=None, geodesic_index=None):
    """True iff every dual point of the interface associated with gamma lies
    in C_m(gamma, z). With a context and geodesic index that interface is the
    open component attached to the geodesic; otherwise all dual points of
    `contours` are tested."""
    if m <= 0:
        raise ParameterOutOfRange("m must be positive")
    if context is not None and geodesic_index is not None:
        pts = context.hp_midpoints[context.component_edges(contours, geodesic_index)]
    else:
        pts = contours.points
    if len(pts) == 0:
        return True
    return bool(np.all(cm_membership(pts, gamma, z, m)))


# ---------------------------------------------------------------- experiments

def default_anchors(family, ctx):
    """z_i: foot of the common perpendicular for the first pair if there are
    two crossing geodesics, else the foot from the origin."""
    geos = family.geodesics
    idx = ctx.crossing_geodesics
    if len(idx) == 2:
        _, f1, f2 = hg.common_perpendicular(geos[idx[0]], geos[idx[1]])
        return {idx[0]: f1, idx[1]: f2}
    return {i: hg.closest_point(geos[i], hg.ORIGIN) for i in idx}


def _replica_stderr(x):
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return float("nan")
    return float(np.std(x, ddof=1) / math.sqrt(len(x)))


def rigidity_experiment(graph, family, box, config, m_values, betas=None, anchors=None, workers=None):
    """Escape frequency P[interface not in C_m] per (beta, m) and the
    wrong-partition frequency P[Pi != Pi_0] per beta.

    Frequencies are averaged over recorded sweeps within a replica; standard
    errors are across replicas.
    """
    ctx = InterfaceContext(graph, box, family)
    fam = ctx.assignment.family
    anchors = default_anchors(fam, ctx) if anchors is None else anchors
    inside = {}
    hp_mid = ctx.hp_midpoints
    for i in ctx.crossing_geodesics:
        for m in m_values:
            inside[(i, m)] = cm_membership(hp_mid, fam.geodesics[i], anchors[i], m)
    start = box_state(graph, box, ctx.boundary_signs)
    betas = [config.beta] if betas is None else betas
    rows = []
    for beta in betas:
        cfg = replace(config, beta=beta)

        def observe(st, t):
            contours, part = ctx.extract(st.spins)
            esc = []
            for m in m_values:
                bad = False
                for i in ctx.crossing_geodesics:
                    ids = ctx.component_edges(contours, i)
                    if ids.size == 0 or not np.all(inside[(i, m)][ids]):
                        bad = True
                        break
                esc.append(bad)
            return esc, part != ctx.ground_partition, magnetization(st)

        results = run_replicas(start, cfg, observe, workers)
        esc = np.array([[r[0] for r in res.records] for res in results], dtype=float)   # R x T x M
        wrong = np.array([[r[1] for r in res.records] for res in results], dtype=float)
        mags = np.array([[r[2] for r in res.records] for res in results], dtype=float)
        for j, m in enumerate(m_values):
            per = esc[:, :, j].mean(axis=1)
            pw = wrong.mean(axis=1)
            rows.append({
                "beta": beta, "m": m, "replicas": cfg.replicas, "sweeps": cfg.sweeps,
                "samples": int(esc.shape[1]), "escapes": float(per.mean()), "escapes_se": _replica_stderr(per),
                "wrong_partition": float(pw.mean()), "wrong_partition_se": _replica_stderr(pw),
                "magnetization": float(mags.mean()),
            })
    return rows


def lambda_touches(ctx, spins, ground_dis, touch):
    """Whether the symmetric difference of the contour sets meets the edges
    marked in `touch`."""
    lam = ctx.disagreement(spins) != ground_dis
    return bool(np.any(lam & touch))


def phase_probe(graph, family, box, config, Z, r, betas=None, workers=None):
    """Frequency of Lambda (symmetric difference with the ground contours)
    touching U_r(Z), and the mean spin on U_r(Z) against the all-plus
    boundary run."""
    ctx = InterfaceContext(graph, box, family)
    ground = box_state(graph, box, ctx.boundary_signs)
    zc = hg._hp_point(Z)
    zhp = graph.halfplane_coords()
    near = hg.halfplane_distance(zhp, np.full(zhp.shape, zc)) <= r
    ur = near & ground.active
    if not ur.any():
        raise HypothesisViolated("U_r(Z) contains no box vertex")
    if np.any(ground.spins[ur] != 1):
        raise HypothesisViolated("the ground configuration is not + on U_r(Z)")
    ground_dis = ctx.disagreement(ground.spins)
    touch = ur[ctx.edges[:, 0]] | ur[ctx.edges[:, 1]]
    if lambda_touches(ctx, ground.spins, ground_dis, touch):
        raise HypothesisViolated("ground configuration has a nonempty Lambda")
    plus = plus_state(graph, box)
    betas = [config.beta] if betas is None else betas
    rows = []
    for beta in betas:
        cfg = replace(config, beta=beta)

        def observe(st, t):
            return lambda_touches(ctx, st.spins, ground_dis, touch), float(st.spins[ur].mean())

        def observe_plus(st, t):
            return float(st.spins[ur].mean())

        res = run_replicas(ground, cfg, observe, workers)
        res_plus = run_replicas(plus, replace(cfg, seed=cfg.seed + 1), observe_plus, workers)
        hits = np.array([[x[0] for x in q.records] for q in res], dtype=float).mean(axis=1)
        spin = np.array([[x[1] for x in q.records] for q in res], dtype=float).mean(axis=1)
        spin_plus = np.array([q.records for q in res_plus], dtype=float).mean(axis=1)
        rows.append({
            "beta": beta, "replicas": cfg.replicas, "sweeps": cfg.sweeps,
            "lambda_hits": float(hits.mean()), "lambda_hits_se": _replica_stderr(hits),
            "mean_spin_Ur": float(spin.mean()), "mean_spin_Ur_se": _replica_stderr(spin),
            "mean_spin_Ur_plus": float(spin_plus.mean()),
            "spin_gap": float(abs(spin.mean() - spin_plus.mean())),
        })
    return rows


# ---------------------------------------------------------------------- csv

STAT_COLUMNS = ["run_id", "beta", "m", "replicas", "sweeps", "samples", "escapes", "escapes_se",
                "wrong_partition", "wrong_partition_se", "lambda_hits", "lambda_hits_se",
                "mean_spin_Ur", "mean_spin_Ur_se", "mean_spin_Ur_plus", "magnetization"]


def write_stats_csv(path, rows, run_id):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=STAT_COLUMNS, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({c: _fmt(row.get(c, "")) for c in STAT_COLUMNS} | {"run_id": run_id})


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v
