"""k-chain coverings of Cayley trees, dimer sets, the configurations sigma_D,
exhaustive Peierls ratios over finite contours, and tree sampling.

Trees come from `tiling.build_cayley_tree`: breadth-first numbering with
children in counterclockwise order. The "left" bond at a vertex is the bond to
its first child and "leftmost" among equidistant vertices means smallest
index (the mirror convention gives the mirror covering; every measured
quantity is mirror invariant).
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction

import numba
import numpy as np

from . import gibbs
from .errors import BadOffsets, DepthTooSmall, KEven, NotFound, ParameterOutOfRange
from .tiling import graph_ball


@dataclass(frozen=True)
class Chain:
    vertices: tuple
    truncated: bool = False

    @property
    def k(self):
        return len(self.vertices) - 1


@dataclass
class Covering:
    tree: object
    k: int
    chain_id: np.ndarray       # vertex -> chain index
    pos: np.ndarray            # vertex -> position x_pos in its chain
    starts: np.ndarray         # chain -> first vertex x_0
    truncated: np.ndarray      # chain -> True if cut by the generation horizon

    @property
    def n_chains(self):
        return len(self.starts)

    @property
    def chains(self):
        order = np.lexsort((self.pos, self.chain_id))
        cuts = np.searchsorted(self.chain_id[order], np.arange(1, self.n_chains))
        return [Chain(tuple(int(v) for v in part), bool(t))
                for part, t in zip(np.split(order, cuts), self.truncated)]

    def chain(self, i):
        return self.chains[i]


@dataclass
class DimerSet:
    tree: object
    bond: np.ndarray           # vertex c -> the bond (parent(c), c) is a dimer
    provenance: str

    @property
    def dimers(self):
        c = np.nonzero(self.bond)[0]
        return np.stack([self.tree.parent[c], c], axis=1)

    def __len__(self):
        return int(np.count_nonzero(self.bond))


@dataclass(frozen=True)
class TreeContour:
    enclosed: tuple            # connected vertex set S
    boundary: tuple            # edges with exactly one endpoint in S
    crossed_dimers: int

    @property
    def length(self):
        return len(self.boundary)

    @property
    def ratio(self):
        return Fraction(self.crossed_dimers, self.length)


def _first_child(tree):
    par = tree.parent
    n = tree.n_vertices
    counts = np.bincount(par[1:], minlength=n) if n > 1 else np.zeros(n, dtype=np.int64)
    first = np.full(n, -1, dtype=np.int64)
    has = counts > 0
    first[has] = np.searchsorted(par[1:], np.nonzero(has)[0]) + 1
    return first, counts


def _require_tree(tree):
    if tree.kind != "tree" or tree.parent is None:
        raise ParameterOutOfRange("a Cayley tree is required")


# ---------------------------------------------------------------- coverings

@numba.njit(cache=True)
def _greedy(first, k, chain_id, pos, starts, truncated):
    n = first.shape[0]
    nc = 0
    for x in range(n):                  # breadth-first order: closest, then leftmost
        if chain_id[x] >= 0:
            continue
        starts[nc] = x
        v = x
        for i in range(k + 1):
            chain_id[v] = nc
            pos[v] = i
            if i == k:
                break
            v = first[v]                # always the left bond
            if v < 0:
                truncated[nc] = True
                break
        nc += 1
    return nc


def left_greedy_covering(tree, k):
    """Covering by k-chains: the first chain starts at the root, each next one
    at the closest (then leftmost) uncovered vertex, always taking left bonds.
    Chains cut by the generation horizon are kept and flagged truncated."""
    _require_tree(tree)
    if k < 1:
        raise ParameterOutOfRange("k must be at least 1")
    if tree.generations < k:
        raise DepthTooSmall(f"depth {tree.generations} holds no complete {k}-chain")
    first, _ = _first_child(tree)
    n = tree.n_vertices
    chain_id = np.full(n, -1, dtype=np.int64)
    pos = np.zeros(n, dtype=np.int64)
    starts = np.zeros(n, dtype=np.int64)
    trunc = np.zeros(n, dtype=bool)
    nc = _greedy(first, k, chain_id, pos, starts, trunc)
    return Covering(tree, k, chain_id, pos, starts[:nc].copy(), trunc[:nc].copy())


def _bond_at(cov, child_pos_per_chain):
    """Dimer mask selecting, on each complete chain, the bond whose deeper
    vertex sits at the given chain position."""
    c = cov.chain_id
    sel = (~cov.truncated[c]) & (cov.pos == child_pos_per_chain[c])
    return sel


def middle_dimers(cov):
    """One dimer per complete chain: bond m + 1 = (x_m, x_{m+1}) for k = 2m+1."""
    if cov.k % 2 == 0:
        raise KEven(f"k = {cov.k} is even: chains have no middle bond")
    m = (cov.k - 1) // 2
    bond = _bond_at(cov, np.full(cov.n_chains, m + 1))
    return DimerSet(cov.tree, bond, "middle")


def offset_dimers(cov, l, n, root_sign=1):
    """D_{l:n}: on every complete chain the bond l bonds from the (+)-end,
    counted inclusively, i.e. (x_{l-1}, x_l) when x_0 is the (+)-end. Ends are
    labeled by the middle-dimer configuration with sigma(root) = root_sign."""
    if not (n > 0 and l >= n and l + n - 1 == cov.k):
        raise BadOffsets(f"need l >= n > 0 and l + n - 1 = k = {cov.k}; got l = {l}, n = {n}")
    mid = middle_dimers(cov)
    sig = sigma_from_dimers(cov.tree, mid, root_sign).spins
    plus_first = sig[cov.starts] == 1
    # (+)-end x_0: deeper vertex of the bond is x_l; (+)-end x_k: it is x_{k-l+1} = x_n
    child_pos = np.where(plus_first, l, n)
    bond = _bond_at(cov, child_pos)
    return DimerSet(cov.tree, bond, f"offset({l},{n})")


def sigma_from_dimers(tree, dimers, root_sign=1):
    """The configuration with sigma(z) sigma(z') = -1 exactly on dimer bonds
    and sigma(root) = root_sign, as a fully frozen state."""
    _require_tree(tree)
    if root_sign not in (1, -1):
        raise ParameterOutOfRange("root_sign must be +1 or -1")
    n = tree.n_vertices
    flip = np.where(dimers.bond, -1, 1).astype(np.int8)
    spins = np.empty(n, dtype=np.int8)
    spins[0] = root_sign
    par = tree.parent
    gen = tree.gen
    bounds = np.searchsorted(gen, np.arange(1, tree.generations + 2))
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        spins[lo:hi] = spins[par[lo:hi]] * flip[lo:hi]
    return gibbs.SpinState(tree, spins, np.zeros(n, dtype=bool), np.ones(n, dtype=bool))


def covering_to_json(cov, dimers=None):
    out = {"k": cov.k, "chains": [list(c.vertices) for c in cov.chains],
           "truncated": [bool(t) for t in cov.truncated]}
    if dimers is not None:
        out["dimers"] = dimers.dimers.tolist()
        out["provenance"] = dimers.provenance
    return out


# ----------------------------------------------------------- peierls ratios

@dataclass
class PeierlsReport:
    sup_ratio: Fraction
    argmax: TreeContour
    rows: list                  # per size: size, count, max_ratio (Fraction), argmax (vertex tuple)
    classes: int                # distinct anchor neighbourhoods enumerated


@numba.njit(cache=True, nogil=True)
def _enumerate(anchor, kids, addable, ind, deg, cds, nmax):
    """All connected sets whose vertex nearest the root is `anchor`, up to
    nmax vertices. Returns per-size counts, best (D-crossings, length) and a
    maximizing set."""
    w = kids.shape[1]
    counts = np.zeros(nmax + 1, dtype=np.int64)
    best_d = np.full(nmax + 1, -1, dtype=np.int64)
    best_b = np.ones(nmax + 1, dtype=np.int64)
    best_set = np.full((nmax + 1, nmax), -1, dtype=np.int64)
    setv = np.empty(nmax, dtype=np.int64)
    maxext = w * nmax + w
    ext = np.empty((nmax + 1, maxext), dtype=np.int64)
    extn = np.zeros(nmax + 1, dtype=np.int64)
    nxt = np.zeros(nmax + 1, dtype=np.int64)
    bnd = np.zeros(nmax + 1, dtype=np.int64)
    dc = np.zeros(nmax + 1, dtype=np.int64)

    setv[0] = anchor
    bnd[1] = deg[anchor]
    dc[1] = ind[anchor] + cds[anchor]
    counts[1] = 1
    best_d[1] = dc[1]
    best_b[1] = bnd[1]
    best_set[1, 0] = anchor
    e = 0
    for j in range(w):
        c = kids[anchor, j]
        if c >= 0 and addable[c]:
            ext[1, e] = c
            e += 1
    extn[1] = e
    size = 1
    while size >= 1:
        if size == nmax or nxt[size] >= extn[size]:
            size -= 1
            continue
        i = nxt[size]
        nxt[size] += 1
        u = ext[size, i]
        setv[size] = u
        s = size + 1
        b = bnd[size] + deg[u] - 2
        d = dc[size] + cds[u] - ind[u]
        counts[s] += 1
        if d * best_b[s] > best_d[s] * b:
            best_d[s] = d
            best_b[s] = b
            for q in range(s):
                best_set[s, q] = setv[q]
        if s < nmax:
            e = 0
            for q in range(i + 1, extn[size]):
                ext[s, e] = ext[size, q]
                e += 1
            for j in range(w):
                c = kids[u, j]
                if c >= 0 and addable[c]:
                    ext[s, e] = c
                    e += 1
            extn[s] = e
            nxt[s] = 0
            bnd[s] = b
            dc[s] = d
        size = s
    return counts, best_d, best_b, best_set


def _tree_arrays(tree, dimers):
    first, nkid = _first_child(tree)
    n = tree.n_vertices
    w = int(nkid.max()) if n > 1 else 1
    kids = np.full((n, w), -1, dtype=np.int64)
    for j in range(w):
        has = nkid > j
        kids[has, j] = first[has] + j
    ind = dimers.bond.astype(np.int64)
    cds = np.bincount(tree.parent[1:], weights=ind[1:], minlength=n).astype(np.int64) if n > 1 \
        else np.zeros(n, dtype=np.int64)
    deg = tree.degrees().astype(np.int64)
    addable = np.asarray(tree.complete, dtype=np.bool_)
    return kids, addable, ind, deg, cds


def _intern(rows):
    """Small consecutive ids for the rows of an int64 matrix."""
    hi = rows.max(axis=0) + 1
    if np.prod(hi.astype(float)) < 2.0 ** 62:
        key = np.zeros(len(rows), dtype=np.int64)
        for col, h in zip(rows.T, hi):
            key = key * int(h) + col
        _, inv = np.unique(key, return_inverse=True)
    else:
        _, inv = np.unique(rows, axis=0, return_inverse=True)
    return inv.astype(np.int64).ravel()


def anchor_classes(tree, dimers, max_interior):
    """Group anchors whose downward neighbourhoods of depth max_interior - 1
    are identical (same degrees, dimer flags and horizon cut-offs), so each
    group needs to be enumerated once. Returns (representatives, multiplicity)."""
    kids, addable, ind, deg, cds = _tree_arrays(tree, dimers)
    base = _intern(np.stack([deg, cds], axis=1))
    ids = base
    for _ in range(max_interior - 1):
        has = kids >= 0
        safe = np.where(has, kids, 0)
        code = np.where(has, 1 + ind[safe] + 2 * np.where(addable[safe], 1 + ids[safe], 0), 0)
        ids = _intern(np.column_stack([base, code]))
    pd = ind.copy()
    pd[0] = 2                            # the root has no parent bond
    anchors = np.nonzero(addable)[0]
    cls = _intern(np.stack([pd[anchors], ids[anchors]], axis=1))
    _, rep_idx, mult = np.unique(cls, return_index=True, return_counts=True)
    reps = anchors[rep_idx]
    order = np.argsort(reps)
    return reps[order], mult[order]


def _contour(tree, vertices, dimers):
    s = set(int(v) for v in vertices)
    boundary = []
    crossed = 0
    for v in sorted(s):
        for u in tree.neighbors(v):
            u = int(u)
            if u not in s:
                boundary.append((min(u, v), max(u, v)))
                child = max(u, v)
                crossed += int(dimers.bond[child])
    return TreeContour(tuple(sorted(s)), tuple(sorted(boundary)), crossed)


def peierls_ratio(tree, dimers, max_interior, dedup=True, workers=None):
    """Exhaustive sup of |boundary in D| / |boundary| over connected vertex
    sets of 1..max_interior generated, complete vertices (every vertex of S has
    all its neighbours generated, so the boundary is the full edge boundary)."""
    _require_tree(tree)
    if max_interior < 1:
        raise ParameterOutOfRange("max_interior must be positive")
    kids, addable, ind, deg, cds = _tree_arrays(tree, dimers)
    if dedup:
        reps, mult = anchor_classes(tree, dimers, max_interior)
    else:
        reps = np.nonzero(addable)[0]
        mult = np.ones(len(reps), dtype=np.int64)
    workers = gibbs.worker_count() if workers is None else workers

    def run(a):
        return _enumerate(int(a), kids, addable, ind, deg, cds, max_interior)

    if workers > 1 and len(reps) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run, reps))
    else:
        results = [run(a) for a in reps]
    counts = np.zeros(max_interior + 1, dtype=np.int64)
    best = [None] * (max_interior + 1)
    best_set = [None] * (max_interior + 1)
    for (cnt, bd, bb, bs), m in zip(results, mult):   # anchor order: first maximum wins
        counts += cnt * m
        for s in range(1, max_interior + 1):
            if cnt[s] == 0:
                continue
            r = Fraction(int(bd[s]), int(bb[s]))
            if best[s] is None or r > best[s]:
                best[s] = r
                best_set[s] = tuple(int(v) for v in bs[s, :s])
    rows = [{"size": s, "count": int(counts[s]), "max_ratio": best[s], "argmax": best_set[s]}
            for s in range(1, max_interior + 1) if counts[s] > 0]
    if not rows:
        raise ParameterOutOfRange("the tree has no complete vertex to enclose")
    top = max(rows, key=lambda r: (r["max_ratio"], -r["size"]))
    return PeierlsReport(top["max_ratio"], _contour(tree, top["argmax"], dimers), rows, len(reps))


def ratio_rows_csv(report):
    """CSV lines (size, count, max_ratio, argmax_set)."""
    lines = ["size,count,max_ratio,argmax_set"]
    for r in report.rows:
        lines.append(f"{r['size']},{r['count']},{r['max_ratio']},{' '.join(map(str, r['argmax']))}")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------ dimer paths

def _regions(tree):
    """Faces of the complement of the planar tree: each bond (parent(c), c)
    gets a region on its left and right. Corners at complete vertices glue
    neighbouring sides; horizon leaves are open ends (no corner)."""
    n = tree.n_vertices
    # side ids: 2c = left of bond to c (seen walking away from the root), 2c + 1 = right
    uf = np.arange(2 * n, dtype=np.int64)

    def find(a):
        while uf[a] != a:
            uf[a] = uf[uf[a]]
            a = uf[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            uf[max(ra, rb)] = min(ra, rb)

    for v in range(n):
        if not tree.complete[v]:
            continue
        kids = tree.children_of(v)
        # counterclockwise around v: parent bond, then the children in index order;
        # the corner from bond x to the next bond y joins x's ccw side to y's cw side
        around = ([("up", v)] if v != 0 else []) + [("down", int(c)) for c in kids]
        for a in range(len(around)):
            x, y = around[a], around[(a + 1) % len(around)]
            union(_side(x, ccw=True), _side(y, ccw=False))
    return np.array([find(a) for a in range(2 * n)], dtype=np.int64)


def _side(bond, ccw):
    kind, c = bond
    # the ccw side of a bond leaving v is the walker's left; a child bond is
    # walked away from the root, the parent bond towards it
    if kind == "down":
        return 2 * c if ccw else 2 * c + 1
    return 2 * c + 1 if ccw else 2 * c


def path_ratio_witness(tree, dimers, length):
    """A simple path in the plane (not a loop) crossing `length` bonds of the
    tree, all of them dimers: a path in the graph whose nodes are complementary
    regions and whose edges are dimer bonds. Raises NotFound if none exists in
    the generated region. Returns the list of crossed bonds."""
    _require_tree(tree)
    if length < 1:
        raise ParameterOutOfRange("length must be positive")
    reg = _regions(tree)
    cs = np.nonzero(dimers.bond)[0]
    adj = {}
    for c in cs:
        a, b = int(reg[2 * c]), int(reg[2 * c + 1])
        adj.setdefault(a, []).append((b, int(c)))
        adj.setdefault(b, []).append((a, int(c)))
    for start in sorted(adj):
        stack = [(start, [start], [])]
        while stack:
            node, seen, bonds = stack.pop()
            if len(bonds) == length:
                return [(int(tree.parent[c]), c) for c in bonds]
            for nb, c in sorted(adj[node], reverse=True):
                if nb not in seen:
                    stack.append((nb, seen + [nb], bonds + [c]))
    raise NotFound(f"no path crossing {length} consecutive dimers in the generated region")


# --------------------------------------------------------------- sampling

def tree_magnetization(state, depth):
    """Mean spin over the vertices within graph distance `depth` of the root."""
    sel = state.graph.gen <= depth
    return float(np.mean(state.spins[sel]))


def tree_stability_experiment(tree, dimers, config, inner_depth, boundary_depth, betas=None, workers=None):
    """Sample the ball of radius boundary_depth - 1 with the sphere at
    boundary_depth frozen to sigma_D, started from sigma_D. Reports the mean
    overlap of the sample with sigma_D on the ball of radius inner_depth."""
    if not 0 <= inner_depth < boundary_depth:
        raise ParameterOutOfRange("need 0 <= inner_depth < boundary_depth")
    ref = sigma_from_dimers(tree, dimers).spins
    box = graph_ball(tree, 0, boundary_depth - 1)
    start = gibbs.box_state(tree, box, ref)
    inner = tree.gen <= inner_depth
    refi = ref[inner].astype(np.float64)
    betas = [config.beta] if betas is None else betas
    rows = []
    for beta in betas:
        cfg = replace(config, beta=beta)

        def observe(st, t):
            return float(np.mean(st.spins[inner] * refi))

        res = gibbs.run_replicas(start, cfg, observe, workers)
        per = np.array([np.mean(r.records) for r in res])
        se = float(np.std(per, ddof=1) / math.sqrt(len(per))) if len(per) > 1 else float("nan")
        rows.append({"beta": beta, "replicas": cfg.replicas, "sweeps": cfg.sweeps,
                     "overlap": float(per.mean()), "overlap_se": se})
    return rows
