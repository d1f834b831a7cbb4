"""Command line driver: families, Ising runs, tree coverings and SVG scenes.

Every command writes its outputs atomically (``.part`` files renamed on
success) and always writes a manifest ``<out stem>.manifest.json`` holding
the effective configuration. Effective values come from flags, then the
``--config`` JSON file, then built-in defaults.

Exit codes: 0 ok, 1 usage or configuration error, 2 verification or bound
failure, 3 inconsistent runtime data.
"""
import argparse
import hashlib
import json
import math
import os
import sys
import time
import warnings
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import families as F
from . import gibbs as G
from . import hypgeo as hg
from . import render as V
from . import tiling as T
from . import treestates as TS
from .errors import (DegenerateIncidence, HypothesisViolated, InconsistentBoundary, KEven,
                     MillefeuilleError)

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_DATA = 0, 1, 2, 3
OUTPUT_KEYS = ("out", "svg", "state_out")

DEFAULTS = {
    "family": {"construction": 1, "alpha": 0.05, "eta": None, "depth": 2, "steps": None,
               "horizon": None, "threshold": None, "out": None, "svg": None},
    "ising": {"experiment": "rigidity", "p": 3, "q": 7, "radius": 5, "family": None,
              "beta_grid": [1.0, 2.0], "m_grid": [0.5, 1.0, 1.5, 2.0], "r": 1.0, "z": [0.0, 1.0],
              "sweeps": 1000, "burn_in": 100, "record_every": 10, "replicas": 4, "seed": 0,
              "dynamics": "metropolis", "n": 2, "k": 5, "inner_depth": 5, "boundary_depth": 8,
              "out": None, "state_out": None},
    "tree": {"n": 2, "depth": 8, "k": 5, "l": None, "n_offset": None, "max_interior": 12, "out": None,
             "svg": None},
    "render": {"input": None, "out": None},
}


class UsageError(Exception):
    pass


class BoundFailure(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


def build_parser():
    S = argparse.SUPPRESS
    ap = Parser(prog="millefeuille", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=S, help="JSON file of option values (flags override it)")
        p.add_argument("--out", default=S, help="main output file")

    p = sub.add_parser("family", help="build and verify a geodesical family", argument_default=S)
    common(p)
    p.add_argument("--construction", type=int, choices=[1, 2])
    p.add_argument("--alpha", type=float)
    p.add_argument("--eta", type=float, help="second parameter (construction 2, default alpha)")
    p.add_argument("--depth", type=int, help="construction 1 depth (also steps for construction 2)")
    p.add_argument("--steps", type=int, help="construction 2 steps")
    p.add_argument("--horizon", type=float, help="construction 1 truncation radius (scaled units)")
    p.add_argument("--threshold", type=float, help="pairwise R bound (default max(alpha, eta)*(1+1e-6))")
    p.add_argument("--svg", help="also render the family")

    p = sub.add_parser("ising", help="Ising experiments on a tiling or tree", argument_default=S)
    common(p)
    p.add_argument("--experiment", choices=["rigidity", "phase", "tree-stability"])
    p.add_argument("--p", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--radius", type=int)
    p.add_argument("--family", help="family JSON file")
    p.add_argument("--beta-grid", type=_floats, dest="beta_grid")
    p.add_argument("--m-grid", type=_floats, dest="m_grid")
    p.add_argument("--r", type=float, help="probe radius about --z")
    p.add_argument("--z", type=_floats, help="probe center x,y in the half-plane")
    p.add_argument("--sweeps", type=int)
    p.add_argument("--burn-in", type=int, dest="burn_in")
    p.add_argument("--record-every", type=int, dest="record_every")
    p.add_argument("--replicas", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--dynamics", choices=list(G.DYNAMICS))
    p.add_argument("--n", type=int, help="tree branching (tree-stability)")
    p.add_argument("--k", type=int, help="chain length (tree-stability)")
    p.add_argument("--inner-depth", type=int, dest="inner_depth")
    p.add_argument("--boundary-depth", type=int, dest="boundary_depth")
    p.add_argument("--state-out", dest="state_out", help="final state of replica 0 at the last beta")

    p = sub.add_parser("tree", help="chain covering, dimers and Peierls ratios", argument_default=S)
    common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--l", type=int, help="offset dimers D_{l:n} (needs --n-offset)")
    p.add_argument("--n-offset", type=int, dest="n_offset")
    p.add_argument("--max-interior", type=int, dest="max_interior")
    p.add_argument("--svg", help="also render the covering")

    p = sub.add_parser("render", help="SVG of a family, graph, state or covering file", argument_default=S)
    common(p)
    p.add_argument("--input")
    return ap


# ------------------------------------------------------------------ config

def effective_config(command, ns):
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    cfg = dict(DEFAULTS[command])
    if "config" in ns:
        try:
            loaded = json.loads(Path(ns.config).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"--config: cannot read {ns.config}: {exc}")
        if not isinstance(loaded, dict):
            raise UsageError("--config: expected a JSON object")
        loaded = {k.replace("-", "_"): v for k, v in loaded.items()}
        unknown = sorted(set(loaded) - set(cfg))
        if unknown:
            raise UsageError(f"--config: unknown keys {unknown}")
        for key in ("beta_grid", "m_grid", "z"):
            if isinstance(loaded.get(key), str):
                loaded[key] = _floats(loaded[key])
        cfg.update(loaded)
    cfg.update(flags)
    return cfg


def _flag(name):
    return "--" + name.replace("_", "-")


def _need(cfg, *names):
    for name in names:
        if cfg.get(name) is None:
            raise UsageError(f"{_flag(name)} is required")


def _check(cond, name, msg):
    if not cond:
        raise UsageError(f"{_flag(name)}: {msg}")


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _timestamp():
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


class Run:
    """Output staging and the manifest of one command."""

    def __init__(self, command, cfg, inputs):
        self.command = command
        self.cfg = cfg
        self.inputs = {}
        for name in inputs:
            path = cfg.get(name)
            if path is None:
                continue
            try:
                self.inputs[path] = sha256_file(path)
            except OSError as exc:
                raise UsageError(f"{_flag(name)}: cannot read {path}: {exc.strerror}")
        # run_id depends on content only: output paths are dropped and input
        # paths replaced by their hashes
        content = {k: v for k, v in cfg.items() if k not in OUTPUT_KEYS}
        for name in inputs:
            if content.get(name) is not None:
                content[name] = self.inputs[content[name]]
        key = {"command": command, "config": content, "version": __version__}
        self.run_id = hashlib.sha256(_canonical(key).encode()).hexdigest()[:16]
        self.staged = []

    def write(self, path, text):
        path = Path(path)
        part = path.with_name(path.name + ".part")
        part.write_text(text)
        self.staged.append((part, path))

    def commit(self):
        for part, path in self.staged:
            os.replace(part, path)
        self.staged = []

    def discard(self):
        for part, _ in self.staged:
            part.unlink(missing_ok=True)
        self.staged = []

    def manifest(self, code, message=""):
        return {
            "command": self.command, "config": self.cfg, "seed": self.cfg.get("seed"),
            "version": __version__, "inputs": self.inputs, "run_id": self.run_id,
            "timestamp": _timestamp(), "exit_code": code, "message": message,
        }


def manifest_path(out):
    out = Path(out)
    return out.with_name(out.stem + ".manifest.json")


def _sibling(out, suffix):
    out = Path(out)
    return out.with_name(out.stem + suffix)


def _dump(obj):
    return json.dumps(obj, indent=1) + "\n"


def _json_safe(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, dict):
        return {str(k): _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


# ------------------------------------------------------------------ family

def cmd_family(cfg, run):
    _need(cfg, "out")
    c = cfg["construction"]
    _check(c in (1, 2), "construction", "must be 1 or 2")
    alpha = cfg["alpha"]
    eta = alpha if cfg["eta"] is None else cfg["eta"]
    _check(alpha is not None and 0 < alpha < 1, "alpha", f"must lie in (0, 1), got {alpha}")
    _check(0 < eta < 1, "eta", f"must lie in (0, 1), got {eta}")
    if c == 1:
        _check(cfg["depth"] is not None and cfg["depth"] >= 0, "depth", "must be a non-negative integer")
        _check(cfg["horizon"] is None or cfg["horizon"] > 0, "horizon", "must be positive")
        fam = F.construct1(alpha, cfg["depth"], cfg["horizon"])
    else:
        steps = cfg["steps"] if cfg["steps"] is not None else cfg["depth"]
        _check(steps is not None and steps >= 1, "steps", "must be at least 1")
        cfg["steps"] = steps
        fam = F.construct2(alpha, eta, steps)
    threshold = cfg["threshold"] if cfg["threshold"] is not None else max(alpha, eta) * (1 + 1e-6)
    _check(threshold > 0, "threshold", "must be positive")
    # echo resolved values into the manifest
    cfg["eta"], cfg["threshold"] = eta, threshold
    rep = F.verify_geodesical(fam, threshold)
    nbr = F.neighbor_crossratios(fam)
    rep["neighbor_pairs"] = len(nbr)
    rep["neighbor_R_min"] = min(nbr.values()) if nbr else None
    rep["neighbor_R_max"] = max(nbr.values()) if nbr else None
    rep["geodesics"] = len(fam)
    rep["run_id"] = run.run_id
    data = F.family_to_json(fam)
    data["run_id"] = run.run_id
    run.write(cfg["out"], _dump(_json_safe(data)))
    run.write(_sibling(cfg["out"], ".report.json"), _dump(_json_safe(rep)))
    if cfg["svg"]:
        run.write(cfg["svg"], V.family_scene(fam).svg(run.run_id))
    if not rep["pass"]:
        raise BoundFailure(f"verification failed: {rep['crossings']} crossings, "
                           f"max pairwise R {rep['max_pairwise_R']:.6g} >= {threshold:.6g}")
    return f"{len(fam)} geodesics, max pairwise R {rep['max_pairwise_R']:.6g}"


# ------------------------------------------------------------------- ising

def _load_family(path):
    if path is None:
        return F.empty_family()
    try:
        return F.family_from_json(json.loads(Path(path).read_text()))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"--family: cannot load {path}: {exc}")


def _state_json(state, run_id):
    g = state.graph
    e = g.edges
    act = state.active[e[:, 0]] & state.active[e[:, 1]]
    dis = act & (state.spins[e[:, 0]] != state.spins[e[:, 1]])
    spins = np.where(state.active, state.spins, 0)
    return {"run_id": run_id, "graph": T.graph_to_json(g), "spins": spins.astype(int).tolist(),
            "interfaces": e[dis].tolist()}


def cmd_ising(cfg, run):
    _need(cfg, "out")
    for name in ("sweeps", "burn_in"):
        _check(cfg[name] >= 0, name, "must be non-negative")
    _check(cfg["replicas"] >= 1, "replicas", "must be at least 1")
    _check(cfg["record_every"] >= 1, "record_every", "must be at least 1")
    _check(cfg["sweeps"] >= cfg["record_every"], "sweeps", "must cover at least one recorded sweep")
    betas = list(cfg["beta_grid"])
    _check(betas and all(b >= 0 for b in betas), "beta_grid", "needs non-negative values")
    config = G.SamplerConfig(beta=betas[0], sweeps=cfg["sweeps"], burn_in=cfg["burn_in"],
                             replicas=cfg["replicas"], seed=cfg["seed"], dynamics=cfg["dynamics"],
                             record_every=cfg["record_every"])
    exp = cfg["experiment"]
    if exp == "tree-stability":
        _check(cfg["n"] >= 2, "n", "must be at least 2")
        _check(cfg["k"] >= 1 and cfg["k"] % 2 == 1, "k", "must be odd for middle dimers")
        _check(0 <= cfg["inner_depth"] < cfg["boundary_depth"], "inner_depth",
               "need 0 <= inner depth < boundary depth")
        tree = T.build_cayley_tree(cfg["n"], cfg["boundary_depth"] + cfg["k"])
        dim = TS.middle_dimers(TS.left_greedy_covering(tree, cfg["k"]))
        rows = TS.tree_stability_experiment(tree, dim, config, cfg["inner_depth"], cfg["boundary_depth"],
                                            betas=betas)
        cols = ["run_id", "beta", "replicas", "sweeps", "overlap", "overlap_se"]
        lines = [",".join(cols)]
        for row in rows:
            row = dict(row, run_id=run.run_id)
            lines.append(",".join(str(G._fmt(row[c])) for c in cols))
        run.write(cfg["out"], "\n".join(lines) + "\n")
        if cfg["state_out"]:
            ref = TS.sigma_from_dimers(tree, dim).spins
            box = T.graph_ball(tree, 0, cfg["boundary_depth"] - 1)
            st = G.run_chain(G.box_state(tree, box, ref), replace(config, beta=betas[-1])).state
            run.write(cfg["state_out"], _dump(_state_json(st, run.run_id)))
        return f"{len(rows)} rows"
    _check(cfg["p"] >= 3 and cfg["q"] >= 3, "p", "p and q must be at least 3")
    _check((cfg["p"] - 2) * (cfg["q"] - 2) > 4, "q", "(p - 2)(q - 2) must exceed 4")
    _check(cfg["radius"] >= 1, "radius", "must be at least 1")
    fam = _load_family(cfg["family"])
    graph = T.tiling_for_radius(cfg["p"], cfg["q"], cfg["radius"])
    box = T.graph_ball(graph, 0, cfg["radius"])
    if exp == "rigidity":
        _check(len(fam) > 0, "family", "rigidity needs a family with geodesics")
        m_values = list(cfg["m_grid"])
        _check(m_values and all(m > 0 for m in m_values), "m_grid", "needs positive values")
        rows = G.rigidity_experiment(graph, fam, box, config, m_values, betas=betas)
    else:
        _check(cfg["r"] > 0, "r", "must be positive")
        z = cfg["z"]
        _check(len(z) == 2 and z[1] > 0, "z", "expected x,y with y > 0")
        rows = G.phase_probe(graph, fam, box, config, hg.ModelPoint(z[0], z[1]), cfg["r"], betas=betas)
    path = Path(cfg["out"])
    part = path.with_name(path.name + ".part")
    G.write_stats_csv(part, rows, run.run_id)
    run.staged.append((part, path))
    if cfg["state_out"]:
        start = G.ground_state(graph, box, fam)
        st = G.run_chain(start, replace(config, beta=betas[-1])).state
        run.write(cfg["state_out"], _dump(_state_json(st, run.run_id)))
    return f"{len(rows)} rows"


# -------------------------------------------------------------------- tree

def cmd_tree(cfg, run):
    _need(cfg, "out")
    _check(cfg["n"] >= 2, "n", "must be at least 2")
    _check(cfg["k"] >= 1, "k", "must be at least 1")
    _check(cfg["depth"] >= cfg["k"], "depth", "must be at least k")
    _check(cfg["max_interior"] >= 1, "max_interior", "must be at least 1")
    offset = cfg["l"] is not None or cfg["n_offset"] is not None
    if offset:
        _need(cfg, "l", "n_offset")
        _check(0 <= cfg["n_offset"] <= cfg["k"], "n_offset", "must lie in [0, k]")
        _check(cfg["n_offset"] <= cfg["l"] <= cfg["k"], "l", "must lie in [n-offset, k]")
    tree = T.build_cayley_tree(cfg["n"], cfg["depth"])
    cov = TS.left_greedy_covering(tree, cfg["k"])
    try:
        dim = TS.offset_dimers(cov, cfg["l"], cfg["n_offset"]) if offset else TS.middle_dimers(cov)
    except KEven as exc:
        raise UsageError(f"--k: {exc}")
    rep = TS.peierls_ratio(tree, dim, cfg["max_interior"])
    bound = Fraction(1, cfg["n_offset"] + 1) if offset else Fraction(2, cfg["k"] + 1)
    data = TS.covering_to_json(cov, dim)
    data["tree"] = {"n": cfg["n"], "depth": cfg["depth"]}
    data["bound"] = str(bound)
    data["sup_ratio"] = str(rep.sup_ratio)
    data["witness"] = {"enclosed": list(rep.argmax.enclosed), "boundary": [list(e) for e in rep.argmax.boundary],
                       "crossed_dimers": rep.argmax.crossed_dimers, "ratio": str(rep.argmax.ratio)}
    data["classes"] = rep.classes
    data["run_id"] = run.run_id
    run.write(cfg["out"], _dump(data))
    run.write(_sibling(cfg["out"], ".ratios.csv"), f"# run_id {run.run_id}\n" + TS.ratio_rows_csv(rep))
    if cfg["svg"]:
        run.write(cfg["svg"], V.covering_scene(tree, cov.chain_id, dim.bond).svg(run.run_id))
    summary = f"sup ratio {rep.sup_ratio} (bound {bound})"
    if cfg["k"] == 1:
        print(f"warning: k = 1 is a plain dimer covering with no useful ratio bound; {summary}",
              file=sys.stderr)
        return summary
    if rep.sup_ratio > bound:
        raise BoundFailure(f"bound violated: {summary}")
    return summary


# ------------------------------------------------------------------ render

def scene_from_json(obj):
    if "geodesics" in obj:
        return V.family_scene(F.family_from_json(obj))
    if "spins" in obj:
        g = T.graph_from_json(obj["graph"])
        return V.graph_scene(g, np.array(obj["spins"]), np.array(obj.get("interfaces", []), dtype=int).reshape(-1, 2))
    if "chains" in obj:
        tree = T.build_cayley_tree(obj["tree"]["n"], obj["tree"]["depth"])
        chain_id = np.full(tree.n_vertices, -1, dtype=np.int64)
        for i, ch in enumerate(obj["chains"]):
            chain_id[ch] = i
        bond = np.zeros(tree.n_vertices, dtype=bool)
        for _, c in obj.get("dimers", []):
            bond[c] = True
        return V.covering_scene(tree, chain_id, bond)
    if "vertices" in obj:
        return V.graph_scene(T.graph_from_json(obj))
    raise ValueError("unrecognized file contents")


def cmd_render(cfg, run):
    _need(cfg, "input", "out")
    try:
        scene = scene_from_json(json.loads(Path(cfg["input"]).read_text()))
    except (OSError, ValueError, KeyError, TypeError, IndexError) as exc:
        raise UsageError(f"--input: cannot render {cfg['input']}: {exc}")
    run.write(cfg["out"], scene.svg(run.run_id))
    return f"wrote {cfg['out']}"


COMMANDS = {"family": (cmd_family, []), "ising": (cmd_ising, ["family"]),
            "tree": (cmd_tree, []), "render": (cmd_render, ["input"])}


def main(argv=None):
    ap = build_parser()
    ns = ap.parse_args(argv)
    fn, inputs = COMMANDS[ns.command]
    run = None
    code, message = EXIT_OK, ""
    try:
        cfg = effective_config(ns.command, ns)
        run = Run(ns.command, cfg, inputs)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            message = fn(cfg, run)
        run.commit()
    except UsageError as exc:
        code, message = EXIT_USAGE, str(exc)
    except BoundFailure as exc:
        code, message = EXIT_VERIFY, str(exc)
        run.commit()
    except (InconsistentBoundary, DegenerateIncidence) as exc:
        code, message = EXIT_DATA, f"{type(exc).__name__}: {exc}"
    except (HypothesisViolated, MillefeuilleError) as exc:
        code, message = EXIT_USAGE, f"{type(exc).__name__}: {exc}"
    finally:
        # anything still staged here belongs to a failed run
        if run is not None and run.staged:
            run.discard()
    out = getattr(ns, "out", None) if run is None else run.cfg.get("out")
    if out:
        mf = run.manifest(code, message) if run is not None else {
            "command": ns.command, "version": __version__, "timestamp": _timestamp(),
            "exit_code": code, "message": message}
        manifest_path(out).write_text(_dump(_json_safe(mf)))
    print(message, file=sys.stderr if code else sys.stdout)
    return code


if __name__ == "__main__":
    sys.exit(main())
