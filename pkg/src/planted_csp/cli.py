"""Command line: gen, solve-xor, solve-csp, check, bench."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from .config import RunConfig
from .csp_solver import solve_semirandom_csp
from .graphs import (MultiGraph, brute_cut_check, complete_graph, cycle_graph, gadget_closed_form,
                     quadratic_energy, read_edge_list, relative_psd_check, separation_gadget,
                     uniform_subsample_bound)
from .gf2 import Inconsistent
from .instances import (PREDICATES, CspInstance, PlantingDistribution, XorInstance, csp_to_json, csp_value,
                        dump_json, gen_hypergraph, load_instance, random_signs, sample_noisy_xor,
                        sample_planted_csp, truth_path, truth_to_json, xor_to_json, xor_value,
                        PlantedGroundTruth)
from .xor_recovery import (audit_decomposition, exact_identification, recover_assignment, run_kxor_recovery,
                           solve_1xor)

log = logging.getLogger("planted_csp")

CONFIG_FLAGS = [f for f in dataclasses.fields(RunConfig) if f.name != "version"]


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file overriding the packaged defaults")
    for f in CONFIG_FLAGS:
        flag = "--" + f.name.replace("_", "-")
        base = str(f.type).split(" ")[0]  # annotations are strings, e.g. "int | None"
        if base == "bool":
            p.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        else:
            p.add_argument(flag, dest=f.name, type={"int": int, "float": float}.get(base, str), default=None)


def _config(args) -> RunConfig:
    overrides = {f.name: getattr(args, f.name, None) for f in CONFIG_FLAGS}
    return RunConfig.load(args.config, **overrides)


def _emit(obj: dict, path):
    text = json.dumps(obj, indent=1, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


# --- gen --------------------------------------------------------------------------------

def planting(pred_name: str, q: str):
    pred = PREDICATES[pred_name]()
    if q == "uniform-sat":
        Q = PlantingDistribution.uniform_over(pred)
    elif q == "point-mass":
        Q = PlantingDistribution.point_mass((1,) * pred.k)
    else:
        raise ValueError(f"unknown planting distribution {q!r}")
    return pred, Q


def cmd_gen(args) -> int:
    n, m, seed = args.n, args.m, args.seed
    xstar = random_signs(n, seed)
    if args.kind == "xor":
        H = gen_hypergraph(args.hypergraph, n, args.k, m, seed)
        inst, truth = sample_noisy_xor(H, xstar, args.eta, seed)
        body = xor_to_json(inst)
        default = f"xor_n{n}_k{args.k}_m{m}_s{seed}.json"
    else:
        pred, Q = planting(args.pred, args.q)
        H = gen_hypergraph(args.hypergraph, n, pred.k, m, seed)
        inst = sample_planted_csp(n, H.array(), xstar, pred, Q, seed)
        truth = PlantedGroundTruth(xstar, frozenset(), 0.0)
        body = csp_to_json(inst)
        default = f"csp_{args.pred}_n{n}_m{m}_s{seed}.json"
    out = Path(args.out or default)
    dump_json(body, out)
    dump_json(truth_to_json(truth), truth_path(out))
    print(out)
    return 0


# --- solve ------------------------------------------------------------------------------

def cmd_solve_xor(args) -> int:
    cfg = _config(args)
    psi, truth = load_instance(args.instance)
    if not isinstance(psi, XorInstance):
        raise ValueError("solve-xor needs an XOR instance")
    if psi.k == 1:
        out = solve_1xor(psi, c1=cfg.c1)
    else:
        out = run_kxor_recovery(psi, cfg.gamma_lower, cfg.eps, cfg)
    report = out.to_json()
    x = recover_assignment(psi, out)
    report["consistent"] = not isinstance(x, Inconsistent)
    report["value"] = None if isinstance(x, Inconsistent) else xor_value(psi, x)
    ok = not set(report["A1"]) & set(report["A2"])
    if truth is not None:
        exact = exact_identification(out, truth, psi.m)
        report["exact_identification"] = exact
        report["discarded_fraction"] = len(out.A1) / psi.m if psi.m else 0.0
        ok = ok and exact
    _emit(report, cfg.output)
    return 0 if ok else 1


def cmd_solve_csp(args) -> int:
    cfg = _config(args)
    inst, truth = load_instance(args.instance)
    if not isinstance(inst, CspInstance):
        raise ValueError("solve-csp needs a CSP instance")
    rep = solve_semirandom_csp(inst, cfg.eps, cfg)
    report = rep.to_json()
    report["x"] = [int(v) for v in rep.x]
    if truth is not None:
        report["planted_value"] = csp_value(inst, truth.xstar)
    _emit(report, cfg.output)
    return 0


# --- check ------------------------------------------------------------------------------

def parse_graph(text: str) -> MultiGraph:
    if text[0] in "KC" and text[1:].isdigit():
        return (complete_graph if text[0] == "K" else cycle_graph)(int(text[1:]))
    return read_edge_list(Path(text).read_text())


def check_spectral(G: MultiGraph, eta: float, trials: int, seed: int) -> dict:
    bound = uniform_subsample_bound(G, eta)
    passes = 0
    worst = 0.0
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        H = G.edges[rng.random(G.m) < eta]
        res = relative_psd_check(G, H, bound)
        passes += res.holds
        worst = max(worst, res.value)
    rate = passes / trials if trials else 1.0
    return {"mode": "spectral", "bound": bound, "pass_rate": rate, "worst_ratio": worst, "passed": rate >= 0.95}


def check_cut(G: MultiGraph, eta: float, c: float, seed: int) -> dict:
    rng = np.random.default_rng([seed, 0])
    H = G.edges[rng.random(G.m) < eta]
    cut = brute_cut_check(G, H, c)
    spectral = relative_psd_check(G, H, c)
    # the spectral condition implies the cut condition
    consistent = cut.holds or not spectral.holds
    return {"mode": "cut", "c": c, "cut_holds": bool(cut.holds), "cut_ratio": cut.value,
            "cut_witness": None if cut.witness is None else [int(v) for v in cut.witness],
            "spectral_holds": bool(spectral.holds), "spectral_ratio": spectral.value, "passed": bool(consistent)}


def check_gadget(n: int, k: int) -> dict:
    g = separation_gadget(n, k)
    rest = g.graph.edges[:-1]
    special = g.graph.edges[-1:]
    energies = [quadratic_energy(rest, x) for x in g.shifts]
    on_special = sum(quadratic_energy(special, x) for x in g.shifts)
    on_rest = sum(energies)
    closed = gadget_closed_form(n)
    exact = all(e == n * k * k for e in energies) and on_special == closed and on_rest == n * n * k * k
    return {"mode": "gadget", "n": n, "k": k, "per_shift_energy": sorted(set(energies)),
            "special_edge_energy": on_special, "closed_form": closed, "rest_energy": on_rest,
            "ratio": on_special / on_rest, "ratio_exceeds_one": on_special > on_rest, "passed": exact}


def check_decomp(fuzz: int, seed: int) -> dict:
    failures = []
    for case in range(fuzz):
        rng = np.random.default_rng([seed, case])
        n = int(rng.integers(6, 16))
        k = int(rng.integers(2, 4))
        m = int(rng.integers(1, min(200, math.comb(n, k)) + 1))
        tau = float(rng.uniform(0.2, 0.7))
        H = gen_hypergraph("uniform", n, k, m, int(rng.integers(2**31)))
        problems = audit_decomposition(n, H.array(), tau)
        if problems:
            failures.append({"case": case, "n": n, "k": k, "m": m, "tau": tau, "problems": problems[:5]})
    return {"mode": "decomp", "cases": fuzz, "failures": failures, "passed": not failures}


def cmd_check(args) -> int:
    if args.what == "spectral":
        res = check_spectral(parse_graph(args.graph), args.eta, args.trials, args.seed)
    elif args.what == "cut":
        res = check_cut(parse_graph(args.graph), args.eta, args.c, args.seed)
    elif args.what == "gadget":
        res = check_gadget(args.n, args.k)
    else:
        res = check_decomp(args.fuzz, args.seed)
    _emit(res, args.output)
    return 0 if res["passed"] else 1


# --- bench ------------------------------------------------------------------------------

BENCH_COLUMNS = ["n", "k", "m", "eta", "eps", "exact_id", "value", "wall_ms"]


def bench_row(cfg: RunConfig, n, k, m, eta, seed, pred=None, q="uniform-sat") -> dict:
    xstar = random_signs(n, seed)
    start = time.perf_counter()
    if pred is None:
        H = gen_hypergraph("uniform", n, k, m, seed)
        psi, truth = sample_noisy_xor(H, xstar, eta, seed)
        out = solve_1xor(psi, c1=cfg.c1) if k == 1 else run_kxor_recovery(psi, cfg.gamma_lower, cfg.eps, cfg)
        x = recover_assignment(psi, out)
        exact = exact_identification(out, truth, m)
        value = None if isinstance(x, Inconsistent) else xor_value(psi, x)
    else:
        P, Q = planting(pred, q)
        k = P.k
        H = gen_hypergraph("uniform", n, k, m, seed)
        inst = sample_planted_csp(n, H.array(), xstar, P, Q, seed)
        value = solve_semirandom_csp(inst, cfg.eps, cfg).best.value
        exact, eta = None, None
    wall = (time.perf_counter() - start) * 1000
    return {"n": n, "k": k, "m": m, "eta": eta, "eps": cfg.eps, "exact_id": exact, "value": value,
            "wall_ms": round(wall, 1)}


def cmd_bench(args) -> int:
    cfg = _config(args)
    rows = [bench_row(cfg, args.n, args.k, args.m, args.eta, s, args.pred, args.q)
            for s in range(args.seeds[0], args.seeds[1])]
    target = cfg.csv
    fh = open(target, "w", newline="") if target else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({c: "" if r[c] is None else r[c] for c in BENCH_COLUMNS})
    finally:
        if target:
            fh.close()
    return 0


# --- entry point ------------------------------------------------------------------------

def seed_range(text: str) -> tuple[int, int]:
    """'a-b' (inclusive) or a count 'n' meaning 0..n-1."""
    if "-" in text:
        a, b = text.split("-")
        return int(a), int(b) + 1
    return 0, int(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="planted-csp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a planted instance and its truth sidecar")
    g.add_argument("kind", choices=["xor", "csp"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--k", type=int, default=None)
    g.add_argument("--eta", type=float, default=0.0)
    g.add_argument("--pred", choices=sorted(PREDICATES), default="nae3")
    g.add_argument("--q", choices=["uniform-sat", "point-mass"], default="uniform-sat")
    g.add_argument("--hypergraph", choices=["uniform", "split", "regular"], default="uniform")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    for name, func, helptext in [("solve-xor", cmd_solve_xor, "identify corrupted XOR clauses"),
                                 ("solve-csp", cmd_solve_csp, "solve a semirandom planted CSP")]:
        s = sub.add_parser(name, help=helptext)
        s.add_argument("instance")
        _add_config_flags(s)
        s.set_defaults(func=func)

    c = sub.add_parser("check", help="run a spectral, cut, gadget or decomposition diagnostic")
    c.add_argument("what", choices=["spectral", "cut", "gadget", "decomp"])
    c.add_argument("--graph", default="K60", help="K<n>, C<n> or an edge-list file")
    c.add_argument("--eta", type=float, default=0.3)
    c.add_argument("--trials", type=int, default=100)
    c.add_argument("--c", type=float, default=0.5)
    c.add_argument("--n", type=int, default=100)
    c.add_argument("--k", type=int, default=5)
    c.add_argument("--fuzz", type=int, default=100)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--output")
    c.set_defaults(func=cmd_check)

    b = sub.add_parser("bench", help="sweep seeds and write a CSV row per run")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--k", type=int, default=3)
    b.add_argument("--m", type=int, required=True)
    b.add_argument("--eta", type=float, default=0.1)
    b.add_argument("--pred", choices=sorted(PREDICATES), default=None, help="bench a CSP instead of XOR")
    b.add_argument("--q", choices=["uniform-sat", "point-mass"], default="uniform-sat")
    b.add_argument("--seeds", type=seed_range, default=(0, 5), help="'a-b' inclusive or a count")
    _add_config_flags(b)
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    if args.command == "gen" and args.kind == "xor" and args.k is None:
        parser.error("gen xor needs --k")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
