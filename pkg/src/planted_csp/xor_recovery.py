"""Corruption identification for noisy planted k-XOR.

Pipeline: hypergraph decomposition into spread bipartite instances, the
pair-variable 2-XOR built from each, per-expander SDP recovery of pair
products, and decoding of single-clause corruptions from those products.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .config import RunConfig
from .gf2 import pack_uniform, solve_packed
from .graphs import MultiGraph, expander_decompose, prune_min_degree
from .instances import PlantedGroundTruth, XorInstance
from .sdp import TwoXorProblem, extract_rank1, solve_basic_sdp, violated_constraints

log = logging.getLogger(__name__)

MAX_TAU = 1 / math.sqrt(2)


# --- hypergraph decomposition ----------------------------------------------------

@dataclass
class Label:
    """One label u of a bipartite instance: the sets C \\ Q and where they came from."""
    Q: tuple
    sets: list  # sorted; first half is the left side
    origin: np.ndarray  # original clause index of each set

    @property
    def half(self) -> int:
        return len(self.sets) // 2


@dataclass
class BipartiteXorInstance:
    """Labels share an arity t (the label variable counts as one of the t)."""
    n: int
    t: int
    tau: float
    labels: list
    rhs: list | None = None  # per label, +-1 arrays aligned with Label.sets

    @property
    def p(self) -> int:
        return len(self.labels)

    @property
    def m(self) -> int:
        return sum(len(lab.sets) for lab in self.labels)


@dataclass
class DecompResult:
    n: int
    k: int
    tau: float
    instances: dict  # t -> BipartiteXorInstance
    discarded: np.ndarray  # H^(1), original clause indices
    provenance: dict  # clause index -> (t, u, position) or None for H^(1)

    def with_rhs(self, rhs) -> dict:
        rhs = np.asarray(rhs)
        out = {}
        for t, inst in self.instances.items():
            out[t] = BipartiteXorInstance(inst.n, inst.t, inst.tau, inst.labels,
                                          [rhs[lab.origin] for lab in inst.labels])
        return out


def degree_threshold(n: int, k: int, q: int, tau: float) -> float:
    return tau**-2 * max(1.0, n ** (k / 2 - q))


def quota(n: int, k: int, q: int, tau: float) -> int:
    return 2 * math.floor(max(1.0, n ** (k / 2 - q)) / (2 * tau**2))


def decompose_hypergraph(n: int, edges, tau: float) -> DecompResult:
    """Greedy extraction of maximal violating sets Q into spread bipartite instances.

    The largest violating |Q| is searched first (so any hit is maximal) and ties
    go to the lexicographically smallest Q. Edges are taken in index order.
    """
    edges = np.sort(np.asarray(edges, dtype=np.int64), axis=1)
    m, k = edges.shape if edges.ndim == 2 and edges.size else (0, edges.shape[-1] if edges.ndim == 2 else 0)
    if k < 2 and m:
        raise ValueError("decomposition needs k >= 2")
    if not 0 < tau <= MAX_TAU:
        raise ValueError("tau must lie in (0, 1/sqrt(2)] so that label quotas are nonzero")
    rows = [tuple(int(v) for v in e) for e in edges]
    alive = np.ones(m, dtype=bool)
    counts = {q: Counter() for q in range(1, k)}
    members = {q: defaultdict(list) for q in range(1, k)}
    for idx, e in enumerate(rows):
        for q in range(1, k):
            for Q in itertools.combinations(e, q):
                counts[q][Q] += 1
                members[q][Q].append(idx)
    labels_by_t: dict[int, list] = defaultdict(list)
    provenance: dict = {}
    while True:
        hit = None
        for q in range(k - 1, 0, -1):
            thr = degree_threshold(n, k, q, tau)
            viol = [Q for Q, c in counts[q].items() if c > thr]
            if viol:
                hit = (q, min(viol))
                break
        if hit is None:
            break
        q, Q = hit
        size = quota(n, k, q, tau)
        take = [i for i in members[q][Q] if alive[i]][:size]
        assert len(take) == size, "violating set must hold at least its quota"
        for i in take:
            alive[i] = False
            for qq in range(1, k):
                for R in itertools.combinations(rows[i], qq):
                    counts[qq][R] -= 1
                    if counts[qq][R] == 0:
                        del counts[qq][R]
        qs = set(Q)
        entries = sorted((tuple(v for v in rows[i] if v not in qs), i) for i in take)
        t = k + 1 - q
        labels_by_t[t].append(Label(Q, [s for s, _ in entries], np.array([i for _, i in entries], dtype=np.int64)))
    instances = {}
    for t in sorted(labels_by_t):
        labs = labels_by_t[t]
        instances[t] = BipartiteXorInstance(n, t, tau, labs)
        for u, lab in enumerate(labs):
            for pos, i in enumerate(lab.origin):
                provenance[int(i)] = (t, u, pos)
    discarded = np.flatnonzero(alive)
    for i in discarded:
        provenance[int(i)] = None
    return DecompResult(n, k, tau, instances, discarded, provenance)


def spread_violations(inst: BipartiteXorInstance) -> list[str]:
    """Every way ``inst`` fails to be tau-spread (empty list when it is spread)."""
    problems = []
    n, t, tau = inst.n, inst.t, inst.tau
    sizes = {len(lab.sets) for lab in inst.labels}
    if len(sizes) > 1:
        problems.append(f"unequal label sizes {sorted(sizes)}")
    floor_size = 2 * math.floor(1 / (2 * tau**2))
    for u, lab in enumerate(inst.labels):
        h = len(lab.sets)
        if h % 2:
            problems.append(f"label {u}: odd size {h}")
        if h < floor_size:
            problems.append(f"label {u}: size {h} below {floor_size}")
        deg = Counter()
        for s in lab.sets:
            if len(s) != t - 1 or len(set(s)) != t - 1:
                problems.append(f"label {u}: set {s} is not a {t - 1}-set")
            for r in range(0, t):
                for R in itertools.combinations(s, r):
                    deg[R] += 1
        for R, c in deg.items():
            bound = tau**-2 * max(1.0, n ** (t / 2 - 1 - len(R)))
            if c > bound + 1e-9:
                problems.append(f"label {u}: deg({R}) = {c} > {bound:.3f}")
    return problems


def h1_bound(n: int, k: int, tau: float) -> float:
    return n ** (k / 2) / (k * tau**2)


def audit_decomposition(n: int, edges, tau: float, dec: DecompResult | None = None) -> list[str]:
    """Spread checks on every output, the |H^(1)| bound and bijectivity of the provenance map."""
    edges = np.sort(np.asarray(edges, dtype=np.int64), axis=1)
    m, k = edges.shape
    dec = dec or decompose_hypergraph(n, edges, tau)
    problems = []
    for t, inst in dec.instances.items():
        problems += [f"t={t}: {p}" for p in spread_violations(inst)]
    if len(dec.discarded) > h1_bound(n, k, tau):
        problems.append(f"|H1| = {len(dec.discarded)} exceeds {h1_bound(n, k, tau):.1f}")
    seen = list(dec.discarded)
    for t, inst in dec.instances.items():
        for lab in inst.labels:
            seen += list(lab.origin)
            for s, i in zip(lab.sets, lab.origin):
                if tuple(sorted(set(s) | set(lab.Q))) != tuple(edges[i]):
                    problems.append(f"clause {i} does not split as Q + set")
    if sorted(int(i) for i in seen) != list(range(m)):
        problems.append("provenance is not a bijection onto the clauses")
    return problems


# --- pair graph ----------------------------------------------------------------------

@dataclass
class PairGraph:
    """2-XOR over pair variables z_(S1, S2).

    Edge e joins ``edges[e]`` with rhs ``rhs[e]`` and comes from label
    ``label[e]``, left set ``left[e]`` and right set ``right[e]`` (positions
    within the label's sorted H_u).
    """
    vertices: list  # (S1, S2) keys
    edges: np.ndarray
    rhs: np.ndarray
    label: np.ndarray
    left: np.ndarray
    right: np.ndarray

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def m(self) -> int:
        return len(self.edges)

    def index(self, key) -> int:
        return self.vertices.index(key)


def _split_left(s: tuple, t: int) -> tuple[tuple, tuple]:
    a = math.ceil((t - 1) / 2)
    return s[:a], s[a:]


def _split_right(s: tuple, t: int) -> tuple[tuple, tuple]:
    # (S1', S2'); S2' takes the smallest floor((t-1)/2) elements
    b = (t - 1) // 2
    return s[b:], s[:b]


def build_pair_graph(inst: BipartiteXorInstance) -> PairGraph:
    if inst.rhs is None:
        raise ValueError("bipartite instance has no right-hand sides")
    t = inst.t
    keys: dict = {}
    ends, rhs, lab, left, right = [], [], [], [], []
    for u, (label, b) in enumerate(zip(inst.labels, inst.rhs)):
        h = label.half
        L = [_split_left(s, t) for s in label.sets[:h]]
        R = [_split_right(s, t) for s in label.sets[h:]]
        for i, (s1, s2) in enumerate(L):
            for j, (s1p, s2p) in enumerate(R):
                a = keys.setdefault((s1, s2p), len(keys))
                c = keys.setdefault((s2, s1p), len(keys))
                ends.append((a, c))
                rhs.append(int(b[i]) * int(b[h + j]))
                lab.append(u)
                left.append(i)
                right.append(h + j)
    # renumber vertices in sorted key order for determinism
    ordered = sorted(keys)
    remap = np.empty(len(keys), dtype=np.int64)
    for new, key in enumerate(ordered):
        remap[keys[key]] = new
    e = remap[np.array(ends, dtype=np.int64).reshape(-1, 2)] if ends else np.zeros((0, 2), dtype=np.int64)
    as_arr = lambda v: np.array(v, dtype=np.int64)
    return PairGraph(ordered, e, np.array(rhs, dtype=np.int8), as_arr(lab), as_arr(left), as_arr(right))


def max_label_degree(pg: PairGraph) -> int:
    """Largest vertex degree over the subgraphs induced by one clause of one label."""
    best = 0
    for side in (pg.left, pg.right):
        groups = defaultdict(Counter)
        for e, (a, c) in enumerate(pg.edges):
            g = groups[(int(pg.label[e]), int(side[e]))]
            g[int(a)] += 1
            g[int(c)] += 1
        for g in groups.values():
            best = max(best, max(g.values()))
    return best


# --- recovery on 2-XOR pieces ---------------------------------------------------------------

@dataclass
class PieceReport:
    vertices: int
    edges: int
    lambda2: float
    sdp_status: str
    rank1: bool

    def to_json(self) -> dict:
        lam = self.lambda2 if math.isfinite(self.lambda2) else None
        return {"vertices": self.vertices, "edges": self.edges, "lambda2": lam,
                "sdp_status": self.sdp_status, "rank1": self.rank1}


def expander_pieces(n: int, edges: np.ndarray, eps_budget: float, c_dec: float):
    """Prune then decompose; returns [(piece vertices, edge ids inside the piece, lambda2)].

    Pruning and decomposition each get a third of ``eps_budget``. Only the graph
    is consulted, so the discarded edges never depend on right-hand sides.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges) == 0:
        return []
    G = MultiGraph(n, edges)
    _, kept = prune_min_degree(G, eps_budget / 3)
    alive = np.zeros(n, dtype=bool)
    alive[kept] = True
    live_ids = np.flatnonzero(alive[edges[:, 0]] & alive[edges[:, 1]])
    pos = np.full(n, -1, dtype=np.int64)
    pos[kept] = np.arange(len(kept))
    pruned = MultiGraph(len(kept), pos[edges[live_ids]])
    if pruned.m == 0:
        return []
    dec = expander_decompose(pruned, eps_budget / 3, c_dec)
    part_of = np.full(pruned.n, -1, dtype=np.int64)
    for i, P in enumerate(dec.parts):
        part_of[P] = i
    pe = pruned.edges
    same = part_of[pe[:, 0]] == part_of[pe[:, 1]]
    by_part = defaultdict(list)
    for local in np.flatnonzero(same):
        by_part[int(part_of[pe[local, 0]])].append(local)
    return [(kept[dec.parts[i]], live_ids[np.array(ids, dtype=np.int64)], dec.lambda2[i])
            for i, ids in sorted(by_part.items())]


def solve_two_xor_pieces(n: int, edges: np.ndarray, rhs: np.ndarray, eps_budget: float, config: RunConfig):
    """Prune, decompose into expanders and solve each piece's SDP.

    Returns (product per edge: +1 satisfied, -1 violated, 0 discarded; piece reports).
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    rhs = np.asarray(rhs, dtype=np.int8)
    prod = np.zeros(len(edges), dtype=np.int8)
    jobs = expander_pieces(n, edges, eps_budget, config.c_dec)

    def run(job):
        verts, glob, lam = job
        vpos = np.full(n, -1, dtype=np.int64)
        vpos[verts] = np.arange(len(verts))
        cons = np.column_stack([vpos[edges[glob, 0]], vpos[edges[glob, 1]], rhs[glob]])
        prob = TwoXorProblem(len(verts), cons)
        sol = solve_basic_sdp(prob, tol_feas=config.tol_feas, tol_gap=config.tol_gap,
                              seed=config.seed, restarts=config.sdp_restarts)
        x = extract_rank1(sol, config.gap_threshold) if sol.status == "optimal" else None
        report = PieceReport(len(verts), len(glob), lam, sol.status, x is not None)
        if x is None:
            return glob, None, report
        signs = np.ones(len(glob), dtype=np.int8)
        signs[violated_constraints(prob, x)] = -1
        return glob, signs, report

    if config.threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    reports = []
    for glob, signs, report in results:
        reports.append(report)
        if signs is None:
            log.warning("piece with %d vertices not rank one (%s); its edges are discarded",
                        report.vertices, report.sdp_status)
            continue
        prod[glob] = signs
    return prod, reports


def recover_pairs(pg: PairGraph, eps: float, config: RunConfig):
    """Products xi(C) xi(C') for every non-discarded pair-graph edge (0 marks discarded)."""
    return solve_two_xor_pieces(pg.n, pg.edges, pg.rhs, eps / 4, config)


@dataclass
class LabelVerdict:
    discarded: np.ndarray  # positions within H_u
    corrupted: np.ndarray
    eps_u: float
    component_size: int
    tie: bool = False
    inconsistent: bool = False


def recover_from_pairs(size: int, pairs) -> LabelVerdict:
    """Decode one label from known pair products.

    ``pairs`` is an iterable of (left position, right position, product) over a
    label with ``size`` sets (left positions < size/2 <= right positions).
    """
    pairs = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 3)
    h = size // 2
    everything = np.arange(size)
    eps_u = 1 - len(pairs) / (h * h) if h else 1.0
    if eps_u >= 1 / 3:
        return LabelVerdict(everything, np.zeros(0, np.int64), eps_u, 0)
    adj = sp.csr_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(size, size))
    ncomp, comp = sp.csgraph.connected_components(adj, directed=False)
    sizes = np.bincount(comp, minlength=ncomp)
    # largest component; among equals, the one holding the smallest position
    best = max(range(ncomp), key=lambda c: (sizes[c], -int(np.flatnonzero(comp == c)[0])))
    members = np.flatnonzero(comp == best)
    nbrs = defaultdict(list)
    for a, b, s in pairs:
        if comp[a] == best:
            nbrs[a].append((b, s))
            nbrs[b].append((a, s))
    z = np.zeros(size, dtype=np.int64)
    root = int(members[0])
    z[root] = 1
    queue = [root]
    for v in queue:
        for w, s in nbrs[v]:
            if z[w] == 0:
                z[w] = z[v] * s
                queue.append(w)
    inside = comp[pairs[:, 0]] == best
    if np.any(z[pairs[inside, 0]] * z[pairs[inside, 1]] != pairs[inside, 2]):
        log.warning("inconsistent pair products in one label; label discarded")
        return LabelVerdict(everything, np.zeros(0, np.int64), eps_u, len(members), inconsistent=True)
    neg = int(np.sum(z[members] == -1))
    tie = 2 * neg == len(members)
    if 2 * neg > len(members):
        z = -z
    discarded = np.setdiff1d(everything, members)
    corrupted = members[z[members] == -1]
    return LabelVerdict(discarded, corrupted, eps_u, len(members), tie=tie)


# --- top level ----------------------------------------------------------------------------

@dataclass
class RecoveryOutput:
    A1: np.ndarray
    A2: np.ndarray
    per_u: list = field(default_factory=list)
    pieces: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "A1": [int(i) for i in self.A1],
            "A2": [int(i) for i in self.A2],
            "per_u": self.per_u,
            "pieces": [p.to_json() for p in self.pieces],
        }


def spread_parameter(n: int, k: int, gamma_lower: float, c_tau: float) -> float:
    return min(MAX_TAU, c_tau * gamma_lower / math.sqrt(k * math.log(max(n, 2))))


def run_kxor_recovery(psi: XorInstance, gamma_lower: float, eps: float, config: RunConfig | None = None) -> RecoveryOutput:
    config = config or RunConfig()
    if psi.k < 2:
        raise ValueError("use solve_1xor for k = 1")
    if not 0 < gamma_lower <= 1:
        raise ValueError("gamma_lower must lie in (0, 1]")
    if psi.m == 0:
        return RecoveryOutput(np.zeros(0, np.int64), np.zeros(0, np.int64))
    if psi.k == 2 and config.direct_2xor:
        prod, pieces = solve_two_xor_pieces(psi.n, psi.edges, psi.rhs, eps, config)
        return RecoveryOutput(np.flatnonzero(prod == 0), np.flatnonzero(prod == -1), [], pieces,
                              {"route": "direct"})
    tau = spread_parameter(psi.n, psi.k, gamma_lower, config.c_tau)
    dec = decompose_hypergraph(psi.n, psi.edges, tau)
    A1 = [dec.discarded]
    A2 = []
    per_u, pieces = [], []
    skipped = []
    for t, inst in dec.with_rhs(psi.rhs).items():
        all_idx = np.concatenate([lab.origin for lab in inst.labels])
        if inst.m < psi.n ** ((t - 1) / 2) * math.sqrt(inst.p) * config.beta:
            A1.append(all_idx)
            skipped.append(t)
            continue
        pg = build_pair_graph(inst)
        prod, reps = recover_pairs(pg, eps, config)
        pieces.extend(reps)
        known = prod != 0
        by_label = defaultdict(list)
        for e in np.flatnonzero(known):
            by_label[int(pg.label[e])].append((pg.left[e], pg.right[e], prod[e]))
        for u, lab in enumerate(inst.labels):
            v = recover_from_pairs(len(lab.sets), by_label.get(u, []))
            A1.append(lab.origin[v.discarded])
            A2.append(lab.origin[v.corrupted])
            per_u.append({"t": t, "u": u, "eps_u": v.eps_u, "component_size": v.component_size,
                          "tie": v.tie, "inconsistent": v.inconsistent})
    cat = lambda parts: np.sort(np.concatenate(parts)) if parts else np.zeros(0, np.int64)
    return RecoveryOutput(cat(A1), cat(A2), per_u, pieces,
                          {"route": "decomposition", "tau": tau, "h1": len(dec.discarded), "skipped_arities": skipped})


def solve_1xor(psi: XorInstance, threshold: float | None = None, c1: float = 2.0) -> RecoveryOutput:
    """Majority vote per variable; rarely seen variables are discarded."""
    if psi.k != 1:
        raise ValueError("solve_1xor needs k = 1")
    if threshold is None:
        threshold = c1 * math.log(max(psi.n, 2))
    var = psi.edges[:, 0]
    count = np.bincount(var, minlength=psi.n)
    plus = np.bincount(var, weights=(psi.rhs == 1), minlength=psi.n)
    minus = count - plus
    rare = count <= threshold
    xhat = np.where(minus > plus, -1, 1)
    ties = np.flatnonzero(~rare & (plus == minus))
    A1 = np.flatnonzero(rare[var])
    A2 = np.flatnonzero(~rare[var] & (psi.rhs != xhat[var]))
    per_u = [{"u": int(i), "eps_u": 0.0, "component_size": int(count[i]), "tie": True} for i in ties]
    return RecoveryOutput(A1, A2, per_u, [], {"route": "majority", "threshold": threshold})


def recover_assignment(psi: XorInstance, out: RecoveryOutput):
    """Gaussian elimination over the clauses outside A1 and A2 (x or Inconsistent)."""
    keep = np.ones(psi.m, dtype=bool)
    keep[out.A1] = False
    keep[out.A2] = False
    rows, bits = pack_uniform(psi.n, psi.edges[keep], psi.rhs[keep])
    return solve_packed(psi.n, rows, bits)


def exact_identification(out: RecoveryOutput, truth: PlantedGroundTruth, m: int) -> bool:
    """A2 equals the corrupted clauses outside A1."""
    kept = set(range(m)) - set(out.A1.tolist())
    return set(out.A2.tolist()) == (set(truth.corrupted) & kept)
