"""Multigraph Laplacians, pruning, Cheeger sweeps, expander decomposition and
relative spectral / cut approximation checks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_LIMIT = 512
EIG_TOL = 1e-8


@dataclass(frozen=True)
class MultiGraph:
    """Undirected multigraph on vertices 0..n-1.

    ``edges`` is an (m, 2) array; parallel edges and self-loops (u, u) are
    allowed. A self-loop adds 1 to the degree of its vertex and nothing to L.
    """
    n: int
    edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= self.n):
            raise ValueError("edge endpoint out of range")
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def loops(self) -> np.ndarray:
        return self.edges[:, 0] == self.edges[:, 1]

    def degrees(self) -> np.ndarray:
        e = self.edges
        loop = self.loops
        deg = np.bincount(e[~loop].ravel(), minlength=self.n)
        deg += np.bincount(e[loop, 0], minlength=self.n)
        return deg

    def adjacency(self) -> sp.csr_matrix:
        e = self.edges[~self.loops]
        data = np.ones(2 * len(e))
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))

    def laplacian(self) -> sp.csr_matrix:
        A = self.adjacency()
        return (sp.diags(np.asarray(A.sum(axis=1)).ravel()) - A).tocsr()

    def normalized_laplacian(self) -> sp.csr_matrix:
        deg = self.degrees()
        if np.any(deg == 0):
            raise ValueError("normalized Laplacian undefined with isolated vertices")
        s = sp.diags(1.0 / np.sqrt(deg))
        return (s @ self.laplacian() @ s).tocsr()

    def subgraph(self, vertices) -> tuple["MultiGraph", np.ndarray]:
        """Induced subgraph (no added loops) and the kept vertex ids."""
        vertices = np.asarray(sorted(set(int(v) for v in vertices)), dtype=np.int64)
        pos = np.full(self.n, -1, dtype=np.int64)
        pos[vertices] = np.arange(len(vertices))
        e = pos[self.edges]
        keep = (e >= 0).all(axis=1)
        return MultiGraph(len(vertices), e[keep]), vertices

    def with_degree_loops(self, vertices, target_degree) -> "MultiGraph":
        """G{S}: induced subgraph on S plus self-loops restoring ``target_degree``."""
        sub, verts = self.subgraph(vertices)
        missing = np.asarray(target_degree)[verts] - sub.degrees()
        if np.any(missing < 0):
            raise ValueError("target degree below induced degree")
        loop_v = np.repeat(np.arange(len(verts)), missing)
        return MultiGraph(len(verts), np.concatenate([sub.edges, np.stack([loop_v, loop_v], axis=1)]))

    def is_connected(self) -> bool:
        return len(components(self)) <= 1


def components(G: MultiGraph) -> list[np.ndarray]:
    """Connected components as sorted vertex arrays, ordered by smallest vertex."""
    if G.n == 0:
        return []
    ncomp, labels = sp.csgraph.connected_components(G.adjacency(), directed=False)
    comps = [np.flatnonzero(labels == c) for c in range(ncomp)]
    return sorted(comps, key=lambda c: c[0])


def complete_graph(n: int) -> MultiGraph:
    return MultiGraph(n, np.array(list(itertools.combinations(range(n), 2)), dtype=np.int64).reshape(-1, 2))


def cycle_graph(n: int) -> MultiGraph:
    return MultiGraph(n, np.array([(i, (i + 1) % n) for i in range(n)], dtype=np.int64))


def read_edge_list(text: str) -> MultiGraph:
    lines = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
    n, m = int(lines[0][0]), int(lines[0][1])
    edges = np.array([[int(a) - 1, int(b) - 1] for a, b in lines[1:1 + m]], dtype=np.int64).reshape(-1, 2)
    if len(edges) != m:
        raise ValueError("edge count does not match header")
    return MultiGraph(n, edges)


def write_edge_list(G: MultiGraph) -> str:
    return "\n".join([f"{G.n} {G.m}"] + [f"{u + 1} {v + 1}" for u, v in G.edges]) + "\n"


# --- eigen helpers -----------------------------------------------------------

def _smallest_eigs(M: sp.spmatrix, k: int, want_vectors: bool = False):
    """k smallest eigenpairs of a PSD matrix: dense below DENSE_LIMIT, else shift-invert Lanczos."""
    n = M.shape[0]
    if n < DENSE_LIMIT or k >= n - 1:
        dense = M.toarray() if sp.issparse(M) else np.asarray(M)
        if want_vectors:
            return sla.eigh(dense, subset_by_index=[0, min(k, n) - 1])
        return sla.eigh(dense, eigvals_only=True, subset_by_index=[0, min(k, n) - 1])
    sigma = -1e-3
    vals, vecs = spla.eigsh(M.tocsc(), k=k, sigma=sigma, which="LM", tol=EIG_TOL,
                            v0=np.ones(n) / math.sqrt(n) + np.arange(n) * 1e-3 / n)
    order = np.argsort(vals)
    return (vals[order], vecs[:, order]) if want_vectors else vals[order]


def lambda2_normalized(G: MultiGraph) -> float:
    """Second-smallest eigenvalue of the normalized Laplacian."""
    if G.n < 2:
        raise ValueError("need at least two vertices")
    if np.any(G.degrees() == 0):
        raise ValueError("isolated vertex")
    vals = _smallest_eigs(G.normalized_laplacian(), 2)
    return float(max(vals[1], 0.0))


# --- pruning -----------------------------------------------------------------

def prune_min_degree(G: MultiGraph, eps: float) -> tuple[MultiGraph, np.ndarray]:
    """Repeatedly drop vertices of degree < eps * d, d the original average degree.

    Returns the induced subgraph on the survivors and their original ids.
    """
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    if G.n == 0:
        return G, np.zeros(0, dtype=np.int64)
    threshold = eps * 2 * G.m / G.n
    alive = np.ones(G.n, dtype=bool)
    e = G.edges
    while True:
        live_e = alive[e[:, 0]] & alive[e[:, 1]]
        deg = MultiGraph(G.n, e[live_e]).degrees()
        low = alive & (deg < threshold)
        if not low.any():
            break
        alive &= ~low
    return G.subgraph(np.flatnonzero(alive))


# --- Cheeger sweep ------------------------------------------------------------

def conductance(G: MultiGraph, S) -> float:
    mask = np.zeros(G.n, dtype=bool)
    mask[np.asarray(list(S), dtype=np.int64)] = True
    deg = G.degrees()
    vol_s, vol_t = deg[mask].sum(), deg[~mask].sum()
    cut = np.sum(mask[G.edges[:, 0]] != mask[G.edges[:, 1]])
    denom = min(vol_s, vol_t)
    return math.inf if denom == 0 else cut / denom


def cheeger_sweep(G: MultiGraph) -> tuple[np.ndarray, float]:
    """Best sweep cut along the D^{-1/2}-scaled second eigenvector.

    Returns the side with smaller volume and its conductance.
    """
    deg = G.degrees().astype(float)
    if np.any(deg == 0):
        raise ValueError("isolated vertex")
    _, vecs = _smallest_eigs(G.normalized_laplacian(), 2, want_vectors=True)
    return _sweep(G, vecs[:, 1], deg)


def _sweep(G: MultiGraph, v: np.ndarray, deg: np.ndarray):
    f = v / np.sqrt(deg)
    if f[np.argmax(np.abs(f))] < 0:
        f = -f  # fix the eigenvector's sign for determinism
    order = np.lexsort((np.arange(G.n), f))
    return _best_prefix(G, order, deg)


def _best_prefix(G: MultiGraph, order: np.ndarray, deg: np.ndarray):
    n = G.n
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    e = G.edges[~G.loops]
    lo = np.minimum(rank[e[:, 0]], rank[e[:, 1]])
    hi = np.maximum(rank[e[:, 0]], rank[e[:, 1]])
    # an edge crosses prefix {order[:j+1]} iff lo <= j < hi
    delta = np.bincount(lo, minlength=n) - np.bincount(hi, minlength=n)
    cut = np.cumsum(delta)[: n - 1]
    vol = np.cumsum(deg[order])[: n - 1]
    total = deg.sum()
    phi = cut / np.minimum(vol, total - vol)
    j = int(np.argmin(phi))
    prefix = order[: j + 1]
    side = prefix if vol[j] <= total - vol[j] else order[j + 1:]
    return np.sort(side), float(phi[j])


# --- expander decomposition -----------------------------------------------------

def decomposition_threshold(eps: float, m: int, c_dec: float = 1 / 32) -> float:
    return c_dec * eps**2 / math.log(max(m, 3)) ** 2


@dataclass
class Decomposition:
    parts: list[np.ndarray]
    cross_edges: np.ndarray  # indices into G.edges
    threshold: float
    lambda2: list[float]


def expander_decompose(G: MultiGraph, eps: float, c_dec: float = 1 / 32) -> Decomposition:
    """Recursive Cheeger-sweep decomposition into parts whose G{V_i} has
    normalized spectral gap >= c_dec * eps^2 / ln^2 m."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    lam_star = decomposition_threshold(eps, G.m, c_dec)
    deg = G.degrees()
    parts: list[np.ndarray] = []
    gaps: list[float] = []
    stack = [np.arange(G.n)]
    while stack:
        S = stack.pop()
        if len(S) == 0:
            continue
        if len(S) == 1:
            parts.append(S)
            gaps.append(math.inf)
            continue
        sub, _ = G.subgraph(S)
        comps = components(sub)
        if len(comps) > 1:
            # a disconnected piece splits along components with zero cut
            stack.extend(S[c] for c in reversed(comps))
            continue
        GS = G.with_degree_loops(S, deg)
        if np.any(GS.degrees() == 0):
            raise ValueError("isolated vertex in decomposition input")
        vals, vecs = _smallest_eigs(GS.normalized_laplacian(), 2, want_vectors=True)
        lam = float(max(vals[1], 0.0))
        if lam >= lam_star:
            parts.append(S)
            gaps.append(lam)
            continue
        side, _ = _sweep(GS, vecs[:, 1], GS.degrees().astype(float))
        mask = np.zeros(len(S), dtype=bool)
        mask[side] = True
        stack.append(S[~mask])
        stack.append(S[mask])
    order = sorted(range(len(parts)), key=lambda i: parts[i][0])
    parts = [parts[i] for i in order]
    gaps = [gaps[i] for i in order]
    label = np.full(G.n, -1, dtype=np.int64)
    for i, P in enumerate(parts):
        label[P] = i
    e = G.edges
    cross = np.flatnonzero(label[e[:, 0]] != label[e[:, 1]])
    return Decomposition(parts, cross, lam_star, gaps)


# --- relative approximation checks ------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    holds: bool
    value: float  # s for the spectral check, worst ratio for the cut check
    witness: object = None


def _edge_subset_laplacian(n: int, edges: np.ndarray) -> np.ndarray:
    L = np.zeros((n, n))
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    e = e[e[:, 0] != e[:, 1]]
    np.add.at(L, (e[:, 0], e[:, 0]), 1)
    np.add.at(L, (e[:, 1], e[:, 1]), 1)
    np.add.at(L, (e[:, 0], e[:, 1]), -1)
    np.add.at(L, (e[:, 1], e[:, 0]), -1)
    return L


RATIO_TOL = 1e-10  # absorbs eigensolver roundoff at the boundary s = c


def relative_spectral_ratio(G: MultiGraph, H_edges) -> tuple[float, np.ndarray]:
    """s = lambda_max of the L_H pencil against L_G through the normalized pseudo-inverse."""
    if G.n < 2 or not G.is_connected():
        raise ValueError("G must be connected")
    deg = G.degrees().astype(float)
    Lt = G.normalized_laplacian().toarray()
    w, V = np.linalg.eigh(Lt)
    cutoff = 1e-9 * w.max()
    keep = w > cutoff
    root_pinv = (V[:, keep] / np.sqrt(w[keep])) @ V[:, keep].T
    dm = 1.0 / np.sqrt(deg)
    LH = _edge_subset_laplacian(G.n, H_edges) * dm[:, None] * dm[None, :]
    M = root_pinv @ LH @ root_pinv
    vals, vecs = np.linalg.eigh((M + M.T) / 2)
    return float(max(vals[-1], 0.0)), dm * (root_pinv @ vecs[:, -1])


def relative_psd_check(G: MultiGraph, H_edges, c: float) -> CheckResult:
    """Does L_H <= c L_G hold on the complement of ker L_G?"""
    s, x = relative_spectral_ratio(G, H_edges)
    holds = s <= c + RATIO_TOL
    return CheckResult(holds, s, None if holds else x)


def uniform_subsample_bound(G: MultiGraph, eta: float, lam: float | None = None) -> float:
    """eta (1 + delta) with delta = sqrt(18 ln n / (eta d_min lambda2))."""
    lam = lambda2_normalized(G) if lam is None else lam
    dmin = G.degrees().min()
    delta = math.sqrt(18 * math.log(G.n) / (eta * dmin * lam)) if eta > 0 else 0.0
    return eta * (1 + delta)


def correlated_subsample_bound(G: MultiGraph, eta: float, max_label_degree: int, B: float = 1.0,
                               lam: float | None = None) -> float:
    """max((1 + delta) 2 eta (1 - eta), 1/3) with delta = sqrt(B Delta ln n / (d_min lambda2))."""
    lam = lambda2_normalized(G) if lam is None else lam
    dmin = G.degrees().min()
    delta = math.sqrt(B * max_label_degree * math.log(G.n) / (dmin * lam)) if lam > 0 else math.inf
    return max((1 + delta) * 2 * eta * (1 - eta), 1 / 3)


def _cut_counts(n: int, edges: np.ndarray, chunk: int = 1 << 16):
    """Crossing counts for every x with x_0 = +1 (bit set means -1)."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    e = e[e[:, 0] != e[:, 1]]
    total = 1 << (n - 1)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(total, start + chunk), dtype=np.int64) << 1
        bits = (codes[:, None] >> np.arange(n)) & 1
        yield codes, (bits[:, e[:, 0]] != bits[:, e[:, 1]]).sum(axis=1)


def cut_quadratic_form(n: int, edges, x) -> int:
    """x^T L x for a +-1 vector x."""
    x = np.asarray(x)
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    return int(np.sum((x[e[:, 0]] - x[e[:, 1]]) ** 2))


def brute_cut_check(G: MultiGraph, H_edges, c: float, strict: bool = False) -> CheckResult:
    """Check x^T L_H x <= c x^T L_G x (or < when strict) for all non-constant x in {-1,1}^n."""
    if G.n > 20:
        raise ValueError("brute-force cut check limited to n <= 20")
    if G.n < 2:
        return CheckResult(True, 0.0)
    worst, witness = -math.inf, None
    HE = np.asarray(H_edges, dtype=np.int64).reshape(-1, 2)
    g_iter = _cut_counts(G.n, G.edges)
    h_iter = _cut_counts(G.n, HE)
    for (codes, g), (_, h) in zip(g_iter, h_iter):
        keep = codes != 0  # skip the constant vector
        codes, g, h = codes[keep], g[keep], h[keep]
        slack = h - c * g
        bad = slack >= 0 if strict else slack > 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(g > 0, h / np.maximum(g, 1), np.where(h > 0, math.inf, 0.0))
        j = int(np.argmax(ratio)) if len(ratio) else 0
        if len(ratio) and ratio[j] > worst:
            worst = float(ratio[j])
        if bad.any() and witness is None:
            code = int(codes[np.argmax(bad)])
            witness = np.array([-1 if code >> i & 1 else 1 for i in range(G.n)], dtype=np.int8)
    return CheckResult(witness is None, worst, witness)


# --- separation gadget ----------------------------------------------------------------

@dataclass(frozen=True)
class Gadget:
    n: int
    k: int
    graph: MultiGraph  # includes the special edge as its last edge
    special: int
    shifts: np.ndarray  # (n, n*k) integer vectors x_w

    def vertex(self, u: int, i: int) -> int:
        return (u % self.n) * self.k + (i - 1)

    def witness_matrix(self) -> np.ndarray:
        """sum_w x_w x_w^T scaled to unit diagonal."""
        X = self.shifts.T.astype(float) @ self.shifts.astype(float)
        return X / X[0, 0]


def separation_gadget(n: int, k: int) -> Gadget:
    """Ring of n clusters of size k, adjacent clusters fully joined, plus the
    edge between (0,1) and (n/2,1)."""
    if n % 2:
        raise ValueError("n must be even")
    if k < 1 or n < 4:
        raise ValueError("need k >= 1 and n >= 4")
    edges = []
    for u in range(n):
        v = (u + 1) % n
        for i in range(k):
            for j in range(k):
                edges.append((u * k + i, v * k + j))
    special = len(edges)
    edges.append((0, (n // 2) * k))
    base = np.array([min(u, n - u) for u in range(n) for _ in range(k)], dtype=np.int64)
    shifts = np.stack([np.roll(base.reshape(n, k), w, axis=0).ravel() for w in range(n)])
    return Gadget(n, k, MultiGraph(n * k, np.array(edges, dtype=np.int64)), special, shifts)


def quadratic_energy(edges: np.ndarray, x: np.ndarray) -> int:
    """sum over edges of (x_u - x_v)^2, in exact integer arithmetic."""
    x = np.asarray(x, dtype=object)
    return int(sum((x[u] - x[v]) ** 2 for u, v in np.asarray(edges)))


def gadget_closed_form(n: int) -> int:
    h = n // 2
    return sum((h - 2 * w) ** 2 for w in range(h)) + sum((3 * h - 2 * w) ** 2 for w in range(h, n))
