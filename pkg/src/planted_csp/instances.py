"""Planted CSP and noisy XOR instances: types, samplers, values, JSON I/O."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np


# Sign vectors y in {-1,1}^k are indexed by sum_i 2^i [y_i = -1].

def sign_vector(index: int, k: int) -> tuple[int, ...]:
    return tuple(-1 if (index >> i) & 1 else 1 for i in range(k))


def sign_index(y: Sequence[int]) -> int:
    return sum(1 << i for i, v in enumerate(y) if v == -1)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Predicate:
    k: int
    table: tuple[int, ...]

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("predicate arity must be >= 1")
        if len(self.table) != 1 << self.k:
            raise ValueError(f"table needs {1 << self.k} entries, got {len(self.table)}")
        if any(v not in (0, 1) for v in self.table):
            raise ValueError("table entries must be 0/1")

    @classmethod
    def from_satisfying(cls, k: int, satisfying) -> "Predicate":
        table = [0] * (1 << k)
        for y in satisfying:
            if len(y) != k:
                raise ValueError("satisfying vector has wrong length")
            table[sign_index(y)] = 1
        return cls(k, tuple(table))

    def satisfying(self) -> list[tuple[int, ...]]:
        return [sign_vector(i, self.k) for i, v in enumerate(self.table) if v]

    def __call__(self, y) -> int:
        return self.table[sign_index(y)]


def nae3() -> Predicate:
    """Not-all-equal on three literals."""
    return Predicate(3, tuple(0 if i in (0, 7) else 1 for i in range(8)))


def ksat(k: int) -> Predicate:
    """OR of k literals; a literal is true when it equals +1."""
    return Predicate(k, tuple(0 if i == (1 << k) - 1 else 1 for i in range(1 << k)))


def kxor(k: int, parity: int = 1) -> Predicate:
    return Predicate(k, tuple(int(math.prod(sign_vector(i, k)) == parity) for i in range(1 << k)))


PREDICATES = {"nae3": nae3, "3sat": lambda: ksat(3), "2sat": lambda: ksat(2), "3xor": lambda: kxor(3)}


@dataclass(frozen=True)
class PlantingDistribution:
    k: int
    probs: tuple  # floats or Fractions, indexed like Predicate.table

    def __post_init__(self):
        if len(self.probs) != 1 << self.k:
            raise ValueError("planting distribution needs 2^k weights")
        if any(p < 0 for p in self.probs):
            raise ValueError("negative weight")
        if abs(float(sum(self.probs)) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")

    @classmethod
    def uniform_over(cls, pred: Predicate, exact: bool = True) -> "PlantingDistribution":
        count = sum(pred.table)
        w = Fraction(1, count) if exact else 1.0 / count
        return cls(pred.k, tuple(w if v else 0 for v in pred.table))

    @classmethod
    def point_mass(cls, y: Sequence[int]) -> "PlantingDistribution":
        k = len(y)
        idx = sign_index(y)
        return cls(k, tuple(Fraction(int(i == idx)) for i in range(1 << k)))

    def check_supported(self, pred: Predicate):
        if pred.k != self.k:
            raise ValueError(f"arity mismatch: predicate {pred.k}, planting {self.k}")
        for i, p in enumerate(self.probs):
            if p > 0 and not pred.table[i]:
                raise ValueError(f"planting puts mass on falsifying pattern {sign_vector(i, self.k)}")


@dataclass(frozen=True)
class CspInstance:
    """Scopes and literals are (m, k) arrays; variable indices are 0-based."""
    n: int
    predicate: Predicate
    scopes: np.ndarray
    literals: np.ndarray

    def __post_init__(self):
        scopes = np.asarray(self.scopes, dtype=np.int64).reshape(-1, self.predicate.k)
        literals = np.asarray(self.literals, dtype=np.int8).reshape(-1, self.predicate.k)
        if scopes.shape != literals.shape:
            raise ValueError("one literal vector per scope required")
        _check_tuples(scopes, self.n)
        if literals.size and not np.all(np.abs(literals) == 1):
            raise ValueError("literals must be +-1")
        object.__setattr__(self, "scopes", _freeze(scopes))
        object.__setattr__(self, "literals", _freeze(literals))

    @property
    def k(self) -> int:
        return self.predicate.k

    @property
    def m(self) -> int:
        return len(self.scopes)


@dataclass(frozen=True)
class XorInstance:
    """k-XOR clauses prod_{i in edges[c]} x_i = rhs[c]; a multiset of clauses is allowed."""
    n: int
    k: int
    edges: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        edges = np.sort(np.asarray(self.edges, dtype=np.int64).reshape(-1, self.k), axis=1)
        rhs = np.asarray(self.rhs, dtype=np.int8).reshape(-1)
        if len(rhs) != len(edges):
            raise ValueError("one rhs per clause required")
        _check_tuples(edges, self.n)
        if rhs.size and not np.all(np.abs(rhs) == 1):
            raise ValueError("rhs must be +-1")
        object.__setattr__(self, "edges", _freeze(edges))
        object.__setattr__(self, "rhs", _freeze(rhs))

    @property
    def m(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class PlantedGroundTruth:
    xstar: np.ndarray
    corrupted: frozenset
    eta: float
    ystar: np.ndarray | None = None

    def __post_init__(self):
        if not 0 <= self.eta < 0.5:
            raise ValueError("eta must lie in [0, 1/2)")


@dataclass(frozen=True)
class Hypergraph:
    n: int
    k: int
    edges: tuple[tuple[int, ...], ...] = field(default=())

    @property
    def m(self) -> int:
        return len(self.edges)

    def array(self) -> np.ndarray:
        return np.array(self.edges, dtype=np.int64).reshape(-1, self.k)


def _check_tuples(rows: np.ndarray, n: int):
    if rows.size == 0:
        return
    if rows.min() < 0 or rows.max() >= n:
        raise ValueError("variable index out of range")
    s = np.sort(rows, axis=1)
    if rows.shape[1] > 1 and np.any(s[:, 1:] == s[:, :-1]):
        raise ValueError("indices within a scope must be distinct")


# Per-clause randomness: one independent stream per (seed, purpose, clause index).

def clause_uniforms(seed: int, m: int, stream: int = 0) -> np.ndarray:
    out = np.empty(m)
    for idx in range(m):
        out[idx] = np.random.default_rng([seed, stream, idx]).random()
    return out


def random_signs(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng([seed, 99]).choice(np.array([-1, 1], dtype=np.int8), size=n)


def sample_planted_csp(n: int, scopes, xstar, pred: Predicate, Q: PlantingDistribution, seed: int) -> CspInstance:
    Q.check_supported(pred)
    scopes = np.asarray(scopes, dtype=np.int64).reshape(-1, pred.k)
    xstar = np.asarray(xstar, dtype=np.int8)
    if len(xstar) != n:
        raise ValueError("xstar length must equal n")
    cdf = np.cumsum([float(p) for p in Q.probs])
    u = clause_uniforms(seed, len(scopes), stream=1)
    # normalised so the search never lands past the end or on a zero-mass entry
    idx = np.searchsorted(cdf / cdf[-1], u, side="right").astype(np.int64)
    bits = (idx[:, None] >> np.arange(pred.k)) & 1
    y = (1 - 2 * bits).astype(np.int8)
    literals = y * xstar[scopes] if len(scopes) else y
    return CspInstance(n, pred, scopes, literals)


def sample_noisy_xor(H: Hypergraph, xstar, eta: float, seed: int) -> tuple[XorInstance, PlantedGroundTruth]:
    if not 0 <= eta < 0.5:
        raise ValueError("eta must lie in [0, 1/2)")
    xstar = np.asarray(xstar, dtype=np.int8)
    edges = H.array()
    clean = np.prod(xstar[edges], axis=1).astype(np.int8) if len(edges) else np.zeros(0, np.int8)
    flip = clause_uniforms(seed, len(edges), stream=2) < eta
    rhs = np.where(flip, -clean, clean).astype(np.int8)
    truth = PlantedGroundTruth(xstar.copy(), frozenset(np.flatnonzero(flip).tolist()), eta)
    return XorInstance(H.n, H.k, edges, rhs), truth


def csp_value(inst: CspInstance, x) -> float:
    x = np.asarray(x)
    if len(x) != inst.n:
        raise ValueError("assignment length mismatch")
    if inst.m == 0:
        return 1.0
    y = inst.literals * x[inst.scopes]
    idx = ((y == -1).astype(np.int64) << np.arange(inst.k)).sum(axis=1)
    return float(np.asarray(inst.predicate.table)[idx].mean())


def xor_value(inst: XorInstance, x) -> float:
    x = np.asarray(x)
    if len(x) != inst.n:
        raise ValueError("assignment length mismatch")
    if inst.m == 0:
        return 1.0
    psi = float(np.sum(inst.rhs * np.prod(x[inst.edges], axis=1)))
    return 0.5 + psi / (2 * inst.m)


def gen_hypergraph(kind: str, n: int, k: int, m: int, seed: int, m1: int | None = None) -> Hypergraph:
    """Random k-uniform hypergraph.

    kinds: "uniform" (m distinct edges), "split" (two disjoint halves, m1 edges
    in the first, default n), "regular" (near-regular, simple).
    """
    rng = np.random.default_rng([seed, 7])
    if kind == "uniform":
        edges = _uniform_edges(rng, range(n), k, m)
    elif kind == "split":
        half = n // 2
        m1 = n if m1 is None else m1
        edges = _uniform_edges(rng, range(half), k, m1) + _uniform_edges(rng, range(half, n), k, m - m1)
    elif kind == "regular":
        edges = _regular_edges(rng, n, k, m, seed)
    else:
        raise ValueError(f"unknown hypergraph kind {kind!r}")
    return Hypergraph(n, k, tuple(edges))


def _uniform_edges(rng, verts, k, m):
    verts = list(verts)
    total = math.comb(len(verts), k)
    if m > total or m < 0:
        raise ValueError(f"cannot place {m} distinct {k}-edges on {len(verts)} vertices")
    if m > total // 2:
        every = list(itertools.combinations(verts, k))
        pick = rng.choice(total, size=m, replace=False)
        return sorted(every[i] for i in pick)
    chosen = set()
    while len(chosen) < m:
        chosen.add(tuple(sorted(rng.choice(verts, size=k, replace=False).tolist())))
    return sorted(chosen)


def _regular_edges(rng, n, k, m, seed):
    if (k * m) % n == 0 and k == 2:
        import networkx as nx
        d = 2 * m // n
        g = nx.random_regular_graph(d, n, seed=int(rng.integers(2**31)))
        return sorted(tuple(sorted(e)) for e in g.edges())
    if m > math.comb(n, k):
        raise ValueError("too many edges")
    # configuration-style: draw from a balanced stub list, reject repeats
    for _ in range(200):
        stubs = np.resize(np.arange(n), k * m)
        rng.shuffle(stubs)
        chosen, spare = set(), []
        for row in stubs.reshape(m, k):
            e = tuple(sorted(row.tolist()))
            if len(set(e)) == k and e not in chosen:
                chosen.add(e)
            else:
                spare.append(e)
        deg = np.zeros(n, dtype=np.int64)
        for e in chosen:
            deg[list(e)] += 1
        tries = 0
        while len(chosen) < m and tries < 100 * m:
            tries += 1
            low = np.argsort(deg + rng.random(n))[: 3 * k]
            e = tuple(sorted(rng.choice(low, size=k, replace=False).tolist()))
            if e not in chosen:
                chosen.add(e)
                deg[list(e)] += 1
        if len(chosen) == m:
            return sorted(chosen)
    raise ValueError("could not build a near-regular hypergraph")


# JSON I/O (variables are 1-based on disk)

def xor_to_json(inst: XorInstance) -> dict:
    return {
        "kind": "xor",
        "k": inst.k,
        "n": inst.n,
        "clauses": [{"vars": [int(v) + 1 for v in e], "rhs": int(b)} for e, b in zip(inst.edges, inst.rhs)],
    }


def csp_to_json(inst: CspInstance) -> dict:
    return {
        "kind": "csp",
        "k": inst.k,
        "n": inst.n,
        "predicate": {"satisfying": [list(y) for y in inst.predicate.satisfying()]},
        "scopes": [[int(v) + 1 for v in s] for s in inst.scopes],
        "literals": [[int(v) for v in lit] for lit in inst.literals],
    }


def truth_to_json(truth: PlantedGroundTruth) -> dict:
    out = {"xstar": [int(v) for v in truth.xstar], "corrupted": sorted(int(c) for c in truth.corrupted), "eta": truth.eta}
    if truth.ystar is not None:
        out["ystar"] = [int(v) for v in truth.ystar]
    return out


def instance_from_json(obj: dict):
    kind = obj.get("kind")
    n, k = int(obj["n"]), int(obj["k"])
    if kind == "xor":
        clauses = obj["clauses"]
        edges = np.array([[v - 1 for v in c["vars"]] for c in clauses], dtype=np.int64).reshape(-1, k)
        rhs = np.array([c["rhs"] for c in clauses], dtype=np.int8)
        return XorInstance(n, k, edges, rhs)
    if kind == "csp":
        pred = Predicate.from_satisfying(k, obj["predicate"]["satisfying"])
        scopes = np.array(obj["scopes"], dtype=np.int64).reshape(-1, k) - 1
        return CspInstance(n, pred, scopes, np.array(obj["literals"], dtype=np.int8).reshape(-1, k))
    raise ValueError(f"unknown instance kind {kind!r}")


def truth_from_json(obj: dict) -> PlantedGroundTruth:
    ystar = obj.get("ystar")
    return PlantedGroundTruth(
        np.array(obj["xstar"], dtype=np.int8),
        frozenset(obj.get("corrupted", [])),
        float(obj.get("eta", 0.0)),
        None if ystar is None else np.array(ystar, dtype=np.int8),
    )


def dump_json(obj: dict, path) -> None:
    Path(path).write_text(json.dumps(obj, separators=(",", ":")) + "\n")


def truth_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.name[: -len(".json")] + ".truth.json" if p.name.endswith(".json") else p.name + ".truth.json")


def load_instance(path):
    """Load an instance and its truth sidecar (None if absent)."""
    inst = instance_from_json(json.loads(Path(path).read_text()))
    tp = truth_path(path)
    truth = truth_from_json(json.loads(tp.read_text())) if tp.exists() else None
    return inst, truth
