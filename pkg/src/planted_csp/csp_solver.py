"""Planted CSP -> noisy XOR reduction and the try-every-label-function solver."""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .config import RunConfig
from .gf2 import Inconsistent, pack_uniform, solve_packed
from .instances import CspInstance, PlantingDistribution, XorInstance, csp_value, sign_vector
from .xor_recovery import RecoveryOutput, run_kxor_recovery, solve_1xor

log = logging.getLogger(__name__)

MAX_ENUM_K = 5


def subsets(k: int, max_size: int | None = None) -> list[tuple[int, ...]]:
    """Nonempty subsets of range(k), by size then lexicographically."""
    top = k if max_size is None else min(k, max_size)
    return [S for r in range(1, top + 1) for S in itertools.combinations(range(k), r)]


@dataclass(frozen=True)
class FourierTable:
    k: int
    coeffs: dict  # subset tuple (including ()) -> coefficient

    def __getitem__(self, S) -> Fraction | float:
        return self.coeffs[tuple(sorted(S))]

    def evaluate(self, y) -> Fraction | float:
        """sum_S coeff(S) prod_{i in S} y_i, which is Q(y)."""
        return sum(c * math.prod(y[i] for i in S) for S, c in self.coeffs.items())

    def round_trip_error(self, Q: PlantingDistribution) -> Fraction | float:
        """Largest |Q(y) - evaluate(y)|; zero in exact arithmetic."""
        return max(abs(p - self.evaluate(sign_vector(i, self.k))) for i, p in enumerate(Q.probs))


def fourier_coefficients(Q: PlantingDistribution) -> FourierTable:
    """Exact when the weights are Fractions or ints."""
    k = Q.k
    vectors = [sign_vector(i, k) for i in range(1 << k)]
    coeffs = {}
    for r in range(k + 1):
        for S in itertools.combinations(range(k), r):
            total = sum(p * math.prod(y[i] for i in S) for p, y in zip(Q.probs, vectors))
            coeffs[S] = total / (1 << k) if isinstance(total, float) else Fraction(total) / (1 << k)
    table = FourierTable(k, coeffs)
    if table.round_trip_error(Q) > 1e-12:
        raise ArithmeticError("Fourier round trip failed")
    return table


def subinstance_noise(table: FourierTable, S, sign: int) -> Fraction | float:
    """Corruption rate of the (S, sign) projection: (1 - sign 2^k Q^(S)) / 2."""
    return (1 - sign * (1 << table.k) * table[S]) / 2


def build_xor_subinstance(inst: CspInstance, S, sign: int) -> XorInstance:
    """One |S|-XOR clause per scope: prod_{i in S} x_{scope_i} = sign prod_{i in S} literal_i."""
    S = tuple(S)
    if not S:
        raise ValueError("S must be nonempty")
    if sign not in (1, -1):
        raise ValueError("sign must be +-1")
    cols = list(S)
    rhs = sign * np.prod(inst.literals[:, cols], axis=1) if inst.m else np.zeros(0)
    return XorInstance(inst.n, len(S), inst.scopes[:, cols], rhs)


SYMBOLS = {0: "0", 1: "+", -1: "-"}


@dataclass(frozen=True)
class LabelFunction:
    """Map from nonempty subsets of positions to {0, +1, -1}."""
    k: int
    values: tuple  # aligned with subsets(k)

    def items(self):
        return zip(subsets(self.k), self.values)

    def support(self):
        return [(S, v) for S, v in self.items() if v]

    def encode(self) -> str:
        return ",".join("{" + "".join(str(i + 1) for i in S) + "}" + SYMBOLS[v] for S, v in self.support()) or "0"


def enumerate_label_functions(k: int, max_size: int | None = None):
    """All 3^(number of nonempty S) label functions, optionally zero above |S| = max_size."""
    if k > MAX_ENUM_K and (max_size is None or max_size >= k):
        raise ValueError(f"exhaustive label enumeration is limited to k <= {MAX_ENUM_K}; "
                         "cap the subset size (max_label_arity) to restrict labels to low arity")
    free = subsets(k, max_size)
    full = subsets(k)
    slot = {S: i for i, S in enumerate(full)}
    for combo in itertools.product((0, 1, -1), repeat=len(free)):
        values = [0] * len(full)
        for S, v in zip(free, combo):
            values[slot[S]] = v
        yield LabelFunction(k, tuple(values))


def true_label_function(Q: PlantingDistribution, eps: float) -> LabelFunction:
    """Harness helper: sign of Q^(S) where |Q^(S)| >= 2^-k eps, else 0."""
    table = fourier_coefficients(Q)
    vals = []
    for S in subsets(Q.k):
        c = table[S]
        vals.append(0 if abs(c) < eps / (1 << Q.k) else (1 if c > 0 else -1))
    return LabelFunction(Q.k, tuple(vals))


@dataclass
class Candidate:
    f: LabelFunction
    value: float | None
    status: str
    x: np.ndarray | None = None
    equations: int = 0
    discarded: float = 0.0


@dataclass
class CspReport:
    x: np.ndarray
    best: Candidate
    candidates: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "best_f": self.best.f.encode(),
            "value": self.best.value,
            "per_f": [{"f": c.f.encode(), "value": c.value, "status": c.status} for c in self.candidates],
            "equations_used": self.best.equations,
            "discarded_fraction": self.best.discarded,
        }


def _xor_layer(inst: CspInstance, S, sign, eps, config) -> tuple[RecoveryOutput, XorInstance]:
    psi = build_xor_subinstance(inst, S, sign)
    if len(S) == 1:
        out = solve_1xor(psi, c1=config.c1)
    else:
        # labels only promise |Q^(S)| >= 2^-k eps, i.e. a bias of at least eps
        out = run_kxor_recovery(psi, min(1.0, eps), eps, config)
    return out, psi


def solve_semirandom_csp(inst: CspInstance, eps: float, config: RunConfig | None = None) -> CspReport:
    """Best assignment over all label functions; never looks at the planting distribution."""
    config = config or RunConfig()
    k, m, n = inst.k, inst.m, inst.n
    functions = list(enumerate_label_functions(k, config.max_label_arity))
    needed = sorted({(S, v) for f in functions for S, v in f.support()}, key=lambda p: (len(p[0]), p))

    # XOR-layer results are shared read-only by every label function using them
    def layer(key):
        S, sign = key
        out, psi = _xor_layer(inst, S, sign, eps, config)
        keep = np.ones(m, dtype=bool)
        keep[out.A1] = False
        flipped = psi.rhs.copy()
        flipped[out.A2] = -flipped[out.A2]
        rows, bits = pack_uniform(n, psi.edges, flipped)
        return keep, rows, bits

    def candidate(f):
        keep = np.ones(m, dtype=bool)
        parts = [layers[key] for key in f.support()]
        for kp, _, _ in parts:
            keep &= kp
        if parts:
            rows = np.concatenate([r[keep] for _, r, _ in parts])
            bits = np.concatenate([b[keep] for _, _, b in parts])
        else:
            rows = np.zeros((0, max(1, (n + 63) // 64)), dtype=np.uint64)
            bits = np.zeros(0, dtype=np.uint8)
        x = solve_packed(n, rows, bits)
        discarded = float(1 - keep.mean()) if m else 0.0
        if isinstance(x, Inconsistent):
            return Candidate(f, None, "inconsistent", None, len(bits), discarded)
        return Candidate(f, csp_value(inst, x), "ok", x, len(bits), discarded)

    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            layers = dict(zip(needed, pool.map(layer, needed)))
            candidates = list(pool.map(candidate, functions))
    else:
        layers = {key: layer(key) for key in needed}
        candidates = [candidate(f) for f in functions]

    best = None
    for cand in candidates:
        if cand.status == "ok" and (best is None or cand.value > best.value):
            best = cand
    assert best is not None, "the all-zero label function always yields a candidate"
    return CspReport(best.x, best, candidates)
