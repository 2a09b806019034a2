"""Run configuration with defaults from the packaged, versioned defaults file."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from importlib import resources

THREADS_ENV = "PLANTED_CSP_THREADS"


def _defaults() -> dict:
    return json.loads(resources.files("planted_csp").joinpath("data/defaults.json").read_text())


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    eps: float = 0.1
    gamma_lower: float = 0.8
    c_tau: float = 1.1
    beta: float = 8.0
    c_dec: float = 1 / 32
    c1: float = 2.0
    tol_feas: float = 1e-7
    tol_gap: float = 1e-6
    gap_threshold: float = 0.05
    correlation_const: float = 1.0  # constant in the correlated-subsample deviation bound
    sdp_restarts: int = 3
    direct_2xor: bool = True  # solve 2-XOR as its own pair graph
    max_label_arity: int | None = None  # cap r on |S| for label functions
    threads: int = 1
    output: str | None = None
    csv: str | None = None
    version: int = 1

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if not 0 < self.gamma_lower <= 1:
            raise ValueError("gamma_lower must lie in (0, 1]")
        for name in ("c_tau", "beta", "c_dec", "c1", "tol_feas", "tol_gap", "gap_threshold", "correlation_const"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @classmethod
    def load(cls, path=None, **overrides) -> "RunConfig":
        """Packaged defaults, then an optional JSON file, then explicit overrides.

        The thread count is finally overridden by $PLANTED_CSP_THREADS when set.
        """
        values = _defaults()
        if path is not None:
            with open(path) as fh:
                values.update(json.load(fh))
        values.update({k: v for k, v in overrides.items() if v is not None})
        env = os.environ.get(THREADS_ENV)
        if env:
            values["threads"] = int(env)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)
