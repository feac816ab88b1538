"""Power network model: topology, susceptances and communication weights."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "InvalidNetworkError",
    "Network",
    "ValidationReport",
    "WeightMatrix",
    "build_susceptance_matrix",
    "infinity_norm",
    "is_connected",
    "metropolis_weights",
    "validate_network",
]


class InvalidNetworkError(ValueError):
    """Raised when a network violates a structural requirement."""


@dataclass(frozen=True)
class Network:
    """Buses, lines, generator limits and loads in per-unit.

    Buses are indexed ``0 .. n_buses - 1``. ``bus_ids`` keeps the labels used
    in case files so outputs can be reported in the original numbering.
    """

    n_buses: int
    slack_bus: int
    lines: tuple[tuple[int, int, float], ...]
    generators: Mapping[int, float]
    loads: Mapping[int, float]
    base_mva: float = 100.0
    bus_ids: tuple = field(default=())

    def __post_init__(self):
        if not self.bus_ids:
            object.__setattr__(self, "bus_ids", tuple(range(1, self.n_buses + 1)))
        object.__setattr__(self, "lines", tuple((int(i), int(j), float(x)) for i, j, x in self.lines))
        object.__setattr__(self, "generators", dict(sorted(self.generators.items())))
        object.__setattr__(self, "loads", dict(sorted(self.loads.items())))

    @property
    def generator_buses(self) -> list[int]:
        return list(self.generators)

    def p_max(self) -> np.ndarray:
        """Per-bus generation cap, zero on buses without a generator."""
        caps = np.zeros(self.n_buses)
        for bus, cap in self.generators.items():
            caps[bus] = cap
        return caps

    def load_vector(self) -> np.ndarray:
        loads = np.zeros(self.n_buses)
        for bus, value in self.loads.items():
            loads[bus] = value
        return loads

    @property
    def total_load(self) -> float:
        return float(sum(self.loads.values()))

    @property
    def total_capacity(self) -> float:
        return float(sum(self.generators.values()))

    def neighbors(self) -> list[list[int]]:
        adj: list[set[int]] = [set() for _ in range(self.n_buses)]
        for i, j, _ in self.lines:
            if 0 <= i < self.n_buses and 0 <= j < self.n_buses and i != j:
                adj[i].add(j)
                adj[j].add(i)
        return [sorted(s) for s in adj]


@dataclass(frozen=True)
class WeightMatrix:
    """Doubly stochastic consensus weights with the smallest nonzero entry ``eta``."""

    entries: np.ndarray
    eta: float

    def check(self, atol: float = 1e-12) -> bool:
        w = self.entries
        if np.any(w < 0):
            return False
        ones = np.ones(w.shape[0])
        return bool(
            np.all(np.abs(w @ ones - 1) <= atol)
            and np.all(np.abs(ones @ w - 1) <= atol)
            and np.all(np.diag(w) > 0)
        )


@dataclass
class ValidationReport:
    connected: bool = True
    total_capacity: float = 0.0
    total_load: float = 0.0
    errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    @property
    def feasible(self) -> bool:
        return self.total_capacity >= self.total_load

    def __str__(self):
        head = "OK" if self.ok else "FAILED"
        lines = [
            f"{head}: total capacity {self.total_capacity:.4f} p.u., "
            f"total load {self.total_load:.4f} p.u., connected={self.connected}"
        ]
        lines += [f"  - {e}" for e in self.errors]
        return "\n".join(lines)


def is_connected(n: int, edges: Sequence[tuple[int, int]]) -> bool:
    if n <= 1:
        return True
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == n


def validate_network(network: Network) -> ValidationReport:
    """Check every structural requirement and collect failures in a report."""
    report = ValidationReport()
    n = network.n_buses
    errors = report.errors
    if n < 1:
        errors.append("n_buses must be positive")
        return report
    if not 0 <= network.slack_bus < n:
        errors.append(f"slack bus {network.slack_bus} is not a valid bus index")

    seen = set()
    edges = []
    for i, j, x in network.lines:
        if not (0 <= i < n and 0 <= j < n):
            errors.append(f"line ({i}, {j}) references an unknown bus")
            continue
        if i == j:
            errors.append(f"line ({i}, {j}) is a self-loop")
            continue
        key = (min(i, j), max(i, j))
        if key in seen:
            errors.append(f"duplicate line {key}")
        seen.add(key)
        if not np.isfinite(x) or x <= 0:
            errors.append(f"line {key} has non-positive reactance {x}")
        edges.append(key)

    report.connected = is_connected(n, edges)
    if not report.connected:
        errors.append("network graph is not connected")

    for bus, cap in network.generators.items():
        if not 0 <= bus < n:
            errors.append(f"generator at unknown bus {bus}")
        elif not np.isfinite(cap) or cap <= 0:
            errors.append(f"generator at bus {bus} has non-positive p_max {cap}")
    for bus, load in network.loads.items():
        if not 0 <= bus < n:
            errors.append(f"load at unknown bus {bus}")
        elif not np.isfinite(load) or load < 0:
            errors.append(f"load at bus {bus} is negative ({load})")

    report.total_capacity = network.total_capacity
    report.total_load = network.total_load
    if not report.feasible:
        errors.append(
            f"total capacity {report.total_capacity:.6g} p.u. is below "
            f"total load {report.total_load:.6g} p.u."
        )
    return report


def build_susceptance_matrix(network: Network) -> np.ndarray:
    """Symmetric line susceptance matrix with ``B[i, j] = 1 / x_ij``.

    Resistance is ignored (DC approximation); the diagonal is zero.
    """
    n = network.n_buses
    B = np.zeros((n, n))
    for i, j, x in network.lines:
        if not x > 0:
            raise InvalidNetworkError(f"line ({i}, {j}) has non-positive reactance {x}")
        b = 1.0 / x
        B[i, j] = b
        B[j, i] = b
    return B


def metropolis_weights(network: Network, self_loop_floor: float = 0.0) -> WeightMatrix:
    """Metropolis-Hastings consensus weights on the line graph.

    ``W[i, j] = 1 / (1 + max(deg_i, deg_j))`` on every line and the diagonal
    takes the remainder of each row. ``self_loop_floor`` is a lower bound the
    diagonal must meet; it is checked, not enforced.
    """
    n = network.n_buses
    nbrs = network.neighbors()
    edges = [(i, j) for i in range(n) for j in nbrs[i] if i < j]
    if not is_connected(n, edges):
        raise InvalidNetworkError("Metropolis weights need a connected graph")
    deg = [len(s) for s in nbrs]
    W = np.zeros((n, n))
    for i in range(n):
        for j in nbrs[i]:
            W[i, j] = 1.0 / (1 + max(deg[i], deg[j]))
        W[i, i] = 1.0 - W[i].sum()
    if np.any(np.diag(W) < self_loop_floor):
        raise InvalidNetworkError(f"diagonal weight below floor {self_loop_floor}")
    eta = float(W[W > 0].min())
    return WeightMatrix(W, eta)


def infinity_norm(matrix) -> float:
    """Maximum absolute row sum."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    if m.size == 0:
        return 0.0
    return float(np.abs(m).sum(axis=1).max())
