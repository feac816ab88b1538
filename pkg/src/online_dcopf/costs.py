"""Time-varying quadratic generator costs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "CostStream",
    "CostStreamConfig",
    "RoundCosts",
    "cost_gradient",
    "evaluate_cost",
    "sample_costs",
]

DEFAULT_A_RANGE = (0.001, 0.08)
DEFAULT_B_RANGE = (1.0, 5.0)


@dataclass(frozen=True)
class RoundCosts:
    """Cost triples ``(a, b, c)`` per generator bus for round ``t``."""

    t: int
    coeffs: Mapping[int, tuple[float, float, float]]

    def __post_init__(self):
        for bus, (a, b, c) in self.coeffs.items():
            if not (np.isfinite(a) and np.isfinite(b) and np.isfinite(c)):
                raise ValueError(f"non-finite cost coefficients at bus {bus}")
            if a <= 0:
                raise ValueError(f"quadratic coefficient must be positive, got a={a} at bus {bus}")

    def triple(self, bus: int) -> tuple[float, float, float]:
        try:
            return self.coeffs[bus]
        except KeyError:
            raise KeyError(f"bus {bus} has no generator cost") from None


@dataclass(frozen=True)
class CostStreamConfig:
    a_range: tuple[float, float] = DEFAULT_A_RANGE
    b_range: tuple[float, float] = DEFAULT_B_RANGE
    c_fixed: float = 0.0
    seed: int = 0
    horizon: int = 2000

    def __post_init__(self):
        lo, hi = self.a_range
        if not 0 < lo <= hi:
            raise ValueError(f"a_range must satisfy 0 < lo <= hi, got {self.a_range}")
        if not self.b_range[0] <= self.b_range[1]:
            raise ValueError(f"b_range is empty: {self.b_range}")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def _draw(seed: int, t: int, bus: int, a_range, b_range) -> tuple[float, float]:
    # One generator per (seed, t, bus) so any round can be regenerated on its own.
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(t), int(bus)])))
    a = rng.uniform(a_range[0], a_range[1])
    b = rng.uniform(b_range[0], b_range[1])
    return float(a), float(b)


def sample_costs(config: CostStreamConfig, t: int, buses: Iterable[int]) -> RoundCosts:
    """Draw the cost triples of round ``t`` for the given generator buses.

    The draw depends only on ``(config.seed, t, bus)``.
    """
    if not 1 <= t <= config.horizon:
        raise IndexError(f"round {t} outside horizon 1..{config.horizon}")
    coeffs = {}
    for bus in buses:
        a, b = _draw(config.seed, t, bus, config.a_range, config.b_range)
        coeffs[int(bus)] = (a, b, float(config.c_fixed))
    return RoundCosts(t, coeffs)


def evaluate_cost(costs: RoundCosts, bus: int, p: float) -> float:
    a, b, c = costs.triple(bus)
    return a * p * p + b * p + c


def cost_gradient(costs: RoundCosts, bus: int, p: float) -> float:
    a, b, _ = costs.triple(bus)
    return 2.0 * a * p + b


@dataclass
class CostStream:
    """A finite sequence of :class:`RoundCosts`, either sampled or replayed.

    ``array(n_buses)`` gives the dense ``(T, n_buses, 3)`` layout used by the
    estimators; rows of buses without a generator are zero.
    """

    rounds: Sequence[RoundCosts]
    config: CostStreamConfig | None = field(default=None)

    @classmethod
    def sample(cls, config: CostStreamConfig, buses: Iterable[int]) -> "CostStream":
        buses = list(buses)
        rounds = [sample_costs(config, t, buses) for t in range(1, config.horizon + 1)]
        return cls(rounds, config)

    @classmethod
    def from_array(cls, coeffs, buses: Iterable[int]) -> "CostStream":
        """Replay a ``(T, n_buses, 3)`` coefficient array."""
        coeffs = np.asarray(coeffs, dtype=float)
        buses = list(buses)
        rounds = [
            RoundCosts(t + 1, {b: tuple(float(v) for v in coeffs[t, b]) for b in buses})
            for t in range(coeffs.shape[0])
        ]
        return cls(rounds)

    @property
    def horizon(self) -> int:
        return len(self.rounds)

    def __len__(self):
        return len(self.rounds)

    def __getitem__(self, t: int) -> RoundCosts:
        """Round ``t`` (1-based)."""
        if not 1 <= t <= len(self.rounds):
            raise IndexError(f"round {t} outside horizon 1..{len(self.rounds)}")
        return self.rounds[t - 1]

    def __iter__(self):
        return iter(self.rounds)

    def array(self, n_buses: int) -> np.ndarray:
        out = np.zeros((len(self.rounds), n_buses, 3))
        for k, rc in enumerate(self.rounds):
            for bus, triple in rc.coeffs.items():
                out[k, bus] = triple
        return out
