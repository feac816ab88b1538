"""Per-round records produced by the online algorithm."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["RunTrace", "TraceRow"]


@dataclass(frozen=True)
class TraceRow:
    """Round-``t`` values before the update, plus the step sizes used."""

    t: int
    p: np.ndarray
    theta: np.ndarray
    lam: np.ndarray
    lam_tilde: np.ndarray
    cost: np.ndarray
    h: np.ndarray
    steps: tuple[float, float, float, float]


@dataclass
class RunTrace:
    """Stacked trace rows; every array is ``(T, N)`` except ``steps`` ``(T, 4)``.

    ``final_*`` hold the state after the last update (round ``T + 1``).
    """

    p: np.ndarray
    theta: np.ndarray
    lam: np.ndarray
    lam_tilde: np.ndarray
    cost: np.ndarray
    h: np.ndarray
    steps: np.ndarray
    final_p: np.ndarray
    final_theta: np.ndarray
    final_lam: np.ndarray
    slack_bus: int = 0
    bus_ids: tuple = field(default=())

    @classmethod
    def from_rows(cls, rows, final_p, final_theta, final_lam, slack_bus=0, bus_ids=()):
        if not rows:
            raise ValueError("a trace needs at least one round")
        for k, row in enumerate(rows, start=1):
            if row.t != k:
                raise ValueError(f"trace rows out of order: expected round {k}, got {row.t}")

        def stack(name):
            return np.array([getattr(r, name) for r in rows], dtype=float)

        return cls(
            p=stack("p"),
            theta=stack("theta"),
            lam=stack("lam"),
            lam_tilde=stack("lam_tilde"),
            cost=stack("cost"),
            h=stack("h"),
            steps=stack("steps"),
            final_p=np.array(final_p, dtype=float),
            final_theta=np.array(final_theta, dtype=float),
            final_lam=np.array(final_lam, dtype=float),
            slack_bus=slack_bus,
            bus_ids=tuple(bus_ids),
        )

    @property
    def horizon(self) -> int:
        return self.p.shape[0]

    @property
    def n_agents(self) -> int:
        return self.p.shape[1]

    def prefix(self, T: int) -> "RunTrace":
        """The trace of the first ``T`` rounds; final state is round ``T + 1``."""
        if not 1 <= T <= self.horizon:
            raise ValueError(f"prefix length {T} outside 1..{self.horizon}")
        if T == self.horizon:
            return self
        return RunTrace(
            self.p[:T], self.theta[:T], self.lam[:T], self.lam_tilde[:T],
            self.cost[:T], self.h[:T], self.steps[:T],
            self.p[T], self.theta[T], self.lam[T],
            self.slack_bus, self.bus_ids,
        )

    def reported_theta(self) -> np.ndarray:
        """Angles referenced to the slack bus."""
        return self.theta - self.theta[:, [self.slack_bus]]
