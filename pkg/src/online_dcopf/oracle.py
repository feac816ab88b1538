"""Static best-in-hindsight dispatch used as the regret comparator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .costs import CostStream
from .network import is_connected

__all__ = [
    "AggregatedCosts",
    "DispatchSolution",
    "InfeasibleDispatchError",
    "aggregate_costs",
    "brute_force_dispatch",
    "economic_dispatch",
    "recover_angles",
]


class InfeasibleDispatchError(ValueError):
    pass


@dataclass(frozen=True)
class AggregatedCosts:
    """Horizon sums of the cost coefficients, one entry per generator."""

    buses: tuple[int, ...]
    A: np.ndarray
    Bc: np.ndarray
    Cc: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.A) <= 0):
            raise ValueError("aggregated quadratic coefficients must be positive")

    def cost(self, p) -> float:
        p = np.asarray(p, dtype=float)
        return float(np.sum(self.A * p * p + self.Bc * p + self.Cc))


@dataclass(frozen=True)
class DispatchSolution:
    """Hindsight dispatch; ``p_star[k]`` belongs to generator bus ``buses[k]``."""

    buses: tuple[int, ...]
    p_star: np.ndarray
    theta_star: np.ndarray | None
    marginal_price: float
    iterations: int = 0

    def p_full(self, n_buses: int) -> np.ndarray:
        p = np.zeros(n_buses)
        p[list(self.buses)] = self.p_star
        return p


def aggregate_costs(stream: CostStream, horizon: int | None = None) -> AggregatedCosts:
    T = stream.horizon if horizon is None else horizon
    if not 1 <= T <= stream.horizon:
        raise ValueError(f"horizon {T} outside 1..{stream.horizon}")
    buses = tuple(sorted(stream[1].coeffs))
    coeffs = np.array([[stream[t].coeffs[b] for b in buses] for t in range(1, T + 1)])
    sums = coeffs.sum(axis=0)
    return AggregatedCosts(buses, sums[:, 0], sums[:, 1], sums[:, 2])


def _supply(mu, A, Bc, caps):
    return np.clip((mu - Bc) / (2.0 * A), 0.0, caps)


def economic_dispatch(A, Bc, total_load: float, caps, tol: float = 1e-10, max_iter: int = 200):
    """Minimise ``sum_i A_i p_i^2 + Bc_i p_i`` s.t. ``sum p = total_load``, ``0 <= p <= caps``.

    Lambda iteration: bisect on the marginal price ``mu`` until the supply
    ``sum_i clamp((mu - Bc_i) / 2A_i, 0, cap_i)`` meets the load.

    Returns
    -------
    p : ndarray
    mu : float
        Marginal price; every generator strictly inside its box satisfies
        ``2 A_i p_i + Bc_i = mu``.
    iterations : int
    """
    A = np.asarray(A, dtype=float)
    Bc = np.asarray(Bc, dtype=float)
    caps = np.asarray(caps, dtype=float)
    if total_load < 0:
        raise InfeasibleDispatchError(f"negative load {total_load}")
    if np.any(A <= 0):
        raise ValueError("quadratic coefficients must be positive")
    if total_load > caps.sum():
        raise InfeasibleDispatchError(
            f"load {total_load:.6g} exceeds total capacity {caps.sum():.6g}"
        )

    lo = float(Bc.min())
    hi = float(np.max(2.0 * A * caps + Bc))
    if total_load == caps.sum():
        return caps.copy(), hi, 0

    mu = 0.5 * (lo + hi)
    it = 0
    for it in range(1, max_iter + 1):
        mu = 0.5 * (lo + hi)
        gap = _supply(mu, A, Bc, caps).sum() - total_load
        if abs(gap) <= tol or mu in (lo, hi):
            break
        if gap > 0:
            hi = mu
        else:
            lo = mu
    return _supply(mu, A, Bc, caps), mu, it


def brute_force_dispatch(A, Bc, total_load: float, caps, grid_step: float = 1e-3):
    """Exhaustive grid search over the first ``n - 1`` outputs; the last balances the load.

    Only for two or three generators.
    """
    A = np.asarray(A, dtype=float)
    Bc = np.asarray(Bc, dtype=float)
    caps = np.asarray(caps, dtype=float)
    n = len(A)
    if not 1 <= n <= 3:
        raise ValueError(f"brute force supports at most 3 generators, got {n}")
    if total_load > caps.sum() + 1e-12:
        raise InfeasibleDispatchError("load exceeds total capacity")

    def axis(cap):
        g = np.arange(0.0, cap, grid_step)
        return np.append(g, cap)

    if n == 1:
        return np.array([min(total_load, caps[0])])

    slack_tol = 1e-12
    best_cost, best = np.inf, None
    if n == 2:
        p1 = axis(caps[0])
        p2 = total_load - p1
        ok = (p2 >= -slack_tol) & (p2 <= caps[1] + slack_tol)
        p1, p2 = p1[ok], np.clip(p2[ok], 0, caps[1])
        cost = A[0] * p1**2 + Bc[0] * p1 + A[1] * p2**2 + Bc[1] * p2
        k = int(np.argmin(cost))
        return np.array([p1[k], p2[k]])

    p2 = axis(caps[1])
    for p1 in axis(caps[0]):
        p3 = total_load - p1 - p2
        ok = (p3 >= -slack_tol) & (p3 <= caps[2] + slack_tol)
        if not ok.any():
            continue
        q2, q3 = p2[ok], np.clip(p3[ok], 0, caps[2])
        cost = A[0] * p1**2 + Bc[0] * p1 + A[1] * q2**2 + Bc[1] * q2 + A[2] * q3**2 + Bc[2] * q3
        k = int(np.argmin(cost))
        if cost[k] < best_cost:
            best_cost, best = cost[k], np.array([p1, q2[k], q3[k]])
    if best is None:
        raise InfeasibleDispatchError("no feasible grid point")
    return best


def recover_angles(B, injections, slack: int, balance_tol: float = 1e-9) -> np.ndarray:
    """Solve the DC flow ``p_i = sum_j B_ij (theta_i - theta_j)`` with ``theta_slack = 0``.

    The slack row and column are dropped from the Laplacian
    ``diag(B.sum(1)) - B`` and the remaining system is solved by LU with
    partial pivoting.
    """
    B = np.asarray(B, dtype=float)
    inj = np.asarray(injections, dtype=float)
    n = B.shape[0]
    if inj.shape != (n,):
        raise ValueError(f"injections must have shape ({n},)")
    if abs(inj.sum()) > balance_tol * max(1.0, np.abs(inj).sum()):
        raise ValueError(f"injections do not balance (sum = {inj.sum():.3e})")
    if n == 1:
        return np.zeros(1)
    edges = list(zip(*np.nonzero(np.triu(B, 1))))
    if not is_connected(n, edges):
        raise ValueError("reduced Laplacian is singular: the network is not connected")
    L = np.diag(B.sum(axis=1)) - B
    keep = [i for i in range(n) if i != slack]
    try:
        reduced = np.linalg.solve(L[np.ix_(keep, keep)], inj[keep])
    except np.linalg.LinAlgError as exc:
        raise ValueError("reduced Laplacian is singular; is the network connected?") from exc
    theta = np.zeros(n)
    theta[keep] = reduced
    return theta
