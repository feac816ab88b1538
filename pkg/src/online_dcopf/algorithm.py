"""Distributed online primal-dual updates for DC optimal power flow.

Every agent (bus) holds ``p_g``, ``theta``, ``lam`` and ``lam_tilde``. A round
has two message exchanges: agents first swap ``lam`` with their communication
neighbours and mix it into ``lam_tilde``, then swap ``lam_tilde`` and
``theta`` with their electrical neighbours. After the second barrier each
agent runs :func:`agent_update` on what it received and nothing else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .costs import RoundCosts, evaluate_cost
from .network import Network, WeightMatrix, build_susceptance_matrix
from .trace import TraceRow

__all__ = [
    "AgentState",
    "COUPLING_SIGNS",
    "StepSchedule",
    "Topology",
    "agent_update",
    "consensus_step",
    "evaluate_lagrangian",
    "grad_p_lagrangian",
    "grad_theta_lagrangian",
    "initial_states",
    "local_imbalance",
    "project_box",
    "run_round",
    "step_schedule_eval",
]

# "reciprocal": B_ij = +1/x_ij. "admittance": B_ij = Im(y_ij) = -1/x_ij.
COUPLING_SIGNS = {"reciprocal": 1.0, "admittance": -1.0}


@dataclass
class AgentState:
    p_g: float = 0.0
    theta: float = 0.0
    lam: float = 0.0
    lam_tilde: float = 0.0


@dataclass(frozen=True)
class StepSchedule:
    """Power-law step sizes ``scale * t ** -exponent``.

    The defaults give ``alpha = gamma = delta = 1/sqrt(t)`` and ``beta = 1/t``.
    """

    alpha_scale: float = 1.0
    alpha_exponent: float = 0.5
    beta_scale: float = 1.0
    beta_exponent: float = 1.0
    gamma_scale: float = 1.0
    gamma_exponent: float = 0.5
    delta_scale: float = 1.0
    delta_exponent: float = 0.5

    def __call__(self, t: int) -> tuple[float, float, float, float]:
        return step_schedule_eval(self, t)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def step_schedule_eval(schedule: StepSchedule, t: int) -> tuple[float, float, float, float]:
    """Return ``(alpha, beta, gamma, delta)`` at round ``t``."""
    if t < 1:
        raise ValueError(f"round index must be >= 1, got {t}")
    s = schedule
    steps = (
        s.alpha_scale * t ** -s.alpha_exponent,
        s.beta_scale * t ** -s.beta_exponent,
        s.gamma_scale * t ** -s.gamma_exponent,
        s.delta_scale * t ** -s.delta_exponent,
    )
    if not all(x > 0 and math.isfinite(x) for x in steps):
        raise ValueError(f"step sizes must be positive at t={t}, got {steps}")
    return steps


def project_box(x: float, lo: float, hi: float) -> float:
    if lo > hi:
        raise ValueError(f"empty box [{lo}, {hi}]")
    return min(hi, max(lo, x))


def _check_len(a, b, what):
    if len(a) != len(b):
        raise ValueError(f"{what}: got {len(a)} weights/susceptances for {len(b)} values")


def consensus_step(weights_row: Sequence[float], neighbor_lambdas: Sequence[float]) -> float:
    """Convex combination ``sum_j W_ij * lam_j`` over the agent's in-neighbourhood."""
    _check_len(weights_row, neighbor_lambdas, "consensus_step")
    total = 0.0
    for w, lam in zip(weights_row, neighbor_lambdas):
        total += w * lam
    return total


def local_imbalance(state_i: AgentState, neighbor_thetas, susceptance_row, load_i: float) -> float:
    """Power-balance residual ``h_i`` of bus ``i``.

    ``h_i = p_g - load - theta_i * sum_j B_ij + sum_j B_ij * theta_j``
    """
    _check_len(susceptance_row, neighbor_thetas, "local_imbalance")
    flow = 0.0
    for b, th in zip(susceptance_row, neighbor_thetas):
        flow += b * (th - state_i.theta)
    return state_i.p_g - load_i + flow


def grad_p_lagrangian(costs: RoundCosts, bus: int, p: float, lambda_tilde: float) -> float:
    a, b, _ = costs.triple(bus)
    return 2.0 * a * p + b + lambda_tilde


def grad_theta_lagrangian(lambda_tilde_i: float, neighbor_lambda_tildes, susceptance_row) -> float:
    """``-lam_i * sum_j B_ij + sum_j B_ij * lam_j``; zero when all neighbours agree."""
    _check_len(susceptance_row, neighbor_lambda_tildes, "grad_theta_lagrangian")
    g = 0.0
    for b, lam in zip(susceptance_row, neighbor_lambda_tildes):
        g += b * (lam - lambda_tilde_i)
    return g


@dataclass(frozen=True)
class Topology:
    """Electrical neighbourhoods plus each bus's local constants.

    ``coupling[i]`` lists ``(j, B_ij)`` for the electrical neighbours of bus
    ``i`` using the chosen sign convention.
    """

    n: int
    coupling: tuple[tuple[tuple[int, float], ...], ...]
    loads: tuple[float, ...]
    caps: tuple[float, ...]
    is_generator: tuple[bool, ...]
    slack_bus: int
    matrix: np.ndarray

    @classmethod
    def from_network(cls, network: Network, convention: str = "admittance") -> "Topology":
        try:
            sign = COUPLING_SIGNS[convention]
        except KeyError:
            raise ValueError(f"unknown coupling convention {convention!r}") from None
        B = sign * build_susceptance_matrix(network)
        coupling = tuple(
            tuple((j, float(B[i, j])) for j in range(network.n_buses) if B[i, j] != 0)
            for i in range(network.n_buses)
        )
        caps = network.p_max()
        return cls(
            n=network.n_buses,
            coupling=coupling,
            loads=tuple(float(x) for x in network.load_vector()),
            caps=tuple(float(x) for x in caps),
            is_generator=tuple(bool(i in network.generators) for i in range(network.n_buses)),
            slack_bus=network.slack_bus,
            matrix=B,
        )


def initial_states(n: int) -> list[AgentState]:
    return [AgentState() for _ in range(n)]


def agent_update(
    state: AgentState,
    lam_tilde: float,
    nbr_thetas: Sequence[float],
    nbr_duals: Sequence[float],
    own_dual: float,
    susceptance_row: Sequence[float],
    load: float,
    p_max: float,
    cost_triple,
    steps: tuple[float, float, float, float],
    theta_bound: float | None = None,
):
    """One agent's primal and dual update from purely local information.

    ``nbr_duals`` and ``own_dual`` are the values entering the angle gradient
    (``lam_tilde`` by default, raw ``lam`` in the single-exchange variant).
    ``cost_triple`` is ``None`` on buses without a generator, which hold
    ``p_g = 0``.

    Returns ``(new_state, h, cost)``.
    """
    alpha, beta, gamma, delta = steps
    h = local_imbalance(state, nbr_thetas, susceptance_row, load)
    g_theta = grad_theta_lagrangian(own_dual, nbr_duals, susceptance_row)

    if cost_triple is None:
        p_next = 0.0
        cost = 0.0
    else:
        a, b, c = cost_triple
        p = state.p_g
        cost = a * p * p + b * p + c
        g_p = 2.0 * a * p + b + lam_tilde
        p_next = project_box(p - delta * g_p, 0.0, p_max)

    theta_next = state.theta - gamma * h
    if theta_bound is not None:
        theta_next = project_box(theta_next, -theta_bound, theta_bound)
    lam_next = lam_tilde - beta * g_theta + alpha * h
    return AgentState(p_next, theta_next, lam_next, lam_tilde), h, cost


WeightsLike = Union[WeightMatrix, np.ndarray]


def _weights_array(weights) -> np.ndarray:
    return weights.entries if isinstance(weights, WeightMatrix) else np.asarray(weights, dtype=float)


def run_round(
    states: Sequence[AgentState],
    round_costs: RoundCosts,
    weights: WeightsLike,
    schedule: StepSchedule | Callable[[int], tuple],
    t: int,
    topology: Topology,
    grad_variant: str = "tilde",
    theta_bound: float | None = None,
) -> tuple[list[AgentState], TraceRow]:
    """Advance every agent by one synchronized round.

    All agents read round-start values only, so the result does not depend on
    the order in which agents are processed.
    """
    if t < 1:
        raise ValueError(f"round index must be >= 1, got {t}")
    if grad_variant not in ("tilde", "raw"):
        raise ValueError(f"grad_variant must be 'tilde' or 'raw', got {grad_variant!r}")
    n = topology.n
    if len(states) != n:
        raise ValueError(f"expected {n} agent states, got {len(states)}")
    W = _weights_array(weights)
    if W.shape != (n, n):
        raise ValueError(f"weight matrix has shape {W.shape}, expected {(n, n)}")
    steps = schedule(t) if callable(schedule) else step_schedule_eval(schedule, t)
    if not all(s > 0 for s in steps):
        raise ValueError(f"step sizes must be positive at t={t}")

    # phase 1: exchange lam, mix
    lam_out = [s.lam for s in states]
    lam_tilde = []
    for i in range(n):
        inbox = [(j, lam_out[j]) for j in np.flatnonzero(W[i])]
        lam_tilde.append(consensus_step([W[i, j] for j, _ in inbox], [v for _, v in inbox]))

    # phase 2: exchange lam_tilde and theta with electrical neighbours
    theta_out = [s.theta for s in states]
    new_states = []
    h = np.zeros(n)
    cost = np.zeros(n)
    for i in range(n):
        nbrs = topology.coupling[i]
        row = [b for _, b in nbrs]
        thetas = [theta_out[j] for j, _ in nbrs]
        if grad_variant == "tilde":
            duals = [lam_tilde[j] for j, _ in nbrs]
            own = lam_tilde[i]
        else:
            duals = [lam_out[j] for j, _ in nbrs]
            own = lam_out[i]
        triple = round_costs.triple(i) if topology.is_generator[i] else None
        new, h[i], cost[i] = agent_update(
            states[i], lam_tilde[i], thetas, duals, own, row,
            topology.loads[i], topology.caps[i], triple, steps, theta_bound,
        )
        new_states.append(new)

    row = TraceRow(
        t=t,
        p=np.array([s.p_g for s in states]),
        theta=np.array(theta_out),
        lam=np.array(lam_out),
        lam_tilde=np.array(lam_tilde),
        cost=cost,
        h=h,
        steps=tuple(float(s) for s in steps),
    )
    return new_states, row


def evaluate_lagrangian(p, theta, lam, round_costs: RoundCosts, network: Network, coupling=None) -> float:
    """``sum_i f_i(p_i) + sum_i lam_i * h_i(p, theta)``.

    ``lam`` may be a scalar (a common multiplier) or one value per bus.
    ``coupling`` defaults to the ``+1/x`` susceptance matrix.
    """
    p = np.asarray(p, dtype=float)
    theta = np.asarray(theta, dtype=float)
    n = network.n_buses
    if p.shape != (n,) or theta.shape != (n,):
        raise ValueError(f"p and theta must have shape ({n},)")
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (n,))
    B = build_susceptance_matrix(network) if coupling is None else np.asarray(coupling, dtype=float)
    h = p - network.load_vector() - theta * B.sum(axis=1) + B @ theta
    total = sum(evaluate_cost(round_costs, bus, p[bus]) for bus in network.generators)
    return float(total + lam @ h)

