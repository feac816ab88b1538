"""Estimator wrappers around the online algorithm and the hindsight dispatch."""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .algorithm import StepSchedule, Topology, initial_states, run_round
from .costs import CostStream, RoundCosts
from .network import Network, WeightMatrix, metropolis_weights
from .oracle import DispatchSolution, economic_dispatch, recover_angles
from .trace import RunTrace
from .validation import check_cost_array, check_network

__all__ = ["HindsightDispatch", "OnlineDCOPF"]


class OnlineDCOPF(BaseEstimator):
    """Distributed online primal-dual dispatch over a DC network.

    Parameters
    ----------
    network : Network
    weights : WeightMatrix, ndarray or callable, optional
        Consensus weights. A callable is called with the round index and must
        return the weights of that round. Defaults to Metropolis weights on
        the line graph.
    schedule : StepSchedule, optional
        Defaults to ``alpha = gamma = delta = 1/sqrt(t)``, ``beta = 1/t``.
    grad_variant : {"tilde", "raw"}
        Duals entering the angle gradient: mixed ``lam_tilde`` (two
        exchanges per round) or raw ``lam`` (one exchange).
    convention : {"admittance", "reciprocal"}
        Sign of the line coupling. ``"admittance"`` uses ``B_ij = Im(y_ij)
        = -1/x_ij``; ``"reciprocal"`` uses ``+1/x_ij``. See the README for
        why the default is ``"admittance"``.
    theta_bound : float or None
        Angles are projected onto ``[-theta_bound, theta_bound]`` after every
        update. ``None`` disables the projection.

    Attributes
    ----------
    states_ : list of AgentState
        Agent states after the last processed round.
    trace_ : RunTrace
    t_ : int
        Number of processed rounds.
    """

    def __init__(
        self,
        network: Network | None = None,
        weights=None,
        schedule: StepSchedule | None = None,
        grad_variant: str = "tilde",
        convention: str = "admittance",
        theta_bound: float | None = math.pi,
    ):
        self.network = network
        self.weights = weights
        self.schedule = schedule
        self.grad_variant = grad_variant
        self.convention = convention
        self.theta_bound = theta_bound

    def _initialize(self):
        network = check_network(self.network)
        if self.grad_variant not in ("tilde", "raw"):
            raise ValueError(f"grad_variant must be 'tilde' or 'raw', got {self.grad_variant!r}")
        self.topology_ = Topology.from_network(network, self.convention)
        self.schedule_ = self.schedule if self.schedule is not None else StepSchedule()
        self._static_weights = None
        if self.weights is None:
            self._static_weights = metropolis_weights(network)
        elif not callable(self.weights):
            self._static_weights = self.weights
        self.states_ = initial_states(network.n_buses)
        self.t_ = 0
        self._rows = []

    def _weights_at(self, t):
        if self._static_weights is not None:
            return self._static_weights
        w = self.weights(t)
        entries = w.entries if isinstance(w, WeightMatrix) else np.asarray(w, dtype=float)
        return entries

    def _as_rounds(self, X):
        if isinstance(X, RoundCosts):
            return [X]
        if isinstance(X, CostStream):
            return list(X)
        if isinstance(X, (list, tuple)) and X and isinstance(X[0], RoundCosts):
            return list(X)
        n = self.network.n_buses
        arr = check_cost_array(X, n, self.network.generator_buses)
        if arr.ndim == 2:
            arr = arr[None]
        start = getattr(self, "t_", 0) + 1
        gens = self.network.generator_buses
        return [
            RoundCosts(start + k, {b: tuple(float(v) for v in arr[k, b]) for b in gens})
            for k in range(arr.shape[0])
        ]

    def _step(self, rounds):
        for rc in rounds:
            t = self.t_ + 1
            self.states_, row = run_round(
                self.states_, rc, self._weights_at(t), self.schedule_, t,
                self.topology_, self.grad_variant, self.theta_bound,
            )
            self._rows.append(row)
            self.t_ = t
        s = self.states_
        self.trace_ = RunTrace.from_rows(
            self._rows,
            [a.p_g for a in s], [a.theta for a in s], [a.lam for a in s],
            slack_bus=self.network.slack_bus, bus_ids=self.network.bus_ids,
        )

    def fit(self, X, y=None):
        """Run every round of the cost stream ``X`` from the zero initial state.

        ``X`` is a :class:`CostStream`, a list of :class:`RoundCosts`, or an
        array of shape ``(T, n_buses, 3)`` holding ``(a, b, c)`` per bus.
        """
        self._initialize()
        rounds = self._as_rounds(X)
        if not rounds:
            raise ValueError("empty cost stream")
        self._step(rounds)
        return self

    def partial_fit(self, X, y=None):
        """Process further rounds, continuing from the current state."""
        if not hasattr(self, "states_"):
            self._initialize()
        self._step(self._as_rounds(X))
        return self

    def predict(self, X=None):
        """Generation decision each bus commits to for the next round."""
        check_is_fitted(self, "states_")
        return np.array([s.p_g for s in self.states_])

    @property
    def theta_(self):
        check_is_fitted(self, "states_")
        th = np.array([s.theta for s in self.states_])
        return th - th[self.network.slack_bus]

    @property
    def lambda_(self):
        check_is_fitted(self, "states_")
        return np.array([s.lam for s in self.states_])


class HindsightDispatch(BaseEstimator):
    """Best fixed dispatch for a whole cost stream, found with full hindsight.

    The balance constraints summed over buses reduce to
    ``sum p = sum load``, so the comparator is an economic dispatch on the
    horizon-summed costs followed by an angle solve.

    Parameters
    ----------
    network : Network
    convention : {"reciprocal", "admittance"}
        Sign convention for the recovered angles.
    tol : float
        Balance tolerance of the price bisection.
    """

    def __init__(self, network: Network | None = None, convention: str = "reciprocal", tol: float = 1e-10):
        self.network = network
        self.convention = convention
        self.tol = tol

    def fit(self, X, y=None):
        network = check_network(self.network)
        gens = network.generator_buses
        if isinstance(X, CostStream):
            arr = X.array(network.n_buses)
        else:
            arr = check_cost_array(X, network.n_buses, gens)
            if arr.ndim == 2:
                arr = arr[None]
        sums = arr.sum(axis=0)
        A, Bc = sums[gens, 0], sums[gens, 1]
        caps = network.p_max()[gens]
        p, mu, it = economic_dispatch(A, Bc, network.total_load, caps, tol=self.tol)

        topo = Topology.from_network(network, self.convention)
        inj = -network.load_vector()
        inj[gens] += p
        theta = recover_angles(topo.matrix, inj, network.slack_bus)
        self.solution_ = DispatchSolution(tuple(gens), p, theta, float(mu), it)
        self.p_star_ = p
        self.theta_star_ = theta
        self.marginal_price_ = float(mu)
        self.n_rounds_ = arr.shape[0]
        return self

    def predict(self, X=None):
        """Per-bus comparator dispatch (zeros on buses without generation)."""
        check_is_fitted(self, "solution_")
        return self.solution_.p_full(self.network.n_buses)

