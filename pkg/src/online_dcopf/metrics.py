"""Regret, violation, consensus residuals and the theoretical bound constants."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .costs import CostStream, CostStreamConfig
from .network import Network, infinity_norm
from .oracle import DispatchSolution
from .trace import RunTrace

__all__ = [
    "BoundConstants",
    "RunTrace",
    "TheoremReport",
    "average_curves",
    "bound_constants",
    "bound_terms",
    "comparator_costs",
    "consensus_residual",
    "constraint_violation",
    "cumulative_regret",
    "cumulative_violation",
    "geometric_sum",
    "gradient_norm_checks",
    "K1_FORMS",
    "kappa_omega",
    "primal_descent_diagnostic",
    "static_regret",
    "telescoping_residual",
    "theorem_checks",
]


def _stream_array(stream, n):
    if isinstance(stream, CostStream):
        return stream.array(n)
    return np.asarray(stream, dtype=float)


def comparator_costs(stream, comparator: DispatchSolution, n_buses: int) -> np.ndarray:
    """Per-round total cost of the static comparator."""
    coeffs = _stream_array(stream, n_buses)
    p = comparator.p_full(n_buses)
    a, b, c = coeffs[..., 0], coeffs[..., 1], coeffs[..., 2]
    gen = np.zeros(n_buses, dtype=bool)
    gen[list(comparator.buses)] = True
    per_bus = np.where(gen, a * p * p + b * p + c, 0.0)
    return per_bus.sum(axis=1)


def cumulative_regret(trace: RunTrace, comparator: DispatchSolution, stream) -> np.ndarray:
    """``R_s(t)`` for every prefix ``t = 1..T``."""
    comp = comparator_costs(stream, comparator, trace.n_agents)
    if len(comp) < trace.horizon:
        raise ValueError(f"cost stream has {len(comp)} rounds, trace has {trace.horizon}")
    return np.cumsum(trace.cost.sum(axis=1) - comp[: trace.horizon])


def static_regret(trace: RunTrace, comparator: DispatchSolution, stream) -> float:
    """Online cost minus the static comparator's cost over the trace horizon.

    Negative values are possible: the comparator is a single fixed decision.
    """
    comp = comparator_costs(stream, comparator, trace.n_agents)
    if len(comp) != trace.horizon:
        raise ValueError(f"horizon mismatch: stream {len(comp)} vs trace {trace.horizon}")
    return float(trace.cost.sum() - comp.sum())


def cumulative_violation(trace: RunTrace) -> np.ndarray:
    return np.abs(np.cumsum(trace.h.sum(axis=1)))


def constraint_violation(trace: RunTrace) -> float:
    """``|sum_t sum_i h_it|``."""
    return float(abs(trace.h.sum(axis=1).sum()))


def consensus_residual(trace: RunTrace, t: int) -> float:
    """``max_i |lam_it - mean_i lam_it|`` at round ``t`` (1-based)."""
    if not 1 <= t <= trace.horizon:
        raise IndexError(f"round {t} outside 1..{trace.horizon}")
    lam = trace.lam[t - 1]
    return float(np.max(np.abs(lam - lam.mean())))


def average_curves(trace: RunTrace, comparator: DispatchSolution, stream) -> np.ndarray:
    """Rows ``(t, R_s(t)/t, R_ec(t)/t, consensus residual at t)``."""
    t = np.arange(1, trace.horizon + 1, dtype=float)
    reg = cumulative_regret(trace, comparator, stream)
    viol = cumulative_violation(trace)
    lam = trace.lam
    cons = np.max(np.abs(lam - lam.mean(axis=1, keepdims=True)), axis=1)
    return np.column_stack([t, reg / t, viol / t, cons])


def telescoping_residual(trace: RunTrace) -> np.ndarray:
    """Per agent ``sum_t gamma_t h_it + theta_{i,T+1} - theta_{i,1}``.

    Zero up to rounding whenever the angle update is never projected.
    """
    gamma = trace.steps[:, 2]
    return gamma @ trace.h + trace.final_theta - trace.theta[0]


def kappa_omega(eta: float, N: int, Q: int = 1) -> tuple[float, float]:
    """Contraction constants of the consensus step.

    ``kappa = (1 - eta / 2N^2) ** -2`` and ``omega = (1 - eta / 2N^2) ** (1/Q)``.
    """
    if not 0 < eta < 1:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    if N < 1 or Q < 1:
        raise ValueError("N and Q must be at least 1")
    base = 1.0 - eta / (2.0 * N * N)
    return base ** -2, base ** (1.0 / Q)


def geometric_sum(omega: float, T: int, mode: str = "partial") -> float:
    """``sum_{l=1}^{T-2} omega^l`` in closed form, or its limit ``omega / (1 - omega)``."""
    if mode == "limit":
        return omega / (1.0 - omega)
    if mode != "partial":
        raise ValueError(f"unknown geometric sum mode {mode!r}")
    m = T - 2
    if m < 1:
        return 0.0
    if omega == 1.0:
        return float(m)
    return omega * (1.0 - omega**m) / (1.0 - omega)


K1_FORMS = ("derivation", "table")


def bound_terms(N, C_P, C_theta, C_lambda, L_f, B_inf, kappa, omega, S, k1_form="derivation"):
    """``K1..K4`` and ``M1`` for geometric sum value ``S``.

    Two forms of ``K1`` circulate: the closing line of the regret derivation
    (``"derivation"``, default) and the constants table (``"table"``).
    They differ in the signs of the bracketed consensus terms; only the
    first follows from the intermediate steps. ``K2``..``K4`` agree.
    """
    G = C_P + 2 * C_theta * B_inf
    H = 3 * C_P + 2 * C_theta * B_inf
    kN2 = kappa * N * N
    head = (
        -N / 2 * (L_f + C_lambda) ** 2
        - N * G**2
        + 6 * N * C_lambda**2 * B_inf**2
        + 2 * N * C_lambda * B_inf * G
        - 4 * N * C_lambda**2 * B_inf
    )
    if k1_form == "derivation":
        K1 = head + H * (
            2 * N * C_lambda
            + kN2 * omega * C_lambda / (1 - omega)
            - 2 * N * G
            + 4 * N * C_lambda * B_inf
            - kN2 * G * S
            + 2 * kN2 * C_lambda * B_inf * S
        )
    elif k1_form == "table":
        K1 = head + H * (
            2 * N * C_lambda
            - kN2 * omega * C_lambda / (1 - omega)
            + 2 * N * G
            - 2 * kN2 * C_lambda * B_inf * S
            + kN2 * G * S
        ) - 4 * N * C_lambda * B_inf
    else:
        raise ValueError(f"k1_form must be one of {K1_FORMS}, got {k1_form!r}")
    K2 = (
        2 * N * (C_P**2 + C_lambda**2)
        + N * (L_f + C_lambda) ** 2
        + 8 * N * C_lambda**2 * B_inf
        + 2 * N * G**2
        + 2 * H * G * (2 * N + kN2)
    )
    K3 = 2 * N * C_lambda * B_inf * G + H * (4 * N * C_lambda * B_inf + 2 * kN2 * C_lambda * B_inf * S)
    K4 = -4 * N * C_lambda**2 * B_inf**2
    M1 = N * C_theta
    return K1, K2, K3, K4, M1


@dataclass(frozen=True)
class BoundConstants:
    N: int
    C_P: float
    C_P_L: float
    C_theta: float
    C_lambda: float
    C_a: float
    C_b: float
    L_f: float
    B_infnorm: float
    eta: float
    Q: int
    kappa: float
    omega: float
    K1: float
    K2: float
    K3: float
    K4: float
    M1: float
    horizon: int
    geometric: str = "partial"
    k1_form: str = "derivation"
    C_f: float = 0.0
    C_h: float = 0.0
    L_h_p: float = 1.0
    L_h_theta: float = 0.0

    def regret_bound(self, T) -> np.ndarray | float:
        """Regret bound with the constants frozen at ``self.horizon``."""
        T = np.asarray(T, dtype=float)
        return self.K1 + self.K2 * np.sqrt(T) + self.K3 * np.log(T) + self.K4 / np.sqrt(T)

    def violation_bound(self, T):
        return self.M1 * np.sqrt(np.asarray(T, dtype=float))

    def at_horizon(self, T: int, C_lambda: float | None = None) -> "BoundConstants":
        """Re-evaluate ``K1..K4`` at another horizon (and optionally ``C_lambda``)."""
        c_lam = self.C_lambda if C_lambda is None else C_lambda
        S = geometric_sum(self.omega, T, self.geometric)
        K1, K2, K3, K4, M1 = bound_terms(
            self.N, self.C_P, self.C_theta, c_lam, self.L_f, self.B_infnorm, self.kappa, self.omega, S,
            self.k1_form,
        )
        d = asdict(self)
        d.update(K1=K1, K2=K2, K3=K3, K4=K4, M1=M1, C_lambda=c_lam, horizon=T)
        return BoundConstants(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def bound_constants(
    network: Network,
    stream_config: CostStreamConfig | None = None,
    trace: RunTrace | None = None,
    *,
    weights=None,
    stream=None,
    horizon: int | None = None,
    Q: int = 1,
    c_theta="pi",
    c_lambda="empirical",
    geometric: str = "partial",
    k1_form: str = "derivation",
) -> BoundConstants:
    """Evaluate every constant appearing in the regret and violation bounds.

    Parameters
    ----------
    stream_config : CostStreamConfig, optional
        Supplies ``C_a`` and ``C_b`` from the sampling ranges. If absent they
        are read off ``stream`` (the realised coefficients).
    trace : RunTrace, optional
        Needed whenever a constant is requested in ``"empirical"`` mode.
    weights : WeightMatrix or ndarray, optional
        Consensus weights; ``eta`` is the smallest nonzero entry. Defaults to
        Metropolis weights on the network.
    c_theta : "pi", "empirical" or float
    c_lambda : "empirical" or float
        ``"empirical"`` uses ``max |lam_it|`` over the trace.
    geometric : "partial" or "limit"
        How ``sum_{l=1}^{T-2} omega^l`` inside ``K1`` and ``K3`` is evaluated.
    k1_form : "derivation" or "table"
        See :func:`bound_terms`.
    """
    from .network import WeightMatrix, build_susceptance_matrix, metropolis_weights

    N = network.n_buses
    caps = network.p_max()
    C_P = float(caps.max())
    C_P_L = float(network.load_vector().max())

    if stream_config is not None:
        C_a = float(max(abs(v) for v in stream_config.a_range))
        C_b = float(max(abs(v) for v in stream_config.b_range))
        C_c = abs(stream_config.c_fixed)
    elif stream is not None:
        arr = _stream_array(stream, N)
        C_a = float(np.abs(arr[..., 0]).max())
        C_b = float(np.abs(arr[..., 1]).max())
        C_c = float(np.abs(arr[..., 2]).max())
    else:
        raise ValueError("need a stream config or a stream for C_a and C_b")

    def empirical(values):
        if trace is None:
            raise ValueError("empirical constants need a trace")
        return float(np.abs(values).max())

    if c_theta == "pi":
        C_theta = math.pi
    elif c_theta == "empirical":
        C_theta = empirical(np.concatenate([trace.theta.ravel(), trace.final_theta]) if trace is not None else None)
    else:
        C_theta = float(c_theta)

    if c_lambda == "empirical":
        C_lambda = empirical(trace.lam if trace is not None else None)
    else:
        C_lambda = float(c_lambda)

    if weights is None:
        weights = metropolis_weights(network)
    W = weights.entries if isinstance(weights, WeightMatrix) else np.asarray(weights)
    eta = float(W[W > 0].min())

    B_inf = infinity_norm(build_susceptance_matrix(network))
    L_f = 2 * C_a * C_P + C_b
    kappa, omega = kappa_omega(eta, N, Q) if eta < 1 else (1.0, 0.0)
    T = horizon if horizon is not None else (trace.horizon if trace is not None else 1)
    S = geometric_sum(omega, T, geometric) if omega > 0 else 0.0
    K1, K2, K3, K4, M1 = bound_terms(N, C_P, C_theta, C_lambda, L_f, B_inf, kappa, omega, S, k1_form)
    return BoundConstants(
        N=N, C_P=C_P, C_P_L=C_P_L, C_theta=C_theta, C_lambda=C_lambda,
        C_a=C_a, C_b=C_b, L_f=L_f, B_infnorm=B_inf, eta=eta, Q=Q,
        kappa=kappa, omega=omega, K1=K1, K2=K2, K3=K3, K4=K4, M1=M1,
        horizon=T, geometric=geometric, k1_form=k1_form,
        C_f=C_a * C_P**2 + C_b * C_P + C_c,
        C_h=C_P + C_P_L + 2 * C_theta * B_inf,
        L_h_p=1.0, L_h_theta=B_inf,
    )


@dataclass
class TheoremReport:
    """Prefix-wise evaluation of both theorems; margins are ``bound - measured``."""

    regret: np.ndarray
    regret_bound: np.ndarray
    violation: np.ndarray
    violation_bound: np.ndarray
    telescoping_lhs: float = 0.0
    telescoping_rhs: float = 0.0
    notes: list[str] = field(default_factory=list)

    @property
    def regret_margin(self) -> np.ndarray:
        return self.regret_bound - self.regret

    @property
    def violation_margin(self) -> np.ndarray:
        return self.violation_bound - self.violation

    @property
    def regret_ok(self) -> bool:
        return bool(np.all(self.regret_margin >= 0))

    @property
    def violation_ok(self) -> bool:
        return bool(np.all(self.violation_margin >= 0))

    @property
    def ok(self) -> bool:
        return self.regret_ok and self.violation_ok

    def first_failure(self, which: str = "regret") -> int | None:
        margin = self.regret_margin if which == "regret" else self.violation_margin
        bad = np.flatnonzero(margin < 0)
        return int(bad[0]) + 1 if bad.size else None

    def summary(self) -> dict:
        return {
            "regret_ok": self.regret_ok,
            "violation_ok": self.violation_ok,
            "min_regret_margin": float(self.regret_margin.min()),
            "min_violation_margin": float(self.violation_margin.min()),
            "first_regret_failure": self.first_failure("regret"),
            "first_violation_failure": self.first_failure("violation"),
            "final_regret_bound": float(self.regret_bound[-1]),
            "final_violation_bound": float(self.violation_bound[-1]),
            "telescoping_sum": self.telescoping_lhs,
            "telescoping_bound": self.telescoping_rhs,
        }


def theorem_checks(trace: RunTrace, constants: BoundConstants, comparator: DispatchSolution, stream) -> TheoremReport:
    """Check both theorem inequalities at every prefix horizon ``T' <= T``.

    At each prefix the partial geometric sums use ``T'`` and ``C_lambda`` is
    the running maximum of ``|lam|`` over rounds ``1..T'``; ``constants``
    supplies everything else.
    """
    T = trace.horizon
    ts = np.arange(1, T + 1)
    regret = cumulative_regret(trace, comparator, stream)
    violation = cumulative_violation(trace)
    running_lam = np.maximum.accumulate(np.abs(trace.lam).max(axis=1))
    bound = np.empty(T)
    for k, tp in enumerate(ts):
        c = constants.at_horizon(int(tp), C_lambda=float(running_lam[k]))
        bound[k] = c.regret_bound(tp)
    viol_bound = constants.violation_bound(ts)

    # Angle telescoping step of the violation proof, for the final horizon.
    lhs = float(trace.h.sum())
    rhs = float(trace.final_theta.sum() / trace.steps[-1, 2])
    report = TheoremReport(regret, bound, violation, viol_bound, lhs, rhs)
    if lhs > rhs + 1e-6:
        report.notes.append("sum of imbalances exceeds sum(theta_T+1)/gamma_T")
    return report


def gradient_norm_checks(trace: RunTrace, coupling) -> dict:
    """Per-round gradient magnitudes against their running-maximum bounds.

    ``|grad_theta| <= 2 max|lam_tilde| ||B||`` and
    ``|grad_lam| = |h| <= C_P + 2 max|theta| ||B||``.
    """
    B = np.asarray(coupling, dtype=float)
    B_inf = infinity_norm(B)
    deg = B.sum(axis=1)
    lt = trace.lam_tilde
    g_theta = lt @ B.T - lt * deg
    c_lam = np.maximum.accumulate(np.abs(lt).max(axis=1))
    c_theta = np.maximum.accumulate(np.abs(trace.theta).max(axis=1))
    C_P = float(np.abs(trace.p).max()) if trace.p.size else 0.0
    theta_ok = np.abs(g_theta).max(axis=1) <= 2 * c_lam * B_inf + 1e-9
    h_ok = np.abs(trace.h).max(axis=1) <= np.maximum(C_P, 0) + 2 * c_theta * B_inf + 1e-9
    return {"grad_theta_ok": theta_ok, "grad_lambda_ok": h_ok}


def primal_descent_diagnostic(trace: RunTrace, comparator: DispatchSolution, stream, constants: BoundConstants) -> np.ndarray:
    """Per-round truth value of the primal descent inequality at the comparator.

    The comparator is balanced, so its Lagrangian at the average dual equals
    its cost.
    """
    n = trace.n_agents
    comp = comparator_costs(stream, comparator, n)[: trace.horizon]
    p_star = comparator.p_full(n)
    lam_bar = trace.lam.mean(axis=1)
    lhs = trace.cost.sum(axis=1) + lam_bar * trace.h.sum(axis=1) - comp
    delta = trace.steps[:, 3]
    p_next = np.vstack([trace.p[1:], trace.final_p[None, :]])
    dist_now = ((trace.p - p_star) ** 2).sum(axis=1)
    dist_next = ((p_next - p_star) ** 2).sum(axis=1)
    spread = np.abs(trace.lam_tilde - lam_bar[:, None]).sum(axis=1)
    c = constants
    rhs = (dist_now - dist_next) / (2 * delta) + n * delta / 2 * (c.L_f + c.C_lambda) ** 2 + 2 * c.C_P * spread
    return lhs <= rhs + 1e-9
