"""Experiment configuration, orchestration and artifact output."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .algorithm import StepSchedule
from .casefile import load_case
from .costs import DEFAULT_A_RANGE, DEFAULT_B_RANGE, CostStream, CostStreamConfig
from .estimators import HindsightDispatch, OnlineDCOPF
from .metrics import (
    average_curves,
    bound_constants,
    constraint_violation,
    gradient_norm_checks,
    primal_descent_diagnostic,
    static_regret,
    telescoping_residual,
    theorem_checks,
)
from .network import Network, metropolis_weights

__all__ = ["ExperimentConfig", "ExperimentResult", "fmt", "run_experiment", "simulate", "write_artifacts"]

TRACE_COLUMNS = ("t", "bus", "p_pu", "theta_rad", "lambda", "h_pu", "cost")
CURVE_COLUMNS = ("t", "avg_regret", "avg_violation", "consensus_residual")


def fmt(x) -> str:
    """Fixed 12-significant-digit decimal text used in every artifact."""
    x = float(x)
    if x == 0:
        return "0"
    return f"{x:.12g}"


def _round12(obj):
    if isinstance(obj, float):
        return float(fmt(obj)) if math.isfinite(obj) else str(obj)
    if isinstance(obj, dict):
        return {k: _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    if isinstance(obj, np.generic):
        return _round12(obj.item())
    return obj


@dataclass
class ExperimentConfig:
    case: str = "ieee14"
    horizon: int = 2000
    seed: int = 42
    a_range: tuple[float, float] = DEFAULT_A_RANGE
    b_range: tuple[float, float] = DEFAULT_B_RANGE
    c_fixed: float = 0.0
    schedule: dict = field(default_factory=dict)
    grad_variant: str = "tilde"
    convention: str = "admittance"
    theta_bound: float | None = math.pi
    stride: int = 1

    def __post_init__(self):
        self.a_range = tuple(float(v) for v in self.a_range)
        self.b_range = tuple(float(v) for v in self.b_range)
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.stride < 1:
            raise ValueError("stride must be at least 1")
        if self.grad_variant not in ("tilde", "raw"):
            raise ValueError(f"grad_variant must be 'tilde' or 'raw', got {self.grad_variant!r}")
        StepSchedule(**self.schedule)
        self.stream_config()

    def stream_config(self) -> CostStreamConfig:
        return CostStreamConfig(self.a_range, self.b_range, self.c_fixed, self.seed, self.horizon)

    def step_schedule(self) -> StepSchedule:
        return StepSchedule(**self.schedule)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["a_range"] = list(self.a_range)
        d["b_range"] = list(self.b_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if "config" in d and isinstance(d["config"], dict):
            d = d["config"]
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    network: Network
    stream: CostStream
    model: OnlineDCOPF
    hindsight: HindsightDispatch
    wall_time: float = 0.0

    @property
    def trace(self):
        return self.model.trace_

    @property
    def comparator(self):
        return self.hindsight.solution_

    def curves(self) -> np.ndarray:
        return average_curves(self.trace, self.comparator, self.stream)

    def constants(self, geometric: str = "partial", k1_form: str = "derivation"):
        return bound_constants(
            self.network, self.config.stream_config(), self.trace,
            weights=metropolis_weights(self.network), geometric=geometric, k1_form=k1_form,
        )

    def theorem_report(self, geometric: str = "partial", k1_form: str = "derivation"):
        return theorem_checks(self.trace, self.constants(geometric, k1_form), self.comparator, self.stream)

    def summary(self) -> dict:
        trace, net = self.trace, self.network
        T = trace.horizon
        regret = static_regret(trace, self.comparator, self.stream)
        violation = constraint_violation(trace)
        curves = self.curves()
        ids = [str(b) for b in net.bus_ids]
        comp = self.comparator
        bounds, checks = {}, {}
        for form in ("derivation", "table"):
            for mode in ("partial", "limit"):
                key = f"{form}_{mode}"
                c = self.constants(mode, form)
                bounds[key] = c.to_dict()
                checks[key] = theorem_checks(trace, c, comp, self.stream).summary()
        grads = gradient_norm_checks(trace, self.model.topology_.matrix)
        lemma = primal_descent_diagnostic(trace, comp, self.stream, self.constants())
        tele = telescoping_residual(trace)
        body = _round12({
            "final": {
                "horizon": T,
                "static_regret": regret,
                "constraint_violation": violation,
                "avg_regret": regret / T,
                "avg_violation": violation / T,
                "consensus_residual": float(curves[-1, 3]),
                "total_cost": float(trace.cost.sum()),
                "p_final": dict(zip(ids, trace.final_p.tolist())),
            },
            "comparator": {
                "p_star": {str(net.bus_ids[b]): float(v) for b, v in zip(comp.buses, comp.p_star)},
                "marginal_price": comp.marginal_price,
                "theta_star": dict(zip(ids, comp.theta_star.tolist())),
            },
            "bounds": bounds,
            "theorem_checks": checks,
            "diagnostics": {
                "telescoping_max_abs": float(np.abs(tele).max()),
                "primal_descent_fraction_holding": float(lemma.mean()),
                "grad_theta_bound_fraction": float(grads["grad_theta_ok"].mean()),
                "grad_lambda_bound_fraction": float(grads["grad_lambda_ok"].mean()),
            },
        })
        # the config echo is kept at full precision so it replays exactly
        return {"config": self.config.to_dict(), **body}


def simulate(config: ExperimentConfig) -> ExperimentResult:
    """Run the online algorithm and the hindsight comparator in memory."""
    start = time.perf_counter()
    network = load_case(config.case)
    stream = CostStream.sample(config.stream_config(), network.generator_buses)
    model = OnlineDCOPF(
        network,
        schedule=config.step_schedule(),
        grad_variant=config.grad_variant,
        convention=config.convention,
        theta_bound=config.theta_bound,
    ).fit(stream)
    hindsight = HindsightDispatch(network, convention=config.convention).fit(stream)
    return ExperimentResult(config, network, stream, model, hindsight, time.perf_counter() - start)


def write_artifacts(result: ExperimentResult, out_dir) -> dict:
    """Write ``trace.csv``, ``curves.csv``, ``summary.json`` and ``timing.json``.

    The first three depend only on the configuration; wall time lives in
    ``timing.json`` so they stay byte-identical across reruns.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace, net, stride = result.trace, result.network, result.config.stride
    theta = trace.reported_theta()
    T = trace.horizon

    paths = {name: out / name for name in ("trace.csv", "curves.csv", "summary.json", "timing.json")}
    with open(paths["trace.csv"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for k in range(T):
            t = k + 1
            if not (t == 1 or t % stride == 0 or t == T):
                continue
            for i in range(net.n_buses):
                w.writerow([t, net.bus_ids[i], fmt(trace.p[k, i]), fmt(theta[k, i]),
                            fmt(trace.lam[k, i]), fmt(trace.h[k, i]), fmt(trace.cost[k, i])])

    with open(paths["curves.csv"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for row in result.curves():
            w.writerow([int(row[0])] + [fmt(v) for v in row[1:]])

    paths["summary.json"].write_text(json.dumps(result.summary(), indent=2, sort_keys=True) + "\n")
    paths["timing.json"].write_text(json.dumps({"wall_time_s": result.wall_time}, indent=2) + "\n")
    return paths


def run_experiment(config: ExperimentConfig, out_dir) -> ExperimentResult:
    result = simulate(config)
    write_artifacts(result, out_dir)
    return result
