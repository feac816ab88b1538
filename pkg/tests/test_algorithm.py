import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import path_network, random_connected_network
from online_dcopf.algorithm import (
    AgentState,
    StepSchedule,
    Topology,
    agent_update,
    consensus_step,
    evaluate_lagrangian,
    grad_p_lagrangian,
    grad_theta_lagrangian,
    initial_states,
    local_imbalance,
    project_box,
    run_round,
    step_schedule_eval,
)
from online_dcopf.costs import CostStreamConfig, RoundCosts, sample_costs
from online_dcopf.network import Network, build_susceptance_matrix, metropolis_weights


class TestProjectBox:
    @pytest.mark.parametrize("x, expected", [(-0.5, 0), (1.3, 1.3), (3.0, 2.8)])
    def test_examples(self, x, expected):
        assert project_box(x, 0, 2.8) == expected

    def test_empty_box(self):
        with pytest.raises(ValueError):
            project_box(1.0, 2.0, 1.0)

    @given(st.floats(-1e6, 1e6), st.floats(-10, 10), st.floats(0, 10))
    def test_idempotent_and_inside(self, x, lo, width):
        hi = lo + width
        y = project_box(x, lo, hi)
        assert lo <= y <= hi
        assert project_box(y, lo, hi) == y


class TestConsensusStep:
    def test_examples(self):
        assert consensus_step([0.5, 0.25, 0.25], [4, 2, 0]) == 2.5
        assert consensus_step([0, 1, 0], [7, -3, 5]) == -3
        assert consensus_step([1 / 3] * 3, [3, 6, 9]) == pytest.approx(6)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            consensus_step([0.5, 0.5], [1.0])


class TestLocalImbalance:
    def test_single_neighbour(self):
        h = local_imbalance(AgentState(p_g=1.0, theta=0.0), [0.02], [10.0], 0.5)
        assert h == pytest.approx(0.7)

    def test_balanced(self):
        assert local_imbalance(AgentState(p_g=0.3, theta=0.1), [0.1, 0.1], [5.0, 7.0], 0.3) == 0

    def test_zero_init(self):
        assert local_imbalance(AgentState(), [0.0, 0.0], [10.0, 4.0], 0.95) == -0.95

    def test_mismatch(self):
        with pytest.raises(ValueError):
            local_imbalance(AgentState(), [0.0], [1.0, 2.0], 0.0)


class TestGradients:
    def test_grad_p(self):
        rc = RoundCosts(1, {0: (0.001, 1, 0), 1: (0.04, 3, 0)})
        assert grad_p_lagrangian(rc, 0, 1.0, 0.0) == pytest.approx(1.002)
        assert grad_p_lagrangian(rc, 1, 1.0, -1.0) == pytest.approx(2.08)
        assert grad_p_lagrangian(rc, 1, 1.0, -3.08) == pytest.approx(0, abs=1e-15)

    def test_grad_theta(self):
        assert grad_theta_lagrangian(2.0, [1.0], [10.0]) == -10
        assert grad_theta_lagrangian(1.5, [1.5, 1.5], [3.0, 8.0]) == 0
        assert grad_theta_lagrangian(0.0, [1.0, -0.5], [10.0, 20.0]) == 0

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_lagrangian_gradients_match_finite_difference(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 8))
        gens = {i: 2.0 for i in range(n) if rng.random() < 0.6} or {0: 2.0}
        net = random_connected_network(rng, n, gens=gens, loads={i: float(rng.uniform(0, 1)) for i in range(n)})
        rc = RoundCosts(1, {b: (float(rng.uniform(0.001, 0.08)), float(rng.uniform(1, 5)), 0.0) for b in gens})
        B = build_susceptance_matrix(net)
        p, theta, lam = rng.uniform(0, 2, n), rng.uniform(-1, 1, n), rng.uniform(-5, 5, n)
        p[[i for i in range(n) if i not in gens]] = 0
        L = lambda p_, th_: evaluate_lagrangian(p_, th_, lam, rc, net, B)
        eps = 1e-6
        for i in range(n):
            e = np.zeros(n)
            e[i] = eps
            fd_theta = (L(p, theta + e) - L(p, theta - e)) / (2 * eps)
            nbr = [j for j in range(n) if B[i, j]]
            g_theta = grad_theta_lagrangian(lam[i], [lam[j] for j in nbr], [B[i, j] for j in nbr])
            assert abs(fd_theta - g_theta) <= 1e-6 * max(1.0, abs(g_theta))
            if i in gens:
                fd_p = (L(p + e, theta) - L(p - e, theta)) / (2 * eps)
                g_p = grad_p_lagrangian(rc, i, p[i], lam[i])
                assert abs(fd_p - g_p) <= 1e-6 * max(1.0, abs(g_p))


class TestSchedule:
    @pytest.mark.parametrize(
        "t, expected",
        [(1, (1, 1, 1, 1)), (4, (0.5, 0.25, 0.5, 0.5)), (100, (0.1, 0.01, 0.1, 0.1))],
    )
    def test_defaults(self, t, expected):
        assert step_schedule_eval(StepSchedule(), t) == pytest.approx(expected, abs=1e-15)

    def test_bad_round(self):
        with pytest.raises(ValueError):
            step_schedule_eval(StepSchedule(), 0)

    def test_nonpositive(self):
        with pytest.raises(ValueError):
            StepSchedule(alpha_scale=0.0)(1)

    def test_callable(self):
        s = StepSchedule(beta_scale=0.3)
        assert s(9) == pytest.approx((1 / 3, 0.3 / 9, 1 / 3, 1 / 3))


class TestLagrangian:
    def test_zero_dual_is_cost(self):
        net = path_network([0.1], gens={0: 2.0}, loads={1: 0.5})
        rc = RoundCosts(1, {0: (0.5, 1.0, 0.2)})
        assert evaluate_lagrangian([1.0, 0.0], [0.0, 0.3], 0.0, rc, net) == pytest.approx(1.7)

    def test_feasible_point_ignores_dual(self):
        net = path_network([0.1], gens={0: 2.0}, loads={1: 0.5})
        rc = RoundCosts(1, {0: (0.5, 1.0, 0.0)})
        theta = [0.0, -0.05]  # flow 10 * 0.05 = 0.5 from bus 0 to bus 1
        base = evaluate_lagrangian([0.5, 0.0], theta, 0.0, rc, net)
        for lam in (3.0, [1.0, -7.0]):
            assert evaluate_lagrangian([0.5, 0.0], theta, lam, rc, net) == pytest.approx(base)

    def test_single_bus(self):
        net = Network(1, 0, [], {0: 2.0}, {0: 0.5})
        rc = RoundCosts(1, {0: (1.0, 0.0, 0.0)})
        assert evaluate_lagrangian([1.0], [0.0], 2.0, rc, net) == pytest.approx(2.0)


class TestRunRound:
    def test_first_round_rollout(self, ieee14):
        topo = Topology.from_network(ieee14)
        W = metropolis_weights(ieee14)
        rc = sample_costs(CostStreamConfig(seed=42), 1, ieee14.generator_buses)
        states, row = run_round(initial_states(14), rc, W, StepSchedule(), 1, topo)
        load = ieee14.load_vector()
        np.testing.assert_allclose(row.h, -load, atol=0)
        np.testing.assert_allclose([s.theta for s in states], load, atol=1e-15)
        np.testing.assert_allclose([s.lam for s in states], -load, atol=1e-15)
        # gradient 2ap + b + 0 > 0 at p = 0, so the projection keeps p at 0
        assert all(s.p_g == 0 for s in states)
        assert row.cost.sum() == 0

    def test_isolated_bus_fixed_point(self):
        net = Network(1, 0, [], {0: 1.0}, {})
        topo = Topology.from_network(net)
        rc = RoundCosts(1, {0: (1.0, 0.0, 0.0)})
        start = [AgentState(p_g=0.0, theta=0.4, lam=1.5)]
        states, row = run_round(start, rc, np.eye(1), StepSchedule(), 1, topo)
        assert row.h[0] == 0
        assert states[0].theta == 0.4
        assert states[0].lam == 1.5

    def test_order_independent(self, ieee14):
        topo = Topology.from_network(ieee14)
        W = metropolis_weights(ieee14)
        rng = np.random.default_rng(0)
        states = [AgentState(float(rng.uniform(0, 0.5)) if i in ieee14.generators else 0.0,
                             float(rng.normal()), float(rng.normal())) for i in range(14)]
        rc = sample_costs(CostStreamConfig(seed=1), 5, ieee14.generator_buses)
        a, _ = run_round(states, rc, W, StepSchedule(), 5, topo)
        b, _ = run_round(list(states), rc, W, StepSchedule(), 5, topo)
        assert a == b

    def test_locality(self, ieee14):
        """An agent's update ignores agents outside its neighbourhoods."""
        topo = Topology.from_network(ieee14)
        W = metropolis_weights(ieee14).entries
        rc = sample_costs(CostStreamConfig(seed=3), 2, ieee14.generator_buses)
        rng = np.random.default_rng(5)
        states = [AgentState(0.1 if i in ieee14.generators else 0.0, float(rng.normal()), float(rng.normal()))
                  for i in range(14)]
        base, _ = run_round(states, rc, W, StepSchedule(), 2, topo)
        nbrs = ieee14.neighbors()
        for i in range(14):
            two_hop = {i} | set(nbrs[i]) | {k for j in nbrs[i] for k in nbrs[j]}
            far = [k for k in range(14) if k not in two_hop]
            if not far:
                continue
            k = far[0]
            perturbed = list(states)
            perturbed[k] = AgentState(states[k].p_g, states[k].theta + 3.0, states[k].lam - 4.0)
            out, _ = run_round(perturbed, rc, W, StepSchedule(), 2, topo)
            assert out[i] == base[i]

    def test_dual_sum_conserved_without_local_terms(self, ieee14):
        """With alpha = beta = 0 only the mixing step moves the duals."""
        topo = Topology.from_network(ieee14)
        W = metropolis_weights(ieee14).entries
        rng = np.random.default_rng(11)
        states = [AgentState(0.0, float(rng.normal()), float(rng.normal())) for _ in range(14)]
        total = sum(s.lam for s in states)
        for _ in range(400):
            lam = [s.lam for s in states]
            lt = [consensus_step(W[i][W[i] > 0], [lam[j] for j in np.flatnonzero(W[i])]) for i in range(14)]
            nxt = []
            for i in range(14):
                nb = topo.coupling[i]
                new, _, _ = agent_update(
                    states[i], lt[i], [states[j].theta for j, _ in nb], [lt[j] for j, _ in nb], lt[i],
                    [b for _, b in nb], topo.loads[i], topo.caps[i], None, (0.0, 0.0, 0.1, 0.1),
                )
                nxt.append(new)
            states = nxt
            assert sum(s.lam for s in states) == pytest.approx(total, abs=1e-12)
        lam = np.array([s.lam for s in states])
        assert np.ptp(lam) < 1e-6

    def test_box_feasibility(self, ieee14):
        topo = Topology.from_network(ieee14)
        W = metropolis_weights(ieee14)
        cfg = CostStreamConfig(seed=9, horizon=200)
        states = initial_states(14)
        caps = ieee14.p_max()
        for t in range(1, 201):
            states, row = run_round(states, sample_costs(cfg, t, ieee14.generator_buses), W, StepSchedule(), t,
                                    topo, theta_bound=math.pi)
            p = np.array([s.p_g for s in states])
            assert np.all(p >= 0) and np.all(p <= caps)
            assert np.all(np.abs([s.theta for s in states]) <= math.pi)

    def test_rejects_bad_inputs(self, ieee14):
        topo = Topology.from_network(ieee14)
        W = metropolis_weights(ieee14)
        rc = sample_costs(CostStreamConfig(seed=0), 1, ieee14.generator_buses)
        with pytest.raises(ValueError):
            run_round(initial_states(13), rc, W, StepSchedule(), 1, topo)
        with pytest.raises(ValueError):
            run_round(initial_states(14), rc, W, StepSchedule(), 0, topo)
        with pytest.raises(ValueError):
            run_round(initial_states(14), rc, W, StepSchedule(), 1, topo, grad_variant="bogus")
        with pytest.raises(ValueError):
            run_round(initial_states(14), rc, np.eye(3), StepSchedule(), 1, topo)

    def test_raw_variant_first_round_matches(self, ieee14):
        topo = Topology.from_network(ieee14)
        W = metropolis_weights(ieee14)
        rc = sample_costs(CostStreamConfig(seed=42), 1, ieee14.generator_buses)
        a, _ = run_round(initial_states(14), rc, W, StepSchedule(), 1, topo, "tilde")
        b, _ = run_round(initial_states(14), rc, W, StepSchedule(), 1, topo, "raw")
        assert a == b  # all duals are zero at t=1


def test_agent_update_generator_free_bus():
    new, h, cost = agent_update(AgentState(), 0.0, [0.1], [0.0], 0.0, [10.0], 0.2, 0.0, None, (1, 1, 1, 1))
    assert new.p_g == 0 and cost == 0
    assert h == pytest.approx(-0.2 + 1.0)


def test_topology_conventions(ieee14):
    rec = Topology.from_network(ieee14, "reciprocal").matrix
    adm = Topology.from_network(ieee14, "admittance").matrix
    np.testing.assert_array_equal(rec, -adm)
    assert rec.max() > 0
    with pytest.raises(ValueError):
        Topology.from_network(ieee14, "other")
