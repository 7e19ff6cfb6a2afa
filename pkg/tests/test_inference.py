"""Posterior beliefs: history reduction, exact marginals, Gibbs sampling."""

import numpy as np
import pytest

from poolwise import (Agent, CapacityError, GibbsConfig, InconsistentHistoryError,
                      Instance, Outcome, apply_history, evidence_probability,
                      exact_posterior, generate_instance, gibbs_posterior)
from poolwise.inference import _sweep

import oracles

NEG, POS = Outcome.NEGATIVE, Outcome.POSITIVE


class TestApplyHistory:
    def test_empty_history_keeps_priors(self):
        inst = oracles.instance_mixed_priors()
        state = apply_history(inst, ())
        assert state.marginals == (0.5562, 1.0, 0.12)
        assert state.confirmed_healthy == frozenset()
        assert state.residual_positive_pools == ()

    def test_negative_pool_confirms_members(self):
        inst = oracles.instance_mixed_priors()
        state = apply_history(inst, (((0, 1), NEG),))
        assert state.confirmed_healthy == {0, 1}
        assert state.marginals[0] == 1.0 and state.marginals[1] == 1.0

    def test_certain_agents_reduce_positive_pools(self):
        # agent 1 has prior 1, so a positive (0,1) pins agent 0
        inst = oracles.instance_mixed_priors()
        state = apply_history(inst, (((0, 1), POS),))
        assert state.confirmed_infected == {0}
        assert state.marginals[0] == 0.0
        assert state.residual_positive_pools == ()

    def test_negative_pool_reduces_other_positives(self):
        inst = generate_instance(4, 3, 3, "uniform01", seed=5)
        state = apply_history(inst, (((0, 1, 2), POS), ((0, 1), NEG)))
        assert state.confirmed_infected == {2}
        assert state.confirmed_healthy == {0, 1}

    def test_known_infected_satisfies_pool(self):
        # once agent 2 is pinned infected, a positive pool containing it is explained
        inst = generate_instance(4, 3, 3, "uniform01", seed=5)
        state = apply_history(inst, (((0, 1, 2), POS), ((0, 1), NEG), ((2, 3), POS)))
        assert state.confirmed_infected == {2}
        assert state.marginals[3] == inst.agents[3].prior
        assert state.residual_positive_pools == ()

    def test_zero_prior_agents_marked_infected(self):
        inst = Instance(agents=(Agent(0, 1.0, 0.0), Agent(1, 1.0, 0.5)),
                        budget=1, pool_cap=2)
        state = apply_history(inst, ())
        assert state.confirmed_infected == {0}

    def test_contradictory_outcomes_raise(self):
        inst = oracles.instance_two_coins_one_sure()
        with pytest.raises(InconsistentHistoryError):
            apply_history(inst, (((0, 1), NEG), ((0, 1), POS)))

    def test_negative_pool_with_zero_prior_raises(self):
        inst = Instance(agents=(Agent(0, 1.0, 0.0), Agent(1, 1.0, 0.5)),
                        budget=1, pool_cap=2)
        with pytest.raises(InconsistentHistoryError):
            apply_history(inst, (((0, 1), NEG),))


class TestEvidenceProbability:
    def test_matches_enumeration_on_random_families(self):
        rng = np.random.default_rng(11)
        for _ in range(80):
            n = int(rng.integers(1, 7))
            priors = rng.uniform(size=n).tolist()
            pools = []
            for _ in range(int(rng.integers(0, 4))):
                size = int(rng.integers(1, n + 1))
                pools.append(tuple(sorted(rng.choice(n, size=size, replace=False).tolist())))
            forced = tuple(sorted(rng.choice(n, size=int(rng.integers(0, n + 1)),
                                             replace=False).tolist()))
            got = evidence_probability(priors, pools, forced)
            want = oracles.evidence_mass(priors, pools, forced)
            assert got == pytest.approx(want, abs=1e-10)

    def test_no_pools_no_forcing_is_one(self):
        assert evidence_probability([0.3, 0.7], []) == pytest.approx(1.0)


class TestExactPosterior:
    def test_two_coin_positive_pool_golden(self):
        # P(healthy | at least one of two fair coins infected) = 1/3
        inst = Instance(agents=(Agent(0, 1.0, 0.5), Agent(1, 1.0, 0.5)),
                        budget=1, pool_cap=2)
        state = exact_posterior(inst, (((0, 1), POS),))
        assert state.marginals[0] == pytest.approx(1 / 3, abs=1e-12)
        assert state.marginals[1] == pytest.approx(1 / 3, abs=1e-12)

    def test_mixed_instance_positive_pool(self):
        inst = oracles.instance_mixed_priors()
        state = exact_posterior(inst, (((0, 1), POS),))
        assert state.marginals == (0.0, 1.0, 0.12)

    def test_matches_enumeration_oracle(self):
        rng = np.random.default_rng(23)
        checked = 0
        for trial in range(150):
            n = int(rng.integers(2, 9))
            inst = generate_instance(n, 3, 3, "uniform01", seed=10_000 + trial)
            history, _ = oracles.random_consistent_history(rng, inst, max_tests=3)
            want = oracles.posterior_marginals(inst, history)
            assert want is not None  # consistent by construction
            got = exact_posterior(inst, history)
            for a, b in zip(got.marginals, want):
                assert a == pytest.approx(b, abs=1e-9)
            checked += 1
        assert checked == 150

    def test_no_residual_pools_returns_priors_exactly(self):
        inst = generate_instance(5, 2, 2, "uniform01", seed=9)
        state = exact_posterior(inst, (((0, 1), NEG),))
        for i in (2, 3, 4):
            assert state.marginals[i] == inst.agents[i].prior

    def test_capacity_cap(self):
        inst = generate_instance(8, 3, 4, "uniform01", seed=1)
        history = (((0, 1, 2, 3), POS), ((4, 5, 6, 7), POS))
        with pytest.raises(CapacityError):
            exact_posterior(inst, history, cap=5)

    def test_members_of_residual_pools_get_lower_marginals(self):
        rng = np.random.default_rng(31)
        for trial in range(40):
            inst = generate_instance(int(rng.integers(2, 8)), 3, 3, "uniform01",
                                     seed=20_000 + trial)
            history, _ = oracles.random_consistent_history(rng, inst, max_tests=2)
            state = exact_posterior(inst, history)
            for pool in state.residual_positive_pools:
                for i in pool:
                    assert state.marginals[i] <= inst.agents[i].prior + 1e-12


class TestGibbsSweepRule:
    def test_sole_infected_agent_is_forced(self):
        # pool (0,1) positive, agent 1 the only infected: the draw cannot
        # flip it healthy, because the pool would lose its last infected
        healthy = [1, 0]
        infected_count = [1]
        _sweep(healthy, [0.9, 0.9], {0: [0], 1: [0]}, [(0, 1)], infected_count,
               order=[1], draws=[0.0])  # draw below prior: wants healthy
        assert healthy == [1, 0] and infected_count == [1]

    def test_redundant_infected_agent_resamples(self):
        # both agents infected: either may flip, counts follow
        healthy = [0, 0]
        infected_count = [2]
        _sweep(healthy, [0.9, 0.9], {0: [0], 1: [0]}, [(0, 1)], infected_count,
               order=[1], draws=[0.0])
        assert healthy == [0, 1] and infected_count == [1]

    def test_draw_above_prior_stays_infected(self):
        healthy = [0, 0]
        infected_count = [2]
        _sweep(healthy, [0.9, 0.9], {0: [0], 1: [0]}, [(0, 1)], infected_count,
               order=[1], draws=[0.95])
        assert healthy == [0, 0] and infected_count == [2]


class TestGibbsPosterior:
    def test_deterministic_given_config(self):
        inst = generate_instance(6, 3, 3, "uniform01", seed=4)
        history = (((0, 1, 2), POS), ((3, 4), POS))
        a = gibbs_posterior(inst, history, GibbsConfig(seed=5))
        b = gibbs_posterior(inst, history, GibbsConfig(seed=5))
        assert a == b

    def test_seed_changes_estimate(self):
        inst = generate_instance(6, 3, 3, "uniform01", seed=4)
        history = (((0, 1, 2), POS),)
        a = gibbs_posterior(inst, history, GibbsConfig(seed=5))
        b = gibbs_posterior(inst, history, GibbsConfig(seed=6))
        assert a.marginals != b.marginals

    def test_no_residual_returns_priors(self):
        inst = generate_instance(5, 2, 2, "uniform01", seed=4)
        state = gibbs_posterior(inst, (((0, 1), NEG),))
        for i in (2, 3, 4):
            assert state.marginals[i] == inst.agents[i].prior
        assert state.sweeps == 0

    def test_close_to_exact_on_small_instances(self):
        rng = np.random.default_rng(47)
        for trial in range(6):
            inst = generate_instance(6, 3, 3, "uniform01", seed=30_000 + trial)
            history, _ = oracles.random_consistent_history(rng, inst, max_tests=3)
            exact = exact_posterior(inst, history)
            approx = gibbs_posterior(inst, history)
            err = max(abs(a - b) for a, b in zip(exact.marginals, approx.marginals))
            assert err <= 0.02, (trial, err)

    def test_reports_convergence(self):
        inst = Instance(agents=(Agent(0, 1.0, 0.5), Agent(1, 1.0, 0.5)),
                        budget=1, pool_cap=2)
        state = gibbs_posterior(inst, (((0, 1), POS),))
        assert state.converged is True
        assert 0 < state.sweeps <= GibbsConfig().max_iterations

    def test_iteration_cap_respected(self):
        inst = generate_instance(8, 3, 4, "uniform01", seed=8)
        history = (((0, 1, 2, 3), POS), ((4, 5, 6, 7), POS))
        config = GibbsConfig(burn_in=10, window=5, tolerance=1e-12, max_iterations=200)
        state = gibbs_posterior(inst, history, config)
        assert state.sweeps <= 200
        assert state.converged is False
