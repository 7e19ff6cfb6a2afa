"""Domain model: pools, plans, instances, realizations, serialization."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poolwise import (Agent, DynamicPlan, Instance, Outcome, ParameterError, PlanNode,
                      StructuralError, dumps_canonical, generate_instance,
                      history_from_list, history_to_list, instance_from_dict,
                      instance_to_dict, load_instance, load_plan, make_pool,
                      plan_depth, plan_from_dict, plan_pools, plan_to_dict,
                      realization_probability, realized_welfare, save_instance,
                      save_plan, static_plan, validate_plan)

import oracles


class TestPoolsAndAgents:
    def test_make_pool_sorts_members(self):
        assert make_pool([3, 1, 2]) == (1, 2, 3)

    def test_make_pool_rejects_empty(self):
        with pytest.raises(StructuralError):
            make_pool([])

    def test_make_pool_rejects_duplicates(self):
        with pytest.raises(StructuralError):
            make_pool([1, 1])

    def test_make_pool_rejects_out_of_range(self):
        with pytest.raises(StructuralError):
            make_pool([0, 5], n=3)
        with pytest.raises(StructuralError):
            make_pool([-1])

    def test_make_pool_enforces_cap(self):
        with pytest.raises(StructuralError):
            make_pool([0, 1, 2], pool_cap=2)

    def test_agent_validation(self):
        with pytest.raises(ParameterError):
            Agent(0, -1.0, 0.5)
        with pytest.raises(ParameterError):
            Agent(0, 1.0, 1.5)
        with pytest.raises(ParameterError):
            Agent(-1, 1.0, 0.5)

    def test_instance_requires_contiguous_ids(self):
        with pytest.raises(ParameterError):
            Instance(agents=(Agent(1, 1.0, 0.5),), budget=1, pool_cap=1)

    def test_instance_rejects_negative_budget(self):
        with pytest.raises(ParameterError):
            Instance(agents=(Agent(0, 1.0, 0.5),), budget=-1, pool_cap=1)

    def test_instance_budget_zero_is_legal(self):
        inst = Instance(agents=(Agent(0, 1.0, 0.5),), budget=0, pool_cap=1)
        assert inst.budget == 0


class TestPlans:
    def test_static_plan_depth_and_pools(self):
        plan = static_plan([(0, 1), (1, 2), (2,)])
        assert plan_depth(plan) == 3
        assert plan_pools(plan) == {(0, 1), (1, 2), (2,)}

    def test_static_plan_visits_all_pools_on_every_path(self):
        # outcome of earlier tests must not change which pools get run
        inst = oracles.instance_mixed_priors()
        plan = static_plan([(0, 1), (1, 2)])
        for states, _ in oracles.all_realizations(inst):
            confirmed = oracles.walk_confirmed(plan, states)
            direct = {i for pool in [(0, 1), (1, 2)]
                      if oracles.pool_negative(pool, states) for i in pool}
            assert confirmed == frozenset(direct)

    def test_empty_static_plan(self):
        assert static_plan([]).root is None
        assert plan_depth(DynamicPlan(root=None)) == 0

    def test_validate_plan_depth_cap(self):
        inst = oracles.instance_mixed_priors()  # budget 2
        with pytest.raises(StructuralError):
            validate_plan(inst, static_plan([(0,), (1,), (2,)]))

    def test_validate_plan_pool_bounds(self):
        inst = oracles.instance_mixed_priors()  # pool_cap 2
        with pytest.raises(StructuralError):
            validate_plan(inst, static_plan([(0, 1, 2)]))
        validate_plan(inst, static_plan([(0, 1), (2,)]))


class TestGenerateInstance:
    def test_deterministic(self):
        a = generate_instance(6, 3, 2, "uniform01", seed=7)
        b = generate_instance(6, 3, 2, "uniform01", seed=7)
        assert a == b

    def test_seed_changes_instance(self):
        a = generate_instance(6, 3, 2, "uniform01", seed=7)
        b = generate_instance(6, 3, 2, "uniform01", seed=8)
        assert a != b

    def test_ranges(self):
        inst = generate_instance(20, 3, 2, "uniform01", seed=1)
        assert all(0.0 <= a.prior <= 1.0 for a in inst.agents)
        assert all(0.0 <= a.utility <= 1.0 for a in inst.agents)

    def test_discrete_utilities(self):
        inst = generate_instance(50, 5, 5, (1.0, 2.0, 3.0), seed=2)
        assert set(a.utility for a in inst.agents) <= {1.0, 2.0, 3.0}

    def test_invalid_counts(self):
        with pytest.raises(ParameterError):
            generate_instance(0, 1, 1)
        with pytest.raises(ParameterError):
            generate_instance(1, 0, 1)
        with pytest.raises(ParameterError):
            generate_instance(1, 1, 1, utility_model=(-1.0,))


class TestRealizations:
    def test_probability_golden(self):
        inst = oracles.instance_mixed_priors()
        assert realization_probability(inst, (1, 1, 1)) == pytest.approx(0.066744, abs=1e-12)
        assert realization_probability(inst, (0, 1, 0)) == pytest.approx(0.3905440, abs=1e-12)

    def test_probability_rejects_bad_vector(self):
        inst = oracles.instance_mixed_priors()
        with pytest.raises(ParameterError):
            realization_probability(inst, (1, 1))
        with pytest.raises(ParameterError):
            realization_probability(inst, (1, 2, 1))

    @given(st.integers(0, 10**6), st.integers(1, 8))
    @settings(max_examples=60, deadline=None)
    def test_probabilities_sum_to_one(self, seed, n):
        inst = generate_instance(n, 2, 2, "uniform01", seed=seed)
        total = sum(realization_probability(inst, states)
                    for states, _ in oracles.all_realizations(inst))
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_realized_welfare_golden(self):
        inst = oracles.instance_mixed_priors()
        plan = static_plan([(0, 1), (1, 2)])
        # (0,1) negative banks agents 0 and 1; (1,2) positive banks nothing
        assert realized_welfare(inst, plan, (1, 1, 0)) == pytest.approx(0.30383, abs=1e-12)
        # a static plan still runs (1,2) after a positive first pool
        assert realized_welfare(inst, plan, (0, 1, 1)) == pytest.approx(0.74383, abs=1e-12)
        assert realized_welfare(inst, plan, (1, 1, 1)) == pytest.approx(0.87283, abs=1e-12)

    def test_realized_welfare_counts_each_agent_once(self):
        inst = oracles.instance_two_coins_one_sure()
        plan = static_plan([(0, 1), (0, 1)])
        assert realized_welfare(inst, plan, (1, 1, 1)) == 2.0

    def test_realized_welfare_rejects_overlong_path(self):
        inst = oracles.instance_mixed_priors()  # budget 2
        plan = static_plan([(0,), (1,), (2,)])
        with pytest.raises(StructuralError):
            realized_welfare(inst, plan, (1, 1, 1))

    @given(st.integers(0, 10**6))
    @settings(max_examples=60, deadline=None)
    def test_realized_welfare_matches_independent_walk(self, seed):
        rng = np.random.default_rng(seed)
        inst = generate_instance(int(rng.integers(1, 7)), int(rng.integers(1, 4)),
                                 int(rng.integers(1, 4)), "uniform01", seed=seed)
        plan = oracles.random_plan(rng, inst)
        for states, _ in oracles.all_realizations(inst):
            confirmed = oracles.walk_confirmed(plan, states)
            expected = sum(inst.agents[i].utility for i in confirmed)
            assert realized_welfare(inst, plan, states) == pytest.approx(expected, abs=1e-12)
            assert realized_welfare(inst, plan, states) <= sum(a.utility for a in inst.agents) + 1e-12


class TestSerialization:
    def test_instance_round_trip(self):
        inst = Instance(agents=(Agent(0, 0.5, 0.25), Agent(1, 2.0, 1.0)),
                        budget=2, pool_cap=2, meta={"label": "x"})
        doc = instance_to_dict(inst)
        assert doc["B"] == 2 and doc["G"] == 2 and doc["meta"] == {"label": "x"}
        assert instance_from_dict(doc) == inst

    def test_plan_round_trip(self):
        plan = DynamicPlan(root=PlanNode(pool=(0, 1),
                                         neg=PlanNode(pool=(2,)),
                                         pos=PlanNode(pool=(1,))))
        assert plan_from_dict(plan_to_dict(plan)) == plan

    def test_empty_plan_round_trip(self):
        assert plan_to_dict(DynamicPlan(root=None)) is None
        assert plan_from_dict(None) == DynamicPlan(root=None)

    def test_history_round_trip(self):
        history = (((0, 1), Outcome.POSITIVE), ((2,), Outcome.NEGATIVE))
        doc = history_to_list(history)
        assert doc == [{"pool": [0, 1], "result": "pos"}, {"pool": [2], "result": "neg"}]
        assert history_from_list(doc) == history

    def test_malformed_documents_raise(self):
        with pytest.raises(ParameterError):
            instance_from_dict({"agents": [{"id": 0}], "B": 1, "G": 1})
        with pytest.raises(ParameterError):
            plan_from_dict({"pool": [0]})  # missing children
        with pytest.raises(ParameterError):
            history_from_list([{"pool": [0], "result": "maybe"}])

    def test_file_round_trip(self, tmp_path):
        inst = generate_instance(4, 2, 2, "uniform01", seed=3)
        save_instance(tmp_path / "inst.json", inst)
        assert load_instance(tmp_path / "inst.json") == inst
        plan = static_plan([(0, 1), (2, 3)])
        save_plan(tmp_path / "plan.json", plan)
        assert load_plan(tmp_path / "plan.json") == plan

    def test_canonical_dumps_is_stable(self):
        doc = {"b": 1, "a": [1, 2], "c": {"y": 0.5, "x": None}}
        assert dumps_canonical(doc) == dumps_canonical(json.loads(dumps_canonical(doc)))
        assert dumps_canonical(doc) == '{"a":[1,2],"b":1,"c":{"x":null,"y":0.5}}'

    @given(st.integers(0, 10**6))
    @settings(max_examples=40, deadline=None)
    def test_random_plan_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        inst = generate_instance(int(rng.integers(1, 7)), int(rng.integers(1, 5)),
                                 int(rng.integers(1, 4)), "uniform01", seed=seed)
        plan = oracles.random_plan(rng, inst)
        assert plan_from_dict(json.loads(json.dumps(plan_to_dict(plan)))) == plan
