"""Domain model for budget-constrained welfare-maximizing pooled testing.

An instance is a roster of agents, each carrying a utility u_i (welfare
obtained if the agent is confirmed healthy) and a prior probability p_i of
being healthy, together with a testing budget B and a pool-size cap G.  A
pooled test of a subset of agents returns negative iff every member is
healthy.  The welfare of a testing plan is the expected sum of utilities of
agents that appear in at least one negative pool, counting each agent once.

Plans are binary decision trees: each node tests a pool and branches on the
observed outcome.  Static plans (all pools fixed up front) are the
degenerate trees whose pool at a given depth is the same on every path;
`static_plan` builds them with shared subtrees so they stay linear in B
in memory (serialization expands the sharing).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import ParameterError, StructuralError
from .rng import make_rng

Pool = tuple[int, ...]
HealthVector = tuple[int, ...]


class Outcome(str, enum.Enum):
    NEGATIVE = "neg"
    POSITIVE = "pos"


HistoryStep = tuple[Pool, Outcome]
History = tuple[HistoryStep, ...]


@dataclass(frozen=True)
class Agent:
    id: int
    utility: float
    prior: float

    def __post_init__(self) -> None:
        if not isinstance(self.id, int) or self.id < 0:
            raise ParameterError(f"agent id must be a non-negative integer, got {self.id!r}")
        if not (math.isfinite(self.utility) and self.utility >= 0.0):
            raise ParameterError(f"agent {self.id}: utility must be finite and >= 0")
        if not (0.0 <= self.prior <= 1.0):
            raise ParameterError(f"agent {self.id}: prior must lie in [0, 1]")


@dataclass(frozen=True)
class Instance:
    agents: tuple[Agent, ...]
    budget: int
    pool_cap: int
    meta: Optional[dict] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "agents", tuple(self.agents))
        if not self.agents:
            raise ParameterError("instance must have at least one agent")
        for index, agent in enumerate(self.agents):
            if agent.id != index:
                raise ParameterError("agent ids must be distinct and contiguous from 0, in order")
        # budget 0 is legal so degenerate planning questions have an answer;
        # generate_instance enforces budget >= 1 for actual problems.
        if not isinstance(self.budget, int) or self.budget < 0:
            raise ParameterError(f"budget must be a non-negative integer, got {self.budget!r}")
        if not isinstance(self.pool_cap, int) or self.pool_cap < 1:
            raise ParameterError(f"pool_cap must be a positive integer, got {self.pool_cap!r}")

    @property
    def n(self) -> int:
        return len(self.agents)

    def utilities(self) -> np.ndarray:
        return np.array([agent.utility for agent in self.agents], dtype=float)

    def priors(self) -> np.ndarray:
        return np.array([agent.prior for agent in self.agents], dtype=float)


def make_pool(members: Iterable[int], *, n: Optional[int] = None,
              pool_cap: Optional[int] = None) -> Pool:
    """Canonical (sorted) pool, validated against the owning instance's bounds."""
    pool = tuple(sorted(int(m) for m in members))
    if not pool:
        raise StructuralError("pool must be nonempty")
    if len(set(pool)) != len(pool):
        raise StructuralError(f"pool has duplicate members: {pool}")
    if pool[0] < 0 or (n is not None and pool[-1] >= n):
        raise StructuralError(f"pool members out of range: {pool}")
    if pool_cap is not None and len(pool) > pool_cap:
        raise StructuralError(f"pool of size {len(pool)} exceeds cap {pool_cap}")
    return pool


@dataclass(frozen=True)
class PlanNode:
    pool: Pool
    neg: Optional["PlanNode"] = None
    pos: Optional["PlanNode"] = None


@dataclass(frozen=True)
class DynamicPlan:
    root: Optional[PlanNode] = None


def static_plan(pools: Sequence[Iterable[int]]) -> DynamicPlan:
    """Outcome-independent plan testing the given pools in order."""
    node: Optional[PlanNode] = None
    for members in reversed([make_pool(p) for p in pools]):
        node = PlanNode(pool=members, neg=node, pos=node)
    return DynamicPlan(root=node)


def plan_depth(plan: DynamicPlan) -> int:
    depths: dict[int, int] = {}

    def depth(node: Optional[PlanNode]) -> int:
        if node is None:
            return 0
        key = id(node)
        if key not in depths:
            depths[key] = 1 + max(depth(node.neg), depth(node.pos))
        return depths[key]

    return depth(plan.root)


def plan_pools(plan: DynamicPlan) -> set[Pool]:
    """Every pool appearing anywhere in the plan tree."""
    pools: set[Pool] = set()
    seen: set[int] = set()

    def walk(node: Optional[PlanNode]) -> None:
        if node is None or id(node) in seen:
            return
        seen.add(id(node))
        pools.add(node.pool)
        walk(node.neg)
        walk(node.pos)

    walk(plan.root)
    return pools


def validate_plan(instance: Instance, plan: DynamicPlan) -> None:
    """Structural check: every pool within bounds, tree depth <= budget."""
    if plan_depth(plan) > instance.budget:
        raise StructuralError("plan depth exceeds the testing budget")
    for pool in plan_pools(plan):
        make_pool(pool, n=instance.n, pool_cap=instance.pool_cap)


UtilityModel = Union[str, Sequence[float]]


def generate_instance(n: int, budget: int, pool_cap: int,
                      utility_model: UtilityModel = "uniform01",
                      seed: int = 0, meta: Optional[dict] = None) -> Instance:
    """Random instance: priors i.i.d. uniform on [0,1], utilities per model.

    `utility_model` is either "uniform01" or a sequence of values to draw
    from uniformly (e.g. (1, 2, 3)).  Identical inputs and seed produce a
    bit-identical instance.
    """
    if n < 1 or budget < 1 or pool_cap < 1:
        raise ParameterError("n, budget, and pool_cap must all be >= 1")
    rng = make_rng("instance", n, budget, pool_cap, seed)
    if utility_model == "uniform01":
        utilities = rng.uniform(size=n)
    else:
        values = tuple(float(v) for v in utility_model)
        if not values or any(not (math.isfinite(v) and v >= 0.0) for v in values):
            raise ParameterError(f"utility values must be finite and >= 0, got {utility_model!r}")
        utilities = rng.choice(values, size=n)
    priors = rng.uniform(size=n)
    agents = tuple(Agent(id=i, utility=float(utilities[i]), prior=float(priors[i]))
                   for i in range(n))
    return Instance(agents=agents, budget=budget, pool_cap=pool_cap, meta=meta)


def _check_health(instance: Instance, health: Sequence[int]) -> HealthVector:
    states = tuple(int(h) for h in health)
    if len(states) != instance.n:
        raise ParameterError(f"health vector length {len(states)} != {instance.n} agents")
    if any(h not in (0, 1) for h in states):
        raise ParameterError("health states must be 0 (infected) or 1 (healthy)")
    return states


def realization_probability(instance: Instance, health: Sequence[int]) -> float:
    """Prior mass of one joint health realization (1 = healthy)."""
    states = _check_health(instance, health)
    mass = 1.0
    for agent, state in zip(instance.agents, states):
        mass *= agent.prior if state else 1.0 - agent.prior
    return mass


def realized_welfare(instance: Instance, plan: DynamicPlan, health: Sequence[int]) -> float:
    """Welfare along the outcome path that `health` induces through the plan.

    Each test comes back negative iff all pool members are healthy; an
    agent's utility is counted once if any negative pool on the path
    contains it.
    """
    states = _check_health(instance, health)
    confirmed: set[int] = set()
    node = plan.root
    steps = 0
    while node is not None:
        steps += 1
        if steps > instance.budget:
            raise StructuralError("plan path longer than the testing budget")
        pool = make_pool(node.pool, n=instance.n, pool_cap=instance.pool_cap)
        if all(states[i] for i in pool):
            confirmed.update(pool)
            node = node.neg
        else:
            node = node.pos
    return float(sum(instance.agents[i].utility for i in confirmed))
