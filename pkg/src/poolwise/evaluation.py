"""Exact and Monte Carlo welfare evaluation of plans and online policies.

Exact evaluation enumerates every health realization and aggregates
realized welfare by the law of total expectation.  Monte Carlo evaluation
samples realizations from the priors but weights each *distinct* realization
by its exact probability mass, so the estimate depends only on which
realizations were covered, not on how often they were drawn; sampling stops
once the covered mass reaches the threshold or the sample budget runs out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .core import DynamicPlan, History, Instance, Outcome, PlanNode, Pool
from .errors import CapacityError, NothingToTestError, ParameterError
from .rng import make_rng

Policy = Callable[[History], Optional[Pool]]


@dataclass(frozen=True)
class EvalReport:
    expected_welfare: float
    per_agent_confirmation: tuple[float, ...]
    covered_mass: float
    n_realizations: int
    method: str  # "exact" or "monte_carlo"
    raw_expected_welfare: float

    def to_dict(self) -> dict:
        return {
            "expected_welfare": self.expected_welfare,
            "per_agent_confirmation": list(self.per_agent_confirmation),
            "covered_mass": self.covered_mass,
            "n_realizations": self.n_realizations,
            "method": self.method,
            "raw_expected_welfare": self.raw_expected_welfare,
        }


@dataclass(frozen=True)
class MonteCarloConfig:
    mass_threshold: float = 0.95
    max_samples: int = 100000
    seed: int = 0
    normalize_by_covered_mass: bool = True

    def __post_init__(self) -> None:
        if not (0.0 < self.mass_threshold <= 1.0):
            raise ParameterError("mass_threshold must lie in (0, 1]")
        if self.max_samples < 1:
            raise ParameterError("max_samples must be >= 1")


def evaluate_exact(instance: Instance, plan: DynamicPlan, cap_n: int = 20) -> EvalReport:
    """Exact expected welfare and per-agent confirmation probabilities."""
    n = instance.n
    if n > cap_n:
        raise CapacityError(f"exact evaluation enumerates 2^{n} realizations; "
                            f"cap is n <= {cap_n}")
    # masses[mask] = prior probability of the realization whose bit i is
    # agent i's health; healthy_bits[i] selects realizations with i healthy
    masses = np.array([1.0])
    for agent in instance.agents:
        masses = np.concatenate([masses * (1.0 - agent.prior), masses * agent.prior])
    index = np.arange(1 << n)
    healthy_bits = [(index >> i & 1).astype(bool) for i in range(n)]

    confirmation = np.zeros(n)

    def walk(node: Optional[PlanNode], active: np.ndarray, confirmed: frozenset[int]) -> None:
        if not active.any():
            return
        if node is None:
            if confirmed:
                mass = float(masses[active].sum())
                for i in confirmed:
                    confirmation[i] += mass
            return
        pool_negative = active.copy()
        for i in node.pool:
            pool_negative &= healthy_bits[i]
        walk(node.neg, pool_negative, confirmed | frozenset(node.pool))
        walk(node.pos, active & ~pool_negative, confirmed)

    walk(plan.root, np.ones(1 << n, dtype=bool), frozenset())
    welfare = float(confirmation @ instance.utilities())
    return EvalReport(expected_welfare=welfare,
                      per_agent_confirmation=tuple(float(c) for c in confirmation),
                      covered_mass=1.0,
                      n_realizations=1 << n,
                      method="exact",
                      raw_expected_welfare=welfare)


def _walk_plan(instance: Instance, plan: DynamicPlan, states: Sequence[int]) -> set[int]:
    confirmed: set[int] = set()
    node = plan.root
    while node is not None:
        if all(states[i] for i in node.pool):
            confirmed.update(node.pool)
            node = node.neg
        else:
            node = node.pos
    return confirmed


def _walk_policy(instance: Instance, policy: Policy, states: Sequence[int]) -> set[int]:
    confirmed: set[int] = set()
    history: History = ()
    for _ in range(instance.budget):
        try:
            pool = policy(history)
        except NothingToTestError:
            break
        if pool is None:
            break
        if all(states[i] for i in pool):
            confirmed.update(pool)
            history = history + ((pool, Outcome.NEGATIVE),)
        else:
            history = history + ((pool, Outcome.POSITIVE),)
    return confirmed


def evaluate_monte_carlo(instance: Instance, plan_or_policy: Union[DynamicPlan, Policy],
                         config: Optional[MonteCarloConfig] = None) -> EvalReport:
    """Mass-weighted welfare estimate over sampled distinct realizations.

    Accepts a materialized plan or an online policy callback mapping a
    history to the next pool (None or a nothing-to-test error stops that
    walk early).  The estimate is the exact-mass-weighted average over the
    distinct realizations drawn, divided by the covered mass when
    normalization is on.
    """
    config = config or MonteCarloConfig()
    n = instance.n
    priors = instance.priors()
    utilities = instance.utilities()
    rng = make_rng("mc-eval", config.seed)

    if isinstance(plan_or_policy, DynamicPlan):
        walk = lambda states: _walk_plan(instance, plan_or_policy, states)
    else:
        walk = lambda states: _walk_policy(instance, plan_or_policy, states)

    seen: set[tuple[int, ...]] = set()
    covered = 0.0
    raw_welfare = 0.0
    raw_confirmation = np.zeros(n)
    samples = 0
    while samples < config.max_samples and covered < config.mass_threshold:
        batch = min(4096, config.max_samples - samples)
        draws = rng.random((batch, n)) < priors
        for row in draws:
            samples += 1
            states = tuple(int(h) for h in row)
            if states not in seen:
                seen.add(states)
                mass = math.prod(p if h else 1.0 - p for p, h in zip(priors, states))
                covered += mass
                confirmed = walk(states)
                raw_welfare += mass * sum(utilities[i] for i in confirmed)
                for i in confirmed:
                    raw_confirmation[i] += mass
            if covered >= config.mass_threshold:
                break

    scale = 1.0 / covered if config.normalize_by_covered_mass and covered > 0 else 1.0
    return EvalReport(expected_welfare=raw_welfare * scale,
                      per_agent_confirmation=tuple(float(c * scale) for c in raw_confirmation),
                      covered_mass=covered,
                      n_realizations=len(seen),
                      method="monte_carlo",
                      raw_expected_welfare=raw_welfare)
