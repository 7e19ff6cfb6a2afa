"""Posterior inference over agent health given pooled-test outcomes.

Observed history is first reduced to its informative core: members of
negative pools are confirmed healthy and removed from every positive pool,
and a positive pool left with a single candidate forces that agent to be
infected.  What remains is a set of residual positive pools over unresolved
agents, each of which must contain at least one infected member.

`exact_posterior` conditions on that event exactly (inclusion-exclusion
over the residual pools); `gibbs_posterior` estimates the same marginals by
Gibbs sampling for instances where exact conditioning is too large.  Both
agree that agents outside all residual pools keep their prior (or confirmed
value).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import History, Instance, Outcome, Pool
from .errors import CapacityError, InconsistentHistoryError, ParameterError
from .rng import make_rng
from .serialize import dumps_canonical, history_to_list


@dataclass(frozen=True)
class BeliefState:
    """Posterior summary: per-agent healthy marginals plus hard facts.

    confirmed_healthy holds only agents confirmed through a negative pool
    (the ones whose utility is banked); an agent with prior 1 has marginal
    1 but stays outside the set until a negative pool contains it.
    confirmed_infected holds agents known infected, whether from a zero
    prior or forced as the sole candidate of a positive pool.
    """

    marginals: tuple[float, ...]
    confirmed_healthy: frozenset[int]
    confirmed_infected: frozenset[int]
    residual_positive_pools: tuple[Pool, ...]
    converged: Optional[bool] = None
    sweeps: int = 0

    def unresolved(self) -> set[int]:
        return {agent for pool in self.residual_positive_pools for agent in pool}


@dataclass(frozen=True)
class GibbsConfig:
    burn_in: int = 1000
    window: int = 500
    tolerance: float = 1e-3
    max_iterations: int = 100000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.burn_in < 0 or self.window < 1:
            raise ParameterError("burn_in must be >= 0 and window >= 1")
        if not self.tolerance > 0:
            raise ParameterError("tolerance must be positive")
        if self.max_iterations < self.burn_in + self.window:
            raise ParameterError("max_iterations must be >= burn_in + window")


def apply_history(instance: Instance, history: History) -> BeliefState:
    """Structural reduction of a history; marginals are priors/confirmed only.

    Members of negative pools become confirmed healthy; positive pools are
    reduced by every agent known healthy (negative-pool members and prior-1
    agents); a residual pool containing a known-infected agent is already
    explained and dropped; a residual pool reduced to one agent forces that
    agent infected, and the reduction reruns to a fixed point.
    """
    priors = [agent.prior for agent in instance.agents]
    confirmed_healthy: set[int] = set()
    positive_pools: list[Pool] = []
    for pool, outcome in history:
        if Outcome(outcome) is Outcome.NEGATIVE:
            confirmed_healthy.update(pool)
        else:
            positive_pools.append(tuple(pool))

    known_infected = {i for i, p in enumerate(priors) if p == 0.0}
    if confirmed_healthy & known_infected:
        raise InconsistentHistoryError(
            "negative pool contains an agent with prior 0")
    known_healthy = confirmed_healthy | {i for i, p in enumerate(priors) if p == 1.0}

    residual: list[frozenset[int]] = [frozenset(p) for p in positive_pools]
    while True:
        next_residual: list[frozenset[int]] = []
        forced: set[int] = set()
        for pool in residual:
            reduced = pool - known_healthy
            if reduced & known_infected:
                continue  # already explained by a known infection
            if not reduced:
                raise InconsistentHistoryError(
                    f"positive pool {tuple(sorted(pool))} has all members confirmed healthy")
            if len(reduced) == 1:
                forced.update(reduced)
                continue
            next_residual.append(reduced)
        if not forced:
            residual = next_residual
            break
        known_infected |= forced
        residual = next_residual

    pools = tuple(sorted({tuple(sorted(pool)) for pool in residual}))
    marginals = list(priors)
    for i in confirmed_healthy:
        marginals[i] = 1.0
    for i in known_infected:
        marginals[i] = 0.0
    return BeliefState(marginals=tuple(marginals),
                       confirmed_healthy=frozenset(confirmed_healthy),
                       confirmed_infected=frozenset(known_infected),
                       residual_positive_pools=pools)


def evidence_probability(priors: Sequence[float], pools: Iterable[Iterable[int]],
                         forced_healthy: Iterable[int] = ()) -> float:
    """P(every pool has >= 1 infected member and all forced agents healthy).

    Agents not mentioned are marginalized out.  Inclusion-exclusion over
    pool subsets: P(all positive) = sum over S of (-1)^|S| prod of priors
    in union(S).
    """
    forced = set(forced_healthy)
    factor = math.prod(priors[i] for i in forced)
    if factor == 0.0:
        return 0.0
    reduced: set[frozenset[int]] = set()
    for pool in pools:
        rest = frozenset(pool) - forced
        if not rest:
            return 0.0
        reduced.add(rest)
    pool_list = list(reduced)
    total = 0.0
    for subset in range(1 << len(pool_list)):
        union: set[int] = set()
        bits = 0
        for k, pool in enumerate(pool_list):
            if subset >> k & 1:
                union |= pool
                bits += 1
        term = math.prod(priors[i] for i in union)
        total += -term if bits % 2 else term
    return factor * total


def exact_posterior(instance: Instance, history: History, cap: int = 20) -> BeliefState:
    """Exact posterior healthy marginals by conditioning on the residual pools."""
    state = apply_history(instance, history)
    unresolved = sorted(state.unresolved())
    if len(unresolved) > cap:
        raise CapacityError(
            f"{len(unresolved)} unresolved agents exceed the exact cap of {cap}; "
            "use gibbs_posterior")
    if not unresolved:
        return state
    priors = [agent.prior for agent in instance.agents]
    pools = state.residual_positive_pools
    denominator = evidence_probability(priors, pools)
    marginals = list(state.marginals)
    for i in unresolved:
        marginals[i] = evidence_probability(priors, pools, (i,)) / denominator
    return BeliefState(marginals=tuple(marginals),
                       confirmed_healthy=state.confirmed_healthy,
                       confirmed_infected=state.confirmed_infected,
                       residual_positive_pools=pools)


def _sweep(healthy: np.ndarray, priors: np.ndarray, agent_pools: list[list[int]],
           pool_members: list[list[int]], infected_count: np.ndarray,
           order: np.ndarray, draws: np.ndarray) -> None:
    """One randomized Gibbs sweep, in place.

    An agent is forced infected when some pool containing it has no other
    infected member; otherwise it is resampled from its prior.
    """
    for position, agent in enumerate(order):
        current_infected = 1 - healthy[agent]
        forced = any(infected_count[k] == current_infected for k in agent_pools[agent])
        new_state = 0 if forced else int(draws[position] < priors[agent])
        delta = healthy[agent] - new_state
        if delta:
            healthy[agent] = new_state
            for k in agent_pools[agent]:
                infected_count[k] += delta


def gibbs_posterior(instance: Instance, history: History,
                    config: Optional[GibbsConfig] = None) -> BeliefState:
    """Estimated posterior marginals for the unresolved agents via Gibbs sampling.

    Runs randomized full sweeps over the unresolved agents; after burn-in,
    healthy frequencies accumulate and the chain stops once every running
    mean moved at most `tolerance` across the rolling window (converged) or
    at `max_iterations` total sweeps (reported, not raised).
    """
    config = config or GibbsConfig()
    state = apply_history(instance, history)
    unresolved = sorted(state.unresolved())
    if not unresolved:
        return BeliefState(marginals=state.marginals,
                           confirmed_healthy=state.confirmed_healthy,
                           confirmed_infected=state.confirmed_infected,
                           residual_positive_pools=state.residual_positive_pools,
                           converged=True, sweeps=0)

    rng = make_rng("gibbs", config.seed,
                   dumps_canonical(history_to_list(history)))
    local = {agent: k for k, agent in enumerate(unresolved)}
    j = len(unresolved)
    priors = np.array([instance.agents[a].prior for a in unresolved])
    pool_members = [[local[a] for a in pool] for pool in state.residual_positive_pools]
    agent_pools: list[list[int]] = [[] for _ in range(j)]
    for k, members in enumerate(pool_members):
        for m in members:
            agent_pools[m].append(k)

    # initial state from priors, repaired to consistency if rejection fails
    healthy = np.empty(j, dtype=np.int64)
    for attempt in range(100):
        healthy[:] = rng.random(j) < priors
        if all(any(not healthy[m] for m in members) for members in pool_members):
            break
    else:
        for members in pool_members:
            if all(healthy[m] for m in members):
                healthy[int(rng.choice(members))] = 0
    infected_count = np.array([sum(1 - healthy[m] for m in members)
                               for members in pool_members], dtype=np.int64)

    counts = np.zeros(j)
    past_counts: deque[tuple[int, np.ndarray]] = deque(maxlen=config.window + 1)
    converged = False
    stable = 0
    sweeps = 0
    while sweeps < config.max_iterations:
        sweeps += 1
        _sweep(healthy, priors, agent_pools, pool_members, infected_count,
               rng.permutation(j), rng.random(j))
        assert all(infected_count[k] >= 1 for k in range(len(pool_members)))
        if sweeps <= config.burn_in:
            continue
        counts += healthy
        t = sweeps - config.burn_in
        past_counts.append((t, counts.copy()))
        if len(past_counts) == config.window + 1:
            t_old, old = past_counts[0]
            drift = np.max(np.abs(counts / t - old / t_old))
            # a single sub-tolerance dip can be luck; require the drift to
            # stay under tolerance for a full window of sweeps
            stable = stable + 1 if drift <= config.tolerance else 0
            if stable >= config.window:
                converged = True
                break

    samples = max(sweeps - config.burn_in, 1)
    marginals = list(state.marginals)
    for agent, k in local.items():
        marginals[agent] = float(counts[k] / samples)
    return BeliefState(marginals=tuple(marginals),
                       confirmed_healthy=state.confirmed_healthy,
                       confirmed_infected=state.confirmed_infected,
                       residual_positive_pools=state.residual_positive_pools,
                       converged=converged, sweeps=sweeps)
