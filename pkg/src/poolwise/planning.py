"""Test-assignment planners, from exact single-test search to optimal trees.

All planners share one tie-break rule so outputs are canonical: higher
objective value, then smaller pool, then lexicographically smallest member
tuple.  Value comparisons are exact float comparisons; the handcrafted
tie cases (equal products of dyadic priors) are exact in binary.

The dynamic planners confirm an agent's utility only through membership in
a negative pool, so an agent whose prior is 1 still has to be tested before
its utility counts; agents already counted or known infected are excluded
from every candidate pool.
"""

from __future__ import annotations

import enum
import itertools
import math
from typing import Optional, Sequence, Union

from .core import (DynamicPlan, History, Instance, Outcome, PlanNode, Pool,
                   static_plan)
from .errors import (CapacityError, InconsistentHistoryError, NothingToTestError,
                     ParameterError, StateError)
from .inference import BeliefState, GibbsConfig, exact_posterior, gibbs_posterior
from .rng import make_rng


class PolicyKind(str, enum.Enum):
    NON_POOLED = "non_pooled"
    GREEDY_NON_OVERLAPPING = "greedy_non_overlapping"
    EXACT_NON_OVERLAPPING = "exact_non_overlapping"
    EXACT_OVERLAPPING_STATIC = "exact_overlapping_static"
    STATIC_LOCAL_SEARCH = "static_local_search"
    GREEDY_DYNAMIC = "greedy_dynamic"
    OPTIMAL_DYNAMIC = "optimal_dynamic"


InferenceMode = Union[str, GibbsConfig]  # "exact", "auto", or a GibbsConfig


def _better(value: float, pool: Pool, best_value: float, best_pool: Optional[Pool]) -> bool:
    if best_pool is None or value != best_value:
        return best_pool is None or value > best_value
    if len(pool) != len(best_pool):
        return len(pool) < len(best_pool)
    return pool < best_pool


def _single_test_dfs(agents: Sequence[tuple[float, float]], cap: int) -> tuple[Pool, float]:
    k = len(agents)
    utilities = [u for u, _ in agents]
    marginals = [q for _, q in agents]
    # suffix tables for the pruning bound: top-m products of marginals and
    # top-m utility sums over agents[idx:]
    top_prod: list[list[float]] = []
    top_usum: list[list[float]] = []
    for idx in range(k + 1):
        qs = sorted(marginals[idx:], reverse=True)
        us = sorted(utilities[idx:], reverse=True)
        prods, sums = [1.0], [0.0]
        for m in range(min(cap, k - idx)):
            prods.append(prods[-1] * qs[m])
            sums.append(sums[-1] + us[m])
        top_prod.append(prods)
        top_usum.append(sums)

    best_pool: Optional[Pool] = None
    best_value = 0.0

    def upper_bound(idx: int, prod: float, usum: float, room: int) -> float:
        prods, sums = top_prod[idx], top_usum[idx]
        return max(prod * prods[m] * (usum + sums[m])
                   for m in range(1, min(room, len(prods) - 1) + 1))

    def extend(idx: int, members: tuple[int, ...], prod: float, usum: float) -> None:
        nonlocal best_pool, best_value
        if members:
            value = prod * usum
            if _better(value, members, best_value, best_pool):
                best_pool, best_value = members, value
        room = cap - len(members)
        if room == 0:
            return
        for nxt in range(idx, k):
            # bound is non-increasing in nxt (suffix shrinks); equal-bound
            # branches are kept so tie canonicality survives pruning
            if best_pool is not None and upper_bound(nxt, prod, usum, room) < best_value:
                break
            extend(nxt + 1, members + (nxt,),
                   prod * marginals[nxt], usum + utilities[nxt])

    extend(0, (), 1.0, 0.0)
    assert best_pool is not None
    return best_pool, best_value


def _single_test_dp(agents: Sequence[tuple[float, float]], cap: int) -> tuple[Pool, float]:
    """Exact search for integer utilities: one cell per (size, utility sum)."""
    cells: dict[tuple[int, int], tuple[float, Pool]] = {(0, 0): (1.0, ())}
    for i, (utility, marginal) in enumerate(agents):
        u = round(utility)
        for (size, usum), (prod, members) in sorted(cells.items()):
            if size == cap:
                continue
            key = (size + 1, usum + u)
            candidate = (prod * marginal, members + (i,))
            incumbent = cells.get(key)
            if (incumbent is None or candidate[0] > incumbent[0]
                    or (candidate[0] == incumbent[0] and candidate[1] < incumbent[1])):
                cells[key] = candidate
    best_pool: Optional[Pool] = None
    best_value = 0.0
    for (size, usum), (prod, members) in sorted(cells.items()):
        if size == 0:
            continue
        if _better(prod * usum, members, best_value, best_pool):
            best_pool, best_value = members, prod * usum
    assert best_pool is not None
    return best_pool, best_value


def best_single_test(agents: Sequence[tuple[float, float]], pool_cap: int) -> tuple[Pool, float]:
    """Pool maximizing (product of marginals) * (sum of utilities), |pool| <= cap.

    `agents` is a sequence of (utility, healthy marginal) pairs; the
    returned pool holds indices into that sequence.  Exact by search: a
    value-table pass when utilities are integers, pruned subset DFS
    otherwise; both apply the shared tie-break rule.
    """
    if not agents:
        raise ParameterError("best_single_test needs at least one agent")
    for utility, marginal in agents:
        if utility < 0 or not (0.0 <= marginal <= 1.0):
            raise ParameterError("utilities must be >= 0 and marginals in [0, 1]")
    cap = min(pool_cap, len(agents))
    if cap < 1:
        raise ParameterError("pool_cap must be >= 1")
    if all(u * q == 0.0 for u, q in agents):
        # every pool is worthless; canonical answer is the first singleton
        return (0,), 0.0
    integral = all(abs(u - round(u)) < 1e-9 for u, _ in agents)
    if integral and len(agents) > 12:
        return _single_test_dp(agents, cap)
    return _single_test_dfs(agents, cap)


def belief_for(instance: Instance, history: History,
                inference: InferenceMode) -> BeliefState:
    if isinstance(inference, GibbsConfig):
        return gibbs_posterior(instance, history, inference)
    if inference == "exact":
        return exact_posterior(instance, history)
    if inference == "auto":
        try:
            return exact_posterior(instance, history)
        except CapacityError:
            return gibbs_posterior(instance, history, GibbsConfig())
    raise ParameterError(f"unknown inference mode {inference!r}")


def greedy_candidates(instance: Instance, belief: BeliefState) -> list[int]:
    """Agents still worth testing: not yet counted by a negative pool and
    not known infected."""
    excluded = belief.confirmed_healthy | belief.confirmed_infected
    return [i for i in range(instance.n) if i not in excluded]


def greedy_step_with_value(instance: Instance, history: History,
                           inference: InferenceMode = "exact") -> tuple[Pool, float]:
    """Greedy next pool plus its immediate expected welfare gain."""
    if len(history) >= instance.budget:
        raise StateError("testing budget exhausted")
    belief = belief_for(instance, history, inference)
    candidates = greedy_candidates(instance, belief)
    if not candidates:
        raise NothingToTestError("every agent is already resolved")
    pairs = [(instance.agents[i].utility, belief.marginals[i]) for i in candidates]
    local_pool, value = best_single_test(pairs, instance.pool_cap)
    return tuple(candidates[i] for i in local_pool), value


def greedy_dynamic_step(instance: Instance, history: History,
                        inference: InferenceMode = "exact") -> Pool:
    """Next pool of the greedy policy: the single test maximizing immediate
    expected welfare under the current posterior marginals."""
    return greedy_step_with_value(instance, history, inference)[0]


def greedy_dynamic_plan(instance: Instance, inference: InferenceMode = "auto",
                        depth_cap: int = 12) -> DynamicPlan:
    """Full greedy policy tree, conditioning on both outcomes at every node."""
    if instance.budget > depth_cap:
        raise CapacityError(
            f"budget {instance.budget} exceeds the tree cap of {depth_cap}; "
            "use greedy_dynamic_step online")

    def build(history: History) -> Optional[PlanNode]:
        if len(history) >= instance.budget:
            return None
        try:
            pool = greedy_dynamic_step(instance, history, inference)
        except NothingToTestError:
            return None
        except InconsistentHistoryError:
            return None  # this branch has probability zero
        return PlanNode(pool=pool,
                        neg=build(history + ((pool, Outcome.NEGATIVE),)),
                        pos=build(history + ((pool, Outcome.POSITIVE),)))

    return DynamicPlan(root=build(()))


def _mask_tables(instance: Instance) -> tuple[list[float], list[float]]:
    """ph[mask] = product of priors over mask bits; usum[mask] = utility sum."""
    n = instance.n
    ph = [1.0] * (1 << n)
    usum = [0.0] * (1 << n)
    for mask in range(1, 1 << n):
        low = (mask & -mask).bit_length() - 1
        rest = mask & (mask - 1)
        ph[mask] = ph[rest] * instance.agents[low].prior
        usum[mask] = usum[rest] + instance.agents[low].utility
    return ph, usum


def _evidence_mask(ph: list[float], pools: Sequence[int], forced: int) -> float:
    """P(all pool masks contain an infected agent, all forced bits healthy)."""
    reduced = []
    for mask in pools:
        rest = mask & ~forced
        if rest == 0:
            return 0.0
        reduced.append(rest)
    reduced = sorted(set(reduced))
    total = 0.0
    for subset in range(1 << len(reduced)):
        union = 0
        for k, mask in enumerate(reduced):
            if subset >> k & 1:
                union |= mask
        total += -ph[union] if subset.bit_count() % 2 else ph[union]
    return ph[forced] * total


def _reduce_pools(pools: Sequence[int], healthy: int, infected: int) -> tuple[tuple[int, ...], int]:
    """Drop healthy members and explained pools; singletons force infections."""
    pending = list(pools)
    while True:
        kept: list[int] = []
        forced = 0
        for mask in pending:
            rest = mask & ~healthy
            if rest & infected:
                continue
            assert rest != 0, "contradictory pool should have probability zero"
            if rest.bit_count() == 1:
                forced |= rest
            else:
                kept.append(rest)
        if not forced:
            return tuple(sorted(set(kept))), infected
        infected |= forced
        pending = kept


def optimal_dynamic_plan(instance: Instance, max_n: int = 7,
                         max_budget: int = 4) -> tuple[DynamicPlan, float]:
    """Expectimax-optimal decision tree under exact posteriors.

    V(state, b) = max over pools t of P(neg)*(gain(t) + V(neg state, b-1))
    + P(pos)*V(pos state, b-1), where gain counts utilities of pool members
    not yet confirmed by an earlier negative pool on the path.  States are
    canonicalized to (counted, known infected, residual positive pools,
    budget) and memoized; branches of probability zero are skipped.
    """
    if instance.n > max_n or instance.budget > max_budget:
        raise CapacityError(
            f"optimal search capped at n <= {max_n}, budget <= {max_budget}")
    n = instance.n
    ph, usum = _mask_tables(instance)
    prior_one = sum(1 << i for i in range(n) if instance.agents[i].prior == 1.0)
    prior_zero = sum(1 << i for i in range(n) if instance.agents[i].prior == 0.0)
    pool_masks = [mask for mask in range(1, 1 << n)
                  if mask.bit_count() <= instance.pool_cap]
    memo: dict[tuple, tuple[float, Optional[PlanNode]]] = {}

    def solve(counted: int, infected: int, residual: tuple[int, ...],
              budget: int) -> tuple[float, Optional[PlanNode]]:
        if budget == 0:
            return 0.0, None
        key = (counted, infected, residual, budget)
        if key in memo:
            return memo[key]
        denominator = _evidence_mask(ph, residual, 0)
        known_healthy = counted | prior_one
        best_value, best_pool = 0.0, None
        best_children: tuple[Optional[PlanNode], Optional[PlanNode]] = (None, None)
        for mask in pool_masks:
            if mask & (counted | infected):
                continue
            p_neg = _evidence_mask(ph, residual, mask) / denominator
            value = 0.0
            children: list[Optional[PlanNode]] = [None, None]
            if p_neg > 0.0:
                neg_res, neg_inf = _reduce_pools(residual, known_healthy | mask, infected)
                v_neg, children[0] = solve(counted | mask, neg_inf, neg_res, budget - 1)
                value += p_neg * (usum[mask] + v_neg)
            if p_neg < 1.0:
                pos_res, pos_inf = _reduce_pools(residual + (mask & ~known_healthy,),
                                                 known_healthy, infected)
                v_pos, children[1] = solve(counted, pos_inf, pos_res, budget - 1)
                value += (1.0 - p_neg) * v_pos
            pool = tuple(i for i in range(n) if mask >> i & 1)
            if value > 0.0 and _better(value, pool, best_value, best_pool):
                best_value, best_pool = value, pool
                best_children = (children[0], children[1])
        node = None if best_pool is None else PlanNode(
            pool=best_pool, neg=best_children[0], pos=best_children[1])
        memo[key] = (best_value, node)
        return memo[key]

    value, root = solve(0, prior_zero, (), instance.budget)
    return DynamicPlan(root=root), value


def non_pooled_plan(instance: Instance) -> DynamicPlan:
    """Static plan testing the B agents of largest utility*prior individually."""
    ranked = sorted(range(instance.n),
                    key=lambda i: (-instance.agents[i].utility * instance.agents[i].prior, i))
    chosen = ranked[:min(instance.budget, instance.n)]
    return static_plan([(i,) for i in chosen])


def greedy_non_overlapping_plan(instance: Instance) -> DynamicPlan:
    """Disjoint pools chosen by repeated single-test maximization on priors."""
    remaining = list(range(instance.n))
    pools: list[Pool] = []
    for _ in range(instance.budget):
        if not remaining:
            break
        pairs = [(instance.agents[i].utility, instance.agents[i].prior)
                 for i in remaining]
        local_pool, value = best_single_test(pairs, instance.pool_cap)
        if value <= 0.0:
            break
        pool = tuple(remaining[k] for k in local_pool)
        pools.append(pool)
        remaining = [i for i in remaining if i not in pool]
    return static_plan(pools)


def _static_welfare(instance: Instance, pools: Sequence[Pool]) -> float:
    """Exact welfare of a static plan by inclusion-exclusion over pool subsets."""
    ph, usum = _mask_tables(instance)
    masks = [sum(1 << i for i in pool) for pool in pools]
    return _static_welfare_masks(ph, usum, masks)


def _static_welfare_masks(ph: list[float], usum: list[float],
                          masks: Sequence[int]) -> float:
    total = 0.0
    for subset in range(1, 1 << len(masks)):
        union, intersection, bits = 0, -1, 0
        for k, mask in enumerate(masks):
            if subset >> k & 1:
                union |= mask
                intersection &= mask
                bits += 1
        # agents in every pool of the subset contribute the subset's term
        term = ph[union] * usum[intersection & (len(ph) - 1)]
        total += -term if bits % 2 == 0 else term
    return total


def exact_non_overlapping_plan(instance: Instance,
                               max_n: int = 12) -> tuple[DynamicPlan, float]:
    """Exact best collection of <= B disjoint pools of size <= G.

    Disjoint pools are independent, so welfare is the closed form
    sum over pools of (utility sum) * (prior product); solved by a
    memoized search over agent subsets anchored at the lowest free agent.
    """
    if instance.n > max_n:
        raise CapacityError(
            f"exact partition search capped at n <= {max_n}; "
            "use static_local_search_plan")
    ph, usum = _mask_tables(instance)
    memo: dict[tuple[int, int], tuple[float, tuple[int, ...]]] = {}

    def solve(avail: int, budget: int) -> tuple[float, tuple[int, ...]]:
        if avail == 0 or budget == 0:
            return 0.0, ()
        key = (avail, budget)
        if key in memo:
            return memo[key]
        low = (avail & -avail).bit_length() - 1
        rest = avail & (avail - 1)
        best_value, best_pools = solve(rest, budget)  # lowest agent unpooled
        others = [i for i in range(low + 1, instance.n) if rest >> i & 1]
        for size in range(min(instance.pool_cap, len(others) + 1)):
            for combo in itertools.combinations(others, size):
                mask = (1 << low) + sum(1 << i for i in combo)
                value, pools = solve(avail & ~mask, budget - 1)
                value += ph[mask] * usum[mask]
                if value > best_value:
                    best_value, best_pools = value, (mask,) + pools
        memo[key] = (best_value, best_pools)
        return memo[key]

    value, masks = solve((1 << instance.n) - 1, instance.budget)
    pools = [tuple(i for i in range(instance.n) if mask >> i & 1) for mask in masks]
    return static_plan(pools), value


def exact_overlapping_static_plan(instance: Instance, max_n: int = 5,
                                  max_budget: int = 3) -> tuple[DynamicPlan, float]:
    """Exact best static plan allowing overlapping pools.

    Enumerates pool multisets of size B (the tuple space collapses under
    reordering and duplicates add nothing); each is scored by the exact
    static welfare closed form.
    """
    if instance.n > max_n or instance.budget > max_budget:
        raise CapacityError(
            f"overlapping static search capped at n <= {max_n}, budget <= {max_budget}")
    ph, usum = _mask_tables(instance)
    pool_masks = [mask for mask in range(1, 1 << instance.n)
                  if mask.bit_count() <= instance.pool_cap]
    best_value, best_masks = 0.0, ()
    for masks in itertools.combinations_with_replacement(pool_masks, instance.budget):
        value = _static_welfare_masks(ph, usum, masks)
        if value > best_value:
            best_value, best_masks = value, masks
    pools = [tuple(i for i in range(instance.n) if mask >> i & 1)
             for mask in sorted(set(best_masks))]
    return static_plan(pools), best_value


def _partition_welfare(instance: Instance, pools: Sequence[set[int]]) -> float:
    total = 0.0
    for pool in pools:
        if not pool:
            continue
        product = math.prod(instance.agents[i].prior for i in pool)
        total += product * sum(instance.agents[i].utility for i in pool)
    return total


def static_local_search_plan(instance: Instance, restarts: int = 8,
                             seed: int = 0) -> DynamicPlan:
    """Hill-climbing stand-in for an exact partition solver at large n.

    Runs `restarts` climbs (the first from the greedy non-overlapping
    start, the rest from random feasible partitions) over moves that swap,
    relocate, insert, or drop single agents while keeping pools disjoint
    and within budget and size caps; returns the best local optimum found.
    With restarts = 0 the greedy start is returned unchanged.
    """
    greedy = greedy_non_overlapping_plan(instance)
    node, greedy_pools = greedy.root, []
    while node is not None:
        greedy_pools.append(set(node.pool))
        node = node.neg
    if restarts <= 0:
        return greedy

    def pool_score(pool: set[int]) -> float:
        if not pool:
            return 0.0
        product = math.prod(instance.agents[i].prior for i in pool)
        return product * sum(instance.agents[i].utility for i in pool)

    def climb(pools: list[set[int]]) -> tuple[float, list[set[int]]]:
        # best-improvement steps; each candidate move is scored through the
        # one or two pools it touches
        while True:
            pools = [p for p in pools if p]
            if len(pools) < instance.budget:
                pools.append(set())  # room to open one more pool
            scores = [pool_score(p) for p in pools]
            pooled = {i for pool in pools for i in pool}
            unpooled = [i for i in range(instance.n) if i not in pooled]
            best_gain, best_move = 1e-12, None
            for a, pool_a in enumerate(pools):
                for agent in sorted(pool_a):
                    without = pool_a - {agent}
                    base = pool_score(without) - scores[a]
                    if base > best_gain:
                        best_gain, best_move = base, (a, {agent}, None, None)
                    for b, pool_b in enumerate(pools):
                        if b == a:
                            continue
                        if len(pool_b) < instance.pool_cap:
                            gain = base + pool_score(pool_b | {agent}) - scores[b]
                            if gain > best_gain:
                                best_gain, best_move = gain, (a, {agent}, b, {agent})
                        for other in sorted(pool_b):
                            gain = (pool_score(without | {other}) - scores[a]
                                    + pool_score(pool_b - {other} | {agent}) - scores[b])
                            if gain > best_gain:
                                best_gain, best_move = gain, (a, {agent, other}, b, {agent, other})
                    for other in unpooled:
                        gain = pool_score(without | {other}) - scores[a]
                        if gain > best_gain:
                            best_gain, best_move = gain, (a, {agent, other}, None, None)
                if len(pool_a) < instance.pool_cap:
                    for other in unpooled:
                        gain = pool_score(pool_a | {other}) - scores[a]
                        if gain > best_gain:
                            best_gain, best_move = gain, (a, {other}, None, None)
            if best_move is None:
                return sum(scores), [p for p in pools if p]
            a, flip_a, b, flip_b = best_move
            pools[a] ^= flip_a
            if b is not None:
                pools[b] ^= flip_b

    best_score, best_pools = climb([set(p) for p in greedy_pools])
    for restart in range(1, restarts):
        rng = make_rng("local-search", seed, restart)
        order = list(rng.permutation(instance.n))
        pools: list[set[int]] = []
        while order and len(pools) < instance.budget:
            size = int(rng.integers(1, instance.pool_cap + 1))
            pools.append({int(i) for i in order[:size]})
            order = order[size:]
        score, pools = climb(pools)
        if score > best_score:
            best_score, best_pools = score, pools
    return static_plan([tuple(sorted(pool)) for pool in best_pools])
