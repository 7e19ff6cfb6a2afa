"""Batch experiment runner: identical instance sets, per-policy welfare, tables.

Every policy in an experiment is planned and evaluated on the same seeded
instance sequence (seed = base_seed + index), so per-instance comparisons
are paired.  Outputs are deterministic given the experiment spec: records serialize in
canonical JSON and summaries derive only from the records, so reruns are
byte-identical.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .core import DynamicPlan, Instance, generate_instance
from .errors import CapacityError, NothingToTestError, ParameterError
from .evaluation import EvalReport, MonteCarloConfig, Policy, evaluate_exact, evaluate_monte_carlo
from .inference import GibbsConfig
from .planning import (PolicyKind, exact_non_overlapping_plan, exact_overlapping_static_plan,
                       greedy_dynamic_plan, greedy_dynamic_step, greedy_non_overlapping_plan,
                       non_pooled_plan, optimal_dynamic_plan, static_local_search_plan)
from .serialize import dumps_canonical

logger = logging.getLogger(__name__)

UtilityModel = Union[str, tuple[float, ...]]


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    n: int
    budget: int
    pool_cap: int
    utility_model: UtilityModel = "uniform01"
    n_instances: int = 200
    policies: tuple[PolicyKind, ...] = ()
    eval_method: str = "exact"  # "exact" or "monte_carlo"
    base_seed: int = 0
    mc: MonteCarloConfig = MonteCarloConfig()
    gibbs: Optional[GibbsConfig] = None  # greedy online inference above the exact cap
    restarts: int = 8  # local-search restarts

    def __post_init__(self) -> None:
        if self.eval_method not in ("exact", "monte_carlo"):
            raise ParameterError("eval_method must be 'exact' or 'monte_carlo'")
        if self.n_instances < 0:
            raise ParameterError("n_instances must be >= 0")


@dataclass(frozen=True)
class SummaryRow:
    policy: PolicyKind
    mean_welfare: float
    std_error: float
    n: int
    wins_vs_baseline: int
    zero_welfare_count: int

    def to_dict(self) -> dict:
        return {
            "policy": self.policy.value,
            "mean_welfare": self.mean_welfare,
            "std_error": self.std_error,
            "n": self.n,
            "wins_vs_baseline": self.wins_vs_baseline,
            "zero_welfare_count": self.zero_welfare_count,
        }


def greedy_online_policy(instance: Instance, inference) -> Policy:
    """Greedy step as a stateless callback with a history-keyed cache, so
    repeated walks through the same history reuse one inference run."""
    cache: dict = {}

    def policy(history):
        if history not in cache:
            try:
                cache[history] = greedy_dynamic_step(instance, history, inference)
            except NothingToTestError:
                cache[history] = None
        return cache[history]

    return policy


def _plan_for(spec: ExperimentSpec, kind: PolicyKind, instance: Instance,
              seed: int) -> Union[DynamicPlan, Policy]:
    if kind is PolicyKind.NON_POOLED:
        return non_pooled_plan(instance)
    if kind is PolicyKind.GREEDY_NON_OVERLAPPING:
        return greedy_non_overlapping_plan(instance)
    if kind is PolicyKind.EXACT_NON_OVERLAPPING:
        return exact_non_overlapping_plan(instance)[0]
    if kind is PolicyKind.EXACT_OVERLAPPING_STATIC:
        return exact_overlapping_static_plan(instance)[0]
    if kind is PolicyKind.STATIC_LOCAL_SEARCH:
        return static_local_search_plan(instance, restarts=spec.restarts, seed=seed)
    if kind is PolicyKind.OPTIMAL_DYNAMIC:
        return optimal_dynamic_plan(instance)[0]
    if kind is PolicyKind.GREEDY_DYNAMIC:
        if spec.eval_method == "exact":
            return greedy_dynamic_plan(instance, inference="exact")
        inference = "exact" if instance.n <= 20 else (spec.gibbs or GibbsConfig())
        return greedy_online_policy(instance, inference)
    raise ParameterError(f"unknown policy kind {kind!r}")


def _evaluate(spec: ExperimentSpec, target: Union[DynamicPlan, Policy],
              instance: Instance, seed: int) -> EvalReport:
    if spec.eval_method == "exact":
        assert isinstance(target, DynamicPlan)
        return evaluate_exact(instance, target)
    return evaluate_monte_carlo(instance, target, dataclasses.replace(spec.mc, seed=seed))


def _run_instance(spec: ExperimentSpec, index: int) -> list[dict]:
    seed = spec.base_seed + index
    instance = generate_instance(spec.n, spec.budget, spec.pool_cap,
                                 spec.utility_model, seed=seed)
    records = []
    for kind in spec.policies:
        record = {"instance_index": index, "instance_seed": seed,
                  "policy": kind.value, "eval_method": spec.eval_method}
        try:
            target = _plan_for(spec, kind, instance, seed)
        except CapacityError as exc:
            record.update(status="skipped", reason=str(exc), expected_welfare=None,
                          covered_mass=None, n_realizations=None)
            records.append(record)
            continue
        report = _evaluate(spec, target, instance, seed)
        record.update(status="ok", reason=None,
                      expected_welfare=report.expected_welfare,
                      covered_mass=report.covered_mass,
                      n_realizations=report.n_realizations)
        records.append(record)
    return records


def summarize(spec: ExperimentSpec, records: Sequence[dict]) -> list[SummaryRow]:
    """Aggregate per-instance records; the first listed policy is the
    baseline for win counts.  Policies skipped everywhere emit no row."""
    by_policy: dict[str, dict[int, float]] = {k.value: {} for k in spec.policies}
    for rec in records:
        if rec["status"] == "ok":
            by_policy[rec["policy"]][rec["instance_index"]] = rec["expected_welfare"]
    baseline = by_policy[spec.policies[0].value] if spec.policies else {}
    rows = []
    for kind in spec.policies:
        welfare = by_policy[kind.value]
        if not welfare:
            logger.warning("policy %s skipped on every instance", kind.value)
            continue
        values = [welfare[i] for i in sorted(welfare)]
        n = len(values)
        mean = sum(values) / n
        var = sum((v - mean) ** 2 for v in values) / (n - 1) if n > 1 else 0.0
        wins = sum(1 for i, v in welfare.items()
                   if i in baseline and v > baseline[i])
        rows.append(SummaryRow(policy=kind, mean_welfare=mean,
                               std_error=math.sqrt(var / n) if n > 1 else 0.0,
                               n=n, wins_vs_baseline=wins,
                               zero_welfare_count=sum(1 for v in values if abs(v) < 1e-12)))
    return rows


def run_experiment(spec: ExperimentSpec, out_dir: Optional[Union[str, Path]] = None,
                   jobs: int = 1) -> tuple[list[dict], list[SummaryRow]]:
    """Run every policy on the seeded instance set; optionally write
    results.jsonl and summary.csv under out_dir."""
    indices = range(spec.n_instances)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_instance, [spec] * spec.n_instances, indices))
    else:
        chunks = [_run_instance(spec, i) for i in indices]
    records = [rec for chunk in chunks for rec in chunk]
    for rec in records:
        if rec["status"] == "skipped":
            logger.warning("instance %d: policy %s skipped: %s",
                           rec["instance_index"], rec["policy"], rec["reason"])
    summary = summarize(spec, records)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "results.jsonl", "w") as fh:
            for rec in records:
                fh.write(dumps_canonical(rec) + "\n")
        _write_summary_csv(out / "summary.csv", summary)
    return records, summary


def _write_summary_csv(path: Path, rows: Sequence[SummaryRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy", "mean_welfare", "std_error", "n",
                         "wins_vs_baseline", "zero_welfare_count"])
        for row in rows:
            writer.writerow([row.policy.value, repr(row.mean_welfare),
                             repr(row.std_error), row.n,
                             row.wins_vs_baseline, row.zero_welfare_count])


def budget_sweep(spec: ExperimentSpec, budgets: Sequence[int],
                 out_dir: Optional[Union[str, Path]] = None,
                 jobs: int = 1) -> list[dict]:
    """run_experiment per budget on freshly seeded instances; long-form rows."""
    if any(b < 1 for b in budgets):
        raise ParameterError("budgets must all be >= 1")
    rows = []
    for budget in budgets:
        sub = dataclasses.replace(spec, budget=budget, name=f"{spec.name}-B{budget}")
        _, summary = run_experiment(sub, out_dir=None, jobs=jobs)
        for srow in summary:
            rows.append({"budget": budget, "policy": srow.policy.value,
                         "mean_welfare": srow.mean_welfare,
                         "std_error": srow.std_error, "n": srow.n})
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["budget", "policy", "mean_welfare", "std_error", "n"])
            for row in rows:
                writer.writerow([row["budget"], row["policy"],
                                 repr(row["mean_welfare"]), repr(row["std_error"]),
                                 row["n"]])
    return rows


def load_experiment_spec(path: Union[str, Path]) -> ExperimentSpec:
    """Build an ExperimentSpec from a TOML or JSON config file."""
    import json
    path = Path(path)
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    else:
        with open(path) as fh:
            raw = json.load(fh)
    return spec_from_dict(raw)


def spec_from_dict(raw: dict) -> ExperimentSpec:
    try:
        utility_model = raw.get("utility_model", "uniform01")
        if isinstance(utility_model, list):
            utility_model = tuple(float(v) for v in utility_model)
        mc = MonteCarloConfig(**raw["mc"]) if "mc" in raw else MonteCarloConfig()
        gibbs = GibbsConfig(**raw["gibbs"]) if "gibbs" in raw else None
        return ExperimentSpec(
            name=raw.get("name", "experiment"),
            n=int(raw["n"]), budget=int(raw["budget"]), pool_cap=int(raw["pool_cap"]),
            utility_model=utility_model,
            n_instances=int(raw.get("n_instances", 200)),
            policies=tuple(PolicyKind(p) for p in raw.get("policies", [])),
            eval_method=raw.get("eval_method", "exact"),
            base_seed=int(raw.get("base_seed", 0)),
            mc=mc, gibbs=gibbs, restarts=int(raw.get("restarts", 8)))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError(f"bad experiment config: {exc}") from exc
