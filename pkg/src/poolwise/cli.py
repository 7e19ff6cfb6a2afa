"""Command-line entry points: gen | plan | eval | bench | sweep | serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from .core import generate_instance
from .errors import PoolwiseError
from .evaluation import MonteCarloConfig, evaluate_exact, evaluate_monte_carlo
from .harness import budget_sweep, load_experiment_spec, run_experiment
from .inference import GibbsConfig
from .planning import (PolicyKind, exact_non_overlapping_plan, exact_overlapping_static_plan,
                       greedy_dynamic_plan, greedy_non_overlapping_plan, non_pooled_plan,
                       optimal_dynamic_plan, static_local_search_plan)
from .serialize import load_instance, load_plan, save_instance, save_plan


def _add_gibbs_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--gibbs-burn-in", type=int, default=None)
    parser.add_argument("--gibbs-window", type=int, default=None)
    parser.add_argument("--gibbs-tol", type=float, default=None)
    parser.add_argument("--gibbs-max-iters", type=int, default=None)


def _gibbs_config(args: argparse.Namespace, seed: int) -> GibbsConfig:
    base = GibbsConfig(seed=seed)
    overrides = {"burn_in": args.gibbs_burn_in, "window": args.gibbs_window,
                 "tolerance": args.gibbs_tol, "max_iterations": args.gibbs_max_iters}
    import dataclasses
    return dataclasses.replace(base, **{k: v for k, v in overrides.items() if v is not None})


def _cmd_gen(args: argparse.Namespace) -> int:
    model = args.utility_model
    if model != "uniform01":
        model = tuple(float(v) for v in model.split(","))
    instance = generate_instance(args.n, args.budget, args.pool_cap, model, seed=args.seed)
    if args.out:
        save_instance(args.out, instance)
    else:
        from .serialize import instance_to_dict
        json.dump(instance_to_dict(instance), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return 0


def _cmd_plan(args: argparse.Namespace) -> int:
    instance = load_instance(args.instance)
    kind = PolicyKind(args.policy)
    if args.inference == "gibbs":
        inference = _gibbs_config(args, args.seed)
    else:
        inference = args.inference
    if kind is PolicyKind.NON_POOLED:
        plan = non_pooled_plan(instance)
    elif kind is PolicyKind.GREEDY_NON_OVERLAPPING:
        plan = greedy_non_overlapping_plan(instance)
    elif kind is PolicyKind.EXACT_NON_OVERLAPPING:
        plan = exact_non_overlapping_plan(instance)[0]
    elif kind is PolicyKind.EXACT_OVERLAPPING_STATIC:
        plan = exact_overlapping_static_plan(instance)[0]
    elif kind is PolicyKind.STATIC_LOCAL_SEARCH:
        plan = static_local_search_plan(instance, restarts=args.restarts, seed=args.seed)
    elif kind is PolicyKind.GREEDY_DYNAMIC:
        plan = greedy_dynamic_plan(instance, inference=inference)
    elif kind is PolicyKind.OPTIMAL_DYNAMIC:
        plan = optimal_dynamic_plan(instance)[0]
    else:
        raise PoolwiseError(f"unhandled policy {kind}")
    save_plan(args.out, plan)
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    instance = load_instance(args.instance)
    plan = load_plan(args.plan)
    if args.method == "exact":
        report = evaluate_exact(instance, plan)
    else:
        config = MonteCarloConfig(mass_threshold=args.mass_threshold,
                                  max_samples=args.max_samples, seed=args.seed)
        report = evaluate_monte_carlo(instance, plan, config)
    payload = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(payload)
    else:
        sys.stdout.write(payload)
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    spec = load_experiment_spec(args.config)
    if args.seed is not None:
        import dataclasses
        spec = dataclasses.replace(spec, base_seed=args.seed)
    _, summary = run_experiment(spec, out_dir=args.out_dir, jobs=args.jobs)
    for row in summary:
        sys.stdout.write(f"{row.policy.value}\t{row.mean_welfare:.6f}\t"
                         f"{row.std_error:.6f}\t{row.n}\n")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    spec = load_experiment_spec(args.config)
    if args.seed is not None:
        import dataclasses
        spec = dataclasses.replace(spec, base_seed=args.seed)
    budgets = [int(b) for b in args.budgets.split(",")] if args.budgets else []
    rows = budget_sweep(spec, budgets, out_dir=args.out_dir, jobs=args.jobs)
    for row in rows:
        sys.stdout.write(f"B={row['budget']}\t{row['policy']}\t"
                         f"{row['mean_welfare']:.6f}\t{row['std_error']:.6f}\n")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn
    from .session import SessionStore, create_app
    store = SessionStore(journal_path=args.journal)
    app = create_app(store=store, frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poolwise",
                                     description="budget-constrained pooled-testing toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a random instance")
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--budget", type=int, required=True)
    p_gen.add_argument("--pool-cap", type=int, required=True)
    p_gen.add_argument("--utility-model", default="uniform01",
                       help="'uniform01' or comma-separated values, e.g. '1,2,3'")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", default=None)
    p_gen.set_defaults(func=_cmd_gen)

    p_plan = sub.add_parser("plan", help="materialize a plan for an instance")
    p_plan.add_argument("--policy", required=True,
                        choices=[k.value for k in PolicyKind])
    p_plan.add_argument("--instance", required=True)
    p_plan.add_argument("--out", required=True)
    p_plan.add_argument("--seed", type=int, default=0)
    p_plan.add_argument("--restarts", type=int, default=8)
    p_plan.add_argument("--inference", choices=["exact", "gibbs", "auto"], default="auto")
    _add_gibbs_flags(p_plan)
    p_plan.set_defaults(func=_cmd_plan)

    p_eval = sub.add_parser("eval", help="evaluate a plan on an instance")
    p_eval.add_argument("--instance", required=True)
    p_eval.add_argument("--plan", required=True)
    p_eval.add_argument("--method", choices=["exact", "mc"], default="exact")
    p_eval.add_argument("--mass-threshold", type=float, default=0.95)
    p_eval.add_argument("--max-samples", type=int, default=100000)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--out", default=None)
    p_eval.set_defaults(func=_cmd_eval)

    p_bench = sub.add_parser("bench", help="run a batch experiment from a config")
    p_bench.add_argument("--config", required=True, help="TOML or JSON experiment spec")
    p_bench.add_argument("--out-dir", default=None)
    p_bench.add_argument("--seed", type=int, default=None, help="override base_seed")
    p_bench.add_argument("--jobs", type=int, default=1)
    p_bench.set_defaults(func=_cmd_bench)

    p_sweep = sub.add_parser("sweep", help="budget sweep from a config")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--budgets", default="", help="comma-separated, e.g. '2,3,4'")
    p_sweep.add_argument("--out-dir", default=None)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_serve = sub.add_parser("serve", help="run the live session service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--journal", default=None, help="append-only session journal file")
    p_serve.add_argument("--frontend", default=None, help="static console directory to mount")
    p_serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PoolwiseError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
