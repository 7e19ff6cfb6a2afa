"""Canonical JSON forms for instances, plans, and histories.

Instance files: {"agents": [{"id", "u", "p"}, ...], "B", "G", "meta"?}.
Plan files: recursive {"pool": [ids], "neg": node|null, "pos": node|null},
with null for the empty plan.  History files: [{"pool": [ids],
"result": "neg"|"pos"}, ...].  Emission is deterministic (sorted keys),
so identical values always serialize to identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Optional, Sequence, Union

from .core import (Agent, DynamicPlan, History, Instance, Outcome, PlanNode,
                   make_pool)
from .errors import ParameterError

PathLike = Union[str, Path]


def instance_to_dict(instance: Instance) -> dict:
    doc: dict[str, Any] = {
        "agents": [{"id": a.id, "u": a.utility, "p": a.prior} for a in instance.agents],
        "B": instance.budget,
        "G": instance.pool_cap,
    }
    if instance.meta is not None:
        doc["meta"] = instance.meta
    return doc


def instance_from_dict(doc: dict) -> Instance:
    try:
        agents = tuple(Agent(id=int(a["id"]), utility=float(a["u"]), prior=float(a["p"]))
                       for a in doc["agents"])
        return Instance(agents=agents, budget=int(doc["B"]), pool_cap=int(doc["G"]),
                        meta=doc.get("meta"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParameterError(f"malformed instance document: {exc}") from exc


def plan_to_dict(plan: DynamicPlan) -> Optional[dict]:
    def emit(node: Optional[PlanNode]) -> Optional[dict]:
        if node is None:
            return None
        return {"pool": list(node.pool), "neg": emit(node.neg), "pos": emit(node.pos)}

    return emit(plan.root)


def plan_from_dict(doc: Optional[dict]) -> DynamicPlan:
    def parse(node: Optional[dict]) -> Optional[PlanNode]:
        if node is None:
            return None
        try:
            pool = make_pool(node["pool"])
            return PlanNode(pool=pool, neg=parse(node["neg"]), pos=parse(node["pos"]))
        except (KeyError, TypeError) as exc:
            raise ParameterError(f"malformed plan node: {exc}") from exc

    return DynamicPlan(root=parse(doc))


def history_to_list(history: Sequence) -> list:
    return [{"pool": list(pool), "result": Outcome(outcome).value}
            for pool, outcome in history]


def history_from_list(doc: Sequence) -> History:
    steps = []
    for entry in doc:
        try:
            steps.append((make_pool(entry["pool"]), Outcome(entry["result"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParameterError(f"malformed history entry: {exc}") from exc
    return tuple(steps)


def dumps_canonical(doc: Any) -> str:
    """Compact deterministic JSON, one line, for JSONL records and hashing."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _write(path: PathLike, doc: Any) -> None:
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _read(path: PathLike) -> Any:
    return json.loads(Path(path).read_text())


def save_instance(path: PathLike, instance: Instance) -> None:
    _write(path, instance_to_dict(instance))


def load_instance(path: PathLike) -> Instance:
    return instance_from_dict(_read(path))


def save_plan(path: PathLike, plan: DynamicPlan) -> None:
    _write(path, plan_to_dict(plan))


def load_plan(path: PathLike) -> DynamicPlan:
    return plan_from_dict(_read(path))


def save_history(path: PathLike, history: Sequence) -> None:
    _write(path, history_to_list(history))


def load_history(path: PathLike) -> History:
    return history_from_list(_read(path))
