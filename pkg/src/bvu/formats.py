"""JSON instance/solution files (schemas ``bvu-1`` and ``bvu-sol-1``).

Floats are written with Python's shortest round-trip repr, so
``parse(emit(x)) == x`` bit for bit.  See docs/FORMATS.md.
"""

from __future__ import annotations

import json
from typing import Any

from bvu.model import BribeSolution, ElectionInstance, KuInstance, MkuInstance

INSTANCE_SCHEMA = "bvu-1"
SOLUTION_SCHEMA = "bvu-sol-1"
KU_SCHEMA = "bvu-ku-1"
MKU_SCHEMA = "bvu-mku-1"


class FormatError(ValueError):
    pass


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def loads(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed JSON: {exc}") from exc


def instance_to_dict(instance: ElectionInstance, metadata: dict | None = None) -> dict:
    out = {
        "schema_version": INSTANCE_SCHEMA,
        "m": instance.m,
        "groups": [[{"price": v.price, "prob": v.success_prob} for v in g] for g in instance.groups],
        "budget": instance.budget,
    }
    if metadata:
        out["metadata"] = metadata
    return out


def _number(obj: dict, key: str, where: str) -> float:
    val = obj.get(key)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise FormatError(f"{where}: '{key}' must be a number, got {val!r}")
    return float(val)


def instance_from_dict(data: Any) -> tuple[ElectionInstance, dict]:
    if not isinstance(data, dict):
        raise FormatError("instance file must hold a JSON object")
    if data.get("schema_version") != INSTANCE_SCHEMA:
        raise FormatError(f"expected schema_version {INSTANCE_SCHEMA!r}, got {data.get('schema_version')!r}")
    groups = data.get("groups")
    if not isinstance(groups, list) or not all(isinstance(g, list) for g in groups):
        raise FormatError("'groups' must be an array of arrays")
    if data.get("m") != len(groups):
        raise FormatError(f"'m'={data.get('m')!r} disagrees with {len(groups)} groups")
    pairs = []
    for j, group in enumerate(groups, start=1):
        row = []
        for i, voter in enumerate(group):
            if not isinstance(voter, dict):
                raise FormatError(f"group {j} voter {i}: expected object")
            row.append((_number(voter, "price", f"group {j} voter {i}"), _number(voter, "prob", f"group {j} voter {i}")))
        pairs.append(row)
    budget = _number(data, "budget", "instance")
    meta = data.get("metadata") or {}
    return ElectionInstance.from_groups(pairs, budget), meta


def solution_to_dict(solution: BribeSolution, method: str, epsilon: float | None = None,
                     runtime_ms: float | None = None) -> dict:
    out = {
        "schema_version": SOLUTION_SCHEMA,
        "chosen": list(solution.chosen),
        "cost": solution.cost,
        "win_prob": solution.win_prob,
        "method": method,
    }
    if method == "approx":
        out["epsilon"] = epsilon
    out["truncated"] = solution.truncated
    out["branch"] = solution.branch_tag
    out["runtime_ms"] = runtime_ms
    return out


def solution_from_dict(data: Any) -> tuple[BribeSolution, dict]:
    if not isinstance(data, dict):
        raise FormatError("solution file must hold a JSON object")
    if data.get("schema_version") != SOLUTION_SCHEMA:
        raise FormatError(f"expected schema_version {SOLUTION_SCHEMA!r}, got {data.get('schema_version')!r}")
    chosen = data.get("chosen")
    if not isinstance(chosen, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in chosen):
        raise FormatError("'chosen' must be an array of integer voter ids")
    if data.get("method") not in ("exact", "approx"):
        raise FormatError(f"unknown method {data.get('method')!r}")
    sol = BribeSolution(tuple(chosen), _number(data, "cost", "solution"), _number(data, "win_prob", "solution"),
                        str(data.get("branch", data["method"])), bool(data.get("truncated", False)))
    extra = {k: data.get(k) for k in ("method", "epsilon", "runtime_ms")}
    return sol, extra


def _item(it) -> dict:
    return {"id": it.id, "size": it.size, "prob": it.prob}


def ku_to_dict(ku: KuInstance, provenance: dict | None = None) -> dict:
    out = {"schema_version": KU_SCHEMA, "capacity": ku.capacity, "r": ku.r, "items": [_item(it) for it in ku.items]}
    if provenance:
        out["provenance"] = provenance
    return out


def mku_to_dict(mku: MkuInstance, provenance: dict | None = None) -> dict:
    out = {
        "schema_version": MKU_SCHEMA,
        "capacity": mku.capacity,
        "groups": [[_item(it) for it in g] for g in mku.groups],
        "quotas": list(mku.quotas),
        "j0": mku.j0,
        "k": mku.k,
    }
    if provenance:
        out["provenance"] = provenance
    return out
