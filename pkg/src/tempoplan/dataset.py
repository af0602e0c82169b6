"""Dataset ingestion: a strict JSON schema for segmented two-hand logs.

Schema: {"task": str, "demonstrations": [{"id": str, "left": [...], "right":
[...]}]} where each entry is {"verb", "object", "start", "end"} with times in
seconds. Ingestion rejects malformed files with per-field diagnostics;
repeated (verb, object) occurrences within one demonstration are rejected
because per-pair relation assessment needs each action to occur once.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Tuple

from .errors import DatasetFormatError
from .model import (Action, ActionSequence, Demonstration, TemporalPlan,
                    TimeEnrichedAction, validate_demonstration)


@dataclass(frozen=True)
class Dataset:
    task: str
    demonstrations: Tuple[Demonstration, ...]

    def __len__(self) -> int:
        return len(self.demonstrations)

    def actions(self) -> Tuple[Action, ...]:
        """All actions in the dataset, lexicographically ordered."""
        seen = set()
        for d in self.demonstrations:
            seen.update(d.actions())
        return tuple(sorted(seen))


def _parse_entry(obj, where: str, out: list):
    if not isinstance(obj, dict):
        out.append(f"{where}: expected an object")
        return None
    verb = obj.get("verb")
    obj_name = obj.get("object")
    start = obj.get("start")
    end = obj.get("end")
    ok = True
    if not isinstance(verb, str) or not verb:
        out.append(f"{where}.verb: expected a non-empty string")
        ok = False
    if not isinstance(obj_name, str) or not obj_name:
        out.append(f"{where}.object: expected a non-empty string")
        ok = False
    for name, v in (("start", start), ("end", end)):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            out.append(f"{where}.{name}: expected a number in seconds")
            ok = False
    if not ok:
        return None
    return TimeEnrichedAction(Action(verb, obj_name), float(start), float(end))


def _parse_sequence(arr, where: str, out: list) -> ActionSequence:
    if not isinstance(arr, list):
        out.append(f"{where}: expected an array")
        return ActionSequence(())
    items = []
    for i, entry in enumerate(arr):
        a = _parse_entry(entry, f"{where}[{i}]", out)
        if a is not None:
            items.append(a)
    return ActionSequence(items)


def parse_dataset(doc: dict) -> Dataset:
    out: list = []
    if not isinstance(doc, dict):
        raise DatasetFormatError(["top level: expected an object"])
    task = doc.get("task")
    if not isinstance(task, str):
        out.append("task: expected a string")
        task = ""
    demos_doc = doc.get("demonstrations")
    if not isinstance(demos_doc, list):
        out.append("demonstrations: expected an array")
        demos_doc = []
    demos = []
    ids = set()
    for i, dd in enumerate(demos_doc):
        where = f"demonstrations[{i}]"
        if not isinstance(dd, dict):
            out.append(f"{where}: expected an object")
            continue
        demo_id = dd.get("id", f"demo{i:03d}")
        if not isinstance(demo_id, str):
            out.append(f"{where}.id: expected a string")
            demo_id = f"demo{i:03d}"
        if demo_id in ids:
            out.append(f"{where}.id: duplicate id '{demo_id}'")
        ids.add(demo_id)
        demo = Demonstration(
            _parse_sequence(dd.get("left", []), f"{where}.left", out),
            _parse_sequence(dd.get("right", []), f"{where}.right", out),
            demo_id,
        )
        for v in validate_demonstration(demo):
            out.append(f"{where}: {v}")
        demos.append(demo)
    if out:
        raise DatasetFormatError(out)
    return Dataset(task, tuple(demos))


def load_dataset(path) -> Dataset:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise DatasetFormatError([f"line {e.lineno}, column {e.colno}: {e.msg}"])
    return parse_dataset(doc)


def _entry_dict(a: TimeEnrichedAction) -> dict:
    return {"verb": a.action.verb, "object": a.action.object,
            "start": a.start, "end": a.end}


def demonstration_to_dict(d: Demonstration) -> dict:
    return {"id": d.id,
            "left": [_entry_dict(a) for a in d.left],
            "right": [_entry_dict(a) for a in d.right]}


def dataset_to_dict(ds: Dataset) -> dict:
    return {"task": ds.task,
            "demonstrations": [demonstration_to_dict(d) for d in ds.demonstrations]}


def plan_to_dict(p: TemporalPlan) -> dict:
    d = demonstration_to_dict(p.as_demonstration())
    del d["id"]
    if p.grid is not None:
        d["grid"] = p.grid
    return d


def plan_from_dict(doc: dict) -> TemporalPlan:
    out: list = []
    left = _parse_sequence(doc.get("left", []), "left", out)
    right = _parse_sequence(doc.get("right", []), "right", out)
    if out:
        raise DatasetFormatError(out)
    return TemporalPlan(left, right, doc.get("grid"))
