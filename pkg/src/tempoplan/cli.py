"""Command-line interface.

Commands mirror the pipeline stages: assess, infer, plan, eval, bench,
synth, render. All outputs are deterministic functions of (input files,
config, seed); files are written atomically and embed the configuration.
Exit codes: 0 ok, 2 validation error, 3 infeasible, 4 timeout.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from typing import Optional

from . import __version__
from .assessment import assess_all, assessment_report, canonical_pair
from .config import Config
from .dataset import (Dataset, dataset_to_dict, load_dataset, plan_from_dict,
                      plan_to_dict)
from .errors import (BenchTimeout, DatasetFormatError, EmptyDataset,
                     InfeasibleConstraints, InfeasibleRegion,
                     NoFeasibleAssignment, NoSymbolicSolution, SpecInfeasible,
                     TempoplanError)
from .evaluation import bench_assignments, incremental_eval
from .inference import (Binding, find_assignments, pre_assign,
                        segment_subtasks)
from .model import AllenRelation, RELATIONS
from .planner import plan_pipeline
from .render import render_svg
from .synth import builtin_spec, generate, load_spec

log = logging.getLogger("tempoplan")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_TIMEOUT = 4


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _load_config(args) -> Config:
    cfg = Config.load(args.config) if args.config else Config()
    return cfg.replaced(seed=args.seed, eps=getattr(args, "eps", None))


def cmd_assess(args) -> int:
    cfg = _load_config(args)
    dataset = load_dataset(args.dataset)
    table, models = assess_all(dataset, eps=cfg.eps, k_max=cfg.k_max, seed=cfg.seed)
    doc = assessment_report(dataset, table, models)
    doc["config"] = cfg.to_dict()
    _write_atomic(args.output, _dump_json(doc))
    log.info("assessed %d pairs over %d demonstrations",
             len(table.scores), len(dataset))
    return EXIT_OK


def cmd_infer(args) -> int:
    cfg = _load_config(args)
    dataset = load_dataset(args.dataset)
    table, _ = assess_all(dataset, eps=cfg.eps, k_max=cfg.k_max, seed=cfg.seed)
    partition = segment_subtasks(dataset, table, cfg.theta_pre)
    subtasks = []
    for i, group in enumerate(partition.groups):
        if args.subtask is not None and i != args.subtask:
            continue
        pre = pre_assign(table, group, cfg.theta_pre)
        ranked = find_assignments(group, table, pre=pre)
        shown = ranked if args.top is None else ranked[:args.top]
        subtasks.append({
            "index": i,
            "actions": [{"verb": a.verb, "object": a.object} for a in group],
            "pre_assigned": [_binding_dict(b) for b in pre],
            "n_assignments": len(ranked),
            "assignments": [
                {"score": t.score, "bindings": [_binding_dict(b) for b in t.bindings]}
                for t in shown
            ],
        })
    doc = {"task": dataset.task, "subtasks": subtasks, "config": cfg.to_dict()}
    _write_atomic(args.output, _dump_json(doc))
    return EXIT_OK


def _binding_dict(b: Binding) -> dict:
    return {"first": {"verb": b.pair[0].verb, "object": b.pair[0].object},
            "second": {"verb": b.pair[1].verb, "object": b.pair[1].object},
            "relation": b.relation.value, "score": b.score}


def cmd_plan(args) -> int:
    cfg = _load_config(args)
    dataset = load_dataset(args.dataset)
    result = plan_pipeline(
        dataset, rank=args.rank, eps=cfg.eps, k_max=cfg.k_max, seed=cfg.seed,
        theta=cfg.theta_pre, margin=cfg.margin, min_length=cfg.min_length,
        l_max=cfg.l_max, horizon_factor=cfg.horizon_factor, unit=cfg.unit,
        gap=cfg.gap)
    doc = plan_to_dict(result.plan)
    doc["provenance"] = {
        "assignment_rank": args.rank,
        "objective": result.objective_value,
        "stalled": result.stalled,
        "subtasks": result.provenance.get("subtasks", []),
        "pairs": [
            {
                "first": {"verb": p[0].verb, "object": p[0].object},
                "second": {"verb": p[1].verb, "object": p[1].object},
                "target": list(result.targets[p].as_array()),
                "achieved": list(result.achieved[p].as_array()),
                "residual": result.residuals[p],
            }
            for p in sorted(result.residuals)
        ],
    }
    doc["config"] = cfg.to_dict()
    _write_atomic(args.output, _dump_json(doc))
    if args.render:
        subtask_of = {}
        for i, names in enumerate(result.provenance.get("subtasks", [])):
            for a in result.plan.actions():
                if str(a) in names:
                    subtask_of[a] = i
        svg = render_svg(result.plan, px_per_second=cfg.px_per_second,
                         subtask_of=subtask_of, title=dataset.task)
        _write_atomic(args.render, svg)
    log.info("plan objective %.6f over %d pairs",
             result.objective_value, len(result.residuals))
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    dataset = load_dataset(args.dataset)
    report = incremental_eval(
        dataset, trials=args.trials, seed=cfg.seed, subtask_index=args.subtask,
        rank=args.rank, eps=cfg.eps, k_max=cfg.k_max, theta=cfg.theta_pre,
        margin=cfg.margin, min_length=cfg.min_length)
    doc = report.to_dict()
    doc["config"] = cfg.to_dict()
    _write_atomic(args.output + ".json", _dump_json(doc))
    _write_atomic(args.output + ".csv", report.to_csv())
    log.info("plan beats baseline in %.1f%% of cells", 100 * report.win_fraction())
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _load_config(args)
    with open(args.instance) as f:
        doc = json.load(f)
    base = os.path.dirname(os.path.abspath(args.instance))
    dataset = load_dataset(os.path.join(base, doc["dataset"]))
    table, _ = assess_all(dataset, eps=cfg.eps, k_max=cfg.k_max, seed=cfg.seed)
    partition = segment_subtasks(dataset, table, cfg.theta_pre)
    group = partition.groups[doc.get("subtask", 0)]
    pre = []
    for entry in doc.get("pre", []):
        from .model import Action
        a = Action(entry[0][0], entry[0][1])
        b = Action(entry[1][0], entry[1][1])
        r = AllenRelation(entry[2])
        pair = canonical_pair(a, b)
        if pair != (a, b):
            from .model import INVERSE
            r = INVERSE[r]
        pre.append(Binding(pair, r, table.score(pair[0], pair[1], r)))
    try:
        trace = bench_assignments(group, table, pre=pre,
                                  sample_interval=cfg.bench_sample_interval,
                                  time_limit=cfg.bench_time_limit)
    except BenchTimeout as e:
        _write_atomic(args.output, e.trace.to_csv())
        _write_atomic(args.output + ".config.json", _dump_json(cfg.to_dict()))
        log.error("benchmark timed out after %.1f s", e.trace.wall_time)
        return EXIT_TIMEOUT
    _write_atomic(args.output, trace.to_csv())
    _write_atomic(args.output + ".config.json", _dump_json(cfg.to_dict()))
    log.info("found %d assignments in %.2f s", trace.n_solutions, trace.wall_time)
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.spec.startswith("builtin:"):
        spec = builtin_spec(args.spec.split(":", 1)[1])
    else:
        spec = load_spec(args.spec)
    if args.seed is not None:
        from dataclasses import replace
        spec = replace(spec, seed=args.seed)
    dataset = generate(spec)
    _write_atomic(args.output, _dump_json(dataset_to_dict(dataset)))
    log.info("generated %d demonstrations for '%s'", len(dataset), dataset.task)
    return EXIT_OK


def cmd_render(args) -> int:
    cfg = _load_config(args)
    with open(args.input) as f:
        doc = json.load(f)
    if "demonstrations" in doc:
        dataset = load_dataset(args.input)
        if args.demo is not None:
            matches = [d for d in dataset.demonstrations if d.id == args.demo]
            if not matches:
                raise DatasetFormatError([f"no demonstration with id '{args.demo}'"])
            target = matches[0]
        else:
            target = dataset.demonstrations[0]
        svg = render_svg(target, px_per_second=cfg.px_per_second,
                         title=f"{dataset.task}: {target.id}")
    else:
        plan = plan_from_dict(doc)
        subtask_of = {}
        for i, names in enumerate(doc.get("provenance", {}).get("subtasks", [])):
            for a in plan.actions():
                if str(a) in names:
                    subtask_of[a] = i
        svg = render_svg(plan, px_per_second=cfg.px_per_second,
                         subtask_of=subtask_of)
    _write_atomic(args.output, svg)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tempoplan",
        description="Learn temporal task constraints from two-hand "
                    "demonstrations and derive fully timed plans.")
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--quiet", action="store_true")
    common.add_argument("--verbose", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("assess", parents=[common],
                       help="score pairwise relations and fit timing models")
    p.add_argument("dataset")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--eps", type=float, default=None)
    p.set_defaults(func=cmd_assess)

    p = sub.add_parser("infer", parents=[common],
                       help="enumerate contradiction-free task assignments")
    p.add_argument("dataset")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--subtask", type=int, default=None)
    p.add_argument("--top", type=int, default=None)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("plan", parents=[common],
                       help="produce a fully parametrized two-hand plan")
    p.add_argument("dataset")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--rank", type=int, default=0)
    p.add_argument("--render", default=None, help="also write an SVG Gantt chart")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("eval", parents=[common],
                       help="incremental-learning curves vs the baseline")
    p.add_argument("dataset")
    p.add_argument("-o", "--output", required=True,
                   help="output prefix; writes .json and .csv")
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--subtask", type=int, default=None)
    p.add_argument("--rank", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", parents=[common],
                       help="benchmark the assignment search")
    p.add_argument("instance", help="instance JSON: dataset, subtask, pre")
    p.add_argument("-o", "--output", required=True, help="trace CSV path")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", parents=[common],
                       help="generate a dataset from a ground-truth spec")
    p.add_argument("spec", help="spec JSON path or builtin:<name>")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("render", parents=[common],
                       help="render a plan or demonstration to SVG")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--demo", default=None, help="demonstration id to render")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING
    if getattr(args, "verbose", False):
        level = logging.DEBUG
    elif not getattr(args, "quiet", False):
        level = logging.INFO
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except DatasetFormatError as e:
        for v in e.violations:
            log.error("%s", v)
        return EXIT_VALIDATION
    except (EmptyDataset, ValueError) as e:
        log.error("%s", e)
        return EXIT_VALIDATION
    except (NoFeasibleAssignment, NoSymbolicSolution, InfeasibleConstraints,
            InfeasibleRegion, SpecInfeasible) as e:
        log.error("%s", e)
        return EXIT_INFEASIBLE
    except BenchTimeout as e:
        log.error("%s", e)
        return EXIT_TIMEOUT


if __name__ == "__main__":
    sys.exit(main())
