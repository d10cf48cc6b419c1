"""Command-line driver: ``araproto {synth,sim,sweep,report}``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Dict, List, Optional, Sequence

from . import __version__
from .crossbar import CrossbarTopology, buffer_demand, check_feasibility, cross_point_count, synthesize_crossbar
from .crossbar import ORACLE_LIMIT, check_feasibility_sampled
from .dse import format_summary, load_plan, read_sweep_csv, rows_to_csv, run_sweep, summarize, summary_json
from .errors import AraError
from .interleave import InterleaveMap, synthesize_interleave
from .sim.engine import run_simulation
from .sim.platform import PlatformModel
from .spec_model import expand_instances, load_spec
from .workload import builtin_kernels, load_kernel_config, parse_pattern, read_trace, synth_workload


def _parse_sets(items: Optional[Sequence[str]]) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise AraError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    spec = load_spec(args.spec)
    c = args.connectivity or spec.connectivity
    instances = expand_instances(spec)
    demand = buffer_demand(instances, c)
    topology = synthesize_crossbar(instances, spec.shared_buffers.count, c)
    interleave = synthesize_interleave(topology, spec.shared_buffers.num_dmacs, spec.strategy)
    if len(instances) <= ORACLE_LIMIT:
        feasibility = check_feasibility(topology, c)
        method = "exhaustive"
    else:
        feasibility = check_feasibility_sampled(topology, c, seed=args.seed)
        method = "sampled"
    doc = {
        "buffer_demand": demand,
        "cross_points": cross_point_count(topology),
        "feasible": feasibility.feasible,
        "feasibility_check": method,
        "topology": topology.to_dict(),
        "interleave": interleave.to_dict(),
    }
    if args.out:
        _write(args.out, _dump(doc))
    print(f"buffer demand: {demand} of {spec.shared_buffers.count} banks")
    print(f"cross points: {doc['cross_points']} ({topology.provenance})")
    print(f"feasible: {'yes' if feasibility.feasible else 'no'} ({method}, {feasibility.checked_subsets} subsets)")
    return 0 if feasibility.feasible else 1


def _load_topology(path: str):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return CrossbarTopology.from_dict(doc["topology"]), InterleaveMap.from_dict(doc["interleave"])


def cmd_sim(args) -> int:
    spec = load_spec(args.spec)
    kernels = load_kernel_config(args.kernels) if args.kernels else builtin_kernels()
    if args.trace:
        workload = read_trace(args.trace, kernels)
    else:
        workload = synth_workload(parse_pattern(args.pattern, args.seed), spec, kernels)
    if args.topology:
        topology, interleave = _load_topology(args.topology)
    else:
        topology = synthesize_crossbar(expand_instances(spec), spec.shared_buffers.count, spec.connectivity)
        interleave = synthesize_interleave(topology, spec.shared_buffers.num_dmacs, spec.strategy)
    platform = PlatformModel.from_spec(spec).with_overrides(_parse_sets(args.set))
    report = run_simulation(spec, topology, interleave, workload, platform)
    if args.out:
        root, _ = os.path.splitext(args.out)
        _write(root + ".json", report.to_json())
        _write(root + ".csv", report.to_csv())
    else:
        sys.stdout.write(report.to_json())
    return 0


def cmd_sweep(args) -> int:
    plan = load_plan(args.plan, seed=args.seed, overrides=_parse_sets(args.set))
    text = rows_to_csv(run_sweep(plan, jobs=args.jobs))
    out = args.out or plan.output
    if out:
        _write(out, text)
        print(f"{plan.size} run(s) written to {out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_report(args) -> int:
    with open(args.csv, encoding="utf-8") as fh:
        rows = read_sweep_csv(fh.read())
    summary = summarize(rows, args.scenario)
    sys.stdout.write(format_summary(summary))
    if args.out:
        _write(args.out, summary_json(summary))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="araproto", description="Accelerator-rich architecture design-space toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="synthesize the crossbar and interleaved network")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", help="write topology + interleave JSON here")
    s.add_argument("--connectivity", type=int, help="override the spec's connectivity")
    s.add_argument("--seed", type=int, default=0, help="seed for the sampled check on large systems")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("sim", help="run one simulation")
    s.add_argument("--spec", required=True)
    s.add_argument("--topology", help="JSON written by 'synth' (default: synthesize from the spec)")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--trace")
    src.add_argument("--pattern", help="single:<kernel> | all_parallel[:n] | poisson:<rate>:<n> | stream:<slices>[:<apps>]")
    s.add_argument("--kernels", help="kernel override JSON")
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="platform override (repeatable)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="report path; writes <out>.json and <out>.csv")
    s.set_defaults(func=cmd_sim)

    s = sub.add_parser("sweep", help="run a design-space sweep plan")
    s.add_argument("--plan", required=True)
    s.add_argument("--out", help="CSV path (default: the plan's output, else stdout)")
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="platform override (repeatable)")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--jobs", type=int, default=1, help="parallel simulations")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("report", help="summarize a sweep table")
    s.add_argument("csv")
    s.add_argument("--scenario", required=True,
                   choices=("buffers", "coherency", "connectivity", "interleave", "miss_mode", "reuse", "tlb"))
    s.add_argument("--out", help="write the summary as JSON here")
    s.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (AraError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        msg = str(exc) if not isinstance(exc, KeyError) else f"missing key {exc}"
        print(f"araproto {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
