"""Design-space sweeps and scenario summaries.

A sweep plan is a JSON file::

    {
      "spec": "medical_imaging.xml",
      "workload": {"pattern": "stream:8"},      # or {"trace": "run.trace"}
      "kernels": "kernels.json",                # optional kernel overrides
      "axes": {"tlb_entries": [64, 256], "coherency": ["llc", "dram"]},
      "platform": {"dram_latency_cycles": 150}, # optional overrides
      "cap": 512,
      "seed": 0,
      "output": "sweep.csv"
    }

Relative paths are resolved against the plan file's directory.  Runs are
enumerated as the cartesian product of the axes, axis names sorted and
values in the order they are listed, so the first axis name varies slowest.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .crossbar import CrossbarTopology, buffer_demand, cross_point_count, private_buffer_topology, synthesize_crossbar
from .errors import PlanError, ReportError
from .interleave import InterleaveMap, synthesize_interleave
from .sim.engine import coherency_of, run_simulation
from .sim.platform import COHERENCY, MISS_MODES, PlatformModel
from .sim.report import CSV_COLUMNS, CSV_SCHEMA_VERSION, PerfReport
from .spec_model import AraSpec, expand_instances, load_spec
from .workload import (
    KernelDescriptor,
    Workload,
    builtin_kernels,
    load_kernel_config,
    parse_pattern,
    read_trace,
    synth_workload,
    with_reuse,
)

DEFAULT_CAP = 512
AXES = ("buffers", "coherency", "connectivity", "interleave", "miss_mode", "reuse_factor", "tlb_entries")
TOPOLOGY_COLUMNS = ("banks_used", "cross_points")
SWEEP_COLUMNS = ("schema_version",) + AXES + TOPOLOGY_COLUMNS + CSV_COLUMNS

_SHORT_STRATEGY = {"intra_acc": "intra", "inter_acc": "inter"}
_LONG_STRATEGY = {"intra": "intra_acc", "inter": "inter_acc", "intra_acc": "intra_acc", "inter_acc": "inter_acc"}

SCENARIOS = {
    "buffers": "buffers",
    "coherency": "coherency",
    "connectivity": "connectivity",
    "interleave": "interleave",
    "miss_mode": "miss_mode",
    "reuse": "reuse_factor",
    "tlb": "tlb_entries",
}


# ---------------------------------------------------------------------------
# plans


@dataclass
class SweepPlan:
    spec: AraSpec
    workload: Workload
    axes: Dict[str, List] = field(default_factory=dict)
    platform: Dict[str, object] = field(default_factory=dict)
    cap: int = DEFAULT_CAP
    output: Optional[str] = None

    def __post_init__(self):
        unknown = sorted(set(self.axes) - set(AXES))
        if unknown:
            raise PlanError(f"unknown sweep axes {unknown}; expected a subset of {list(AXES)}")
        for name, values in self.axes.items():
            if not isinstance(values, list) or not values:
                raise PlanError(f"axis {name!r} needs a non-empty list of values")
            for v in values:
                _check_axis_value(name, v)
        if self.cap < 1:
            raise PlanError(f"cap must be >= 1, got {self.cap}")
        if self.size > self.cap:
            raise PlanError(f"plan has {self.size} runs, more than the cap of {self.cap}")

    @property
    def size(self) -> int:
        n = 1
        for values in self.axes.values():
            n *= len(values)
        return n

    def points(self) -> List[Dict[str, object]]:
        names = sorted(self.axes)
        return [dict(zip(names, combo)) for combo in itertools.product(*(self.axes[n] for n in names))]


def _check_axis_value(name: str, v) -> None:
    ok = {
        "buffers": lambda: v in ("shared", "private"),
        "coherency": lambda: v in COHERENCY,
        "interleave": lambda: v in _LONG_STRATEGY,
        "miss_mode": lambda: v in MISS_MODES,
        "connectivity": lambda: isinstance(v, int) and not isinstance(v, bool) and v >= 1,
        "tlb_entries": lambda: isinstance(v, int) and not isinstance(v, bool) and v >= 1,
        "reuse_factor": lambda: isinstance(v, (int, float)) and not isinstance(v, bool) and 0 < v <= 1,
    }[name]()
    if not ok:
        raise PlanError(f"bad value {v!r} for axis {name!r}")


def load_plan(path, seed: Optional[int] = None, overrides: Optional[Mapping[str, object]] = None) -> SweepPlan:
    """Read a JSON sweep plan; ``seed`` and ``overrides`` take precedence over the file."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise PlanError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise PlanError(f"{path}: a plan must be a JSON object")
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    if "spec" not in data:
        raise PlanError(f"{path}: missing 'spec'")
    spec = load_spec(resolve(data["spec"]))
    kernels = load_kernel_config(resolve(data["kernels"])) if data.get("kernels") else builtin_kernels()
    wl = data.get("workload") or {}
    run_seed = seed if seed is not None else int(data.get("seed", 0))
    if "trace" in wl:
        workload = read_trace(resolve(wl["trace"]), kernels)
    elif "pattern" in wl:
        try:
            pattern = parse_pattern(wl["pattern"], run_seed)
        except ValueError as exc:
            raise PlanError(str(exc)) from None
        workload = synth_workload(pattern, spec, kernels)
    else:
        raise PlanError(f"{path}: workload needs a 'trace' or a 'pattern'")
    platform = dict(data.get("platform") or {})
    platform.update(overrides or {})
    output = data.get("output")
    return SweepPlan(
        spec=spec,
        workload=workload,
        axes=dict(data.get("axes") or {}),
        platform=platform,
        cap=int(data.get("cap", DEFAULT_CAP)),
        output=resolve(output) if output else None,
    )


# ---------------------------------------------------------------------------
# one configuration


@dataclass(frozen=True)
class Configuration:
    spec: AraSpec
    topology: CrossbarTopology
    interleave: InterleaveMap
    platform: PlatformModel
    workload: Workload
    axis_values: Tuple[Tuple[str, object], ...]


def _reuse_label(kernels: Mapping[str, KernelDescriptor]) -> object:
    values = {k.reuse_factor for k in kernels.values()}
    return values.pop() if len(values) == 1 else "mixed"


def build_configuration(spec: AraSpec, workload: Workload, point: Mapping[str, object],
                        platform_overrides: Optional[Mapping[str, object]] = None) -> Configuration:
    """Apply one sweep point to the base inputs and synthesize its interconnect."""
    if "connectivity" in point:
        spec = spec.with_connectivity(point["connectivity"])
    if "tlb_entries" in point:
        spec = spec.with_tlb_entries(point["tlb_entries"])
    if "coherency" in point:
        spec = replace(spec, coherent_cache=point["coherency"] == "llc")
    if "interleave" in point:
        spec = spec.with_strategy(_LONG_STRATEGY[point["interleave"]])
    if "reuse_factor" in point:
        workload = workload.with_kernels(with_reuse(workload.kernels, float(point["reuse_factor"])))

    settings = dict(platform_overrides or {})
    if "miss_mode" in point:
        settings["miss_mode"] = point["miss_mode"]
    platform = PlatformModel.from_spec(spec).with_overrides(settings)

    instances = expand_instances(spec)
    buffers = point.get("buffers", "shared")
    if buffers == "private":
        topology = private_buffer_topology(instances)
        spec = spec.with_buffers(topology.num_banks)
    else:
        topology = synthesize_crossbar(instances, spec.shared_buffers.count, spec.connectivity)
    interleave = synthesize_interleave(topology, spec.shared_buffers.num_dmacs, spec.strategy)

    values = {
        "buffers": buffers,
        "coherency": coherency_of(spec),
        "connectivity": point.get("connectivity", spec.connectivity),
        "interleave": _SHORT_STRATEGY[spec.strategy],
        "miss_mode": platform.miss_mode,
        "reuse_factor": _reuse_label(workload.kernels),
        "tlb_entries": spec.iommu.tlb_entries,
    }
    return Configuration(spec, topology, interleave, platform, workload, tuple(values.items()))


def _fmt(value) -> str:
    return f"{value:.6g}" if isinstance(value, float) else str(value)


def run_configuration(config: Configuration) -> Dict[str, str]:
    report = run_simulation(config.spec, config.topology, config.interleave, config.workload, config.platform)
    return sweep_row(config, report)


def sweep_row(config: Configuration, report: PerfReport) -> Dict[str, str]:
    row = {"schema_version": str(CSV_SCHEMA_VERSION)}
    row.update({k: _fmt(v) for k, v in config.axis_values})
    row["banks_used"] = str(len(config.topology.wired_banks()))
    row["cross_points"] = str(cross_point_count(config.topology))
    row.update({k: str(v) for k, v in report.csv_row().items()})
    return row


def _run_point(args) -> Dict[str, str]:
    spec, workload, point, overrides = args
    return run_configuration(build_configuration(spec, workload, point, overrides))


def run_sweep(plan: SweepPlan, jobs: int = 1) -> List[Dict[str, str]]:
    """Run every point of ``plan``; rows come back in plan order whatever ``jobs`` is."""
    work = [(plan.spec, plan.workload, p, plan.platform) for p in plan.points()]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_point, work))
    return [_run_point(w) for w in work]


def rows_to_csv(rows: Sequence[Mapping[str, str]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def read_sweep_csv(text: str) -> List[Dict[str, str]]:
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    missing = [c for c in SWEEP_COLUMNS if c not in header]
    if missing:
        raise ReportError(f"not a sweep table: missing columns {missing}")
    rows = list(reader)
    for n, row in enumerate(rows, 2):
        if None in row or any(row[c] is None for c in SWEEP_COLUMNS):
            raise ReportError(f"line {n}: wrong number of fields")
        if row["schema_version"] != str(CSV_SCHEMA_VERSION):
            raise ReportError(f"line {n}: schema version {row['schema_version']!r}, expected {CSV_SCHEMA_VERSION}")
        try:
            int(row["total_cycles"])
            float(row["compute_ratio"])
        except ValueError:
            raise ReportError(f"line {n}: non-numeric metrics") from None
    return rows


# ---------------------------------------------------------------------------
# scenario summaries


def _sort_key(value: str):
    try:
        return (0, float(value), value)
    except ValueError:
        return (1, 0.0, value)


def _groups(rows, axis: str):
    """Rows that differ only in ``axis`` (connectivity is ignored for buffers)."""
    ignore = {axis, "connectivity"} if axis == "buffers" else {axis}
    keyed: Dict[tuple, List[dict]] = {}
    for row in rows:
        key = tuple((a, row[a]) for a in AXES if a not in ignore)
        keyed.setdefault(key, []).append(row)
    return [(dict(k), sorted(g, key=lambda r: _sort_key(r[axis]))) for k, g in keyed.items()]


def _ratio(a: float, b: float) -> Optional[float]:
    return a / b if b else None


def _pair(group, axis, first, second):
    a = [r for r in group if r[axis] == first]
    b = [r for r in group if r[axis] == second]
    return (a[0], b[0]) if a and b else None


def summarize(rows: Sequence[Mapping[str, str]], scenario: str) -> dict:
    if scenario not in SCENARIOS:
        raise ReportError(f"unknown scenario {scenario!r}; expected one of {sorted(SCENARIOS)}")
    axis = SCENARIOS[scenario]
    comparisons = []
    for context, group in _groups(rows, axis):
        if len(group) < 2:
            continue
        entry: Dict[str, object] = {"context": context}
        if scenario == "buffers":
            pair = _pair(group, axis, "private", "shared")
            if pair is None:
                continue
            priv, shared = pair
            pb, sb = int(priv["banks_used"]), int(shared["banks_used"])
            entry.update(
                private_banks=pb,
                shared_banks=sb,
                shared_connectivity=int(shared["connectivity"]),
                bank_saving_pct=round(100.0 * (pb - sb) / pb, 1) if pb else 0.0,
                private_cycles=int(priv["total_cycles"]),
                shared_cycles=int(shared["total_cycles"]),
                slowdown=_ratio(int(shared["total_cycles"]), int(priv["total_cycles"])),
            )
        elif scenario == "coherency":
            pair = _pair(group, axis, "llc", "dram")
            if pair is None:
                continue
            llc, dram = pair
            entry.update(llc_cycles=int(llc["total_cycles"]), dram_cycles=int(dram["total_cycles"]),
                         speedup=_ratio(int(llc["total_cycles"]), int(dram["total_cycles"])))
        elif scenario == "interleave":
            pair = _pair(group, axis, "inter", "intra")
            if pair is None:
                continue
            inter, intra = pair
            entry.update(inter_cycles=int(inter["total_cycles"]), intra_cycles=int(intra["total_cycles"]),
                         speedup=_ratio(int(inter["total_cycles"]), int(intra["total_cycles"])))
        else:
            base = group[-1] if scenario == "reuse" else group[0]
            base_cycles = int(base["total_cycles"])
            points = []
            for r in group:
                points.append({
                    axis: r[axis],
                    "total_cycles": int(r["total_cycles"]),
                    "speedup": _ratio(base_cycles, int(r["total_cycles"])),
                    "compute_ratio": float(r["compute_ratio"]),
                    "miss_penalty_fraction": float(r["miss_penalty_fraction"]),
                })
            entry["baseline"] = base[axis]
            entry["points"] = points
            if scenario == "tlb":
                fr = [p["miss_penalty_fraction"] for p in points]
                entry["non_increasing"] = all(b <= a for a, b in zip(fr, fr[1:]))
        comparisons.append(entry)
    return {"scenario": scenario, "axis": axis, "rows": len(rows), "comparisons": comparisons}


def _num(v) -> str:
    return f"{v:.4g}" if isinstance(v, float) else str(v)


def format_summary(summary: dict) -> str:
    lines = [f"scenario {summary['scenario']}: {summary['rows']} row(s), {len(summary['comparisons'])} comparison(s)"]
    for c in summary["comparisons"]:
        ctx = ", ".join(f"{k}={v}" for k, v in c["context"].items())
        lines.append(f"  [{ctx}]")
        if "points" in c:
            for p in c["points"]:
                lines.append("    " + ", ".join(f"{k}={_num(v)}" for k, v in p.items()))
            if "non_increasing" in c:
                lines.append(f"    miss penalty fraction non-increasing: {c['non_increasing']}")
        elif summary["scenario"] == "buffers":
            lines.append(
                f"    private banks {c['private_banks']} vs shared (c={c['shared_connectivity']}) {c['shared_banks']}, "
                f"saving {c['bank_saving_pct']:.1f}%; cycles {c['private_cycles']} vs {c['shared_cycles']} "
                f"(slowdown {_num(c['slowdown'])})"
            )
        else:
            lines.append("    " + ", ".join(f"{k}={_num(v)}" for k, v in c.items() if k != "context"))
    return "\n".join(lines) + "\n"


def summary_json(summary: dict) -> str:
    return json.dumps(summary, indent=2, sort_keys=True) + "\n"


def buffer_counts(spec: AraSpec) -> Tuple[int, int]:
    """(private bank count, shared bank demand at the spec's connectivity)."""
    instances = expand_instances(spec)
    return private_buffer_topology(instances).num_banks, buffer_demand(instances, spec.connectivity)
