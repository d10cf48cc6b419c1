"""End-of-run performance report."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Dict, List

CSV_SCHEMA_VERSION = 1

# Column order of the one-row CSV form; do not reorder without bumping
# CSV_SCHEMA_VERSION.
CSV_COLUMNS = (
    "total_cycles",
    "tasks_completed",
    "pages_transferred",
    "total_bytes",
    "achieved_bandwidth",
    "tlb_accesses",
    "tlb_misses",
    "tlb_miss_rate",
    "miss_handling_cycles",
    "miss_penalty_fraction",
    "invalidation_cycles",
    "busy_cycles",
    "compute_cycles",
    "compute_ratio",
    "min_compute_ratio",
    "max_compute_ratio",
    "dmac_bytes",
)


@dataclass
class InstanceReport:
    instance_id: int
    type_name: str
    tasks: int = 0
    busy_cycles: int = 0
    compute_cycles: int = 0
    stall_cycles: int = 0
    miss_handling_cycles: int = 0

    @property
    def compute_ratio(self) -> float:
        return self.compute_cycles / self.busy_cycles if self.busy_cycles else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["compute_ratio"] = self.compute_ratio
        return d


@dataclass
class PerfReport:
    total_cycles: int = 0
    acc_clock_hz: int = 100_000_000
    instances: List[InstanceReport] = field(default_factory=list)
    tlb_accesses: int = 0
    tlb_misses: int = 0
    miss_handling_cycles: int = 0
    dmac_bytes: List[int] = field(default_factory=list)
    pages_transferred: int = 0
    invalidation_cycles: int = 0
    tasks_completed: int = 0

    @property
    def total_bytes(self) -> int:
        return sum(self.dmac_bytes)

    @property
    def achieved_bandwidth(self) -> float:
        """Bytes per second over the whole run."""
        if not self.total_cycles:
            return 0.0
        return self.total_bytes / (self.total_cycles / self.acc_clock_hz)

    @property
    def busy_cycles(self) -> int:
        return sum(i.busy_cycles for i in self.instances)

    @property
    def compute_cycles(self) -> int:
        return sum(i.compute_cycles for i in self.instances)

    @property
    def compute_ratio(self) -> float:
        busy = self.busy_cycles
        return self.compute_cycles / busy if busy else 0.0

    def _active_ratios(self) -> List[float]:
        return [i.compute_ratio for i in self.instances if i.tasks]

    @property
    def min_compute_ratio(self) -> float:
        r = self._active_ratios()
        return min(r) if r else 0.0

    @property
    def max_compute_ratio(self) -> float:
        r = self._active_ratios()
        return max(r) if r else 0.0

    @property
    def tlb_miss_rate(self) -> float:
        return self.tlb_misses / self.tlb_accesses if self.tlb_accesses else 0.0

    @property
    def miss_penalty_fraction(self) -> float:
        """Share of accelerator busy time spent waiting on TLB miss handling."""
        busy = self.busy_cycles
        return self.miss_handling_cycles / busy if busy else 0.0

    def instance(self, instance_id: int) -> InstanceReport:
        return next(i for i in self.instances if i.instance_id == instance_id)

    def to_dict(self) -> dict:
        return {
            "total_cycles": self.total_cycles,
            "acc_clock_hz": self.acc_clock_hz,
            "tasks_completed": self.tasks_completed,
            "pages_transferred": self.pages_transferred,
            "total_bytes": self.total_bytes,
            "achieved_bandwidth": self.achieved_bandwidth,
            "tlb_accesses": self.tlb_accesses,
            "tlb_misses": self.tlb_misses,
            "tlb_miss_rate": self.tlb_miss_rate,
            "miss_handling_cycles": self.miss_handling_cycles,
            "miss_penalty_fraction": self.miss_penalty_fraction,
            "invalidation_cycles": self.invalidation_cycles,
            "busy_cycles": self.busy_cycles,
            "compute_cycles": self.compute_cycles,
            "compute_ratio": self.compute_ratio,
            "dmac_bytes": list(self.dmac_bytes),
            "instances": [i.to_dict() for i in self.instances],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "PerfReport":
        insts = [
            InstanceReport(**{k: v for k, v in i.items() if k != "compute_ratio"}) for i in d.get("instances", [])
        ]
        return cls(
            total_cycles=d["total_cycles"],
            acc_clock_hz=d["acc_clock_hz"],
            instances=insts,
            tlb_accesses=d["tlb_accesses"],
            tlb_misses=d["tlb_misses"],
            miss_handling_cycles=d["miss_handling_cycles"],
            dmac_bytes=list(d["dmac_bytes"]),
            pages_transferred=d["pages_transferred"],
            invalidation_cycles=d["invalidation_cycles"],
            tasks_completed=d["tasks_completed"],
        )

    def csv_row(self) -> Dict[str, object]:
        row = {}
        for col in CSV_COLUMNS:
            value = getattr(self, col)
            if col == "dmac_bytes":
                value = ";".join(str(b) for b in value)
            elif isinstance(value, float):
                value = f"{value:.6g}"
            row[col] = value
        return row

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=("schema_version",) + CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerow({"schema_version": CSV_SCHEMA_VERSION, **self.csv_row()})
        return buf.getvalue()
