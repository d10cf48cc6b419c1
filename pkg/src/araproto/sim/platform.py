"""Platform timing model.

All times are in accelerator cycles.  CPU-side TLB miss penalties are
given in microseconds and converted with the accelerator clock.  Defaults
are model choices: 4 DRAM ports, 1 LLC port, 8 bytes/cycle per port,
200-cycle DRAM latency (one third of a 600-cycle three-access page walk),
30-cycle LLC latency and 32 cycles per invalidated page.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace
from typing import Dict, Mapping

from ..errors import ConfigError
from ..spec_model import PAGE_BYTES, AraSpec

MISS_MODES = ("kernel_api", "pgtwalk")
COHERENCY = ("llc", "dram")


def _penalties() -> Dict[str, float]:
    return {"kernel_api": 6.41, "pgtwalk": 0.69}


@dataclass(frozen=True)
class PlatformModel:
    acc_clock_hz: int = 100_000_000
    cpu_clock_hz: int = 667_000_000
    page_bytes: int = PAGE_BYTES
    dram_ports: int = 4
    llc_ports: int = 1
    bytes_per_cycle_per_port: int = 8
    dram_latency_cycles: int = 200
    llc_latency_cycles: int = 30
    invalidate_cycles_per_page: int = 32
    tlb_miss_penalty_us: Dict[str, float] = field(default_factory=_penalties)
    miss_batch_size: int = 8
    miss_mode: str = "pgtwalk"
    # GAM/DBA decision latency and per-parameter send cost
    decision_cycles: int = 0
    param_cycles: int = 0
    dba_stop_at_first: bool = False

    def __post_init__(self):
        if self.page_bytes != PAGE_BYTES:
            raise ConfigError(f"page_bytes must be {PAGE_BYTES}")
        for name in ("acc_clock_hz", "cpu_clock_hz", "dram_ports", "llc_ports", "bytes_per_cycle_per_port", "miss_batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("dram_latency_cycles", "llc_latency_cycles", "invalidate_cycles_per_page", "decision_cycles", "param_cycles"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.miss_mode not in MISS_MODES:
            raise ConfigError(f"miss_mode must be one of {MISS_MODES}")
        if set(self.tlb_miss_penalty_us) != set(MISS_MODES) or any(v < 0 for v in self.tlb_miss_penalty_us.values()):
            raise ConfigError(f"tlb_miss_penalty_us needs non-negative entries for {MISS_MODES}")

    @classmethod
    def from_spec(cls, spec: AraSpec, **overrides) -> "PlatformModel":
        return cls(acc_clock_hz=spec.acc_frequency_hz, **overrides)

    def ports(self, coherency: str) -> int:
        return self.llc_ports if coherency == "llc" else self.dram_ports

    def latency(self, coherency: str) -> int:
        return self.llc_latency_cycles if coherency == "llc" else self.dram_latency_cycles

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def with_overrides(self, settings: Mapping[str, object]) -> "PlatformModel":
        """Apply ``key=value`` settings; string values are coerced to the field type.

        ``tlb_miss_penalty_us.<mode>`` addresses one penalty entry.
        """
        fields = {f.name: f for f in dataclasses.fields(self)}
        changes: dict = {}
        penalties = dict(self.tlb_miss_penalty_us)
        for key, value in settings.items():
            if key.startswith("tlb_miss_penalty_us."):
                mode = key.split(".", 1)[1]
                if mode not in MISS_MODES:
                    raise ConfigError(f"unknown miss mode {mode!r}")
                penalties[mode] = float(value)
                continue
            if key not in fields or key == "tlb_miss_penalty_us":
                raise ConfigError(f"unknown platform setting {key!r}")
            current = getattr(self, key)
            try:
                if isinstance(current, bool):
                    changes[key] = value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes", "on")
                elif isinstance(current, int):
                    changes[key] = int(value)
                else:
                    changes[key] = type(current)(value)
            except (TypeError, ValueError):
                raise ConfigError(f"bad value {value!r} for platform setting {key!r}") from None
        changes["tlb_miss_penalty_us"] = penalties
        return replace(self, **changes)
