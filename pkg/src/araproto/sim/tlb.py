"""IOMMU TLB with LRU replacement and batched software miss handling."""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from ..errors import ContractError
from .platform import PlatformModel


@dataclass
class TlbState:
    capacity_entries: int
    entries: "OrderedDict[int, bool]" = field(default_factory=OrderedDict)
    accesses: int = 0
    misses: int = 0

    def __post_init__(self):
        if self.capacity_entries < 1:
            raise ContractError("TLB capacity must be >= 1 entry")

    def reset_counters(self) -> None:
        self.accesses = 0
        self.misses = 0

    def __contains__(self, page: int) -> bool:
        return page in self.entries


def tlb_access(tlb: TlbState, page: int) -> str:
    """Look ``page`` up, updating LRU order and counters; returns 'hit' or 'miss'.

    A missing translation is installed straight away (its handling cost is
    charged separately by the miss handler).
    """
    tlb.accesses += 1
    if page in tlb.entries:
        tlb.entries.move_to_end(page)
        return "hit"
    tlb.misses += 1
    if len(tlb.entries) >= tlb.capacity_entries:
        tlb.entries.popitem(last=False)
    tlb.entries[page] = True
    return "miss"


def miss_penalty_cycles(count: int, mode: str, platform: PlatformModel) -> int:
    us = Fraction(str(platform.tlb_miss_penalty_us[mode]))
    return math.ceil(count * us * platform.acc_clock_hz / 1_000_000)


def handle_tlb_miss_batch(misses: Sequence[int], mode: str, platform: PlatformModel) -> int:
    """Stall (accelerator cycles) for one batch of misses sent to the handler together."""
    if len(misses) > platform.miss_batch_size:
        raise ContractError(f"batch of {len(misses)} misses exceeds miss_batch_size={platform.miss_batch_size}")
    if mode not in platform.tlb_miss_penalty_us:
        raise ContractError(f"unknown miss handling mode {mode!r}")
    return miss_penalty_cycles(len(misses), mode, platform)
