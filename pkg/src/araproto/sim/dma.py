"""DMAC page transfers.

Each DMAC serves its requests one page at a time in FIFO order.  A page
transfer also holds one physical memory port for its whole duration; the
ports form a pool shared by all DMACs (4 HP ports towards DRAM, 1 ACP port
towards the LLC by default).  DMACs waiting for a port are served in the
order they started waiting.  Reads and writes cost the same.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Deque, List, Optional

from ..errors import ContractError
from .events import EventQueue
from .platform import COHERENCY, PlatformModel

DIRECTIONS = ("read", "write")


def page_latency(coherency: str, platform: PlatformModel) -> int:
    """Uncontended cycles to move one page."""
    if coherency not in COHERENCY:
        raise ContractError(f"coherency must be one of {COHERENCY}")
    return platform.latency(coherency) + math.ceil(platform.page_bytes / platform.bytes_per_cycle_per_port)


def transfer_page(dmac: int, direction: str, coherency: str, platform: PlatformModel, num_dmacs: int) -> int:
    """Latency of a single page on an otherwise idle DMAC."""
    if not 0 <= dmac < num_dmacs:
        raise ContractError(f"DMAC {dmac} out of range 0..{num_dmacs - 1}")
    if direction not in DIRECTIONS:
        raise ContractError(f"direction must be one of {DIRECTIONS}")
    return page_latency(coherency, platform)


@dataclass
class _Request:
    dmac: int
    direction: str
    submitted: int
    on_done: Optional[Callable[[int], None]]
    start: int = -1


class DmaSystem:
    def __init__(self, events: EventQueue, num_dmacs: int, coherency: str, platform: PlatformModel):
        if num_dmacs < 1:
            raise ContractError("need at least one DMAC")
        self.events = events
        self.num_dmacs = num_dmacs
        self.coherency = coherency
        self.platform = platform
        self.service = page_latency(coherency, platform)
        self.free_ports = platform.ports(coherency)
        self._queues: List[Deque[_Request]] = [deque() for _ in range(num_dmacs)]
        self._active: List[Optional[_Request]] = [None] * num_dmacs
        self._port_wait: Deque[int] = deque()
        self.bytes_moved = [0] * num_dmacs
        self.pages_moved = [0] * num_dmacs

    def reset_counters(self) -> None:
        self.bytes_moved = [0] * self.num_dmacs
        self.pages_moved = [0] * self.num_dmacs

    def transfer_page(self, dmac: int, direction: str, on_done: Optional[Callable[[int], None]] = None) -> None:
        """Queue one page on ``dmac``; ``on_done(time)`` fires at completion."""
        if not 0 <= dmac < self.num_dmacs:
            raise ContractError(f"DMAC {dmac} out of range 0..{self.num_dmacs - 1}")
        if direction not in DIRECTIONS:
            raise ContractError(f"direction must be one of {DIRECTIONS}")
        self._queues[dmac].append(_Request(dmac, direction, self.events.now, on_done))
        if self._active[dmac] is None and dmac not in self._port_wait:
            self._want_port(dmac)

    def _want_port(self, dmac: int) -> None:
        if self.free_ports > 0 and not self._port_wait:
            self._start(dmac)
        else:
            self._port_wait.append(dmac)

    def _start(self, dmac: int) -> None:
        self.free_ports -= 1
        req = self._queues[dmac].popleft()
        req.start = self.events.now
        self._active[dmac] = req
        self.events.schedule(self.events.now + self.service, self._finish, dmac)

    def _finish(self, dmac: int) -> None:
        req = self._active[dmac]
        self._active[dmac] = None
        self.free_ports += 1
        self.bytes_moved[dmac] += self.platform.page_bytes
        self.pages_moved[dmac] += 1
        if self._port_wait:
            self._start(self._port_wait.popleft())
        if self._queues[dmac]:
            self._want_port(dmac)
        if req.on_done is not None:
            req.on_done(self.events.now)
