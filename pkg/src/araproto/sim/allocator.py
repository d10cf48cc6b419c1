"""Dynamic buffer allocation with occupied/reserved flags.

A bank can be handed out only while it is neither occupied nor reserved.
Only the task at the head of the task list may reserve banks, and it
reserves its whole demand (free banks as well as occupied ones), so no later
task can overtake it on those banks.  Once every reserved bank has been
released the head takes them.  After the head has been served (or has
reserved), the remaining tasks are granted greedily in list order.  By
default a task that cannot be served is skipped and the scan continues;
``stop_at_first=True`` stops the scan at the first such task instead.

With a topology, each port of the chosen accelerator instance must be bound
to a distinct bank it is wired to (a bipartite matching).  Without one,
any ``demand`` banks will do.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from ..crossbar import CrossbarTopology
from ..errors import CapacityError
from ..matching import max_matching


@dataclass
class BankState:
    occupied: bool = False
    reserved: bool = False
    owner: Optional[int] = None
    reserver: Optional[int] = None


class BufferFlags:
    """Per-bank occupied/reserved flags plus the head task's reservation target."""

    def __init__(self, num_banks: int):
        self.banks = [BankState() for _ in range(num_banks)]
        # (task id, instance id or None) the current reservation was made for
        self.head_target: Optional[Tuple[int, Optional[int]]] = None

    def __len__(self):
        return len(self.banks)

    def __getitem__(self, bank: int) -> BankState:
        return self.banks[bank]

    def allocatable(self, bank: int) -> bool:
        s = self.banks[bank]
        return not s.occupied and not s.reserved

    def occupy(self, bank: int, owner: int) -> None:
        s = self.banks[bank]
        if s.occupied:
            raise AssertionError(f"bank {bank} already occupied by task {s.owner}")
        s.occupied, s.owner = True, owner

    def vacate(self, bank: int) -> None:
        s = self.banks[bank]
        s.occupied, s.owner = False, None

    def reserve(self, bank: int, task: int) -> None:
        s = self.banks[bank]
        s.reserved, s.reserver = True, task

    def unreserve(self, bank: int) -> None:
        s = self.banks[bank]
        s.reserved, s.reserver = False, None

    def owned_by(self, task: int) -> List[int]:
        return [b for b, s in enumerate(self.banks) if s.owner == task]

    def reserved_by(self, task: int) -> List[int]:
        return [b for b, s in enumerate(self.banks) if s.reserver == task]

    def copy(self) -> "BufferFlags":
        return copy.deepcopy(self)


@dataclass(frozen=True)
class BufferRequest:
    task_id: int
    demand: int
    # instances able to start the task right now (only used with a topology)
    instances: Tuple[int, ...] = ()
    # every instance that could run the task; the head reserves for one of these
    candidates: Tuple[int, ...] = ()


@dataclass(frozen=True)
class Grant:
    task_id: int
    instance_id: Optional[int]
    banks: Tuple[int, ...]


@dataclass
class AllocationDelta:
    grants: List[Grant] = field(default_factory=list)
    occupied: Dict[int, int] = field(default_factory=dict)
    reserved: Dict[int, int] = field(default_factory=dict)
    unreserved: List[int] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not (self.grants or self.occupied or self.reserved or self.unreserved)


class BufferAllocator:
    def __init__(self, num_banks: int, topology: Optional[CrossbarTopology] = None,
                 stop_at_first: bool = False, flags: Optional[BufferFlags] = None):
        self.num_banks = num_banks
        self.topology = topology
        self.stop_at_first = stop_at_first
        self.flags = flags if flags is not None else BufferFlags(num_banks)
        self._ports: Dict[int, List[Tuple[Tuple[int, int], Tuple[int, ...]]]] = {}
        self._fits_empty: Dict[int, bool] = {}

    # -- matching helpers -------------------------------------------------
    def _port_lists(self, inst: int):
        if inst not in self._ports:
            topo = self.topology
            self._ports[inst] = [(k, tuple(sorted(topo.port_map[k]))) for k in topo.ports_of(inst)]
        return self._ports[inst]

    def _match(self, demand: int, inst: Optional[int], usable, rank=None) -> Optional[Tuple[int, ...]]:
        if self.topology is None:
            banks = sorted(usable, key=rank) if rank else sorted(usable)
            return tuple(sorted(banks[:demand])) if len(banks) >= demand else None
        ports = self._port_lists(inst)
        adj = {}
        for key, banks in ports:
            cand = [b for b in banks if b in usable]
            if not cand:
                return None
            if rank:
                cand.sort(key=rank)
            adj[key] = cand
        m = max_matching(adj)
        if len(m) < len(ports):
            return None
        return tuple(m[key] for key, _ in ports)

    def _check_capacity(self, req: BufferRequest) -> None:
        if self.topology is None:
            if req.demand > self.num_banks:
                raise CapacityError(f"task {req.task_id} needs {req.demand} banks, only {self.num_banks} exist",
                                    demand=req.demand, available=self.num_banks)
            return
        insts = set(req.instances) | set(req.candidates)
        if not insts:
            raise CapacityError(f"task {req.task_id} has no accelerator instance to run on")
        everything = range(self.num_banks)
        for inst in insts:
            if inst not in self._fits_empty:
                self._fits_empty[inst] = self._match(len(self._port_lists(inst)), inst, set(everything)) is not None
            if not self._fits_empty[inst]:
                raise CapacityError(
                    f"instance {inst} cannot bind its {len(self._port_lists(inst))} ports to distinct banks "
                    "even with every bank free"
                )

    def _options(self, req: BufferRequest):
        if self.topology is not None:
            return list(req.instances)
        # plain bank counting: an instance list, if given, must offer a free one
        if req.candidates and not req.instances:
            return []
        return [None]

    # -- public API ---------------------------------------------------------
    def _grant(self, req: BufferRequest, inst, banks, delta: AllocationDelta) -> None:
        for b in banks:
            self.flags.occupy(b, req.task_id)
            delta.occupied[b] = req.task_id
        delta.grants.append(Grant(req.task_id, inst, tuple(banks)))

    def _clear_reservation(self, task: int, delta: AllocationDelta) -> None:
        for b in self.flags.reserved_by(task):
            self.flags.unreserve(b)
            delta.unreserved.append(b)
            delta.reserved.pop(b, None)
        if self.flags.head_target and self.flags.head_target[0] == task:
            self.flags.head_target = None

    def allocate(self, requests: Sequence[BufferRequest]) -> AllocationDelta:
        """One pass over the task list; flags are updated in place."""
        delta = AllocationDelta()
        flags = self.flags
        for req in requests:
            self._check_capacity(req)
        stale = flags.head_target
        if stale is not None and (not requests or stale[0] != requests[0].task_id):
            self._clear_reservation(stale[0], delta)
        if not requests:
            return delta

        head = requests[0]
        own = set(flags.reserved_by(head.task_id))
        usable = {b for b in range(self.num_banks) if flags.allocatable(b)}
        own_free = {b for b in own if not flags[b].occupied}
        rank = lambda b: (b not in own, b)  # noqa: E731
        for inst in self._options(head):
            banks = self._match(head.demand, inst, usable | own_free, rank)
            if banks is not None:
                self._clear_reservation(head.task_id, delta)
                self._grant(head, inst, banks, delta)
                break
        else:
            self._reserve_for_head(head, delta)

        for req in requests[1:]:
            usable = {b for b in range(self.num_banks) if flags.allocatable(b)}
            for inst in self._options(req):
                banks = self._match(req.demand, inst, usable)
                if banks is not None:
                    self._grant(req, inst, banks, delta)
                    break
            else:
                if self.stop_at_first:
                    break
        return delta

    def _reserve_for_head(self, head: BufferRequest, delta: AllocationDelta) -> None:
        flags = self.flags
        target: Optional[int] = None
        if self.topology is not None:
            pool = head.instances or head.candidates
            current = flags.head_target[1] if flags.head_target and flags.head_target[0] == head.task_id else None
            if current is not None and current in pool and (not head.instances or current in head.instances):
                return
            target = pool[0]
        elif flags.head_target and flags.head_target[0] == head.task_id:
            return
        self._clear_reservation(head.task_id, delta)
        # prefer free banks so the wait is as short as possible
        rank = lambda b: (flags[b].occupied, b)  # noqa: E731
        banks = self._match(head.demand, target, set(range(self.num_banks)), rank)
        if banks is None:  # pragma: no cover - guarded by _check_capacity
            raise CapacityError(f"task {head.task_id} cannot reserve {head.demand} banks")
        for b in banks:
            flags.reserve(b, head.task_id)
            delta.reserved[b] = head.task_id
        flags.head_target = (head.task_id, target)

    def release(self, task_id: int) -> List[int]:
        banks = self.flags.owned_by(task_id)
        for b in banks:
            self.flags.vacate(b)
        return banks


def dba_allocate(task_list: Sequence[BufferRequest], flags: BufferFlags,
                 topology: Optional[CrossbarTopology] = None, stop_at_first: bool = False) -> AllocationDelta:
    """Run one allocation pass on a copy of ``flags`` and return what changed."""
    alloc = BufferAllocator(len(flags), topology, stop_at_first, flags=flags.copy())
    return alloc.allocate(task_list)
