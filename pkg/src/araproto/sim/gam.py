"""Global accelerator manager: first-come, first-served accelerator grants.

Requests for one accelerator type are served strictly in arrival order.  A
request is granted once an instance of its type is free *and* the buffer
allocator can give that instance its banks.  All pending requests, across
types, form the allocator's task list in arrival order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Union

from ..errors import ProtocolError
from ..spec_model import AccInstance
from .allocator import BufferAllocator, BufferRequest, Grant


@dataclass(frozen=True)
class Reserve:
    task_id: int
    type_name: str


@dataclass(frozen=True)
class Free:
    task_id: int


class GlobalAcceleratorManager:
    def __init__(self, instances: Sequence[AccInstance], allocator: BufferAllocator):
        self.allocator = allocator
        self.instances = {a.instance_id: a for a in instances}
        self.by_type: Dict[str, List[int]] = {}
        for a in sorted(instances, key=lambda a: a.instance_id):
            self.by_type.setdefault(a.type_name, []).append(a.instance_id)
        self.free_table: Dict[str, Set[int]] = {t: set(ids) for t, ids in self.by_type.items()}
        self.pending: List[Reserve] = []
        self.granted: Dict[int, Grant] = {}

    def queue(self, type_name: str) -> List[int]:
        return [r.task_id for r in self.pending if r.type_name == type_name]

    def reserve(self, task_id: int, type_name: str) -> List[Grant]:
        if not self.by_type.get(type_name):
            raise ProtocolError(f"no accelerator instance of type {type_name!r} exists")
        if task_id in self.granted or any(r.task_id == task_id for r in self.pending):
            raise ProtocolError(f"task {task_id} already reserved")
        self.pending.append(Reserve(task_id, type_name))
        return self.schedule()

    def free(self, task_id: int) -> List[Grant]:
        grant = self.granted.pop(task_id, None)
        if grant is None:
            raise ProtocolError(f"task {task_id} does not hold an accelerator")
        self.allocator.release(task_id)
        inst = self.instances[grant.instance_id]
        self.free_table[inst.type_name].add(inst.instance_id)
        return self.schedule()

    def _requests(self) -> List[BufferRequest]:
        seen: Set[str] = set()
        out = []
        for r in self.pending:
            if r.type_name in seen:
                continue  # FCFS within a type: only the oldest request may go
            seen.add(r.type_name)
            ids = self.by_type[r.type_name]
            out.append(BufferRequest(
                task_id=r.task_id,
                demand=self.instances[ids[0]].port_count,
                instances=tuple(sorted(self.free_table[r.type_name])),
                candidates=tuple(ids),
            ))
        return out

    def schedule(self) -> List[Grant]:
        grants: List[Grant] = []
        while self.pending:
            delta = self.allocator.allocate(self._requests())
            if not delta.grants:
                break
            for g in delta.grants:
                req = next(r for r in self.pending if r.task_id == g.task_id)
                inst = g.instance_id
                if inst is None:
                    inst = min(self.free_table[req.type_name])
                    g = Grant(g.task_id, inst, g.banks)
                self.free_table[req.type_name].discard(inst)
                self.pending.remove(req)
                self.granted[g.task_id] = g
                grants.append(g)
        return grants

    @property
    def head(self) -> Optional[int]:
        return self.pending[0].task_id if self.pending else None


def gam_schedule(state: GlobalAcceleratorManager, event: Union[Reserve, Free]) -> List[Grant]:
    if isinstance(event, Reserve):
        return state.reserve(event.task_id, event.type_name)
    if isinstance(event, Free):
        return state.free(event.task_id)
    raise TypeError(f"unknown GAM event {event!r}")
