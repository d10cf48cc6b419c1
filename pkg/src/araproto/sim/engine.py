"""Discrete-event model of the accelerator plane.

Task life cycle (accelerator API): reserve -> grant (GAM + DBA) ->
send_param -> prefetch -> compute -> write back -> [invalidate] -> free.

A task streams its data through the banks it was granted.  When the data
does not fit the banks at once (``pages per bank = buffer size / 4 KB``) it
is processed in several passes; each pass translates its pages through the
IOMMU TLB (misses are sent to the software handler in batches), fetches its
input pages, computes, then translates and writes its output pages.  Page
``k`` of a pass lives in the bank bound to port ``k mod ports``; the bank's
DMAC comes from the interleaved network.  Under coherency at DRAM the
written pages are invalidated in the CPU caches before the task completes.

Virtual addresses: every app owns a private address region.  The ``n``-th
task an app runs with a given kernel works on slice ``n``; all kernels of an
app read the same input volume (so translations are reused across kernels)
and each kernel writes its own output volume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

from ..crossbar import CrossbarTopology, ORACLE_LIMIT, check_feasibility
from ..errors import ConfigError, SimulationError
from ..interleave import InterleaveMap
from ..spec_model import AraSpec, expand_instances
from ..workload import KernelDescriptor, TraceEvent, Workload
from .allocator import BufferAllocator, Grant
from .dma import DmaSystem
from .events import EventQueue
from .gam import GlobalAcceleratorManager
from .platform import PlatformModel
from .report import InstanceReport, PerfReport
from .tlb import TlbState, handle_tlb_miss_batch, tlb_access

_APP_REGION = 1 << 26
_OUTPUT_REGION = 1 << 22
_SLICE_STRIDE = 4096


def coherency_of(spec: AraSpec) -> str:
    return "llc" if spec.coherent_cache else "dram"


def invalidate_pages(pages: int, coherency: str, platform: PlatformModel) -> int:
    """Cycles spent invalidating ``pages`` written pages in the CPU caches."""
    if coherency == "llc":
        return 0
    return pages * platform.invalidate_cycles_per_page


@dataclass
class _Task:
    task_id: int
    app: "_App"
    kernel: KernelDescriptor
    size: float
    slice_index: int
    arrival: int
    grant: Optional[Grant] = None
    granted_at: Optional[int] = None
    started: bool = False
    start_requested: bool = False
    done_at: Optional[int] = None
    freed_at: Optional[int] = None
    plan: dict = field(default_factory=dict)
    on_grant: List[Callable[[], None]] = field(default_factory=list)
    on_done: List[Callable[[], None]] = field(default_factory=list)

    def describe(self) -> str:
        if self.grant is None:
            state = "waiting for an accelerator/buffers"
        elif self.done_at is None:
            state = "running" if self.started else "granted, never started"
        else:
            state = "done, never freed"
        return f"task {self.task_id} (app {self.app.name}, {self.kernel.name}): {state}"


@dataclass
class _App:
    name: str
    index: int
    events: List[TraceEvent]
    cursor: int = 0
    task: Optional[_Task] = None


class Simulator:
    def __init__(self, spec: AraSpec, topology: CrossbarTopology, interleave: InterleaveMap,
                 workload: Workload, platform: Optional[PlatformModel] = None):
        self.spec = spec
        self.topology = topology
        self.interleave = interleave
        self.workload = workload
        self.platform = platform or PlatformModel.from_spec(spec)
        self.coherency = coherency_of(spec)
        self.instances = expand_instances(spec)
        self._validate()

        self.events = EventQueue()
        self.tlb = TlbState(spec.iommu.tlb_entries)
        self.dma = DmaSystem(self.events, interleave.num_dmacs, self.coherency, self.platform)
        self.allocator = BufferAllocator(topology.num_banks, topology, self.platform.dba_stop_at_first)
        self.gam = GlobalAcceleratorManager(self.instances, self.allocator)
        self.pages_per_bank = max(1, spec.shared_buffers.size_bytes // self.platform.page_bytes)
        self.stats = {a.instance_id: InstanceReport(a.instance_id, a.type_name) for a in self.instances}
        self.miss_handling_cycles = 0
        self.invalidation_cycles = 0
        self.pages_transferred = 0
        self.tasks: Dict[int, _Task] = {}
        self._slice_counter: Dict[tuple, int] = {}
        self._kernel_index = {name: n for n, name in enumerate(sorted(workload.kernels))}
        self._end = 0

    # -- input checks --------------------------------------------------------
    def _validate(self) -> None:
        spec, topo = self.spec, self.topology
        types = {t.name: t for t in spec.acc_types}
        for ev in self.workload.events:
            if ev.kernel is None:
                continue
            if ev.kernel not in self.workload.kernels:
                raise ConfigError(f"trace line {ev.line}: unknown kernel {ev.kernel!r}")
            if ev.kernel not in types:
                raise ConfigError(f"trace line {ev.line}: kernel {ev.kernel!r} has no accelerator type in the spec")
            k = self.workload.kernels[ev.kernel]
            if k.port_count != types[ev.kernel].port_count:
                raise ConfigError(
                    f"kernel {k.name!r} declares {k.port_count} ports but the spec gives {types[k.name].port_count}"
                )
        for inst in self.instances:
            if topo.port_count(inst.instance_id) != inst.port_count:
                raise ConfigError(f"topology does not wire the {inst.port_count} ports of instance {inst.instance_id}")
        for bank in topo.wired_banks():
            if bank >= topo.num_banks:
                raise ConfigError(f"topology references bank {bank} beyond its {topo.num_banks} banks")
            if bank not in self.interleave.bank_to_dmac:
                raise ConfigError(f"bank {bank} has no DMAC in the interleaved network")
        if len(self.instances) <= ORACLE_LIMIT:
            c = min(spec.connectivity, len(self.instances))
            report = check_feasibility(topo, c)
            if not report.feasible:
                raise ConfigError(f"topology is not feasible for connectivity {c}: "
                                  f"instances {sorted(report.violating_subset)} cannot be active together")

    # -- performance monitor ----------------------------------------------------
    def read_counters(self, scope: str = "all") -> dict:
        snap = {}
        if scope in ("all", "tlb"):
            snap.update(tlb_accesses=self.tlb.accesses, tlb_misses=self.tlb.misses)
        if scope in ("all", "dmac"):
            snap.update(dmac_bytes=list(self.dma.bytes_moved), pages_transferred=self.pages_transferred)
        if scope not in ("all", "tlb", "dmac"):
            raise ValueError(f"unknown counter scope {scope!r}")
        return snap

    def reset_counters(self, scope: str = "all") -> None:
        if scope in ("all", "tlb"):
            self.tlb.reset_counters()
        if scope in ("all", "dmac"):
            self.dma.reset_counters()
            self.pages_transferred = 0
        if scope not in ("all", "tlb", "dmac"):
            raise ValueError(f"unknown counter scope {scope!r}")

    def at(self, time: int, fn: Callable[["Simulator"], None]) -> None:
        """Call ``fn(sim)`` at simulated ``time``, between events."""
        self.events.schedule(time, fn, self)

    # -- application programs ---------------------------------------------------
    def run(self) -> PerfReport:
        by_app: Dict[str, List[TraceEvent]] = {}
        for ev in self.workload.events:
            by_app.setdefault(ev.app, []).append(ev)
        self._apps = [_App(name, n, evs) for n, (name, evs) in enumerate(by_app.items())]
        for app in self._apps:
            self.events.schedule(app.events[0].time, self._step, app)
        self.events.run()
        blocked = [t for t in self.tasks.values() if t.freed_at is None]
        if blocked:
            raise SimulationError(
                "deadlock: no pending events but unfinished tasks:\n  " + "\n  ".join(t.describe() for t in blocked),
                blocked=[t.task_id for t in blocked],
            )
        return self._report()

    def _advance(self, app: _App) -> None:
        app.cursor += 1
        if app.cursor < len(app.events):
            self.events.schedule(max(self.events.now, app.events[app.cursor].time), self._step, app)

    def _step(self, app: _App) -> None:
        ev = app.events[app.cursor]
        verb = ev.verb
        if verb in ("run", "reserve"):
            task = self._new_task(app, ev)
            app.task = task
            if verb == "run":
                task.start_requested = True
                task.on_done.append(lambda: (self._free(task), self._advance(app)))
            self._reserve(task)
            if verb == "reserve":
                self._advance(app)
            return
        task = app.task
        if verb == "check_reserved":
            if task.grant is not None:
                self._advance(app)
            else:
                task.on_grant.append(lambda: self._advance(app))
        elif verb == "send_param":
            task.start_requested = True
            if task.grant is not None and not task.started:
                self._start(task)
            self._advance(app)
        elif verb == "check_done":
            if task.done_at is not None:
                self._advance(app)
            else:
                task.on_done.append(lambda: self._advance(app))
        elif verb == "free":
            if task.done_at is not None:
                self._free(task)
                self._advance(app)
            else:
                task.on_done.append(lambda: (self._free(task), self._advance(app)))

    def _new_task(self, app: _App, ev: TraceEvent) -> _Task:
        key = (app.name, ev.kernel)
        n = self._slice_counter.get(key, 0)
        self._slice_counter[key] = n + 1
        task = _Task(len(self.tasks), app, self.workload.kernels[ev.kernel], ev.size, n, self.events.now)
        self.tasks[task.task_id] = task
        return task

    # -- GAM / DBA ------------------------------------------------------------
    def _reserve(self, task: _Task) -> None:
        self._apply(self.gam.reserve(task.task_id, task.kernel.name))

    def _free(self, task: _Task) -> None:
        now = self.events.now
        task.freed_at = now
        self._end = max(self._end, now)
        st = self.stats[task.grant.instance_id]
        st.busy_cycles += now - task.granted_at
        self._apply(self.gam.free(task.task_id))

    def _apply(self, grants: List[Grant]) -> None:
        for g in grants:
            self.events.schedule(self.events.now + self.platform.decision_cycles, self._granted, self.tasks[g.task_id], g)

    def _granted(self, task: _Task, grant: Grant) -> None:
        task.grant = grant
        task.granted_at = self.events.now
        self.stats[grant.instance_id].tasks += 1
        for cb in task.on_grant:
            cb()
        task.on_grant.clear()
        if task.start_requested and not task.started:
            self._start(task)

    # -- task execution -------------------------------------------------------
    def _start(self, task: _Task) -> None:
        task.started = True
        k = task.kernel
        n_params = self.spec.acc_type(k.name).num_params
        pin, pout = k.task_pages_in(task.size), k.task_pages_out(task.size)
        capacity = len(task.grant.banks) * self.pages_per_bank
        passes = max(1, math.ceil(pin / capacity), math.ceil(pout / capacity))
        task.plan = {
            "pin": pin,
            "pout": pout,
            "passes": passes,
            "compute": k.task_compute_cycles(task.size),
        }
        self.events.schedule(self.events.now + n_params * self.platform.param_cycles, self._pass, task, 0)

    @staticmethod
    def _share(total: int, i: int, n: int) -> range:
        return range(total * i // n, total * (i + 1) // n)

    def _in_page(self, task: _Task, k: int) -> int:
        return (task.app.index + 1) * _APP_REGION + task.slice_index * _SLICE_STRIDE + k

    def _out_page(self, task: _Task, k: int) -> int:
        kidx = self._kernel_index[task.kernel.name]
        return (task.app.index + 1) * _APP_REGION + (kidx + 1) * _OUTPUT_REGION + task.slice_index * _SLICE_STRIDE + k

    def _translate(self, task: _Task, pages: List[int]) -> int:
        misses = [p for p in pages if tlb_access(self.tlb, p) == "miss"]
        stall = 0
        size = self.platform.miss_batch_size
        for i in range(0, len(misses), size):
            stall += handle_tlb_miss_batch(misses[i:i + size], self.platform.miss_mode, self.platform)
        self.miss_handling_cycles += stall
        self.stats[task.grant.instance_id].miss_handling_cycles += stall
        return stall

    def _transfer(self, task: _Task, pages: List[int], direction: str, then: Callable[[], None]) -> None:
        if not pages:
            then()
            return
        stall = self._translate(task, pages)
        remaining = [len(pages)]
        banks = task.grant.banks

        def page_done(_t):
            remaining[0] -= 1
            if remaining[0] == 0:
                then()

        def issue():
            for n, _page in enumerate(pages):
                dmac = self.interleave.dmac_of(banks[n % len(banks)])
                self.pages_transferred += 1
                self.dma.transfer_page(dmac, direction, page_done)

        self.events.schedule(self.events.now + stall, issue)

    def _pass(self, task: _Task, i: int) -> None:
        plan = task.plan
        n = plan["passes"]
        in_pages = [self._in_page(task, k) for k in self._share(plan["pin"], i, n)]
        out_pages = [self._out_page(task, k) for k in self._share(plan["pout"], i, n)]
        compute = len(self._share(plan["compute"], i, n))

        def after_write():
            if i + 1 < n:
                self._pass(task, i + 1)
            else:
                self._finish(task)

        def after_compute():
            self._transfer(task, out_pages, "write", after_write)

        def after_read():
            self.stats[task.grant.instance_id].compute_cycles += compute
            self.events.schedule(self.events.now + compute, after_compute)

        self._transfer(task, in_pages, "read", after_read)

    def _finish(self, task: _Task) -> None:
        cycles = invalidate_pages(task.plan["pout"], self.coherency, self.platform)
        self.invalidation_cycles += cycles
        self.events.schedule(self.events.now + cycles, self._done, task)

    def _done(self, task: _Task) -> None:
        task.done_at = self.events.now
        self._end = max(self._end, task.done_at)
        for cb in task.on_done:
            cb()
        task.on_done.clear()

    # -- report -----------------------------------------------------------------
    def _report(self) -> PerfReport:
        for st in self.stats.values():
            st.stall_cycles = st.busy_cycles - st.compute_cycles
        return PerfReport(
            total_cycles=self._end,
            acc_clock_hz=self.platform.acc_clock_hz,
            instances=[self.stats[a.instance_id] for a in self.instances],
            tlb_accesses=self.tlb.accesses,
            tlb_misses=self.tlb.misses,
            miss_handling_cycles=self.miss_handling_cycles,
            dmac_bytes=list(self.dma.bytes_moved),
            pages_transferred=self.pages_transferred,
            invalidation_cycles=self.invalidation_cycles,
            tasks_completed=sum(1 for t in self.tasks.values() if t.freed_at is not None),
        )


def run_simulation(spec: AraSpec, topology: CrossbarTopology, interleave: InterleaveMap,
                   workload: Workload, platform: Optional[PlatformModel] = None) -> PerfReport:
    return Simulator(spec, topology, interleave, workload, platform).run()
