"""Kernel descriptors and accelerator API traces.

Trace format: one event per line, whitespace separated::

    <time> <app> <verb> [<kernel> [<size>]]

``time`` is in accelerator cycles, ``verb`` is one of ``reserve``,
``check_reserved``, ``send_param``, ``check_done``, ``free`` or ``run``
(``run`` = reserve + send_param + check_done + free).  ``reserve`` and
``run`` need a kernel name; ``size`` multiplies the kernel's per-task page
counts (default 1).  ``#`` starts a comment.

Each app is a sequential program: it issues at most one task at a time and
must follow reserve -> [check_reserved] -> send_param -> [check_done] -> free.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import TraceError
from .spec_model import AraSpec, expand_instances

VERBS = ("reserve", "check_reserved", "send_param", "check_done", "free", "run")

# Model defaults, not measurements.  A slice of 128x128 4-byte pixels is 16
# pages; gaussian only fetches 4.  Outputs are written as 1-byte-per-pixel
# maps (4 pages).  Compute costs are calibrated so that, on the default
# platform with one app streaming slices through a kernel, less than 40% of
# the accelerator's busy time is spent computing.
SLICE_PAGES = 16
_BUILTIN = (
    # name, ports, pages_in, pages_out, compute cycles per input page
    ("gradient", 6, 16, 4, 160),
    ("segmentation", 8, 16, 4, 160),
    ("rician", 12, 16, 4, 160),
    ("gaussian", 5, 4, 4, 250),
)


@dataclass(frozen=True)
class KernelDescriptor:
    name: str
    port_count: int
    pages_in: int
    pages_out: int
    compute_cycles_per_page: int
    reuse_factor: float = 1.0

    def __post_init__(self):
        if self.port_count < 1:
            raise ValueError(f"{self.name}: port_count must be >= 1")
        if self.pages_in < 0 or self.pages_out < 0:
            raise ValueError(f"{self.name}: page counts must be >= 0")
        if self.compute_cycles_per_page < 0:
            raise ValueError(f"{self.name}: compute_cycles_per_page must be >= 0")
        if not 0 < self.reuse_factor <= 1:
            raise ValueError(f"{self.name}: reuse_factor must be in (0, 1]")

    def task_pages_in(self, size: float = 1.0) -> int:
        """Pages actually fetched, after data reuse."""
        return math.ceil(Fraction(str(self.reuse_factor)) * self._scaled(self.pages_in, size))

    def task_pages_out(self, size: float = 1.0) -> int:
        return self._scaled(self.pages_out, size)

    def task_compute_cycles(self, size: float = 1.0) -> int:
        # reuse cuts traffic, not work
        return self.compute_cycles_per_page * self._scaled(self.pages_in, size)

    def with_reuse(self, reuse_factor: float) -> "KernelDescriptor":
        return replace(self, reuse_factor=reuse_factor)

    @staticmethod
    def _scaled(pages: int, size: float) -> int:
        return math.ceil(Fraction(str(size)) * pages)


def builtin_kernels() -> Dict[str, KernelDescriptor]:
    return {name: KernelDescriptor(name, ports, pin, pout, cpp) for name, ports, pin, pout, cpp in _BUILTIN}


def merge_kernel_overrides(base: Mapping[str, KernelDescriptor], overrides: Mapping[str, dict]) -> Dict[str, KernelDescriptor]:
    """Apply ``{name: {field: value}}`` on top of ``base``; unknown names must be complete."""
    out = dict(base)
    for name, fields in overrides.items():
        if name in out:
            out[name] = replace(out[name], **fields)
        else:
            out[name] = KernelDescriptor(name=name, **fields)
    return out


def load_kernel_config(path, base: Optional[Mapping[str, KernelDescriptor]] = None) -> Dict[str, KernelDescriptor]:
    """Read a JSON file ``{"kernels": {name: {field: value}}}`` over the builtins."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return merge_kernel_overrides(base if base is not None else builtin_kernels(), data.get("kernels", {}))


def with_reuse(kernels: Mapping[str, KernelDescriptor], reuse_factor: float) -> Dict[str, KernelDescriptor]:
    return {name: k.with_reuse(reuse_factor) for name, k in kernels.items()}


@dataclass(frozen=True)
class TraceEvent:
    time: int
    app: str
    verb: str
    kernel: Optional[str] = None
    size: float = 1.0
    line: Optional[int] = None

    def to_line(self) -> str:
        parts = [str(self.time), self.app, self.verb]
        if self.kernel is not None:
            parts.append(self.kernel)
            if self.size != 1.0:
                parts.append(_fmt_size(self.size))
        return " ".join(parts)


def _fmt_size(size: float) -> str:
    return str(int(size)) if float(size).is_integer() else repr(float(size))


@dataclass(frozen=True)
class Workload:
    events: Tuple[TraceEvent, ...] = ()
    kernels: Dict[str, KernelDescriptor] = field(default_factory=builtin_kernels)

    def __len__(self):
        return len(self.events)

    def to_text(self) -> str:
        return "".join(e.to_line() + "\n" for e in self.events)

    def with_kernels(self, kernels: Mapping[str, KernelDescriptor]) -> "Workload":
        return replace(self, kernels=dict(kernels))

    def apps(self) -> List[str]:
        seen: Dict[str, None] = {}
        for e in self.events:
            seen.setdefault(e.app, None)
        return list(seen)


def _parse_line(raw: str, lineno: int) -> Optional[TraceEvent]:
    text = raw.split("#", 1)[0].strip()
    if not text:
        return None
    parts = text.split()
    if len(parts) < 3 or len(parts) > 5:
        raise TraceError(f"expected '<time> <app> <verb> [kernel [size]]', got {text!r}", line=lineno)
    time_s, app, verb = parts[:3]
    try:
        time = int(time_s)
    except ValueError:
        raise TraceError(f"time {time_s!r} is not an integer", line=lineno) from None
    if time < 0:
        raise TraceError(f"negative time {time}", line=lineno)
    if verb not in VERBS:
        raise TraceError(f"unknown verb {verb!r}", line=lineno)
    kernel = parts[3] if len(parts) > 3 else None
    size = 1.0
    if len(parts) > 4:
        try:
            size = float(parts[4])
        except ValueError:
            raise TraceError(f"size {parts[4]!r} is not a number", line=lineno) from None
        if size <= 0:
            raise TraceError(f"size must be positive, got {size}", line=lineno)
    if verb in ("reserve", "run") and kernel is None:
        raise TraceError(f"{verb} needs a kernel name", line=lineno)
    return TraceEvent(time, app, verb, kernel, size, lineno)


def validate_protocol(events: Iterable[TraceEvent]) -> None:
    """Raise TraceError unless every app follows the accelerator API protocol."""
    state: Dict[str, str] = {}
    kernel_of: Dict[str, str] = {}
    last: Dict[str, TraceEvent] = {}
    allowed = {
        "run": ("idle",),
        "reserve": ("idle",),
        "check_reserved": ("reserved",),
        "send_param": ("reserved",),
        "check_done": ("started",),
        "free": ("started",),
    }
    after = {"run": "idle", "reserve": "reserved", "check_reserved": "reserved",
             "send_param": "started", "check_done": "started", "free": "idle"}
    for ev in events:
        cur = state.get(ev.app, "idle")
        if cur not in allowed[ev.verb]:
            raise TraceError(f"app {ev.app}: {ev.verb} not allowed while {cur}", line=ev.line)
        if ev.verb == "reserve":
            kernel_of[ev.app] = ev.kernel
        elif ev.verb != "run" and ev.kernel is not None and ev.kernel != kernel_of.get(ev.app):
            raise TraceError(
                f"app {ev.app}: {ev.verb} names kernel {ev.kernel!r} but {kernel_of.get(ev.app)!r} is reserved",
                line=ev.line,
            )
        state[ev.app] = after[ev.verb]
        last[ev.app] = ev
    for app, cur in state.items():
        if cur != "idle":
            raise TraceError(f"app {app}: trace ends with a task still {cur} (missing free)", line=last[app].line)


def load_trace(text: str, kernels: Optional[Mapping[str, KernelDescriptor]] = None) -> Workload:
    events = [ev for n, raw in enumerate(text.splitlines(), 1) if (ev := _parse_line(raw, n)) is not None]
    events.sort(key=lambda e: e.time)
    validate_protocol(events)
    return Workload(tuple(events), dict(kernels) if kernels is not None else builtin_kernels())


def read_trace(path, kernels=None) -> Workload:
    with open(path, encoding="utf-8") as fh:
        return load_trace(fh.read(), kernels)


# ---------------------------------------------------------------------------
# synthetic workloads


@dataclass(frozen=True)
class Single:
    kernel: str
    size: float = 1.0


@dataclass(frozen=True)
class AllParallel:
    repeat: int = 1


@dataclass(frozen=True)
class Poisson:
    rate: float  # arrivals per accelerator cycle
    n: int
    seed: int = 0


@dataclass(frozen=True)
class Stream:
    """Every app sweeps each kernel over ``slices`` consecutive slices."""

    slices: int
    kernels: Optional[Tuple[str, ...]] = None
    apps: int = 1


Pattern = Union[Single, AllParallel, Poisson, Stream]


def parse_pattern(text: str, seed: int = 0) -> Pattern:
    """CLI form: ``single:<kernel>``, ``all_parallel[:repeat]``,
    ``poisson:<rate>:<n>``, ``stream:<slices>[:<apps>]``."""
    kind, _, rest = text.partition(":")
    args = rest.split(":") if rest else []
    try:
        if kind == "single" and len(args) == 1:
            return Single(args[0])
        if kind == "all_parallel" and len(args) <= 1:
            return AllParallel(int(args[0]) if args else 1)
        if kind == "poisson" and len(args) == 2:
            return Poisson(float(args[0]), int(args[1]), seed)
        if kind == "stream" and 1 <= len(args) <= 2:
            return Stream(int(args[0]), apps=int(args[1]) if len(args) > 1 else 1)
    except ValueError:
        pass
    raise ValueError(f"cannot parse workload pattern {text!r}")


def synth_workload(pattern: Pattern, spec: AraSpec, kernels: Optional[Mapping[str, KernelDescriptor]] = None) -> Workload:
    kernels = dict(kernels) if kernels is not None else builtin_kernels()
    events: List[TraceEvent] = []
    if isinstance(pattern, Single):
        events.append(TraceEvent(0, "app0", "run", pattern.kernel, pattern.size))
    elif isinstance(pattern, AllParallel):
        for inst in expand_instances(spec):
            for _ in range(pattern.repeat):
                events.append(TraceEvent(0, f"app{inst.instance_id}", "run", inst.type_name))
    elif isinstance(pattern, Poisson):
        rng = random.Random(pattern.seed)
        names = [t.name for t in spec.acc_types]
        t = 0.0
        for n in range(pattern.n):
            t += rng.expovariate(pattern.rate)
            events.append(TraceEvent(int(t), f"app{n}", "run", rng.choice(names)))
    elif isinstance(pattern, Stream):
        names = pattern.kernels or tuple(t.name for t in spec.acc_types)
        for a in range(pattern.apps):
            for name in names:
                for _ in range(pattern.slices):
                    events.append(TraceEvent(0, f"app{a}", "run", name))
    else:
        raise TypeError(f"unknown workload pattern {pattern!r}")
    return Workload(tuple(events), kernels)
