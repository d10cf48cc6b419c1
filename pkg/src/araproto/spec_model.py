"""ARA specification file: parsing, validation and instance expansion.

The specification file is a small XML document with a ``<system>`` root::

    <system>
    <ACCs>
      <acc type="gradient" num="2" num_params="5">
        <port size="16K" num="6"/>
      </acc>
    </ACCs>
    <SharedBuffers size="16K" num="32" numDMACs="4"/>
    <Interconnects>
      <ACCS_to_Buffers type="crossbar" connectivity="3" auto="1"/>
      <Buffers_to_DMACs type="interleaved" use="1" auto="1"/>
    </Interconnects>
    <IOMMU>
      <TLB size="8K" evict="LRU"/>
    </IOMMU>
    <CoherentCache use="0" />
    <AccFrequency hz="100MHz" />
    </system>

Units: ``K``/``M``/``G`` suffixes multiply by powers of 1024 for byte sizes
and entry counts, and by powers of 1000 for frequencies.  The TLB ``size``
attribute is a number of *entries*, not bytes.  ``Buffers_to_DMACs`` takes
an optional ``strategy`` attribute (``intra_acc`` or ``inter_acc``,
default ``intra_acc``).
"""

from __future__ import annotations

import json
import re
import warnings
import xml.etree.ElementTree as ET
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .errors import SpecParseError, SpecSchemaError, SpecValueError

PAGE_BYTES = 4096
DEFAULT_BUFFER_BYTES = 16 * 1024
DEFAULT_TLB_ENTRIES = 8 * 1024
DEFAULT_ACC_HZ = 100_000_000

STRATEGIES = ("intra_acc", "inter_acc")
_STRATEGY_ALIASES = {"intra": "intra_acc", "inter": "inter_acc"}


class UnknownAttributeWarning(UserWarning):
    """Emitted for attributes or elements the parser does not recognise."""


@dataclass(frozen=True)
class AccTypeSpec:
    name: str
    num_instances: int = 1
    num_params: int = 0
    port_count: int = 1
    port_buffer_size_bytes: int = DEFAULT_BUFFER_BYTES


@dataclass(frozen=True)
class AccInstance:
    instance_id: int
    type_name: str
    port_count: int


@dataclass(frozen=True)
class SharedBuffers:
    size_bytes: int = DEFAULT_BUFFER_BYTES
    count: int = 1
    num_dmacs: int = 1


@dataclass(frozen=True)
class AccToBuf:
    connectivity: int
    kind: str = "crossbar"
    auto: bool = True


@dataclass(frozen=True)
class BufToDmac:
    kind: str = "interleaved"
    strategy: str = "intra_acc"
    auto: bool = True
    use: bool = True


@dataclass(frozen=True)
class Interconnect:
    acc_to_buf: AccToBuf
    buf_to_dmac: BufToDmac = field(default_factory=BufToDmac)


@dataclass(frozen=True)
class Iommu:
    tlb_entries: int = DEFAULT_TLB_ENTRIES
    evict_policy: str = "LRU"


@dataclass(frozen=True)
class AraSpec:
    acc_types: Tuple[AccTypeSpec, ...]
    shared_buffers: SharedBuffers
    interconnect: Interconnect
    iommu: Iommu = field(default_factory=Iommu)
    coherent_cache: bool = False
    acc_frequency_hz: int = DEFAULT_ACC_HZ

    @property
    def connectivity(self) -> int:
        return self.interconnect.acc_to_buf.connectivity

    @property
    def strategy(self) -> str:
        return self.interconnect.buf_to_dmac.strategy

    @property
    def num_instances(self) -> int:
        return sum(t.num_instances for t in self.acc_types)

    def acc_type(self, name: str) -> AccTypeSpec:
        for t in self.acc_types:
            if t.name == name:
                return t
        raise KeyError(name)

    # Convenience for design-space sweeps.
    def with_connectivity(self, c: int) -> "AraSpec":
        ic = self.interconnect
        return replace(self, interconnect=replace(ic, acc_to_buf=replace(ic.acc_to_buf, connectivity=c)))

    def with_strategy(self, strategy: str) -> "AraSpec":
        ic = self.interconnect
        return replace(self, interconnect=replace(ic, buf_to_dmac=replace(ic.buf_to_dmac, strategy=strategy)))

    def with_tlb_entries(self, entries: int) -> "AraSpec":
        return replace(self, iommu=replace(self.iommu, tlb_entries=entries))

    def with_buffers(self, count: int) -> "AraSpec":
        return replace(self, shared_buffers=replace(self.shared_buffers, count=count))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "AraSpec":
        ic = d["interconnect"]
        return cls(
            acc_types=tuple(AccTypeSpec(**t) for t in d["acc_types"]),
            shared_buffers=SharedBuffers(**d["shared_buffers"]),
            interconnect=Interconnect(
                acc_to_buf=AccToBuf(**ic["acc_to_buf"]),
                buf_to_dmac=BufToDmac(**ic["buf_to_dmac"]),
            ),
            iommu=Iommu(**d["iommu"]),
            coherent_cache=bool(d["coherent_cache"]),
            acc_frequency_hz=int(d["acc_frequency_hz"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "AraSpec":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# attribute values

_NUM_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*([KMG]?)\s*(?:I?B)?\s*$", re.IGNORECASE)
_HZ_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*([KMG]?)\s*(?:HZ)?\s*$", re.IGNORECASE)

_BINARY = {"": 1, "K": 1 << 10, "M": 1 << 20, "G": 1 << 30}
_DECIMAL = {"": 1, "K": 10**3, "M": 10**6, "G": 10**9}


def parse_size(text: str, what: str = "value") -> int:
    """'16K' -> 16384.  Used for byte sizes and entry counts."""
    m = _NUM_RE.match(str(text))
    if not m:
        raise SpecValueError(f"{what}: cannot interpret {text!r} as a number")
    value = float(m.group(1)) * _BINARY[m.group(2).upper()]
    if value != int(value):
        raise SpecValueError(f"{what}: {text!r} is not an integer")
    return int(value)


def parse_hz(text: str, what: str = "hz") -> int:
    """'100MHz' -> 100000000."""
    m = _HZ_RE.match(str(text))
    if not m:
        raise SpecValueError(f"{what}: cannot interpret {text!r} as a frequency")
    value = float(m.group(1)) * _DECIMAL[m.group(2).upper()]
    if value != int(value):
        raise SpecValueError(f"{what}: {text!r} is not a whole number of Hz")
    return int(value)


def _parse_flag(text: str, what: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise SpecValueError(f"{what}: cannot interpret {text!r} as a flag")


_KNOWN_ATTRS = {
    "acc": {"type", "num", "num_params"},
    "port": {"size", "num"},
    "SharedBuffers": {"size", "num", "numDMACs"},
    "ACCS_to_Buffers": {"type", "connectivity", "auto"},
    "Buffers_to_DMACs": {"type", "use", "auto", "strategy"},
    "TLB": {"size", "evict"},
    "CoherentCache": {"use"},
    "AccFrequency": {"hz"},
}
_KNOWN_CHILDREN = {
    "system": {"ACCs", "SharedBuffers", "Interconnects", "IOMMU", "CoherentCache", "AccFrequency"},
    "ACCs": {"acc"},
    "acc": {"port"},
    "Interconnects": {"ACCS_to_Buffers", "Buffers_to_DMACs"},
    "IOMMU": {"TLB"},
}


def _check_unknown(elem: ET.Element) -> None:
    known = _KNOWN_ATTRS.get(elem.tag, set())
    for attr in elem.attrib:
        if attr not in known:
            warnings.warn(f"<{elem.tag}>: unknown attribute {attr!r} ignored", UnknownAttributeWarning, stacklevel=3)
    allowed = _KNOWN_CHILDREN.get(elem.tag, set())
    for child in elem:
        if child.tag not in allowed:
            warnings.warn(f"<{elem.tag}>: unknown element <{child.tag}> ignored", UnknownAttributeWarning, stacklevel=3)


def _required(elem: ET.Element, attr: str) -> str:
    value = elem.get(attr)
    if value is None:
        raise SpecSchemaError(elem.tag, f"<{elem.tag}> is missing required attribute {attr!r}")
    return value


def _section(root: ET.Element, tag: str) -> ET.Element:
    elem = root.find(tag)
    if elem is None:
        raise SpecSchemaError(tag)
    return elem


def _parse_acc(elem: ET.Element) -> AccTypeSpec:
    _check_unknown(elem)
    name = _required(elem, "type")
    ports = elem.findall("port")
    if not ports:
        raise SpecSchemaError("port", f"<acc type={name!r}> declares no <port>")
    port_count = 0
    port_size = 0
    for p in ports:
        _check_unknown(p)
        port_count += parse_size(_required(p, "num"), f"{name}.port.num")
        port_size = max(port_size, parse_size(p.get("size", str(DEFAULT_BUFFER_BYTES)), f"{name}.port.size"))
    return AccTypeSpec(
        name=name,
        num_instances=parse_size(elem.get("num", "1"), f"{name}.num"),
        num_params=parse_size(elem.get("num_params", "0"), f"{name}.num_params"),
        port_count=port_count,
        port_buffer_size_bytes=port_size,
    )


def parse_spec(text: str) -> AraSpec:
    """Parse the XML text of an ARA specification file."""
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        line = exc.position[0] if getattr(exc, "position", None) else None
        raise SpecParseError(f"malformed XML: {exc}", line=line) from None
    if root.tag != "system":
        raise SpecSchemaError("system", f"root element must be <system>, got <{root.tag}>")
    _check_unknown(root)

    accs = _section(root, "ACCs")
    _check_unknown(accs)
    acc_types = tuple(_parse_acc(e) for e in accs.findall("acc"))
    if not acc_types:
        raise SpecSchemaError("acc", "<ACCs> declares no <acc>")

    sb = _section(root, "SharedBuffers")
    _check_unknown(sb)
    shared = SharedBuffers(
        size_bytes=parse_size(sb.get("size", str(DEFAULT_BUFFER_BYTES)), "SharedBuffers.size"),
        count=parse_size(_required(sb, "num"), "SharedBuffers.num"),
        num_dmacs=parse_size(sb.get("numDMACs", "1"), "SharedBuffers.numDMACs"),
    )

    ics = _section(root, "Interconnects")
    _check_unknown(ics)
    a2b = _section(ics, "ACCS_to_Buffers")
    _check_unknown(a2b)
    kind = a2b.get("type", "crossbar")
    if kind != "crossbar":
        raise SpecValueError(f"ACCS_to_Buffers.type: unsupported kind {kind!r} (only 'crossbar')")
    acc_to_buf = AccToBuf(
        connectivity=parse_size(_required(a2b, "connectivity"), "ACCS_to_Buffers.connectivity"),
        kind=kind,
        auto=_parse_flag(a2b.get("auto", "1"), "ACCS_to_Buffers.auto"),
    )
    b2d = ics.find("Buffers_to_DMACs")
    if b2d is None:
        buf_to_dmac = BufToDmac()
    else:
        _check_unknown(b2d)
        bkind = b2d.get("type", "interleaved")
        if bkind != "interleaved":
            raise SpecValueError(f"Buffers_to_DMACs.type: unsupported kind {bkind!r} (only 'interleaved')")
        strategy = b2d.get("strategy", "intra_acc")
        strategy = _STRATEGY_ALIASES.get(strategy, strategy)
        if strategy not in STRATEGIES:
            raise SpecValueError(f"Buffers_to_DMACs.strategy: expected one of {STRATEGIES}, got {strategy!r}")
        buf_to_dmac = BufToDmac(
            kind=bkind,
            strategy=strategy,
            auto=_parse_flag(b2d.get("auto", "1"), "Buffers_to_DMACs.auto"),
            use=_parse_flag(b2d.get("use", "1"), "Buffers_to_DMACs.use"),
        )

    iommu = Iommu()
    iommu_elem = root.find("IOMMU")
    if iommu_elem is not None:
        _check_unknown(iommu_elem)
        tlb = iommu_elem.find("TLB")
        if tlb is not None:
            _check_unknown(tlb)
            evict = tlb.get("evict", "LRU")
            if evict.upper() != "LRU":
                raise SpecValueError(f"TLB.evict: only LRU is supported, got {evict!r}")
            iommu = Iommu(tlb_entries=parse_size(tlb.get("size", str(DEFAULT_TLB_ENTRIES)), "TLB.size"), evict_policy="LRU")

    coherent = False
    cc = root.find("CoherentCache")
    if cc is not None:
        _check_unknown(cc)
        coherent = _parse_flag(cc.get("use", "0"), "CoherentCache.use")

    hz = DEFAULT_ACC_HZ
    freq = root.find("AccFrequency")
    if freq is not None:
        _check_unknown(freq)
        hz = parse_hz(freq.get("hz", str(DEFAULT_ACC_HZ)), "AccFrequency.hz")

    return AraSpec(
        acc_types=acc_types,
        shared_buffers=shared,
        interconnect=Interconnect(acc_to_buf=acc_to_buf, buf_to_dmac=buf_to_dmac),
        iommu=iommu,
        coherent_cache=coherent,
        acc_frequency_hz=hz,
    )


def load_spec(path) -> AraSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())


def _flag(b: bool) -> str:
    return "1" if b else "0"


def serialize_spec(spec: AraSpec) -> str:
    """Render an AraSpec back into specification-file XML."""
    root = ET.Element("system")
    accs = ET.SubElement(root, "ACCs")
    for t in spec.acc_types:
        acc = ET.SubElement(accs, "acc", type=t.name, num=str(t.num_instances), num_params=str(t.num_params))
        ET.SubElement(acc, "port", size=str(t.port_buffer_size_bytes), num=str(t.port_count))
    sb = spec.shared_buffers
    ET.SubElement(root, "SharedBuffers", size=str(sb.size_bytes), num=str(sb.count), numDMACs=str(sb.num_dmacs))
    ics = ET.SubElement(root, "Interconnects")
    a2b = spec.interconnect.acc_to_buf
    ET.SubElement(ics, "ACCS_to_Buffers", type=a2b.kind, connectivity=str(a2b.connectivity), auto=_flag(a2b.auto))
    b2d = spec.interconnect.buf_to_dmac
    ET.SubElement(
        ics, "Buffers_to_DMACs", type=b2d.kind, use=_flag(b2d.use), auto=_flag(b2d.auto), strategy=b2d.strategy
    )
    iommu = ET.SubElement(root, "IOMMU")
    ET.SubElement(iommu, "TLB", size=str(spec.iommu.tlb_entries), evict=spec.iommu.evict_policy)
    ET.SubElement(root, "CoherentCache", use=_flag(spec.coherent_cache))
    ET.SubElement(root, "AccFrequency", hz=str(spec.acc_frequency_hz))
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def codes(self) -> List[str]:
        return [v.code for v in self.violations]

    def __str__(self) -> str:
        if self.ok:
            return "valid"
        return "\n".join(f"{v.code}: {v.message}" for v in self.violations)


def validate_spec(spec: AraSpec, page_bytes: int = PAGE_BYTES) -> ValidationReport:
    """Collect every invariant breach in ``spec``; never raises."""
    out: List[Violation] = []

    def bad(code, message):
        out.append(Violation(code, message))

    names = [t.name for t in spec.acc_types]
    for name in sorted({n for n in names if names.count(n) > 1}):
        bad("duplicate type", f"accelerator type {name!r} declared more than once")
    for t in spec.acc_types:
        if t.num_instances < 1:
            bad("zero instances", f"{t.name}: num must be >= 1")
        if t.port_count < 1:
            bad("zero ports", f"{t.name}: port count must be >= 1")
        if t.num_params < 0:
            bad("negative params", f"{t.name}: num_params must be >= 0")
        if t.port_buffer_size_bytes < 1:
            bad("zero port size", f"{t.name}: port size must be positive")

    total = spec.num_instances
    c = spec.connectivity
    if c < 1:
        bad("connectivity below 1", f"connectivity {c} must be >= 1")
    elif c > total:
        bad("connectivity exceeds instances", f"connectivity {c} exceeds the {total} accelerator instances")

    sb = spec.shared_buffers
    if sb.count < 1:
        bad("zero buffers", "SharedBuffers num must be >= 1")
    if sb.num_dmacs < 1:
        bad("zero dmacs", "numDMACs must be >= 1")
    if sb.size_bytes < page_bytes or sb.size_bytes % page_bytes:
        bad("not page-multiple", f"buffer size {sb.size_bytes} is not a positive multiple of the {page_bytes}-byte page")
    if spec.iommu.tlb_entries < 1:
        bad("zero tlb entries", "TLB size must be >= 1 entry")
    if spec.iommu.evict_policy != "LRU":
        bad("evict policy", f"unsupported eviction policy {spec.iommu.evict_policy!r}")
    if spec.interconnect.buf_to_dmac.strategy not in STRATEGIES:
        bad("strategy", f"unknown interleave strategy {spec.interconnect.buf_to_dmac.strategy!r}")
    if spec.acc_frequency_hz < 1:
        bad("frequency", "accelerator frequency must be positive")
    return ValidationReport(out)


def expand_instances(spec: AraSpec) -> List[AccInstance]:
    """One AccInstance per duplication, in declaration order."""
    out: List[AccInstance] = []
    for t in spec.acc_types:
        for _ in range(t.num_instances):
            out.append(AccInstance(len(out), t.name, t.port_count))
    return out


EXAMPLE_SPEC_XML = """\
<system>
<ACCs>
  <acc type="gradient" num="2" num_params="5">
    <port size="16K" num="6"/>
  </acc>
  <acc type="segmentation" num="1" num_params="13">
    <port size="16K" num="8"/>
  </acc>
  <acc type="rician" num="1" num_params="7">
    <port size="16K" num="12"/>
  </acc>
  <acc type="gaussian" num="1" num_params="7">
    <port size="16K" num="5"/>
  </acc>
</ACCs>
<SharedBuffers size="16K" num="32" numDMACs="4"/>
<Interconnects>
  <ACCS_to_Buffers type="crossbar" connectivity="3" auto="1"/>
  <Buffers_to_DMACs type="interleaved" use="1" auto="1"/>
</Interconnects>
<IOMMU>
  <TLB size="8K" evict="LRU"/>
</IOMMU>
<CoherentCache use="0" />
<AccFrequency hz="100MHz" />
</system>
"""
