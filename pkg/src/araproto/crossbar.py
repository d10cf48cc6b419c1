"""Partial crossbar between accelerator ports and shared buffer banks.

Construction: instances are ranked by port count (descending, ties broken by
instance id).  The ``c`` highest-ranked instances get dedicated banks, one
bank per port, laid out back to back from bank 0.  Every port of each
remaining instance is wired to ``c`` banks, one inside the dedicated range of
each of the top ``c`` instances.  Within a range the bank is chosen
round-robin: port ``j`` of the ``k``-th remaining instance lands on
``(offset_k + j) mod range_size`` where ``offset_k`` is the running total of
ports of the remaining instances before it.  Because a remaining instance
never has more ports than any top instance, any ``c`` simultaneously active
instances can be given disjoint banks.

Feasibility is never taken on trust: ``check_feasibility`` enumerates every
subset of at most ``c`` instances and runs a maximum matching on it.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, replace
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .errors import CapacityError, ContractError
from .matching import max_matching
from .spec_model import AccInstance

PortKey = Tuple[int, int]

ORACLE_LIMIT = 16


@dataclass(frozen=True)
class CrossbarTopology:
    num_banks: int
    connectivity_c: int
    port_map: Dict[PortKey, FrozenSet[int]]
    provenance: str = "constructed"
    added_cross_points: int = 0

    def instance_ids(self) -> List[int]:
        return sorted({i for i, _ in self.port_map})

    def ports_of(self, instance_id: int) -> List[PortKey]:
        return sorted(k for k in self.port_map if k[0] == instance_id)

    def port_count(self, instance_id: int) -> int:
        return len(self.ports_of(instance_id))

    def banks_of(self, instance_id: int) -> FrozenSet[int]:
        out = set()
        for key in self.ports_of(instance_id):
            out |= self.port_map[key]
        return frozenset(out)

    def wired_banks(self) -> List[int]:
        out = set()
        for banks in self.port_map.values():
            out |= banks
        return sorted(out)

    def to_dict(self) -> dict:
        return {
            "num_banks": self.num_banks,
            "connectivity": self.connectivity_c,
            "provenance": self.provenance,
            "added_cross_points": self.added_cross_points,
            "port_map": [[i, p, sorted(b)] for (i, p), b in sorted(self.port_map.items())],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CrossbarTopology":
        return cls(
            num_banks=int(d["num_banks"]),
            connectivity_c=int(d["connectivity"]),
            port_map={(int(i), int(p)): frozenset(int(b) for b in banks) for i, p, banks in d["port_map"]},
            provenance=d.get("provenance", "constructed"),
            added_cross_points=int(d.get("added_cross_points", 0)),
        )


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    violating_subset: Optional[FrozenSet[int]] = None
    checked_subsets: int = 0


def buffer_demand(instances: Sequence[AccInstance], c: int) -> int:
    """Worst-case number of banks needed by any ``c`` simultaneously active instances."""
    if not 1 <= c <= len(instances):
        raise ContractError(f"connectivity c={c} must be within 1..{len(instances)}")
    return sum(sorted((a.port_count for a in instances), reverse=True)[:c])


def _rank(instances: Sequence[AccInstance]) -> List[AccInstance]:
    return sorted(instances, key=lambda a: (-a.port_count, a.instance_id))


def synthesize_crossbar(instances: Sequence[AccInstance], num_buffers: int, c: int) -> CrossbarTopology:
    demand = buffer_demand(instances, c)
    if num_buffers < demand:
        raise CapacityError(
            f"{num_buffers} buffers cannot serve connectivity {c}: buffer demand is {demand}",
            demand=demand,
            available=num_buffers,
        )
    ranked = _rank(instances)
    top, rest = ranked[:c], ranked[c:]

    port_map: Dict[PortKey, FrozenSet[int]] = {}
    ranges = []
    start = 0
    for inst in top:
        for j in range(inst.port_count):
            port_map[(inst.instance_id, j)] = frozenset([start + j])
        ranges.append((start, inst.port_count))
        start += inst.port_count

    offset = 0
    for inst in rest:
        for j in range(inst.port_count):
            port_map[(inst.instance_id, j)] = frozenset(s + (offset + j) % size for s, size in ranges)
        offset += inst.port_count

    topo = CrossbarTopology(num_buffers, c, dict(sorted(port_map.items())))
    if len(instances) <= ORACLE_LIMIT:
        report = check_feasibility(topo, c)
        if not report.feasible:
            topo = repair_topology(topo, report)
    return topo


def cross_point_count(topology: CrossbarTopology) -> int:
    return sum(len(b) for b in topology.port_map.values())


def private_buffer_topology(instances: Sequence[AccInstance]) -> CrossbarTopology:
    """Every port gets its own bank; no sharing at all."""
    port_map: Dict[PortKey, FrozenSet[int]] = {}
    bank = 0
    for inst in sorted(instances, key=lambda a: a.instance_id):
        for j in range(inst.port_count):
            port_map[(inst.instance_id, j)] = frozenset([bank])
            bank += 1
    return CrossbarTopology(bank, len(instances), port_map)


def _subset_adj(topology: CrossbarTopology, subset: Iterable[int], ports_by_inst) -> Dict[PortKey, List[int]]:
    adj = {}
    for i in subset:
        for key in ports_by_inst[i]:
            adj[key] = sorted(topology.port_map[key])
    return adj


def _ports_by_instance(topology: CrossbarTopology) -> Dict[int, List[PortKey]]:
    out: Dict[int, List[PortKey]] = {}
    for key in sorted(topology.port_map):
        out.setdefault(key[0], []).append(key)
    return out


def subset_feasible(topology: CrossbarTopology, subset: Iterable[int]) -> bool:
    """Can every port of ``subset`` be given a distinct bank at once?"""
    adj = _subset_adj(topology, subset, _ports_by_instance(topology))
    return len(max_matching(adj)) == len(adj)


def check_feasibility(topology: CrossbarTopology, c: int, limit: int = ORACLE_LIMIT) -> FeasibilityReport:
    """Exhaustively check every subset of at most ``c`` instances.

    Subsets are visited by size, then lexicographically, so the reported
    violation is a smallest witness.
    """
    ports = _ports_by_instance(topology)
    ids = sorted(ports)
    if len(ids) > limit:
        raise ContractError(
            f"{len(ids)} instances exceed the exhaustive oracle limit of {limit}; "
            "use check_feasibility_sampled instead"
        )
    checked = 0
    for size in range(1, min(c, len(ids)) + 1):
        for subset in itertools.combinations(ids, size):
            checked += 1
            adj = _subset_adj(topology, subset, ports)
            if len(max_matching(adj)) < len(adj):
                return FeasibilityReport(False, frozenset(subset), checked)
    return FeasibilityReport(True, None, checked)


def check_feasibility_sampled(topology: CrossbarTopology, c: int, samples: int = 1000, seed: int = 0) -> FeasibilityReport:
    """Randomised variant for systems too large for exhaustive enumeration.

    Only the full-size subsets are sampled: a subset is feasible whenever a
    superset of it is.
    """
    ports = _ports_by_instance(topology)
    ids = sorted(ports)
    size = min(c, len(ids))
    rng = random.Random(seed)
    for n in range(1, samples + 1):
        subset = tuple(sorted(rng.sample(ids, size)))
        adj = _subset_adj(topology, subset, ports)
        if len(max_matching(adj)) < len(adj):
            return FeasibilityReport(False, frozenset(subset), n)
    return FeasibilityReport(True, None, samples)


def repair_topology(topology: CrossbarTopology, report: FeasibilityReport) -> CrossbarTopology:
    """Add cross points one at a time until the topology passes the oracle."""
    if report.feasible:
        return topology
    c = topology.connectivity_c
    ports = _ports_by_instance(topology)
    counts = sorted((len(v) for v in ports.values()), reverse=True)
    demand = sum(counts[: min(c, len(counts))])
    if demand > topology.num_banks:
        raise CapacityError(
            f"no crossbar over {topology.num_banks} banks can serve connectivity {c}: buffer demand is {demand}",
            demand=demand,
            available=topology.num_banks,
        )

    port_map = dict(topology.port_map)
    added = 0
    while not report.feasible:
        adj = {k: sorted(port_map[k]) for i in sorted(report.violating_subset) for k in ports[i]}
        matched = max_matching(adj)
        unmatched = [k for k in adj if k not in matched]
        port = min(unmatched, key=lambda k: (len(adj[k]), k))
        base = len(matched)
        for bank in range(topology.num_banks):
            if bank in port_map[port]:
                continue
            trial = dict(adj)
            trial[port] = adj[port] + [bank]
            if len(max_matching(trial)) > base:
                break
        else:  # pragma: no cover - ruled out by the capacity check above
            raise CapacityError("repair could not find a bank restoring a matching")
        port_map[port] = port_map[port] | {bank}
        added += 1
        current = replace(topology, port_map=dict(sorted(port_map.items())), provenance="repaired", added_cross_points=topology.added_cross_points + added)
        report = check_feasibility(current, c)
    return current
