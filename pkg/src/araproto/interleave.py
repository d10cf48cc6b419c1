"""Static bank -> DMAC interleaved network.

Two strategies are supported:

``intra_acc``
    Spread the banks of each accelerator instance over the DMACs
    round-robin in port order, so one instance's simultaneous page requests
    hit as many DMACs as possible.
``inter_acc``
    Give each instance one DMAC (round-robin over instance ids); every bank
    of that instance goes through it.

A bank reachable from several instances follows its owner: the instance
that has it as a dedicated (single-bank) port, or failing that the lowest
instance id that reaches it.
"""

from dataclasses import dataclass
from typing import Dict, Iterable, Sequence

from .crossbar import CrossbarTopology
from .errors import ContractError
from .spec_model import STRATEGIES


@dataclass(frozen=True)
class InterleaveMap:
    strategy: str
    bank_to_dmac: Dict[int, int]
    num_dmacs: int

    def dmac_of(self, bank: int) -> int:
        try:
            return self.bank_to_dmac[bank]
        except KeyError:
            raise ContractError(f"bank {bank} is not wired to any DMAC") from None

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "num_dmacs": self.num_dmacs,
            "bank_to_dmac": [[b, d] for b, d in sorted(self.bank_to_dmac.items())],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InterleaveMap":
        return cls(
            strategy=d["strategy"],
            bank_to_dmac={int(b): int(m) for b, m in d["bank_to_dmac"]},
            num_dmacs=int(d["num_dmacs"]),
        )


def bank_owners(topology: CrossbarTopology) -> Dict[int, int]:
    owners: Dict[int, int] = {}
    # dedicated ports first
    for (inst, _), banks in sorted(topology.port_map.items()):
        if len(banks) == 1:
            (bank,) = banks
            owners.setdefault(bank, inst)
    for (inst, _), banks in sorted(topology.port_map.items()):
        for bank in banks:
            owners.setdefault(bank, inst)
    return owners


def synthesize_interleave(topology: CrossbarTopology, num_dmacs: int, strategy: str = "intra_acc") -> InterleaveMap:
    if num_dmacs < 1:
        raise ContractError(f"num_dmacs must be >= 1, got {num_dmacs}")
    if strategy not in STRATEGIES:
        raise ContractError(f"unknown interleave strategy {strategy!r}; expected one of {STRATEGIES}")
    owners = bank_owners(topology)
    mapping: Dict[int, int] = {}
    if strategy == "intra_acc":
        for inst in topology.instance_ids():
            slot = 0
            for key in topology.ports_of(inst):
                for bank in sorted(topology.port_map[key]):
                    if owners[bank] == inst and bank not in mapping:
                        mapping[bank] = slot % num_dmacs
                        slot += 1
    else:
        dmac_of_inst = {inst: n % num_dmacs for n, inst in enumerate(topology.instance_ids())}
        for bank, inst in owners.items():
            mapping[bank] = dmac_of_inst[inst]
    return InterleaveMap(strategy, dict(sorted(mapping.items())), num_dmacs)


def dmac_load_profile(imap: InterleaveMap, batch: Sequence[int]) -> Dict[int, int]:
    """Histogram of a batch of bank requests over DMACs.

    Every DMAC appears in the result (with zero if idle) unless the batch is
    empty, in which case the histogram is empty.
    """
    if not batch:
        return {}
    counts = {d: 0 for d in range(imap.num_dmacs)}
    for bank in batch:
        counts[imap.dmac_of(bank)] += 1
    return counts


def imbalance(profile: Dict[int, int]) -> float:
    """max/min request count across DMACs, with min clamped to 1."""
    if not profile:
        return 1.0
    return max(profile.values()) / max(min(profile.values()), 1)
