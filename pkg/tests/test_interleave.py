import pytest

from araproto.crossbar import CrossbarTopology, synthesize_crossbar
from araproto.errors import ContractError
from araproto.interleave import InterleaveMap, dmac_load_profile, imbalance, synthesize_interleave
from araproto.spec_model import AccInstance


def one_acc(ports=4):
    return synthesize_crossbar([AccInstance(0, "a", ports)], ports, 1)


def test_intra_spreads_one_instance():
    imap = synthesize_interleave(one_acc(), 4, "intra_acc")
    assert imap.bank_to_dmac == {0: 0, 1: 1, 2: 2, 3: 3}
    prof = dmac_load_profile(imap, [0, 1, 2, 3])
    assert prof == {0: 1, 1: 1, 2: 1, 3: 1}
    assert imbalance(prof) == 1


def test_inter_puts_instance_on_one_dmac():
    imap = synthesize_interleave(one_acc(), 4, "inter_acc")
    assert set(imap.bank_to_dmac.values()) == {0}
    prof = dmac_load_profile(imap, [0, 1, 2, 3])
    assert prof == {0: 4, 1: 0, 2: 0, 3: 0}
    assert imbalance(prof) == 4


@pytest.mark.parametrize("strategy", ["intra_acc", "inter_acc"])
def test_single_dmac(strategy, example_system):
    _, topo, _ = example_system
    imap = synthesize_interleave(topo, 1, strategy)
    assert set(imap.bank_to_dmac.values()) == {0}
    assert sorted(imap.bank_to_dmac) == topo.wired_banks()


def test_empty_batch():
    assert dmac_load_profile(synthesize_interleave(one_acc(), 4), []) == {}


def test_unwired_bank():
    imap = synthesize_interleave(one_acc(), 4)
    with pytest.raises(ContractError):
        imap.dmac_of(99)


def test_bad_arguments():
    with pytest.raises(ContractError):
        synthesize_interleave(one_acc(), 0)
    with pytest.raises(ContractError):
        synthesize_interleave(one_acc(), 4, "diagonal")


def test_every_instance_balanced_under_intra(example_system):
    """Each instance's dedicated banks cover the DMACs evenly."""
    _, topo, imap = example_system
    for inst in (0, 2, 3):
        banks = [next(iter(topo.port_map[k])) for k in topo.ports_of(inst)]
        prof = dmac_load_profile(imap, banks)
        assert max(prof.values()) - min(prof.values()) <= 1


def test_shared_bank_follows_dedicated_owner():
    # bank 0 is dedicated to instance 1 but also reachable from instance 0
    topo = CrossbarTopology(2, 2, {(0, 0): frozenset({0, 1}), (1, 0): frozenset({0})})
    imap = synthesize_interleave(topo, 2, "inter_acc")
    assert imap.dmac_of(0) == 1


def test_json_round_trip(example_system):
    _, _, imap = example_system
    assert InterleaveMap.from_dict(imap.to_dict()) == imap
