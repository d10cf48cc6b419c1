import pytest

from araproto.errors import ProtocolError
from araproto.sim.allocator import BufferAllocator
from araproto.sim.gam import Free, GlobalAcceleratorManager, Reserve, gam_schedule
from araproto.spec_model import AccInstance


def manager(*types, banks=16):
    insts = [AccInstance(i, t, 2) for i, t in enumerate(types)]
    return GlobalAcceleratorManager(insts, BufferAllocator(banks))


def test_fifo_per_type():
    gam = manager("a")
    first = gam_schedule(gam, Reserve(1, "a"))
    assert [g.task_id for g in first] == [1]
    assert gam_schedule(gam, Reserve(2, "a")) == []
    assert gam.queue("a") == [2]
    nxt = gam_schedule(gam, Free(1))
    assert [(g.task_id, g.instance_id) for g in nxt] == [(2, 0)]


def test_types_do_not_block_each_other():
    gam = manager("a", "b")
    gam.reserve(1, "a")
    gam.reserve(2, "a")
    assert [g.task_id for g in gam.reserve(3, "b")] == [3]


def test_unknown_type():
    with pytest.raises(ProtocolError):
        manager("a").reserve(1, "zzz")


def test_duplicate_and_bad_free():
    gam = manager("a")
    gam.reserve(1, "a")
    with pytest.raises(ProtocolError):
        gam.reserve(1, "a")
    with pytest.raises(ProtocolError):
        gam.free(99)


def test_buffers_limit_grants():
    gam = manager("a", "b", banks=2)
    gam.reserve(1, "a")
    assert gam.reserve(2, "b") == []
    assert [g.task_id for g in gam.free(1)] == [2]
