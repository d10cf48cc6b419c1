import pytest

from araproto import expand_instances, parse_spec, synthesize_crossbar, synthesize_interleave
from araproto.spec_model import EXAMPLE_SPEC_XML


def make_spec_xml(types, buffers=32, dmacs=4, connectivity=1, buffer_size="16K", tlb="8K",
                  coherent=0, hz="100MHz", strategy=None):
    """XML for ``types`` = [(name, num, ports), ...]."""
    accs = "\n".join(
        f'  <acc type="{name}" num="{num}" num_params="1">\n    <port size="{buffer_size}" num="{ports}"/>\n  </acc>'
        for name, num, ports in types
    )
    strat = f' strategy="{strategy}"' if strategy else ""
    return f"""<system>
<ACCs>
{accs}
</ACCs>
<SharedBuffers size="{buffer_size}" num="{buffers}" numDMACs="{dmacs}"/>
<Interconnects>
  <ACCS_to_Buffers type="crossbar" connectivity="{connectivity}" auto="1"/>
  <Buffers_to_DMACs type="interleaved" use="1" auto="1"{strat}/>
</Interconnects>
<IOMMU>
  <TLB size="{tlb}" evict="LRU"/>
</IOMMU>
<CoherentCache use="{coherent}" />
<AccFrequency hz="{hz}" />
</system>
"""


def make_spec(types, **kw):
    return parse_spec(make_spec_xml(types, **kw))


@pytest.fixture
def example_spec():
    return parse_spec(EXAMPLE_SPEC_XML)


@pytest.fixture
def example_system(example_spec):
    """(spec, topology, interleave) for the five-instance medical imaging system."""
    topo = synthesize_crossbar(expand_instances(example_spec), example_spec.shared_buffers.count,
                               example_spec.connectivity)
    return example_spec, topo, synthesize_interleave(topo, example_spec.shared_buffers.num_dmacs)


# -- acceptance criterion bookkeeping -------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when not in ("setup", "call"):
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "notes": []})
    if rep.when == "setup" and not rep.failed:
        return
    if hasattr(rep, "wasxfail"):
        entry["ok"] = False
        entry["notes"].append(f"{item.name}: known failure ({rep.wasxfail})")
    elif rep.failed:
        entry["ok"] = False
        entry["notes"].append(f"{item.name}: failed")
    detail = getattr(item, "criterion_detail", None)
    if detail:
        entry["notes"].append(detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        verdict = "PASS" if entry["ok"] else "FAIL"
        notes = "; ".join(entry["notes"])
        terminalreporter.write_line(f"criterion {number:2d} {verdict}: {entry['title']}" + (f" [{notes}]" if notes else ""))
