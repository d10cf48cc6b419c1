"""Design-space exploration toolkit for accelerator-rich architectures."""

from .crossbar import (
    CrossbarTopology,
    FeasibilityReport,
    buffer_demand,
    check_feasibility,
    cross_point_count,
    private_buffer_topology,
    repair_topology,
    synthesize_crossbar,
)
from .interleave import InterleaveMap, dmac_load_profile, imbalance, synthesize_interleave
from .spec_model import AccInstance, AccTypeSpec, AraSpec, expand_instances, parse_spec, serialize_spec, validate_spec
from .workload import KernelDescriptor, Workload, builtin_kernels, load_trace, synth_workload

__version__ = "0.1.0"
