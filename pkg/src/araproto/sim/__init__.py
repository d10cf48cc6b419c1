"""Discrete-event simulation of the accelerator plane."""

from .allocator import BufferAllocator, BufferFlags, BufferRequest, Grant, AllocationDelta, dba_allocate
from .dma import DmaSystem, page_latency, transfer_page
from .engine import Simulator, coherency_of, invalidate_pages, run_simulation
from .gam import Free, GlobalAcceleratorManager, Reserve, gam_schedule
from .platform import PlatformModel
from .report import CSV_COLUMNS, CSV_SCHEMA_VERSION, InstanceReport, PerfReport
from .tlb import TlbState, handle_tlb_miss_batch, tlb_access

__all__ = [
    "AllocationDelta", "BufferAllocator", "BufferFlags", "BufferRequest", "CSV_COLUMNS", "CSV_SCHEMA_VERSION",
    "DmaSystem", "Free", "GlobalAcceleratorManager", "Grant", "InstanceReport", "PerfReport", "PlatformModel",
    "Reserve", "Simulator", "TlbState", "coherency_of", "dba_allocate", "gam_schedule", "handle_tlb_miss_batch",
    "invalidate_pages", "page_latency", "run_simulation", "tlb_access", "transfer_page",
]
