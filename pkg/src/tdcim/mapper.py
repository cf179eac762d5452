"""Weight-stationary placement of CNN layers onto macro banks.

Each 8-bit kernel weight occupies 8 adjacent columns (two 4-column nibble
groups), so one bank of `cols` columns offers cols/8 kernel slots. A kernel's
rows (kh*kw*in_ch/groups) stack vertically inside its slot; row groups of at
most `active_rows` rows are activated per compute step.

Mode choice per layer: if the kernel count fills every slot in the macro, the
IFM is broadcast to all banks and the kernels are split across them
(kernel_parallel; ties go here, fewer IFM copies). Otherwise the kernel set
is replicated and independent IFM tiles are processed in parallel
(input_parallel). Fully-connected layers have a single input vector, so they
never tile the IFM.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

from .cnn import NetworkDesc, LayerWorkload, extract_layer_info

KERNEL_COLS = 8  # columns one 8-bit weight occupies


@dataclass(frozen=True)
class MapEntry:
    layer_index: int
    kind: str
    mode: str  # kernel_parallel | input_parallel | none
    banks_used: int
    kernels_per_bank: int
    ifm_tiles_parallel: int
    kernels_in_flight: int  # kernels x tiles computing concurrently
    compute_cycles: int
    writeback_cycles: int
    load_cycles: int
    weight_load_passes: int
    macs: int
    weight_bytes: int
    out_elems: int
    conversions: int


@dataclass(frozen=True)
class MappingPlan:
    entries: tuple
    banks: int
    rows: int
    cols: int
    active_rows: int
    capacity_bytes: int
    cycles_per_step: int
    resident: bool  # whole network's weights fit; no per-inference reloads

    @property
    def total_macs(self) -> int:
        return sum(e.macs for e in self.entries)

    @property
    def total_compute_cycles(self) -> int:
        return sum(e.compute_cycles for e in self.entries)

    @property
    def total_writeback_cycles(self) -> int:
        return sum(e.writeback_cycles for e in self.entries)

    @property
    def total_load_cycles(self) -> int:
        return 0 if self.resident else sum(e.load_cycles for e in self.entries)

    @property
    def total_latency_cycles(self) -> int:
        # writeback overlaps compute (the write driver is idle during the MAC
        # phase); weight streaming is serialized
        return self.total_compute_cycles + self.total_load_cycles

    @property
    def total_conversions(self) -> int:
        return sum(e.conversions for e in self.entries)

    @property
    def total_offmacro_bytes(self) -> int:
        if self.resident:
            return 0
        return sum(e.weight_load_passes * e.weight_bytes for e in self.entries)

    @property
    def total_weight_bytes(self) -> int:
        return sum(e.weight_bytes for e in self.entries)

    @property
    def total_out_elems(self) -> int:
        return sum(e.out_elems for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "banks": self.banks,
            "rows": self.rows,
            "cols": self.cols,
            "active_rows": self.active_rows,
            "capacity_bytes": self.capacity_bytes,
            "cycles_per_step": self.cycles_per_step,
            "resident": self.resident,
            "totals": {
                "macs": self.total_macs,
                "compute_cycles": self.total_compute_cycles,
                "writeback_cycles": self.total_writeback_cycles,
                "load_cycles": self.total_load_cycles,
                "latency_cycles": self.total_latency_cycles,
                "conversions": self.total_conversions,
                "offmacro_bytes": self.total_offmacro_bytes,
            },
            "entries": [asdict(e) for e in self.entries],
        }


def map_layer(wl: LayerWorkload, config) -> MapEntry:
    """Plan one layer on `config` (a pipeline.MacroConfig)."""
    writeback_cycles = math.ceil(wl.out_elems * 8 / config.cols) if wl.out_elems else 0
    if wl.macs == 0:
        # pool/relu run in the digital peripheral at zero macro cycles
        return MapEntry(wl.index, wl.kind, "none", 0, 0, 0, 0, 0,
                        writeback_cycles, 0, 0, 0, 0, wl.out_elems, 0)

    slots_per_bank = config.cols // KERNEL_COLS
    total_slots = config.banks * slots_per_bank
    total_rows = config.rows * config.banks
    if wl.rows_per_kernel > total_rows:
        # deeper than the array: tile along input channels, reloading segments
        row_tiles = math.ceil(wl.rows_per_kernel / total_rows)
    else:
        row_tiles = 1

    if wl.n_kernels >= total_slots:
        mode = "kernel_parallel"
        in_flight = total_slots
        tiles = 1
        banks_used = config.banks
        kernels_per_bank = slots_per_bank
        passes = math.ceil(wl.n_kernels / total_slots) * row_tiles
    else:
        mode = "input_parallel"
        span = math.ceil(wl.n_kernels / slots_per_bank)
        replicas = max(1, config.banks // span)
        tiles = replicas if wl.kind == "conv2d" else 1
        in_flight = wl.n_kernels * tiles
        banks_used = span * replicas if wl.kind == "conv2d" else span
        kernels_per_bank = math.ceil(wl.n_kernels / span)
        passes = row_tiles

    macs_per_step = in_flight * config.active_rows
    steps = math.ceil(wl.macs / macs_per_step)
    cycles_per_step = config.cycles_per_step
    compute_cycles = steps * cycles_per_step
    # TDC fires: 2 nibble groups per kernel slot, every cycle of every step
    conversions = steps * in_flight * 2 * cycles_per_step
    load_bytes = passes * wl.weight_bytes
    load_cycles = math.ceil(load_bytes / (config.cols // 8))
    return MapEntry(wl.index, wl.kind, mode, banks_used, kernels_per_bank, tiles,
                    in_flight, compute_cycles, writeback_cycles, load_cycles,
                    passes, wl.macs, wl.weight_bytes, wl.out_elems, conversions)


def map_network(net: NetworkDesc, config, workloads: list | None = None) -> MappingPlan:
    """Plan every layer; inter-layer writeback is accounted once per output
    element. When the whole network's weights fit in the macro they are loaded
    once and stay resident, so steady-state inference pays no reload traffic.
    """
    if workloads is None:
        workloads = extract_layer_info(net)
    entries = tuple(map_layer(wl, config) for wl in workloads)
    total_weight_bytes = sum(e.weight_bytes for e in entries)
    return MappingPlan(
        entries=entries,
        banks=config.banks,
        rows=config.rows,
        cols=config.cols,
        active_rows=config.active_rows,
        capacity_bytes=config.capacity_bytes,
        cycles_per_step=config.cycles_per_step,
        resident=total_weight_bytes <= config.capacity_bytes,
    )
