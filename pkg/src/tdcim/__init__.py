"""Behavioral simulator and design-space explorer for a TDC-readout
compute-in-memory SRAM macro: bit-exact INT8 CNN inference through the
charge-domain MAC pipeline, converter linearity/PVT analytics, weight-
stationary mapping, and calibrated energy/latency/power models with
automated macro selection."""

from .quant import QuantParams, QuantTensor, quantize_tensor, dequantize, \
    requantize_accumulator
from .cnn import LayerDesc, NetworkDesc, LayerWorkload, infer_int8_reference, \
    extract_layer_info
from .analog import AnalogParams, BitlineState, unit_discharge, \
    bitline_voltage, charge_share, make_bitlines
from .tdc import TdcModel, ConverterAnalytics, convert_structural, \
    convert_threshold, compute_dnl, compute_inl, compute_fom, monte_carlo_pvt, \
    analyze
from .pipeline import MacroConfig, MacroState, MacOpResult, make_macro, \
    store_weights, mac_3x3, writeback, run_network
from .mapper import MapEntry, MappingPlan, map_layer, map_network
from .metrics import CostParams, MetricsReport, Selection, evaluate, \
    select_macro, calculate_inductor

__version__ = "0.1.0"
