"""File formats: model files, tensor files, metric reports.

A model is a JSON document plus a separate little-endian binary blob of
tensor data addressed by byte offset/length (int8 weights, int32 biases).
All emitted files are bit-stable: fixed field order, 17-significant-digit
float formatting, '.' decimal separator, LF line endings, no locale
dependence.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .cnn import LayerDesc, NetworkDesc
from .quant import QuantParams, QuantTensor

_LAYER_FIELDS = ("kind", "in_channels", "out_channels", "kernel_h", "kernel_w",
                 "stride", "padding", "weight_ref", "bias_ref", "groups",
                 "out_scale")
_TENSOR_FIELDS = ("id", "shape", "scale", "zero_point", "dtype", "offset", "length")
CSV_COLUMNS = ("config_kb", "banks", "energy_j", "latency_s", "power_w",
               "gops", "tops_per_w")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return "null"
    if isinstance(value, str):
        return json.dumps(value)
    raise TypeError(f"cannot format {type(value)}")


def dumps_canonical(obj, indent: int = 0) -> str:
    """Deterministic JSON: insertion-ordered keys, .17g floats."""
    pad = "  " * indent
    pad1 = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad1}{json.dumps(str(k))}: {dumps_canonical(v, indent + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        flat = all(not isinstance(v, (dict, list, tuple)) for v in obj)
        if flat:
            return "[" + ", ".join(_fmt(v) for v in obj) + "]"
        items = [pad1 + dumps_canonical(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    return _fmt(obj)


def write_canonical_json(obj, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(dumps_canonical(obj) + "\n")


# ---------------------------------------------------------------------------
# model files


@dataclass(frozen=True)
class TensorEntry:
    id: str
    shape: tuple
    scale: float
    zero_point: int
    dtype: str  # int8 | int32
    offset: int
    length: int  # bytes


def _layer_to_dict(layer: LayerDesc) -> dict:
    return {f: getattr(layer, f) for f in _LAYER_FIELDS}


def _layer_from_dict(d: dict, index: int) -> LayerDesc:
    unknown = set(d) - set(_LAYER_FIELDS)
    if unknown:
        raise ValueError(f"layers[{index}]: unknown fields {sorted(unknown)}")
    if "kind" not in d:
        raise ValueError(f"layers[{index}]: missing 'kind'")
    kwargs = {k: v for k, v in d.items() if v is not None}
    try:
        return LayerDesc(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"layers[{index}]: {exc}") from exc


def save_model(net: NetworkDesc, weights: dict, json_path, blob_path,
               biases: dict | None = None) -> None:
    """Write the JSON header and the weight blob (int8 LE; biases int32 LE)."""
    biases = biases or {}
    tensors = []
    blob = bytearray()
    for tid in sorted(weights):
        t = weights[tid]
        data = t.data.astype("<i1").tobytes()
        tensors.append(TensorEntry(tid, t.shape, t.params.scale,
                                   t.params.zero_point, "int8",
                                   len(blob), len(data)))
        blob.extend(data)
    for tid in sorted(biases):
        b = np.asarray(biases[tid], dtype="<i4")
        data = b.tobytes()
        tensors.append(TensorEntry(tid, tuple(b.shape), 1.0, 0, "int32",
                                   len(blob), len(data)))
        blob.extend(data)
    doc = {
        "name": net.name,
        "input_shape": list(net.input_shape),
        "layers": [_layer_to_dict(l) for l in net.layers],
        "tensors": [
            {"id": e.id, "shape": list(e.shape), "scale": e.scale,
             "zero_point": e.zero_point, "dtype": e.dtype,
             "offset": e.offset, "length": e.length}
            for e in tensors
        ],
    }
    write_canonical_json(doc, json_path)
    with open(blob_path, "wb") as fh:
        fh.write(bytes(blob))


def load_model(json_path, blob_path):
    """Validated (NetworkDesc, weights map, biases map) from disk.

    Raises ValueError naming the offending field path or tensor id.
    """
    try:
        with open(json_path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{json_path}: malformed JSON: {exc}") from exc
    with open(blob_path, "rb") as fh:
        blob = fh.read()
    for key in ("name", "input_shape", "layers", "tensors"):
        if key not in doc:
            raise ValueError(f"{json_path}: missing top-level field {key!r}")
    layers = [_layer_from_dict(d, i) for i, d in enumerate(doc["layers"])]
    net = NetworkDesc(name=doc["name"], layers=layers,
                      input_shape=tuple(doc["input_shape"]))

    weights, biases = {}, {}
    spans = []
    for i, td in enumerate(doc["tensors"]):
        missing = [f for f in _TENSOR_FIELDS if f not in td]
        if missing:
            raise ValueError(f"tensors[{i}]: missing fields {missing}")
        tid, off, length = td["id"], td["offset"], td["length"]
        if off < 0 or length < 0 or off + length > len(blob):
            raise ValueError(
                f"tensor {tid!r}: span [{off}, {off + length}) outside blob of "
                f"{len(blob)} bytes (truncated blob?)")
        spans.append((off, off + length, tid))
        n = int(np.prod(td["shape"])) if td["shape"] else 0
        if td["dtype"] == "int8":
            if length != n:
                raise ValueError(f"tensor {tid!r}: length {length} != prod(shape) {n}")
            data = np.frombuffer(blob, dtype="<i1", count=n, offset=off)
            weights[tid] = QuantTensor(shape=tuple(td["shape"]), data=data,
                                       params=QuantParams(scale=td["scale"],
                                                          zero_point=td["zero_point"]))
        elif td["dtype"] == "int32":
            if length != 4 * n:
                raise ValueError(f"tensor {tid!r}: length {length} != 4*prod(shape) {4 * n}")
            biases[tid] = np.frombuffer(blob, dtype="<i4", count=n,
                                        offset=off).astype(np.int32)
        else:
            raise ValueError(f"tensor {tid!r}: unknown dtype {td['dtype']!r}")
    spans.sort()
    for (a0, a1, aid), (b0, b1, bid) in zip(spans, spans[1:]):
        if b0 < a1:
            raise ValueError(f"tensors {aid!r} and {bid!r} overlap in the blob")
    for i, layer in enumerate(net.layers):
        if layer.weight_ref is not None and layer.weight_ref not in weights:
            raise ValueError(f"layers[{i}]: dangling weight_ref {layer.weight_ref!r}")
        if layer.bias_ref is not None and layer.bias_ref not in biases:
            raise ValueError(f"layers[{i}]: dangling bias_ref {layer.bias_ref!r}")
    return net, weights, biases


# ---------------------------------------------------------------------------
# tensor files (network inputs / golden outputs)


def save_tensor(t: QuantTensor, json_path, bin_path) -> None:
    doc = {
        "shape": list(t.shape),
        "scale": t.params.scale,
        "zero_point": t.params.zero_point,
        "bit_width": t.params.bit_width,
        "data_file": os.path.basename(str(bin_path)),
    }
    write_canonical_json(doc, json_path)
    with open(bin_path, "wb") as fh:
        fh.write(t.data.astype("<i1").tobytes())


def load_tensor(json_path) -> QuantTensor:
    with open(json_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    bin_path = os.path.join(os.path.dirname(str(json_path)), doc["data_file"])
    data = np.fromfile(bin_path, dtype="<i1")
    n = int(np.prod(doc["shape"]))
    if data.size != n:
        raise ValueError(f"{bin_path}: {data.size} bytes, expected {n}")
    return QuantTensor(shape=tuple(doc["shape"]), data=data,
                       params=QuantParams(scale=doc["scale"],
                                          zero_point=doc["zero_point"],
                                          bit_width=doc.get("bit_width", 8)))


# ---------------------------------------------------------------------------
# reports


def _report_rows(report_or_table) -> list:
    from .metrics import MetricsReport  # local import to avoid a cycle

    if isinstance(report_or_table, MetricsReport):
        return [report_or_table]
    return list(report_or_table)


def save_report(report_or_table, path, format: str = "csv") -> None:
    """Bit-stable CSV or JSON emission of one report or a table of them."""
    rows = _report_rows(report_or_table)
    if format == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for r in rows:
            vals = r.csv_row()
            lines.append(",".join(_fmt(vals[c]) for c in CSV_COLUMNS))
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    elif format == "json":
        write_canonical_json([r.to_dict() for r in rows], path)
    else:
        raise ValueError(f"unknown report format {format!r}")


def load_report_json(path) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return doc if isinstance(doc, list) else [doc]
