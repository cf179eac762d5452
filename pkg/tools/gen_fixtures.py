#!/usr/bin/env python3
"""Generate the bundled test fixtures (frozen into fixtures/).

1. toy:     a small random-weight conv+fc model, one input tensor, and the
            golden output tensor computed by the integer reference oracle.
2. lenet5:  a bias-free LeNet-5 (61,470 weights) trained with torch on
            synthetic 32x32 digit images under macro-friendly constraints:
            binary {0,1} activations and ternary {-1,0,1} weights with at
            most 31 nonzero entries per kernel. Every per-conversion
            weighted count is then <= 9, inside the 4-bit converter range,
            so the 4-bit macro pipeline matches the software INT8 reference
            bit-exactly on every image.
3. mnist100: 100 held-out synthetic digit images plus labels.
4. golden/anchor_16kb.{csv,json}: frozen metric reports of the 16 KB
            reference run for byte-stable output regression.

Regeneration needs torch; the shipped fixtures are committed, so normal
test runs never import it.
"""

import json
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from tdcim import cnn, quant, workloads, metrics, modelio  # noqa: E402
from tdcim.mapper import map_network  # noqa: E402
from tdcim.pipeline import make_macro, run_network  # noqa: E402

FIX = ROOT / "fixtures"

# 7x5 digit glyphs, row-major strings
GLYPHS = {
    0: "01110 10001 10011 10101 11001 10001 01110",
    1: "00100 01100 00100 00100 00100 00100 01110",
    2: "01110 10001 00001 00010 00100 01000 11111",
    3: "11111 00010 00100 00010 00001 10001 01110",
    4: "00010 00110 01010 10010 11111 00010 00010",
    5: "11111 10000 11110 00001 00001 10001 01110",
    6: "00110 01000 10000 11110 10001 10001 01110",
    7: "11111 00001 00010 00100 01000 01000 01000",
    8: "01110 10001 10001 01110 10001 10001 01110",
    9: "01110 10001 10001 01111 00001 00010 01100",
}


def glyph_array(d: int) -> np.ndarray:
    rows = GLYPHS[d].split()
    return np.array([[int(ch) for ch in row] for row in rows], dtype=np.uint8)


def render_digit(d: int, rng: np.random.Generator) -> np.ndarray:
    """Binary 32x32 image: upscaled glyph, random shift, pepper noise."""
    img = np.zeros((32, 32), dtype=np.uint8)
    g = glyph_array(d)
    scale = int(rng.integers(3, 5))  # 3x or 4x upscale
    big = np.kron(g, np.ones((scale, scale), dtype=np.uint8))
    h, w = big.shape
    y0 = int(rng.integers(0, 32 - h + 1))
    x0 = int(rng.integers(0, 32 - w + 1))
    img[y0 : y0 + h, x0 : x0 + w] = big
    noise = rng.random((32, 32)) < 0.02
    img ^= noise.astype(np.uint8)
    return img


def make_dataset(n: int, seed: int):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, size=n)
    images = np.stack([render_digit(int(d), rng) for d in labels])
    return images.astype(np.float32), labels.astype(np.int64)


# ---------------------------------------------------------------------------
# constrained LeNet-5 training

NNZ_CAP = 31  # nonzero ternary weights per kernel/unit


def train_lenet(seed: int = 0):
    import torch
    import torch.nn.functional as F

    torch.manual_seed(seed)

    def ternary(w, frac=0.5):
        # keep the NNZ_CAP largest |latent| per output unit, sign them
        flat = w.reshape(w.shape[0], -1)
        k = min(NNZ_CAP, flat.shape[1])
        thresh = flat.abs().topk(k, dim=1).values[:, -1:]
        q = torch.sign(flat) * (flat.abs() >= thresh.clamp(min=1e-8))
        q = q.reshape(w.shape)
        return w + (q - w).detach()

    def binact(acc, theta):
        hard = (acc >= theta).float()
        soft = torch.sigmoid((acc - theta) / 3.0)
        return soft + (hard - soft).detach()

    # thresholds: theta >= (maxacc + 2) / 3 keeps requantized outputs binary
    maxacc = {"c1": min(25, NNZ_CAP), "c2": NNZ_CAP, "f1": NNZ_CAP, "f2": NNZ_CAP}
    theta = {k: int(np.ceil((v + 2) / 3)) for k, v in maxacc.items()}

    w = {
        "c1": torch.randn(6, 1, 5, 5) * 0.5,
        "c2": torch.randn(16, 6, 5, 5) * 0.2,
        "f1": torch.randn(120, 400) * 0.2,
        "f2": torch.randn(84, 120) * 0.2,
        "f3": torch.randn(10, 84) * 0.2,
    }
    for v in w.values():
        v.requires_grad_(True)

    def forward(x):
        a = binact(F.conv2d(x, ternary(w["c1"])), theta["c1"])
        a = F.max_pool2d(a, 2)
        a = binact(F.conv2d(a, ternary(w["c2"])), theta["c2"])
        a = F.max_pool2d(a, 2)
        a = a.reshape(a.shape[0], -1)
        a = binact(F.linear(a, ternary(w["f1"])), theta["f1"])
        a = binact(F.linear(a, ternary(w["f2"])), theta["f2"])
        return F.linear(a, ternary(w["f3"]))

    xs, ys = make_dataset(4000, seed=1234)
    xt = torch.from_numpy(xs).unsqueeze(1)
    yt = torch.from_numpy(ys)
    opt = torch.optim.Adam(w.values(), lr=0.02)
    for epoch in range(60):
        perm = torch.randperm(xt.shape[0])
        total, correct = 0, 0
        for i in range(0, xt.shape[0], 128):
            idx = perm[i : i + 128]
            logits = forward(xt[idx])
            loss = F.cross_entropy(logits, yt[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += idx.numel()
            correct += int((logits.argmax(1) == yt[idx]).sum())
        if epoch % 10 == 9:
            print(f"  epoch {epoch + 1}: train acc {correct / total:.3f}")

    def export(t, frac=None):
        q = ternary(t).detach()
        return q.numpy().astype(np.int8)

    wq = {k: export(v) for k, v in w.items()}
    return wq, theta


def build_lenet_fixture():
    wq, theta = train_lenet()
    net = workloads.lenet5()
    # out_scale per layer encodes the binarization threshold: with unit
    # input/weight scales, requantize multiplier 1/(2*theta - 1) maps
    # acc >= theta to 1 and acc <= maxacc to at most 1
    scales = {"wc1": None, "wc2": None, "wf1": None, "wf2": None, "wf3": None}
    in_scale = 1.0
    out_scales = {}
    for tag, th in (("c1", theta["c1"]), ("c2", theta["c2"]),
                    ("f1", theta["f1"]), ("f2", theta["f2"])):
        out_scales[f"w{tag}"] = in_scale * 1.0 * (2 * th - 1)
        in_scale = out_scales[f"w{tag}"]
    out_scales["wf3"] = in_scale  # unit multiplier for the logits

    layers = []
    for layer in net.layers:
        if layer.weight_ref is not None:
            layers.append(cnn.LayerDesc(
                kind=layer.kind, in_channels=layer.in_channels,
                out_channels=layer.out_channels, kernel_h=layer.kernel_h,
                kernel_w=layer.kernel_w, stride=layer.stride,
                padding=layer.padding, groups=layer.groups,
                weight_ref=layer.weight_ref,
                out_scale=out_scales[layer.weight_ref]))
        else:
            layers.append(layer)
    net = cnn.NetworkDesc(name="lenet5", layers=layers, input_shape=(1, 32, 32))

    ref_map = {"wc1": "c1", "wc2": "c2", "wf1": "f1", "wf2": "f2", "wf3": "f3"}
    weights = {}
    for ref, key in ref_map.items():
        arr = wq[key]
        weights[ref] = quant.QuantTensor(
            shape=arr.shape, data=arr.reshape(-1),
            params=quant.QuantParams(scale=1.0))
    n_params = sum(w.data.size for w in weights.values())
    assert n_params == 61470, n_params

    images, labels = make_dataset(100, seed=20260810)
    modelio.save_model(net, weights, FIX / "lenet5.json", FIX / "lenet5.bin")
    (FIX / "mnist100.json").write_text(json.dumps({
        "count": 100, "shape": [1, 32, 32], "scale": 1.0, "zero_point": 0,
        "data_file": "mnist100_images.bin",
        "labels": labels.tolist(),
    }, indent=2) + "\n", encoding="ascii")
    images.astype(np.int8).tofile(FIX / "mnist100_images.bin")

    # verify: reference vs 4-bit macro pipeline, all 100 images
    net2, weights2, biases2 = modelio.load_model(FIX / "lenet5.json", FIX / "lenet5.bin")
    cfg4 = make_macro(size_kb=8, tdc_bits=4)
    plan = map_network(net2, cfg4)
    agree, correct = 0, 0
    max_sat = 0.0
    for i in range(100):
        x = quant.QuantTensor((1, 32, 32), images[i].astype(np.int8).reshape(-1),
                              quant.QuantParams(scale=1.0))
        ref = cnn.infer_int8_reference(net2, weights2, x)
        res = run_network(net2, weights2, x, cfg4, plan)
        max_sat = max(max_sat, res.saturation_rate)
        assert np.array_equal(ref.array, res.output.array), f"image {i} mismatch"
        a = int(np.argmax(ref.array.reshape(-1)))
        agree += a == int(np.argmax(res.output.array.reshape(-1)))
        correct += a == int(labels[i])
    print(f"  lenet fixture: agreement {agree}/100, accuracy {correct}/100, "
          f"max saturation_rate {max_sat}")
    assert agree == 100
    assert max_sat == 0.0
    # the first test image ships as the single-input fixture
    x0 = quant.QuantTensor((1, 32, 32), images[0].astype(np.int8).reshape(-1),
                           quant.QuantParams(scale=1.0))
    modelio.save_tensor(x0, FIX / "lenet5_input.json", FIX / "lenet5_input.bin")
    return correct


def build_toy_fixture():
    rng = np.random.default_rng(99)
    layers = [
        cnn.LayerDesc(kind="conv2d", in_channels=2, out_channels=4, kernel_h=3,
                      kernel_w=3, stride=1, padding=0, weight_ref="conv",
                      bias_ref="conv_b", out_scale=0.05),
        cnn.LayerDesc(kind="relu"),
        cnn.LayerDesc(kind="fully_connected", in_channels=4 * 4 * 4,
                      out_channels=5, weight_ref="fc", out_scale=0.4),
    ]
    net = cnn.NetworkDesc(name="toy", layers=layers, input_shape=(2, 6, 6))
    weights = {
        "conv": quant.quantize_tensor(rng.normal(size=(4, 2, 3, 3))),
        "fc": quant.quantize_tensor(rng.normal(size=(5, 64))),
    }
    biases = {"conv_b": rng.integers(-40, 40, size=4).astype(np.int32)}
    x = quant.quantize_tensor(rng.normal(size=(2, 6, 6)))
    modelio.save_model(net, weights, FIX / "toy.json", FIX / "toy.bin", biases)
    modelio.save_tensor(x, FIX / "toy_input.json", FIX / "toy_input.bin")
    golden = cnn.infer_int8_reference(net, weights, x, biases)
    modelio.save_tensor(golden, FIX / "toy_golden.json", FIX / "toy_golden.bin")
    print(f"  toy fixture: golden output {golden.array.reshape(-1).tolist()}")


def build_anchor_golden():
    (FIX / "golden").mkdir(exist_ok=True)
    anchor = workloads.reference_full_utilization()
    cfg = make_macro(size_kb=16)
    report = metrics.evaluate(anchor, None, cfg)
    modelio.save_report(report, FIX / "golden" / "anchor_16kb.csv", "csv")
    modelio.save_report(report, FIX / "golden" / "anchor_16kb.json", "json")
    print(f"  anchor golden: {report.throughput_gops:.3f} GOPS, "
          f"{report.efficiency_tops_per_w:.3f} TOPS/W")


def main() -> int:
    FIX.mkdir(exist_ok=True)
    print("toy fixture:")
    build_toy_fixture()
    print("anchor goldens:")
    build_anchor_golden()
    print("lenet5 fixture (torch training):")
    build_lenet_fixture()
    return 0


if __name__ == "__main__":
    sys.exit(main())
