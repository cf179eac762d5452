"""Benchmark network shapes for design-space sweeps.

These builders produce shape-only NetworkDescs (weight_refs are symbolic;
no tensors attached) used by the mapper and the cost model. Residual adds
and branch concatenations of the original architectures are not representable
in the five-kind layer set, so branchy models are expressed as sequential
proxies with matching layer-shape statistics; each builder documents its
weight-parameter total next to the published one.
"""

from __future__ import annotations

from .cnn import LayerDesc, NetworkDesc


def _conv(cin, cout, k, stride=1, pad=None, groups=1, tag=""):
    return LayerDesc(kind="conv2d", in_channels=cin, out_channels=cout,
                     kernel_h=k, kernel_w=k, stride=stride,
                     padding=(k // 2 if pad is None else pad), groups=groups,
                     weight_ref=f"w{tag}")


def _relu():
    return LayerDesc(kind="relu")


def _maxpool(k=2, stride=None):
    return LayerDesc(kind="maxpool2d", kernel_h=k, kernel_w=k,
                     stride=stride or k)


def _avgpool(k, stride=None):
    return LayerDesc(kind="avgpool2d", kernel_h=k, kernel_w=k,
                     stride=stride or k)


def _fc(cin, cout, tag=""):
    return LayerDesc(kind="fully_connected", in_channels=cin, out_channels=cout,
                     weight_ref=f"w{tag}")


def lenet5() -> NetworkDesc:
    """Classic 32x32 LeNet-5, bias-free: 61,470 weights."""
    layers = [
        _conv(1, 6, 5, pad=0, tag="c1"), _relu(), _maxpool(),
        _conv(6, 16, 5, pad=0, tag="c2"), _relu(), _maxpool(),
        _fc(400, 120, tag="f1"), _relu(),
        _fc(120, 84, tag="f2"), _relu(),
        _fc(84, 10, tag="f3"),
    ]
    return NetworkDesc(name="lenet5", layers=layers, input_shape=(1, 32, 32))


def mobilenet_v1_cifar() -> NetworkDesc:
    """MobileNetV1 1.0 on 32x32/10 classes: 3,195,328 weights (pub. 3.19M)."""
    chans = [(32, 64, 1), (64, 128, 2), (128, 128, 1), (128, 256, 2),
             (256, 256, 1), (256, 512, 2), (512, 512, 1), (512, 512, 1),
             (512, 512, 1), (512, 512, 1), (512, 512, 1), (512, 1024, 1),
             (1024, 1024, 1)]
    layers = [_conv(3, 32, 3, stride=1, tag="c0"), _relu()]
    for i, (cin, cout, s) in enumerate(chans):
        layers += [_conv(cin, cin, 3, stride=s, groups=cin, tag=f"dw{i}"), _relu(),
                   _conv(cin, cout, 1, tag=f"pw{i}"), _relu()]
    layers += [_avgpool(4), _fc(1024, 10, tag="fc")]
    return NetworkDesc(name="mobilenet_v1", layers=layers, input_shape=(3, 32, 32))


def mobilenet_v2_cifar() -> NetworkDesc:
    """MobileNetV2 1.0 on 32x32/10 classes, residual adds dropped:
    2,202,560 weights (pub. 2.35M, which also counts normalization params)."""
    # (expansion t, out channels, repeats, stride)
    cfg = [(1, 16, 1, 1), (6, 24, 2, 1), (6, 32, 3, 2), (6, 64, 4, 2),
           (6, 96, 3, 1), (6, 160, 3, 2), (6, 320, 1, 1)]
    layers = [_conv(3, 32, 3, stride=1, tag="c0"), _relu()]
    cin = 32
    b = 0
    for t, cout, n, s in cfg:
        for r in range(n):
            mid = cin * t
            stride = s if r == 0 else 1
            if t > 1:
                layers += [_conv(cin, mid, 1, tag=f"e{b}"), _relu()]
            layers += [_conv(mid, mid, 3, stride=stride, groups=mid, tag=f"d{b}"),
                       _relu(), _conv(mid, cout, 1, tag=f"p{b}")]
            cin = cout
            b += 1
    layers += [_conv(cin, 1280, 1, tag="head"), _relu(), _avgpool(4),
               _fc(1280, 10, tag="fc")]
    return NetworkDesc(name="mobilenet_v2", layers=layers, input_shape=(3, 32, 32))


def squeezenet() -> NetworkDesc:
    """SqueezeNet 1.0 proxy on 224x224/1000: the parallel expand branches of
    each fire module fold into one 2-group 3x3 conv: 1,183,008 weights
    (pub. 1.24M)."""
    fires = [(96, 16, 128), (128, 16, 128), (128, 32, 256),
             (256, 32, 256), (256, 48, 384), (384, 48, 384),
             (384, 64, 512), (512, 64, 512)]
    layers = [_conv(3, 96, 7, stride=2, pad=3, tag="c0"), _relu(),
              _maxpool(3, 2)]
    for i, (cin, s, e) in enumerate(fires):
        layers += [_conv(cin, s, 1, tag=f"sq{i}"), _relu(),
                   _conv(s, e, 3, groups=2, tag=f"ex{i}"), _relu()]
        if i in (2, 6):
            layers.append(_maxpool(3, 2))
    layers += [_conv(512, 1000, 1, tag="c10"), _relu(), _avgpool(13)]
    return NetworkDesc(name="squeezenet", layers=layers, input_shape=(3, 224, 224))


def resnet18() -> NetworkDesc:
    """ResNet-18 on 224x224/1000, skips/downsample branches dropped:
    11,506,880 weights (pub. 11.68M)."""
    layers = [_conv(3, 64, 7, stride=2, pad=3, tag="c0"), _relu(), _maxpool(3, 2)]
    plan = [(64, 64, 1), (64, 64, 1), (64, 64, 1), (64, 64, 1),
            (64, 128, 2), (128, 128, 1), (128, 128, 1), (128, 128, 1),
            (128, 256, 2), (256, 256, 1), (256, 256, 1), (256, 256, 1),
            (256, 512, 2), (512, 512, 1), (512, 512, 1), (512, 512, 1)]
    for i, (cin, cout, s) in enumerate(plan):
        layers += [_conv(cin, cout, 3, stride=s, tag=f"b{i}"), _relu()]
    layers += [_avgpool(7), _fc(512, 1000, tag="fc")]
    return NetworkDesc(name="resnet18", layers=layers, input_shape=(3, 224, 224))


def tiny_yolov3() -> NetworkDesc:
    """Tiny-YOLOv3 on 416x416/COCO, single-branch proxy: 8,910,640 weights
    (pub. 8.85M)."""
    layers = []
    cin = 3
    for i, cout in enumerate((16, 32, 64, 128, 256, 512)):
        layers += [_conv(cin, cout, 3, tag=f"b{i}"), _relu(),
                   _maxpool(2, 2 if cout != 512 else 1)]
        cin = cout
    layers += [_conv(512, 1024, 3, tag="b6"), _relu(),
               _conv(1024, 256, 1, tag="h0"), _relu(),
               _conv(256, 512, 3, tag="h1"), _relu(),
               _conv(512, 255, 1, tag="det0"),
               _conv(255, 384, 1, tag="h2"), _relu(),  # stands in for the concat
               _conv(384, 256, 3, tag="h3"), _relu(),
               _conv(256, 255, 1, tag="det1")]
    return NetworkDesc(name="tiny_yolov3", layers=layers, input_shape=(3, 416, 416))


def reference_full_utilization() -> NetworkDesc:
    """Full-utilization anchor for the 16 KB reference macro: one 3x3 conv
    whose 64 kernels exactly fill the 64 kernel slots and whose weights
    (16,128 B) stay resident."""
    layers = [_conv(28, 64, 3, stride=1, pad=1, tag="ref")]
    return NetworkDesc(name="reference16kb", layers=layers, input_shape=(28, 128, 128))


BENCHMARKS = {
    "lenet5": lenet5,
    "mobilenet_v1": mobilenet_v1_cifar,
    "mobilenet_v2": mobilenet_v2_cifar,
    "squeezenet": squeezenet,
    "resnet18": resnet18,
    "tiny_yolov3": tiny_yolov3,
}
