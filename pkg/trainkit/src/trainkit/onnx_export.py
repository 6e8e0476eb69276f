"""Serialize the segmentation network to an ONNX file.

torch's exporters need the onnx package, which is not always available, so
this writer encodes the protobuf wire format directly, mirroring the fixed
architecture of :class:`~trainkit.model.RingSegmentationNet` node by node.
The result is a standard ONNX model (ir 8 / opset 13) with the
``output_activation`` metadata key the detection backend requires.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch.nn as nn

from .model import DoubleConv, RingSegmentationNet, UpBlock


class UnsupportedLayerError(ValueError):
    """A module the exporter cannot express in the ONNX operator subset."""


# -- protobuf primitives ----------------------------------------------------

def _varint(v: int) -> bytes:
    out = bytearray()
    while True:
        b = v & 0x7F
        v >>= 7
        if v:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def _tag(fno: int, wtype: int) -> bytes:
    return _varint((fno << 3) | wtype)


def _len_field(fno: int, payload: bytes) -> bytes:
    return _tag(fno, 2) + _varint(len(payload)) + payload


def _str_field(fno: int, s: str) -> bytes:
    return _len_field(fno, s.encode())


def _varint_field(fno: int, v: int) -> bytes:
    return _tag(fno, 0) + _varint(v)


def _tensor(name: str, arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype="<f4")
    out = _len_field(1, b"".join(_varint(d) for d in arr.shape))
    out += _varint_field(2, 1)  # FLOAT
    out += _str_field(8, name)
    out += _len_field(9, arr.tobytes(order="C"))
    return out


def _attr_int(name: str, v: int) -> bytes:
    return _str_field(1, name) + _varint_field(3, int(v)) + _varint_field(20, 2)


def _attr_ints(name: str, vals) -> bytes:
    payload = b"".join(_varint(int(v)) for v in vals)
    return _str_field(1, name) + _len_field(8, payload) + _varint_field(20, 7)


def _attr_float(name: str, v: float) -> bytes:
    return (_str_field(1, name) + _tag(2, 5)
            + np.array(v, dtype="<f4").tobytes() + _varint_field(20, 1))


def _value_info(name: str, dims) -> bytes:
    shape = b""
    for d in dims:
        shape += _len_field(1, _str_field(2, str(d)) if isinstance(d, str)
                            else _varint_field(1, int(d)))
    tensor_type = _varint_field(1, 1) + _len_field(2, shape)
    return _str_field(1, name) + _len_field(2, _len_field(1, tensor_type))


# -- graph emitter ----------------------------------------------------------

class _Emitter:
    def __init__(self):
        self.nodes: list[bytes] = []
        self.initializers: list[bytes] = []
        self._counter = 0

    def _node(self, op: str, inputs, outputs, attrs=()):
        body = b"".join(_str_field(1, i) for i in inputs)
        body += b"".join(_str_field(2, o) for o in outputs)
        body += _str_field(3, outputs[0])
        body += _str_field(4, op)
        body += b"".join(_len_field(5, a) for a in attrs)
        self.nodes.append(_len_field(1, body))

    def _init(self, name: str, arr) -> str:
        self.initializers.append(_tensor(name, arr.detach().cpu().numpy()))
        return name

    def conv(self, name: str, mod: nn.Conv2d, x: str) -> str:
        if mod.dilation != (1, 1):
            raise UnsupportedLayerError(f"{name}: dilation {mod.dilation}")
        inputs = [x, self._init(f"{name}.weight", mod.weight)]
        if mod.bias is not None:
            inputs.append(self._init(f"{name}.bias", mod.bias))
        out = f"{name}.out"
        ph, pw = mod.padding
        self._node("Conv", inputs, [out], attrs=[
            _attr_ints("kernel_shape", mod.kernel_size),
            _attr_ints("strides", mod.stride),
            _attr_ints("pads", (ph, pw, ph, pw)),
            _attr_int("group", mod.groups),
        ])
        return out

    def conv_transpose(self, name: str, mod: nn.ConvTranspose2d, x: str) -> str:
        if mod.groups != 1 or mod.padding != (0, 0):
            raise UnsupportedLayerError(
                f"{name}: unsupported ConvTranspose configuration")
        inputs = [x, self._init(f"{name}.weight", mod.weight)]
        if mod.bias is not None:
            inputs.append(self._init(f"{name}.bias", mod.bias))
        out = f"{name}.out"
        self._node("ConvTranspose", inputs, [out], attrs=[
            _attr_ints("kernel_shape", mod.kernel_size),
            _attr_ints("strides", mod.stride),
            _attr_ints("pads", (0, 0, 0, 0)),
        ])
        return out

    def batchnorm(self, name: str, mod: nn.BatchNorm2d, x: str) -> str:
        inputs = [x,
                  self._init(f"{name}.weight", mod.weight),
                  self._init(f"{name}.bias", mod.bias),
                  self._init(f"{name}.mean", mod.running_mean),
                  self._init(f"{name}.var", mod.running_var)]
        out = f"{name}.out"
        self._node("BatchNormalization", inputs, [out],
                   attrs=[_attr_float("epsilon", mod.eps)])
        return out

    def relu(self, x: str) -> str:
        self._counter += 1
        out = f"relu_{self._counter}"
        self._node("Relu", [x], [out])
        return out

    def maxpool(self, name: str, mod: nn.MaxPool2d, x: str) -> str:
        k = mod.kernel_size if isinstance(mod.kernel_size, tuple) \
            else (mod.kernel_size, mod.kernel_size)
        s = mod.stride if isinstance(mod.stride, tuple) else (mod.stride, mod.stride)
        p = mod.padding if isinstance(mod.padding, tuple) else (mod.padding, mod.padding)
        out = f"{name}.out"
        self._node("MaxPool", [x], [out], attrs=[
            _attr_ints("kernel_shape", k),
            _attr_ints("strides", s),
            _attr_ints("pads", (p[0], p[1], p[0], p[1])),
        ])
        return out

    def add(self, a: str, b: str) -> str:
        self._counter += 1
        out = f"add_{self._counter}"
        self._node("Add", [a, b], [out])
        return out

    def concat(self, a: str, b: str) -> str:
        self._counter += 1
        out = f"cat_{self._counter}"
        self._node("Concat", [a, b], [out], attrs=[_attr_int("axis", 1)])
        return out

    def double_conv(self, name: str, mod: DoubleConv, x: str) -> str:
        seq = list(mod.block)
        x = self.conv(f"{name}.0", seq[0], x)
        x = self.batchnorm(f"{name}.1", seq[1], x)
        x = self.relu(x)
        x = self.conv(f"{name}.3", seq[3], x)
        x = self.batchnorm(f"{name}.4", seq[4], x)
        return self.relu(x)

    def basic_block(self, name: str, block, x: str) -> str:
        identity = x
        out = self.conv(f"{name}.conv1", block.conv1, x)
        out = self.batchnorm(f"{name}.bn1", block.bn1, out)
        out = self.relu(out)
        out = self.conv(f"{name}.conv2", block.conv2, out)
        out = self.batchnorm(f"{name}.bn2", block.bn2, out)
        if block.downsample is not None:
            identity = self.conv(f"{name}.down.0", block.downsample[0], x)
            identity = self.batchnorm(f"{name}.down.1", block.downsample[1], identity)
        return self.relu(self.add(out, identity))

    def resnet_layer(self, name: str, layer, x: str) -> str:
        for i, block in enumerate(layer):
            x = self.basic_block(f"{name}.{i}", block, x)
        return x

    def up_block(self, name: str, mod: UpBlock, x: str, skip: str) -> str:
        x = self.conv_transpose(f"{name}.up", mod.up, x)
        return self.double_conv(f"{name}.conv", mod.conv, self.concat(x, skip))


def export_model(model: RingSegmentationNet, path,
                 metadata: dict | None = None) -> Path:
    """Write the network as an ONNX file; returns the path."""
    if not isinstance(model, RingSegmentationNet):
        raise UnsupportedLayerError(
            f"exporter mirrors RingSegmentationNet, got {type(model).__name__}")
    model = model.eval()
    em = _Emitter()
    x = "image"
    c1 = em.relu(em.batchnorm("bn1", model.bn1, em.conv("conv1", model.conv1, x)))
    m = em.maxpool("maxpool", model.maxpool, c1)
    l1 = em.resnet_layer("layer1", model.layer1, m)
    l2 = em.resnet_layer("layer2", model.layer2, l1)
    l3 = em.resnet_layer("layer3", model.layer3, l2)
    l4 = em.resnet_layer("layer4", model.layer4, l3)
    d4 = em.up_block("up4", model.up4, l4, l3)
    d3 = em.up_block("up3", model.up3, d4, l2)
    d2 = em.up_block("up2", model.up2, d3, l1)
    d1 = em.up_block("up1", model.up1, d2, c1)
    d0 = em.double_conv("out_conv", model.out_conv,
                        em.conv_transpose("up0", model.up0, d1))
    logits = em.conv("head", model.head, d0)

    graph = b"".join(em.nodes)
    graph += _str_field(2, "ring_segmentation")
    graph += b"".join(_len_field(5, t) for t in em.initializers)
    graph += _len_field(11, _value_info("image", ("batch", 3, "height", "width")))
    graph += _len_field(12, _value_info(logits, ("batch", 1, "height", "width")))

    meta = {"output_activation": "logits"}
    meta.update(metadata or {})
    buf = _varint_field(1, 8)  # ir_version
    buf += _str_field(2, "trainkit")
    buf += _len_field(7, graph)
    buf += _len_field(8, _str_field(1, "") + _varint_field(2, 13))  # opset 13
    for k, v in meta.items():
        buf += _len_field(14, _str_field(1, k) + _str_field(2, str(v)))
    path = Path(path)
    path.write_bytes(buf)
    return path
