"""Minimal ONNX model reader and numpy graph executor.

Segmentation models arrive as ONNX protobuf files. No ONNX runtime is
assumed: this module decodes the protobuf wire format directly and evaluates
the graph with numpy, covering the operator subset used by convolutional
encoder-decoder networks (Conv, ConvTranspose, BatchNormalization, Relu,
Sigmoid, MaxPool, Add, Concat, Identity, Constant). Unknown operators raise
:class:`UnsupportedOpError` naming the node.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class OnnxFormatError(ValueError):
    """Raised when a file does not parse as the expected ONNX structure."""


class UnsupportedOpError(ValueError):
    """Raised when the graph uses an operator this executor does not implement."""


# ---------------------------------------------------------------------------
# Protobuf wire-format decoding (only the fields we need)
# ---------------------------------------------------------------------------

def _read_varint(buf: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise OnnxFormatError("truncated varint")
        b = buf[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result, pos
        shift += 7
        if shift > 70:
            raise OnnxFormatError("varint too long")


def _signed(value: int) -> int:
    return value - (1 << 64) if value >= (1 << 63) else value


def _fields(buf: bytes):
    """Yield (field_number, wire_type, payload) triples from a message buffer."""
    pos = 0
    n = len(buf)
    while pos < n:
        tag, pos = _read_varint(buf, pos)
        fno, wtype = tag >> 3, tag & 7
        if wtype == 0:
            val, pos = _read_varint(buf, pos)
            yield fno, wtype, val
        elif wtype == 2:
            length, pos = _read_varint(buf, pos)
            if pos + length > n:
                raise OnnxFormatError("truncated length-delimited field")
            yield fno, wtype, buf[pos:pos + length]
            pos += length
        elif wtype == 5:
            yield fno, wtype, buf[pos:pos + 4]
            pos += 4
        elif wtype == 1:
            yield fno, wtype, buf[pos:pos + 8]
            pos += 8
        else:
            raise OnnxFormatError(f"unsupported wire type {wtype}")


def _varint_list(payload, wtype) -> list[int]:
    # proto3 packs repeated scalars; accept both packed and unpacked encodings
    if wtype == 0:
        return [_signed(payload)]
    out = []
    pos = 0
    while pos < len(payload):
        val, pos = _read_varint(payload, pos)
        out.append(_signed(val))
    return out


_TENSOR_DTYPES = {1: np.float32, 6: np.int32, 7: np.int64, 11: np.float64}


def _parse_tensor(buf: bytes) -> tuple[str, np.ndarray]:
    dims: list[int] = []
    data_type = 1
    raw = None
    floats: list[bytes] = []
    int64s: list[int] = []
    name = ""
    for fno, wtype, val in _fields(buf):
        if fno == 1:
            dims.extend(_varint_list(val, wtype))
        elif fno == 2:
            data_type = val
        elif fno == 4:
            floats.append(val)
        elif fno == 7:
            int64s.extend(_varint_list(val, wtype))
        elif fno == 8:
            name = val.decode()
        elif fno == 9:
            raw = val
    if data_type not in _TENSOR_DTYPES:
        raise OnnxFormatError(f"tensor {name!r}: unsupported data type {data_type}")
    dtype = _TENSOR_DTYPES[data_type]
    if raw is not None:
        arr = np.frombuffer(raw, dtype=np.dtype(dtype).newbyteorder("<")).astype(dtype)
    elif floats:
        arr = np.frombuffer(b"".join(floats), dtype="<f4").astype(np.float32)
    elif int64s:
        arr = np.array(int64s, dtype=np.int64)
    else:
        arr = np.zeros(0, dtype=dtype)
    return name, arr.reshape(dims if dims else arr.shape)


def _parse_attribute(buf: bytes):
    name = ""
    value = None
    ints: list[int] = []
    floats: list[float] = []
    for fno, wtype, val in _fields(buf):
        if fno == 1:
            name = val.decode()
        elif fno == 2:
            value = np.frombuffer(val, dtype="<f4")[0].item()
        elif fno == 3:
            value = _signed(val)
        elif fno == 4:
            value = val  # bytes attribute
        elif fno == 5:
            value = _parse_tensor(val)[1]
        elif fno == 7:
            if wtype == 5:
                floats.append(np.frombuffer(val, dtype="<f4")[0].item())
            else:
                floats.extend(np.frombuffer(val, dtype="<f4").tolist())
        elif fno == 8:
            ints.extend(_varint_list(val, wtype))
    if ints:
        value = ints
    elif floats:
        value = floats
    return name, value


@dataclass
class OnnxNode:
    op_type: str
    name: str
    inputs: list[str]
    outputs: list[str]
    attrs: dict = field(default_factory=dict)


def _parse_node(buf: bytes) -> OnnxNode:
    node = OnnxNode("", "", [], [])
    for fno, _wtype, val in _fields(buf):
        if fno == 1:
            node.inputs.append(val.decode())
        elif fno == 2:
            node.outputs.append(val.decode())
        elif fno == 3:
            node.name = val.decode()
        elif fno == 4:
            node.op_type = val.decode()
        elif fno == 5:
            k, v = _parse_attribute(val)
            node.attrs[k] = v
    return node


def _parse_value_info(buf: bytes) -> tuple[str, list[int | None]]:
    name = ""
    dims: list[int | None] = []
    for fno, _w, val in _fields(buf):
        if fno == 1:
            name = val.decode()
        elif fno == 2:  # TypeProto
            for f2, _w2, v2 in _fields(val):
                if f2 != 1:  # tensor_type
                    continue
                for f3, _w3, v3 in _fields(v2):
                    if f3 != 2:  # shape
                        continue
                    for f4, _w4, v4 in _fields(v3):
                        if f4 != 1:  # dim
                            continue
                        dim: int | None = None
                        for f5, w5, v5 in _fields(v4):
                            if f5 == 1 and w5 == 0:
                                dim = _signed(v5)
                        dims.append(dim)
    return name, dims


# ---------------------------------------------------------------------------
# Graph model
# ---------------------------------------------------------------------------

@dataclass
class OnnxModel:
    """Decoded ONNX graph: nodes, weights, IO signature and metadata."""

    nodes: list[OnnxNode]
    weights: dict[str, np.ndarray]
    input_name: str
    input_dims: list[int | None]
    output_name: str
    metadata: dict[str, str]

    @classmethod
    def load(cls, path) -> "OnnxModel":
        path = Path(path)
        if not path.is_file():
            raise OnnxFormatError(f"model file not found: {path}")
        buf = path.read_bytes()
        graph_buf = None
        metadata: dict[str, str] = {}
        try:
            for fno, _w, val in _fields(buf):
                if fno == 7:
                    graph_buf = val
                elif fno == 14:
                    key = value = b""
                    for efno, _ew, ev in _fields(val):
                        if efno == 1:
                            key = ev
                        elif efno == 2:
                            value = ev
                    metadata[key.decode()] = value.decode()
        except OnnxFormatError as exc:
            raise OnnxFormatError(f"{path}: not a valid ONNX file ({exc})") from exc
        if graph_buf is None:
            raise OnnxFormatError(f"{path}: no graph found; not an ONNX model")

        nodes: list[OnnxNode] = []
        weights: dict[str, np.ndarray] = {}
        inputs: list[tuple[str, list[int | None]]] = []
        outputs: list[str] = []
        for fno, _w, val in _fields(graph_buf):
            if fno == 1:
                nodes.append(_parse_node(val))
            elif fno == 5:
                name, arr = _parse_tensor(val)
                weights[name] = arr
            elif fno == 11:
                inputs.append(_parse_value_info(val))
            elif fno == 12:
                outputs.append(_parse_value_info(val)[0])

        real_inputs = [(n, d) for n, d in inputs if n not in weights]
        if len(real_inputs) != 1:
            raise OnnxFormatError(
                f"{path}: expected exactly one graph input, found "
                f"{[n for n, _ in real_inputs]}")
        if len(outputs) != 1:
            raise OnnxFormatError(
                f"{path}: expected exactly one graph output, found {outputs}")
        return cls(nodes=nodes, weights=weights,
                   input_name=real_inputs[0][0], input_dims=real_inputs[0][1],
                   output_name=outputs[0], metadata=metadata)

    def run(self, x: np.ndarray) -> np.ndarray:
        """Evaluate the graph on a (N, C, H, W) float32 input."""
        values: dict[str, np.ndarray] = dict(self.weights)
        values[self.input_name] = np.asarray(x, dtype=np.float32)
        for node in self.nodes:
            fn = _OPS.get(node.op_type)
            if fn is None:
                raise UnsupportedOpError(
                    f"node {node.name or node.outputs[0]!r}: "
                    f"unsupported op {node.op_type!r}")
            args = []
            for name in node.inputs:
                if name == "":
                    args.append(None)
                elif name in values:
                    args.append(values[name])
                else:
                    raise OnnxFormatError(
                        f"node {node.name!r}: input {name!r} not computed; "
                        "graph is not topologically ordered")
            out = fn(node, args)
            values[node.outputs[0]] = out
        if self.output_name not in values:
            raise OnnxFormatError(f"graph output {self.output_name!r} never produced")
        return values[self.output_name]


# ---------------------------------------------------------------------------
# Operator implementations
# ---------------------------------------------------------------------------

def _pads4(node: OnnxNode) -> tuple[int, int, int, int]:
    pads = node.attrs.get("pads", [0, 0, 0, 0])
    if len(pads) != 4:
        raise UnsupportedOpError(f"{node.op_type}: only 2-D pads supported, got {pads}")
    return tuple(int(p) for p in pads)  # (top, left, bottom, right)


def _hw(node: OnnxNode, key: str, default=(1, 1)) -> tuple[int, int]:
    v = node.attrs.get(key, list(default))
    return int(v[0]), int(v[1])


def _op_conv(node: OnnxNode, args):
    x, w = args[0], args[1]
    b = args[2] if len(args) > 2 else None
    sh, sw = _hw(node, "strides")
    dh, dw = _hw(node, "dilations")
    if (dh, dw) != (1, 1):
        raise UnsupportedOpError(f"Conv {node.name!r}: dilations != 1 not supported")
    pt, pl, pb, pr = _pads4(node)
    group = int(node.attrs.get("group", 1))
    n, c, _, _ = x.shape
    m, cg, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    ho, wo = win.shape[2], win.shape[3]
    outs = []
    mg = m // group
    for g in range(group):
        wg = w[g * mg:(g + 1) * mg].reshape(mg, cg * kh * kw)
        vg = win[:, g * cg:(g + 1) * cg]
        cols = vg.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, cg * kh * kw)
        outs.append((cols @ wg.T).reshape(n, ho, wo, mg).transpose(0, 3, 1, 2))
    out = outs[0] if group == 1 else np.concatenate(outs, axis=1)
    if b is not None:
        out = out + b[None, :, None, None]
    return out.astype(np.float32)


def _op_conv_transpose(node: OnnxNode, args):
    x, w = args[0], args[1]
    b = args[2] if len(args) > 2 else None
    sh, sw = _hw(node, "strides")
    pt, pl, pb, pr = _pads4(node)
    if int(node.attrs.get("group", 1)) != 1:
        raise UnsupportedOpError(f"ConvTranspose {node.name!r}: group != 1 not supported")
    n, c, h, wd = x.shape
    _, m, kh, kw = w.shape
    full = np.zeros((n, m, (h - 1) * sh + kh, (wd - 1) * sw + kw), dtype=np.float64)
    flat = x.transpose(0, 2, 3, 1).reshape(-1, c)
    for di in range(kh):
        for dj in range(kw):
            contrib = (flat @ w[:, :, di, dj]).reshape(n, h, wd, m).transpose(0, 3, 1, 2)
            full[:, :, di:di + (h - 1) * sh + 1:sh, dj:dj + (wd - 1) * sw + 1:sw] += contrib
    hf, wf = full.shape[2], full.shape[3]
    out = full[:, :, pt:hf - pb, pl:wf - pr]
    if b is not None:
        out = out + b[None, :, None, None]
    return out.astype(np.float32)


def _op_batchnorm(node: OnnxNode, args):
    x, scale, bias, mean, var = args[:5]
    eps = float(node.attrs.get("epsilon", 1e-5))
    inv = scale / np.sqrt(var + eps)
    return ((x - mean[None, :, None, None]) * inv[None, :, None, None]
            + bias[None, :, None, None]).astype(np.float32)


def _op_maxpool(node: OnnxNode, args):
    x = args[0]
    kh, kw = _hw(node, "kernel_shape")
    sh, sw = _hw(node, "strides", default=(kh, kw))
    pt, pl, pb, pr = _pads4(node)
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)),
                constant_values=-np.inf)
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    return win.max(axis=(-2, -1)).astype(np.float32)


def _op_sigmoid(node: OnnxNode, args):
    x = args[0]
    out = np.empty_like(x, dtype=np.float32)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


_OPS = {
    "Conv": _op_conv,
    "ConvTranspose": _op_conv_transpose,
    "BatchNormalization": _op_batchnorm,
    "MaxPool": _op_maxpool,
    "Relu": lambda node, args: np.maximum(args[0], 0.0),
    "Sigmoid": _op_sigmoid,
    "Add": lambda node, args: (args[0] + args[1]).astype(np.float32),
    "Concat": lambda node, args: np.concatenate(args, axis=int(node.attrs.get("axis", 0))),
    "Identity": lambda node, args: args[0],
    "Constant": lambda node, args: node.attrs["value"],
}
