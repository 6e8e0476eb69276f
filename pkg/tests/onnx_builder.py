"""Minimal ONNX protobuf writer for building test graphs byte-by-byte."""

from __future__ import annotations

import numpy as np


def varint(v: int) -> bytes:
    out = bytearray()
    while True:
        b = v & 0x7F
        v >>= 7
        if v:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def tag(fno: int, wtype: int) -> bytes:
    return varint((fno << 3) | wtype)


def len_field(fno: int, payload: bytes) -> bytes:
    return tag(fno, 2) + varint(len(payload)) + payload


def str_field(fno: int, s: str) -> bytes:
    return len_field(fno, s.encode())


def varint_field(fno: int, v: int) -> bytes:
    return tag(fno, 0) + varint(v)


def tensor(name: str, arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    if arr.dtype == np.float32 or arr.dtype == np.float64:
        arr = arr.astype("<f4")
        dtype_code = 1
    elif arr.dtype == np.int64:
        arr = arr.astype("<i8")
        dtype_code = 7
    else:
        raise ValueError(arr.dtype)
    dims = b"".join(varint(d) for d in arr.shape)
    out = len_field(1, dims)  # packed dims
    out += varint_field(2, dtype_code)
    out += str_field(8, name)
    out += len_field(9, arr.tobytes(order="C"))
    return out


def attr_int(name: str, v: int) -> bytes:
    return str_field(1, name) + varint_field(3, v) + varint_field(20, 2)


def attr_ints(name: str, vals) -> bytes:
    payload = b"".join(varint(int(v)) for v in vals)
    return str_field(1, name) + len_field(8, payload) + varint_field(20, 7)


def attr_float(name: str, v: float) -> bytes:
    return (str_field(1, name) + tag(2, 5) +
            np.array(v, dtype="<f4").tobytes() + varint_field(20, 1))


def node(op_type: str, inputs, outputs, attrs=(), name="") -> bytes:
    out = b"".join(str_field(1, i) for i in inputs)
    out += b"".join(str_field(2, o) for o in outputs)
    out += str_field(3, name or outputs[0])
    out += str_field(4, op_type)
    out += b"".join(len_field(5, a) for a in attrs)
    return out


def value_info(name: str, dims) -> bytes:
    shape = b""
    for d in dims:
        if d is None:
            dim = str_field(2, "dyn")
        else:
            dim = varint_field(1, int(d))
        shape += len_field(1, dim)
    tensor_type = varint_field(1, 1) + len_field(2, shape)  # elem_type FLOAT
    type_proto = len_field(1, tensor_type)
    return str_field(1, name) + len_field(2, type_proto)


def graph(nodes, initializers, inputs, outputs, name="g") -> bytes:
    out = b"".join(len_field(1, n) for n in nodes)
    out += str_field(2, name)
    out += b"".join(len_field(5, t) for t in initializers)
    out += b"".join(len_field(11, vi) for vi in inputs)
    out += b"".join(len_field(12, vi) for vi in outputs)
    return out


def model(graph_bytes: bytes, metadata: dict | None = None,
          opset: int = 13, ir_version: int = 8) -> bytes:
    out = varint_field(1, ir_version)
    out += str_field(2, "test-builder")
    out += len_field(7, graph_bytes)
    out += len_field(8, str_field(1, "") + varint_field(2, opset))
    for k, v in (metadata or {}).items():
        out += len_field(14, str_field(1, k) + str_field(2, v))
    return out


def single_conv_model(weights: np.ndarray, bias: np.ndarray | None = None,
                      metadata: dict | None = None,
                      input_dims=(1, 3, None, None)) -> bytes:
    """A one-Conv(1x1) graph from 'image' to 'prob'."""
    inits = [tensor("w", weights)]
    conv_inputs = ["image", "w"]
    if bias is not None:
        inits.append(tensor("b", bias))
        conv_inputs.append("b")
    n = node("Conv", conv_inputs, ["prob"],
             attrs=[attr_ints("kernel_shape", weights.shape[2:]),
                    attr_ints("strides", (1, 1)),
                    attr_ints("pads", (0, 0, 0, 0))])
    g = graph([n], inits, [value_info("image", input_dims)],
              [value_info("prob", (1, 1, None, None))])
    return model(g, metadata)
