"""Flat binary parameter container.

Layout (version 1, everything little-endian):

    bytes 0-3    magic ``b"NGCK"``
    bytes 4-7    format version, uint32
    bytes 8-15   manifest length in bytes, uint64
    manifest     UTF-8 JSON: network spec plus an ``arrays`` list of
                 ``{name, shape, offset}`` entries (offsets are relative to
                 the start of the data section; dtype is always ``<f8``)
    data         the arrays' raw bytes, in manifest order

Array names are ``w`` for the head and ``xi.<layer>.<block>`` for hidden
blocks; batch-norm running statistics are stored alongside the trainable
blocks so inference reproduces exactly.
"""

import json
from pathlib import Path

import numpy as np

from .config import layer_from_dict, layer_to_dict
from .errors import DataFormatError
from .layers import LayerParams
from .nn import NetworkParams, NetworkSpec

MAGIC = b"NGCK"
VERSION = 1


def _spec_to_dict(spec: NetworkSpec) -> dict:
    return {
        "layers": [layer_to_dict(sp) for sp in spec.layers],
        "n_classes": spec.n_classes,
        "input_shape": list(spec.input_shape),
        "softmax_sign": spec.softmax_sign,
        "augment_constant_basis": spec.augment_constant_basis,
    }


def _spec_from_dict(d: dict) -> NetworkSpec:
    return NetworkSpec(
        layers=tuple(layer_from_dict(sp) for sp in d["layers"]),
        n_classes=d["n_classes"],
        input_shape=tuple(d["input_shape"]),
        softmax_sign=d["softmax_sign"],
        augment_constant_basis=d["augment_constant_basis"],
    )


def _named_arrays(params: NetworkParams):
    yield "w", params.w
    for i, layer in enumerate(params.xi):
        for name, arr in layer.trainable.items():
            yield f"xi.{i}.{name}", arr
        for name, arr in layer.state.items():
            yield f"xi.{i}.state.{name}", arr


def save_checkpoint(path, spec: NetworkSpec, params: NetworkParams) -> None:
    entries = []
    blobs = []
    offset = 0
    for name, arr in _named_arrays(params):
        arr = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    manifest = json.dumps(
        {"version": VERSION, "spec": _spec_to_dict(spec), "arrays": entries},
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(np.uint32(VERSION).tobytes())
        f.write(np.uint64(len(manifest)).tobytes())
        f.write(manifest)
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path) -> tuple[NetworkSpec, NetworkParams]:
    buf = Path(path).read_bytes()
    if buf[:4] != MAGIC:
        raise DataFormatError(f"{path}: bad checkpoint magic {buf[:4]!r}")
    version = int(np.frombuffer(buf, dtype="<u4", count=1, offset=4)[0])
    if version != VERSION:
        raise DataFormatError(f"{path}: unsupported checkpoint version {version}")
    mlen = int(np.frombuffer(buf, dtype="<u8", count=1, offset=8)[0])
    manifest = json.loads(buf[16 : 16 + mlen].decode("utf-8"))
    spec = _spec_from_dict(manifest["spec"])
    data_start = 16 + mlen
    arrays = {}
    for entry in manifest["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = data_start + entry["offset"]
        if start + 8 * count > len(buf):
            raise DataFormatError(f"{path}: truncated data for array {entry['name']}")
        arrays[entry["name"]] = (
            np.frombuffer(buf, dtype="<f8", count=count, offset=start)
            .reshape(shape)
            .copy()
        )
    xi = [LayerParams() for _ in spec.layers]
    w = None
    for name, arr in arrays.items():
        if name == "w":
            w = arr
            continue
        parts = name.split(".")
        idx = int(parts[1])
        if parts[2] == "state":
            xi[idx].state[parts[3]] = arr
        else:
            xi[idx].trainable[parts[2]] = arr
    if w is None:
        raise DataFormatError(f"{path}: checkpoint has no head matrix")
    return spec, NetworkParams(w=w, xi=xi)
