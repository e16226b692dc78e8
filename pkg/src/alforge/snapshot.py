"""Versioned binary container for model parameters.

Layout: magic `ALFG`, format version (u32 LE), input/hidden/class dims
(u32 LE each), activation id (u8), then W1, b1, W2, b2 as row-major
float64 little-endian. Round-trips bit-exactly.
"""

from __future__ import annotations

import struct

import numpy as np

from .model import ACTIVATIONS, ModelParams

MAGIC = b"ALFG"
FORMAT_VERSION = 1
_HEADER = "<4sIIIIB"


def save_model(params: ModelParams, path: str) -> None:
    params.validate()
    act_id = ACTIVATIONS.index(params.activation)
    with open(path, "wb") as f:
        f.write(struct.pack(_HEADER, MAGIC, FORMAT_VERSION,
                            params.input_dim, params.hidden_dim,
                            params.n_classes, act_id))
        for t in (params.W1, params.b1, params.W2, params.b2):
            f.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def load_model(path: str) -> ModelParams:
    with open(path, "rb") as f:
        head = f.read(struct.calcsize(_HEADER))
        if len(head) < struct.calcsize(_HEADER):
            raise ValueError(f"truncated model snapshot: {path}")
        magic, version, d_in, d_hid, n_cls, act_id = struct.unpack(_HEADER, head)
        if magic != MAGIC:
            raise ValueError(f"not a model snapshot (bad magic): {path}")
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}: {path}")
        if act_id >= len(ACTIVATIONS):
            raise ValueError(f"unknown activation id {act_id}: {path}")

        def tensor(*shape: int) -> np.ndarray:
            count = int(np.prod(shape))
            buf = f.read(count * 8)
            if len(buf) != count * 8:
                raise ValueError(f"truncated model snapshot: {path}")
            return np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(shape)

        params = ModelParams(W1=tensor(d_hid, d_in), b1=tensor(d_hid),
                             W2=tensor(n_cls, d_hid), b2=tensor(n_cls),
                             activation=ACTIVATIONS[act_id])
        if f.read(1):
            raise ValueError(f"trailing bytes in model snapshot: {path}")
    params.validate()
    return params
