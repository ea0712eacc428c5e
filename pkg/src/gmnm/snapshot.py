"""Bit-exact JSON snapshots of named float64 arrays.

Each array is stored as ``{"shape": [...], "hex": [...]}`` with row-major
``float.hex`` strings, which round-trip every 64-bit value exactly.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def encode_array(a) -> dict:
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "hex": [float(v).hex() for v in a.ravel()]}


def decode_array(obj) -> np.ndarray:
    data = np.array([float.fromhex(h) for h in obj["hex"]], dtype=np.float64)
    return data.reshape(obj["shape"])


def dump_arrays(path, config: dict, arrays: dict) -> None:
    doc = {"config": config}
    doc.update({k: encode_array(v) for k, v in arrays.items()})
    Path(path).write_text(json.dumps(doc, indent=1))


def load_arrays(path) -> tuple[dict, dict]:
    doc = json.loads(Path(path).read_text())
    config = doc.pop("config")
    return config, {k: decode_array(v) for k, v in doc.items()}
