"""Versioned checkpoint envelope shared by every trainable model.

A checkpoint is a self-describing JSON document: magic, version, schema
hash, an architecture descriptor, and the flat parameter arrays in declared
order. Python's shortest-repr float serialization makes the round trip
bit-exact for finite float64 values (parameters are validated finite).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

MAGIC = "PCAFE"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Envelope:
    architecture: dict
    params: list  # [(name, np.ndarray)] in declared order
    schema_hash: str

    def param_dict(self):
        return dict(self.params)


def save_checkpoint(path, architecture, params, schema_hash):
    """Write an envelope; params is an ordered iterable of (name, array)."""
    entries = []
    for name, arr in params:
        arr = np.asarray(arr, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise CheckpointError(f"non-finite parameter {name}")
        entries.append(
            {"name": name, "shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
        )
    doc = {
        "magic": MAGIC,
        "version": VERSION,
        "schema_hash": schema_hash,
        "architecture": architecture,
        "params": entries,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("magic") != MAGIC:
        raise CheckpointError(f"bad magic {doc.get('magic')!r}")
    if doc.get("version") != VERSION:
        raise CheckpointError(f"unsupported version {doc.get('version')!r}")
    params = []
    for entry in doc["params"]:
        arr = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        params.append((entry["name"], arr))
    return Envelope(
        architecture=doc["architecture"],
        params=params,
        schema_hash=doc["schema_hash"],
    )


def param_checksum(params):
    """Stable digest of named parameter arrays; order-sensitive."""
    h = hashlib.sha256()
    for name, arr in params:
        h.update(name.encode())
        h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
    return h.hexdigest()
