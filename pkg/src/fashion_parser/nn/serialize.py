"""Versioned binary model files.

Layout::

    FPMODEL <version>\n
    <one line of JSON: {"spec": {...}, "arrays": [[name, shape], ...]}>\n
    <float64 little-endian data of every array, in header order>

The JSON header is written with sorted keys, so identical models produce
byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

MAGIC = "FPMODEL"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


def save_model_file(path, spec: dict, arrays: dict[str, np.ndarray]) -> None:
    header = {"spec": spec, "arrays": [[name, list(np.shape(a))] for name, a in arrays.items()]}
    with open(path, "wb") as fh:
        fh.write(f"{MAGIC} {FORMAT_VERSION}\n".encode())
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for a in arrays.values():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_model_file(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        first = fh.readline().decode("ascii", errors="replace").split()
        if len(first) != 2 or first[0] != MAGIC:
            raise ModelFormatError(f"{path}: not a model file")
        if first[1] != str(FORMAT_VERSION):
            raise ModelFormatError(f"{path}: unsupported model format version {first[1]}")
        header = json.loads(fh.readline().decode("utf-8"))
        arrays = {}
        for name, shape in header["arrays"]:
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * count)
            if len(buf) != 8 * count:
                raise ModelFormatError(f"{path}: truncated data for array {name}")
            arrays[name] = np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(shape)
        if fh.read(1):
            raise ModelFormatError(f"{path}: trailing bytes after last array")
    return header["spec"], arrays


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def arrays_digest(arrays: dict[str, np.ndarray]) -> str:
    """Hash of parameter values, used to prove a frozen stage was not touched."""
    h = hashlib.sha256()
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name], dtype="<f8")
        h.update(name.encode())
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()
