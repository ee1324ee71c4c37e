"""Weight store and the self-describing weight file format.

File layout (text/binary hybrid)::

    b"LICW1\\n"                         magic line
    b"<name> <d0,d1,...> <count>\\n"    one text header line per parameter
    <count * 4 bytes>                   little-endian float32 payload
    ... repeated ...

A zero-length file loads as an empty store.  Duplicate names, shape/count
mismatches, and short payloads are load errors.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .errors import ConfigError

MAGIC = b"LICW1\n"


class WeightStore:
    """Named map from parameter path to float32 array."""

    def __init__(self):
        self._params: dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self._params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        arr = np.ascontiguousarray(value, dtype=np.float32)
        self._params[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._params[name]
        except KeyError:
            raise ConfigError(f"missing parameter {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()


def save_weights(store: WeightStore, path) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for name, arr in store.items():
            dims = ",".join(str(d) for d in arr.shape) if arr.shape else "1"
            fh.write(f"{name} {dims} {arr.size}\n".encode("ascii"))
            fh.write(arr.astype("<f4", copy=False).tobytes(order="C"))


def load_weights(path) -> WeightStore:
    """Load a weight file; rejects duplicates and malformed records."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"weight file not found: {path}")
    data = path.read_bytes()
    store = WeightStore()
    if len(data) == 0:
        return store
    if not data.startswith(MAGIC):
        raise ConfigError(f"{path}: not a weight file (bad magic)")
    pos = len(MAGIC)
    while pos < len(data):
        nl = data.find(b"\n", pos)
        if nl < 0:
            raise ConfigError(f"{path}: truncated header line at byte {pos}")
        line = data[pos:nl].decode("ascii", errors="replace")
        pos = nl + 1
        parts = line.split()
        if len(parts) != 3:
            raise ConfigError(f"{path}: malformed record {line!r}")
        name, dims_s, count_s = parts
        try:
            shape = tuple(int(d) for d in dims_s.split(","))
            count = int(count_s)
        except ValueError:
            raise ConfigError(f"{path}: malformed record {line!r}") from None
        if any(d < 1 for d in shape) or count < 1:
            raise ConfigError(f"{path}: bad shape in record {line!r}")
        prod = 1
        for d in shape:
            prod *= d
        if prod != count:
            raise ConfigError(
                f"{path}: {name}: declared shape {shape} has {prod} elements, "
                f"record says {count}"
            )
        nbytes = 4 * count
        if pos + nbytes > len(data):
            raise ConfigError(f"{path}: {name}: payload truncated")
        arr = np.frombuffer(data[pos : pos + nbytes], dtype="<f4").reshape(shape)
        pos += nbytes
        store.add(name, arr)
    return store


def weight_file_hash(path) -> int:
    """64-bit identity of a weight file (first 8 bytes of its SHA-256)."""
    digest = hashlib.sha256(Path(path).read_bytes()).digest()
    return int.from_bytes(digest[:8], "big")
