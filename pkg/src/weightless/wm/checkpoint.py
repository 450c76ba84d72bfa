"""Binary network checkpoints.

Layout: the 8-byte magic ``b"WLSTMCK\\0"``, a little-endian uint32 header
length, a UTF-8 JSON header, then the parameter blobs back to back as
little-endian float64 in C order. The header lists every blob with its
name, shape and byte offset relative to the start of the blob section.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import FormatError
from .network import WINDOW, WMNetwork

MAGIC = b"WLSTMCK\0"
CHECKPOINT_FORMAT_VERSION = 1


def save_checkpoint(net: WMNetwork, path, provenance: dict | None = None) -> None:
    blobs = []
    entries = []
    offset = 0
    for name in net.names:
        a = np.ascontiguousarray(net.params[name], dtype="<f8")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset})
        blobs.append(a.tobytes())
        offset += a.nbytes
    header = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "architecture": {"K": net.K, "input_dim": WINDOW * net.K, "hidden": list(net.hidden),
                         "dropout": net.dropout, "gates": "i,f,g,o", "output": "sigmoid"},
        "params": entries,
        "provenance": provenance or {},
    }
    raw = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(raw)))
        f.write(raw)
        for b in blobs:
            f.write(b)


def load_checkpoint(path) -> tuple[WMNetwork, dict]:
    """Returns the network and the header's provenance block."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] != MAGIC:
        raise FormatError(f"{path}: not a network checkpoint (bad magic at byte 0)")
    if len(data) < 12:
        raise FormatError(f"{path}: truncated header length at byte 8")
    (n,) = struct.unpack("<I", data[8:12])
    if len(data) < 12 + n:
        raise FormatError(f"{path}: header truncated at byte {len(data)}, expected {12 + n}")
    try:
        header = json.loads(data[12:12 + n].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: malformed header: {e}") from None
    if header.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint format_version {header.get('format_version')!r}")
    arch = header["architecture"]
    base = 12 + n
    params = {}
    for e in header["params"]:
        count = int(np.prod(e["shape"])) if e["shape"] else 1
        lo = base + e["offset"]
        hi = lo + 8 * count
        if hi > len(data):
            raise FormatError(f"{path}: blob {e['name']!r} truncated at byte {len(data)}, expected {hi}")
        params[e["name"]] = np.frombuffer(data[lo:hi], dtype="<f8").reshape(e["shape"]).astype(float)
    net = WMNetwork(int(arch["K"]), tuple(arch["hidden"]), params, float(arch["dropout"]))
    missing = set(net.names) - set(params)
    if missing:
        raise FormatError(f"{path}: missing parameters {sorted(missing)}")
    return net, header.get("provenance", {})
