"""Single-file checkpoints: a text manifest plus one float32 blob.

Byte-exact layout (all text lines ASCII, LF-terminated):

    REVERB-CKPT 1
    meta <key> <value>          # zero or more, sorted by key
    tensor <name> float32 <d0,d1,...> <byte-offset>
                                # one per array, sorted by name
    blob <total-bytes>
    <raw little-endian float32 data, C order, in manifest order>

Values are stored as little-endian float32 (training state is float64,
so saving is lossy at the 7th significant digit).  Writes go to a
temporary file in the target directory followed by an atomic rename.
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import ParseError

MAGIC = "REVERB-CKPT 1"


def save(path, arrays: dict, meta: dict | None = None):
    meta = dict(meta or {})
    names = sorted(arrays)
    lines = [MAGIC]
    for key in sorted(meta):
        value = str(meta[key])
        if "\n" in value or " " in str(key):
            raise ValueError(f"invalid meta entry {key!r}")
        lines.append(f"meta {key} {value}")
    blobs = []
    offset = 0
    for name in names:
        if " " in name:
            raise ValueError(f"tensor names must not contain spaces: {name!r}")
        if np.ndim(arrays[name]) == 0:
            raise ValueError(f"scalar {name!r} belongs in meta, not the blob")
        a = np.ascontiguousarray(np.asarray(arrays[name]), dtype="<f4")
        dims = ",".join(str(d) for d in a.shape)
        lines.append(f"tensor {name} float32 {dims} {offset}")
        raw = a.tobytes(order="C")
        blobs.append(raw)
        offset += len(raw)
    lines.append(f"blob {offset}")
    payload = ("\n".join(lines) + "\n").encode("ascii") + b"".join(blobs)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as f:
        f.write(payload)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def load(path):
    """Read a checkpoint; returns (arrays: name -> float64 ndarray, meta)."""
    entries = []
    meta = {}
    with open(path, "rb") as f:
        first = f.readline().decode("ascii", errors="replace").rstrip("\n")
        if first != MAGIC:
            raise ParseError(f"not a checkpoint (bad magic {first!r})", path=path, line=1)
        line_no = 1
        blob_size = None
        while True:
            line = f.readline()
            line_no += 1
            if not line:
                raise ParseError("truncated manifest", path=path, line=line_no)
            text = line.decode("ascii", errors="replace").rstrip("\n")
            if text.startswith("meta "):
                _, key, value = text.split(" ", 2)
                meta[key] = value
            elif text.startswith("tensor "):
                parts = text.split(" ")
                if len(parts) != 5 or parts[2] != "float32":
                    raise ParseError(f"bad tensor line {text!r}", path=path, line=line_no)
                shape = tuple(int(d) for d in parts[3].split(","))
                entries.append((parts[1], shape, int(parts[4])))
            elif text.startswith("blob "):
                blob_size = int(text.split(" ")[1])
                break
            else:
                raise ParseError(f"unexpected line {text!r}", path=path, line=line_no)
        blob = f.read()
    if blob_size is None or len(blob) != blob_size:
        raise ParseError(
            f"blob size mismatch: manifest {blob_size}, file {len(blob)}", path=path
        )
    arrays = {}
    for name, shape, offset in entries:
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if end > blob_size:
            raise ParseError(f"tensor {name!r} overruns the blob", path=path)
        flat = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        arrays[name] = flat.reshape(shape).astype(np.float64)
    return arrays, meta
