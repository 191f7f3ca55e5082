"""Binary parameter checkpoints.

Layout (all little-endian)::

    bytes 0-3   magic  b"ECNT"
    bytes 4-5   uint16 format version (1)
    bytes 6-7   uint16 model kind: 0 = ecnn, 1 = rnn, 2 = lstm
    bytes 8-19  uint32 n, m, p
    then every parameter array as float64, row-major, in the kind's
    declared order (ecnn: A B C D; rnn: A B C;
    lstm: Wi bi Wf bf Wo bo Wg bg C)
"""
import struct

import numpy as np

from .models import get_kind

MAGIC = b"ECNT"
VERSION = 1
KIND_CODES = {"ecnn": 0, "rnn": 1, "lstm": 2}
_HEADER = struct.Struct("<4sHH3I")


def dumps(params):
    n, m, p = params.dims
    parts = [_HEADER.pack(MAGIC, VERSION, KIND_CODES[params.kind], n, m, p)]
    for name in params.names:
        parts.append(np.ascontiguousarray(getattr(params, name), dtype="<f8").tobytes())
    return b"".join(parts)


def loads(blob):
    if len(blob) < _HEADER.size:
        raise ValueError("checkpoint truncated: missing header")
    magic, version, code, n, m, p = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ValueError(f"not a checkpoint (magic {magic!r})")
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    names = {v: k for k, v in KIND_CODES.items()}
    if code not in names:
        raise ValueError(f"unknown model kind code {code}")
    cls = get_kind(names[code]).params_cls
    shapes = cls.expected_shapes(n, m, p)
    offset = _HEADER.size
    arrays = {}
    for name in cls.names:
        count = int(np.prod(shapes[name]))
        end = offset + 8 * count
        if end > len(blob):
            raise ValueError(f"checkpoint truncated inside {name}")
        arrays[name] = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shapes[name]).copy()
        offset = end
    if offset != len(blob):
        raise ValueError(f"checkpoint has {len(blob) - offset} trailing bytes")
    return cls(**arrays)


def save(path, params):
    with open(path, "wb") as fh:
        fh.write(dumps(params))


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
