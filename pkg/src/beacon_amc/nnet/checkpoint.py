"""Checkpoint file: named float32 parameter blocks with a CRC32 trailer.

Layout (little-endian): magic "BEACONCK", u16 version, u32 block count, then
per block u16 name length + name bytes + u8 ndim + u32 dims + f32 payload,
then u32 CRC32 of everything between the header and the trailer.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from ..errors import FileChecksumError, FileFormatError, FileTruncatedError

_MAGIC = b"BEACONCK"
_VERSION = 1


def save_params(path, params, version=_VERSION) -> None:
    """Write name -> array blocks; payloads are cast to little-endian f32."""
    chunks = []
    for name, arr in params.items():
        raw = name.encode("utf-8")
        arr = np.ascontiguousarray(arr, dtype="<f4")
        chunks.append(struct.pack("<H", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    body = b"".join(chunks)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<HI", version, len(params)))
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body)))


def load_params(path) -> dict:
    """Read blocks back as float32 arrays, verifying magic and CRC32."""
    with open(path, "rb") as fh:
        raw = fh.read()
    header_size = len(_MAGIC) + struct.calcsize("<HI")
    if len(raw) < header_size + 4:
        raise FileTruncatedError("checkpoint shorter than its fixed header")
    if raw[: len(_MAGIC)] != _MAGIC:
        raise FileFormatError("bad magic bytes; not a checkpoint file")
    version, n_blocks = struct.unpack_from("<HI", raw, len(_MAGIC))
    if version != _VERSION:
        raise FileFormatError(f"unsupported checkpoint version {version}")
    body = raw[header_size:-4]

    # parse the block structure first so truncation is reported as such,
    # then verify the checksum over the structurally complete body
    params = {}
    off = 0
    for _ in range(n_blocks):
        try:
            (name_len,) = struct.unpack_from("<H", body, off)
            off += 2
            name = body[off : off + name_len].decode("utf-8")
            off += name_len
            (ndim,) = struct.unpack_from("<B", body, off)
            off += 1
            shape = struct.unpack_from(f"<{ndim}I", body, off)
            off += 4 * ndim
            count = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(body, dtype="<f4", count=count, offset=off)
            off += 4 * count
        except (struct.error, ValueError) as exc:
            raise FileTruncatedError("checkpoint ends inside a parameter block") from exc
        params[name] = arr.reshape(shape).copy()
    if off != len(body):
        raise FileFormatError("trailing bytes after the declared parameter blocks")
    (crc_stored,) = struct.unpack_from("<I", raw, len(raw) - 4)
    if zlib.crc32(body) != crc_stored:
        raise FileChecksumError("checkpoint body CRC32 mismatch")
    return params
