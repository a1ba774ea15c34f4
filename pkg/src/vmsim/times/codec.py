"""Bit-exact binary codec for time series (the TSB1 format).

Layout, all integers and floats big-endian:

    magic "TSB1"   4 octets
    name_len       u32
    name           UTF-8, name_len octets
    start_s        i64
    interval_s     u32
    count          u32
    samples        count x f64

Identical input yields identical bytes on every platform, so encoded blobs
can be compared and stored byte-for-byte.
"""

from __future__ import annotations

import math
import struct

from vmsim.model import TimeSeries

MAGIC = b"TSB1"
MAX_NAME_OCTETS = 0xFFFF

_HEAD = struct.Struct(">4sI")     # magic, name_len
_META = struct.Struct(">qII")     # start_s, interval_s, count


class CodecError(Exception):
    """Base class for every decode/encode rejection."""


class BadMagic(CodecError):
    pass


class TruncatedPayload(CodecError):
    """Declared lengths exceed the available octets."""


class InvalidSample(CodecError):
    """A sample is non-finite or outside [0, 100]."""


class InvalidHeader(CodecError):
    """Structurally well-framed but not a valid series (bad name, interval, trailing data)."""


class NameTooLong(CodecError):
    """Series name exceeds the u16 name budget of the format."""


def encoded_length(name_octets: int, count: int) -> int:
    return _HEAD.size + name_octets + _META.size + 8 * count


def encode_series(series: TimeSeries) -> bytes:
    name = series.name.encode("utf-8")
    if len(name) > MAX_NAME_OCTETS:
        raise NameTooLong(f"name is {len(name)} octets, limit {MAX_NAME_OCTETS}")
    parts = [
        _HEAD.pack(MAGIC, len(name)),
        name,
        _META.pack(series.start_s, series.interval_s, len(series.samples)),
        struct.pack(f">{len(series.samples)}d", *series.samples),
    ]
    return b"".join(parts)


def decode_series(data: bytes) -> TimeSeries:
    """Inverse of encode_series on its image; rejects arbitrary input safely.

    All declared lengths are checked against the actual octet count before
    any slice is taken, so hostile headers cannot trigger large allocations
    or over-reads.
    """
    if len(data) < _HEAD.size:
        if data[: min(len(data), 4)] != MAGIC[: min(len(data), 4)]:
            raise BadMagic("magic octets do not spell TSB1")
        raise TruncatedPayload(f"{len(data)} octets cannot hold a TSB1 header")
    magic, name_len = _HEAD.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagic(f"magic octets {magic!r} do not spell TSB1")
    if name_len > MAX_NAME_OCTETS:
        raise InvalidHeader(f"name_len {name_len} exceeds limit {MAX_NAME_OCTETS}")
    offset = _HEAD.size
    if len(data) < offset + name_len + _META.size:
        raise TruncatedPayload("octets end inside the name or metadata fields")
    try:
        name = data[offset:offset + name_len].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InvalidHeader(f"name is not valid UTF-8: {exc}") from None
    offset += name_len
    start_s, interval_s, count = _META.unpack_from(data, offset)
    offset += _META.size
    if interval_s < 1:
        raise InvalidHeader(f"interval_s must be >= 1, got {interval_s}")
    expected = offset + 8 * count
    if len(data) < expected:
        raise TruncatedPayload(
            f"declared {count} samples need {expected} octets, got {len(data)}"
        )
    if len(data) > expected:
        raise InvalidHeader(f"{len(data) - expected} trailing octets after the samples")
    samples = struct.unpack_from(f">{count}d", data, offset)
    for i, s in enumerate(samples):
        if not math.isfinite(s) or not 0.0 <= s <= 100.0:
            raise InvalidSample(f"samples[{i}]={s!r} outside [0, 100]")
    return TimeSeries(name=name, start_s=start_s, interval_s=interval_s, samples=samples)
