"""Workload time-series store: binary codec, file store, network service."""

from vmsim.times.codec import (
    BadMagic,
    CodecError,
    InvalidHeader,
    InvalidSample,
    NameTooLong,
    TruncatedPayload,
    decode_series,
    encode_series,
)
from vmsim.times.store import InvalidName, NotFound, SeriesStore, StorageFailure
from vmsim.times.net import BindFailure, ProtocolError, TimesClient, TimesServer

__all__ = [
    "BadMagic",
    "BindFailure",
    "CodecError",
    "InvalidHeader",
    "InvalidName",
    "InvalidSample",
    "NameTooLong",
    "NotFound",
    "ProtocolError",
    "SeriesStore",
    "StorageFailure",
    "TimesClient",
    "TimesServer",
    "TruncatedPayload",
    "decode_series",
    "encode_series",
]
