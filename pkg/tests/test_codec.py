import struct

import pytest
from hypothesis import given, settings, strategies as st

from vmsim.model import TimeSeries
from vmsim.times.codec import (
    BadMagic,
    CodecError,
    InvalidHeader,
    InvalidSample,
    NameTooLong,
    TruncatedPayload,
    decode_series,
    encode_series,
    encoded_length,
)

names = st.text(
    st.characters(codec="utf-8", exclude_categories=("Cs",)), max_size=24)
series_strategy = st.builds(
    TimeSeries,
    name=names,
    start_s=st.integers(min_value=-2**40, max_value=2**40),
    interval_s=st.integers(min_value=1, max_value=10_000),
    samples=st.lists(
        st.floats(min_value=0.0, max_value=100.0, allow_nan=False),
        max_size=50).map(tuple),
)


def test_golden_byte_layout():
    series = TimeSeries(name="a", start_s=0, interval_s=3, samples=(1.0,))
    blob = encode_series(series)
    expected = (
        b"TSB1"
        + b"\x00\x00\x00\x01"                  # name_len
        + b"a"
        + b"\x00" * 8                           # start_s
        + b"\x00\x00\x00\x03"                  # interval_s
        + b"\x00\x00\x00\x01"                  # count
        + bytes.fromhex("3FF0000000000000")    # 1.0 as big-endian f64
    )
    assert blob == expected
    assert len(blob) == 33


@given(series_strategy)
def test_round_trip(series):
    assert decode_series(encode_series(series)) == series


@given(series_strategy)
def test_encoding_deterministic_and_sized(series):
    first = encode_series(series)
    assert first == encode_series(series)
    assert len(first) == encoded_length(len(series.name.encode("utf-8")),
                                        len(series.samples))


def test_bad_magic():
    with pytest.raises(BadMagic):
        decode_series(b"XXXX" + b"\x00" * 29)


def test_truncated_sample_payload():
    good = encode_series(TimeSeries(name="a", start_s=0, interval_s=3, samples=(1.0,)))
    # Same header but claiming 10 samples with only one present.
    forged = good[:21] + struct.pack(">I", 10) + good[25:]
    with pytest.raises(TruncatedPayload):
        decode_series(forged)


def test_truncated_header():
    with pytest.raises(TruncatedPayload):
        decode_series(b"TSB1\x00\x00")


def test_invalid_sample_value():
    good = encode_series(TimeSeries(name="a", start_s=0, interval_s=3, samples=(1.0,)))
    forged = good[:-8] + struct.pack(">d", 250.0)
    with pytest.raises(InvalidSample):
        decode_series(forged)
    forged = good[:-8] + struct.pack(">d", float("nan"))
    with pytest.raises(InvalidSample):
        decode_series(forged)


def test_trailing_garbage_rejected():
    good = encode_series(TimeSeries(name="a", start_s=0, interval_s=3, samples=(1.0,)))
    with pytest.raises(InvalidHeader):
        decode_series(good + b"\x00")


def test_zero_interval_rejected():
    good = encode_series(TimeSeries(name="a", start_s=0, interval_s=3, samples=(1.0,)))
    forged = good[:17] + struct.pack(">I", 0) + good[21:]
    with pytest.raises(InvalidHeader):
        decode_series(forged)


def test_name_too_long_on_encode():
    series = TimeSeries(name="x" * 70_000, start_s=0, interval_s=1, samples=(1.0,))
    with pytest.raises(NameTooLong):
        encode_series(series)


def test_oversized_name_len_rejected_without_allocation():
    forged = b"TSB1" + struct.pack(">I", 0xFFFFFFFF) + b"x" * 64
    with pytest.raises(CodecError):
        decode_series(forged)


@settings(max_examples=500)
@given(st.binary(max_size=200))
def test_fuzzed_octets_never_crash(data):
    try:
        decoded = decode_series(data)
    except CodecError:
        return
    assert isinstance(decoded, TimeSeries)


@settings(max_examples=200)
@given(series_strategy, st.integers(min_value=0, max_value=40), st.binary(min_size=1, max_size=4))
def test_mutated_valid_blobs_never_crash(series, position, junk):
    blob = bytearray(encode_series(series))
    position %= len(blob)
    blob[position:position + len(junk)] = junk
    try:
        decode_series(bytes(blob))
    except CodecError:
        pass
