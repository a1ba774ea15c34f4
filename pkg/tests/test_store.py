import threading

import pytest

from vmsim.model import TimeSeries
from vmsim.times.codec import decode_series
from vmsim.times.store import InvalidName, NotFound, SeriesStore

from helpers import constant_series


@pytest.fixture
def store(tmp_path):
    return SeriesStore(tmp_path / "store")


def test_put_get_round_trip(store):
    series = constant_series("w1", 42.0)
    store.put("w1", series)
    assert store.get("w1") == series


def test_overwrite_is_last_write_wins(store):
    store.put("w1", constant_series("w1", 10.0))
    second = constant_series("w1", 20.0)
    store.put("w1", second)
    assert store.get("w1") == second


def test_get_absent_name(store):
    with pytest.raises(NotFound):
        store.get("nope")


@pytest.mark.parametrize("name", ["../x", "a/b", "", ".", "..", "a b", "x\x00"])
def test_invalid_names_rejected(store, name):
    with pytest.raises(InvalidName):
        store.put(name, constant_series("w", 1.0))
    with pytest.raises(InvalidName):
        store.get(name)


def test_valid_name_characters(store):
    store.put("A-1_b.c", constant_series("w", 1.0))
    assert store.list() == ["A-1_b.c"]


def test_list_prefix_sorted(store):
    for name in ("b1", "a2", "a1"):
        store.put(name, constant_series(name, 1.0))
    assert store.list("a") == ["a1", "a2"]
    assert store.list("") == ["a1", "a2", "b1"]
    assert store.list("zz") == []


def test_list_empty_store(store):
    assert store.list() == []
    assert store.list("a") == []


def test_index_maps_names_to_files(store):
    store.put("w1", constant_series("w1", 1.0))
    index = store.index
    assert set(index) == {"w1"}
    assert decode_series(index["w1"].read_bytes()).name == "w1"


def test_put_bytes_validates_blob(store):
    with pytest.raises(Exception):
        store.put_bytes("w1", b"garbage")
    assert store.list() == []


def test_stored_file_is_exact_encoding(store):
    series = constant_series("w1", 33.0)
    store.put("w1", series)
    from vmsim.times.codec import encode_series

    assert store.get_bytes("w1") == encode_series(series)


def test_concurrent_puts_leave_one_intact_series(store):
    # Writers race on a single name; the survivor must be one of the written
    # series, not an interleaving.
    variants = [
        TimeSeries(name="w", start_s=0, interval_s=1, samples=(float(k),) * 64)
        for k in range(8)
    ]
    barrier = threading.Barrier(len(variants))

    def writer(series):
        barrier.wait()
        for _ in range(20):
            store.put("w", series)

    threads = [threading.Thread(target=writer, args=(v,)) for v in variants]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    survivor = store.get("w")
    assert survivor in variants
