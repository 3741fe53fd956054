import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from provkit.dataset import open_dataset, write_dataset
from provkit.errors import FormatError


def test_two_doc_layout(tmp_path):
    bin_path, idx_path = write_dataset([[1, 2, 3], [4]], "u16", tmp_path / "toy")
    assert bin_path.read_bytes() == bytes([1, 0, 2, 0, 3, 0, 4, 0])
    ds = open_dataset(tmp_path / "toy")
    assert list(ds.doc_offsets) == [0, 3, 4]
    assert ds.doc_count == 2
    assert ds.total_tokens == 4
    assert list(ds.document(0)) == [1, 2, 3]
    assert list(ds.document(1)) == [4]


def test_empty_corpus(tmp_path):
    write_dataset([], "u16", tmp_path / "empty")
    ds = open_dataset(tmp_path / "empty")
    assert ds.doc_count == 0
    assert ds.total_tokens == 0
    assert list(ds.doc_offsets) == [0]
    assert (tmp_path / "empty.bin").stat().st_size == 0


def test_overflow_u16(tmp_path):
    with pytest.raises(OverflowError):
        write_dataset([[70000]], "u16", tmp_path / "bad")
    with pytest.raises(OverflowError):
        write_dataset([[-1]], "u16", tmp_path / "bad")
    # same tokens fit u32
    write_dataset([[70000]], "u32", tmp_path / "ok")
    assert open_dataset(tmp_path / "ok").token(0) == 70000


def test_roundtrip_bytes_identical(tmp_path):
    docs = [[1, 2, 3], [4]]
    b1, i1 = write_dataset(docs, "u16", tmp_path / "a", vocab_size=10)
    ds = open_dataset(tmp_path / "a")
    b2, i2 = write_dataset([list(d) for d in ds.documents()], "u16", tmp_path / "b",
                           vocab_size=ds.vocab_size)
    assert b1.read_bytes() == b2.read_bytes()
    assert i1.read_bytes() == i2.read_bytes()


def test_bad_magic(tmp_path):
    write_dataset([[1]], "u16", tmp_path / "d")
    idx = tmp_path / "d.idx"
    raw = bytearray(idx.read_bytes())
    raw[:4] = b"NOPE"
    idx.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        open_dataset(tmp_path / "d")


def test_truncated_idx(tmp_path):
    write_dataset([[1, 2], [3]], "u16", tmp_path / "d")
    idx = tmp_path / "d.idx"
    idx.write_bytes(idx.read_bytes()[:-5])
    with pytest.raises(FormatError):
        open_dataset(tmp_path / "d")


def test_offsets_exceed_bin(tmp_path):
    write_dataset([[1, 2], [3]], "u16", tmp_path / "d")
    binf = tmp_path / "d.bin"
    binf.write_bytes(binf.read_bytes()[:-2])  # drop one token
    with pytest.raises(FormatError):
        open_dataset(tmp_path / "d")


def test_truncated_bin_mid_token(tmp_path):
    write_dataset([[1, 2]], "u16", tmp_path / "d")
    binf = tmp_path / "d.bin"
    binf.write_bytes(binf.read_bytes()[:-1])
    with pytest.raises(FormatError):
        open_dataset(tmp_path / "d")


def test_vocab_size_round_trip_and_check(tmp_path):
    write_dataset([[0, 4]], "u16", tmp_path / "v", vocab_size=5)
    ds = open_dataset(tmp_path / "v")
    assert ds.vocab_size == 5
    ds.validate_tokens()
    with pytest.raises(FormatError):
        write_dataset([[5]], "u16", tmp_path / "w", vocab_size=5)


def test_open_accepts_bin_or_idx_path(tmp_path):
    write_dataset([[9]], "u16", tmp_path / "p")
    assert open_dataset(tmp_path / "p.bin").token(0) == 9
    assert open_dataset(tmp_path / "p.idx").token(0) == 9


def test_empty_documents_representable(tmp_path):
    write_dataset([[], [7], []], "u16", tmp_path / "e")
    ds = open_dataset(tmp_path / "e")
    assert ds.doc_count == 3
    assert [len(d) for d in ds.documents()] == [0, 1, 0]


@settings(max_examples=50, deadline=None)
@given(
    docs=st.lists(st.lists(st.integers(min_value=0, max_value=65535), max_size=20), max_size=12),
)
def test_concat_property(tmp_path_factory, docs):
    tmp = tmp_path_factory.mktemp("prop")
    write_dataset(docs, "u16", tmp / "p")
    ds = open_dataset(tmp / "p")
    flat = [t for d in docs for t in d]
    assert list(ds.data[:]) == flat
    assert ds.total_tokens == sum(len(d) for d in docs)
    assert [list(ds.document(i)) for i in range(ds.doc_count)] == [list(d) for d in docs]


def test_open_is_index_bound_not_corpus_bound(tmp_path):
    # 1M single-token docs: open must scale with the index, not the payload.
    n = 1_000_000
    docs = np.zeros(n, dtype=np.uint16).reshape(n, 1)
    write_dataset(docs, "u16", tmp_path / "big")
    t0 = time.perf_counter()
    ds = open_dataset(tmp_path / "big")
    elapsed = time.perf_counter() - t0
    assert ds.doc_count == n
    assert elapsed < 1.0
