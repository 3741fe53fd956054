"""On-disk format and reader/writer for tokenized corpora with document boundaries.

A corpus is a ``.bin``/``.idx`` file pair:

* ``.bin`` — concatenated token ids, little-endian, no padding.
* ``.idx`` — header: magic ``PVK1`` (4 bytes), format version u32 LE,
  dtype code u8 (1 = u16, 2 = u32), doc_count u64 LE,
  then (doc_count + 1) u64 LE token offsets, then vocab_size u64 LE
  (0 = unknown).

The reader memory-maps the payload, so opening is O(index size) and random
access never loads the corpus into memory. Datasets are immutable after open
and safe for concurrent readers.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import FormatError

MAGIC = b"PVK1"
FORMAT_VERSION = 1

DTYPE_CODES = {1: np.dtype("<u2"), 2: np.dtype("<u4")}
_DTYPE_ALIASES = {
    "u16": 1,
    "u32": 2,
    "uint16": 1,
    "uint32": 2,
}

_HEADER = struct.Struct("<4sIBQ")  # magic, version, dtype code, doc_count


def _dtype_code(dtype) -> int:
    if isinstance(dtype, int):
        if dtype not in DTYPE_CODES:
            raise ValueError(f"unknown dtype code {dtype}")
        return dtype
    if isinstance(dtype, str):
        key = dtype.lower()
        if key not in _DTYPE_ALIASES:
            raise ValueError(f"unknown dtype {dtype!r}; expected 'u16' or 'u32'")
        return _DTYPE_ALIASES[key]
    npdt = np.dtype(dtype)
    for code, candidate in DTYPE_CODES.items():
        if npdt == candidate or npdt == candidate.newbyteorder("="):
            return code
    raise ValueError(f"unsupported token dtype {dtype!r}")


def _resolve_base(path) -> Path:
    p = Path(path)
    if p.suffix in (".bin", ".idx"):
        return p.with_suffix("")
    return p


@dataclass(frozen=True)
class TokenDataset:
    """Immutable view over a tokenized corpus with document boundaries."""

    data: np.ndarray
    doc_offsets: np.ndarray
    dtype_code: int
    vocab_size: int = 0
    path: Path | None = field(default=None, compare=False)

    @property
    def doc_count(self) -> int:
        return len(self.doc_offsets) - 1

    @property
    def total_tokens(self) -> int:
        return int(self.doc_offsets[-1])

    @property
    def token_dtype(self) -> np.dtype:
        return DTYPE_CODES[self.dtype_code]

    def __len__(self) -> int:
        return self.doc_count

    def document(self, index: int) -> np.ndarray:
        """Zero-copy token view of document ``index``."""
        if not 0 <= index < self.doc_count:
            raise IndexError(f"document index {index} out of range [0, {self.doc_count})")
        return self.data[int(self.doc_offsets[index]) : int(self.doc_offsets[index + 1])]

    def documents(self) -> Iterator[np.ndarray]:
        for i in range(self.doc_count):
            yield self.document(i)

    def token(self, i: int) -> int:
        if not 0 <= i < self.total_tokens:
            raise IndexError(f"token index {i} out of range [0, {self.total_tokens})")
        return int(self.data[i])

    def validate_tokens(self) -> None:
        """Check every token id against the declared vocab_size (full scan)."""
        if self.vocab_size and self.total_tokens:
            top = int(self.data.max())
            if top >= self.vocab_size:
                raise FormatError(
                    f"token id {top} out of range for vocab_size {self.vocab_size}"
                )


def write_dataset(
    docs: Sequence[Sequence[int]],
    dtype,
    path,
    vocab_size: int = 0,
) -> tuple[Path, Path]:
    """Serialize ``docs`` to ``path.bin``/``path.idx``; returns the file pair.

    Raises OverflowError if any token does not fit the target dtype, and
    FormatError if a token violates a non-zero ``vocab_size``.
    """
    code = _dtype_code(dtype)
    npdt = DTYPE_CODES[code]
    limit = int(np.iinfo(npdt).max)
    base = _resolve_base(path)
    bin_path = base.with_suffix(".bin")
    idx_path = base.with_suffix(".idx")

    offsets = np.zeros(len(docs) + 1, dtype=np.uint64)
    with open(bin_path, "wb") as fh:
        total = 0
        for i, doc in enumerate(docs):
            arr = np.asarray(doc)
            if arr.size:
                lo, hi = int(arr.min()), int(arr.max())
                if lo < 0 or hi > limit:
                    bad = lo if lo < 0 else hi
                    raise OverflowError(
                        f"token {bad} does not fit dtype u{npdt.itemsize * 8}"
                    )
                if vocab_size and hi >= vocab_size:
                    raise FormatError(
                        f"token {hi} out of range for vocab_size {vocab_size}"
                    )
            fh.write(arr.astype(npdt, copy=False).tobytes())
            total += arr.size
            offsets[i + 1] = total

    with open(idx_path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, code, len(docs)))
        fh.write(offsets.astype("<u8", copy=False).tobytes())
        fh.write(struct.pack("<Q", vocab_size))

    return bin_path, idx_path


def open_dataset(path) -> TokenDataset:
    """Open a ``.bin``/``.idx`` pair as a memory-mapped TokenDataset."""
    base = _resolve_base(path)
    bin_path = base.with_suffix(".bin")
    idx_path = base.with_suffix(".idx")
    if not idx_path.exists() or not bin_path.exists():
        raise FormatError(f"dataset files not found at {base}.bin/.idx")

    raw = idx_path.read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{idx_path}: truncated header")
    magic, version, code, doc_count = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"{idx_path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{idx_path}: unsupported format version {version}")
    if code not in DTYPE_CODES:
        raise FormatError(f"{idx_path}: unknown dtype code {code}")
    expected = _HEADER.size + 8 * (doc_count + 1) + 8
    if len(raw) != expected:
        raise FormatError(
            f"{idx_path}: expected {expected} bytes for {doc_count} docs, got {len(raw)}"
        )

    offsets = np.frombuffer(raw, dtype="<u8", count=doc_count + 1, offset=_HEADER.size)
    (vocab_size,) = struct.unpack_from("<Q", raw, _HEADER.size + 8 * (doc_count + 1))
    if offsets[0] != 0:
        raise FormatError(f"{idx_path}: first offset must be 0")
    if doc_count and np.any(np.diff(offsets.astype(np.int64)) < 0):
        raise FormatError(f"{idx_path}: offsets not monotone non-decreasing")

    npdt = DTYPE_CODES[code]
    total_tokens = int(offsets[-1])
    bin_tokens, rem = divmod(bin_path.stat().st_size, npdt.itemsize)
    if rem:
        raise FormatError(f"{bin_path}: size is not a whole number of tokens")
    if total_tokens != bin_tokens:
        raise FormatError(
            f"{bin_path}: index declares {total_tokens} tokens, payload has {bin_tokens}"
        )

    if total_tokens:
        data = np.memmap(bin_path, dtype=npdt, mode="r")
    else:
        data = np.empty(0, dtype=npdt)

    return TokenDataset(
        data=data,
        doc_offsets=offsets,
        dtype_code=code,
        vocab_size=int(vocab_size),
        path=base,
    )
