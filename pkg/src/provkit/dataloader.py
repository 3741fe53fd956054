"""Deterministic reconstruction of the ordered training stream.

Given a dataset and a DataOrderPlan, the sample order is fully determined:

1. concatenate documents in corpus order, appending ``eod_token`` after each
   document when set;
2. chunk the stream into contexts of ``seq_len + 1`` tokens, dropping the
   final partial chunk;
3. for epoch e = 0, 1, ... shuffle context ids with Fisher-Yates driven by
   splitmix64 seeded with splitmix64(seed XOR (GOLDEN * (e+1))), drawing
   j = next() mod (i+1) for i from n-1 down to 1;
4. concatenate epoch permutations and truncate to train_iters * batch_size.

Identical inputs produce bit-identical batches on any platform. The sample
index and stream views are immutable once built and safe to share across
threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .dataset import TokenDataset
from .errors import ContractError
from .rng import mix_epoch_seed, splitmix64_outputs

EARLY_LOG_STEPS = (1, 2, 4, 8, 16, 32, 64, 128, 256, 512)
DEFAULT_SAVE_INTERVAL = 1000


@dataclass(frozen=True)
class DataOrderPlan:
    """Seed and hyperparameters that fully determine the training stream."""

    seed: int
    batch_size: int = 1024
    seq_len: int = 2048
    train_iters: int = 143000
    eod_token: int | None = None

    def __post_init__(self):
        if self.batch_size < 1 or self.seq_len < 1 or self.train_iters < 1:
            raise ContractError("batch_size, seq_len and train_iters must be >= 1")

    @property
    def context_len(self) -> int:
        """Tokens per context (input + next-token target)."""
        return self.seq_len + 1

    @property
    def contexts_needed(self) -> int:
        return self.train_iters * self.batch_size

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DataOrderPlan":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class CheckpointSchedule:
    """Sorted training steps at which model state is saved."""

    steps: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def __contains__(self, step: int) -> bool:
        return step in set(self.steps)


def checkpoint_schedule(plan_or_iters, save_interval: int = DEFAULT_SAVE_INTERVAL) -> CheckpointSchedule:
    """Initialization, early log-spaced steps, and every ``save_interval`` steps."""
    train_iters = plan_or_iters.train_iters if isinstance(plan_or_iters, DataOrderPlan) else int(plan_or_iters)
    if train_iters < 1:
        raise ContractError("train_iters must be >= 1")
    if save_interval < 1:
        raise ContractError("save_interval must be >= 1")
    steps = {0}
    steps.update(s for s in EARLY_LOG_STEPS if s <= train_iters)
    steps.update(range(save_interval, train_iters + 1, save_interval))
    return CheckpointSchedule(steps=tuple(sorted(steps)))


def tokens_seen(plan: DataOrderPlan, step: int) -> int:
    """Tokens consumed after ``step`` optimizer steps."""
    if step < 0:
        raise ContractError(f"step must be non-negative, got {step}")
    return step * plan.batch_size * plan.seq_len


def stream_token_count(dataset: TokenDataset, plan: DataOrderPlan) -> int:
    """Length of the EOD-joined token stream."""
    extra = dataset.doc_count if plan.eod_token is not None else 0
    return dataset.total_tokens + extra


def context_count(dataset: TokenDataset, plan: DataOrderPlan) -> int:
    """Number of whole contexts the stream yields (partial tail dropped)."""
    return stream_token_count(dataset, plan) // plan.context_len


def epochs_needed(dataset: TokenDataset, plan: DataOrderPlan) -> int:
    """Epochs touched to serve train_iters * batch_size contexts (last may be partial)."""
    n = context_count(dataset, plan)
    if n == 0:
        raise ContractError("corpus yields zero contexts at this seq_len")
    return math.ceil(plan.contexts_needed / n)


def epoch_permutation(n: int, seed: int, epoch: int) -> np.ndarray:
    """Fisher-Yates permutation of [0, n) for one epoch, as uint64."""
    perm = np.arange(n, dtype=np.uint64)
    if n < 2:
        return perm
    draws = splitmix64_outputs(mix_epoch_seed(seed, epoch), n - 1)
    sizes = np.arange(n, 1, -1, dtype=np.uint64)
    js = (draws % sizes).astype(np.int64)
    for t in range(n - 1):
        i = n - 1 - t
        j = js[t]
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def build_sample_index(dataset: TokenDataset, plan: DataOrderPlan) -> np.ndarray:
    """Ordered context ids for the whole run (length train_iters * batch_size)."""
    n = context_count(dataset, plan)
    if n == 0:
        raise ContractError(
            f"corpus of {stream_token_count(dataset, plan)} stream tokens yields "
            f"zero contexts of length {plan.context_len}"
        )
    needed = plan.contexts_needed
    parts = []
    have = 0
    epoch = 0
    while have < needed:
        parts.append(epoch_permutation(n, plan.seed, epoch))
        have += n
        epoch += 1
    return np.concatenate(parts)[:needed]


def write_sample_index(index: np.ndarray, path) -> Path:
    """Export the sample index as a raw u64 LE array file."""
    p = Path(path)
    p.write_bytes(np.ascontiguousarray(index, dtype="<u8").tobytes())
    return p


def read_sample_index(path) -> np.ndarray:
    return np.frombuffer(Path(path).read_bytes(), dtype="<u8")


class TrainingStream:
    """Random access into the EOD-joined, chunked, shuffled training stream.

    Builds the sample index once; context fetches are vectorized gathers
    against the memory-mapped corpus, so no stream materialization happens.
    """

    def __init__(self, dataset: TokenDataset, plan: DataOrderPlan):
        self.dataset = dataset
        self.plan = plan
        if plan.eod_token is not None:
            limit = int(np.iinfo(dataset.token_dtype).max)
            if not 0 <= plan.eod_token <= limit:
                raise ContractError(f"eod_token {plan.eod_token} does not fit corpus dtype")
        self.n_contexts = context_count(dataset, plan)
        self.index = build_sample_index(dataset, plan)
        offs = dataset.doc_offsets.astype(np.uint64)
        if plan.eod_token is not None:
            self._adj = offs + np.arange(len(offs), dtype=np.uint64)
        else:
            self._adj = offs

    def fetch(self, positions: np.ndarray) -> np.ndarray:
        """Tokens of the EOD-joined stream at ``positions`` (uint64 array)."""
        ds = self.dataset
        d = np.searchsorted(self._adj, positions, side="right") - 1
        base = ds.doc_offsets[d]
        dlen = ds.doc_offsets[d + 1] - base
        off = positions - self._adj[d]
        safe = base + np.minimum(off, np.maximum(dlen, np.uint64(1)) - np.uint64(1))
        if ds.data.size:
            vals = ds.data[np.minimum(safe, np.uint64(ds.data.size - 1))]
        else:
            vals = np.zeros(len(positions), dtype=ds.token_dtype)
        if self.plan.eod_token is None:
            return vals
        eod = np.asarray(self.plan.eod_token, dtype=ds.token_dtype)
        return np.where(off == dlen, eod, vals)

    def context(self, context_id: int) -> np.ndarray:
        return self.contexts(np.asarray([context_id], dtype=np.uint64))[0]

    def contexts(self, context_ids: np.ndarray) -> np.ndarray:
        """Token matrix (len(ids), seq_len + 1) for the given context ids."""
        return self.windows(context_ids, self.plan.context_len)

    def windows(self, context_ids: np.ndarray, length: int) -> np.ndarray:
        """First ``length`` tokens of each given context."""
        if length > self.plan.context_len:
            raise ContractError(f"window length {length} exceeds context length")
        cids = np.asarray(context_ids, dtype=np.uint64)
        L = np.uint64(self.plan.context_len)
        pos = cids[:, None] * L + np.arange(length, dtype=np.uint64)[None, :]
        return self.fetch(pos.ravel()).reshape(len(cids), length)

    def batch(self, step: int) -> np.ndarray:
        """The ``batch_size`` contexts consumed at training step ``step``."""
        plan = self.plan
        if not 0 <= step < plan.train_iters:
            raise ContractError(f"step {step} out of range [0, {plan.train_iters})")
        cids = self.index[step * plan.batch_size : (step + 1) * plan.batch_size]
        return self.contexts(cids)

    def ordinals(self, start: int, stop: int) -> np.ndarray:
        """Context ids at training ordinals [start, stop)."""
        return self.index[start:stop]


def batch_at(dataset: TokenDataset, plan: DataOrderPlan, step: int,
             stream: TrainingStream | None = None) -> np.ndarray:
    """Batch of batch_size contexts, each seq_len + 1 tokens, at ``step``.

    Pass a prebuilt ``stream`` when reading many batches; otherwise the
    sample index is rebuilt per call.
    """
    if stream is None:
        stream = TrainingStream(dataset, plan)
    return stream.batch(step)
