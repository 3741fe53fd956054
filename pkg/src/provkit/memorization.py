"""Verbatim-memorization scanning over the training stream, plus Poisson fits.

A sequence is memorized when prompting with its first k tokens makes the
oracle greedily reproduce the next l tokens exactly. Scanning walks contexts
in training order, using only each context's opening window, and aggregates
hits per fixed-size slice of the stream so the slice counts can be tested
against a Poisson point process (rate constant in training position).

Model inference stays behind the ContinuationOracle interface; bundled
implementations are deterministic stand-ins for a real model run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Protocol, Sequence

import numpy as np
from scipy import stats

from .dataloader import DataOrderPlan, TrainingStream
from .dataset import TokenDataset
from .errors import ContractError

DEFAULT_K = 32
DEFAULT_ELL = 32
DEFAULT_SLICE = 512
SCAN_WINDOW = 64  # only the opening tokens of each context are examined


class ContinuationOracle(Protocol):
    """Deterministic greedy continuation: same prompt, same output."""

    ell: int

    def greedy_continue(self, prompt: Sequence[int]) -> tuple[int, ...]: ...


class LookupOracle:
    """Memorizes a provided set of (k+l)-token strings, misses everything else.

    When two strings share a k-prefix with different continuations, the
    lexicographically smallest continuation wins (insertion-order free).
    """

    def __init__(self, strings: Sequence[Sequence[int]], k: int = DEFAULT_K,
                 ell: int = DEFAULT_ELL, miss_token: int = 0):
        self.k = k
        self.ell = ell
        self.miss = (miss_token,) * ell
        table: dict[tuple[int, ...], tuple[int, ...]] = {}
        for s in strings:
            s = tuple(int(t) for t in s)
            if len(s) < k + ell:
                raise ContractError(f"lookup string of {len(s)} tokens; need >= {k + ell}")
            prompt, cont = s[:k], s[k : k + ell]
            if prompt in table:
                table[prompt] = min(table[prompt], cont)
            else:
                table[prompt] = cont
        self.table = table

    def greedy_continue(self, prompt: Sequence[int]) -> tuple[int, ...]:
        return self.table.get(tuple(int(t) for t in prompt), self.miss)


class ConstantOracle:
    """Always emits the same token; useful as a never-memorizing baseline."""

    def __init__(self, token: int, ell: int = DEFAULT_ELL):
        self.token = token
        self.ell = ell

    def greedy_continue(self, prompt: Sequence[int]) -> tuple[int, ...]:
        return (self.token,) * self.ell


class NgramOracle:
    """Greedy order-n next-token predictor from corpus counts.

    Prediction conditions on the last min(order-1, history) tokens; unseen
    contexts back off one token at a time down to the unigram distribution.
    Count ties break toward the lowest token id.
    """

    def __init__(self, sequences: Sequence[Sequence[int]], order: int, ell: int = DEFAULT_ELL):
        if order < 1:
            raise ContractError("order must be >= 1")
        self.order = order
        self.ell = ell
        self._sequences = [tuple(int(t) for t in s) for s in sequences]
        self._counts: dict[int, dict[tuple[int, ...], dict[int, int]]] = {}

    def _counts_for(self, ctx_len: int) -> dict[tuple[int, ...], dict[int, int]]:
        cached = self._counts.get(ctx_len)
        if cached is not None:
            return cached
        table: dict[tuple[int, ...], dict[int, int]] = {}
        for s in self._sequences:
            for i in range(len(s) - ctx_len):
                ctx = s[i : i + ctx_len]
                nxt = s[i + ctx_len]
                bucket = table.setdefault(ctx, {})
                bucket[nxt] = bucket.get(nxt, 0) + 1
        self._counts[ctx_len] = table
        return table

    def _next_token(self, history: tuple[int, ...]) -> int:
        for ctx_len in range(min(self.order - 1, len(history)), -1, -1):
            ctx = history[len(history) - ctx_len :]
            bucket = self._counts_for(ctx_len).get(ctx)
            if bucket:
                # max count, lowest token id on ties
                return min(bucket, key=lambda t: (-bucket[t], t))
        return 0

    def greedy_continue(self, prompt: Sequence[int]) -> tuple[int, ...]:
        history = tuple(int(t) for t in prompt)
        out = []
        for _ in range(self.ell):
            t = self._next_token(history)
            out.append(t)
            history = history + (t,)
        return tuple(out)


class FileOracle:
    """Precomputed continuations keyed by training ordinal.

    File format: repeated records of (prompt ordinal u64 LE, l tokens u32 LE).
    """

    def __init__(self, path, ell: int = DEFAULT_ELL):
        self.ell = ell
        raw = Path(path).read_bytes()
        rec = 8 + 4 * ell
        if len(raw) % rec:
            raise ContractError(f"{path}: size {len(raw)} is not a whole number of records")
        self.table: dict[int, tuple[int, ...]] = {}
        for off in range(0, len(raw), rec):
            ordinal = int.from_bytes(raw[off : off + 8], "little")
            toks = np.frombuffer(raw, dtype="<u4", count=ell, offset=off + 8)
            self.table[ordinal] = tuple(int(t) for t in toks)

    def greedy_continue(self, prompt: Sequence[int]) -> tuple[int, ...]:
        raise ContractError("FileOracle is keyed by training ordinal; use via scan()")

    def greedy_continue_at(self, ordinal: int, prompt: Sequence[int]) -> tuple[int, ...]:
        cont = self.table.get(ordinal)
        if cont is None:
            raise ContractError(f"no precomputed continuation for ordinal {ordinal}")
        return cont


def write_file_oracle(path, records: dict[int, Sequence[int]]) -> Path:
    """Serialize ordinal -> continuation records in FileOracle format."""
    p = Path(path)
    with open(p, "wb") as fh:
        for ordinal in sorted(records):
            fh.write(int(ordinal).to_bytes(8, "little"))
            fh.write(np.asarray(records[ordinal], dtype="<u4").tobytes())
    return p


@dataclass
class PoissonFit:
    """Dispersion-index goodness of fit against a constant-rate Poisson model."""

    lambda_hat: float
    dispersion: float
    p_value: float
    qq_points: list[tuple[int, int, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "lambda_hat": self.lambda_hat,
            "dispersion": self.dispersion,
            "p_value": self.p_value,
            "qq_points": [list(p) for p in self.qq_points],
        }


@dataclass
class MemorizationScan:
    """Per-sequence match records plus per-slice memorized counts."""

    k: int
    ell: int
    slice_size: int
    matched: np.ndarray
    memorized: np.ndarray
    slice_counts: np.ndarray

    @property
    def total_scanned(self) -> int:
        return len(self.matched)

    @property
    def memorized_count(self) -> int:
        return int(self.memorized.sum())

    @property
    def rate(self) -> float:
        return self.memorized_count / self.total_scanned if self.total_scanned else 0.0

    def records(self) -> Iterator[tuple[int, int, bool]]:
        for i in range(self.total_scanned):
            yield i, int(self.matched[i]), bool(self.memorized[i])

    def memorized_ordinals(self) -> np.ndarray:
        return np.flatnonzero(self.memorized)

    def write_csv(self, path) -> Path:
        p = Path(path)
        with open(p, "w") as fh:
            fh.write("ordinal,matched,memorized\n")
            for ordinal, matched, mem in self.records():
                fh.write(f"{ordinal},{matched},{int(mem)}\n")
        return p


def load_scan_csv(path) -> list[tuple[int, int, bool]]:
    """Read back records written by MemorizationScan.write_csv."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "ordinal,matched,memorized":
        raise ContractError(f"{path}: not a scan record CSV")
    out = []
    for ln in lines[1:]:
        o, m, z = ln.split(",")
        out.append((int(o), int(m), bool(int(z))))
    return out


def scan(
    dataset: TokenDataset,
    plan: DataOrderPlan,
    oracle: ContinuationOracle,
    k: int = DEFAULT_K,
    ell: int = DEFAULT_ELL,
    slice_size: int = DEFAULT_SLICE,
    stream: TrainingStream | None = None,
    chunk: int = 8192,
) -> MemorizationScan:
    """Scan every context of the training stream for (k,l)-memorization."""
    if k < 1 or ell < 1 or k + ell > SCAN_WINDOW:
        raise ContractError(f"need 1 <= k, 1 <= l, k+l <= {SCAN_WINDOW}")
    if plan.seq_len < SCAN_WINDOW:
        raise ContractError(f"scan requires seq_len >= {SCAN_WINDOW}")
    if slice_size < 1:
        raise ContractError("slice_size must be >= 1")
    if stream is None:
        stream = TrainingStream(dataset, plan)

    total = len(stream.index)
    matched = np.zeros(total, dtype=np.int32)
    memorized = np.zeros(total, dtype=bool)
    keyed = hasattr(oracle, "greedy_continue_at")

    for start in range(0, total, chunk):
        cids = stream.index[start : min(start + chunk, total)]
        windows = stream.windows(cids, k + ell)
        for row in range(len(cids)):
            ordinal = start + row
            prompt = windows[row, :k]
            truth = windows[row, k:]
            if keyed:
                gen = oracle.greedy_continue_at(ordinal, prompt)
            else:
                gen = oracle.greedy_continue(prompt)
            if len(gen) != ell:
                raise ContractError(
                    f"oracle returned {len(gen)} tokens, contract requires {ell}"
                )
            gen_arr = np.asarray(gen, dtype=np.int64)
            truth_arr = truth.astype(np.int64)
            neq = np.flatnonzero(gen_arr != truth_arr)
            m = int(neq[0]) if len(neq) else ell
            matched[ordinal] = m
            memorized[ordinal] = m == ell

    n_slices = (total + slice_size - 1) // slice_size
    slice_counts = np.array(
        [int(memorized[i * slice_size : (i + 1) * slice_size].sum()) for i in range(n_slices)],
        dtype=np.int64,
    )
    return MemorizationScan(
        k=k, ell=ell, slice_size=slice_size,
        matched=matched, memorized=memorized, slice_counts=slice_counts,
    )


def fit_poisson(slice_counts: Sequence[int]) -> PoissonFit:
    """Dispersion test of slice counts against i.i.d. Poisson.

    D = (n-1) * s^2 / lambda_hat is chi-square(n-1) under the null; the
    p-value is two-sided. All-zero counts give the degenerate fit p = 1.
    """
    counts = np.asarray(slice_counts, dtype=np.float64)
    n = len(counts)
    if n < 2:
        raise ContractError("need at least 2 slices to fit")
    lam = float(counts.mean())
    if lam == 0.0:
        return PoissonFit(lambda_hat=0.0, dispersion=0.0, p_value=1.0,
                          qq_points=qq_points(slice_counts, 0.0))
    s2 = float(counts.var(ddof=1))
    d = (n - 1) * s2 / lam
    cdf = stats.chi2.cdf(d, df=n - 1)
    p = 2.0 * min(cdf, 1.0 - cdf)
    return PoissonFit(
        lambda_hat=lam,
        dispersion=d,
        p_value=min(1.0, float(p)),
        qq_points=qq_points(slice_counts, lam),
    )


def qq_points(slice_counts: Sequence[int], lambda_hat: float) -> list[tuple[int, int, int]]:
    """Quantile-quantile pairs (theoretical, empirical, multiplicity).

    Empirical quantiles are the sorted counts; the theoretical quantile at
    plotting position (i - 0.5)/n is the smallest integer q with
    PoissonCDF(q; lambda_hat) >= that probability.
    """
    counts = np.sort(np.asarray(slice_counts, dtype=np.int64))
    n = len(counts)
    if n < 1:
        raise ContractError("need at least 1 slice")
    probs = (np.arange(1, n + 1) - 0.5) / n
    theo = stats.poisson.ppf(probs, mu=lambda_hat).astype(np.int64)
    merged: dict[tuple[int, int], int] = {}
    for t, e in zip(theo, counts):
        merged[(int(t), int(e))] = merged.get((int(t), int(e)), 0) + 1
    return [(t, e, m) for (t, e), m in sorted(merged.items())]


def write_summary(fit: PoissonFit, path) -> Path:
    p = Path(path)
    p.write_text(json.dumps(fit.to_dict(), sort_keys=True) + "\n")
    return p
