"""Term occurrence counting over the data seen up to a checkpoint.

Counts run over exactly the contexts the dataloader serves in positions
[0, step * batch_size), so they are comparable across checkpoints of one
plan and monotone in the step. Two term kinds:

* numeric-operand: word-boundary-delimited exact matches of a decimal
  string, every mention counted;
* entity-set: one count per context in which every entity appears
  (case-insensitive, word-boundary substring) -- co-occurrence, not mentions.

Task accuracy arrives externally (per-term CSV); this module only joins it
with counts to produce binned curves and the top/bottom-decile gap.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Hashable, Mapping, Sequence, TypeVar

Term = TypeVar("Term", bound=Hashable)

import numpy as np

from .dataloader import CheckpointSchedule, DataOrderPlan, TrainingStream, checkpoint_schedule
from .dataset import TokenDataset
from .errors import ContractError

NUMERIC = "numeric-operand"
ENTITY_SET = "entity-set"


@dataclass(frozen=True)
class TermSpec:
    """A countable unit: either one decimal operand or a set of entities."""

    kind: str
    pattern: str = ""
    entities: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind == NUMERIC:
            p = self.pattern
            if not p.isdigit() or (len(p) > 1 and p[0] == "0"):
                raise ContractError(f"numeric pattern {p!r} must be a decimal with no leading zeros")
            if not 0 <= int(p) <= 99:
                raise ContractError(f"numeric operand {p} outside [0, 99]")
        elif self.kind == ENTITY_SET:
            if not self.entities:
                raise ContractError("entity-set terms need at least one entity")
            if any(not e.strip() for e in self.entities):
                raise ContractError("entities must be non-blank")
        else:
            raise ContractError(f"unknown term kind {self.kind!r}")

    @classmethod
    def numeric(cls, value: int | str) -> "TermSpec":
        return cls(kind=NUMERIC, pattern=str(value))

    @classmethod
    def entity_set(cls, entities: Sequence[str]) -> "TermSpec":
        return cls(kind=ENTITY_SET, entities=tuple(entities))

    @property
    def label(self) -> str:
        return self.pattern if self.kind == NUMERIC else "+".join(self.entities)


def load_terms_json(path) -> list[TermSpec]:
    """Terms file: JSON list of {kind, pattern} or {kind, entities}."""
    items = json.loads(Path(path).read_text())
    terms = []
    for item in items:
        if item["kind"] == NUMERIC:
            terms.append(TermSpec.numeric(item["pattern"]))
        else:
            terms.append(TermSpec.entity_set(item["entities"]))
    return terms


def _compile(term: TermSpec):
    if term.kind == NUMERIC:
        return [re.compile(r"\b" + re.escape(term.pattern) + r"\b")]
    return [re.compile(r"\b" + re.escape(e) + r"\b", re.IGNORECASE) for e in term.entities]


def count_up_to(
    dataset: TokenDataset,
    plan: DataOrderPlan,
    detok: Callable[[np.ndarray], str],
    step: int,
    terms: Sequence[TermSpec],
    schedule: CheckpointSchedule | None = None,
    stream: TrainingStream | None = None,
    chunk: int = 2048,
) -> dict[TermSpec, int]:
    """Occurrences of each term in the stream seen strictly before ``step``."""
    if schedule is None:
        schedule = checkpoint_schedule(plan)
    if step not in schedule:
        raise ContractError(f"step {step} is not in the checkpoint schedule")
    if stream is None:
        stream = TrainingStream(dataset, plan)

    compiled = {t: _compile(t) for t in terms}
    counts = {t: 0 for t in terms}
    stop = step * plan.batch_size
    for start in range(0, stop, chunk):
        cids = stream.index[start : min(start + chunk, stop)]
        ctxs = stream.contexts(cids)
        for row in ctxs:
            text = detok(row)
            for t in terms:
                pats = compiled[t]
                if t.kind == NUMERIC:
                    counts[t] += len(pats[0].findall(text))
                elif all(p.search(text) for p in pats):
                    counts[t] += 1
    return counts


@dataclass(frozen=True)
class FrequencyBin:
    lo: int          # inclusive count edge
    hi: int          # exclusive count edge
    mean_accuracy: float
    n_terms: int


def binned_accuracy(
    counts: Mapping[Term, int], accuracy: Mapping[Term, float]
) -> list[FrequencyBin]:
    """Mean accuracy per log-spaced count bin: {0}, [1,2), [2,4), [4,8), ...

    Empty bins are omitted; bin means are unweighted over member terms.
    """
    _require_aligned(counts, accuracy)
    members: dict[tuple[int, int], list[float]] = {}
    for term, c in counts.items():
        if c == 0:
            edge = (0, 1)
        else:
            k = c.bit_length() - 1  # floor(log2(c))
            edge = (1 << k, 1 << (k + 1))
        members.setdefault(edge, []).append(accuracy[term])
    return [
        FrequencyBin(lo=lo, hi=hi, mean_accuracy=math.fsum(accs) / len(accs), n_terms=len(accs))
        for (lo, hi), accs in sorted(members.items())
    ]


@dataclass(frozen=True)
class GapReport:
    """Top-decile minus bottom-decile accuracy, in percentage points."""

    delta: float
    n_terms: int
    decile_size: int
    top_mean: float
    bottom_mean: float
    small_sample: bool  # true when n < 10 forced a 1-term decile

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "n_terms": self.n_terms,
            "decile_size": self.decile_size,
            "top_mean": self.top_mean,
            "bottom_mean": self.bottom_mean,
            "small_sample": self.small_sample,
        }


def performance_gap(
    counts: Mapping[Term, int], accuracy: Mapping[Term, float]
) -> GapReport:
    """Gap between the most- and least-frequent deciles of terms.

    Terms sort descending by count, ties keeping their input order; decile
    size is floor(n/10) with a minimum of 1 (flagged for n < 10).
    """
    _require_aligned(counts, accuracy)
    terms = list(counts)
    n = len(terms)
    if n == 0:
        raise ContractError("need at least one term")
    order = sorted(range(n), key=lambda i: -counts[terms[i]])
    decile = max(1, n // 10)
    top = [accuracy[terms[i]] for i in order[:decile]]
    bottom = [accuracy[terms[i]] for i in order[-decile:]]
    top_mean = math.fsum(top) / decile
    bottom_mean = math.fsum(bottom) / decile
    return GapReport(
        delta=100.0 * (top_mean - bottom_mean),
        n_terms=n,
        decile_size=decile,
        top_mean=top_mean,
        bottom_mean=bottom_mean,
        small_sample=n < 10,
    )


def _require_aligned(counts: Mapping, accuracy: Mapping) -> None:
    missing = [t for t in counts if t not in accuracy]
    if missing:
        raise ContractError(f"{len(missing)} terms have counts but no accuracy")


# --- file formats used by the CLI -----------------------------------------


def write_counts_csv(counts: Mapping[TermSpec, int], step: int, path) -> Path:
    p = Path(path)
    with open(p, "w") as fh:
        fh.write("term,step,count\n")
        for term, c in counts.items():
            fh.write(f"{term.label},{step},{c}\n")
    return p


def read_counts_csv(path) -> tuple[dict[str, int], int]:
    """Returns (label -> count, step); single-step files only."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "term,step,count":
        raise ContractError(f"{path}: not a counts CSV")
    out: dict[str, int] = {}
    steps = set()
    for ln in lines[1:]:
        label, step, c = ln.rsplit(",", 2)
        out[label] = int(c)
        steps.add(int(step))
    if len(steps) > 1:
        raise ContractError(f"{path}: multiple steps in one counts file")
    return out, (steps.pop() if steps else 0)


def read_accuracy_csv(path) -> dict[str, float]:
    """Accuracy file: header term,accuracy[,shots]; keyed by term label."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("term,accuracy"):
        raise ContractError(f"{path}: not an accuracy CSV")
    out: dict[str, float] = {}
    for ln in lines[1:]:
        parts = ln.split(",")
        out[parts[0]] = float(parts[1])
    return out


def write_bins_csv(bins: Sequence[FrequencyBin], path) -> Path:
    p = Path(path)
    with open(p, "w") as fh:
        fh.write("count_lo,count_hi,mean_accuracy,n_terms\n")
        for b in bins:
            fh.write(f"{b.lo},{b.hi},{b.mean_accuracy!r},{b.n_terms}\n")
    return p
