"""Counterfactual training streams with masculine pronouns swapped to feminine.

The swap applies to the final fraction P of training only: stream positions
before start_step * batch_size stay bit-identical (the experiment's control),
everything after is transformed. Text mode round-trips contexts through
detokenize -> swap -> retokenize; token mode substitutes single token ids
in place, preserving token counts exactly.

"his" maps to "her" uniformly; separating possessive pronoun from determiner
("hers" vs "her") would need a parser, so this stays a documented
context-free approximation.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from .dataloader import DataOrderPlan, TrainingStream, tokens_seen
from .dataset import TokenDataset, open_dataset, write_dataset
from .errors import ContractError

TEXT_MODE = "text"
TOKEN_MODE = "token"

# Ordered, case-sensitive; applied at word boundaries only. Feminine forms
# are never keys, so the swap is idempotent.
PRONOUN_MAP: dict[str, str] = {
    "himself": "herself", "Himself": "Herself", "HIMSELF": "HERSELF",
    "his": "her", "His": "Her", "HIS": "HER",
    "him": "her", "Him": "Her", "HIM": "HER",
    "he": "she", "He": "She", "HE": "SHE",
}


def _compile_map(mapping: dict[str, str]) -> re.Pattern:
    keys = sorted(mapping, key=len, reverse=True)
    return re.compile(r"\b(?:" + "|".join(re.escape(k) for k in keys) + r")\b")


_DEFAULT_PATTERN = _compile_map(PRONOUN_MAP)


def swap_pronouns_text(text: str, mapping: dict[str, str] | None = None) -> str:
    """Single left-to-right pass replacing word-boundary pronoun matches."""
    return swap_and_count(text, mapping)[0]


def swap_and_count(
    text: str, mapping: dict[str, str] | None = None
) -> tuple[str, dict[str, int]]:
    """Swap pronouns and tally replacements per source form."""
    table = PRONOUN_MAP if mapping is None else mapping
    pattern = _DEFAULT_PATTERN if mapping is None else _compile_map(table)
    counts = {k: 0 for k in table}

    def _sub(m: re.Match) -> str:
        word = m.group(0)
        counts[word] += 1
        return table[word]

    return pattern.sub(_sub, text), counts


@dataclass(frozen=True)
class InterventionPlan:
    """Which tail fraction of training gets transformed, and how."""

    fraction: float
    train_iters: int
    mode: str = TEXT_MODE

    def __post_init__(self):
        if not 0.0 < self.fraction <= 1.0:
            raise ContractError(f"fraction must be in (0, 1], got {self.fraction}")
        if self.mode not in (TEXT_MODE, TOKEN_MODE):
            raise ContractError(f"mode must be 'text' or 'token', got {self.mode!r}")

    @property
    def start_step(self) -> int:
        # exact decimal arithmetic keeps the ceil off float rounding edges
        frac = Fraction(str(self.fraction))
        return math.ceil((1 - frac) * self.train_iters)

    def transformed_tokens(self, plan: DataOrderPlan) -> int:
        return tokens_seen(plan, plan.train_iters) - tokens_seen(plan, self.start_step)


def build_token_pronoun_map(
    tokenize: Callable[[str], list[int]],
    mapping: dict[str, str] | None = None,
) -> dict[int, int]:
    """Single-token id map for token mode.

    Rejects vocabularies where any pronoun (source or target) spans multiple
    tokens; partial substitution is never silently performed.
    """
    table = PRONOUN_MAP if mapping is None else mapping
    out: dict[int, int] = {}
    for src, dst in table.items():
        src_ids, dst_ids = list(tokenize(src)), list(tokenize(dst))
        if len(src_ids) != 1 or len(dst_ids) != 1:
            raise ContractError(
                f"pronoun {src!r}->{dst!r} does not map single-token to single-token "
                f"({len(src_ids)} -> {len(dst_ids)} tokens); token mode unsupported"
            )
        out[src_ids[0]] = dst_ids[0]
    return out


def apply_intervention(
    dataset: TokenDataset,
    plan: DataOrderPlan,
    iplan: InterventionPlan,
    out_path,
    detok: Callable[[np.ndarray], str] | None = None,
    retok: Callable[[str], list[int]] | None = None,
    token_map: dict[int, int] | None = None,
    mapping: dict[str, str] | None = None,
    stream: TrainingStream | None = None,
) -> tuple[TokenDataset, dict]:
    """Emit the counterfactual stream as a dataset plus a manifest.

    The output dataset holds one document per training context, in training
    order; the manifest records the boundary and per-form replacement counts.
    """
    if iplan.train_iters != plan.train_iters:
        raise ContractError("intervention plan and data plan disagree on train_iters")
    if iplan.mode == TEXT_MODE:
        if detok is None or retok is None:
            raise ContractError("text mode requires detok and retok callbacks")
    elif token_map is None:
        raise ContractError("token mode requires a token id map")

    if stream is None:
        stream = TrainingStream(dataset, plan)
    table = PRONOUN_MAP if mapping is None else mapping
    boundary = iplan.start_step * plan.batch_size
    total = len(stream.index)
    limit = int(np.iinfo(dataset.token_dtype).max)

    if iplan.mode == TEXT_MODE:
        counts = {k: 0 for k in table}
    else:
        counts = {str(src): 0 for src in token_map}

    docs: list[np.ndarray] = []
    chunk = 4096
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        ctxs = stream.contexts(stream.index[start:stop])
        for row_i in range(stop - start):
            ordinal = start + row_i
            ctx = ctxs[row_i]
            if ordinal < boundary:
                docs.append(ctx.copy())
                continue
            if iplan.mode == TOKEN_MODE:
                out = ctx.copy()
                for src, dst in token_map.items():
                    hit = ctx == np.asarray(src, dtype=ctx.dtype)
                    n = int(np.count_nonzero(hit))
                    if n:
                        out[hit] = dst
                        counts[str(src)] += n
                docs.append(out)
            else:
                swapped, c = swap_and_count(detok(ctx), table)
                for k, v in c.items():
                    counts[k] += v
                toks = np.asarray(retok(swapped), dtype=np.int64)
                if toks.size and (toks.min() < 0 or toks.max() > limit):
                    raise ContractError("retokenized text does not fit the corpus dtype")
                docs.append(toks.astype(dataset.token_dtype))

    write_dataset(docs, dataset.dtype_code, out_path, vocab_size=dataset.vocab_size)
    manifest = {
        "mode": iplan.mode,
        "fraction": iplan.fraction,
        "train_iters": iplan.train_iters,
        "start_step": iplan.start_step,
        "boundary_ordinal": boundary,
        "total_contexts": total,
        "transformed_contexts": total - boundary,
        "replacements": counts,
    }
    return open_dataset(out_path), manifest


def write_manifest(manifest: dict, path) -> Path:
    p = Path(path)
    p.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return p
