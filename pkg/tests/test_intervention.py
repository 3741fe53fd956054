import re

import numpy as np
import pytest

from provkit.dataloader import DataOrderPlan, TrainingStream
from provkit.dataset import open_dataset, write_dataset
from provkit.errors import ContractError
from provkit.intervention import (
    PRONOUN_MAP,
    InterventionPlan,
    apply_intervention,
    build_token_pronoun_map,
    swap_and_count,
    swap_pronouns_text,
)


def test_table_application():
    assert (
        swap_pronouns_text("He said his dog bit him himself.")
        == "She said her dog bit her herself."
    )


def test_word_boundary_rule():
    assert swap_pronouns_text("hertz history") == "hertz history"
    assert swap_pronouns_text("this hero chime") == "this hero chime"
    assert swap_pronouns_text("the his-like word") == "the her-like word"


def test_case_variants():
    assert swap_pronouns_text("HE HIM HIS HIMSELF") == "SHE HER HER HERSELF"
    assert swap_pronouns_text("He Him His Himself") == "She Her Her Herself"
    assert swap_pronouns_text("hE hIm") == "hE hIm"  # mixed case not in table


def test_idempotence():
    text = "He gave him his book himself. She kept hers."
    once = swap_pronouns_text(text)
    assert swap_pronouns_text(once) == once
    # feminine forms are never map keys
    assert not (set(PRONOUN_MAP) & set(PRONOUN_MAP.values()))


def test_map_is_function():
    assert len(PRONOUN_MAP) == len(set(PRONOUN_MAP))


def test_swap_counts():
    _, counts = swap_and_count("He and he and HE, his him")
    assert counts["He"] == 1
    assert counts["he"] == 1
    assert counts["HE"] == 1
    assert counts["his"] == 1
    assert counts["him"] == 1
    assert counts["himself"] == 0


def test_start_step_arithmetic():
    ip = InterventionPlan(fraction=0.07, train_iters=143000)
    assert ip.start_step == 132990
    plan = DataOrderPlan(seed=0)
    assert ip.transformed_tokens(plan) == 20_992_491_520
    assert ip.transformed_tokens(plan) == 10010 * 2_097_152
    ip21 = InterventionPlan(fraction=0.21, train_iters=143000)
    assert ip21.start_step == 112970
    assert InterventionPlan(fraction=1.0, train_iters=50).start_step == 0


def test_fraction_validation():
    with pytest.raises(ContractError):
        InterventionPlan(fraction=0.0, train_iters=10)
    with pytest.raises(ContractError):
        InterventionPlan(fraction=1.5, train_iters=10)
    with pytest.raises(ContractError):
        InterventionPlan(fraction=0.5, train_iters=10, mode="both")


# --- stream-level application ----------------------------------------------

# toy vocab for text mode: 1:1 word <-> token id
WORDS = [
    "he", "He", "HE", "him", "Him", "HIM", "his", "His", "HIS",
    "himself", "Himself", "HIMSELF",
    "she", "She", "SHE", "her", "Her", "HER", "herself", "Herself", "HERSELF",
    "dog", "book", "ran", "fast", "the", "a", "said", "took", "walk",
]
WORD_TO_ID = {w: i for i, w in enumerate(WORDS)}


def toy_detok(tokens) -> str:
    return " ".join(WORDS[int(t)] for t in tokens)


def toy_retok(text) -> list[int]:
    return [WORD_TO_ID[w] for w in text.split()]


def _corpus(tmp_path, n_tokens, seed=0, name="iv", masculine=True):
    rng = np.random.default_rng(seed)
    hi = len(WORDS) if masculine else len(WORDS) - 12
    lo = 0 if masculine else 12
    docs, left = [], n_tokens
    while left > 0:
        k = int(min(left, rng.integers(3, 30)))
        docs.append(rng.integers(lo, hi, size=k))
        left -= k
    write_dataset(docs, "u16", tmp_path / name)
    return open_dataset(tmp_path / name)


def test_text_mode_prefix_and_counts(tmp_path):
    ds = _corpus(tmp_path, 400, seed=1)
    plan = DataOrderPlan(seed=5, batch_size=2, seq_len=7, train_iters=20)
    iplan = InterventionPlan(fraction=0.25, train_iters=20, mode="text")
    assert iplan.start_step == 15
    out, manifest = apply_intervention(
        ds, plan, iplan, tmp_path / "out", detok=toy_detok, retok=toy_retok
    )
    stream = TrainingStream(ds, plan)
    boundary = manifest["boundary_ordinal"]
    assert boundary == 15 * 2
    # prefix contexts byte-identical
    originals = stream.contexts(stream.index[:boundary])
    for i in range(boundary):
        assert np.array_equal(np.asarray(out.document(i)), originals[i])
    # transformed region: counts match an independent regex oracle
    oracle_counts = {k: 0 for k in PRONOUN_MAP}
    tail = stream.contexts(stream.index[boundary:])
    for row in tail:
        text = toy_detok(row)
        for k in PRONOUN_MAP:
            oracle_counts[k] += len(re.findall(r"\b" + k + r"\b", text))
    assert manifest["replacements"] == oracle_counts
    assert sum(oracle_counts.values()) > 0
    # transformed region has no masculine pronouns left (idempotence)
    for i in range(boundary, out.doc_count):
        _, c = swap_and_count(toy_detok(out.document(i)))
        assert sum(c.values()) == 0


def test_whole_stream_when_fraction_one(tmp_path):
    ds = _corpus(tmp_path, 200, seed=2)
    plan = DataOrderPlan(seed=1, batch_size=2, seq_len=4, train_iters=10)
    iplan = InterventionPlan(fraction=1.0, train_iters=10, mode="text")
    out, manifest = apply_intervention(
        ds, plan, iplan, tmp_path / "all", detok=toy_detok, retok=toy_retok
    )
    assert manifest["start_step"] == 0
    assert manifest["transformed_contexts"] == out.doc_count
    for doc in out.documents():
        _, c = swap_and_count(toy_detok(doc))
        assert sum(c.values()) == 0


def test_no_masculine_pronouns_bit_identical(tmp_path):
    ds = _corpus(tmp_path, 300, seed=3, masculine=False)
    plan = DataOrderPlan(seed=2, batch_size=2, seq_len=5, train_iters=12)
    iplan = InterventionPlan(fraction=0.5, train_iters=12, mode="text")
    out, manifest = apply_intervention(
        ds, plan, iplan, tmp_path / "noop", detok=toy_detok, retok=toy_retok
    )
    assert all(v == 0 for v in manifest["replacements"].values())
    stream = TrainingStream(ds, plan)
    all_ctx = stream.contexts(stream.index)
    for i in range(out.doc_count):
        assert np.array_equal(np.asarray(out.document(i)), all_ctx[i])


def test_token_mode_preserves_token_count(tmp_path):
    ds = _corpus(tmp_path, 300, seed=4)
    plan = DataOrderPlan(seed=3, batch_size=2, seq_len=6, train_iters=10)
    iplan = InterventionPlan(fraction=0.4, train_iters=10, mode="token")
    tmap = build_token_pronoun_map(lambda w: [WORD_TO_ID[w]])
    out, manifest = apply_intervention(ds, plan, iplan, tmp_path / "tok", token_map=tmap)
    L = plan.context_len
    assert all(len(d) == L for d in out.documents())
    stream = TrainingStream(ds, plan)
    boundary = manifest["boundary_ordinal"]
    # replaced ids only, count parity with direct scan
    tail = stream.contexts(stream.index[boundary:])
    for src, dst in tmap.items():
        direct = int((tail == src).sum())
        assert manifest["replacements"][str(src)] == direct
    # prefix untouched
    head = stream.contexts(stream.index[:boundary])
    for i in range(boundary):
        assert np.array_equal(np.asarray(out.document(i)), head[i])


def test_token_mode_rejects_multi_token_pronouns():
    def tokenizer(word):
        if word == "himself":
            return [1, 2]  # spans two tokens
        return [WORD_TO_ID.get(word, 0)]

    with pytest.raises(ContractError):
        build_token_pronoun_map(tokenizer)


def test_text_mode_may_change_length(tmp_path):
    # token 0 detokenizes to two words; swap keeps them two words, but a
    # custom mapping collapses "he said" -> "she" to shrink the stream
    write_dataset([[0, 1, 2, 3]], "u16", tmp_path / "var")
    ds = open_dataset(tmp_path / "var")
    plan = DataOrderPlan(seed=0, batch_size=1, seq_len=3, train_iters=1)
    iplan = InterventionPlan(fraction=1.0, train_iters=1, mode="text")

    def detok(tokens):
        return " ".join(["he said", "his", "dog", "ran"][int(t)] for t in tokens)

    def retok(text):
        table = {"she": 9, "said": 8, "her": 7, "dog": 2, "ran": 3}
        return [table[w] for w in text.split()]

    out, _ = apply_intervention(ds, plan, iplan, tmp_path / "varout", detok=detok, retok=retok)
    assert len(out.document(0)) == 5  # one more token than the input context


def test_mode_prerequisites(tmp_path):
    ds = _corpus(tmp_path, 60, seed=5, name="pre")
    plan = DataOrderPlan(seed=0, batch_size=1, seq_len=4, train_iters=4)
    with pytest.raises(ContractError):
        apply_intervention(ds, plan, InterventionPlan(0.5, 4, "text"), tmp_path / "x")
    with pytest.raises(ContractError):
        apply_intervention(ds, plan, InterventionPlan(0.5, 4, "token"), tmp_path / "x")
    with pytest.raises(ContractError):
        apply_intervention(ds, plan, InterventionPlan(0.5, 99, "token"),
                           tmp_path / "x", token_map={})
