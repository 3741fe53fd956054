"""
Pronoun-swap interventions and bias scoring
===========================================

Produce a counterfactual training stream whose final fraction has
masculine pronouns swapped to feminine, then score bias metrics from
(synthetic) model outputs.
"""

import numpy as np

from provkit import (
    CrowsPair,
    DataOrderPlan,
    InterventionPlan,
    WinoBiasItem,
    apply_intervention,
    crows_score,
    open_dataset,
    swap_pronouns_text,
    winobias_score,
    write_dataset,
)

print(swap_pronouns_text("He said his dog bit him himself."))
print(swap_pronouns_text("hertz history stays untouched"))

# paper-scale boundary arithmetic: last 7% of 143k steps
iv = InterventionPlan(fraction=0.07, train_iters=143000)
full = DataOrderPlan(seed=0)
print(f"start_step={iv.start_step}, transformed tokens="
      f"{iv.transformed_tokens(full):,}")

# a small corpus over a word vocabulary, swapped in token mode
WORDS = ["he", "him", "his", "himself", "she", "her", "herself",
         "the", "dog", "ran", "home", "fast"]
rng = np.random.default_rng(23)
docs = [rng.integers(0, len(WORDS), size=int(rng.integers(4, 30))) for _ in range(120)]
write_dataset(docs, "u16", "/tmp/demo_iv")
ds = open_dataset("/tmp/demo_iv")
plan = DataOrderPlan(seed=77, batch_size=4, seq_len=9, train_iters=24)

token_map = {WORDS.index("he"): WORDS.index("she"),
             WORDS.index("him"): WORDS.index("her"),
             WORDS.index("his"): WORDS.index("her"),
             WORDS.index("himself"): WORDS.index("herself")}
iv_small = InterventionPlan(fraction=0.25, train_iters=24, mode="token")
out, manifest = apply_intervention(ds, plan, iv_small, "/tmp/demo_iv_out",
                                   token_map=token_map)
print(f"boundary ordinal {manifest['boundary_ordinal']}, "
      f"replacements {manifest['replacements']}")

# bias metrics from externally supplied model outputs: 0.5 = unbiased
pairs = [CrowsPair(f"c{i}", float(a), float(b))
         for i, (a, b) in enumerate(rng.uniform(2, 9, size=(200, 2)))]
items = [WinoBiasItem(f"w{i}", float(a), float(b))
         for i, (a, b) in enumerate(rng.normal(-3, 1, size=(200, 2)))]
print(f"crows score (random inputs):    {crows_score(pairs):.3f}")
print(f"winobias score (random inputs): {winobias_score(items):.3f}")

biased = [CrowsPair(f"b{i}", 2.0, 4.0) for i in range(10)]
print(f"crows score (fully stereotyped): {crows_score(biased):.3f}")
