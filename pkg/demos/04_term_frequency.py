"""
Term frequency vs task accuracy
===============================

Count operand mentions in exactly the stream a checkpoint has seen, then
join externally measured per-term accuracy into binned curves and the
top/bottom-decile performance gap.
"""

import numpy as np

from provkit import DataOrderPlan, TermSpec, binned_accuracy, count_up_to, open_dataset, performance_gap, write_dataset
from provkit.dataloader import checkpoint_schedule

# toy detokenizer: ids < 100 render as their decimal string
detok = lambda toks: " ".join(str(int(t)) for t in toks)

rng = np.random.default_rng(17)
docs = [rng.integers(0, 130, size=int(rng.integers(10, 90))) for _ in range(400)]
write_dataset(docs, "u16", "/tmp/demo_freq")
ds = open_dataset("/tmp/demo_freq")
plan = DataOrderPlan(seed=555, batch_size=8, seq_len=15, train_iters=64, eod_token=0)

terms = [TermSpec.numeric(v) for v in range(0, 100, 2)]
sched = checkpoint_schedule(plan)
print("checkpoints:", list(sched))

# counts are monotone across checkpoints of one plan
for step in (4, 16, 64):
    counts = count_up_to(ds, plan, detok, step, terms)
    seen = step * plan.batch_size
    print(f"step {step:3d} ({seen:4d} contexts): "
          f"total mentions {sum(counts.values())}")

# synthetic accuracy rising with count, noisy; then the summary statistics
counts = count_up_to(ds, plan, detok, 64, terms)
maxc = max(counts.values()) or 1
accuracy = {
    t: min(1.0, counts[t] / maxc + float(rng.normal(0, 0.03))) for t in terms
}
accuracy = {t: max(0.0, a) for t, a in accuracy.items()}

print("\nlog-binned accuracy (count range -> mean acc over terms):")
for b in binned_accuracy(counts, accuracy):
    print(f"  [{b.lo:4d},{b.hi:4d}) -> {b.mean_accuracy:.3f}  ({b.n_terms} terms)")

gap = performance_gap(counts, accuracy)
print(f"\nperformance gap: {gap.delta:.1f} points "
      f"(top decile {gap.top_mean:.3f} vs bottom {gap.bottom_mean:.3f}, "
      f"decile size {gap.decile_size})")
