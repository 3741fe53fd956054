"""
Memorization scanning and the Poisson point process
===================================================

Plant known 64-token strings in a random corpus, find them with a lookup
oracle at their exact training positions, and check whether occurrence
counts per stream slice behave like a constant-rate Poisson process.
"""

import numpy as np

from provkit import DataOrderPlan, LookupOracle, TrainingStream, fit_poisson, open_dataset, scan, write_dataset

rng = np.random.default_rng(11)
n_ctx, seq_len = 20_000, 64
L = seq_len + 1

tokens = rng.integers(1, 50257, size=n_ctx * L, dtype=np.uint32)
write_dataset([tokens], "u32", "/tmp/demo_mem")
ds = open_dataset("/tmp/demo_mem")
plan = DataOrderPlan(seed=99, batch_size=100, seq_len=seq_len, train_iters=200)
stream = TrainingStream(ds, plan)

# plant 60 memorized strings at uniformly random training ordinals
planted = np.sort(rng.choice(n_ctx, size=60, replace=False))
strings = stream.windows(stream.index[planted], 64)
oracle = LookupOracle([s for s in strings], k=32, ell=32)

result = scan(ds, plan, oracle, k=32, ell=32, slice_size=512, stream=stream)
print(f"scanned {result.total_scanned} contexts, memorized {result.memorized_count}")
print("hits at planted ordinals:",
      sorted(result.memorized_ordinals()) == [int(p) for p in planted])

# uniformly placed hits look Poisson across slices: high p-value expected
fit = fit_poisson(result.slice_counts)
print(f"slices: {len(result.slice_counts)}  lambda_hat={fit.lambda_hat:.3f}  "
      f"dispersion={fit.dispersion:.1f}  p={fit.p_value:.3f}")

# Q-Q pairs: (theoretical quantile, empirical quantile, multiplicity)
print("qq:", fit.qq_points[:8])

# contrast: pile all hits into the first slices -> the fit collapses
clumped = np.zeros_like(result.slice_counts)
clumped[:3] = [25, 20, 15]
bad = fit_poisson(clumped)
print(f"clumped counterexample: dispersion={bad.dispersion:.1f}  p={bad.p_value:.2e}")
