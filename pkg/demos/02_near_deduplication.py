"""
Near-deduplication with MinHash + LSH
=====================================

Cluster near-duplicate documents at the ~0.878 Jaccard threshold the
8x16 banding gives, and compare the MinHash estimate against exact
Jaccard on a few pairs.
"""

import numpy as np

from provkit import dedup_texts, minhash, shingle
from provkit.dedup import estimated_jaccard, lsh_threshold

rng = np.random.default_rng(3)
pool = [f"word{i}" for i in range(800)]


def random_doc(n=120):
    return " ".join(pool[i] for i in rng.integers(0, len(pool), size=n))


def perturb(doc, k):
    words = doc.split()
    for idx in rng.choice(len(words), size=k, replace=False):
        words[idx] = pool[int(rng.integers(0, len(pool)))]
    return " ".join(words)


# 60 unique docs; 25 exact copies; 15 lightly perturbed copies
uniques = [random_doc() for _ in range(60)]
corpus = list(uniques)
corpus += [uniques[i % 60] for i in range(25)]
corpus += [perturb(uniques[i % 60], 2) for i in range(15)]

report = dedup_texts(corpus)
print(f"LSH banding threshold: {lsh_threshold():.4f}")
print(f"{report.doc_count} docs -> {len(report.kept)} kept, "
      f"{len(report.discarded)} discarded")
multi = [c for c in report.clusters if len(c) > 1]
print(f"{len(multi)} duplicate clusters; largest {max(map(len, multi))}")

# MinHash estimate vs exact Jaccard for a spectrum of perturbations
print("\n changes | exact J | estimate")
base = random_doc()
for k in (0, 1, 5, 20, 60):
    other = perturb(base, k)
    sa, sb = shingle(base), shingle(other)
    exact = len(sa & sb) / len(sa | sb)
    est = estimated_jaccard(minhash(sa, 0), minhash(sb, 1))
    print(f"  {k:6d} | {exact:7.3f} | {est:7.3f}")

# optional verification pass drops candidate pairs below exact J = 0.87
strict = dedup_texts(corpus, verify_threshold=0.87)
print(f"\nwith verification pass: {len(strict.kept)} kept")
