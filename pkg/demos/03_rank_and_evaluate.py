#!/usr/bin/env python3
"""Compare ranking strategies with retrieval metrics.

Synthetic setup: fragments near the collection center are declared
"good links" (the ground truth). Each strategy produces a full ranking;
AP@K rewards putting good fragments early. The oracle sorts by the
hidden quality itself and bounds what any strategy can reach.
"""

import numpy as np

from hubsel import (
    FeatureMatrix,
    Ranking,
    average_precision_at_k,
    baseline_rank,
    compute_profile,
    knn_graph,
    mean_subjective_at_k,
)

rng = np.random.default_rng(21)
N, D, DEPTH = 400, 32, 20

values = rng.normal(1.0, 1.0, (N, D))
m = FeatureMatrix(ids=[f"f{i:03d}" for i in range(N)], values=values)

# hidden quality: inverse distance to the true mean, scaled to the 0-15
# score range used by the subjective files
center = values.mean(axis=0)
dist = np.sqrt(((values - center) ** 2).sum(axis=1))
quality = 15.0 * (dist.max() - dist) / (dist.max() - dist.min())
scores = {m.ids[i]: float(quality[i]) for i in range(N)}
relevant = {m.ids[i] for i in np.argsort(dist)[: N // 10]}  # top decile

g = knn_graph(m, 60, metric="cosine")
profile = compute_profile(m, g, k_hub=10, n_lid=50, m_div=30)

print(f"n = {N}, {len(relevant)} relevant fragments, depth K = {DEPTH}")
print(f"{'strategy':<10} {'AP@K':>8} {'mean score@K':>13}")
for mode in ("hub", "lid", "random", "oracle"):
    r = baseline_rank(profile, mode, seed=3, scores=scores)
    ap = average_precision_at_k(r, relevant, DEPTH)
    ms = mean_subjective_at_k(r, scores, DEPTH)
    print(f"{mode:<10} {ap:>8.3f} {ms:>13.2f}")

# sanity floor: expected AP of a random order is roughly the relevant rate
print(f"\nrelevant rate (random baseline floor): {len(relevant) / N:.3f}")
print("hubness ranks the central, much-linked fragments first and")
print("beats random by a wide margin without ever seeing the labels.")
