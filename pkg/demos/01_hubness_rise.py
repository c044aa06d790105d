#!/usr/bin/env python3
"""How hubs appear as dimension grows.

Draws i.i.d. Gaussian clouds (mean 1, so directions are not uniform on
the sphere) at several dimensions, counts k-occurrences, and prints the
skewness of the count distribution. Past a few dozen dimensions a small
set of fragments starts showing up in a large share of neighbor lists.
"""

import numpy as np

from hubsel import FeatureMatrix, hubness_scores, knn_graph, skewness

N = 3000
K = 10
DIMS = [3, 10, 30, 100, 300]

print(f"n = {N} fragments, k = {K}, cosine distance")
print(f"{'d':>5} {'skewness':>9} {'max N_k':>8} {'hubs':>5} {'anti':>5}  hubness?")

for d in DIMS:
    rng = np.random.default_rng(0)
    m = FeatureMatrix(
        ids=[f"v{i:04d}" for i in range(N)],
        values=rng.normal(1.0, 1.0, (N, d)),
    )
    g = knn_graph(m, K, metric="cosine")
    prof = hubness_scores(g)
    rep = skewness(prof)
    hubs = int((prof.categories == "hub").sum())
    anti = int((prof.categories == "anti_hub").sum())
    flag = "yes" if rep.hubness_exists else "no"
    print(f"{d:>5} {rep.s_nk:>9.3f} {int(prof.scores.max()):>8} {hubs:>5} {anti:>5}  {flag}")

print()
print("Every fragment is someone's neighbor on average (mean N_k = k),")
print("but in high dimension the mass concentrates: a few fragments carry")
print("N_k many times k while a growing tail is in nobody's list at all.")
