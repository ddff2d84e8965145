"""Compare the four feature rankers on a table with planted structure.

Five columns carry class information of decreasing strength, one column is
an exact copy of the strongest, and the remaining columns are noise. Every
ranker should put the informative columns near the top; the LASSO ranking
keeps the duplicated pair next to each other.

    python3 demos/ranking_methods.py
"""
import numpy as np

from vowelmark import select
from vowelmark.featureset import FeatureTable

rng = np.random.default_rng(0)
n_als, n_hc, n_noise = 31, 33, 15
labels = np.r_[np.ones(n_als, int), np.zeros(n_hc, int)]
strength = [1.6, 1.2, 0.9, 0.6, 0.3]
informative = np.column_stack([s * labels + rng.standard_normal(len(labels)) for s in strength])
columns = np.column_stack([informative, informative[:, 0], rng.standard_normal((len(labels), n_noise))])
names = [f"signal{k + 1}" for k in range(5)] + ["signal1_copy"] + [f"noise{k + 1}" for k in range(n_noise)]
table = FeatureTable([f"{k:03d}" for k in range(len(labels))], labels, columns, tuple(names))

for method in select.METHODS:
    ranking = select.rank_features(table, method, k_neighbors=11)
    print(f"{ranking.method:<8} " + " ".join(ranking.top(7)))
