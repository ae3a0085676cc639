"""Sorting queries by the shape of their NDCG trajectory.

Each query falls in one of six classes by comparing its NDCG at the first
checkpoint, at the last, and its extremes in between. Classes 1, 2, 4 and 6
are the ones that early exit can help.
"""

from qexit import (QueryClass, class_counts, classify_query, dataset_trajectories,
                   generate_synthetic_dataset, generate_synthetic_ensemble, make_checkpoints)

L = 300
ensemble = generate_synthetic_ensemble(L, max_depth=4, num_features=10, seed=3)
data = generate_synthetic_dataset(ensemble, num_queries=300, seed=4)
trajs = dataset_trajectories(ensemble, data.dataset, make_checkpoints(L, 25))

for eps in (0.001, 0.01, 0.05):
    counts = class_counts(classify_query(t, eps) for t in trajs)
    helped = sum(n for c, n in counts.items() if c.benefits_from_exit)
    print(f"epsilon={eps}:")
    for cls, n in counts.items():
        print(f"  {int(cls)} {cls.name.lower():28s} {cls.category:10s} {n:4d}")
    print(f"  queries early exit can help: {helped}/{len(trajs)}\n")

# one example of each class, as a sequence of NDCG values
seen = {}
for t in trajs:
    seen.setdefault(classify_query(t), t)
for cls in QueryClass:
    if cls in seen:
        vals = " ".join(f"{v:.2f}" for v in seen[cls].values)
        print(f"class {int(cls)}: {vals}")
