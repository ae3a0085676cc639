"""Choosing two sentinel positions on one split and judging them on another.

A sentinel is a tree count where a query may stop. Placement tries every
pair of candidate positions on a validation split and keeps the pair with
the best mean NDCG when each query stops at its best sentinel (or runs to
the end). The winner is then evaluated on an unseen test split.
"""

from qexit import (dataset_trajectories, evaluate_config, format_report_tsv,
                   generate_synthetic_dataset, generate_synthetic_ensemble, make_checkpoints,
                   search_placements)

L = 400
ensemble = generate_synthetic_ensemble(L, max_depth=4, num_features=10, seed=5)
valid = generate_synthetic_dataset(ensemble, 150, seed=6, prefix="v").dataset
test = generate_synthetic_dataset(ensemble, 150, seed=7, prefix="t").dataset

cps = make_checkpoints(L, 25)
valid_trajs = dataset_trajectories(ensemble, valid, cps, threads=4)
test_trajs = dataset_trajectories(ensemble, test, cps, threads=4)

result = search_placements(2, cps.positions[:-1], valid_trajs, threads=4)
print(f"{len(result.ranking)} pairs tried; top five on validation:")
for config, objective in result.ranking[:5]:
    print(f"  {str(config):>8s}  {objective:.4f}")

report = evaluate_config(result.best, test_trajs)
print(f"\ntest split, sentinels at {result.best}:\n")
# keep the rounded columns only
for line in format_report_tsv(report).splitlines():
    print("  ".join(f"{c:>9s}" for c in line.split("\t")[:8]))
