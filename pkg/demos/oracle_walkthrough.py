"""Where would each query like to stop?

Builds a synthetic 200-tree ensemble and a labelled query set, scores every
prefix of the ensemble, and reports the per-query oracle exit: the earliest
tree count at which NDCG@10 peaks.
"""

from qexit import (dataset_trajectories, exit_histogram, generate_synthetic_dataset,
                   generate_synthetic_ensemble, make_checkpoints, mean_ndcg, oracle_curve,
                   oracle_exit)

L = 200
ensemble = generate_synthetic_ensemble(L, max_depth=4, num_features=10, seed=1)
data = generate_synthetic_dataset(ensemble, num_queries=200, seed=2)

# one NDCG value per query per prefix length
trajs = dataset_trajectories(ensemble, data.dataset, make_checkpoints(L, 1))
exits = [oracle_exit(t) for t in trajs]

full = mean_ndcg([e.full_ndcg for e in exits])
best = mean_ndcg([e.exit_ndcg for e in exits])
print(f"mean NDCG@10 with all {L} trees : {full:.4f}")
print(f"mean NDCG@10 at the oracle exit : {best:.4f}  ({100 * (best - full) / full:+.1f}%)")
early = sum(e.exit_position < L for e in exits)
print(f"queries that peak before tree {L}: {early}/{len(exits)}")

print("\nexits per 25-tree bin")
for start, count in exit_histogram(exits, bin_width=25).items():
    print(f"  trees {start:3d}-{start + 24:3d}  {'#' * count} {count}")

# the capped curve: an oracle that may stop any query at or before tree p
print("\n  p   full-model  capped-oracle")
for pt in oracle_curve(trajs)[::25]:
    print(f"{pt.position:4d}   {pt.full_mean:.4f}      {pt.capped_oracle_mean:.4f}")

# the generator planted a peak per query; the oracle should mostly find it
near = sum(abs(e.exit_position - data.peaks[e.query_id]) <= 10 for e in exits)
print(f"\noracle exit within 10 trees of the planted peak: {near}/{len(exits)}")
