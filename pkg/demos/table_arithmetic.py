"""Recombining published per-group figures into the overall line.

Results are often reported per exit group: how many queries stopped at a
sentinel, their NDCG with and without stopping, and the speedup. The
overall line is a query-weighted mean, and the overall speedup is L over
the mean number of trees traversed. These rows come from a 1,047-tree
model on MSLR-WEB30K with sentinels at trees 25 and 300.
"""

from qexit import GroupRow, aggregate_report, format_report_tsv, report_from_rows

L = 1047
rows = [GroupRow.make(25, 2024, 0.4399, 0.5161, L),
        GroupRow.make(300, 1339, 0.5391, 0.5694, L),
        GroupRow.make(L, 2754, 0.5518, 0.5518, L)]

overall = aggregate_report(rows, total_queries=6117, num_trees=L)
mean_trees = (2024 * 25 + 1339 * 300 + 2754 * L) / 6117
print(f"mean trees traversed: {mean_trees:.1f} of {L}")
print(f"overall NDCG@10     : {overall.ndcg_full:.5f} -> {overall.ndcg_exit:.5f} "
      f"({overall.gain_pct:+.2f}%)")
print(f"overall speedup     : {overall.speedup:.3f}x\n")

# the same thing as a rendered table
for line in format_report_tsv(report_from_rows(rows, L)).splitlines():
    print("  ".join(f"{c:>9s}" for c in line.split("\t")[:8]))
