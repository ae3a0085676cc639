"""Query-level early-exit analysis for additive tree ensembles.

Score queries at ensemble-prefix checkpoints, track per-query NDCG@k as
trees accumulate, find oracle exit points, classify trajectory shapes and
place / evaluate exit sentinels with speedup accounting.
"""

__version__ = "0.1.0"

from .ingest import (Document, LetorParseError, QueryGroup, RankingDataset, dataset_stats,
                     format_letor, parse_letor, read_letor)
from .model import (Ensemble, ModelParseError, RegressionTree, TreeNode, UnsupportedModelError,
                    generate_synthetic_ensemble, parse_canonical_model, parse_text_model,
                    read_model, traverse_tree, write_canonical_model)
from .scorer import (CheckpointSet, PrefixScoreMatrix, make_checkpoints, score_full,
                     score_prefixes, tree_outputs)
from .metrics import (NdcgTrajectory, dataset_trajectories, dcg_at_k, ideal_dcg_at_k,
                      mean_ndcg, ndcg_at_k, ndcg_trajectory, rank_documents)
from .exitlab import (GroupRow, OracleExit, OverallRecord, QueryClass, aggregate_report,
                      class_counts, classify_query, exit_histogram, oracle_curve, oracle_exit,
                      speedup)
from .sentinel import (EvaluationReport, PlacementResult, SentinelConfig, decide_exits,
                       evaluate_config, format_report_json, format_report_tsv,
                       report_from_rows, search_placements)
from .synthetic import SyntheticData, generate_synthetic_dataset
