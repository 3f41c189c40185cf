"""Data-engineering pipeline for training deep-search (reason + web search) models.

Stages: annotate and sample diverse QA queries, synthesize multi-turn
reason/search/summarize trajectories, curate them with quality filters and
export SFT examples, DPO pairs and RL rewards. An evaluation harness scores
trajectories with token F1, an LLM judge and stage attribution.
"""

from .corpus import AnnotatedQuery, QaRecord, annotate_query, count_interrogatives, load_qa_dataset
from .curation import CurationConfig, ResponseMetadata, collect_metadata, curate, select_best
from .evaluation import best_f1, f1, llm_judge, output_stats, stage_attribution
from .export import DpoPair, RewardBreakdown, SftExample, build_dpo_pairs, rl_reward, to_sft_example
from .orchestrator import (
    LoopConfig,
    Trajectory,
    TrajectoryTurn,
    extract_final_answer,
    parse_search_query,
    run_trajectory,
    sample_candidates,
    summarize_docs,
)
from .sampler import SamplePlan, sample_diverse

__version__ = "0.1.0"

__all__ = [
    "AnnotatedQuery",
    "QaRecord",
    "annotate_query",
    "count_interrogatives",
    "load_qa_dataset",
    "CurationConfig",
    "ResponseMetadata",
    "collect_metadata",
    "curate",
    "select_best",
    "best_f1",
    "f1",
    "llm_judge",
    "output_stats",
    "stage_attribution",
    "DpoPair",
    "RewardBreakdown",
    "SftExample",
    "build_dpo_pairs",
    "rl_reward",
    "to_sft_example",
    "LoopConfig",
    "Trajectory",
    "TrajectoryTurn",
    "extract_final_answer",
    "parse_search_query",
    "run_trajectory",
    "sample_candidates",
    "summarize_docs",
    "SamplePlan",
    "sample_diverse",
]
