"""Document-level machine-translation QE reranking toolkit.

Generate N candidate translations per document, score each with a
reference-free quality-estimation metric (learned scorer strategies or
LLM judges), and keep the argmax. Ships the document-adaptation strategies,
the retry-based judge metrics, batched backend clients, dataset ingestion,
and an experiment harness that sweeps pool sizes from one generation pass.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .rerank import Candidate, CandidatePool, RerankOutcome, select_best, trim_pool
from .segmentation import SegmentedDoc, Sentence, align_and_pad, segment
from .strategies import (
    DocScore,
    ScorePlan,
    ScoreRequest,
    SlideConfig,
    Window,
    aggregate,
    enumerate_windows,
    plan_doc_context,
    plan_full_doc,
    plan_sentence_avg,
    plan_slide,
)

__all__ = [
    "__version__",
    "Candidate",
    "CandidatePool",
    "RerankOutcome",
    "select_best",
    "trim_pool",
    "SegmentedDoc",
    "Sentence",
    "align_and_pad",
    "segment",
    "DocScore",
    "ScorePlan",
    "ScoreRequest",
    "SlideConfig",
    "Window",
    "aggregate",
    "enumerate_windows",
    "plan_doc_context",
    "plan_full_doc",
    "plan_sentence_avg",
    "plan_slide",
]
