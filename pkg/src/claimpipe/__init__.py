"""Keyword-guided evidence abstraction and claim deconstruction for
binary claim verification."""
from __future__ import annotations

from .fuzzy import (
    NormalizedText,
    indel_distance,
    partial_ratio,
    preprocess,
    simple_ratio,
    token_set_ratio,
)
from .llm import (
    BackendConfig,
    BackendError,
    BackendKind,
    CompletionClient,
    CompletionRequest,
    CompletionResponse,
    MalformedResponseError,
    ResponseCache,
    ScriptedMissError,
    TransportError,
)
from .pipeline import (
    Ablation,
    AbstractedEvidence,
    ClaimInstance,
    ClaimVerifier,
    EvidencePiece,
    KeywordSet,
    PipelineConfig,
    PipelineError,
    Subclaim,
    SubclaimResult,
    TraceEntry,
    Verdict,
    VerificationReport,
    aggregate,
    parse_keyword_list,
    parse_subclaims,
    parse_verdict_answer,
    select_keywords,
)
from .prompts import PromptError, PromptLibrary, PromptTask

__version__ = "0.1.0"

__all__ = [
    "Ablation",
    "AbstractedEvidence",
    "BackendConfig",
    "BackendError",
    "BackendKind",
    "ClaimInstance",
    "ClaimVerifier",
    "CompletionClient",
    "CompletionRequest",
    "CompletionResponse",
    "EvidencePiece",
    "KeywordSet",
    "MalformedResponseError",
    "NormalizedText",
    "PipelineConfig",
    "PipelineError",
    "PromptError",
    "PromptLibrary",
    "PromptTask",
    "ResponseCache",
    "ScriptedMissError",
    "Subclaim",
    "SubclaimResult",
    "TraceEntry",
    "TransportError",
    "Verdict",
    "VerificationReport",
    "aggregate",
    "indel_distance",
    "parse_keyword_list",
    "parse_subclaims",
    "parse_verdict_answer",
    "partial_ratio",
    "preprocess",
    "select_keywords",
    "simple_ratio",
    "token_set_ratio",
    "__version__",
]
