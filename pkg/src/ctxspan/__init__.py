"""Evidence-conditioned token scoring for hallucination span detection."""

__version__ = "0.1.0"

from .spans import CharSpanSet
from .dataset import AnnotatedResponse, Token
from .detector import CsrSeries, DetectorConfig, compute_csr, classify_tokens, assemble_spans, detect
from .evaluation import EvalReport, evaluate_dataset, iou
from .retrieval import EvidenceSet, RetrievalConfig, retrieve

__all__ = [
    "AnnotatedResponse",
    "CharSpanSet",
    "CsrSeries",
    "DetectorConfig",
    "EvalReport",
    "EvidenceSet",
    "RetrievalConfig",
    "Token",
    "assemble_spans",
    "classify_tokens",
    "compute_csr",
    "detect",
    "evaluate_dataset",
    "iou",
    "retrieve",
]
