"""Gap-gated adjudication pipeline: Python bindings over the C++ core."""

from ._gapgate import (
    Corpus,
    GapgateError,
    adjudicate,
    aggregate_metrics,
    bootstrap_ci,
    compute_gap,
    evaluate,
    expected_backend_calls,
    load_dataset,
    modes,
    openapi,
    score_case,
)

__all__ = [
    "Corpus",
    "GapgateError",
    "adjudicate",
    "aggregate_metrics",
    "bootstrap_ci",
    "compute_gap",
    "evaluate",
    "expected_backend_calls",
    "load_dataset",
    "modes",
    "openapi",
    "score_case",
]
