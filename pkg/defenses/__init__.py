"""Server-side defenses applied to client updates before aggregation.

Defenses see `SubmittedUpdate` objects only; the harness strips the malicious
flag before any stage runs.
"""

from defenses.clipping import norm_clip, weak_dp
from defenses.diagnostics import DefenseDiagnostics
from defenses.flame import flame
from defenses.multi_krum import krum_scores, multi_krum
from defenses.pipeline import (
    DefensePipeline,
    FlameStage,
    MultiKrumStage,
    NormClipStage,
    WeakDPStage,
    apply_pipeline,
    format_stage,
    parse_pipeline,
    parse_stage,
)

__all__ = [
    "DefenseDiagnostics",
    "DefensePipeline",
    "FlameStage",
    "MultiKrumStage",
    "NormClipStage",
    "WeakDPStage",
    "apply_pipeline",
    "flame",
    "format_stage",
    "krum_scores",
    "multi_krum",
    "norm_clip",
    "parse_pipeline",
    "parse_stage",
    "weak_dp",
]
