"""
TypedDict shapes for records written to disk.

Includes:
- RoundRecord: one LocSearchAdv round in the attack transcript
- TrialSummary: one RandAdv run (all trials on one image) in the transcript
- OverlapRow: per-image saliency overlap row
- CriticalRow: RandAdv aggregate per perturbation value
- FgsmRecord: one FGSM label sweep in the transcript

"""

from __future__ import annotations
from typing import TypedDict, List, Optional

# transcript.jsonl, technique == "locsearch"
class RoundRecord(TypedDict):
    image: int
    round: int
    p: float
    candidates: int
    queries: int
    selected: List[List[int]]    # [[x, y], ...], 1-based
    mean_score: Optional[float]  # mean o_c(I) over the selected pixels' Pert images
    true_prob: float             # o_c(I) of the image after this round
    top_k: List[int]
    success: bool

# transcript.jsonl, technique == "randadv"
class TrialSummary(TypedDict):
    image: int
    trials: int
    critical_hits: int
    critical_fraction: float
    first_hit_trial: Optional[int]
    valid: Optional[bool]        # validity of the first critical image

# saliency.csv
class OverlapRow(TypedDict):
    image: int
    perturbed: int
    overlap: float
    z: float

# critical.csv
class CriticalRow(TypedDict):
    p: float
    images: int
    mean_critical_fraction: float
    std_error: float
    success_fraction: float

# transcript.jsonl, technique == "fgsm"
class FgsmRecord(TypedDict):
    image: int
    eps: float
    label_success: List[bool]
    success: bool
