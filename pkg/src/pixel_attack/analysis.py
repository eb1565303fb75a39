"""
Experiment metrics and gradient-based analysis.

- summarize: ErrTop-k / ErrTop-k(Adv) over all drawn images, conf / ptb /
  ptbpixels / time over the successful attacks only (absent, never zero, when
  nothing succeeded)
- fd_gradient: query-only central-difference gradient of one class probability
- saliency_map / overlap_stat / z_statistic: how many perturbed pixels fall in
  the top fraction of the saliency map, with a one-proportion Z score
- fgsm: fast gradient sign baseline with a full target-label sweep
- metrics_frame / write_metrics_csv / format_table: pandas tables in the
  experiment column layout
"""
from __future__ import annotations
import math, time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
import pandas as pd

from . import engine
from .attacks import AttackOutcome
from .errors import ParameterError, PreconditionError, ShapeError
from .images import Image, LabeledImage, PixelLoc, clip_to_bounds, diff_pixels, l1_per_coordinate, validate
from .oracle import OracleSession, ProbVector, is_k_misclassified
from .utils import mean_or_none

DEFAULT_FD_STEP = 1e-3
DEFAULT_TOP_FRACTION = 0.10
DEFAULT_FGSM_EPS = 0.2


@dataclass
class AttackRecord:
    """One drawn test image: its base prediction and, if it was good and attacked, the outcome."""
    li: LabeledImage
    outcome: Optional[AttackOutcome]
    base: ProbVector


@dataclass(frozen=True)
class ExperimentMetrics:
    k: int
    err_top_k_base: float
    err_top_k_adv: float
    conf: Optional[float]
    ptb: Optional[float]
    ptbpixels: Optional[float]
    time: Optional[float]
    n_images: int
    n_attacked: int
    n_success: int

    @property
    def success_rate(self) -> Optional[float]:
        return self.n_success / self.n_attacked if self.n_attacked else None


def summarize(results: Sequence, k: int) -> ExperimentMetrics:
    """
    `results` holds AttackRecords or (LabeledImage, AttackOutcome, base ProbVector)
    tuples; an outcome of None marks a drawn image that was not attacked.
    """
    if not results:
        raise ParameterError("summarize needs at least one result")
    records = [r if isinstance(r, AttackRecord) else AttackRecord(*r) for r in results]
    base_miss = adv_miss = 0
    confs: List[float] = []
    ptbs: List[float] = []
    pixels: List[float] = []
    times: List[float] = []
    for rec in records:
        missed = is_k_misclassified(rec.base, rec.li.label, k)
        out = rec.outcome
        succeeded = out is not None and out.success and out.adversarial is not None
        base_miss += missed
        adv_miss += missed or succeeded
        if not succeeded:
            continue
        img, adv = rec.li.image, out.adversarial
        if out.final_probs is not None:
            confs.append(float(out.final_probs.probs.max()))
        ptbs.append(l1_per_coordinate(img, adv))
        pixels.append(len(diff_pixels(img, adv)) / (img.width * img.height) * 100.0)
        times.append(out.wall_time)
    n = len(records)
    return ExperimentMetrics(
        k=k,
        err_top_k_base=base_miss / n * 100.0,
        err_top_k_adv=adv_miss / n * 100.0,
        conf=mean_or_none(confs),
        ptb=mean_or_none(ptbs),
        ptbpixels=mean_or_none(pixels),
        time=mean_or_none(times),
        n_images=n,
        n_attacked=sum(rec.outcome is not None for rec in records),
        n_success=len(ptbs),
    )


# ------------------ Gradients & saliency ------------------

def fd_gradient(session: OracleSession, img: Image, label: int, step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Central differences of o_label, one coordinate at a time; 2*l*w*h queries, in float64."""
    if not step > 0:
        raise ParameterError(f"finite-difference step {step} must be > 0")
    if not validate(img):
        raise PreconditionError("fd_gradient needs a valid image")
    base = img.data.astype(np.float64)
    n = base.size
    eye = np.eye(n, dtype=np.float64).reshape(n, *base.shape) * step
    plus = session.query_arrays(base[None] + eye)[:, label - 1]
    minus = session.query_arrays(base[None] - eye)[:, label - 1]
    return ((plus - minus) / (2.0 * step)).reshape(base.shape)


def relative_l2_error(estimate: np.ndarray, reference: np.ndarray) -> float:
    ref = float(np.linalg.norm(reference))
    diff = float(np.linalg.norm(np.asarray(estimate) - np.asarray(reference)))
    return diff / ref if ref > 0 else diff


def saliency_map(grad: np.ndarray) -> np.ndarray:
    """(width, height) map: channel-wise max of |grad|."""
    grad = np.asarray(grad)
    if grad.ndim != 3:
        raise ShapeError("gradient must be (channels, width, height)", got=grad.shape)
    return np.abs(grad).max(axis=0)


def top_saliency(smap: np.ndarray, top_fraction: float) -> Set[PixelLoc]:
    """The ceil(top_fraction * w * h) most salient pixels; ties go to the earlier row-major pixel."""
    w, h = smap.shape
    count = math.ceil(top_fraction * w * h)
    flat = smap.T.reshape(-1)  # row-major: index = y * w + x
    order = np.argsort(-flat, kind="stable")[:count]
    return {PixelLoc.from_index(int(i), w) for i in order}


def z_statistic(overlap: float, top_fraction: float, n: int) -> float:
    return (overlap - top_fraction) / math.sqrt(top_fraction * (1.0 - top_fraction) / n)


def overlap_stat(perturbed: Iterable[PixelLoc], smap: np.ndarray, top_fraction: float = DEFAULT_TOP_FRACTION) -> Tuple[float, float]:
    perturbed = set(perturbed)
    if not perturbed:
        raise ParameterError("overlap_stat needs at least one perturbed pixel")
    if not 0.0 < top_fraction < 1.0:
        raise ParameterError(f"top_fraction={top_fraction} outside (0, 1)")
    salient = top_saliency(smap, top_fraction)
    overlap = len(perturbed & salient) / len(perturbed)
    return overlap, z_statistic(overlap, top_fraction, len(perturbed))


# ------------------ FGSM ------------------

@dataclass
class FgsmResult:
    adversarial: Optional[Image]
    tried_labels: int
    label_success: List[bool]  # index a-1: did target label a give a 1-misclassification
    probs: Optional[ProbVector] = None


def fgsm_outcome(model, li: LabeledImage, eps: float = DEFAULT_FGSM_EPS) -> FgsmResult:
    """FGSM over every target label a in [1..C]; keeps the lowest a that misclassifies."""
    img = li.image
    if eps < 0:
        raise ParameterError(f"eps={eps} must be >= 0")
    if not validate(img):
        raise PreconditionError("fgsm needs a valid image")
    best: Optional[Image] = None
    best_probs: Optional[ProbVector] = None
    hits: List[bool] = []
    for a in range(1, model.class_count + 1):
        grad = engine.loss_gradient(model, img, a)
        data = img.data.astype(np.float64) + eps * np.sign(grad)
        candidate = img.with_data(clip_to_bounds(data, img.bounds, img.data.dtype))
        probs = engine.forward(model, candidate)
        hit = is_k_misclassified(probs, li.label, 1)
        hits.append(hit)
        if hit and best is None:
            best, best_probs = candidate, probs
    return FgsmResult(best, model.class_count, hits, best_probs)


def fgsm(model, img: Image, eps: float = DEFAULT_FGSM_EPS, *, label: Optional[int] = None) -> Tuple[Optional[Image], int]:
    """(first misclassifying image or None, number of labels tried); label defaults to the model's own top-1."""
    if label is None:
        label = engine.forward(model, img).top1
    res = fgsm_outcome(model, LabeledImage(img, label), eps)
    return res.adversarial, res.tried_labels


def fgsm_attack(model, li: LabeledImage, eps: float = DEFAULT_FGSM_EPS) -> AttackOutcome:
    """FGSM as an AttackOutcome so it shares the experiment harness; one forward pass per label."""
    started = time.perf_counter()
    res = fgsm_outcome(model, li, eps)
    adv = res.adversarial
    return AttackOutcome(
        technique="fgsm",
        success=adv is not None,
        adversarial=adv,
        rounds_used=res.tried_labels,
        queries_used=res.tried_labels,
        perturbed_pixels=diff_pixels(li.image, adv) if adv is not None else [],
        wall_time=time.perf_counter() - started,
        final_probs=res.probs,
        adversarial_valid=True if adv is not None else None,
        label_success=res.label_success,
    )


# ------------------ Transfer & RandAdv aggregates ------------------

def transfer_rate(session: OracleSession, pairs: Sequence[Tuple[LabeledImage, Image]], k: int = 1) -> Optional[float]:
    """Fraction of adversarial images that a second oracle also k-misclassifies."""
    if not pairs:
        return None
    answers = session.query_batch([adv for _, adv in pairs])
    hits = sum(is_k_misclassified(p, li.label, k) for (li, _), p in zip(pairs, answers))
    return hits / len(pairs)


def critical_summary(p: float, outcomes: Sequence[AttackOutcome]) -> dict:
    """Mean critical fraction with its standard error, and the share of images with any critical hit."""
    fractions = np.array([o.critical_fraction for o in outcomes if o.critical_fraction is not None], dtype=np.float64)
    n = len(fractions)
    return {
        "p": p,
        "images": n,
        "mean_critical_fraction": float(fractions.mean()) if n else float("nan"),
        "std_error": float(fractions.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        "success_fraction": float(np.mean([o.success for o in outcomes])) if outcomes else float("nan"),
    }


# ------------------ Tables ------------------

def metrics_columns(k: int) -> List[str]:
    return [f"ErrTop-{k}", f"ErrTop-{k}(Adv)", "conf", "ptb", "ptbpixels", "time", "technique", "network"]


def metrics_row(m: ExperimentMetrics, *, technique: str, network: str) -> dict:
    cols = metrics_columns(m.k)
    values = [m.err_top_k_base, m.err_top_k_adv, m.conf, m.ptb, m.ptbpixels, m.time, technique, network]
    return dict(zip(cols, values))


def metrics_frame(rows: Sequence[dict]) -> pd.DataFrame:
    frame = pd.DataFrame(list(rows))
    for col in frame.columns:
        if col not in ("technique", "network"):
            frame[col] = pd.to_numeric(frame[col])
    return frame


def write_metrics_csv(rows: Sequence[dict], path) -> Path:
    path = Path(path)
    metrics_frame(rows).to_csv(path, index=False, float_format="%.6f", na_rep="")
    return path


def read_metrics_csv(path) -> pd.DataFrame:
    return pd.read_csv(path)


def format_table(frame: pd.DataFrame) -> str:
    """Aligned text table; absent means print as '-'."""
    return frame.to_string(index=False, na_rep="-", float_format=lambda v: f"{v:.2f}")
