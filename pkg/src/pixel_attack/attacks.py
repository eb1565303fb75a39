"""
Black-box attacks driven only by oracle queries.

- rand_adv: RandAdv. U independent trials, each perturbing a random pixel (or a
  random set of distinct pixels) with Pert and checking for 1-misclassification.
  Returns the critical fraction and the first critical image, which may lie
  outside [lb, ub].
- loc_search_adv: LocSearchAdv. Greedy local search over pixel neighborhoods:
  score every candidate pixel by o_c(I) of its Pert image, Cyclic-update the best
  t, stop once c(I) leaves the top-k. Every intermediate image stays in [lb, ub].

Neither attack checks goodness; the caller does (and pays that query).
"""
from __future__ import annotations
import json, math, time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .errors import ParameterError, PreconditionError
from .images import Image, LabeledImage, PixelLoc, clip_to_bounds, row_major, validate
from .models import RoundRecord, TrialSummary
from .oracle import OracleSession, ProbVector, is_k_misclassified, top_k
from .perturbation import cyclic_array, pert_candidates, sign_of
from .utils import chunked


@dataclass(frozen=True)
class RandAdvConfig:
    p: float = 100.0
    budget: int = 1  # U
    set_size: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.budget < 1:
            raise ParameterError(f"trial budget U={self.budget} must be >= 1")
        if self.set_size < 1:
            raise ParameterError(f"set_size={self.set_size} must be >= 1")

    @staticmethod
    def default_budget(width: int, height: int, set_size: int = 1) -> int:
        """Half the pixel count for single pixels, 5000 trials for pixel sets."""
        return math.ceil(width * height / 2) if set_size == 1 else 5000


@dataclass(frozen=True)
class LocSearchConfig:
    p0: float = 10.0
    r: float = 1.5
    t: int = 5
    d: int = 5
    k: int = 1
    rounds: int = 150  # R
    init_fraction: float = 0.10
    exclusion_window: int = 30
    p_low: float = 0.3
    p_high: float = 0.9
    p_step: float = 2.0
    p_min: float = 0.1
    p_max: float = 1000.0
    seed: int = 0
    sort_descending: bool = False

    def __post_init__(self):
        if not 0.0 <= self.r <= 2.0:
            raise ParameterError(f"r={self.r} outside [0, 2]")
        for name in ("t", "k", "rounds"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name}={getattr(self, name)} must be >= 1")
        if self.d < 0 or self.exclusion_window < 0:
            raise ParameterError("d and exclusion_window must be >= 0")
        if not 0.0 < self.init_fraction <= 1.0:
            raise ParameterError(f"init_fraction={self.init_fraction} outside (0, 1]")
        if self.p_step <= 0 or not 0 < self.p_min <= self.p_max:
            raise ParameterError("p_step must be > 0 and 0 < p_min <= p_max")


@dataclass
class AttackOutcome:
    technique: str
    success: bool
    adversarial: Optional[Image]
    rounds_used: int
    queries_used: int
    perturbed_pixels: List[PixelLoc]
    wall_time: float
    final_probs: Optional[ProbVector] = None
    adversarial_valid: Optional[bool] = None
    critical_fraction: Optional[float] = None
    critical_hits: Optional[int] = None
    first_hit_trial: Optional[int] = None
    label_success: Optional[List[bool]] = None  # FGSM: per target label
    rounds: List[RoundRecord] = field(default_factory=list)


# ------------------ RandAdv ------------------

def sample_trial_sets(seed: int, budget: int, set_size: int, width: int, height: int) -> List[np.ndarray]:
    """Row-major flat pixel indices per trial; distinct within a trial, independent across trials."""
    rng = np.random.default_rng(seed)
    return [rng.choice(width * height, size=set_size, replace=False) for _ in range(budget)]


def rand_adv(session: OracleSession, li: LabeledImage, cfg: RandAdvConfig) -> AttackOutcome:
    img = li.image
    w, h = img.width, img.height
    if cfg.set_size > w * h:
        raise ParameterError(f"set_size={cfg.set_size} exceeds the {w * h} pixels of the image")
    start_queries, started = session.query_count, time.perf_counter()
    trial_sets = sample_trial_sets(cfg.seed, cfg.budget, cfg.set_size, w, h)

    hits = 0
    first: Optional[tuple] = None  # (trial, data, locs, probs)
    trial = 0
    for chunk in chunked(trial_sets, session.chunk_size):
        batch = np.repeat(img.data[None], len(chunk), axis=0)
        for j, idx in enumerate(chunk):
            xs, ys = idx % w, idx // w
            batch[j][:, xs, ys] = _pert_values(img.data, cfg.p, xs, ys)
        for j, row in enumerate(session.query_arrays(batch)):
            trial += 1
            probs = ProbVector(row)
            if is_k_misclassified(probs, li.label, 1):
                hits += 1
                if first is None:
                    first = (trial, batch[j].copy(), chunk[j], probs)

    outcome = AttackOutcome(
        technique="randadv",
        success=hits > 0,
        adversarial=None,
        rounds_used=cfg.budget,
        queries_used=session.query_count - start_queries,
        perturbed_pixels=[],
        wall_time=time.perf_counter() - started,
        critical_fraction=hits / cfg.budget,
        critical_hits=hits,
    )
    if first is not None:
        trial_no, data, idx, probs = first
        adversarial = Image(data, img.bounds)
        outcome.adversarial = adversarial
        outcome.adversarial_valid = validate(adversarial)
        outcome.first_hit_trial = trial_no
        outcome.final_probs = probs
        outcome.perturbed_pixels = row_major(PixelLoc.from_index(int(i), w) for i in idx)
    return outcome


def _pert_values(data: np.ndarray, p: float, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Pert values for pixels (xs, ys) of `data`: p * sign(value), channels first."""
    return p * sign_of(data[:, xs, ys])


def trial_summary(outcome: AttackOutcome, image_index: int) -> TrialSummary:
    return {
        "image": image_index,
        "trials": outcome.rounds_used,
        "critical_hits": int(outcome.critical_hits or 0),
        "critical_fraction": float(outcome.critical_fraction or 0.0),
        "first_hit_trial": outcome.first_hit_trial,
        "valid": outcome.adversarial_valid,
    }


# ------------------ LocSearchAdv ------------------

def neighborhood(prev: Iterable[PixelLoc], d: int, w: int, h: int) -> List[PixelLoc]:
    """All in-image pixels within Chebyshev distance d of some pixel in prev, row-major."""
    mask = _neighborhood_mask([loc.index(w) for loc in prev], d, w, h)
    return [PixelLoc(int(x) + 1, int(y) + 1) for y, x in np.argwhere(mask)]


def _neighborhood_mask(indices: Iterable[int], d: int, w: int, h: int) -> np.ndarray:
    mask = np.zeros((h, w), dtype=bool)
    for i in indices:
        x, y = int(i) % w, int(i) // w
        mask[max(0, y - d):min(h, y + d + 1), max(0, x - d):min(w, x + d + 1)] = True
    return mask


def initial_pixels(rng: np.random.Generator, w: int, h: int, fraction: float) -> np.ndarray:
    """Sorted row-major indices of ceil(fraction * w * h) distinct random pixels."""
    n = max(1, math.ceil(fraction * w * h))
    return np.sort(rng.choice(w * h, size=min(n, w * h), replace=False))


def rank_candidates(scores: np.ndarray, *, descending: bool = False) -> np.ndarray:
    """
    Candidate order by score: ascending (largest drop of o_c(I) first) by default.
    Stable, so ties keep row-major order.
    """
    return np.argsort(-scores if descending else scores, kind="stable")


def adapt_p(p: float, mean_score: float, cfg: LocSearchConfig) -> float:
    if mean_score > cfg.p_high:
        p *= cfg.p_step
    elif mean_score < cfg.p_low:
        p /= cfg.p_step
    return float(min(cfg.p_max, max(cfg.p_min, p)))


def loc_search_adv(session: OracleSession, li: LabeledImage, cfg: LocSearchConfig, *, image_index: int = 0) -> AttackOutcome:
    img = li.image
    if not validate(img):
        raise PreconditionError("LocSearchAdv needs a valid image (all coordinates inside [lb, ub])")
    if cfg.k > session.class_count:
        raise ParameterError(f"k={cfg.k} exceeds the {session.class_count} classes")
    w, h = img.width, img.height
    label = li.label
    rng = np.random.default_rng(cfg.seed)
    start_queries, started = session.query_count, time.perf_counter()

    data = np.array(img.data)  # the current image, updated in place each round
    candidates = initial_pixels(rng, w, h, cfg.init_fraction)
    refill_size = len(candidates)
    banned_until = np.zeros(w * h, dtype=np.int64)  # eligible in round i iff banned_until < i
    perturbed: set = set()
    records: List[RoundRecord] = []
    p = float(cfg.p0)
    success = False
    probs: Optional[ProbVector] = None
    rnd = 0

    for rnd in range(1, cfg.rounds + 1):
        round_start = session.query_count
        eligible = candidates[banned_until[candidates] < rnd]
        if eligible.size == 0:
            pool = np.flatnonzero(banned_until < rnd)
            if pool.size:
                eligible = np.sort(rng.choice(pool, size=min(refill_size, pool.size), replace=False))

        chosen = eligible[:0]
        mean_score: Optional[float] = None
        if eligible.size:
            xs, ys = eligible % w, eligible // w
            scores = session.query_arrays(pert_candidates(data, p, xs, ys))[:, label - 1]
            best = rank_candidates(scores, descending=cfg.sort_descending)[:cfg.t]
            chosen = eligible[best]
            mean_score = float(scores[best].mean())
            cx, cy = chosen % w, chosen // w
            data[:, cx, cy] = clip_to_bounds(cyclic_array(cfg.r, data[:, cx, cy], img.bounds), img.bounds, data.dtype)
            banned_until[chosen] = rnd + cfg.exclusion_window
            perturbed.update(int(i) for i in chosen)

        probs = ProbVector(session.query_arrays(data[None])[0])
        ranked = top_k(probs, cfg.k)
        success = label not in ranked
        records.append({
            "image": image_index,
            "round": rnd,
            "p": p,
            "candidates": int(eligible.size),
            "queries": session.query_count - round_start,
            "selected": [[int(i) % w + 1, int(i) // w + 1] for i in chosen],
            "mean_score": mean_score,
            "true_prob": probs.prob(label),
            "top_k": ranked,
            "success": success,
        })
        if success:
            break
        if mean_score is not None:
            p = adapt_p(p, mean_score, cfg)
        if chosen.size:
            candidates = np.flatnonzero(_neighborhood_mask(chosen, cfg.d, w, h))

    return AttackOutcome(
        technique="locsearch",
        success=success,
        adversarial=Image(data, img.bounds) if success else None,
        rounds_used=rnd,
        queries_used=session.query_count - start_queries,
        perturbed_pixels=row_major(PixelLoc.from_index(i, w) for i in perturbed),
        wall_time=time.perf_counter() - started,
        final_probs=probs,
        adversarial_valid=True if success else None,
        rounds=records,
    )


def write_transcript(path, records: Sequence[dict]) -> None:
    """Append records as JSON lines."""
    with open(Path(path), "a", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")
