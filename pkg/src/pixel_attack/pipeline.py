from __future__ import annotations
import sys, asyncio, dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

import tinynet

from .analysis import (
    AttackRecord, ExperimentMetrics, critical_summary, fgsm_attack, metrics_row,
    overlap_stat, saliency_map, summarize, write_metrics_csv, DEFAULT_TOP_FRACTION,
)
from .attacks import AttackOutcome, loc_search_adv, rand_adv, trial_summary, write_transcript
from .config import ExperimentConfig, TrainConfig
from .dataset import (
    NormStats, RawDataset, export_png, fit_stats, load_norm_stats, normalize,
    read_cifar10_file, read_idx_files, save_norm_stats, subset,
)
from .engine import TrainHyper, TrainResult, analytic_gradient, toy_conv_spec, train_toy
from .errors import ConfigError
from .images import LabeledImage
from .models import FgsmRecord, OverlapRow
from .oracle import Classifier, OracleSession, ProbVector, is_k_misclassified
from .utils import chunked, sha256_file

SELECT_CHUNK = 64
PROGRESS_EVERY = 10


@dataclass
class DrawnImage:
    index: int          # position in the test set
    li: LabeledImage
    base: ProbVector
    good: bool


@dataclass
class RunResult:
    metrics: ExperimentMetrics
    records: List[AttackRecord]
    drawn: List[DrawnImage]
    out_dir: Path
    row: dict


def image_seed(seed: int, index: int) -> int:
    """Per-image seed derived from the run seed and the test-set index."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


# ------------------ Loading ------------------

def load_raw(dataset: str, images: Path, labels: Optional[Path], split: str) -> RawDataset:
    if dataset == "cifar10":
        return read_cifar10_file(images, split=split)
    if labels is None:
        raise ConfigError(f"{dataset} needs a label file for the {split} split")
    return read_idx_files(images, labels, split=split)


def load_experiment(cfg: ExperimentConfig) -> Tuple[tinynet.ModelSpec, NormStats, List[LabeledImage]]:
    model = tinynet.load_model(cfg.model)
    stats = load_norm_stats(cfg.stats)
    data = normalize(load_raw(cfg.dataset, cfg.test_images, cfg.test_labels, "test"), stats)
    if data and data[0].image.shape != model.input_shape:
        raise ConfigError(f"test images {data[0].image.shape} do not fit model input {model.input_shape}")
    return model, stats, data


# ------------------ Selection ------------------

def select_images(classifier: Classifier, data: Sequence[LabeledImage], n: int, seed: int) -> List[DrawnImage]:
    """
    Draw test images in seeded random order until n good ones are found.
    Non-good draws are kept (they count toward the error columns) but not attacked.
    """
    order = np.random.default_rng(seed).permutation(len(data))
    session = OracleSession(classifier)
    drawn: List[DrawnImage] = []
    good = 0
    for chunk in chunked(order, SELECT_CHUNK):
        answers = session.query_batch([data[i].image for i in chunk])
        for i, probs in zip(chunk, answers):
            li = data[int(i)]
            ok = not is_k_misclassified(probs, li.label, 1)
            drawn.append(DrawnImage(int(i), li, probs, ok))
            good += ok
            if good == n:
                return drawn
    print(f"[warn] test set has only {good} good image(s); wanted {n}.", file=sys.stderr)
    return drawn


# ------------------ Attacks ------------------

def attack_one(classifier: Classifier, item: DrawnImage, cfg: ExperimentConfig, model=None) -> AttackOutcome:
    """Run the configured attack on one good image with its own oracle session."""
    seed = image_seed(cfg.seed, item.index)
    if cfg.technique == "randadv":
        img = item.li.image
        return rand_adv(OracleSession(classifier), item.li, cfg.rand_adv_config(img.width, img.height, seed))
    if cfg.technique == "locsearch":
        return loc_search_adv(OracleSession(classifier), item.li, cfg.loc_search_config(seed), image_index=item.index)
    if model is None:
        raise ConfigError("fgsm needs the engine model (analytic gradients)")
    return fgsm_attack(model, item.li, cfg.eps)


async def attack_concurrent(
    classifier: Classifier,
    items: List[DrawnImage],
    cfg: ExperimentConfig,
    model=None,
) -> Dict[int, AttackOutcome]:
    """
    Attack all good images concurrently, bounded by semaphore.
    Logs progress every 10 images; results are keyed by test-set index.
    """
    sem = asyncio.Semaphore(max(1, cfg.concurrency))

    async def worker(item: DrawnImage) -> Tuple[int, AttackOutcome]:
        async with sem:
            return item.index, await asyncio.to_thread(attack_one, classifier, item, cfg, model)

    tasks = [asyncio.create_task(worker(item)) for item in items]
    results: Dict[int, AttackOutcome] = {}
    done = 0
    try:
        for fut in asyncio.as_completed(tasks):
            index, outcome = await fut
            results[index] = outcome
            done += 1
            if done % PROGRESS_EVERY == 0 or done == len(items):
                print(f"Attacked {done}/{len(items)} images…")
    except BaseException:
        for task in tasks:
            task.cancel()
        raise
    return results


# ------------------ Writers ------------------

def transcript_records(records: Sequence[AttackRecord], drawn: Sequence[DrawnImage], cfg: ExperimentConfig) -> List[dict]:
    out: List[dict] = []
    for item, rec in zip(drawn, records):
        o = rec.outcome
        if o is None:
            continue
        if o.technique == "locsearch":
            out.extend(o.rounds)
        elif o.technique == "randadv":
            out.append(trial_summary(o, item.index))
        else:
            fg: FgsmRecord = {"image": item.index, "eps": cfg.eps, "label_success": list(o.label_success or []), "success": o.success}
            out.append(fg)
    return out


def write_pairs(records: Sequence[AttackRecord], drawn: Sequence[DrawnImage], stats: Optional[NormStats], out_dir: Path, limit: int) -> int:
    """Original/adversarial PNGs for the first `limit` successes, in drawn order."""
    if stats is None or limit == 0:
        return 0
    pairs = out_dir / "pairs"
    written = 0
    for item, rec in zip(drawn, records):
        o = rec.outcome
        if o is None or not o.success or o.adversarial is None:
            continue
        if written == 0:
            pairs.mkdir(parents=True, exist_ok=True)
        export_png(item.li.image, stats, pairs / f"{item.index:05d}_original.png")
        res = export_png(o.adversarial, stats, pairs / f"{item.index:05d}_adversarial.png")
        if res.clamped:
            print(f"[warn] image {item.index}: {res.clamped} coordinate(s) clamped on export.", file=sys.stderr)
        written += 1
        if written == limit:
            break
    return written


def saliency_rows(model, records: Sequence[AttackRecord], drawn: Sequence[DrawnImage]) -> List[OverlapRow]:
    rows: List[OverlapRow] = []
    for item, rec in zip(drawn, records):
        o = rec.outcome
        if o is None or not o.success or not o.perturbed_pixels:
            continue
        smap = saliency_map(analytic_gradient(model, item.li.image, item.li.label))
        overlap, z = overlap_stat(o.perturbed_pixels, smap, DEFAULT_TOP_FRACTION)
        rows.append({"image": item.index, "perturbed": len(o.perturbed_pixels), "overlap": overlap, "z": z})
    return rows


def write_saliency_csv(rows: Sequence[OverlapRow], path: Path) -> None:
    frame = pd.DataFrame(list(rows), columns=["image", "perturbed", "overlap", "z"])
    if len(frame):
        mean = {"image": "mean", **frame[["perturbed", "overlap", "z"]].mean().to_dict()}
        frame = pd.concat([frame, pd.DataFrame([mean])], ignore_index=True)
    frame.to_csv(path, index=False, float_format="%.6f")


def write_critical_csv(rows: Sequence[dict], path: Path) -> None:
    pd.DataFrame(list(rows), columns=["p", "images", "mean_critical_fraction", "std_error", "success_fraction"]).to_csv(
        path, index=False, float_format="%.6f"
    )


def write_manifest(path: Path, cfg: ExperimentConfig, stats: Optional[NormStats], drawn: Sequence[DrawnImage], metrics: ExperimentMetrics) -> None:
    lines = ["# pixel-attack run manifest"]
    lines += [f"{key} = {value}" for key, value in sorted(cfg.settings().items())]
    if cfg.model is not None and Path(cfg.model).is_file():
        lines.append(f"model_sha256 = {sha256_file(cfg.model)}")
    if stats is not None:
        lines.append("norm_mean = " + ", ".join(repr(v) for v in stats.means))
        lines.append("norm_std = " + ", ".join(repr(v) for v in stats.stds))
        lines.append(f"bounds = [{stats.bounds.lb!r}, {stats.bounds.ub!r}]")
    lines.append("image_seeds = " + ", ".join(f"{d.index}:{image_seed(cfg.seed, d.index)}" for d in drawn if d.good))
    lines.append(f"images_drawn = {len(drawn)}")
    lines.append(f"images_attacked = {metrics.n_attacked}")
    lines.append(f"successes = {metrics.n_success}")
    path.write_text("\n".join(lines) + "\n")


# ------------------ Runs ------------------

def technique_label(cfg: ExperimentConfig) -> str:
    if cfg.technique == "randadv":
        return f"RandAdv(p={cfg.p:g})" if cfg.set_size == 1 else f"RandAdv(p={cfg.p:g},set={cfg.set_size})"
    if cfg.technique == "locsearch":
        return "LocSearchAdv" if cfg.k == 1 else f"LocSearchAdv(k={cfg.k})"
    return f"FGSM(eps={cfg.eps:g})"


async def run_attack(
    classifier: Classifier,
    data: Sequence[LabeledImage],
    cfg: ExperimentConfig,
    *,
    model=None,
    stats: Optional[NormStats] = None,
    out_dir: Optional[Path] = None,
) -> RunResult:
    """
    select -> attack concurrently -> summarize -> write:
    metrics.csv, transcript.jsonl, pairs/, critical.csv (randadv), saliency.csv (optional), manifest.txt
    """
    out_dir = Path(out_dir or cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    drawn = select_images(classifier, data, cfg.n_images, cfg.seed)
    good = [d for d in drawn if d.good]
    print(f"Selected {len(good)} good image(s) out of {len(drawn)} drawn.")

    outcomes = await attack_concurrent(classifier, good, cfg, model)
    records = [AttackRecord(d.li, outcomes.get(d.index) if d.good else None, d.base) for d in drawn]
    k = cfg.k if cfg.technique == "locsearch" else 1
    metrics = summarize(records, k)
    row = metrics_row(metrics, technique=technique_label(cfg), network=cfg.network)

    write_metrics_csv([row], out_dir / "metrics.csv")
    transcript = out_dir / "transcript.jsonl"
    transcript.write_text("")
    write_transcript(transcript, transcript_records(records, drawn, cfg))
    write_pairs(records, drawn, stats, out_dir, cfg.pairs)
    if cfg.technique == "randadv":
        write_critical_csv([critical_summary(cfg.p, [outcomes[d.index] for d in good])], out_dir / "critical.csv")
    if cfg.saliency and cfg.technique == "locsearch":
        if model is None:
            print("[warn] saliency overlap needs the engine model; skipped.", file=sys.stderr)
        else:
            write_saliency_csv(saliency_rows(model, records, drawn), out_dir / "saliency.csv")
    write_manifest(out_dir / "manifest.txt", cfg, stats, drawn, metrics)
    return RunResult(metrics, records, drawn, out_dir, row)


async def run_sweep(
    classifier: Classifier,
    data: Sequence[LabeledImage],
    cfg: ExperimentConfig,
    *,
    model=None,
    stats: Optional[NormStats] = None,
) -> List[RunResult]:
    """One run per p value (randadv) or k value (locsearch), each in its own sub-directory."""
    if cfg.technique == "randadv":
        settings = [(f"p={p:g}", dataclasses.replace(cfg, p=p)) for p in cfg.p_values]
    elif cfg.technique == "locsearch":
        settings = [(f"k={k}", dataclasses.replace(cfg, k=k)) for k in cfg.k_values]
    else:
        raise ConfigError("sweep supports randadv (p values) and locsearch (k values)")
    results: List[RunResult] = []
    for name, sub_cfg in settings:
        print(f"--- sweep {name} ---")
        results.append(await run_attack(classifier, data, sub_cfg, model=model, stats=stats, out_dir=Path(cfg.out_dir) / name))
    write_metrics_csv([r.row for r in results], Path(cfg.out_dir) / "metrics.csv")
    if cfg.technique == "randadv":
        rows = [critical_summary(r_cfg.p, [rec.outcome for rec in r.records if rec.outcome is not None])
                for (_, r_cfg), r in zip(settings, results)]
        write_critical_csv(rows, Path(cfg.out_dir) / "critical.csv")
    return results


def run_train(cfg: TrainConfig) -> TrainResult:
    raw_train = subset(load_raw(cfg.dataset, cfg.train_images, cfg.train_labels, "train"), cfg.train_count)
    raw_test = subset(load_raw(cfg.dataset, cfg.test_images, cfg.test_labels, "test"), cfg.test_count)
    stats = fit_stats(raw_train)
    train, test = normalize(raw_train, stats), normalize(raw_test, stats)
    shape = train[0].image.shape
    spec = toy_conv_spec(shape, raw_train.class_count, channels=cfg.channels, batch_norm=cfg.batch_norm, seed=cfg.seed)
    hyper = TrainHyper(cfg.learning_rate, cfg.epochs, cfg.batch_size, cfg.seed, cfg.momentum)
    print(f"Training on {len(train)} images, testing on {len(test)}…")
    result = train_toy(spec, train, hyper, test=test, verbose=True)

    cfg.model.parent.mkdir(parents=True, exist_ok=True)
    tinynet.save_model(result.model, cfg.model)
    cfg.model.with_suffix(".txt").write_text(tinynet.describe(result.model) + "\n")
    save_norm_stats(stats, cfg.stats)
    return result
