#!/usr/bin/env python3
"""
Desk-scale attack checks on MNIST (long-running; not part of the unit suite)

Checks
------
- corridor: toy conv model trained on a 10k/2k subset reaches >= 95% test
  accuracy; LocSearchAdv with defaults over 100 good test images succeeds on
  >= 70% of them, mean ptbpixels <= 5%, every adversarial image is valid
- randadv: mean critical fraction over 50 good images for p in {1, 5, 10, 100}
  never drops by more than one pooled standard error as p grows
- ksweep: LocSearchAdv over 50 images for k = 1..4; success rate
  non-increasing and mean ptbpixels non-decreasing

Execute:
  python scripts/desk_acceptance.py --mnist-dir data/mnist [--checks corridor,randadv,ksweep]

Config via env:
  MNIST_DIR (default data/mnist), CONCURRENCY (default 4), PIXEL_ATTACK_SEED (default 0)

Exit status is 0 when every selected check passes, 1 otherwise.
"""
from __future__ import annotations
import argparse
import asyncio
import dataclasses
import math
import os
import sys
from pathlib import Path
from typing import List

from pixel_attack.config import ExperimentConfig
from pixel_attack.dataset import normalize, read_idx_files, subset, fit_stats
from pixel_attack.engine import EngineClassifier, TrainHyper, toy_conv_spec, train_toy
from pixel_attack.images import validate
from pixel_attack.pipeline import run_attack

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}

# ------------------ CLI ------------------

def parse_args():
    # Parse command-line args with env defaults
    p = argparse.ArgumentParser(description="Desk-scale pixel attack acceptance checks")
    p.add_argument("--mnist-dir", default=os.getenv("MNIST_DIR", "data/mnist"))
    p.add_argument("--out", default="runs/desk")
    p.add_argument("--checks", default="corridor,randadv,ksweep")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--concurrency", type=int, default=int(os.getenv("CONCURRENCY", "4")))
    p.add_argument("--seed", type=int, default=int(os.getenv("PIXEL_ATTACK_SEED", "0")))
    return p.parse_args()


def _find(directory: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz"):
        if (directory / name).is_file():
            return directory / name
    raise SystemExit(f"missing {stem}[.gz] in {directory}")

# ------------------ Checks ------------------

def _report(name: str, ok: bool, detail: str) -> bool:
    print(f"[{'pass' if ok else 'FAIL'}] {name}: {detail}")
    return ok


async def corridor(classifier, data, base: ExperimentConfig) -> bool:
    res = await run_attack(classifier, data, dataclasses.replace(base, technique="locsearch", n_images=100),
                           out_dir=base.out_dir / "corridor")
    m = res.metrics
    valid = all(validate(r.outcome.adversarial) for r in res.records if r.outcome is not None and r.outcome.success)
    rate = m.success_rate or 0.0
    ok = rate >= 0.70 and m.ptbpixels is not None and m.ptbpixels <= 5.0 and valid
    return _report("corridor", ok, f"success={rate:.2%} ptbpixels={m.ptbpixels} all_valid={valid}")


async def randadv_trend(classifier, data, base: ExperimentConfig) -> bool:
    means: List[float] = []
    errors: List[float] = []
    for p in (1.0, 5.0, 10.0, 100.0):
        cfg = dataclasses.replace(base, technique="randadv", n_images=50, p=p)
        res = await run_attack(classifier, data, cfg, out_dir=base.out_dir / f"randadv_p={p:g}")
        fractions = [r.outcome.critical_fraction for r in res.records if r.outcome is not None]
        mean = sum(fractions) / len(fractions)
        var = sum((f - mean) ** 2 for f in fractions) / max(1, len(fractions) - 1)
        means.append(mean)
        errors.append(math.sqrt(var / len(fractions)))
        print(f"  p={p:g}: mean critical fraction {mean:.4f} (se {errors[-1]:.4f})")
    ok = all(
        means[i + 1] >= means[i] - math.sqrt(errors[i] ** 2 + errors[i + 1] ** 2)
        for i in range(len(means) - 1)
    )
    return _report("randadv", ok, "means " + ", ".join(f"{m:.4f}" for m in means))


async def k_sweep(classifier, data, base: ExperimentConfig) -> bool:
    rates: List[float] = []
    pixels: List[float] = []
    for k in (1, 2, 3, 4):
        cfg = dataclasses.replace(base, technique="locsearch", n_images=50, k=k)
        res = await run_attack(classifier, data, cfg, out_dir=base.out_dir / f"locsearch_k={k}")
        rates.append(res.metrics.success_rate or 0.0)
        pixels.append(res.metrics.ptbpixels or 0.0)
        print(f"  k={k}: success {rates[-1]:.2%}, ptbpixels {pixels[-1]:.2f}")
    ok = all(a >= b for a, b in zip(rates, rates[1:])) and all(a <= b for a, b in zip(pixels, pixels[1:]))
    return _report("ksweep", ok, f"rates {rates} ptbpixels {pixels}")

# ------------------ Main ------------------

async def main_async(args) -> bool:
    directory = Path(args.mnist_dir)
    paths = {key: _find(directory, stem) for key, stem in MNIST_FILES.items()}
    raw_train = subset(read_idx_files(paths["train_images"], paths["train_labels"], split="train"), 10000)
    raw_test = subset(read_idx_files(paths["test_images"], paths["test_labels"]), 2000)
    stats = fit_stats(raw_train)
    train, test = normalize(raw_train, stats), normalize(raw_test, stats)

    spec = toy_conv_spec(train[0].image.shape, 10, seed=args.seed)
    result = train_toy(spec, train, TrainHyper(epochs=args.epochs, seed=args.seed), test=test, verbose=True)
    if not _report("training", (result.test_accuracy or 0.0) >= 0.95, f"test accuracy {result.test_accuracy:.2%}"):
        return False

    base = ExperimentConfig(seed=args.seed, out_dir=Path(args.out), concurrency=args.concurrency, network="toy-conv", pairs=0)
    classifier = EngineClassifier(result.model)
    checks = {"corridor": corridor, "randadv": randadv_trend, "ksweep": k_sweep}
    ok = True
    for name in (c.strip() for c in args.checks.split(",") if c.strip()):
        if name not in checks:
            print(f"[warn] unknown check {name!r}", file=sys.stderr)
            continue
        ok &= await checks[name](classifier, test, base)
    return ok


def main():
    args = parse_args()
    try:
        ok = asyncio.run(main_async(args))
    except KeyboardInterrupt:
        print("Aborted.", file=sys.stderr)
        sys.exit(130)
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
