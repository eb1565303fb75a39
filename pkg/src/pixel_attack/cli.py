"""
Command-line entrypoint for the pixel attack toolkit.

- Parses CLI args and the optional key = value config file
- train: fit normalization stats, train the toy conv model, save model + stats
- attack: select N good test images, run RandAdv / LocSearchAdv / FGSM
  concurrently, write metrics.csv, transcript.jsonl, PNG pairs and a manifest
- sweep: the same over p values (RandAdv) or k values (LocSearchAdv)
- report: print metrics CSVs as one aligned table

Configuration and I/O failures exit with status 2; attack failures are data.
"""
from __future__ import annotations
import asyncio, sys
from typing import Optional, Sequence

import pandas as pd

import tinynet

from .analysis import format_table, read_metrics_csv
from .config import ExperimentConfig, TrainConfig, parse_args
from .engine import EngineClassifier
from .errors import PixelAttackError
from .pipeline import load_experiment, run_attack, run_sweep, run_train, technique_label


def _banner(cfg: ExperimentConfig, command: str) -> None:
    if cfg.technique == "randadv":
        detail = f"p={cfg.p:g} U={cfg.budget or 'auto'} set_size={cfg.set_size}"
    elif cfg.technique == "locsearch":
        detail = f"p0={cfg.p0:g} r={cfg.r:g} t={cfg.t} d={cfg.d} R={cfg.rounds} k={cfg.k}"
    else:
        detail = f"eps={cfg.eps:g}"
    print(f"""
        ====== pixel-attack {command} ======
        Technique      : {technique_label(cfg)}
        Parameters     : {detail}
        Images (N)     : {cfg.n_images}
        Seed           : {cfg.seed}
        Concurrency    : {cfg.concurrency}
        Model          : {cfg.model}
        Output         : {cfg.out_dir}
        ===============================
    """)


async def run(cfg: ExperimentConfig, command: str) -> None:
    model, stats, data = load_experiment(cfg)
    classifier = EngineClassifier(model)
    if command == "sweep":
        results = await run_sweep(classifier, data, cfg, model=model, stats=stats)
        frame = pd.DataFrame([r.row for r in results])
    else:
        result = await run_attack(classifier, data, cfg, model=model, stats=stats)
        frame = pd.DataFrame([result.row])
    print(format_table(frame))
    print(f"Results written to {cfg.out_dir}")


def train(cfg: TrainConfig) -> None:
    print(f"""
        ====== pixel-attack train ======
        Dataset        : {cfg.dataset} ({cfg.train_count} train / {cfg.test_count} test)
        Model          : conv {list(cfg.channels)}{' + batch norm' if cfg.batch_norm else ''}
        Epochs         : {cfg.epochs} (lr={cfg.learning_rate}, batch={cfg.batch_size})
        Seed           : {cfg.seed}
        Output         : {cfg.model}
        ===============================
    """)
    result = run_train(cfg)
    test_acc = "n/a" if result.test_accuracy is None else f"{result.test_accuracy:.2%}"
    print(f"Train accuracy: {result.train_accuracy:.2%}  Test accuracy: {test_acc}")
    print(f"Saved {cfg.model} and {cfg.stats}")


def report(paths: Sequence[str]) -> None:
    frame = pd.concat([read_metrics_csv(p) for p in paths], ignore_index=True)
    print(format_table(frame))


def _kind(e: BaseException) -> str:
    name = type(e).__name__
    return name[:-5] if name.endswith("Error") and len(name) > 5 else name


def main(argv: Optional[Sequence[str]] = None) -> None:
    try:
        args = parse_args(argv)
        if args.command == "report":
            report(args.metrics)
        elif args.command == "train":
            train(TrainConfig.from_args(args))
        else:
            cfg = ExperimentConfig.from_args(args)
            _banner(cfg, args.command)
            asyncio.run(run(cfg, args.command))
    except (PixelAttackError, tinynet.EngineError, OSError) as e:
        print(f"{_kind(e)} error: {e}", file=sys.stderr)
        sys.exit(2)
    except KeyboardInterrupt:
        print("Aborted.", file=sys.stderr)
        sys.exit(130)
