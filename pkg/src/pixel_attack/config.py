"""
Command-line and config-file settings.

Precedence: built-in / environment defaults < `--config` file < explicit flags.
The config file is flat `key = value` text; keys are flag names (`p-low` or
`p_low`), `#` starts a comment, booleans accept true/false/yes/no/1/0.
"""
from __future__ import annotations
import argparse, os, sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .attacks import LocSearchConfig, RandAdvConfig
from .errors import ConfigError, PixelAttackError
from .utils import parse_int_list

TECHNIQUES = ("randadv", "locsearch", "fgsm")
DATASETS = ("mnist", "cifar10")
BOOLEAN_FLAGS = {"batch-norm", "saliency", "sort-descending"}
TRUE_WORDS = {"true", "yes", "1", "on"}
FALSE_WORDS = {"false", "no", "0", "off"}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="key = value file; explicit flags win")
    p.add_argument("--seed", type=int, default=int(os.getenv("PIXEL_ATTACK_SEED", "0")))
    p.add_argument("--out", default=os.getenv("PIXEL_ATTACK_OUT", "runs"))
    p.add_argument("--dataset", choices=DATASETS, default="mnist")


def _add_attack_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--test-images", required=True, help="IDX image file (or CIFAR-10 batch)")
    p.add_argument("--test-labels", default=None, help="IDX label file (MNIST only)")
    p.add_argument("--model", required=True)
    p.add_argument("--stats", default=None, help="normalization stats (default: <model>.stats)")
    p.add_argument("--network", default=None, help="name for the network column (default: model file stem)")
    p.add_argument("--technique", choices=TECHNIQUES, default="locsearch")
    p.add_argument("--images", type=int, default=100, help="number N of good images to attack")
    p.add_argument("--concurrency", type=int, default=int(os.getenv("CONCURRENCY", "4")))
    p.add_argument("--pairs", type=int, default=10, help="PNG pairs for the first M successes")
    p.add_argument("--k", type=int, default=1)
    # RandAdv
    p.add_argument("--p", type=float, default=100.0)
    p.add_argument("--budget", type=int, default=None, help="trials U (default ceil(w*h/2), 5000 for pixel sets)")
    p.add_argument("--set-size", type=int, default=1)
    # LocSearchAdv
    p.add_argument("--p0", type=float, default=10.0)
    p.add_argument("--r", type=float, default=1.5)
    p.add_argument("--t", type=int, default=5)
    p.add_argument("--d", type=int, default=5)
    p.add_argument("--rounds", type=int, default=150)
    p.add_argument("--init-fraction", type=float, default=0.10)
    p.add_argument("--exclusion-window", type=int, default=30)
    p.add_argument("--p-low", type=float, default=0.3)
    p.add_argument("--p-high", type=float, default=0.9)
    p.add_argument("--p-step", type=float, default=2.0)
    p.add_argument("--sort-descending", action="store_true")
    # FGSM / analysis
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--saliency", action="store_true", help="saliency overlap for LocSearchAdv successes")


def build_parser() -> argparse.ArgumentParser:
    # Parse command-line args with env defaults
    p = argparse.ArgumentParser(prog="pixel-attack", description="Black-box pixel attacks on image classifiers")
    sub = p.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train the toy conv model")
    _add_common(train)
    train.add_argument("--train-images", required=True)
    train.add_argument("--train-labels", default=None)
    train.add_argument("--test-images", required=True)
    train.add_argument("--test-labels", default=None)
    train.add_argument("--model", default=None, help="output model path (default: <out>/model.tnet)")
    train.add_argument("--train-count", type=int, default=10000)
    train.add_argument("--test-count", type=int, default=2000)
    train.add_argument("--epochs", type=int, default=5)
    train.add_argument("--learning-rate", type=float, default=0.05)
    train.add_argument("--batch-size", type=int, default=32)
    train.add_argument("--momentum", type=float, default=0.9)
    train.add_argument("--channels", default="8,16", help="conv channels per block")
    train.add_argument("--batch-norm", action="store_true")

    attack = sub.add_parser("attack", help="attack N good test images")
    _add_common(attack)
    _add_attack_args(attack)

    sweep = sub.add_parser("sweep", help="repeat an attack over p values (randadv) or k values (locsearch)")
    _add_common(sweep)
    _add_attack_args(sweep)
    sweep.add_argument("--p-values", default="1,5,10,100")
    sweep.add_argument("--k-values", default="1,2,3,4")

    report = sub.add_parser("report", help="print metrics CSVs as an aligned table")
    report.add_argument("metrics", nargs="+")

    p.commands = {"train": train, "attack": attack, "sweep": sweep, "report": report}
    return p


def read_config_file(path) -> Dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    values: Dict[str, str] = {}
    for n, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{n}: expected 'key = value', got {line!r}")
        values[key.strip().replace("_", "-")] = value.strip()
    return values


def config_tokens(values: Dict[str, str], parser: argparse.ArgumentParser, source: str = "config") -> List[str]:
    """Turn config-file entries into flag tokens, rejecting keys the command does not know."""
    tokens: List[str] = []
    for key, value in values.items():
        if key in BOOLEAN_FLAGS:
            if value.lower() in TRUE_WORDS:
                tokens.append(f"--{key}")
            elif value.lower() not in FALSE_WORDS:
                raise ConfigError(f"{source}: {key} expects a boolean, got {value!r}")
            continue
        tokens += [f"--{key}", value]
    known = {opt for action in parser._actions for opt in action.option_strings}
    unknown = [t for t in tokens if t.startswith("--") and t not in known]
    if unknown:
        raise ConfigError(f"{source}: unknown key(s) {', '.join(u[2:] for u in unknown)}")
    return tokens


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # --config first, so required flags may come from the file
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config and known.command in parser.commands:
        pos = argv.index(known.command) + 1
        tokens = config_tokens(read_config_file(known.config), parser.commands[known.command], known.config)
        argv = argv[:pos] + tokens + argv[pos:]
    return parser.parse_args(argv)


# ------------------ Validated configs ------------------

def _existing(path: Optional[str], what: str) -> Optional[Path]:
    if path is None:
        return None
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} {p} does not exist")
    return p


@dataclass(frozen=True)
class TrainConfig:
    train_images: Path
    train_labels: Optional[Path]
    test_images: Path
    test_labels: Optional[Path]
    model: Path
    dataset: str = "mnist"
    train_count: int = 10000
    test_count: int = 2000
    epochs: int = 5
    learning_rate: float = 0.05
    batch_size: int = 32
    momentum: float = 0.9
    channels: Tuple[int, ...] = (8, 16)
    batch_norm: bool = False
    seed: int = 0

    @property
    def stats(self) -> Path:
        return self.model.with_suffix(".stats")

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "TrainConfig":
        if ns.dataset == "mnist" and (ns.train_labels is None or ns.test_labels is None):
            raise ConfigError("MNIST training needs --train-labels and --test-labels")
        if ns.epochs < 0 or ns.batch_size < 1 or ns.train_count < 1 or ns.test_count < 1:
            raise ConfigError("epochs must be >= 0; batch-size, train-count and test-count >= 1")
        try:
            channels = tuple(parse_int_list(ns.channels))
        except ValueError as e:
            raise ConfigError(f"--channels: {e}") from e
        if not channels or min(channels) < 1:
            raise ConfigError(f"--channels needs positive integers, got {ns.channels!r}")
        model = Path(ns.model) if ns.model else Path(ns.out) / "model.tnet"
        return cls(
            train_images=_existing(ns.train_images, "training images"),
            train_labels=_existing(ns.train_labels, "training labels"),
            test_images=_existing(ns.test_images, "test images"),
            test_labels=_existing(ns.test_labels, "test labels"),
            model=model,
            dataset=ns.dataset,
            train_count=ns.train_count,
            test_count=ns.test_count,
            epochs=ns.epochs,
            learning_rate=ns.learning_rate,
            batch_size=ns.batch_size,
            momentum=ns.momentum,
            channels=channels,
            batch_norm=ns.batch_norm,
            seed=ns.seed,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    technique: str = "locsearch"
    n_images: int = 100
    seed: int = 0
    out_dir: Path = Path("runs")
    dataset: str = "mnist"
    test_images: Optional[Path] = None
    test_labels: Optional[Path] = None
    model: Optional[Path] = None
    stats: Optional[Path] = None
    network: str = "toy"
    concurrency: int = 4
    pairs: int = 10
    k: int = 1
    p: float = 100.0
    budget: Optional[int] = None
    set_size: int = 1
    p0: float = 10.0
    r: float = 1.5
    t: int = 5
    d: int = 5
    rounds: int = 150
    init_fraction: float = 0.10
    exclusion_window: int = 30
    p_low: float = 0.3
    p_high: float = 0.9
    p_step: float = 2.0
    sort_descending: bool = False
    eps: float = 0.2
    saliency: bool = False
    p_values: Tuple[float, ...] = (1.0, 5.0, 10.0, 100.0)
    k_values: Tuple[int, ...] = (1, 2, 3, 4)

    def __post_init__(self):
        if self.technique not in TECHNIQUES:
            raise ConfigError(f"technique must be one of {TECHNIQUES}, got {self.technique!r}")
        if self.n_images < 1:
            raise ConfigError(f"N={self.n_images} must be >= 1")
        if self.concurrency < 1 or self.pairs < 0:
            raise ConfigError("concurrency must be >= 1 and pairs >= 0")
        if self.eps < 0:
            raise ConfigError(f"eps={self.eps} must be >= 0")
        try:
            self.loc_search_config(self.seed)
            if self.budget is not None:
                RandAdvConfig(p=self.p, budget=self.budget, set_size=self.set_size)
            elif self.set_size < 1:
                raise ConfigError(f"set_size={self.set_size} must be >= 1")
        except PixelAttackError as e:
            raise ConfigError(str(e)) from e

    def loc_search_config(self, seed: int) -> LocSearchConfig:
        return LocSearchConfig(
            p0=self.p0, r=self.r, t=self.t, d=self.d, k=self.k, rounds=self.rounds,
            init_fraction=self.init_fraction, exclusion_window=self.exclusion_window,
            p_low=self.p_low, p_high=self.p_high, p_step=self.p_step,
            seed=seed, sort_descending=self.sort_descending,
        )

    def rand_adv_config(self, width: int, height: int, seed: int) -> RandAdvConfig:
        budget = self.budget if self.budget is not None else RandAdvConfig.default_budget(width, height, self.set_size)
        return RandAdvConfig(p=self.p, budget=budget, set_size=self.set_size, seed=seed)

    def settings(self) -> Dict[str, object]:
        """Flat view for the run manifest."""
        return {k: (str(v) if isinstance(v, Path) else v) for k, v in asdict(self).items()}

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "ExperimentConfig":
        if ns.dataset == "mnist" and ns.test_labels is None:
            raise ConfigError("MNIST needs --test-labels")
        model = _existing(ns.model, "model")
        stats = _existing(ns.stats, "stats") if ns.stats else _existing(str(model.with_suffix(".stats")), "stats")
        extra = {}
        if ns.command == "sweep":
            try:
                extra["p_values"] = tuple(float(v) for v in ns.p_values.split(",") if v.strip())
                extra["k_values"] = tuple(parse_int_list(ns.k_values))
            except ValueError as e:
                raise ConfigError(f"sweep values: {e}") from e
            if not extra["p_values"] or not extra["k_values"]:
                raise ConfigError("sweep needs at least one p value and one k value")
        return cls(
            technique=ns.technique,
            n_images=ns.images,
            seed=ns.seed,
            out_dir=Path(ns.out),
            dataset=ns.dataset,
            test_images=_existing(ns.test_images, "test images"),
            test_labels=_existing(ns.test_labels, "test labels"),
            model=model,
            stats=stats,
            network=ns.network or model.stem,
            concurrency=ns.concurrency,
            pairs=ns.pairs,
            k=ns.k,
            p=ns.p,
            budget=ns.budget,
            set_size=ns.set_size,
            p0=ns.p0,
            r=ns.r,
            t=ns.t,
            d=ns.d,
            rounds=ns.rounds,
            init_fraction=ns.init_fraction,
            exclusion_window=ns.exclusion_window,
            p_low=ns.p_low,
            p_high=ns.p_high,
            p_step=ns.p_step,
            sort_descending=ns.sort_descending,
            eps=ns.eps,
            saliency=ns.saliency,
            **extra,
        )
