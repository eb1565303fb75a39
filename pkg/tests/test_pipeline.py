import json
import numpy as np
import pandas as pd
import pytest
from pixel_attack.config import ExperimentConfig
from pixel_attack.dataset import NormStats, make_blobs
from pixel_attack.engine import EngineClassifier, linear_spec
from pixel_attack.errors import ConfigError
from pixel_attack.images import Bounds, Image, LabeledImage
from pixel_attack.oracle import ConstantClassifier
from pixel_attack.pipeline import image_seed, run_attack, run_sweep, select_images

class SaturationClassifier:
    """Class 1 unless some coordinate exceeds 50 in magnitude."""
    input_shape = (1, 3, 3)
    class_count = 2

    def predict(self, batch):
        hit = np.abs(batch).reshape(len(batch), -1).max(axis=1) > 50
        return np.where(hit[:, None], [0.1, 0.9], [0.9, 0.1])

def _blobs():
    # labels alternate 1, 2, 1, 2, ...
    return make_blobs(10, (1, 4, 4), seed=3)

def test_select_images_skips_non_good(capsys):
    classifier = ConstantClassifier([0.9, 0.1], (1, 4, 4))
    drawn = select_images(classifier, _blobs(), 3, seed=0)
    assert sum(d.good for d in drawn) == 3
    assert drawn[-1].good
    assert all(d.good == (d.li.label == 1) for d in drawn)
    assert len({d.index for d in drawn}) == len(drawn)

    drawn = select_images(classifier, _blobs(), 20, seed=0)
    assert len(drawn) == 10 and sum(d.good for d in drawn) == 5
    assert "[warn]" in capsys.readouterr().err

def test_image_seed_depends_on_index():
    assert image_seed(0, 1) == image_seed(0, 1)
    assert image_seed(0, 1) != image_seed(0, 2)
    assert image_seed(0, 1) != image_seed(1, 1)

@pytest.mark.asyncio
async def test_constant_oracle_locsearch_never_succeeds(tmp_path):
    cfg = ExperimentConfig(technique="locsearch", n_images=1, rounds=3, pairs=0, out_dir=tmp_path)
    res = await run_attack(ConstantClassifier([0.9, 0.1], (1, 4, 4)), _blobs(), cfg)
    m = res.metrics
    assert (m.n_attacked, m.n_success) == (1, 0)
    assert m.ptb is None and m.conf is None
    frame = pd.read_csv(tmp_path / "metrics.csv")
    assert list(frame.columns) == ["ErrTop-1", "ErrTop-1(Adv)", "conf", "ptb", "ptbpixels", "time", "technique", "network"]
    assert frame.loc[0, "technique"] == "LocSearchAdv"
    assert frame.loc[0, "ErrTop-1"] == frame.loc[0, "ErrTop-1(Adv)"]
    lines = (tmp_path / "transcript.jsonl").read_text().splitlines()
    assert [json.loads(line)["round"] for line in lines] == [1, 2, 3]
    manifest = (tmp_path / "manifest.txt").read_text()
    assert "images_attacked = 1" in manifest and "successes = 0" in manifest

@pytest.mark.asyncio
async def test_runs_are_reproducible(tmp_path):
    model = linear_spec((1, 4, 4), 2, seed=1)
    data = _blobs()
    cfg = ExperimentConfig(technique="locsearch", n_images=3, rounds=10, pairs=0, concurrency=3, seed=5)
    a = await run_attack(EngineClassifier(model), data, cfg, out_dir=tmp_path / "a")
    b = await run_attack(EngineClassifier(model), data, cfg, out_dir=tmp_path / "b")
    fa = pd.read_csv(tmp_path / "a" / "metrics.csv").drop(columns=["time"])
    fb = pd.read_csv(tmp_path / "b" / "metrics.csv").drop(columns=["time"])
    assert fa.equals(fb)
    assert (tmp_path / "a" / "transcript.jsonl").read_text() == (tmp_path / "b" / "transcript.jsonl").read_text()
    assert [d.index for d in a.drawn] == [d.index for d in b.drawn]

@pytest.mark.asyncio
async def test_randadv_run_writes_critical_table_and_pairs(tmp_path, capsys):
    bounds = NormStats((0.5,), (0.25,)).bounds
    data = [LabeledImage(Image(np.zeros((1, 3, 3)), bounds), 1) for _ in range(3)]
    cfg = ExperimentConfig(technique="randadv", n_images=3, p=100.0, budget=2, pairs=1, out_dir=tmp_path)
    res = await run_attack(SaturationClassifier(), data, cfg, stats=NormStats((0.5,), (0.25,)))
    assert res.metrics.n_success == 3
    assert all(rec.outcome.critical_fraction == 1.0 for rec in res.records)
    critical = pd.read_csv(tmp_path / "critical.csv")
    assert critical.loc[0, "mean_critical_fraction"] == 1.0
    assert len(list((tmp_path / "pairs").glob("*.png"))) == 2
    assert "clamped" in capsys.readouterr().err
    summaries = [json.loads(line) for line in (tmp_path / "transcript.jsonl").read_text().splitlines()]
    assert [s["first_hit_trial"] for s in summaries] == [1, 1, 1]

@pytest.mark.asyncio
async def test_sweep_writes_one_row_per_value(tmp_path):
    classifier = ConstantClassifier([0.9, 0.1], (1, 4, 4))
    cfg = ExperimentConfig(technique="randadv", n_images=2, budget=3, pairs=0, p_values=(1.0, 100.0), out_dir=tmp_path)
    results = await run_sweep(classifier, _blobs(), cfg)
    assert len(results) == 2
    assert (tmp_path / "p=1" / "metrics.csv").is_file() and (tmp_path / "p=100" / "metrics.csv").is_file()
    frame = pd.read_csv(tmp_path / "metrics.csv")
    assert list(frame["technique"]) == ["RandAdv(p=1)", "RandAdv(p=100)"]
    assert list(pd.read_csv(tmp_path / "critical.csv")["p"]) == [1.0, 100.0]

@pytest.mark.asyncio
async def test_fgsm_without_model_is_a_config_error(tmp_path):
    cfg = ExperimentConfig(technique="fgsm", n_images=1, pairs=0, out_dir=tmp_path)
    with pytest.raises(ConfigError):
        await run_attack(ConstantClassifier([0.9, 0.1], (1, 4, 4)), _blobs(), cfg)
    with pytest.raises(ConfigError):
        await run_sweep(ConstantClassifier([0.9, 0.1], (1, 4, 4)), _blobs(), cfg)
