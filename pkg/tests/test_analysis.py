import math
import numpy as np
import pandas as pd
import pytest
from toy_models import smooth_conv_model
from tinynet import Dense, ModelSpec, Softmax
from pixel_attack import engine
from pixel_attack.analysis import (
    DEFAULT_FD_STEP, AttackRecord, critical_summary, fd_gradient, fgsm, fgsm_attack, fgsm_outcome, format_table,
    metrics_columns, metrics_row, overlap_stat, read_metrics_csv, relative_l2_error, saliency_map,
    summarize, top_saliency, transfer_rate, write_metrics_csv, z_statistic,
)
from pixel_attack.attacks import AttackOutcome
from pixel_attack.engine import EngineClassifier, linear_spec
from pixel_attack.errors import ParameterError, PreconditionError, ShapeError
from pixel_attack.images import Bounds, Image, LabeledImage, PixelLoc, validate
from pixel_attack.oracle import ConstantClassifier, OracleSession, ProbVector

B = Bounds(-1.0, 1.0)

def _outcome(success, adversarial=None, probs=None, wall_time=1.0, fraction=None):
    return AttackOutcome(
        technique="locsearch", success=success, adversarial=adversarial, rounds_used=1, queries_used=1,
        perturbed_pixels=[], wall_time=wall_time,
        final_probs=ProbVector(probs) if probs is not None else None, critical_fraction=fraction,
    )

def _sum_model(features=4):
    """2 classes on a (1, 2, 2) image: z1 = sum of pixels, z2 = 0."""
    w = np.zeros((features, 2))
    w[:, 0] = 1.0
    return ModelSpec([Dense(w, np.zeros(2)), Softmax()], (1, 2, 2), 2)

# ------------------ summarize ------------------

def test_summarize_mixed_results():
    img = Image(np.zeros((1, 10, 10)), B)
    adv_data = np.zeros((1, 10, 10))
    adv_data[0, :5, :5] = 1.0  # 25 pixels, |delta| = 1
    hit = AttackRecord(LabeledImage(img, 1), _outcome(True, img.with_data(adv_data), [0.3, 0.7], wall_time=2.0), ProbVector([0.9, 0.1]))
    miss = AttackRecord(LabeledImage(img, 1), _outcome(False), ProbVector([0.9, 0.1]))
    not_good = (LabeledImage(img, 1), None, ProbVector([0.2, 0.8]))
    m = summarize([hit, miss, not_good], k=1)
    assert m.err_top_k_base == pytest.approx(100 / 3)
    assert m.err_top_k_adv == pytest.approx(200 / 3)
    assert m.ptb == pytest.approx(0.25)
    assert m.ptbpixels == pytest.approx(25.0)
    assert m.conf == pytest.approx(0.7)
    assert m.time == pytest.approx(2.0)
    assert (m.n_images, m.n_attacked, m.n_success) == (3, 2, 1)
    assert m.success_rate == 0.5

def test_summarize_all_failed_leaves_means_absent():
    img = Image(np.zeros((1, 3, 3)), B)
    recs = [AttackRecord(LabeledImage(img, 1), _outcome(False), ProbVector([0.6, 0.4])) for _ in range(4)]
    m = summarize(recs, k=1)
    assert m.err_top_k_base == 0.0 and m.err_top_k_adv == 0.0
    assert m.conf is None and m.ptb is None and m.ptbpixels is None and m.time is None
    assert m.success_rate == 0.0
    with pytest.raises(ParameterError):
        summarize([], k=1)

# ------------------ gradients ------------------

def test_fd_gradient_constant_oracle_is_zero():
    img = Image(np.zeros((1, 3, 3)), B)
    session = OracleSession(ConstantClassifier([0.5, 0.5], (1, 3, 3)))
    grad = fd_gradient(session, img, 1)
    assert grad.shape == (1, 3, 3) and not grad.any()
    assert session.query_count == 18

def test_fd_gradient_matches_analytic_on_linear_model():
    model = linear_spec((1, 3, 3), 3, seed=1)
    rng = np.random.default_rng(0)
    errors = []
    for _ in range(20):
        img = Image(rng.uniform(-1, 1, size=(1, 3, 3)), B)
        est = fd_gradient(OracleSession(EngineClassifier(model)), img, 2, step=DEFAULT_FD_STEP)
        errors.append(relative_l2_error(est, engine.analytic_gradient(model, img, 2)))
    assert max(errors) <= 1e-4

def test_fd_gradient_matches_analytic_on_two_conv_model():
    model = smooth_conv_model(seed=3)
    rng = np.random.default_rng(1)
    errors = []
    for _ in range(20):
        img = Image(rng.uniform(-1, 1, size=(1, 6, 6)), B)
        est = fd_gradient(OracleSession(EngineClassifier(model)), img, 1, step=DEFAULT_FD_STEP)
        errors.append(relative_l2_error(est, engine.analytic_gradient(model, img, 1)))
    assert max(errors) <= 1e-3

def test_fd_gradient_error_shrinks_with_step():
    model = smooth_conv_model(seed=4)
    img = Image(np.random.default_rng(2).uniform(-1, 1, size=(1, 6, 6)), B)
    ref = engine.analytic_gradient(model, img, 2)
    session = OracleSession(EngineClassifier(model))
    coarse = relative_l2_error(fd_gradient(session, img, 2, step=1e-2), ref)
    fine = relative_l2_error(fd_gradient(session, img, 2, step=1e-3), ref)
    assert fine < coarse

def test_fd_gradient_rejects_bad_input():
    session = OracleSession(ConstantClassifier([0.5, 0.5], (1, 2, 2)))
    with pytest.raises(ParameterError):
        fd_gradient(session, Image(np.zeros((1, 2, 2)), B), 1, step=0.0)
    with pytest.raises(PreconditionError):
        fd_gradient(session, Image(np.full((1, 2, 2), 3.0), B), 1)

# ------------------ saliency ------------------

def test_saliency_map_takes_channel_max():
    grad = np.zeros((2, 2, 3))
    grad[0, 1, 2] = -0.7
    grad[1, 1, 2] = 0.2
    grad[1, 0, 0] = 0.4
    smap = saliency_map(grad)
    assert smap.shape == (2, 3)
    assert smap[1, 2] == pytest.approx(0.7) and smap[0, 0] == pytest.approx(0.4)
    with pytest.raises(ShapeError):
        saliency_map(np.zeros((2, 2)))

def test_top_saliency_breaks_ties_row_major():
    smap = np.zeros((3, 2))
    smap[2, 1] = 5.0
    assert top_saliency(smap, 0.2) == {PixelLoc(3, 2), PixelLoc(1, 1)}

def test_overlap_stat_counts_salient_hits():
    smap = np.zeros((10, 10))
    smap[:, 0] = 1.0  # the whole first row (y = 1)
    perturbed = [PixelLoc(1, 1), PixelLoc(2, 1), PixelLoc(3, 1)] + [PixelLoc(x, 5) for x in range(1, 8)]
    overlap, z = overlap_stat(perturbed, smap)
    assert overlap == pytest.approx(0.3)
    assert z == pytest.approx(0.2 / math.sqrt(0.09 / 10))
    with pytest.raises(ParameterError):
        overlap_stat([], smap)
    with pytest.raises(ParameterError):
        overlap_stat(perturbed, smap, top_fraction=1.0)

def test_z_statistic_example():
    assert z_statistic(0.23, 0.10, 200) == pytest.approx(6.128, abs=1e-3)

# ------------------ FGSM ------------------

def test_fgsm_flips_a_linear_model():
    model = _sum_model()
    li = LabeledImage(Image(np.full((1, 2, 2), 0.1), B), 1)
    res = fgsm_outcome(model, li, eps=0.2)
    assert res.tried_labels == 2
    assert res.label_success == [True, False]
    np.testing.assert_allclose(res.adversarial.data, -0.1, atol=1e-12)
    assert res.probs.top1 == 2

def test_fgsm_zero_eps_finds_nothing():
    img = Image(np.full((1, 2, 2), 0.1), B)
    adv, tried = fgsm(_sum_model(), img, 0.0)
    assert adv is None and tried == 2

def test_fgsm_attack_outcome_and_validity():
    out = fgsm_attack(_sum_model(), LabeledImage(Image(np.full((1, 2, 2), 0.1), B), 1), 0.2)
    assert out.technique == "fgsm" and out.success
    assert len(out.perturbed_pixels) == 4
    assert out.label_success == [True, False]
    model = linear_spec((1, 4, 4), 3, seed=7)
    rng = np.random.default_rng(3)
    for _ in range(10):
        img = Image(rng.uniform(-1, 1, size=(1, 4, 4)), B)
        adv, _ = fgsm(model, img, 5.0)
        if adv is not None:
            assert validate(adv)
    with pytest.raises(ParameterError):
        fgsm(model, img, -1.0)

# ------------------ Aggregates & tables ------------------

def test_transfer_rate():
    img = Image(np.zeros((1, 2, 2)), B)
    session = OracleSession(ConstantClassifier([0.2, 0.8], (1, 2, 2)))
    pairs = [(LabeledImage(img, 1), img), (LabeledImage(img, 2), img)]
    assert transfer_rate(session, pairs) == 0.5
    assert transfer_rate(session, []) is None

def test_critical_summary():
    outs = [_outcome(True, fraction=0.2), _outcome(False, fraction=0.0), _outcome(True, fraction=0.4)]
    s = critical_summary(5.0, outs)
    assert s["images"] == 3
    assert s["mean_critical_fraction"] == pytest.approx(0.2)
    assert s["std_error"] == pytest.approx(0.2 / math.sqrt(3))
    assert s["success_fraction"] == pytest.approx(2 / 3)

def test_metrics_csv_layout(tmp_path):
    img = Image(np.zeros((1, 3, 3)), B)
    m = summarize([AttackRecord(LabeledImage(img, 1), _outcome(False), ProbVector([0.6, 0.4]))], k=2)
    row = metrics_row(m, technique="LocSearchAdv", network="toy-conv")
    path = write_metrics_csv([row], tmp_path / "metrics.csv")
    frame = read_metrics_csv(path)
    assert list(frame.columns) == metrics_columns(2)
    assert frame.loc[0, "network"] == "toy-conv"
    assert pd.isna(frame.loc[0, "conf"])
    text = format_table(frame)
    assert "ErrTop-2(Adv)" in text and "-" in text and "0.00" in text
