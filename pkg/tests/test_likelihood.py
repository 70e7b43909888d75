import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

import frcalib.likelihood as lk
from frcalib.deviation import LineSegment, Measure, deviation
from frcalib.geometry import CameraParams, euler_to_rotation
from frcalib.io import FormatError
from frcalib.likelihood import (
    DEFAULT_PRIORS,
    TABLE1,
    LikelihoodModel,
    MixtureConfig,
    ProcessLabel,
    batch_objective,
    classify_segments,
    component_likelihood,
    fit_exponential,
    log_deviation_objective,
    mixture_likelihood,
    objective,
    responsibilities,
    with_measure,
)
from frcalib.synth import SynthConfig, generate

PARAMS = CameraParams.from_values(12.0, -4.0, 9.0, hfov=75.0)


def test_exponential_component():
    m = LikelihoodModel("exponential", 1.46)
    assert component_likelihood(0.0, m) == pytest.approx(1 / 1.46, rel=1e-12)
    assert component_likelihood(1.46, m) == pytest.approx(math.exp(-1) / 1.46, rel=1e-12)
    assert component_likelihood(math.inf, m) == 0.0


def test_gaussian_component_matches_scipy():
    m = LikelihoodModel("gaussian", 1.0)
    assert component_likelihood(0.0, m) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-12)
    for x in (0.0, 1.0, 2.0):
        assert abs(component_likelihood(x, m) - stats.norm.pdf(x)) < 1e-12


def test_uniform_component():
    m = LikelihoodModel("uniform", 90.0)
    assert component_likelihood(10.0, m) == pytest.approx(1 / 90)
    assert component_likelihood(91.0, m) == 0.0


def test_component_rejects_bad_input():
    m = LikelihoodModel("exponential", 1.0)
    with pytest.raises(ValueError):
        component_likelihood(-1e-9, m)
    with pytest.raises(ValueError):
        component_likelihood(math.nan, m)
    with pytest.raises(ValueError):
        LikelihoodModel("exponential", 0.0)
    with pytest.raises(ValueError):
        LikelihoodModel("cauchy", 1.0)


def test_table_values():
    expected = {
        "a": (94.46, 17.26), "b": (1.46, 0.57), "c": (0.39, 0.53), "d": (1.0, 1.0), "e": (0.80, 0.57),
    }
    for letter, (h, v) in expected.items():
        cfg = MixtureConfig.default(letter)
        assert (cfg.horizontal.scale, cfg.vertical.scale) == (h, v)
        assert cfg.horizontal.family == ("gaussian" if letter == "d" else "exponential")
    assert set(TABLE1) == set(Measure)


def test_default_priors():
    cfg = MixtureConfig.default()
    assert cfg.priors == {ProcessLabel.VERTICAL: 0.45, ProcessLabel.HORIZONTAL1: 0.26,
                          ProcessLabel.HORIZONTAL2: 0.26, ProcessLabel.BACKGROUND: 0.03}
    assert sum(DEFAULT_PRIORS.values()) == pytest.approx(1.0, abs=1e-15)


def test_bad_priors_rejected():
    with pytest.raises(ValueError):
        MixtureConfig(priors={"vertical": 0.5, "horizontal1": 0.3, "horizontal2": 0.3, "background": 0.0})
    with pytest.raises(ValueError):
        MixtureConfig(priors={"vertical": 1.0})


def test_background_density():
    assert MixtureConfig.default("b").background_density(640, 480) == pytest.approx(1 / 90)
    assert MixtureConfig.default("e").background_density(640, 480) == pytest.approx(1 / 90)
    assert MixtureConfig.default("c").background_density(640, 480) == pytest.approx(1 / 800)


def test_config_round_trip():
    cfg = MixtureConfig(measure="c", background_range=123.0, length_weighted=False)
    back = MixtureConfig.from_dict(cfg.to_dict())
    assert back.to_dict() == cfg.to_dict()
    bad = dict(cfg.to_dict(), format_version="2.0")
    with pytest.raises(FormatError):
        MixtureConfig.from_dict(bad)


def brute_force_mixture(seg, params, measure):
    """Mixture density spelled out term by term with scalar deviations."""
    cfg = MixtureConfig.default(measure)
    K, R = params.intrinsics.K, params.rotation
    family, lam_h, lam_v = TABLE1[Measure(measure)]
    total = 0.03 * cfg.background_density(params.intrinsics.width, params.intrinsics.height)
    for label, col, prior, lam in ((ProcessLabel.VERTICAL, 1, 0.45, lam_v),
                                   (ProcessLabel.HORIZONTAL1, 0, 0.26, lam_h),
                                   (ProcessLabel.HORIZONTAL2, 2, 0.26, lam_h)):
        x = deviation(measure, seg, K @ R[:, col], params.intrinsics)
        if math.isinf(x):
            continue
        if family == "gaussian":
            p = math.exp(-x * x / (2 * lam * lam)) / (lam * math.sqrt(2 * math.pi))
        else:
            p = math.exp(-x / lam) / lam
        total += prior * p
    return total


@pytest.mark.parametrize("measure", list("abcde"))
def test_mixture_matches_brute_force(measure):
    segs = [LineSegment((100, 50), (130, 300)), LineSegment((20, 400), (600, 380)), LineSegment((300, 200), (350, 260))]
    total = 0.0
    for seg in segs:
        want = brute_force_mixture(seg, PARAMS, measure)
        assert mixture_likelihood(seg, PARAMS, measure) == pytest.approx(want, rel=1e-12)
        total += seg.length * math.log(want)
    assert objective(segs, PARAMS, measure) == pytest.approx(total, rel=1e-12)


def test_vertical_segment_on_vertical_vp():
    params = CameraParams.from_values(0, 0, 20, hfov=90)
    K, R = params.intrinsics.K, params.rotation
    X = np.array([0.5, 0.0, 4.0])
    a, b = K @ R @ X, K @ R @ (X + [0, 1.0, 0])
    seg = LineSegment(a[:2] / a[2], b[:2] / b[2])
    want = brute_force_mixture(seg, params, "b")
    # the vertical term alone is 0.45 / 0.57 at zero deviation
    assert want > 0.45 / 0.57
    assert mixture_likelihood(seg, params, "b") == pytest.approx(want, rel=1e-12)


def test_all_sentinel_deviations_leave_background(monkeypatch):
    monkeypatch.setattr(lk, "deviations", lambda measure, segs, K, R: np.full((len(R), 3, len(segs)), np.inf))
    seg = LineSegment((0, 0), (10, 10))
    assert mixture_likelihood(seg, PARAMS, "b") == pytest.approx(0.03 / 90, rel=1e-12)
    [score] = classify_segments([seg], PARAMS, "b")
    assert score.label is ProcessLabel.BACKGROUND


def test_objective_single_segment():
    seg = LineSegment((0, 0), (10, 0))
    q = mixture_likelihood(seg, PARAMS)
    assert objective([seg], PARAMS) == pytest.approx(10 * math.log(q), rel=1e-12)


def test_objective_duplication_and_weights():
    scene = generate(SynthConfig(PARAMS, counts=(5, 5, 5, 2), noise=1.0, seed=2))
    segs = scene.segments
    base = objective(segs, PARAMS)
    assert objective(np.vstack([segs, segs]), PARAMS) == pytest.approx(2 * base, rel=1e-12)
    cfg = MixtureConfig.default()
    x = PARAMS.as_vector()
    lengths = np.hypot(segs[:, 2] - segs[:, 0], segs[:, 3] - segs[:, 1])
    scaled = batch_objective(segs, [x[0]], [x[1]], [x[2]], [x[3]], 640, 480, cfg, weights=3.5 * lengths)
    assert scaled[0] == pytest.approx(3.5 * base, rel=1e-12)


def test_objective_rejects_empty():
    with pytest.raises(ValueError):
        objective(np.empty((0, 4)), PARAMS)


def test_measure_config_mismatch():
    with pytest.raises(ValueError):
        objective([LineSegment((0, 0), (1, 1))], PARAMS, measure="c", config=MixtureConfig.default("b"))


def test_truth_beats_random_parameters():
    scene = generate(SynthConfig(PARAMS, counts=(20, 20, 20, 0), seed=7))
    cfg = MixtureConfig.default()
    rng = np.random.default_rng(0)
    n = 10000
    X = np.column_stack([rng.uniform(-45, 45, n), rng.uniform(-15, 15, n), rng.uniform(-35, 35, n),
                         rng.uniform(50, 130, n)])
    values = np.concatenate([batch_objective(scene.segments, *X[i:i + 1000].T, 640, 480, cfg)
                             for i in range(0, n, 1000)])
    assert objective(scene.segments, PARAMS) >= values.max()


def test_noiseless_classification_recovers_labels():
    scene = generate(SynthConfig(PARAMS, counts=(25, 25, 25, 0), seed=11))
    labels = [s.label for s in classify_segments(scene.segments, PARAMS)]
    assert labels == scene.labels


@settings(max_examples=1000, deadline=None)
@given(st.tuples(*[st.floats(0, 640)] * 4).filter(lambda s: math.hypot(s[2] - s[0], s[3] - s[1]) > 1),
       st.sampled_from("abcde"))
def test_responsibilities_sum_to_one(seg, measure):
    r = responsibilities([seg], PARAMS, measure)
    assert r.shape == (1, 4)
    assert np.all(r >= 0)
    assert r.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("measure", list("abcde"))
def test_horizontal_relabeling_invariance(measure):
    # a quarter turn about the vertical axis swaps the two horizontal families
    scene = generate(SynthConfig(PARAMS, counts=(10, 10, 10, 3), noise=0.5, seed=5))
    cfg = MixtureConfig.default(measure)
    R = PARAMS.rotation
    R_swapped = R @ euler_to_rotation((90, 0, 0))
    lik = lk.manhattan_likelihoods(scene.segments, PARAMS.intrinsics.K, np.stack([R, R_swapped]), cfg)
    assert np.allclose(lik[0, 0], lik[1, 2], rtol=1e-9, atol=1e-300)
    assert np.allclose(lik[0, 2], lik[1, 0], rtol=1e-9, atol=1e-300)
    mix = np.einsum("k,pkn->pn", cfg.column_priors(), lik)
    assert np.allclose(mix[0], mix[1], rtol=1e-9)


def test_fit_exponential():
    assert fit_exponential([1, 1, 1, 1]) == 1.0
    assert fit_exponential([0, 2]) == 1.0
    draws = np.random.default_rng(0).exponential(2.5, 10000)
    assert 2.375 <= fit_exponential(draws) <= 2.625
    for bad in ([1.0], [0.0, 0.0], [1.0, -1.0], [1.0, math.inf]):
        with pytest.raises(ValueError):
            fit_exponential(bad)


def test_with_measure_resets_dispersions():
    cfg = with_measure(MixtureConfig.default("b"), "c")
    assert cfg.measure is Measure.C and cfg.horizontal.scale == 0.39


def test_log_deviation_objective_prefers_truth():
    scene = generate(SynthConfig(PARAMS, counts=(10, 10, 10, 0), noise=0.3, seed=4))
    other = CameraParams.from_values(30.0, 5.0, -10.0, hfov=100.0)
    assert log_deviation_objective(scene.segments, PARAMS) > log_deviation_objective(scene.segments, other)
