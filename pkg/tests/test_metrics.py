import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptsr import metrics as M
from adaptsr.metrics import (DEFAULT_METRICS, FR, HIGHER, LOWER, NR, InfoGainReport, MetricError,
                             MetricSpec, RepresentationScore, info_gain, nlpd, normalize_metric,
                             nr_detail, nr_naturalness, psnr, representation_score, ssim)
from oracles import (detail_oracle, naturalness_oracle, nlpd_oracle, psnr_oracle, random_fixture,
                     ssim_oracle, ggd_shape_bisect, mscn_oracle)


def close(a, b, rel):
    return math.isclose(a, b, rel_tol=rel, abs_tol=1e-12)


# ----------------------------------------------------------------- psnr


def test_psnr_identical_is_capped(rng):
    a = rng.random((16, 16))
    assert psnr(a, a) == 100.0


def test_psnr_half_offset():
    a = np.full((8, 8), 0.25)
    assert psnr(a, a + 0.5, peak=1.0) == pytest.approx(20 * math.log10(2), abs=1e-12)
    assert psnr(a, a + 0.5) == pytest.approx(6.0206, abs=1e-4)


def test_psnr_matches_loop(rng):
    for _ in range(5):
        a, b = rng.random((64, 64)), rng.random((64, 64))
        assert close(psnr(a, b), psnr_oracle(a, b), 1e-9)


def test_psnr_rejects_mismatch():
    with pytest.raises(MetricError):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))


# ----------------------------------------------------------------- ssim


def test_ssim_identity(rng):
    a = rng.random((32, 32))
    assert ssim(a, a) == 1.0


def test_ssim_two_constants():
    c1 = 0.01**2
    expected = (2 * 0.2 * 0.8 + c1) / (0.2**2 + 0.8**2 + c1)
    got = ssim(np.full((20, 20), 0.2), np.full((20, 20), 0.8))
    assert got == pytest.approx(expected, rel=1e-12)
    assert got == pytest.approx(0.47066607851786501985, rel=1e-12)


def test_ssim_matches_window_oracle(rng):
    for _ in range(5):
        a = random_fixture(rng)
        b = np.clip(a + 0.1 * rng.standard_normal(a.shape), 0, 1)
        assert close(ssim(a, b), ssim_oracle(a, b), 1e-9)


def test_ssim_too_small():
    with pytest.raises(MetricError):
        ssim(np.zeros((10, 10)), np.zeros((10, 10)))


def test_ssim_color_averages_channels(rng):
    a = rng.random((24, 24, 3))
    b = rng.random((24, 24, 3))
    per = [ssim(a[..., c], b[..., c]) for c in range(3)]
    assert ssim(a, b) == pytest.approx(np.mean(per), rel=1e-14)


# ----------------------------------------------------------------- nlpd


def test_nlpd_identity(rng):
    a = rng.random((64, 64))
    assert nlpd(a, a) == 0.0


def test_nlpd_blind_to_offset(rng):
    b = random_fixture(rng) * 0.5
    got = nlpd(b + 0.1, b)
    # the same formula on two offset constants: every band-pass level is zero
    const = nlpd_oracle(np.full((64, 64), 0.6), np.full((64, 64), 0.5))
    assert const == 0.0
    assert got == pytest.approx(const, abs=1e-12)


def test_nlpd_single_level_matches_hand_computation(rng):
    a, b = rng.random((32, 32)), rng.random((32, 32))
    assert nlpd(a, b, levels=1) == pytest.approx(nlpd_oracle(a, b, levels=1), rel=1e-9)


def test_nlpd_matches_pyramid_oracle(rng):
    for _ in range(5):
        a = random_fixture(rng)
        b = np.clip(a + 0.05 * rng.standard_normal(a.shape), 0, 1)
        assert close(nlpd(a, b), nlpd_oracle(a, b), 1e-6)


def test_nlpd_levels_follow_tile_size():
    assert M.nlpd_levels((64, 64)) == 4
    assert M.nlpd_levels((32, 32)) == 3
    assert M.nlpd_levels((16, 16)) == 2
    with pytest.raises(MetricError):
        nlpd(np.zeros((8, 8)), np.ones((8, 8)), levels=4)


# ----------------------------------------------------------------- no-reference


def test_naturalness_constant_tile():
    assert nr_naturalness(np.full((32, 32), 0.3)) == 0.0


def test_naturalness_white_noise_near_gaussian_shape():
    x = np.random.default_rng(0).standard_normal((128, 128))
    shape = ggd_shape_bisect(mscn_oracle(x))
    assert abs(shape - 2.0) < 0.1
    assert nr_naturalness(x) >= 0.9


def test_naturalness_checkerboard_below_noise():
    x = np.random.default_rng(0).standard_normal((64, 64))
    board = (np.indices((64, 64)).sum(axis=0) % 2).astype(float)
    assert naturalness_oracle(board) < naturalness_oracle(x)
    assert nr_naturalness(board) < nr_naturalness(x)


def test_naturalness_matches_oracle(rng):
    for _ in range(5):
        a = random_fixture(rng)
        assert close(nr_naturalness(a), naturalness_oracle(a), 1e-9)


def test_detail_constant_tile():
    assert nr_detail(np.full((64, 64), 0.7)) == 0.0


def test_detail_uniform_histogram_is_one():
    # 64 blocks, two per bin, block std at each bin center
    width = 0.5 / 32
    stds = np.repeat((np.arange(32) + 0.5) * width, 2)
    pattern = np.where(np.indices((8, 8)).sum(axis=0) % 2 == 0, 1.0, -1.0)
    tile = np.zeros((64, 64))
    for k, sd in enumerate(stds):
        r, c = divmod(k, 8)
        tile[r * 8:(r + 1) * 8, c * 8:(c + 1) * 8] = 0.5 + sd * pattern
    assert nr_detail(tile) == pytest.approx(1.0, abs=1e-12)


def test_detail_matches_histogram_oracle(rng):
    for _ in range(5):
        a = random_fixture(rng)
        assert close(nr_detail(a), detail_oracle(a), 1e-9)


def test_nr_metrics_reject_small_tiles():
    with pytest.raises(MetricError):
        nr_detail(np.zeros((8, 8)))
    with pytest.raises(MetricError):
        nr_naturalness(np.zeros((15, 40)))


def test_fr_metrics_best_only_at_identity(rng):
    a = rng.random((32, 32))
    b = a.copy()
    b[3, 7] += 1e-3
    assert psnr(a, b) < 100.0
    assert ssim(a, b) < 1.0
    assert nlpd(a, b) > 0.0


# ----------------------------------------------------------------- normalization and aggregation


def test_normalize_edges():
    assert normalize_metric(10.0, MetricSpec("psnr", FR, 1, 10, 50, HIGHER)) == 0.0
    assert normalize_metric(1.0, MetricSpec("nlpd", FR, 1, 0, 1, LOWER)) == 0.0
    assert normalize_metric(30.0, MetricSpec("psnr", FR, 1, 10, 50, HIGHER)) == 0.5
    assert normalize_metric(1e9, MetricSpec("psnr", FR, 1, 10, 50, HIGHER)) == 1.0
    assert normalize_metric(-5.0, MetricSpec("nlpd", FR, 1, 0, 1, LOWER)) == 1.0


def _const_metric(v):
    return lambda *args: v


@pytest.fixture
def fixed_metrics(monkeypatch):
    """Swap the metric registry for constants with known normalized values."""
    monkeypatch.setitem(M.FR_METRICS, "psnr", _const_metric(42.0))   # -> 0.8
    monkeypatch.setitem(M.FR_METRICS, "ssim", _const_metric(0.6))
    monkeypatch.setitem(M.FR_METRICS, "nlpd", _const_metric(0.3))    # -> 0.7
    monkeypatch.setitem(M.NR_METRICS, "nr_naturalness", _const_metric(0.5))
    monkeypatch.setitem(M.NR_METRICS, "nr_detail", _const_metric(0.5))


def test_representation_fr_mean(fixed_metrics):
    x = np.zeros((16, 16))
    r = representation_score(x, x, DEFAULT_METRICS, nr_active=False, timestep=10)
    assert r.value == pytest.approx(0.7, abs=1e-12)
    assert r.fr_component == pytest.approx(0.7, abs=1e-12)
    assert r.nr_component is None


def test_representation_all_half(monkeypatch):
    for name in M.FR_METRICS:
        monkeypatch.setitem(M.FR_METRICS, name, _const_metric(30.0 if name == "psnr" else 0.5))
    for name in M.NR_METRICS:
        monkeypatch.setitem(M.NR_METRICS, name, _const_metric(0.5))
    x = np.zeros((16, 16))
    r = representation_score(x, x, DEFAULT_METRICS, nr_active=True, timestep=1)
    assert r.value == pytest.approx(0.5, abs=1e-12)
    assert r.nr_component == pytest.approx(0.5, abs=1e-12)


def test_representation_weights_renormalize(fixed_metrics):
    specs = [MetricSpec("psnr", FR, 3.0, 10, 50), MetricSpec("ssim", FR, 1.0),
             MetricSpec("nr_detail", NR, 4.0)]
    x = np.zeros((16, 16))
    r = representation_score(x, x, specs, nr_active=True, timestep=3)
    assert r.fr_component == pytest.approx((3 * 0.8 + 0.6) / 4, abs=1e-12)
    assert r.nr_component == pytest.approx(0.5, abs=1e-12)
    assert r.value == pytest.approx((3 * 0.8 + 0.6 + 4 * 0.5) / 8, abs=1e-12)


def test_representation_empty_active_set():
    x = np.zeros((16, 16))
    with pytest.raises(MetricError):
        representation_score(x, x, [MetricSpec("nr_detail", NR, 1.0)], nr_active=False)
    with pytest.raises(MetricError):
        representation_score(x, x, [MetricSpec("psnr", FR, 0.0, 10, 50)], nr_active=False)


def test_representation_in_unit_interval(rng):
    for _ in range(5):
        a = random_fixture(rng)
        b = random_fixture(rng)
        r = representation_score(a, b, DEFAULT_METRICS, nr_active=True, timestep=0)
        for v in (r.value, r.fr_component, r.nr_component):
            assert 0.0 <= v <= 1.0


def test_metrics_deterministic(rng):
    a, b = random_fixture(rng), random_fixture(rng)
    r1 = representation_score(a, b, DEFAULT_METRICS, True, 5)
    r2 = representation_score(a.copy(), b.copy(), DEFAULT_METRICS, True, 5)
    assert r1 == r2


# ----------------------------------------------------------------- information gain


def _score(v, t, nr=None, fr=None):
    return RepresentationScore(v, v if fr is None else fr, nr, t)


def test_info_gain_equal_scores():
    g = info_gain(_score(0.4, 10, 0.3), _score(0.4, 20, 0.3))
    assert g.gain == 0.0 and g.fr_gain == 0.0 and g.nr_gain == 0.0


def test_info_gain_small_step():
    g = info_gain(_score(0.505, 10), _score(0.5, 20))
    # reference tanh(0.005) at 40 digits
    assert g.gain == pytest.approx(0.0049999583337499957838, rel=1e-9)
    assert g.gain == pytest.approx(0.00499997, abs=1e-7)


def test_info_gain_nr_needs_both_sides():
    assert info_gain(_score(0.5, 10, 0.4), _score(0.5, 20, None)).nr_gain is None
    assert info_gain(_score(0.5, 10, None), _score(0.5, 20, 0.2)).nr_gain is None


def test_info_gain_ordering():
    with pytest.raises(MetricError):
        info_gain(_score(0.5, 20), _score(0.5, 20))


@settings(max_examples=300)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_info_gain_bounded(a, b, c, d):
    g = info_gain(_score(a, 1, c), _score(b, 2, d))
    assert -1.0 <= g.gain <= 1.0 and -1.0 <= g.fr_gain <= 1.0 and -1.0 <= g.nr_gain <= 1.0


@settings(max_examples=200)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_info_gain_monotone(prev, x, y):
    lo, hi = sorted((x, y))
    g_lo = info_gain(_score(lo, 1), _score(prev, 2)).gain
    g_hi = info_gain(_score(hi, 1), _score(prev, 2)).gain
    assert g_lo <= g_hi


def test_metric_spec_problems():
    assert MetricSpec("psnr", FR, 1, 10, 50).problems() == []
    assert MetricSpec("nope", FR).problems()
    assert MetricSpec("psnr", FR, -1).problems()
    assert MetricSpec("psnr", FR, 1, 5, 5).problems()
    assert MetricSpec("psnr", "XX").problems()


def test_register_metric_plugs_in(monkeypatch):
    monkeypatch.setattr(M, "NR_METRICS", dict(M.NR_METRICS))
    M.register_metric("flat", NR, lambda a: 0.25)
    spec = MetricSpec("flat", NR, 1.0)
    assert spec.problems() == []
    x = np.zeros((16, 16))
    r = representation_score(x, x, [MetricSpec("ssim", FR), spec], nr_active=True)
    assert r.nr_component == 0.25
