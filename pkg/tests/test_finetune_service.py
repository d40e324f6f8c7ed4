import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from conftest import CHANNEL_REFLECTANCE, smooth_illumination
from core.exceptions import InvalidParameterError
from schema.adjustment_schema import AdjustmentParams, LbsMap
from schema.finetune_schema import GuideConfig
from schema.solver_schema import DecompositionState, SolverConfig
from services.adjustment_service import adjustment_service
from services.finetune_service import finetune_service
from services.guide_service import guide_service
from services.metrics_service import metrics_service
from services.retinex_service import retinex_service

DARK_START = AdjustmentParams(alpha=0.0, refl_gain=0.0)


def _state(R, L):
    return DecompositionState(stage=1, R=R, L=L, objective=0.0)


def test_finetune_loss():
    a = np.full((4, 4, 3), 0.3)
    assert finetune_service.finetune_loss(a, a) == 0.0
    assert finetune_service.finetune_loss(a, a + 0.2) == pytest.approx(0.12)


def test_golden_section_finds_parabola_minimum():
    x, f = finetune_service.golden_section(lambda t: (t - 0.3) ** 2 + 1.0, 0.0, 1.0)
    assert x == pytest.approx(0.3, abs=1e-5)
    assert f == pytest.approx(1.0, abs=1e-9)


def test_already_optimal_guide_keeps_params():
    rng = np.random.default_rng(0)
    R = rng.uniform(0.2, 0.9, size=(12, 12, 3))
    L = rng.uniform(0.2, 0.9, size=(12, 12))
    I_l = R * L[:, :, None]
    init = AdjustmentParams(alpha=0.3, refl_gain=0.0)
    guide = adjustment_service.enhance(R, L, LbsMap(plane=np.zeros((12, 12))), init)

    result = finetune_service.finetune(_state(R, L), I_l, guide, init, iters=5)
    assert result.loss_trace == [0.0] * 6
    assert result.params == init


def test_alpha_converges_to_the_estimated_brightness():
    R = np.broadcast_to(CHANNEL_REFLECTANCE, (16, 16, 3)).copy()
    L = np.full((16, 16), 0.25)
    I_l = R * 0.25
    guide = R * 0.5

    result = finetune_service.finetune(_state(R, L), I_l, guide, DARK_START, iters=30)
    expected = adjustment_service.estimate_alpha(I_l, guide)
    assert expected == pytest.approx(0.5)
    assert abs(result.params.alpha - expected) < 0.05


def test_decomposition_is_left_untouched(corpus):
    state = retinex_service.decompose(corpus[0], SolverConfig(stages=3))[-1]
    R_before, L_before = state.R.copy(), state.L.copy()
    guide = guide_service.synthesize_guide(corpus[0], GuideConfig())
    finetune_service.finetune(state, corpus[0], guide, DARK_START, iters=3)
    np.testing.assert_array_equal(state.R, R_before)
    np.testing.assert_array_equal(state.L, L_before)


def test_loss_trace_is_monotone_on_the_corpus(corpus):
    for image in corpus:
        state = retinex_service.decompose(image, SolverConfig(stages=3))[-1]
        guide = guide_service.synthesize_guide(image, GuideConfig())
        result = finetune_service.finetune(state, image, guide, AdjustmentParams(), iters=30)
        assert len(result.loss_trace) == 31
        for prev, cur in zip(result.loss_trace, result.loss_trace[1:]):
            assert cur <= prev
        assert result.final_loss <= result.loss_trace[0] + 1e-12


def test_more_iterations_never_hurt(corpus):
    state = retinex_service.decompose(corpus[4], SolverConfig(stages=3))[-1]
    guide = guide_service.synthesize_guide(corpus[4], GuideConfig())
    one = finetune_service.finetune(state, corpus[4], guide, DARK_START, iters=1)
    thirty = finetune_service.finetune(state, corpus[4], guide, DARK_START, iters=30)
    assert thirty.final_loss <= one.final_loss


def test_gains_stay_in_the_box(corpus):
    state = retinex_service.decompose(corpus[5], SolverConfig(stages=2))[-1]
    white = np.ones_like(corpus[5])
    result = finetune_service.finetune(state, corpus[5], white, DARK_START, iters=5)
    assert all(0.25 <= g <= 4.0 for g in result.params.per_channel_gain)


def test_iterations_must_be_positive(corpus):
    state = retinex_service.decompose(corpus[0], SolverConfig(stages=1))[-1]
    with pytest.raises(InvalidParameterError):
        finetune_service.finetune(state, corpus[0], corpus[0], DARK_START, iters=0)


def test_finetuning_beats_the_untuned_baseline():
    gains = []
    for seed in range(5):
        rng = np.random.default_rng(100 + seed)
        texture = gaussian_filter(rng.uniform(0.5, 1.0, size=(32, 32, 3)), sigma=(1.0, 1.0, 0.0))
        gt = np.clip(texture * smooth_illumination(32, 32, 1, 1 + seed % 2, 0.1, base=0.7)[:, :, None], 0, 1)
        I_l = gt * 0.15

        state = retinex_service.decompose(I_l, SolverConfig(stages=5))[-1]
        guide = guide_service.synthesize_guide(I_l, GuideConfig())
        lbs = adjustment_service.lbs_predict(I_l, guide)
        baseline = adjustment_service.enhance(state.R, state.L, lbs, DARK_START)

        result = finetune_service.finetune(state, I_l, guide, DARK_START, iters=30)
        tuned = adjustment_service.enhance(state.R, state.L, lbs, result.params)

        psnr_base = metrics_service.psnr(baseline, gt)
        psnr_tuned = metrics_service.psnr(tuned, gt)
        assert psnr_tuned > psnr_base
        gains.append(psnr_tuned - psnr_base)
    assert np.mean(gains) >= 1.0
