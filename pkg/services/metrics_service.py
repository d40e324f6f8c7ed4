#!/usr/bin/env python3
"""
Loss terms of the decomposition/adjustment objectives and the IQA metrics
(PSNR, SSIM, LOE, LOE_ref) used for evaluation
"""

from typing import Any, Dict, List, Optional
import logging

import numpy as np
from scipy.ndimage import correlate1d

from config import RuntimeConfig
from core.exceptions import DimensionMismatchError, InvalidParameterError
from core.image_ops import DifferenceKernel, channel_max, diff_conv
from schema.metrics_schema import LossWeights, MetricsReport
from schema.solver_schema import DecompositionState

logger = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_RANGE = 1.0
LOE_MAX_SIDE = 50
LOE_SCALE = 1000.0
AXES = (DifferenceKernel.VERTICAL, DifferenceKernel.HORIZONTAL)


def _gaussian_taps(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    taps = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return taps / taps.sum()


class MetricsService:
    def __init__(self):
        self.ssim_taps = _gaussian_taps()
        self.psnr_cap = RuntimeConfig.PSNR_CAP

    # ---- decomposition losses ----

    def loss_reflectance_consistency(self, R_l: np.ndarray, R_h: np.ndarray) -> float:
        self._same_shape(R_l, R_h)
        return float(np.sum((R_l - R_h) ** 2)) / self._hw(R_l)

    def loss_illumination_smooth(self, L_l: np.ndarray, L_h: np.ndarray, I_l: np.ndarray,
                                 w: Optional[LossWeights] = None) -> float:
        w = w or LossWeights()
        self._same_shape(L_l, L_h)
        if L_l.shape != I_l.shape[:2]:
            raise DimensionMismatchError(f"Illumination {L_l.shape} and image {I_l.shape[:2]} differ")
        total = 0.0
        for kernel in AXES:
            # per-axis channel-max magnitude of the low-light gradient
            denom = np.maximum(np.max(np.abs(diff_conv(I_l, kernel)), axis=2), w.eps_grad)
            total += float(np.sum(np.abs(diff_conv(L_l, kernel)) / denom))
            total += float(np.sum(np.abs(diff_conv(L_h, kernel)) / denom))
        return total / self._hw(L_l)

    def loss_reconstruction(self, R: np.ndarray, L: np.ndarray, I: np.ndarray) -> float:
        self._same_shape(R, I)
        return float(np.sum((I - R * L[:, :, None]) ** 2)) / self._hw(I)

    def decomposition_loss(self, trace_l: List[DecompositionState], trace_h: List[DecompositionState],
                           I_l: np.ndarray, I_h: np.ndarray, w: Optional[LossWeights] = None) -> float:
        """
        Stage-summed (k = 1..K) weighted sum of reflectance consistency, illumination
        smoothness and the reconstruction of both images
        """
        w = w or LossWeights()
        if len(trace_l) != len(trace_h):
            raise InvalidParameterError(f"Stage traces differ in length: {len(trace_l)} vs {len(trace_h)}")
        total = 0.0
        for state_l, state_h in zip(trace_l[1:], trace_h[1:]):
            total += w.gamma_R * self.loss_reflectance_consistency(state_l.R, state_h.R)
            total += w.gamma_L * self.loss_illumination_smooth(state_l.L, state_h.L, I_l, w)
            total += w.gamma_rec * (self.loss_reconstruction(state_l.R, state_l.L, I_l)
                                    + self.loss_reconstruction(state_h.R, state_h.L, I_h))
        return total

    # ---- adjustment losses ----

    def loss_color_angle(self, a: np.ndarray, b: np.ndarray) -> float:
        self._same_shape(a, b)
        dot = np.sum(a * b, axis=2)
        cross = np.linalg.norm(np.cross(a, b), axis=2)
        angles = np.arctan2(cross, dot)
        # zero-vector pixels contribute nothing
        valid = (np.linalg.norm(a, axis=2) > 0) & (np.linalg.norm(b, axis=2) > 0)
        return float(np.sum(np.where(valid, angles, 0.0))) / self._hw(a)

    def loss_enhancement(self, en: np.ndarray, gt: np.ndarray) -> float:
        """MSE plus color angle; the perceptual term is not part of this objective"""
        self._same_shape(en, gt)
        return float(np.sum((en - gt) ** 2)) / self._hw(en) + self.loss_color_angle(en, gt)

    def loss_illumination_adjust(self, L_adj: np.ndarray, L_h: np.ndarray) -> float:
        self._same_shape(L_adj, L_h)
        return float(np.sum((L_adj - L_h) ** 2)) / self._hw(L_adj)

    def loss_reflectance_adjust(self, R_adj: np.ndarray, R_h: np.ndarray) -> float:
        return 1.0 - self.ssim(R_adj, R_h)

    def loss_lbs(self, lbs: np.ndarray, target: np.ndarray) -> float:
        self._same_shape(lbs, target)
        return float(np.sum((lbs - target) ** 2)) / self._hw(lbs)

    def adjustment_loss(self, loss_l_adj: float, loss_r_adj: float, loss_lbs: float, loss_en: float,
                        w: Optional[LossWeights] = None) -> float:
        w = w or LossWeights()
        return w.eta_L * loss_l_adj + w.eta_R * loss_r_adj + w.eta_lbs * loss_lbs + w.eta_en * loss_en

    # ---- image quality metrics ----

    def psnr(self, a: np.ndarray, b: np.ndarray) -> float:
        self._same_shape(a, b)
        mse = float(np.mean((np.asarray(a, dtype=np.float64) - b) ** 2))
        if mse == 0.0:
            return self.psnr_cap
        return min(10.0 * np.log10(1.0 / mse), self.psnr_cap)

    def ssim(self, a: np.ndarray, b: np.ndarray) -> float:
        """
        Mean local SSIM over an 11x11 Gaussian window (sigma 1.5), valid region only,
        averaged over channels
        """
        self._same_shape(a, b)
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
            raise InvalidParameterError(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {a.shape[:2]}")
        if a.ndim == 2:
            return self._ssim_plane(a, b)
        return float(np.mean([self._ssim_plane(a[:, :, c], b[:, :, c]) for c in range(a.shape[2])]))

    def _ssim_plane(self, x: np.ndarray, y: np.ndarray) -> float:
        c1 = (SSIM_K1 * SSIM_RANGE) ** 2
        c2 = (SSIM_K2 * SSIM_RANGE) ** 2
        mu_x = self._window_mean(x)
        mu_y = self._window_mean(y)
        var_x = self._window_mean(x * x) - mu_x * mu_x
        var_y = self._window_mean(y * y) - mu_y * mu_y
        cov = self._window_mean(x * y) - mu_x * mu_y
        ssim_map = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / ((mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2))
        value = float(np.mean(ssim_map))
        return min(max(value, -1.0), 1.0)

    def _window_mean(self, plane: np.ndarray) -> np.ndarray:
        half = SSIM_WINDOW // 2
        out = correlate1d(plane, self.ssim_taps, axis=0, mode="reflect")
        out = correlate1d(out, self.ssim_taps, axis=1, mode="reflect")
        return out[half:-half, half:-half]

    def loe(self, enhanced: np.ndarray, reference: np.ndarray) -> float:
        """
        Lightness order error x1000. The second argument is the order reference:
        the low-light input for LOE, the groundtruth for LOE_ref.
        """
        self._same_shape(enhanced, reference)
        light_en = self._loe_downsample(channel_max(enhanced)).ravel()
        light_ref = self._loe_downsample(channel_max(reference)).ravel()
        order_en = light_en[:, None] >= light_en[None, :]
        order_ref = light_ref[:, None] >= light_ref[None, :]
        return LOE_SCALE * float(np.mean(order_en ^ order_ref))

    def _loe_downsample(self, plane: np.ndarray) -> np.ndarray:
        h, w = plane.shape
        rows = (np.arange(min(h, LOE_MAX_SIDE)) * h) // min(h, LOE_MAX_SIDE)
        cols = (np.arange(min(w, LOE_MAX_SIDE)) * w) // min(w, LOE_MAX_SIDE)
        return plane[np.ix_(rows, cols)]

    def evaluate_pair(self, enhanced: np.ndarray, low: np.ndarray, gt: Optional[np.ndarray] = None,
                      losses: Optional[Dict[str, float]] = None,
                      extras: Optional[Dict[str, Any]] = None) -> MetricsReport:
        """
        Metrics of one enhanced image; PSNR/SSIM/LOE_ref need the groundtruth
        """
        report = MetricsReport(
            psnr=self.psnr(enhanced, gt) if gt is not None else None,
            ssim=self.ssim(enhanced, gt) if gt is not None else None,
            loe=self.loe(enhanced, low),
            loe_ref=self.loe(enhanced, gt) if gt is not None else None,
            losses=dict(losses or {}),
            extras=dict(extras or {}),
        )
        logger.info(f"Metrics: psnr={report.psnr} ssim={report.ssim} loe={report.loe:.2f} loe_ref={report.loe_ref}")
        return report

    def _same_shape(self, a: np.ndarray, b: np.ndarray) -> None:
        if np.shape(a) != np.shape(b):
            raise DimensionMismatchError(f"Operands differ in shape: {np.shape(a)} vs {np.shape(b)}")

    def _hw(self, arr: np.ndarray) -> float:
        return float(arr.shape[0] * arr.shape[1])


metrics_service = MetricsService()
