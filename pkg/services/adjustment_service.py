import logging

import numpy as np

from core.exceptions import InvalidParameterError
from core.image_ops import EPS_DIV, as_color, check_same_size, to_gray
from schema.adjustment_schema import AdjustmentParams, LbsMap

logger = logging.getLogger(__name__)

LBS_CEILING = 1.0 - 1e-6
GC_RANGE = (0.2, 5.0)


class AdjustmentService:
    def estimate_alpha(self, I_l: np.ndarray, I_h: np.ndarray, eps_div: float = EPS_DIV) -> float:
        """
        Global brightness: mean relative gray-level deficit of I_l against I_h, clamped to [0, 1]
        """
        gray_l, gray_h = self._grays(I_l, I_h)
        alpha = float(np.mean(np.abs(gray_h - gray_l) / np.maximum(gray_h, eps_div)))
        return min(max(alpha, 0.0), 1.0)

    def lbs_target(self, I_l: np.ndarray, I_h: np.ndarray, eps_div: float = EPS_DIV) -> LbsMap:
        gray_l, gray_h = self._grays(I_l, I_h)
        deficit = (gray_h - gray_l) / np.maximum(gray_h, eps_div)
        return LbsMap(plane=np.clip(deficit, 0.0, LBS_CEILING))

    def lbs_predict(self, I_l: np.ndarray, guide: np.ndarray, eps_div: float = EPS_DIV) -> LbsMap:
        """
        Closed-form LBS proxy: the target formula with any brightness reference as the
        normal-light stand-in (synthesized guide at test time, groundtruth when evaluating).
        """
        return self.lbs_target(I_l, guide, eps_div)

    def adjust_illumination(self, L: np.ndarray, p: AdjustmentParams) -> np.ndarray:
        exponent = max(1.0 - p.alpha, p.illum_gamma_floor)
        return np.power(np.maximum(np.asarray(L, dtype=np.float64), 0.0), exponent)

    def adjust_reflectance(self, R: np.ndarray, lbs: LbsMap, p: AdjustmentParams) -> np.ndarray:
        """gains o R o (1 + refl_gain * lbs), clipped to [0, 1]"""
        R = np.asarray(R, dtype=np.float64)
        check_same_size(R, lbs.plane, "reflectance and LBS map")
        gains = np.asarray(p.per_channel_gain, dtype=np.float64)
        boost = 1.0 + p.refl_gain * lbs.plane[:, :, None]
        return np.clip(gains * R * boost, 0.0, 1.0)

    def recompose(self, R_adj: np.ndarray, L_adj: np.ndarray) -> np.ndarray:
        check_same_size(R_adj, L_adj, "reflectance and illumination")
        return np.clip(np.asarray(R_adj) * np.asarray(L_adj)[:, :, None], 0.0, 1.0)

    def enhance(self, R: np.ndarray, L: np.ndarray, lbs: LbsMap, p: AdjustmentParams) -> np.ndarray:
        """
        Adjust both components and recompose them.

        Args:
            R: Reflectance, H x W x 3
            L: Illumination plane, H x W
            lbs: Local brightness strength map
            p: Adjustment parameters

        Returns:
            The enhanced image in [0, 1]
        """
        return self.recompose(self.adjust_reflectance(R, lbs, p), self.adjust_illumination(L, p))

    def gamma_correct(self, I: np.ndarray, g: float) -> np.ndarray:
        if g <= 0:
            raise InvalidParameterError(f"Gamma exponent must be positive, got {g}")
        return np.clip(np.power(np.clip(np.asarray(I, dtype=np.float64), 0.0, 1.0), 1.0 / g), 0.0, 1.0)

    def auto_gamma(self, I: np.ndarray, target: float = 0.5, iterations: int = 60) -> float:
        """
        Bisection for the exponent whose gamma-corrected mean luma matches target.
        Mean luma grows with g, so the search clamps to the interval ends when unreachable.
        """
        lo, hi = GC_RANGE
        if self._mean_luma_after_gc(I, lo) >= target:
            return lo
        if self._mean_luma_after_gc(I, hi) <= target:
            return hi
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if self._mean_luma_after_gc(I, mid) < target:
                lo = mid
            else:
                hi = mid
        g = 0.5 * (lo + hi)
        logger.debug(f"Auto gamma exponent {g:.4f} for target mean luma {target}")
        return g

    def _mean_luma_after_gc(self, I: np.ndarray, g: float) -> float:
        return float(np.mean(to_gray(self.gamma_correct(I, g))))

    def _grays(self, I_l: np.ndarray, I_h: np.ndarray):
        I_l = as_color(I_l, "I_l")
        I_h = as_color(I_h, "I_h")
        check_same_size(I_l, I_h, "low-light and reference images")
        return to_gray(I_l), to_gray(I_h)


adjustment_service = AdjustmentService()
