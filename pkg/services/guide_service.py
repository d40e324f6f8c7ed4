"""
Pseudo normal-light guide used as the fine-tuning target when no groundtruth exists:
global brightening, CLAHE on the luma, edge-preserving denoising and a final
re-anchoring of the mean luma.
"""

import logging

import cv2
import numpy as np
from scipy.ndimage import uniform_filter

from config import GuideDefaults
from core.exceptions import InvalidParameterError
from core.image_ops import EPS_DIV, as_color, as_plane, broadcast_plane, to_gray
from schema.finetune_schema import GuideConfig

logger = logging.getLogger(__name__)

REANCHOR_ROUNDS = 8
REANCHOR_TOL = 1e-3


class GuideService:
    def __init__(self):
        self.denoise_eps = GuideDefaults.DENOISE_EPS
        self.denoise_iterations = GuideDefaults.DENOISE_ITERATIONS

    def synthesize_guide(self, I_l: np.ndarray, cfg: GuideConfig) -> np.ndarray:
        """
        Brighten, equalize the luma with CLAHE and denoise.

        Args:
            I_l: Low-light input
            cfg: Target luma, CLAHE grid and clip, denoise radius

        Returns:
            A normal-light stand-in with the same shape as I_l
        """
        I_l = as_color(I_l, "I_l")
        logger.info(f"Synthesizing guide for {I_l.shape[0]}x{I_l.shape[1]} image "
                    f"(target luma {cfg.target_mean_luma}, tiles {cfg.clahe_tiles}, clip {cfg.clahe_clip})")
        bright = self.brighten(I_l, cfg.target_mean_luma)

        luma = to_gray(bright)
        equalized = self.clahe_luma(luma, cfg.clahe_tiles, cfg.clahe_clip)
        contrasted = self._rescale_chroma(bright, luma, equalized)

        smoothed = self.denoise(contrasted, cfg.denoise_radius)
        guide = self._reanchor(smoothed, cfg.target_mean_luma)
        logger.debug(f"Guide mean luma {float(np.mean(to_gray(guide))):.4f}")
        return guide

    def brighten(self, I: np.ndarray, target: float) -> np.ndarray:
        """Scale all channels so the mean luma hits target, then clip"""
        if not 0 < target < 1:
            raise InvalidParameterError(f"Target mean luma must lie in (0, 1), got {target}")
        I = np.asarray(I, dtype=np.float64)
        scale = target / max(float(np.mean(to_gray(I))), EPS_DIV)
        return np.clip(I * scale, 0.0, 1.0)

    def clahe_luma(self, Y: np.ndarray, tiles: int, clip: float) -> np.ndarray:
        """
        Contrast-limited adaptive histogram equalization of a [0, 1] plane on its 8-bit levels.

        Args:
            Y: Luma plane in [0, 1]
            tiles: Tile grid size per axis, capped at the plane's extent
            clip: Clip limit relative to a uniform histogram

        Returns:
            Equalized plane in [0, 1]; a plane at a single 8-bit level is returned unchanged
        """
        Y = np.clip(as_plane(Y, "luma"), 0.0, 1.0)
        if tiles < 1 or clip <= 1:
            raise InvalidParameterError(f"CLAHE needs tiles >= 1 and clip > 1, got {tiles} and {clip}")
        levels = np.floor(Y * 255.0 + 0.5).astype(np.uint8)
        if levels.min() == levels.max():
            return Y.copy()
        h, w = Y.shape
        clahe = cv2.createCLAHE(clipLimit=clip, tileGridSize=(min(tiles, w), min(tiles, h)))
        return clahe.apply(levels).astype(np.float64) / 255.0

    def _rescale_chroma(self, I: np.ndarray, luma: np.ndarray, new_luma: np.ndarray) -> np.ndarray:
        ratio = new_luma / np.maximum(luma, EPS_DIV)
        out = np.where((luma > EPS_DIV)[:, :, None], I * ratio[:, :, None], broadcast_plane(new_luma))
        return np.clip(out, 0.0, 1.0)

    def denoise(self, I: np.ndarray, radius: int) -> np.ndarray:
        """
        Iterated self-guided box filter per channel; radius 0 disables smoothing
        """
        if radius < 0:
            raise InvalidParameterError(f"Denoise radius must be non-negative, got {radius}")
        out = np.asarray(I, dtype=np.float64).copy()
        if radius == 0:
            return out
        size = (2 * radius + 1, 2 * radius + 1)
        for _ in range(self.denoise_iterations):
            for c in range(out.shape[2]):
                out[:, :, c] = self._guided_filter(out[:, :, c], size)
        return np.clip(out, 0.0, 1.0)

    def _guided_filter(self, p: np.ndarray, size) -> np.ndarray:
        mean = uniform_filter(p, size=size, mode="reflect")
        var = np.maximum(uniform_filter(p * p, size=size, mode="reflect") - mean * mean, 0.0)
        a = var / (var + self.denoise_eps)
        b = mean - a * mean
        return uniform_filter(a, size=size, mode="reflect") * p + uniform_filter(b, size=size, mode="reflect")

    def _reanchor(self, I: np.ndarray, target: float) -> np.ndarray:
        out = I
        for _ in range(REANCHOR_ROUNDS):
            if abs(float(np.mean(to_gray(out))) - target) <= REANCHOR_TOL:
                break
            out = self.brighten(out, target)
        return out


guide_service = GuideService()
