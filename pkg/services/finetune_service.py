from typing import Callable, Tuple
import logging
import math

import numpy as np

from config import AdjustmentDefaults, RuntimeConfig
from core.exceptions import DimensionMismatchError, FinetuneDivergenceError, InvalidParameterError
from core.image_ops import EPS_DIV, as_color
from schema.adjustment_schema import AdjustmentParams, LbsMap
from schema.finetune_schema import FinetuneResult
from schema.solver_schema import DecompositionState
from services.adjustment_service import adjustment_service

logger = logging.getLogger(__name__)

GOLDEN_EVALUATIONS = 32
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class FinetuneService:
    """
    Test-time fine-tuning of the adjustment parameters against a guide image.
    The decomposition is frozen; only alpha, the channel gains and refl_gain move.
    """

    def finetune_loss(self, en: np.ndarray, guide: np.ndarray) -> float:
        if np.shape(en) != np.shape(guide):
            raise DimensionMismatchError(f"Enhanced {np.shape(en)} and guide {np.shape(guide)} differ")
        return float(np.sum((np.asarray(en) - guide) ** 2)) / float(en.shape[0] * en.shape[1])

    def finetune(self, decomp: DecompositionState, I_l: np.ndarray, guide: np.ndarray,
                 init: AdjustmentParams, iters: int = RuntimeConfig.FINETUNE_ITERS) -> FinetuneResult:
        """
        Coordinate search of the adjustment parameters against the guide.

        Args:
            decomp: Final decomposition state of the low-light image
            I_l: Low-light input
            guide: Synthesized brightness reference
            init: Starting parameters
            iters: Number of coordinate rounds

        Returns:
            The best parameters with a non-increasing loss trace of iters + 1 entries
        """
        if iters < 1:
            raise InvalidParameterError(f"Fine-tuning needs at least one iteration, got {iters}")
        I_l = as_color(I_l, "I_l")
        guide = as_color(guide, "guide")
        lbs = adjustment_service.lbs_predict(I_l, guide)

        def loss(p: AdjustmentParams) -> float:
            return self.finetune_loss(adjustment_service.enhance(decomp.R, decomp.L, lbs, p), guide)

        params = init
        f_cur = loss(params)
        self._ensure_finite(f_cur, 0)
        trace = [f_cur]
        logger.info(f"Fine-tuning adjustment for {iters} iterations, initial loss {f_cur:.6e}")

        for it in range(1, iters + 1):
            f_start = f_cur
            params, f_cur = self._search_scalar(params, f_cur, "alpha", 0.0, 1.0, loss)
            params, f_cur = self._update_gains(params, f_cur, decomp, lbs, guide, loss)
            params, f_cur = self._search_scalar(params, f_cur, "refl_gain", 0.0, AdjustmentDefaults.REFL_GAIN_MAX, loss)
            self._ensure_finite(f_cur, it)
            trace.append(f_cur)
            logger.debug(f"Iteration {it}: loss={f_cur:.6e} alpha={params.alpha:.4f} refl_gain={params.refl_gain:.4f}")
            if f_cur >= f_start:
                # coordinate steps are deterministic, so a stalled round stays stalled
                trace.extend([f_cur] * (iters - it))
                logger.info(f"Fine-tuning converged after {it} iterations")
                return FinetuneResult(params=params, loss_trace=trace, iterations=it)

        logger.info(f"Fine-tuning finished: loss {trace[0]:.6e} -> {f_cur:.6e}, alpha={params.alpha:.4f}")
        return FinetuneResult(params=params, loss_trace=trace, iterations=iters)

    def _search_scalar(self, params: AdjustmentParams, f_cur: float, field: str, lo: float, hi: float,
                       loss: Callable[[AdjustmentParams], float]) -> Tuple[AdjustmentParams, float]:
        x_best, f_best = self.golden_section(lambda x: loss(params.model_copy(update={field: x})), lo, hi)
        if f_best < f_cur:
            return params.model_copy(update={field: x_best}), f_best
        return params, f_cur

    def _update_gains(self, params: AdjustmentParams, f_cur: float, decomp: DecompositionState, lbs: LbsMap,
                      guide: np.ndarray, loss: Callable[[AdjustmentParams], float]) -> Tuple[AdjustmentParams, float]:
        """Ratio of guide to enhanced channel means, clamped to the gain box"""
        en = adjustment_service.enhance(decomp.R, decomp.L, lbs, params)
        ratio = np.mean(guide, axis=(0, 1)) / np.maximum(np.mean(en, axis=(0, 1)), EPS_DIV)
        gains = np.clip(np.asarray(params.per_channel_gain) * ratio,
                        AdjustmentDefaults.GAIN_MIN, AdjustmentDefaults.GAIN_MAX)
        candidate = params.model_copy(update={"per_channel_gain": tuple(float(g) for g in gains)})
        f_new = loss(candidate)
        if f_new < f_cur:
            return candidate, f_new
        return params, f_cur

    def golden_section(self, fn: Callable[[float], float], lo: float, hi: float,
                       evaluations: int = GOLDEN_EVALUATIONS) -> Tuple[float, float]:
        """
        Golden-section search over [lo, hi]; returns the best point evaluated.
        """
        a, b = lo, hi
        x1 = b - INV_PHI * (b - a)
        x2 = a + INV_PHI * (b - a)
        f1, f2 = fn(x1), fn(x2)
        best = min((f1, x1), (f2, x2))
        for _ in range(evaluations - 2):
            if f1 <= f2:
                b, x2, f2 = x2, x1, f1
                x1 = b - INV_PHI * (b - a)
                f1 = fn(x1)
                best = min(best, (f1, x1))
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + INV_PHI * (b - a)
                f2 = fn(x2)
                best = min(best, (f2, x2))
        return best[1], best[0]

    def _ensure_finite(self, value: float, iteration: int) -> None:
        if not np.isfinite(value):
            logger.error(f"Fine-tuning loss became non-finite at iteration {iteration}")
            raise FinetuneDivergenceError(iteration, "non-finite fine-tuning loss")


finetune_service = FinetuneService()
