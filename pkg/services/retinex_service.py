from typing import Callable, List, Tuple
import logging

import numpy as np

from core.exceptions import DimensionMismatchError, SolverDivergenceError
from core.image_ops import (
    EPS_DIV,
    DifferenceKernel,
    as_color,
    channel_max,
    check_same_size,
    diff_conv,
    diff_conv_transpose,
    safe_divide,
)
from schema.solver_schema import AmplifiedGradient, DecompositionState, SolverConfig
from services.prox_service import prox_service

logger = logging.getLogger(__name__)

AXES = (DifferenceKernel.VERTICAL, DifferenceKernel.HORIZONTAL)


class RetinexService:
    """
    Alternating proximal-Newton solver for

        min_{R,L} 1/2 ||I - R o L||^2 + gamma/4 sum_i ||d_i (x) R - G_i||^2

    with L a single plane shared by the three reflectance channels.
    """

    def amplified_gradient(self, I: np.ndarray, lam: float, sigma: float) -> AmplifiedGradient:
        """
        G_i = (1 + lam * exp(-|d_i (x) I| / sigma)) o (d_i (x) I), per channel and axis
        """
        I = as_color(I, "I")
        fields = []
        for kernel in AXES:
            grad = diff_conv(I, kernel)
            fields.append((1.0 + lam * np.exp(-np.abs(grad) / sigma)) * grad)
        return AmplifiedGradient(gx=fields[0], gy=fields[1])

    def newton_dir_L(self, R: np.ndarray, L: np.ndarray, I: np.ndarray,
                     eps_div: float = EPS_DIV, reduction: str = "weighted") -> np.ndarray:
        self._check_operands(R, L, I)
        L3 = L[:, :, None]
        grad = R * (R * L3 - I)
        if reduction == "mean":
            return np.mean(safe_divide(grad, R * R, eps_div), axis=2)
        # exact Newton direction for the shared plane: summed gradient over summed curvature
        return safe_divide(np.sum(grad, axis=2), np.sum(R * R, axis=2), eps_div)

    def newton_dir_R(self, R: np.ndarray, L: np.ndarray, I: np.ndarray, G: AmplifiedGradient,
                     gamma: float, eps_div: float = EPS_DIV) -> np.ndarray:
        """
        Diagonally scaled gradient step for the reflectance.

        Args:
            R: Current reflectance
            L: Current illumination plane
            I: Observed image
            G: Amplified gradient targets
            gamma: Gradient prior weight
            eps_div: Floor of the denominator

        Returns:
            The direction d_R; the update is R - eta * d_R
        """
        self._check_operands(R, L, I)
        L3 = L[:, :, None]
        numerator = (R * L3 - I) * L3
        if gamma > 0:
            prior = np.zeros_like(R)
            for kernel, g_field in zip(AXES, (G.gx, G.gy)):
                prior += diff_conv_transpose(diff_conv(R, kernel) - g_field, kernel)
            numerator = numerator + 0.5 * gamma * prior
        # L o L + 4 gamma E bounds the Hessian since eig(d_i^T d_i) <= 4
        return safe_divide(numerator, L3 * L3 + 4.0 * gamma, eps_div)

    def objective(self, R: np.ndarray, L: np.ndarray, I: np.ndarray, G: AmplifiedGradient,
                  cfg: SolverConfig) -> float:
        self._check_operands(R, L, I)
        value = 0.5 * float(np.sum((I - R * L[:, :, None]) ** 2))
        if cfg.gamma > 0:
            prior = 0.0
            for kernel, g_field in zip(AXES, (G.gx, G.gy)):
                prior += float(np.sum((diff_conv(R, kernel) - g_field) ** 2))
            value += 0.25 * cfg.gamma * prior
        return value

    def initialize(self, I: np.ndarray, eps_div: float = EPS_DIV) -> Tuple[np.ndarray, np.ndarray]:
        """Max-channel illumination and the matching reflectance"""
        L0 = channel_max(I)
        R0 = safe_divide(I, L0[:, :, None], eps_div)
        return R0, L0

    def decompose(self, I: np.ndarray, cfg: SolverConfig) -> List[DecompositionState]:
        """
        Run cfg.stages iterations of the L-update then R-update.

        Args:
            I: Observed H x W x 3 image
            cfg: Solver scalars, stage count and proximal choices

        Returns:
            The initial state followed by one state per stage; every R lies in [0, 1]
        """
        I = as_color(I, "I")
        logger.info(f"Decomposing {I.shape[0]}x{I.shape[1]} image over {cfg.stages} stages "
                    f"(gamma={cfg.gamma}, safeguard={cfg.safeguard})")
        G = self.amplified_gradient(I, cfg.lam, cfg.sigma)
        R, L = self.initialize(I, cfg.eps_div)
        f_cur = self.objective(R, L, I, G, cfg)
        if not np.isfinite(f_cur):
            raise SolverDivergenceError(0, "objective is not finite at initialization")
        states = [DecompositionState(stage=0, L=L, R=R, objective=f_cur)]

        for k in range(1, cfg.stages + 1):
            d_L = self.newton_dir_L(R, L, I, cfg.eps_div, cfg.l_reduction)
            L, f_cur, halvings_l, exhausted_l = self._safeguarded_step(
                lambda eta: prox_service.apply_prox(L - eta * d_L, cfg.prox_l, reference=I),
                lambda L_try: self.objective(R, L_try, I, G, cfg),
                cfg.eta1, f_cur, cfg, k, "L",
            )

            d_R = self.newton_dir_R(R, L, I, G, cfg.gamma, cfg.eps_div)
            # reflectance stays in the [0, 1] box
            R, f_cur, halvings_r, exhausted_r = self._safeguarded_step(
                lambda eta: np.minimum(prox_service.apply_prox(R - eta * d_R, cfg.prox_r, reference=I), 1.0),
                lambda R_try: self.objective(R_try, L, I, G, cfg),
                cfg.eta2, f_cur, cfg, k, "R",
            )

            states.append(DecompositionState(
                stage=k, L=L, R=R, objective=f_cur,
                halvings_l=halvings_l, halvings_r=halvings_r,
                safeguard_exhausted=exhausted_l or exhausted_r,
            ))
            logger.debug(f"Stage {k}: objective={f_cur:.6e} halvings=({halvings_l}, {halvings_r})")

        logger.info(f"Decomposition finished: objective {states[0].objective:.6e} -> {f_cur:.6e}")
        return states

    def _safeguarded_step(self, trial: Callable[[float], np.ndarray], evaluate: Callable[[np.ndarray], float],
                          eta: float, f_cur: float, cfg: SolverConfig, stage: int,
                          block: str) -> Tuple[np.ndarray, float, int, bool]:
        if not cfg.safeguard:
            candidate = trial(eta)
            f_new = evaluate(candidate)
            self._ensure_finite(f_new, stage, block)
            return candidate, f_new, 0, False

        for halvings in range(cfg.max_halvings + 1):
            candidate = trial(eta)
            f_new = evaluate(candidate)
            if f_new <= f_cur:
                return candidate, f_new, halvings, False
            eta *= 0.5

        logger.warning(f"Stage {stage}: {block}-update still increases the objective after "
                       f"{cfg.max_halvings} halvings, accepting the last trial")
        self._ensure_finite(f_new, stage, block)
        return candidate, f_new, cfg.max_halvings, True

    def _ensure_finite(self, value: float, stage: int, block: str) -> None:
        if not np.isfinite(value):
            logger.error(f"Objective became non-finite in the {block}-update of stage {stage}")
            raise SolverDivergenceError(stage, f"non-finite objective after the {block}-update")

    def _check_operands(self, R: np.ndarray, L: np.ndarray, I: np.ndarray) -> None:
        if R.shape != I.shape:
            raise DimensionMismatchError(f"R {R.shape} and I {I.shape} differ")
        check_same_size(L, I, "L and I")
        if L.ndim != 2:
            raise DimensionMismatchError(f"L must be a single plane, got shape {L.shape}")


retinex_service = RetinexService()
