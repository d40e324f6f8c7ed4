from typing import Optional
import logging

import numpy as np
from scipy.ndimage import gaussian_filter

from core.exceptions import InvalidParameterError
from core.image_ops import to_gray
from schema.solver_schema import GaussianSmoothProx, IdentityProx, ProxChoice, WeightedSmoothProx

logger = logging.getLogger(__name__)


class ProxService:
    """
    Explicit proximal operators standing in for the learned prior modules.
    Every operator ends with the projection onto the non-negative orthant.
    """

    def apply_prox(self, x: np.ndarray, choice: ProxChoice, reference: Optional[np.ndarray] = None) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if isinstance(choice, IdentityProx):
            out = x
        elif isinstance(choice, GaussianSmoothProx):
            out = self.gaussian_smooth(x, choice.width)
        elif isinstance(choice, WeightedSmoothProx):
            out = self.weighted_smooth(x, choice.strength, choice.edge_sigma, reference)
        else:
            raise InvalidParameterError(f"Unknown proximal operator: {choice!r}")
        return np.maximum(out, 0.0)

    def gaussian_smooth(self, x: np.ndarray, width: float) -> np.ndarray:
        sigma = (width, width) if x.ndim == 2 else (width, width, 0.0)
        return gaussian_filter(x, sigma=sigma, mode="nearest")

    def weighted_smooth(self, x: np.ndarray, strength: float, edge_sigma: float,
                        reference: Optional[np.ndarray] = None) -> np.ndarray:
        """
        One Jacobi step of (Id + strength * L_w) u = x started at u = x, where L_w is the
        graph Laplacian with edge weights exp(-|grad ref| / edge_sigma) frozen from the reference.
        """
        ref = x if reference is None else np.asarray(reference, dtype=np.float64)
        if ref.ndim == 3:
            ref = to_gray(ref)
        if ref.shape != x.shape[:2]:
            raise InvalidParameterError(f"Reference {ref.shape} does not match operand {x.shape[:2]}")

        w_vert = strength * np.exp(-np.abs(np.diff(ref, axis=0)) / edge_sigma)
        w_horz = strength * np.exp(-np.abs(np.diff(ref, axis=1)) / edge_sigma)
        if x.ndim == 3:
            w_vert = w_vert[:, :, None]
            w_horz = w_horz[:, :, None]

        num = x.copy()
        den = np.ones_like(x)
        num[:-1] += w_vert * x[1:]
        num[1:] += w_vert * x[:-1]
        den[:-1] += w_vert
        den[1:] += w_vert
        num[:, :-1] += w_horz * x[:, 1:]
        num[:, 1:] += w_horz * x[:, :-1]
        den[:, :-1] += w_horz
        den[:, 1:] += w_horz
        return num / den


prox_service = ProxService()
