from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Tuple
import numpy as np

from config import AdjustmentDefaults


class AdjustmentParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(default=AdjustmentDefaults.ALPHA, ge=0, le=1)
    illum_gamma_floor: float = Field(default=AdjustmentDefaults.GAMMA_FLOOR, gt=0, le=1)
    refl_gain: float = Field(default=AdjustmentDefaults.REFL_GAIN, ge=0)
    per_channel_gain: Tuple[float, float, float] = (1.0, 1.0, 1.0)

    @field_validator("per_channel_gain")
    @classmethod
    def _gain_in_box(cls, value):
        for gain in value:
            if not AdjustmentDefaults.GAIN_MIN <= gain <= AdjustmentDefaults.GAIN_MAX:
                raise ValueError(
                    f"per-channel gains must lie in [{AdjustmentDefaults.GAIN_MIN}, {AdjustmentDefaults.GAIN_MAX}], got {value}"
                )
        return value

    @classmethod
    def identity(cls) -> "AdjustmentParams":
        return cls(alpha=0.0, refl_gain=0.0, per_channel_gain=(1.0, 1.0, 1.0))


class LbsMap(BaseModel):
    """Relative brightness deficit per pixel, values in [0, 1)"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    plane: np.ndarray

    @model_validator(mode="after")
    def _in_range(self):
        if self.plane.ndim != 2:
            raise ValueError(f"LBS map must be H x W, got {self.plane.shape}")
        if np.any(self.plane < 0) or np.any(self.plane >= 1):
            raise ValueError("LBS values must lie in [0, 1)")
        return self
