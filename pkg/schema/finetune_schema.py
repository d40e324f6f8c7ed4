from pydantic import BaseModel, ConfigDict, Field, field_validator
from typing import List

from config import GuideDefaults
from schema.adjustment_schema import AdjustmentParams


class GuideConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    target_mean_luma: float = Field(default=GuideDefaults.TARGET_LUMA, gt=0, lt=1)
    clahe_tiles: int = Field(default=GuideDefaults.CLAHE_TILES, ge=1)
    clahe_clip: float = Field(default=GuideDefaults.CLAHE_CLIP, gt=1)
    denoise_radius: int = Field(default=GuideDefaults.DENOISE_RADIUS, ge=0)


class FinetuneResult(BaseModel):
    params: AdjustmentParams
    loss_trace: List[float]
    iterations: int = Field(ge=0)

    @field_validator("loss_trace")
    @classmethod
    def _non_empty(cls, value):
        if not value:
            raise ValueError("loss_trace must not be empty")
        return value

    @property
    def final_loss(self) -> float:
        return self.loss_trace[-1]
