from pydantic import BaseModel, Field
from typing import Any, Dict, Optional

from config import LossDefaults


class LossWeights(BaseModel):
    gamma_R: float = Field(default=LossDefaults.GAMMA_R, ge=0)
    gamma_L: float = Field(default=LossDefaults.GAMMA_L, ge=0)
    gamma_rec: float = Field(default=LossDefaults.GAMMA_REC, ge=0)
    eta_L: float = Field(default=LossDefaults.ETA_L, ge=0)
    eta_R: float = Field(default=LossDefaults.ETA_R, ge=0)
    eta_lbs: float = Field(default=LossDefaults.ETA_LBS, ge=0)
    eta_en: float = Field(default=LossDefaults.ETA_EN, ge=0)
    eps_grad: float = Field(default=LossDefaults.EPS_GRAD, gt=0)


class MetricsReport(BaseModel):
    psnr: Optional[float] = None
    ssim: Optional[float] = Field(default=None, ge=-1, le=1)
    loe: float = Field(ge=0)
    loe_ref: Optional[float] = Field(default=None, ge=0)
    losses: Dict[str, float] = Field(default_factory=dict)
    extras: Dict[str, Any] = Field(default_factory=dict)

    def to_flat_dict(self) -> Dict[str, Any]:
        """
        Flat snake_case JSON object: metric keys, one key per named loss, then extras
        """
        flat: Dict[str, Any] = {"loe": self.loe}
        if self.psnr is not None:
            flat["psnr"] = self.psnr
        if self.ssim is not None:
            flat["ssim"] = self.ssim
        if self.loe_ref is not None:
            flat["loe_ref"] = self.loe_ref
        flat.update(self.losses)
        flat.update(self.extras)
        return flat
