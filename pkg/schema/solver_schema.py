from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Annotated, Literal, Union
import numpy as np

from config import SolverDefaults


class IdentityProx(BaseModel):
    model_config = ConfigDict(frozen=True)
    kind: Literal["identity"] = "identity"


class GaussianSmoothProx(BaseModel):
    model_config = ConfigDict(frozen=True)
    kind: Literal["gaussian_smooth"] = "gaussian_smooth"
    width: float = Field(gt=0)


class WeightedSmoothProx(BaseModel):
    model_config = ConfigDict(frozen=True)
    kind: Literal["weighted_smooth"] = "weighted_smooth"
    strength: float = Field(gt=0)
    edge_sigma: float = Field(default=0.1, gt=0)


ProxChoice = Annotated[
    Union[IdentityProx, GaussianSmoothProx, WeightedSmoothProx],
    Field(discriminator="kind"),
]


class SolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    gamma: float = Field(default=SolverDefaults.GAMMA, ge=0)
    # "lambda" is a keyword; JSON configs still use the plain name
    lam: float = Field(default=SolverDefaults.LAMBDA, ge=0, alias="lambda")
    sigma: float = Field(default=SolverDefaults.SIGMA, gt=0)
    eta1: float = Field(default=SolverDefaults.ETA1, gt=0)
    eta2: float = Field(default=SolverDefaults.ETA2, gt=0)
    stages: int = Field(default=SolverDefaults.STAGES, ge=1)
    eps_div: float = Field(default=SolverDefaults.EPS_DIV, gt=0)
    prox_l: ProxChoice = Field(default_factory=IdentityProx)
    prox_r: ProxChoice = Field(default_factory=IdentityProx)
    safeguard: bool = SolverDefaults.SAFEGUARD
    max_halvings: int = Field(default=SolverDefaults.MAX_HALVINGS, ge=0)
    l_reduction: Literal["weighted", "mean"] = "weighted"


class AmplifiedGradient(BaseModel):
    """G_x (vertical) and G_y (horizontal), channels last"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    gx: np.ndarray
    gy: np.ndarray

    @model_validator(mode="after")
    def _same_shape(self):
        if self.gx.shape != self.gy.shape:
            raise ValueError(f"gx {self.gx.shape} and gy {self.gy.shape} differ")
        return self


class DecompositionState(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    stage: int = Field(ge=0)
    L: np.ndarray
    R: np.ndarray
    objective: float
    halvings_l: int = 0
    halvings_r: int = 0
    safeguard_exhausted: bool = False

    @model_validator(mode="after")
    def _check_invariants(self):
        if self.L.ndim != 2 or self.R.ndim != 3 or self.R.shape[2] != 3:
            raise ValueError(f"L must be H x W and R H x W x 3, got {self.L.shape} and {self.R.shape}")
        if self.L.shape != self.R.shape[:2]:
            raise ValueError(f"L {self.L.shape} and R {self.R.shape[:2]} differ in size")
        if np.any(self.L < 0) or np.any(self.R < 0):
            raise ValueError("illumination and reflectance must be non-negative")
        if not np.isfinite(self.objective):
            raise ValueError("objective must be finite")
        return self

    def trace_row(self) -> dict:
        return {
            "stage": self.stage,
            "objective": self.objective,
            "halvings_l": self.halvings_l,
            "halvings_r": self.halvings_r,
            "safeguard_exhausted": self.safeguard_exhausted,
        }
