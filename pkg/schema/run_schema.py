from pydantic import BaseModel, Field, model_validator
from typing import Any, Dict, List, Optional

from config import RuntimeConfig
from schema.adjustment_schema import AdjustmentParams
from schema.finetune_schema import GuideConfig
from schema.metrics_schema import LossWeights
from schema.solver_schema import SolverConfig


class DatasetEntry(BaseModel):
    id: str
    low_path: str
    high_path: Optional[str] = None

    @property
    def paired(self) -> bool:
        return self.high_path is not None


class DatasetManifest(BaseModel):
    entries: List[DatasetEntry]

    @model_validator(mode="after")
    def _unique_ids(self):
        seen = set()
        for entry in self.entries:
            if entry.id in seen:
                raise ValueError(f"Duplicate manifest id: {entry.id}")
            seen.add(entry.id)
        return self


class RunConfig(BaseModel):
    solver: SolverConfig = Field(default_factory=SolverConfig)
    weights: LossWeights = Field(default_factory=LossWeights)
    guide: GuideConfig = Field(default_factory=GuideConfig)
    adjustment_init: AdjustmentParams = Field(default_factory=AdjustmentParams)
    finetune_enabled: bool = False
    finetune_iters: int = Field(default=RuntimeConfig.FINETUNE_ITERS, ge=1)
    apply_gc: bool = False
    output_dir: str = RuntimeConfig.OUTPUT_DIR
    emit_stage_trace: bool = False
    workers: int = Field(default=RuntimeConfig.BENCHMARK_WORKERS, ge=1)


class EnhanceResult(BaseModel):
    enhanced_path: str
    report_path: str
    reflectance_path: Optional[str] = None
    illumination_path: Optional[str] = None
    lbs_path: Optional[str] = None
    trace_path: Optional[str] = None
    alpha: float
    finetuned: bool = False

    def output_paths(self) -> List[str]:
        paths = [self.enhanced_path, self.report_path]
        for extra in (self.reflectance_path, self.illumination_path, self.lbs_path, self.trace_path):
            if extra:
                paths.append(extra)
        return paths


class EnhanceRequest(BaseModel):
    input_path: str
    config_path: Optional[str] = None
    alpha: Optional[float] = Field(default=None, ge=0, le=1)
    finetune: Optional[bool] = None
    out_dir: Optional[str] = None


class BenchmarkRequest(BaseModel):
    manifest_path: str
    config_path: Optional[str] = None
    apply_gc: Optional[bool] = None
    out: Optional[str] = None


class BenchmarkResponse(BaseModel):
    success: bool
    report_path: str
    mean: Dict[str, Any]
    failed_entries: int
