"""
Enhance, benchmark and stage-sweep runs: decomposition, optional guide-based
fine-tuning, adjustment, metrics and report emission.
"""

from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Any, Dict, List, Optional
import json
import logging
import os

import numpy as np
from pydantic import BaseModel, ConfigDict

from core.exceptions import ConfigFileError, InvalidParameterError, ManifestError, PipelineError
from core.image_ops import check_same_size
from schema.adjustment_schema import AdjustmentParams, LbsMap
from schema.finetune_schema import FinetuneResult
from schema.run_schema import DatasetEntry, DatasetManifest, EnhanceResult, RunConfig
from schema.solver_schema import DecompositionState
from services.adjustment_service import adjustment_service
from services.finetune_service import finetune_service
from services.guide_service import guide_service
from services.metrics_service import metrics_service
from services.retinex_service import retinex_service
from storage.image_store import image_store

logger = logging.getLogger(__name__)

NON_METRIC_KEYS = ("id", "paired", "error")


class EnhancementRun(BaseModel):
    """Intermediate products of one enhancement, kept for reports and stage outputs"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    enhanced: np.ndarray
    states: List[DecompositionState]
    lbs: LbsMap
    params: AdjustmentParams
    finetune: Optional[FinetuneResult] = None
    gc_exponent: Optional[float] = None

    @property
    def final(self) -> DecompositionState:
        return self.states[-1]


class PipelineService:
    def load_run_config(self, path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
        """
        Built-in/env defaults, then the JSON file, then overrides (nested like RunConfig)
        """
        data: Dict[str, Any] = {}
        if path:
            if not os.path.isfile(path):
                raise ConfigFileError(f"Config file not found: {path}")
            try:
                with open(path, "r", encoding="utf-8") as fh:
                    data = json.load(fh)
            except json.JSONDecodeError as e:
                raise ConfigFileError(f"Config file {path} is not valid JSON: {e}") from e
            if not isinstance(data, dict):
                raise ConfigFileError(f"Config file {path} must hold a JSON object")
        merged = self._deep_merge(data, overrides or {})
        return RunConfig.model_validate(merged)

    def _deep_merge(self, base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
        out = dict(base)
        for key, value in overrides.items():
            if value is None:
                continue
            if isinstance(value, dict):
                nested = out.get(key)
                out[key] = self._deep_merge(nested if isinstance(nested, dict) else {}, value)
            else:
                out[key] = value
        return out

    @contextmanager
    def _phase(self, name: str):
        try:
            yield
        except PipelineError:
            raise
        except Exception as e:
            logger.error(f"Pipeline phase '{name}' failed: {e}")
            raise PipelineError(name, str(e), cause=e) from e

    def enhance_image(self, I_l: np.ndarray, config: RunConfig, gt: Optional[np.ndarray] = None,
                      alpha_override: Optional[float] = None, apply_gc: bool = False) -> EnhancementRun:
        """
        Decompose, pick the adjustment parameters, adjust and recompose.

        Alpha comes from alpha_override, else from the groundtruth when given, else from
        guide-based fine-tuning when enabled, else from adjustment_init. The LBS map is
        predicted against the groundtruth when given, else against the synthesized guide.

        Args:
            I_l: Low-light H x W x 3 image
            config: Run configuration
            gt: Optional normal-light groundtruth of the same size
            alpha_override: Fixed alpha that disables fine-tuning
            apply_gc: Gamma-correct the result with the auto exponent

        Returns:
            EnhancementRun with the enhanced image and its intermediate products
        """
        with self._phase("decompose"):
            states = retinex_service.decompose(I_l, config.solver)
        final = states[-1]

        with self._phase("guide"):
            if gt is not None:
                # the groundtruth is the brightness reference when it is available
                guide = gt
            else:
                guide = guide_service.synthesize_guide(I_l, config.guide)
            lbs = adjustment_service.lbs_predict(I_l, guide)

        params = config.adjustment_init
        tuned = None
        if alpha_override is not None:
            params = params.model_copy(update={"alpha": float(alpha_override)})
        elif gt is not None:
            with self._phase("adjust"):
                params = params.model_copy(update={"alpha": adjustment_service.estimate_alpha(I_l, gt)})
        elif config.finetune_enabled:
            with self._phase("finetune"):
                tuned = finetune_service.finetune(final, I_l, guide, params, config.finetune_iters)
            params = tuned.params

        gc_exponent = None
        with self._phase("adjust"):
            enhanced = adjustment_service.enhance(final.R, final.L, lbs, params)
            if apply_gc:
                gc_exponent = adjustment_service.auto_gamma(enhanced, config.guide.target_mean_luma)
                enhanced = adjustment_service.gamma_correct(enhanced, gc_exponent)

        return EnhancementRun(enhanced=enhanced, states=states, lbs=lbs, params=params,
                              finetune=tuned, gc_exponent=gc_exponent)

    def cmd_enhance(self, input_path: str, config: RunConfig, alpha_override: Optional[float] = None) -> EnhanceResult:
        """
        Enhance one image file and write the PNG and JSON report next to each other.

        Args:
            input_path: PNG or PPM file to enhance
            config: Resolved run configuration; output_dir receives the files
            alpha_override: Fixed global brightness that skips fine-tuning

        Returns:
            Paths of everything written plus the alpha that was used
        """
        image_id = os.path.splitext(os.path.basename(input_path))[0]
        logger.info(f"Enhancing {input_path} into {config.output_dir}")
        with self._phase("load"):
            I_l = image_store.load_image(input_path)

        run = self.enhance_image(I_l, config, alpha_override=alpha_override, apply_gc=config.apply_gc)

        with self._phase("metrics"):
            losses = {}
            extras: Dict[str, Any] = {
                "alpha": run.params.alpha,
                "refl_gain": run.params.refl_gain,
                "per_channel_gain": list(run.params.per_channel_gain),
                "objective": run.final.objective,
                "stages": run.final.stage,
            }
            if run.finetune is not None:
                losses["loss_finetune"] = run.finetune.final_loss
                extras["finetune_trace"] = run.finetune.loss_trace
            if run.gc_exponent is not None:
                extras["gc_exponent"] = run.gc_exponent
            report = metrics_service.evaluate_pair(run.enhanced, I_l, losses=losses, extras=extras)

        with self._phase("save"):
            os.makedirs(config.output_dir, exist_ok=True)
            prefix = os.path.join(config.output_dir, image_id)
            result = EnhanceResult(
                enhanced_path=f"{prefix}_enhanced.png",
                report_path=f"{prefix}_report.json",
                alpha=run.params.alpha,
                finetuned=run.finetune is not None,
            )
            image_store.save_image(run.enhanced, result.enhanced_path)
            image_store.save_json({"id": image_id, **report.to_flat_dict()}, result.report_path)
            if config.emit_stage_trace:
                result = result.model_copy(update={
                    "reflectance_path": f"{prefix}_reflectance.png",
                    "illumination_path": f"{prefix}_illumination.png",
                    "lbs_path": f"{prefix}_lbs.png",
                    "trace_path": f"{prefix}_trace.json",
                })
                image_store.save_image(run.final.R, result.reflectance_path)
                image_store.save_plane(run.final.L, result.illumination_path)
                image_store.save_plane(run.lbs.plane, result.lbs_path)
                image_store.save_json([state.trace_row() for state in run.states], result.trace_path)

        logger.info(f"Enhanced {image_id}: alpha={run.params.alpha:.4f}, outputs in {config.output_dir}")
        return result

    def benchmark_entry(self, entry: DatasetEntry, config: RunConfig) -> Dict[str, Any]:
        """One report row; failures are recorded in the row instead of raised"""
        row: Dict[str, Any] = {"id": entry.id, "paired": entry.paired}
        try:
            row.update(self._evaluate_entry(entry, config))
        except PipelineError as e:
            logger.warning(f"Benchmark entry '{entry.id}' failed: {e}")
            row["error"] = str(e)
        return row

    def _evaluate_entry(self, entry: DatasetEntry, config: RunConfig) -> Dict[str, Any]:
        with self._phase("load"):
            I_l = image_store.load_image(entry.low_path)
            I_h = image_store.load_image(entry.high_path) if entry.paired else None
            if I_h is not None:
                check_same_size(I_l, I_h, f"low/high pair '{entry.id}'")

        run = self.enhance_image(I_l, config, gt=I_h)
        row: Dict[str, Any] = {"alpha": run.params.alpha}

        with self._phase("metrics"):
            losses: Dict[str, float] = {}
            if I_h is not None:
                losses = self._paired_losses(run, I_l, I_h, config)
            elif run.finetune is not None:
                losses["loss_finetune"] = run.finetune.final_loss
            report = metrics_service.evaluate_pair(run.enhanced, I_l, gt=I_h, losses=losses)
            row.update(report.to_flat_dict())

            if config.apply_gc:
                gc_exponent = run.gc_exponent
                enhanced_gc = run.enhanced
                if gc_exponent is None:
                    gc_exponent = adjustment_service.auto_gamma(run.enhanced, config.guide.target_mean_luma)
                    enhanced_gc = adjustment_service.gamma_correct(run.enhanced, gc_exponent)
                gc_report = metrics_service.evaluate_pair(enhanced_gc, I_l, gt=I_h)
                row["gc_exponent"] = gc_exponent
                for key, value in gc_report.to_flat_dict().items():
                    row[f"{key}_gc"] = value
        return row

    def _paired_losses(self, run: EnhancementRun, I_l: np.ndarray, I_h: np.ndarray,
                       config: RunConfig) -> Dict[str, float]:
        w = config.weights
        states_h = retinex_service.decompose(I_h, config.solver)
        final_h = states_h[-1]
        L_adj = adjustment_service.adjust_illumination(run.final.L, run.params)
        R_adj = adjustment_service.adjust_reflectance(run.final.R, run.lbs, run.params)
        target = adjustment_service.lbs_target(I_l, I_h)

        terms = {
            "loss_illumination_adjust": metrics_service.loss_illumination_adjust(L_adj, final_h.L),
            "loss_reflectance_adjust": metrics_service.loss_reflectance_adjust(R_adj, final_h.R),
            "loss_lbs": metrics_service.loss_lbs(run.lbs.plane, target.plane),
            "loss_enhancement": metrics_service.loss_enhancement(run.enhanced, I_h),
        }
        terms["adjustment_loss"] = metrics_service.adjustment_loss(
            terms["loss_illumination_adjust"], terms["loss_reflectance_adjust"],
            terms["loss_lbs"], terms["loss_enhancement"], w,
        )
        terms["decomposition_loss"] = metrics_service.decomposition_loss(run.states, states_h, I_l, I_h, w)
        return terms

    def _run_rows(self, manifest: DatasetManifest, config: RunConfig) -> List[Dict[str, Any]]:
        if not manifest.entries:
            raise ManifestError("Manifest has no entries to benchmark")
        workers = min(config.workers, len(manifest.entries))
        logger.info(f"Benchmarking {len(manifest.entries)} entries with {workers} workers")
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda entry: self.benchmark_entry(entry, config), manifest.entries))

    def mean_row(self, rows: List[Dict[str, Any]]) -> Dict[str, Any]:
        """Arithmetic mean of every numeric key over the rows that carry it"""
        sums: Dict[str, float] = {}
        counts: Dict[str, int] = {}
        for row in rows:
            for key, value in row.items():
                if key in NON_METRIC_KEYS or isinstance(value, bool) or not isinstance(value, (int, float)):
                    continue
                sums[key] = sums.get(key, 0.0) + float(value)
                counts[key] = counts.get(key, 0) + 1
        mean: Dict[str, Any] = {key: sums[key] / counts[key] for key in sums}
        mean["id"] = "mean"
        return mean

    def cmd_benchmark(self, manifest: DatasetManifest, config: RunConfig, out_path: Optional[str] = None) -> str:
        """
        Evaluate every manifest entry and write one JSON report with per-entry rows and means.

        Args:
            manifest: Entries to evaluate; paired entries also get full-reference metrics
            config: Resolved run configuration
            out_path: Report location, defaults to benchmark_report.json in output_dir

        Returns:
            The path of the written report
        """
        rows = self._run_rows(manifest, config)
        failed = sum(1 for row in rows if "error" in row)
        report = {
            "rows": rows,
            "mean": self.mean_row(rows),
            "failed_entries": failed,
            "config": config.model_dump(mode="json", by_alias=True),
        }
        out_path = out_path or os.path.join(config.output_dir, "benchmark_report.json")
        with self._phase("save"):
            parent = os.path.dirname(out_path)
            if parent:
                os.makedirs(parent, exist_ok=True)
            image_store.save_json(report, out_path)
        logger.info(f"Benchmark report written to {out_path} ({failed} failed entries)")
        return out_path

    def cmd_stage_sweep(self, manifest: DatasetManifest, config: RunConfig, stages: List[int],
                        out_path: Optional[str] = None) -> str:
        """Benchmark means for several stage counts side by side"""
        if not stages or any(k < 1 for k in stages):
            raise InvalidParameterError(f"Stage counts must be positive integers, got {stages}")
        sweep: Dict[str, Any] = {}
        for k in stages:
            logger.info(f"Stage sweep: running the benchmark with {k} stages")
            cfg_k = config.model_copy(update={"solver": config.solver.model_copy(update={"stages": k})})
            sweep[str(k)] = self.mean_row(self._run_rows(manifest, cfg_k))

        out_path = out_path or os.path.join(config.output_dir, "stage_sweep.json")
        with self._phase("save"):
            parent = os.path.dirname(out_path)
            if parent:
                os.makedirs(parent, exist_ok=True)
            image_store.save_json({"stages": sweep}, out_path)
        return out_path


pipeline_service = PipelineService()
