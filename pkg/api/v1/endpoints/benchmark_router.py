#!/usr/bin/env python3
"""
Benchmark Router for manifest-driven evaluation runs
"""

from fastapi import APIRouter
from api.v1.endpoints.error_mapping import to_http_exception
from schema.run_schema import BenchmarkRequest, BenchmarkResponse
from services.pipeline_service import pipeline_service
from storage.image_store import image_store
import json
import logging

logger = logging.getLogger(__name__)

router = APIRouter()

@router.post("/benchmark", response_model=BenchmarkResponse)
def run_benchmark(request: BenchmarkRequest):
    """
    Run the benchmark over a manifest and return the mean row of the written report
    """
    try:
        logger.info(f"Benchmark request for manifest {request.manifest_path}")
        config = pipeline_service.load_run_config(request.config_path, {"apply_gc": request.apply_gc})
        manifest = image_store.load_manifest(request.manifest_path)
        report_path = pipeline_service.cmd_benchmark(manifest, config, request.out)

        with open(report_path, "r", encoding="utf-8") as fh:
            report = json.load(fh)
        return BenchmarkResponse(
            success=True,
            report_path=report_path,
            mean=report["mean"],
            failed_entries=report["failed_entries"],
        )
    except Exception as e:
        raise to_http_exception(e, "run benchmark")
