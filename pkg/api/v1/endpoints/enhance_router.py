#!/usr/bin/env python3
"""
Enhance Router for single-image enhancement and the default configuration
"""

from fastapi import APIRouter
from typing import Any, Dict
from api.v1.endpoints.error_mapping import to_http_exception
from schema.run_schema import EnhanceRequest, EnhanceResult, RunConfig
from services.pipeline_service import pipeline_service
import logging

logger = logging.getLogger(__name__)

router = APIRouter()

@router.get("/config/defaults", response_model=Dict[str, Any])
async def get_default_config():
    """
    Get the run configuration built from the environment defaults
    """
    return RunConfig().model_dump(mode="json", by_alias=True)

@router.post("/enhance", response_model=EnhanceResult)
def enhance_image(request: EnhanceRequest):
    """
    Enhance one low-light image on the server filesystem.
    Fine-tuning and the output directory override the configuration file when given.
    """
    try:
        logger.info(f"Enhance request for {request.input_path}")
        overrides = {"finetune_enabled": request.finetune, "output_dir": request.out_dir}
        config = pipeline_service.load_run_config(request.config_path, overrides)
        result = pipeline_service.cmd_enhance(request.input_path, config, alpha_override=request.alpha)
        logger.info(f"Enhanced image written to {result.enhanced_path}")
        return result
    except Exception as e:
        raise to_http_exception(e, "enhance image")
