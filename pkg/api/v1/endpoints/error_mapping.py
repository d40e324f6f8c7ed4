from fastapi import HTTPException
from pydantic import ValidationError

from core.exceptions import ImageNotFoundError, PipelineError
import logging

logger = logging.getLogger(__name__)


def to_http_exception(error: Exception, action: str) -> HTTPException:
    """
    404 for missing files, 400 for caller errors, 500 otherwise
    """
    root = error.cause if isinstance(error, PipelineError) and error.cause is not None else error
    if isinstance(root, (ImageNotFoundError, FileNotFoundError)):
        status_code = 404
    elif isinstance(root, (ValueError, ValidationError)):
        status_code = 400
    else:
        status_code = 500
    logger.error(f"Error during {action}: {str(error)}")
    return HTTPException(status_code=status_code, detail=f"Failed to {action}: {str(error)}")
