"""
Dense image planes and the fixed 3-tap difference operators.

A plane is a float64 ndarray of shape (H, W); a color image is a float64
ndarray of shape (H, W, 3) with channels last. Every function returns a new
array and never writes into its arguments.
"""

from enum import Enum
from typing import Literal

import numpy as np

from config import SolverDefaults
from core.exceptions import DimensionMismatchError, InvalidParameterError, KernelExtentError

ImagePlane = np.ndarray
ColorImage = np.ndarray

EPS_DIV = SolverDefaults.EPS_DIV
DIFF_TAPS = (1.0, 0.0, -1.0)
BT601_WEIGHTS = np.array([0.299, 0.587, 0.114])


class DifferenceKernel(str, Enum):
    """[1, 0, -1] along rows (vertical) or along columns (horizontal)"""
    VERTICAL = "vertical"
    HORIZONTAL = "horizontal"

    @property
    def axis(self) -> int:
        return 0 if self is DifferenceKernel.VERTICAL else 1


def as_plane(data, name: str = "plane") -> ImagePlane:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatchError(f"{name} must be a non-empty H x W array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} contains non-finite values")
    return arr


def as_color(data, name: str = "image") -> ColorImage:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatchError(f"{name} must be an H x W x 3 array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} contains non-finite values")
    return arr


def check_same_size(a: np.ndarray, b: np.ndarray, what: str = "operands") -> None:
    if a.shape[:2] != b.shape[:2]:
        raise DimensionMismatchError(f"{what} differ in size: {a.shape[:2]} vs {b.shape[:2]}")


def ewise(a: np.ndarray, b: np.ndarray, op: Literal["mul", "div", "add", "sub"],
          eps_div: float = EPS_DIV) -> np.ndarray:
    """
    Element-wise algebra on equally shaped arrays; division is guarded by eps_div.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"ewise {op}: shapes {a.shape} and {b.shape} differ")
    if op == "mul":
        return a * b
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "div":
        return safe_divide(a, b, eps_div)
    raise InvalidParameterError(f"Unknown element-wise operation: {op}")


def safe_divide(a: np.ndarray, b: np.ndarray, eps_div: float = EPS_DIV) -> np.ndarray:
    return np.asarray(a, dtype=np.float64) / np.maximum(b, eps_div)


def _neighbour_indices(n: int):
    idx = np.arange(n)
    return np.clip(idx - 1, 0, n - 1), np.clip(idx + 1, 0, n - 1)


def _axis_extent(img: np.ndarray, kernel: DifferenceKernel) -> int:
    kernel = DifferenceKernel(kernel)
    n = img.shape[kernel.axis]
    if n < 3:
        raise KernelExtentError(f"{kernel.value} difference needs at least 3 pixels along the axis, got {n}")
    return n


def diff_conv(img: np.ndarray, kernel: DifferenceKernel) -> np.ndarray:
    """
    out(p) = img(p-1) - img(p+1) along the kernel axis, edge-replicated.

    Works on planes and on channels-last color images.
    """
    img = np.asarray(img, dtype=np.float64)
    kernel = DifferenceKernel(kernel)
    prev_idx, next_idx = _neighbour_indices(_axis_extent(img, kernel))
    return np.take(img, prev_idx, axis=kernel.axis) - np.take(img, next_idx, axis=kernel.axis)


def diff_conv_transpose(img: np.ndarray, kernel: DifferenceKernel) -> np.ndarray:
    """
    Exact adjoint of diff_conv under the Frobenius inner product.
    """
    img = np.asarray(img, dtype=np.float64)
    kernel = DifferenceKernel(kernel)
    prev_idx, next_idx = _neighbour_indices(_axis_extent(img, kernel))
    moved = np.moveaxis(img, kernel.axis, 0)
    out = np.zeros_like(moved)
    # scatter back through the clamped gathers of the forward operator
    np.add.at(out, prev_idx, moved)
    np.add.at(out, next_idx, -moved)
    return np.moveaxis(out, 0, kernel.axis)


def to_gray(img: ColorImage) -> ImagePlane:
    """BT.601 luma"""
    img = np.asarray(img, dtype=np.float64)
    return img @ BT601_WEIGHTS


def channel_max(img: ColorImage) -> ImagePlane:
    return np.max(np.asarray(img, dtype=np.float64), axis=2)


def broadcast_plane(plane: ImagePlane) -> ColorImage:
    return np.repeat(np.asarray(plane, dtype=np.float64)[:, :, None], 3, axis=2)
