import json
import logging
import os
from typing import List, Tuple

import cv2
import numpy as np
from PIL import Image
from pydantic import ValidationError

from core.exceptions import CorruptImageError, ImageNotFoundError, ManifestError, UnsupportedImageFormatError
from core.image_ops import as_color, broadcast_plane
from schema.run_schema import DatasetManifest

logger = logging.getLogger(__name__)

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
PPM_MAGIC = b"P6"


class ImageStore:
    """
    Reads and writes images, JSON documents and dataset manifests on the local filesystem
    """

    def load_image(self, path: str) -> np.ndarray:
        """
        Load a PNG or binary PPM (8- or 16-bit) as an H x W x 3 float image in [0, 1].
        Grayscale files are broadcast to three identical channels.
        """
        if not os.path.isfile(path):
            raise ImageNotFoundError(f"Image not found: {path}")
        with open(path, "rb") as fh:
            data = fh.read()

        if data.startswith(PNG_MAGIC):
            img = self._decode_png(data, path)
        elif data.startswith(PPM_MAGIC):
            img = self._decode_ppm(data, path)
        else:
            raise UnsupportedImageFormatError(f"{path} is neither PNG nor binary PPM")
        logger.debug(f"Loaded {path}: {img.shape[1]}x{img.shape[0]}")
        return img

    def _decode_png(self, data: bytes, path: str) -> np.ndarray:
        try:
            pixels = cv2.imdecode(np.frombuffer(data, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
        except cv2.error as e:
            logger.error(f"Error decoding PNG {path}: {e}")
            raise CorruptImageError(f"Corrupt PNG {path}: {e}") from e
        if pixels is None:
            logger.error(f"Error decoding PNG {path}")
            raise CorruptImageError(f"Corrupt PNG {path}")

        scale = 65535.0 if pixels.dtype == np.uint16 else 255.0
        values = pixels.astype(np.float64) / scale
        if values.ndim == 2:
            return broadcast_plane(values)
        # OpenCV decodes to BGR(A); alpha is dropped
        return as_color(values[:, :, 2::-1], path)

    def _decode_ppm(self, data: bytes, path: str) -> np.ndarray:
        tokens, offset = self._ppm_header(data, path)
        try:
            width, height, maxval = (int(t) for t in tokens[1:4])
        except ValueError as e:
            raise CorruptImageError(f"Corrupt PPM header in {path}: {tokens}") from e
        if width < 1 or height < 1 or not 0 < maxval < 65536:
            raise CorruptImageError(f"Invalid PPM dimensions or maxval in {path}: {tokens}")

        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        expected = width * height * 3 * dtype.itemsize
        payload = data[offset:offset + expected]
        if len(payload) < expected:
            raise CorruptImageError(f"Truncated PPM {path}: expected {expected} bytes, got {len(payload)}")
        pixels = np.frombuffer(payload, dtype=dtype).reshape(height, width, 3)
        return as_color(np.clip(pixels.astype(np.float64) / maxval, 0.0, 1.0), path)

    def _ppm_header(self, data: bytes, path: str) -> Tuple[List[str], int]:
        """Magic, width, height and maxval tokens plus the offset of the raster"""
        tokens: List[str] = []
        pos = 0
        while len(tokens) < 4:
            if pos >= len(data):
                raise CorruptImageError(f"Truncated PPM header in {path}")
            ch = data[pos:pos + 1]
            if ch == b"#":
                end = data.find(b"\n", pos)
                if end < 0:
                    raise CorruptImageError(f"Truncated PPM header in {path}")
                pos = end + 1
            elif ch.isspace():
                pos += 1
            else:
                start = pos
                while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
                    pos += 1
                tokens.append(data[start:pos].decode("ascii", errors="replace"))
        if pos >= len(data) or not data[pos:pos + 1].isspace():
            raise CorruptImageError(f"Truncated PPM header in {path}")
        # exactly one whitespace byte separates maxval from the raster
        return tokens, pos + 1

    def save_image(self, img: np.ndarray, path: str) -> None:
        """8-bit PNG with clip then round-half-up quantization"""
        self._write_png(self.quantize(img), path)

    def save_plane(self, plane: np.ndarray, path: str) -> None:
        self._write_png(self.quantize(plane), path)

    def quantize(self, img: np.ndarray) -> np.ndarray:
        clipped = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
        return np.floor(clipped * 255.0 + 0.5).astype(np.uint8)

    def _write_png(self, arr: np.ndarray, path: str) -> None:
        try:
            Image.fromarray(arr).save(path, format="PNG")
            logger.debug(f"Saved {path}")
        except OSError as e:
            logger.error(f"Error writing {path}: {e}")
            raise

    def save_json(self, payload, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")

    def load_manifest(self, path: str) -> DatasetManifest:
        """
        JSON document {"entries": [{"id", "low_path", "high_path"?}, ...]};
        relative paths resolve against the manifest's directory.
        """
        if not os.path.isfile(path):
            raise ImageNotFoundError(f"Manifest not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as e:
            raise ManifestError(f"Manifest {path} is not valid JSON: {e}") from e
        if not isinstance(raw, dict) or "entries" not in raw:
            raise ManifestError(f"Manifest {path} must be an object with an 'entries' list")

        base = os.path.dirname(os.path.abspath(path))
        entries = []
        for item in raw["entries"]:
            if not isinstance(item, dict):
                raise ManifestError(f"Manifest entry must be an object, got {item!r}")
            resolved = dict(item)
            for key in ("low_path", "high_path"):
                if resolved.get(key):
                    resolved[key] = os.path.normpath(os.path.join(base, resolved[key]))
            entries.append(resolved)

        try:
            manifest = DatasetManifest(entries=entries)
        except ValidationError as e:
            raise ManifestError(f"Invalid manifest {path}: {e}") from e

        for entry in manifest.entries:
            for ref in (entry.low_path, entry.high_path):
                if ref is not None and not os.path.isfile(ref):
                    raise ManifestError(f"Manifest entry '{entry.id}' references a missing file: {ref}")
        logger.info(f"Loaded manifest {path} with {len(manifest.entries)} entries")
        return manifest


image_store = ImageStore()
