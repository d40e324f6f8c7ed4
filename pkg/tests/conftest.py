from typing import List

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from storage.image_store import image_store

CHANNEL_REFLECTANCE = np.array([1.0, 0.9, 0.8])


def smooth_illumination(h: int, w: int, kx: int, ky: int, amplitude: float, base: float = 0.55) -> np.ndarray:
    """Cosine field with zero slope at the borders"""
    y = np.linspace(0.0, np.pi * ky, h)[:, None]
    x = np.linspace(0.0, np.pi * kx, w)[None, :]
    return base + amplitude * np.cos(y) * np.cos(x)


def synthetic_corpus(count: int = 10, size: int = 24) -> List[np.ndarray]:
    """Deterministic low-light images with smooth shading and textured reflectance"""
    images = []
    for seed in range(count):
        rng = np.random.default_rng(seed)
        texture = gaussian_filter(rng.uniform(0.4, 1.0, size=(size, size, 3)), sigma=(1.0, 1.0, 0.0))
        shading = smooth_illumination(size, size, 1 + seed % 3, 1 + seed % 2, 0.1, base=0.25)
        noise = rng.normal(0.0, 0.005, size=(size, size, 3))
        images.append(np.clip(texture * shading[:, :, None] + noise, 0.01, 1.0))
    return images


@pytest.fixture(scope="session")
def corpus():
    return synthetic_corpus()


@pytest.fixture
def dark_image():
    rng = np.random.default_rng(42)
    texture = gaussian_filter(rng.uniform(0.3, 1.0, size=(20, 20, 3)), sigma=(1.0, 1.0, 0.0))
    return np.clip(0.15 * texture * smooth_illumination(20, 20, 1, 1, 0.2, base=0.7)[:, :, None], 0.0, 1.0)


@pytest.fixture
def dark_png(tmp_path, dark_image):
    path = tmp_path / "dark.png"
    image_store.save_image(dark_image, str(path))
    return str(path)


@pytest.fixture
def distinct_lightness_image():
    """12x12 image whose channel maxima are pairwise distinct 8-bit levels"""
    rng = np.random.default_rng(7)
    levels = (rng.permutation(144) + 40).reshape(12, 12) / 255.0
    img = np.stack([levels * 0.8, levels, levels * 0.6], axis=2)
    return np.floor(img * 255.0 + 0.5) / 255.0
