"""Image quality metrics on unit-range RGB images."""

import math

import numpy as np

from .errors import DimensionError
from .render import Image

IDENTICAL = math.inf  # PSNR of two identical images

_LUMA = np.array([0.299, 0.587, 0.114])


def _check_pair(a: Image, b: Image):
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionError(f"image sizes differ: {a.width}x{a.height} vs {b.width}x{b.height}")


def psnr(a: Image, b: Image) -> float:
    """10 log10(1 / MSE) over all channels; ``IDENTICAL`` (inf) when MSE is zero."""
    _check_pair(a, b)
    mse = float(np.mean((a.pixels - b.pixels) ** 2))
    if mse == 0.0:
        return IDENTICAL
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    k = len(g)
    rows = sum(g[i] * img[i:img.shape[0] - k + 1 + i, :] for i in range(k))
    return sum(g[i] * rows[:, i:rows.shape[1] - k + 1 + i] for i in range(k))


def ssim(a: Image, b: Image, window: int = 11, sigma: float = 1.5) -> float:
    """Mean SSIM on luma with a Gaussian window, over window positions fully inside the image."""
    _check_pair(a, b)
    if a.width < window or a.height < window:
        raise DimensionError(f"SSIM needs at least {window}x{window} pixels")
    x = a.pixels @ _LUMA
    y = b.pixels @ _LUMA
    g = _gaussian_window(window, sigma)
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    mx, my = _filter_valid(x, g), _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mx * mx
    syy = _filter_valid(y * y, g) - my * my
    sxy = _filter_valid(x * y, g) - mx * my
    s = ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2))
    return float(np.mean(s))
