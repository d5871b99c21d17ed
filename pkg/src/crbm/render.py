"""Binary PPM (P6) rendering of denoising results.

Each case renders as a row of three panels: the noisy input, the prediction,
and the clean target. Prediction panels color pixels present in both the
prediction and the noisy input white, pixels the model added (present in the
prediction but not the noisy input) red, and everything else black.
"""

from __future__ import annotations

import numpy as np

WHITE = (255, 255, 255)
RED = (255, 0, 0)
BLACK = (0, 0, 0)
SEP = (96, 96, 96)


def write_ppm(path, pixels):
    """Write an (H, W, 3) uint8 array as a binary P6 file."""
    pixels = np.asarray(pixels, dtype=np.uint8)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ValueError("pixels must be (H, W, 3)")
    height, width = pixels.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def _panel_plain(bits, width, height):
    on = np.asarray(bits, dtype=np.float64).reshape(height, width) >= 0.5
    out = np.zeros((height, width, 3), dtype=np.uint8)
    out[on] = WHITE
    return out


def _panel_prediction(predicted, noisy, width, height):
    pred_on = np.asarray(predicted).reshape(height, width) >= 0.5
    noisy_on = np.asarray(noisy, dtype=np.float64).reshape(height, width) >= 0.5
    out = np.zeros((height, width, 3), dtype=np.uint8)
    out[pred_on & noisy_on] = WHITE
    out[pred_on & ~noisy_on] = RED
    return out


def render_denoising_grid(noisy, predicted, clean, width, height, pad=1):
    """Compose the (noisy | prediction | clean) panel grid for a list of cases."""
    noisy = np.atleast_2d(np.asarray(noisy))
    predicted = np.atleast_2d(np.asarray(predicted))
    clean = np.atleast_2d(np.asarray(clean))
    if not (len(noisy) == len(predicted) == len(clean)):
        raise ValueError("noisy/predicted/clean lists must be aligned")
    n = len(noisy)
    grid_h = n * height + (n + 1) * pad
    grid_w = 3 * width + 4 * pad
    grid = np.empty((grid_h, grid_w, 3), dtype=np.uint8)
    grid[...] = SEP
    for i in range(n):
        top = pad + i * (height + pad)
        panels = (
            _panel_plain(noisy[i], width, height),
            _panel_prediction(predicted[i], noisy[i], width, height),
            _panel_plain(clean[i], width, height),
        )
        for j, panel in enumerate(panels):
            left = pad + j * (width + pad)
            grid[top:top + height, left:left + width] = panel
    return grid
