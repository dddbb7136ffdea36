"""Flow and error visualisation."""

from __future__ import annotations

from typing import Optional

import numpy as np
from matplotlib.colors import hsv_to_rgb


def render_flow_color(w, max_mag: Optional[float] = None) -> np.ndarray:
    """Colour-wheel rendering: hue encodes direction, saturation magnitude.

    ``max_mag`` sets the magnitude shown at full saturation; by default the
    largest vector in ``w``. Zero flow renders white.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 3 or w.shape[2] != 2:
        raise ValueError(f"flow must be shaped (H, W, 2), got {w.shape}")
    u, v = w[..., 0], w[..., 1]
    mag = np.hypot(u, v)
    if max_mag is None:
        max_mag = float(mag.max())
    if max_mag <= 0:
        max_mag = 1.0
    hue = np.mod(np.arctan2(v, u), 2 * np.pi) / (2 * np.pi)
    sat = np.clip(mag / max_mag, 0.0, 1.0)
    return hsv_to_rgb(np.stack([hue, sat, np.ones_like(hue)], axis=2))


ERROR_LOW = np.array([0.5, 0.5, 0.5])
ERROR_HIGH = np.array([1.0, 0.0, 0.0])


def render_error_map(w, w_gt, mask=None, max_err: Optional[float] = None) -> np.ndarray:
    """Endpoint error on a linear gray-to-red ramp; masked-out pixels are black."""
    w = np.asarray(w, dtype=np.float64)
    w_gt = np.asarray(w_gt, dtype=np.float64)
    if w.shape != w_gt.shape or w.ndim != 3:
        raise ValueError("flow shapes differ")
    err = np.hypot(w[..., 0] - w_gt[..., 0], w[..., 1] - w_gt[..., 1])
    mask = np.ones(err.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if max_err is None:
        max_err = float(err[mask].max()) if mask.any() else 0.0
    t = np.clip(err / max_err, 0.0, 1.0) if max_err > 0 else np.zeros_like(err)
    img = ERROR_LOW + t[..., None] * (ERROR_HIGH - ERROR_LOW)
    img[~mask] = 0.0
    return img
