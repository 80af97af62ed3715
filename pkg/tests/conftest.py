import numpy as np
import pytest
from scipy import ndimage


def motif_scene(h=64, w=64, seed=0):
    """Aperiodic ornament block duplicated at offset (+30, +30) with a mild
    brightness deformation, on a fine background texture.  The unique good
    match for a hole inside the first copy is the corresponding area of the
    second, which makes the optimal shift field coherent and nonzero."""
    rng = np.random.default_rng(seed)
    bg = 0.5 + 0.25 * np.sign(
        np.sin(np.arange(h)[:, None] * 2.1) * np.sin(np.arange(w)[None, :] * 1.7)
    )
    img = np.clip(bg + rng.normal(0, 0.01, size=(h, w)), 0, 1)[:, :, None]
    block = ndimage.gaussian_filter(rng.uniform(0, 1, size=(24, 24, 1)), 1.0)
    lo, hi = block.min(), block.max()
    block = (block - lo) / (hi - lo + 1e-9) * 0.7 + 0.15
    img[4:28, 4:28] = block
    yy, xx = np.mgrid[0:24, 0:24]
    warp = 0.02 * np.sin(yy / 5.0) * np.cos(xx / 4.0)
    img[34:58, 34:58] = np.clip(block + warp[:, :, None], 0, 1)
    return img


def synthetic_manuscript(h=96, w=96, seed=0):
    """Colorful tiled ornament with dark reddish damage blobs.

    Returns (damaged image, pristine image, damage mask, a seed point inside
    the largest blob).  Tile luma stays above 0.4 so the dark damage is
    cleanly separable, and the illumination modulation shares the tile
    period so exact texture repeats survive.
    """
    from folio.raster import Image

    rng = np.random.default_rng(seed)
    tile = 12
    palette = np.array(
        [
            [0.55, 0.65, 0.85],
            [0.80, 0.72, 0.45],
            [0.45, 0.70, 0.55],
            [0.85, 0.55, 0.50],
            [0.70, 0.60, 0.80],
            [0.60, 0.78, 0.75],
            [0.82, 0.66, 0.60],
        ]
    )
    base_ids = rng.integers(0, len(palette), size=(tile, tile))
    tile_img = palette[base_ids]
    reps = (h + tile - 1) // tile, (w + tile - 1) // tile
    pristine = np.tile(tile_img, (reps[0], reps[1], 1))[:h, :w]
    yy, xx = np.mgrid[0:h, 0:w]
    gain = 1.0 + 0.04 * np.sin(2 * np.pi * yy / tile) * np.cos(2 * np.pi * xx / tile)
    pristine = np.clip(pristine * gain[:, :, None], 0.0, 1.0)

    damage = np.zeros((h, w), dtype=bool)
    blobs = [
        (h // 2, w // 2, max(h // 11, 5)),
        (h // 5, w // 4, max(h // 16, 4)),
        (3 * h // 4, w // 3, max(h // 19, 4)),
        (h // 3, 3 * w // 4, max(h // 19, 4)),
    ]
    for cy, cx, r in blobs:
        damage |= (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    damaged = pristine.copy()
    damaged[damage] = np.array([0.25, 0.12, 0.08])
    return Image(damaged), pristine, damage, (w // 2, h // 2)


def psnr(reference: np.ndarray, estimate: np.ndarray, where: np.ndarray | None = None) -> float:
    """Peak signal-to-noise ratio on [0, 1] data, optionally masked."""
    diff = np.asarray(reference, dtype=np.float64) - np.asarray(estimate, dtype=np.float64)
    if where is not None:
        diff = diff[np.asarray(where, dtype=bool)]
    mse = float(np.mean(diff**2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(1.0 / mse)


def dice(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    denom = a.sum() + b.sum()
    if denom == 0:
        return 1.0
    return 2.0 * np.logical_and(a, b).sum() / denom


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
