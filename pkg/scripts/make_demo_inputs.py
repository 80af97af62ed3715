#!/usr/bin/env python3
"""Generate the synthetic inputs used by the end-to-end CLI drive:
a damaged manuscript crop, an over-painted (shadowed) panel with its
annotation mask and ground truth, a stereo scene file, and a fast INI
config."""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

from folio.raster import AnnotationMask, Image, Label, save_annotation, save_image

FAST_INI = """\
[chan_vese]
mu = 0.1
max_iter = 400

[kmeans]
k = 8
restarts = 3

[damage]
min_area = 12
closing_radius = 1

[tv]
max_iter = 400

[exemplar]
patch_side = 5
propagation_iters = 8
scales = 2
"""


def manuscript(h=96, w=96, seed=0) -> Image:
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
    ids = rng.integers(0, len(palette), size=(tile, tile))
    pristine = np.tile(palette[ids], ((h + tile - 1) // tile, (w + tile - 1) // tile, 1))[:h, :w]
    yy, xx = np.mgrid[0:h, 0:w]
    gain = 1.0 + 0.04 * np.sin(2 * np.pi * yy / tile) * np.cos(2 * np.pi * xx / tile)
    pristine = np.clip(pristine * gain[:, :, None], 0, 1)
    damage = np.zeros((h, w), dtype=bool)
    for cy, cx, r in ((48, 48, 9), (20, 24, 6), (70, 30, 5), (30, 70, 5)):
        damage |= (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    damaged = pristine.copy()
    damaged[damage] = np.array([0.25, 0.12, 0.08])
    return Image(damaged)


def shadow_panel(h=48, w=48, seed=18):
    rng = np.random.default_rng(seed)
    base = rng.uniform(size=(h // 4 + 2, w // 4 + 2))
    up = np.kron(base, np.ones((4, 4)))[:h, :w]
    sm = ndimage.gaussian_filter(up, 2.0)
    sm = (sm - sm.min()) / (sm.max() - sm.min() + 1e-12)
    varying = 0.45 + 0.35 * sm

    ring = np.zeros((h, w), dtype=bool)
    ring[14:34, 14:34] = True
    ring[15:33, 15:33] = False
    dist = ndimage.distance_transform_edt(~ring)
    weight = np.clip((dist - 3.0) / 5.0, 0.0, 1.0)
    truth = 0.6 + (varying - 0.6) * weight

    shadow = np.zeros((h, w), dtype=bool)
    shadow[14:34, 14:34] = True
    damaged = np.where(shadow, 0.5 * truth, truth)

    labels = np.zeros((h, w), dtype=np.uint8)
    labels[shadow] = int(Label.INPAINT)
    band = np.zeros((h, w), dtype=bool)
    band[13:35, 13:35] = True
    band[15:33, 15:33] = False
    labels[band] = int(Label.ZERO_DRIFT_EDGE)

    rgb = Image(np.repeat(damaged[:, :, None], 3, axis=2))
    truth_img = Image(np.repeat(truth[:, :, None], 3, axis=2))
    return rgb, truth_img, AnnotationMask(labels)


def main() -> int:
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "/tmp/folio-demo")
    out.mkdir(parents=True, exist_ok=True)

    save_image(manuscript(), out / "manuscript.png")
    (out / "fast.ini").write_text(FAST_INI)

    shadowed, truth, annotation = shadow_panel()
    save_image(shadowed, out / "shadowed.png")
    save_image(truth, out / "shadow_truth.png")
    save_annotation(annotation, out / "shadow_mask.png")

    card = np.zeros((96, 96), dtype=np.uint8)
    card[30:60, 40:66] = 255
    PILImage.fromarray(card, mode="L").save(out / "card.png")
    (out / "scene.txt").write_text(
        "background_depth 8.0\n\nlayer\nmask card.png\nprimitive plane\ndepth 2.0\n"
    )
    print(f"demo inputs written to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
