"""Image containers, colorspace / feature transforms and annotation-mask codec.

Everything downstream (segmentation, inpainting, osmosis, stereo) works on the
two value types defined here:

* ``Image`` -- float64 raster in [0, 1], shape (height, width, channels),
  row-major and channel-interleaved.  8- and 16-bit PNG/TIFF inputs are scaled
  to [0, 1] on load.
* ``AnnotationMask`` -- per-pixel role labels with a bit-exact PNG color table
  (black=keep, gray=inpaint, blue=training, red=Neumann edge, white=zero-drift
  edge, green=Dirichlet rim).

The 13-dim feature stack concatenates HSV, geometric-mean log-chromaticity,
CIELAB and naive CMYK per pixel, each channel min-max normalized over the
image so no single space dominates clustering distances.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import InvalidInputError, MalformedAnnotationError

# Guard for logs and divisions; black pixels occur in real scans.
EPS = 1e-6

# log(c / m) for c in [EPS, 1] is bounded by (2/3) * log(1/EPS).
_GMCR_HALF_RANGE = (2.0 / 3.0) * float(np.log(1.0 / EPS))

# sRGB -> XYZ (D65).  The white point is taken as the image of (1,1,1) so
# that pure white maps to L=100, a=b=0 exactly.
_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE_XYZ = _SRGB_TO_XYZ.sum(axis=1)

COLORSPACES = ("HSV", "GMCR", "CIELAB", "CMYK")
FEATURE_DIM = 13


@dataclass(frozen=True)
class Image:
    """Multi-channel floating-point raster on the image domain.

    data has shape (height, width, channels) with samples in [0, 1].
    """

    data: np.ndarray
    colorspace: str = "sRGB"

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3:
            raise InvalidInputError(f"image data must be HxWxC, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("image contains non-finite samples")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise InvalidInputError("image samples must lie in [0, 1]")
        object.__setattr__(self, "data", np.ascontiguousarray(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def channel(self, i: int) -> np.ndarray:
        return self.data[:, :, i]

    def to_gray(self) -> Image:
        """Rec.601 luma; identity on single-channel images."""
        if self.channels == 1:
            return Image(self.data.copy(), colorspace="gray")
        rgb = self.data[:, :, :3]
        luma = rgb @ np.array([0.299, 0.587, 0.114])
        return Image(np.clip(luma, 0.0, 1.0), colorspace="gray")


@dataclass(frozen=True)
class FeatureImage:
    """Per-pixel feature stack of shape (height, width, 13)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != FEATURE_DIM:
            raise InvalidInputError(
                f"feature image must be HxWx{FEATURE_DIM}, got shape {arr.shape}"
            )
        object.__setattr__(self, "data", np.ascontiguousarray(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.data.shape[2]

    def as_points(self) -> np.ndarray:
        """Flatten to (n_pixels, feature_dim) in row-major pixel order."""
        return self.data.reshape(-1, FEATURE_DIM)


class Label(IntEnum):
    KEEP = 0
    INPAINT = 1
    TRAINING = 2
    NEUMANN_EDGE = 3
    ZERO_DRIFT_EDGE = 4
    DIRICHLET_RIM = 5


# Bit-exact color table for annotation PNGs.
LABEL_COLORS: dict[Label, tuple[int, int, int]] = {
    Label.KEEP: (0, 0, 0),
    Label.INPAINT: (128, 128, 128),
    Label.TRAINING: (0, 0, 255),
    Label.NEUMANN_EDGE: (255, 0, 0),
    Label.ZERO_DRIFT_EDGE: (255, 255, 255),
    Label.DIRICHLET_RIM: (0, 255, 0),
}
_COLOR_TO_LABEL = {color: label for label, color in LABEL_COLORS.items()}


@dataclass(frozen=True)
class AnnotationMask:
    """Per-pixel role labels; same dimensions as the image it annotates."""

    labels: np.ndarray = field()

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise InvalidInputError(f"annotation labels must be HxW, got shape {arr.shape}")
        if arr.size and (arr.min() < 0 or arr.max() > max(Label)):
            raise InvalidInputError("annotation contains out-of-range label ids")
        object.__setattr__(self, "labels", np.ascontiguousarray(arr.astype(np.uint8)))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def mask(self, label: Label) -> np.ndarray:
        return self.labels == int(label)

    @property
    def inpaint(self) -> np.ndarray:
        """The inpainting domain D (boolean HxW)."""
        return self.mask(Label.INPAINT)

    @property
    def training(self) -> np.ndarray:
        return self.mask(Label.TRAINING)

    @classmethod
    def blank(cls, height: int, width: int) -> AnnotationMask:
        return cls(np.zeros((height, width), dtype=np.uint8))

    @classmethod
    def from_binary(cls, inpaint: np.ndarray, label: Label = Label.INPAINT) -> AnnotationMask:
        labels = np.where(np.asarray(inpaint, dtype=bool), int(label), int(Label.KEEP))
        return cls(labels.astype(np.uint8))


# ---------------------------------------------------------------------------
# image IO
# ---------------------------------------------------------------------------

def _pil_to_float(img: PILImage.Image) -> np.ndarray:
    """Scale 8/16-bit PIL data to float64 in [0, 1]."""
    if img.mode in ("I;16", "I;16B", "I;16L", "I"):
        arr = np.asarray(img, dtype=np.float64)
        return arr / 65535.0
    if img.mode == "RGBA":
        img = img.convert("RGB")
    elif img.mode not in ("RGB", "L"):
        img = img.convert("RGB")
    return np.asarray(img, dtype=np.float64) / 255.0


def load_image(path: str | Path) -> Image:
    """Load a PNG or TIFF image (8/16-bit) as floats in [0, 1]."""
    with PILImage.open(path) as img:
        arr = _pil_to_float(img)
    colorspace = "gray" if arr.ndim == 2 else "sRGB"
    return Image(np.clip(arr, 0.0, 1.0), colorspace=colorspace)


def save_image(img: Image, path: str | Path) -> None:
    """Write an image as 8-bit PNG/TIFF (deterministic bytes for fixed inputs)."""
    arr = np.clip(np.rint(img.data * 255.0), 0, 255).astype(np.uint8)
    if arr.shape[2] == 1:
        pil = PILImage.fromarray(arr[:, :, 0], mode="L")
    elif arr.shape[2] == 3:
        pil = PILImage.fromarray(arr, mode="RGB")
    elif arr.shape[2] == 4:
        # PNG has no CMYK mode; 4-channel data goes out as RGBA samples.
        pil = PILImage.fromarray(arr, mode="RGBA")
    else:
        raise InvalidInputError(f"cannot save image with {arr.shape[2]} channels")
    pil.save(path)


# ---------------------------------------------------------------------------
# colorspace transforms
# ---------------------------------------------------------------------------

def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """HSV with all three components in [0, 1] (hue as angle/360)."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = np.max(rgb, axis=-1)
    minc = np.min(rgb, axis=-1)
    delta = maxc - minc
    safe = np.maximum(delta, EPS)

    h = np.zeros_like(maxc)
    h = np.where(maxc == r, ((g - b) / safe) % 6.0, h)
    h = np.where(maxc == g, (b - r) / safe + 2.0, h)
    h = np.where(maxc == b, (r - g) / safe + 4.0, h)
    h = np.where(delta == 0.0, 0.0, h) / 6.0

    s = np.where(maxc > 0.0, delta / np.maximum(maxc, EPS), 0.0)
    return np.stack([h, s, maxc], axis=-1)


def rgb_to_gmcr_raw(rgb: np.ndarray) -> np.ndarray:
    """Geometric-mean log-chromaticity (log(R/m), log(G/m), log(B/m)).

    m is the geometric mean of the guarded channels, so gray pixels map to
    (0, 0, 0) and the transform is invariant to multiplicative rescaling.
    """
    guarded = np.maximum(rgb, EPS)
    logs = np.log(guarded)
    return logs - logs.mean(axis=-1, keepdims=True)


def rgb_to_gmcr(rgb: np.ndarray) -> np.ndarray:
    """GMCR affinely rescaled from its attainable range to [0, 1]."""
    raw = rgb_to_gmcr_raw(rgb)
    return (raw + _GMCR_HALF_RANGE) / (2.0 * _GMCR_HALF_RANGE)


def _srgb_to_linear(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def rgb_to_cielab_raw(rgb: np.ndarray) -> np.ndarray:
    """CIELAB (L in [0,100], a/b unbounded) with D65 white from sRGB."""
    linear = _srgb_to_linear(rgb)
    xyz = linear @ _SRGB_TO_XYZ.T
    t = xyz / _WHITE_XYZ
    delta = 6.0 / 29.0
    f = np.where(t > delta**3, np.cbrt(np.maximum(t, 0.0)), t / (3 * delta**2) + 4.0 / 29.0)
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    L = 116.0 * fy - 16.0
    a = 500.0 * (fx - fy)
    b = 200.0 * (fy - fz)
    return np.stack([L, a, b], axis=-1)


def rgb_to_cielab(rgb: np.ndarray) -> np.ndarray:
    """CIELAB rescaled to [0, 1]: L/100, (a+128)/255, (b+128)/255."""
    lab = rgb_to_cielab_raw(rgb)
    out = np.empty_like(lab)
    out[..., 0] = lab[..., 0] / 100.0
    out[..., 1] = (lab[..., 1] + 128.0) / 255.0
    out[..., 2] = (lab[..., 2] + 128.0) / 255.0
    return np.clip(out, 0.0, 1.0)


def rgb_to_cmyk(rgb: np.ndarray) -> np.ndarray:
    """Naive CMYK with K = 1 - max(R, G, B); already in [0, 1]."""
    k = 1.0 - np.max(rgb, axis=-1)
    denom = np.maximum(1.0 - k, EPS)
    c = (1.0 - rgb[..., 0] - k) / denom
    m = (1.0 - rgb[..., 1] - k) / denom
    y = (1.0 - rgb[..., 2] - k) / denom
    return np.clip(np.stack([c, m, y, k], axis=-1), 0.0, 1.0)


_TRANSFORMS = {
    "HSV": rgb_to_hsv,
    "GMCR": rgb_to_gmcr,
    "CIELAB": rgb_to_cielab,
    "CMYK": rgb_to_cmyk,
}


def convert_colorspace(img: Image, target: str) -> Image:
    """Per-pixel colorspace transform of a 3-channel sRGB image.

    Outputs are rescaled to [0, 1] with a fixed affine map per space so the
    operation stays deterministic and pixel-local.
    """
    if img.channels != 3:
        raise InvalidInputError(
            f"convert_colorspace needs a 3-channel image, got {img.channels} channels"
        )
    key = target.upper()
    if key not in _TRANSFORMS:
        raise InvalidInputError(f"unknown target colorspace {target!r}")
    out = _TRANSFORMS[key](img.data)
    return Image(np.clip(out, 0.0, 1.0), colorspace=key.lower())


def compute_features(img: Image) -> FeatureImage:
    """Concatenate HSV | GMCR | CIELAB | CMYK per pixel, then min-max
    normalize each of the 13 channels over the image (constant channels
    map to 0)."""
    if img.channels != 3:
        raise InvalidInputError(
            f"compute_features needs a 3-channel image, got {img.channels} channels"
        )
    stacks = [_TRANSFORMS[space](img.data) for space in COLORSPACES]
    feats = np.concatenate(stacks, axis=-1)

    lo = feats.min(axis=(0, 1), keepdims=True)
    hi = feats.max(axis=(0, 1), keepdims=True)
    span = hi - lo
    normalized = np.where(span > 0.0, (feats - lo) / np.where(span > 0.0, span, 1.0), 0.0)
    return FeatureImage(normalized)


# ---------------------------------------------------------------------------
# annotation codec
# ---------------------------------------------------------------------------

def decode_annotation(png_bytes: bytes, expected_size: tuple[int, int] | None = None) -> AnnotationMask:
    """Decode an annotation PNG using the bit-exact color table.

    expected_size is (height, width) of the image being annotated; a mismatch
    raises InvalidInputError.  Any color outside the table raises
    MalformedAnnotationError naming the first offending pixel.
    """
    with PILImage.open(io.BytesIO(png_bytes)) as pil:
        rgb = np.asarray(pil.convert("RGB"), dtype=np.uint8)
    h, w = rgb.shape[:2]
    if expected_size is not None and (h, w) != tuple(expected_size):
        raise InvalidInputError(
            f"annotation size {h}x{w} does not match image size "
            f"{expected_size[0]}x{expected_size[1]}"
        )

    labels = np.full((h, w), -1, dtype=np.int16)
    for label, color in LABEL_COLORS.items():
        hit = np.all(rgb == np.array(color, dtype=np.uint8), axis=-1)
        labels[hit] = int(label)

    bad = np.argwhere(labels < 0)
    if bad.size:
        y, x = (int(v) for v in bad[0])
        r, g, b = (int(v) for v in rgb[y, x])
        raise MalformedAnnotationError(
            f"unknown annotation color ({r},{g},{b}) at pixel (x={x}, y={y})", x=x, y=y
        )
    return AnnotationMask(labels.astype(np.uint8))


def encode_annotation(mask: AnnotationMask) -> bytes:
    """Encode a label field into the annotation PNG color table."""
    rgb = np.zeros((mask.height, mask.width, 3), dtype=np.uint8)
    for label, color in LABEL_COLORS.items():
        rgb[mask.labels == int(label)] = color
    buf = io.BytesIO()
    PILImage.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def load_annotation(path: str | Path, expected_size: tuple[int, int] | None = None) -> AnnotationMask:
    return decode_annotation(Path(path).read_bytes(), expected_size=expected_size)


def save_annotation(mask: AnnotationMask, path: str | Path) -> None:
    Path(path).write_bytes(encode_annotation(mask))


def as_inpaint_mask(mask: AnnotationMask | np.ndarray) -> np.ndarray:
    """Coerce an AnnotationMask or boolean array to the boolean domain D."""
    if isinstance(mask, AnnotationMask):
        return mask.inpaint
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise InvalidInputError(f"inpaint mask must be HxW, got shape {arr.shape}")
    return arr.astype(bool)
