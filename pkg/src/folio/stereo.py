"""Layered stereo synthesis: depth from masked geometric primitives,
forward reprojection to a shifted eye, and depth-aware disocclusion filling.

The camera model is a rectified horizontal-baseline pinhole: a pixel at
depth z moves horizontally by the disparity

    d = f_pix * b / z,    f_pix = (width / 2) / tan(fov / 2),

with b the baseline length and the shift direction opposite the eye
offset.  Warping is a forward splat with a z-buffer; uncovered target
pixels form the disocclusion holes, which exemplar inpainting fills using
only sources at or behind the hole's backing layer.

Scene files are plain key-value text, layers listed front to back::

    background_depth 8.0

    layer
    mask card.png
    primitive plane
    depth 2.0

    layer
    mask dome.png
    primitive sphere
    center 40 28
    radius 16
    depth 6.0

Plane gradients use p1/z1/p2/z2, cylinders orientation/axis/radius/depth,
cones apex/apex_depth/slope.  Mask PNGs count a pixel as covered when its
gray value exceeds 127; paths are relative to the scene file.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

from .errors import InvalidInputError
from .exemplar import PatchParams, inpaint_exemplar
from .raster import Image


@dataclass(frozen=True)
class Plane:
    """Constant depth, or a linear ramp through two anchor points."""

    depth: float | None = None
    p1: tuple[float, float] | None = None
    z1: float | None = None
    p2: tuple[float, float] | None = None
    z2: float | None = None

    def __post_init__(self):
        two_point = None not in (self.p1, self.z1, self.p2, self.z2)
        if (self.depth is None) == (not two_point):
            raise InvalidInputError("plane needs either depth or p1/z1/p2/z2")

    def depth_at(self, xx: np.ndarray, yy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.depth is not None:
            return np.full(xx.shape, float(self.depth)), np.zeros(xx.shape, dtype=bool)
        dx = self.p2[0] - self.p1[0]
        dy = self.p2[1] - self.p1[1]
        norm = dx * dx + dy * dy
        if norm == 0:
            raise InvalidInputError("plane gradient anchors coincide")
        t = ((xx - self.p1[0]) * dx + (yy - self.p1[1]) * dy) / norm
        return self.z1 + (self.z2 - self.z1) * t, np.zeros(xx.shape, dtype=bool)


@dataclass(frozen=True)
class Sphere:
    """Nearest-surface depth z0 - sqrt(r^2 - rho^2); rim depth past the
    silhouette (clipped)."""

    cx: float
    cy: float
    radius: float
    depth: float   # depth of the sphere center

    def depth_at(self, xx, yy):
        rho2 = (xx - self.cx) ** 2 + (yy - self.cy) ** 2
        inside = rho2 <= self.radius**2
        z = self.depth - np.sqrt(np.maximum(self.radius**2 - rho2, 0.0))
        return np.where(inside, z, self.depth), ~inside


@dataclass(frozen=True)
class Cylinder:
    orientation: str   # "vertical" (axis along y) or "horizontal"
    axis: float        # column (vertical) or row (horizontal) of the axis
    radius: float
    depth: float       # depth of the axis

    def __post_init__(self):
        if self.orientation not in ("vertical", "horizontal"):
            raise InvalidInputError("cylinder orientation must be vertical or horizontal")

    def depth_at(self, xx, yy):
        coord = xx if self.orientation == "vertical" else yy
        off2 = (coord - self.axis) ** 2
        inside = off2 <= self.radius**2
        z = self.depth - np.sqrt(np.maximum(self.radius**2 - off2, 0.0))
        return np.where(inside, z, self.depth), ~inside


@dataclass(frozen=True)
class Cone:
    """Depth grows linearly with distance from the apex."""

    cx: float
    cy: float
    apex_depth: float
    slope: float

    def depth_at(self, xx, yy):
        rho = np.sqrt((xx - self.cx) ** 2 + (yy - self.cy) ** 2)
        return self.apex_depth + self.slope * rho, np.zeros(xx.shape, dtype=bool)


Primitive = Plane | Sphere | Cylinder | Cone


@dataclass(frozen=True)
class LayerSpec:
    """A cookie-cutter mask paired with the primitive giving its depth."""

    mask: np.ndarray
    primitive: Primitive

    def __post_init__(self):
        object.__setattr__(self, "mask", np.ascontiguousarray(np.asarray(self.mask, bool)))
        if self.mask.ndim != 2:
            raise InvalidInputError("layer mask must be HxW")


@dataclass(frozen=True)
class CameraPose:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.eye(3))
    fov_degrees: float = 40.0
    baseline: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64).reshape(3)
        rot = np.asarray(self.orientation, dtype=np.float64).reshape(3, 3)
        base = np.asarray(self.baseline, dtype=np.float64).reshape(3)
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-8):
            raise InvalidInputError("orientation must be orthonormal")
        if not 0.0 < self.fov_degrees < 180.0:
            raise InvalidInputError("field of view must lie in (0, 180) degrees")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", rot)
        object.__setattr__(self, "baseline", base)

    def focal_pixels(self, width: int) -> float:
        return (width / 2.0) / math.tan(math.radians(self.fov_degrees) / 2.0)


@dataclass(frozen=True)
class DepthMap:
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if vals.ndim != 2:
            raise InvalidInputError("depth map must be HxW")
        if not np.all(np.isfinite(vals)) or vals.size and vals.min() <= 0.0:
            raise InvalidInputError("depth values must be positive and finite")
        object.__setattr__(self, "values", vals)


def compose_depth(
    layers: list[LayerSpec], background_depth: float, shape: tuple[int, int]
) -> DepthMap:
    """Front-most covering layer wins (layers are ordered front to back);
    uncovered pixels take the background depth."""
    if background_depth <= 0:
        raise InvalidInputError("background depth must be positive")
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    depth = np.full((h, w), float(background_depth))
    assigned = np.zeros((h, w), dtype=bool)
    for i, layer in enumerate(layers):
        if layer.mask.shape != (h, w):
            raise InvalidInputError(f"layer {i} mask shape {layer.mask.shape} != {(h, w)}")
        target = layer.mask & ~assigned
        if not target.any():
            continue
        z, clipped = layer.primitive.depth_at(xx, yy)
        if (clipped & target).any():
            warnings.warn(
                f"layer {i}: {int((clipped & target).sum())} mask pixels fall outside "
                "the primitive silhouette; clamped to its nearest valid depth",
                RuntimeWarning,
                stacklevel=2,
            )
        depth[target] = z[target]
        assigned |= layer.mask
    if depth.min() <= 0:
        raise InvalidInputError("composed depth contains non-positive values")
    return DepthMap(values=depth)


@dataclass(frozen=True)
class ReprojectResult:
    image: Image
    holes: np.ndarray        # boolean HxW, true where no source splatted
    depth: np.ndarray        # z-buffer of the warped view (inf in holes)


def reproject(img: Image, depth: DepthMap, cam: CameraPose) -> ReprojectResult:
    """Forward-warp with a z-buffer; equals the sequential raster-order
    z-buffer result exactly (nearest depth wins, earlier source on ties)."""
    if depth.values.shape != (img.height, img.width):
        raise InvalidInputError("depth map shape differs from image")
    h, w = depth.values.shape
    b = float(np.linalg.norm(cam.baseline))
    if b == 0.0:
        return ReprojectResult(
            image=Image(img.data.copy(), colorspace=img.colorspace),
            holes=np.zeros((h, w), dtype=bool),
            depth=depth.values.copy(),
        )
    sign = 1.0 if cam.baseline[0] >= 0 else -1.0
    f_pix = cam.focal_pixels(w)
    disparity = f_pix * b / depth.values

    cols = np.arange(w)[None, :].repeat(h, axis=0)
    target = np.rint(cols - sign * disparity).astype(np.int64)
    rows = np.arange(h)[:, None].repeat(w, axis=1)

    ok = (target >= 0) & (target < w)
    flat_target = (rows * w + target)[ok]
    z = depth.values[ok]
    order = (rows * w + cols)[ok]   # raster order of the source
    src_flat = order

    sorted_idx = np.lexsort((order, z, flat_target))
    flat_sorted = flat_target[sorted_idx]
    first = np.ones(flat_sorted.size, dtype=bool)
    first[1:] = flat_sorted[1:] != flat_sorted[:-1]
    winners = sorted_idx[first]

    out = np.zeros_like(img.data)
    zbuf = np.full(h * w, np.inf)
    hole = np.ones(h * w, dtype=bool)
    tgt = flat_target[winners]
    src = src_flat[winners]
    out.reshape(-1, img.channels)[tgt] = img.data.reshape(-1, img.channels)[src]
    zbuf[tgt] = z[winners]
    hole[tgt] = False

    return ReprojectResult(
        image=Image(out, colorspace=img.colorspace),
        holes=hole.reshape(h, w),
        depth=zbuf.reshape(h, w),
    )


def _backing_target_mask(holes: np.ndarray, warped_depth: np.ndarray) -> np.ndarray:
    """Valid inpainting sources: pixels at or behind the deepest surface
    adjacent to any hole (the backing layer that should continue)."""
    four = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
    comp, n_comp = ndimage.label(holes, structure=four)
    backing = np.inf
    for c in range(1, n_comp + 1):
        region = comp == c
        ring = ndimage.binary_dilation(region, structure=four) & ~holes
        depths = warped_depth[ring]
        depths = depths[np.isfinite(depths)]
        if depths.size:
            backing = min(backing, float(depths.max()))
    if not np.isfinite(backing):
        return ~holes
    return ~holes & (warped_depth >= backing - 1e-9)


def synthesize_view(
    img: Image,
    depth: DepthMap,
    cam: CameraPose,
    inpaint_params: PatchParams | None = None,
) -> Image:
    """Reproject and fill the disocclusions from background-depth sources."""
    result = reproject(img, depth, cam)
    if not result.holes.any():
        return result.image
    target_valid = _backing_target_mask(result.holes, result.depth)
    filled = inpaint_exemplar(
        result.image,
        result.holes,
        params=inpaint_params or PatchParams(),
        target_valid=target_valid,
    )
    return filled.image


def make_stereo_outputs(left: Image, right: Image, mode: str) -> Image:
    """Pack a stereo pair: side_by_side (left|right), crossed (right|left)
    or red-cyan anaglyph (R from left, G and B from right)."""
    if (left.height, left.width) != (right.height, right.width):
        raise InvalidInputError("stereo halves differ in size")

    def as_rgb(im: Image) -> np.ndarray:
        if im.channels >= 3:
            return im.data[:, :, :3]
        return np.repeat(im.data[:, :, :1], 3, axis=2)

    l_rgb, r_rgb = as_rgb(left), as_rgb(right)
    if mode == "side_by_side":
        return Image(np.concatenate([l_rgb, r_rgb], axis=1))
    if mode == "crossed":
        return Image(np.concatenate([r_rgb, l_rgb], axis=1))
    if mode == "anaglyph":
        out = r_rgb.copy()
        out[:, :, 0] = l_rgb[:, :, 0]
        return Image(out)
    raise InvalidInputError(f"unknown stereo output mode {mode!r}")


# ---------------------------------------------------------------------------
# scene files
# ---------------------------------------------------------------------------

def _load_mask(path: Path) -> np.ndarray:
    with PILImage.open(path) as pil:
        arr = np.asarray(pil.convert("L"))
    return arr > 127


def parse_scene(path: str | Path) -> tuple[list[LayerSpec], float]:
    """Parse a scene file; returns (layers front to back, background depth)."""
    path = Path(path)
    background: float | None = None
    layers: list[LayerSpec] = []
    block: dict[str, list[str]] | None = None

    def close_block():
        nonlocal block
        if block is None:
            return
        layers.append(_layer_from_block(block, path.parent))
        block = None

    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *rest = line.split()
        if key == "background_depth":
            background = float(rest[0])
        elif key == "layer":
            close_block()
            block = {}
        elif block is not None:
            block[key] = rest
        else:
            raise InvalidInputError(f"{path.name}:{lineno}: {key!r} outside a layer block")
    close_block()

    if background is None:
        raise InvalidInputError(f"{path.name}: missing background_depth")
    return layers, background


def _layer_from_block(block: dict[str, list[str]], base_dir: Path) -> LayerSpec:
    if "mask" not in block:
        raise InvalidInputError("layer block is missing its mask path")
    if "primitive" not in block:
        raise InvalidInputError("layer block is missing its primitive type")
    mask = _load_mask(base_dir / block["mask"][0])
    kind = block["primitive"][0]

    def one(key: str) -> float:
        return float(block[key][0])

    def pair(key: str) -> tuple[float, float]:
        return float(block[key][0]), float(block[key][1])

    if kind == "plane":
        if "depth" in block:
            primitive: Primitive = Plane(depth=one("depth"))
        else:
            primitive = Plane(p1=pair("p1"), z1=one("z1"), p2=pair("p2"), z2=one("z2"))
    elif kind == "sphere":
        cx, cy = pair("center")
        primitive = Sphere(cx=cx, cy=cy, radius=one("radius"), depth=one("depth"))
    elif kind == "cylinder":
        primitive = Cylinder(
            orientation=block["orientation"][0],
            axis=one("axis"),
            radius=one("radius"),
            depth=one("depth"),
        )
    elif kind == "cone":
        cx, cy = pair("apex")
        primitive = Cone(cx=cx, cy=cy, apex_depth=one("apex_depth"), slope=one("slope"))
    else:
        raise InvalidInputError(f"unknown primitive {kind!r}")
    return LayerSpec(mask=mask, primitive=primitive)
