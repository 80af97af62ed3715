"""Non-local exemplar inpainting.

A PatchMatch-accelerated nearest-neighbor field is alternated with weighted
patch-vote reconstruction inside a coarse-to-fine pyramid.  The energy being
driven down is the sum over inpainting pixels of the squared patch distance
to each pixel's nearest neighbor outside the domain; a brute-force field is
provided as the exact oracle for that inner minimization.

Reconstruction uses Gaussian weights in the patch distance with sigma set to
the 75th percentile of the participating distances; a vote that would raise
the energy at a fixed shift map is rejected, so alternations are monotone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _patch_kernels as kernels
from .errors import InfeasibleDomainError, InvalidInputError
from .raster import AnnotationMask, Image, as_inpaint_mask
from .tv import TvParams, tv_inpaint

BRUTE_FORCE_MAX_SIDE = 128
MAX_ALTERNATIONS = 10
PIXEL_CHANGE_TOL = 1.0 / 255.0


@dataclass(frozen=True)
class PatchParams:
    """Patch geometry, iteration counts and seeding for PatchMatch."""

    patch_side: int = 7
    propagation_iters: int = 12
    scales: int = 2
    rng_seed: int = 0

    def __post_init__(self):
        if self.patch_side < 3 or self.patch_side % 2 == 0:
            raise InvalidInputError("patch_side must be an odd number >= 3")
        if self.propagation_iters < 1:
            raise InvalidInputError("propagation_iters must be at least 1")
        if self.scales < 1:
            raise InvalidInputError("scales must be at least 1")

    @property
    def radius(self) -> int:
        return self.patch_side // 2


@dataclass(frozen=True)
class ShiftMap:
    """Per-pixel offset (dy, dx) to the nearest-neighbor patch center.

    Offsets are meaningful only where domain is True; target centers are
    pixel + offset.
    """

    dy: np.ndarray
    dx: np.ndarray
    domain: np.ndarray

    def __post_init__(self):
        for name in ("dy", "dx"):
            arr = np.asarray(getattr(self, name), dtype=np.int32)
            object.__setattr__(self, name, np.ascontiguousarray(arr))
        object.__setattr__(self, "domain", np.ascontiguousarray(np.asarray(self.domain, bool)))
        if not (self.dy.shape == self.dx.shape == self.domain.shape):
            raise InvalidInputError("shift map component shapes differ")

    def targets(self) -> tuple[np.ndarray, np.ndarray]:
        """Absolute target centers (ty, tx) as int32 arrays."""
        h, w = self.domain.shape
        yy, xx = np.mgrid[0:h, 0:w].astype(np.int32)
        return yy + self.dy, xx + self.dx


def _as_image_array(img: Image | np.ndarray) -> np.ndarray:
    if isinstance(img, Image):
        return img.data
    return np.atleast_3d(np.asarray(img, dtype=np.float64))


def _valid_centers(
    in_d: np.ndarray, r: int, target_valid: np.ndarray | None
) -> np.ndarray:
    h, w = in_d.shape
    valid = np.zeros((h, w), dtype=bool)
    if h >= 2 * r + 1 and w >= 2 * r + 1:
        valid[r : h - r, r : w - r] = True
    valid &= ~in_d
    if target_valid is not None:
        valid &= np.asarray(target_valid, dtype=bool)
    return valid


def patch_distance(
    img: Image | np.ndarray,
    a: tuple[int, int],
    b: tuple[int, int],
    patch_side: int,
) -> float:
    """Squared patch distance between the patches centered at pixels a and b.

    Pixels are (x, y) coordinates; both patches must lie fully inside the
    image (no clamping here).
    """
    arr = _as_image_array(img)
    r = patch_side // 2
    h, w = arr.shape[:2]
    for name, (x, y) in (("a", a), ("b", b)):
        if not (r <= x < w - r and r <= y < h - r):
            raise InvalidInputError(
                f"patch around {name}=({x},{y}) with side {patch_side} leaves the image"
            )
    return float(kernels.patch_ssd(arr, a[1], a[0], b[1], b[0], r))


def shift_map_energy(
    img: Image | np.ndarray, nnf: ShiftMap, patch_side: int
) -> float:
    """Total squared patch distance of the field (the quantity PatchMatch
    minimizes)."""
    arr = _as_image_array(img)
    ty, tx = nnf.targets()
    r = patch_side // 2
    _require_targets_inside(ty, tx, nnf.domain, r)
    return float(kernels.nnf_energy(arr, nnf.domain, ty, tx, r))


def _require_targets_inside(ty, tx, in_d, r):
    h, w = in_d.shape
    ys, xs = np.nonzero(in_d)
    t_y, t_x = ty[ys, xs], tx[ys, xs]
    ok = (t_y >= r) & (t_y < h - r) & (t_x >= r) & (t_x < w - r)
    if not ok.all():
        i = int(np.argmin(ok))
        raise InvalidInputError(
            f"shift map target ({t_x[i]},{t_y[i]}) leaves the image for radius {r}"
        )


def brute_force_nnf(
    img: Image | np.ndarray,
    mask: AnnotationMask | np.ndarray,
    patch_side: int,
    target_valid: np.ndarray | None = None,
) -> ShiftMap:
    """Exact nearest-neighbor field by exhaustive search (small images only).

    Ties break to the smallest (row, col) target center.
    """
    arr = _as_image_array(img)
    in_d = as_inpaint_mask(mask)
    h, w = in_d.shape
    if h > BRUTE_FORCE_MAX_SIDE or w > BRUTE_FORCE_MAX_SIDE:
        raise InvalidInputError(
            f"brute-force field limited to {BRUTE_FORCE_MAX_SIDE}px sides, got {h}x{w}"
        )
    r = patch_side // 2
    valid = _valid_centers(in_d, r, target_valid)
    if in_d.any() and not valid.any():
        raise InfeasibleDomainError("no valid target patch exists outside the domain")

    ty, tx, _ = kernels.brute_force_pass(arr, in_d, valid, r)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.int32)
    return ShiftMap(dy=ty - yy, dx=tx - xx, domain=in_d)


def _repair_targets(ty, tx, in_d, valid):
    """Clamp init targets into bounds and push invalid ones to the first
    valid center (PatchMatch immediately improves them)."""
    h, w = in_d.shape
    np.clip(ty, 0, h - 1, out=ty)
    np.clip(tx, 0, w - 1, out=tx)
    ys, xs = np.nonzero(in_d)
    bad = ~valid[ty[ys, xs], tx[ys, xs]]
    if bad.any():
        first = np.argwhere(valid)[0]
        ty[ys[bad], xs[bad]] = first[0]
        tx[ys[bad], xs[bad]] = first[1]


def patchmatch_nnf(
    img: Image | np.ndarray,
    mask: AnnotationMask | np.ndarray,
    init: ShiftMap | None = None,
    params: PatchParams | None = None,
    target_valid: np.ndarray | None = None,
) -> ShiftMap:
    """Approximate nearest-neighbor field via PatchMatch.

    Alternates propagation (scan order flips each iteration) with random
    search around the current best (radius halving from max(w, h) to 1 px)
    for propagation_iters iterations.  Updates only ever lower the per-pixel
    distance, so the field energy is non-increasing; two runs with the same
    rng_seed produce identical fields.
    """
    params = params or PatchParams()
    arr = _as_image_array(img)
    in_d = as_inpaint_mask(mask)
    if not in_d.any():
        raise InvalidInputError("inpainting domain is empty")
    h, w = in_d.shape
    r = params.radius
    valid = _valid_centers(in_d, r, target_valid)
    if not valid.any():
        raise InfeasibleDomainError("no valid target patch exists outside the domain")

    rng = np.random.default_rng(params.rng_seed)
    if init is None:
        choices = np.argwhere(valid)
        picks = choices[rng.integers(choices.shape[0], size=int(in_d.sum()))]
        ty = np.zeros((h, w), dtype=np.int32)
        tx = np.zeros((h, w), dtype=np.int32)
        ys, xs = np.nonzero(in_d)
        ty[ys, xs] = picks[:, 0]
        tx[ys, xs] = picks[:, 1]
    else:
        ty, tx = init.targets()
        _repair_targets(ty, tx, in_d, valid)

    dist = kernels.compute_distances(arr, in_d, ty, tx, r)

    d_index = np.full((h, w), -1, dtype=np.int64)
    ys, xs = np.nonzero(in_d)
    d_index[ys, xs] = np.arange(ys.size)
    n_levels = int(math.floor(math.log2(max(h, w)))) + 1
    n_samples = 2 * n_levels  # two sweeps of the halving radius schedule

    for it in range(params.propagation_iters):
        rand = rng.random(size=(ys.size, n_samples, 2))
        kernels.patchmatch_pass(
            arr, in_d, valid, ty, tx, dist, r, it % 2 == 1, rand, d_index, n_samples, n_levels
        )

    yy, xx = np.mgrid[0:h, 0:w].astype(np.int32)
    return ShiftMap(dy=ty - yy, dx=tx - xx, domain=in_d)


def reconstruct(
    img: Image | np.ndarray,
    mask: AnnotationMask | np.ndarray,
    nnf: ShiftMap,
    patch_side: int,
) -> Image:
    """Fill the domain by weighted votes of every patch covering each pixel.

    Weights are exp(-d^2 / (2 sigma^2)) with sigma the 75th percentile of the
    participating patch distances; pixels outside the domain are untouched.
    """
    arr = _as_image_array(img)
    in_d = as_inpaint_mask(mask)
    r = patch_side // 2
    ty, tx = nnf.targets()
    _require_targets_inside(ty, tx, in_d, r)
    dist = kernels.compute_distances(arr, in_d, ty, tx, r)
    participating = dist[in_d]
    sigma = float(np.percentile(participating, 75)) if participating.size else 0.0
    if sigma <= 1e-12:
        sigma = 0.0
    out = kernels.accumulate_votes(arr, in_d, ty, tx, dist, r, sigma)
    clipped = np.clip(out, 0.0, 1.0)
    if isinstance(img, Image):
        return Image(clipped, colorspace=img.colorspace)
    return Image(clipped)


@dataclass(frozen=True)
class ExemplarResult:
    image: Image
    energy_history: list[list[float]]   # per pyramid scale, coarse to fine


def _box_down(arr: np.ndarray) -> np.ndarray:
    """Factor-2 box filter with edge replication for odd sizes."""
    h, w = arr.shape[:2]
    if h % 2 or w % 2:
        arr = np.pad(
            arr,
            [(0, h % 2), (0, w % 2)] + [(0, 0)] * (arr.ndim - 2),
            mode="edge",
        )
    return 0.25 * (arr[0::2, 0::2] + arr[1::2, 0::2] + arr[0::2, 1::2] + arr[1::2, 1::2])


def _mask_down(mask: np.ndarray, any_child: bool = True) -> np.ndarray:
    h, w = mask.shape
    if h % 2 or w % 2:
        mask = np.pad(mask, [(0, h % 2), (0, w % 2)], mode="edge")
    stacked = np.stack(
        [mask[0::2, 0::2], mask[1::2, 0::2], mask[0::2, 1::2], mask[1::2, 1::2]]
    )
    return stacked.any(axis=0) if any_child else stacked.all(axis=0)


def _upsample(arr: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    up = np.repeat(np.repeat(arr, 2, axis=0), 2, axis=1)
    return up[: shape[0], : shape[1]]


def inpaint_exemplar(
    img: Image,
    mask: AnnotationMask | np.ndarray,
    params: PatchParams | None = None,
    init_image: Image | None = None,
    target_valid: np.ndarray | None = None,
) -> ExemplarResult:
    """Coarse-to-fine exemplar inpainting of the domain D.

    Without init_image a TV inpainting pass provides the initialization.  At
    each scale the field/vote alternation runs until the maximum pixel change
    drops below 1/255 (or 10 loops); a vote that would raise the field energy
    is rejected and ends the scale.  Bit-identical outputs for equal seeds.
    """
    params = params or PatchParams()
    in_d = as_inpaint_mask(mask)
    if in_d.shape != (img.height, img.width):
        raise InvalidInputError(
            f"mask shape {in_d.shape} != image shape {(img.height, img.width)}"
        )
    if not in_d.any():
        return ExemplarResult(image=img, energy_history=[])

    if init_image is None:
        init_image = tv_inpaint(img, in_d, TvParams()).image
    elif init_image.data.shape != img.data.shape:
        raise InvalidInputError("init_image dimensions differ from img")

    r = params.radius
    side = params.patch_side

    # Build the pyramid, dropping scales that get too small to host patches.
    levels: list[dict] = []
    cur_img = init_image.data
    cur_mask = in_d
    cur_valid = (
        np.asarray(target_valid, dtype=bool) if target_valid is not None else None
    )
    for _ in range(params.scales):
        feasible = _valid_centers(cur_mask, r, cur_valid)
        if min(cur_mask.shape) < side or not feasible.any():
            break
        levels.append({"img": cur_img, "mask": cur_mask, "valid": cur_valid})
        cur_img = _box_down(cur_img)
        cur_mask = _mask_down(cur_mask, any_child=True)
        cur_valid = _mask_down(cur_valid, any_child=False) if cur_valid is not None else None
    if not levels:
        raise InfeasibleDomainError(
            "image too small or domain too large for the requested patch size"
        )

    nnf: ShiftMap | None = None
    u: np.ndarray | None = None
    history: list[list[float]] = []
    for depth, level in enumerate(reversed(levels)):
        scale_idx = len(levels) - 1 - depth
        lvl_mask = level["mask"]
        lvl_valid = level["valid"]
        if u is None:
            u = level["img"].copy()
        else:
            fine = level["img"].copy()
            up = _upsample(u, fine.shape[:2])
            fine[lvl_mask] = up[lvl_mask]
            u = fine
            nnf = _upsample_nnf(nnf, lvl_mask)

        energies: list[float] = []
        for alternation in range(MAX_ALTERNATIONS):
            seed = params.rng_seed * 10007 + scale_idx * 101 + alternation
            pm_params = replace(params, rng_seed=seed)
            nnf = patchmatch_nnf(u, lvl_mask, init=nnf, params=pm_params, target_valid=lvl_valid)
            energy = shift_map_energy(u, nnf, side)
            energies.append(energy)

            voted = reconstruct(u, lvl_mask, nnf, side).data
            new_energy = shift_map_energy(voted, nnf, side)
            if new_energy > energy:
                break
            change = float(np.abs(voted - u)[lvl_mask].max())
            u = voted
            energies.append(new_energy)
            if change < PIXEL_CHANGE_TOL:
                break
        history.append(energies)

    out = img.data.copy()
    out[in_d] = np.clip(u, 0.0, 1.0)[in_d]
    return ExemplarResult(
        image=Image(out, colorspace=img.colorspace), energy_history=history
    )


def _upsample_nnf(nnf: ShiftMap, fine_mask: np.ndarray) -> ShiftMap:
    """Nearest-neighbor upsampling of the offset field, offsets doubled."""
    h, w = fine_mask.shape
    dy = np.zeros((h, w), dtype=np.int32)
    dx = np.zeros((h, w), dtype=np.int32)
    src_y = np.minimum(np.arange(h) // 2, nnf.dy.shape[0] - 1)
    src_x = np.minimum(np.arange(w) // 2, nnf.dy.shape[1] - 1)
    dy[:, :] = 2 * nnf.dy[np.ix_(src_y, src_x)]
    dx[:, :] = 2 * nnf.dx[np.ix_(src_y, src_x)]
    return ShiftMap(dy=dy, dx=dx, domain=fine_mask)
