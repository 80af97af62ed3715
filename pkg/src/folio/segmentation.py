"""Semi-supervised detection of the inpainting domain.

A seed-initialized binary Chan-Vese pass extracts a high-precision training
region; k-means over the 13-dim feature stack then propagates that region's
appearance to the whole image, followed by a morphological refinement step.

The Chan-Vese energy

    E(region) = mu * Length + nu * Area
                + lambda1 * sum_in (f - c1)^2 + lambda2 * sum_out (f - c2)^2

is minimized by discrete pixel-flip descent: red-black half-sweeps flip every
pixel whose flip strictly lowers the energy at the current region means, then
the means are refreshed.  Same-color pixels are never 4-adjacent and the fit
term is separable at fixed (c1, c2), so each half-sweep strictly decreases the
true energy; the descent is deterministic and monotone by construction.
Length is the count of 4-neighbor pixel pairs with differing membership
(interior pairs only).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateResultError, InvalidInputError
from .raster import FeatureImage, Image

SEED_DISC_RADIUS = 5


@dataclass(frozen=True)
class ChanVeseParams:
    """Weights and stopping controls for the binary Chan-Vese model."""

    mu: float = 0.2          # length weight (on [0,1] data)
    nu: float = 0.0          # area weight
    lambda1: float = 1.0     # inside fit weight
    lambda2: float = 1.0     # outside fit weight
    max_iter: int = 1000     # maximum number of full sweeps
    tol: float = 0.0         # relative energy-change stop threshold

    def __post_init__(self):
        if self.mu <= 0 or self.lambda1 <= 0 or self.lambda2 <= 0:
            raise InvalidInputError("mu, lambda1 and lambda2 must be positive")
        if self.nu < 0:
            raise InvalidInputError("nu must be non-negative")
        if self.max_iter < 1:
            raise InvalidInputError("max_iter must be at least 1")


@dataclass(frozen=True)
class ChanVeseResult:
    mask: np.ndarray          # boolean HxW region
    c1: float                 # mean intensity inside
    c2: float                 # mean intensity outside
    iterations: int           # full sweeps performed
    energies: np.ndarray      # energy after init and after each sweep


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel cluster ids in [0, K)."""

    ids: np.ndarray
    n_clusters: int

    def __post_init__(self):
        arr = np.asarray(self.ids)
        if arr.ndim != 2:
            raise InvalidInputError(f"label map must be HxW, got shape {arr.shape}")
        if arr.size and int(arr.max()) >= self.n_clusters:
            raise InvalidInputError("label map contains id >= n_clusters")
        object.__setattr__(self, "ids", np.ascontiguousarray(arr.astype(np.int32)))


def _boundary_length(region: np.ndarray) -> int:
    """Count of interior 4-neighbor pairs with differing membership."""
    r = region.astype(np.int8)
    horiz = np.count_nonzero(r[:, 1:] != r[:, :-1])
    vert = np.count_nonzero(r[1:, :] != r[:-1, :])
    return horiz + vert


def chan_vese_energy(
    img: Image | np.ndarray, region: np.ndarray, params: ChanVeseParams
) -> float:
    """Evaluate the Chan-Vese energy with (c1, c2) set to the region means."""
    f = img.to_gray().channel(0) if isinstance(img, Image) else np.asarray(img, dtype=np.float64)
    region = np.asarray(region, dtype=bool)
    if f.shape != region.shape:
        raise InvalidInputError(f"region shape {region.shape} != image shape {f.shape}")

    n_in = int(region.sum())
    n_out = region.size - n_in
    fit_in = 0.0
    fit_out = 0.0
    if n_in:
        c1 = float(f[region].mean())
        fit_in = float(((f[region] - c1) ** 2).sum())
    if n_out:
        c2 = float(f[~region].mean())
        fit_out = float(((f[~region] - c2) ** 2).sum())
    return (
        params.mu * _boundary_length(region)
        + params.nu * n_in
        + params.lambda1 * fit_in
        + params.lambda2 * fit_out
    )


def _neighbor_in_counts(region: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per pixel: number of in-region 4-neighbors and number of in-image neighbors."""
    r = region.astype(np.int32)
    n_in = np.zeros_like(r)
    n_in[1:, :] += r[:-1, :]
    n_in[:-1, :] += r[1:, :]
    n_in[:, 1:] += r[:, :-1]
    n_in[:, :-1] += r[:, 1:]

    h, w = region.shape
    n_nb = np.full((h, w), 4, dtype=np.int32)
    n_nb[0, :] -= 1
    n_nb[-1, :] -= 1
    n_nb[:, 0] -= 1
    n_nb[:, -1] -= 1
    return n_in, n_nb


def _flip_half_sweep(
    f: np.ndarray,
    region: np.ndarray,
    color: np.ndarray,
    params: ChanVeseParams,
) -> int:
    """Flip every pixel of one checkerboard color whose flip strictly lowers
    the energy at the current region means.  Returns the flip count."""
    n_in_total = int(region.sum())
    n_out_total = region.size - n_in_total
    c1 = float(f[region].mean()) if n_in_total else 0.0
    c2 = float(f[~region].mean()) if n_out_total else 0.0

    nb_in, nb_all = _neighbor_in_counts(region)
    nb_out = nb_all - nb_in
    fit1 = params.lambda1 * (f - c1) ** 2
    fit2 = params.lambda2 * (f - c2) ** 2

    # Membership gain for currently-outside pixels, loss for inside pixels.
    delta_join = params.mu * (nb_out - nb_in) + params.nu + fit1 - fit2
    delta_leave = params.mu * (nb_in - nb_out) - params.nu - fit1 + fit2

    flip = color & np.where(region, delta_leave < 0.0, delta_join < 0.0)
    count = int(flip.sum())
    if count:
        region[flip] = ~region[flip]
    return count


def chan_vese_segment(
    img: Image | np.ndarray,
    seeds: list[tuple[int, int]],
    params: ChanVeseParams | None = None,
) -> ChanVeseResult:
    """Seed-initialized binary Chan-Vese segmentation.

    seeds are (x, y) pixel coordinates; the contour starts as the union of
    radius-5 discs around them.  Raises DegenerateResultError if the region
    collapses to the empty set or loses every seed.
    """
    params = params or ChanVeseParams()
    f = img.to_gray().channel(0) if isinstance(img, Image) else np.asarray(img, dtype=np.float64)
    h, w = f.shape

    if not seeds:
        raise InvalidInputError("at least one seed pixel is required")
    for x, y in seeds:
        if not (0 <= x < w and 0 <= y < h):
            raise InvalidInputError(f"seed (x={x}, y={y}) lies outside the {h}x{w} image")

    yy, xx = np.mgrid[0:h, 0:w]
    region = np.zeros((h, w), dtype=bool)
    for x, y in seeds:
        region |= (xx - x) ** 2 + (yy - y) ** 2 <= SEED_DISC_RADIUS**2

    red = (yy + xx) % 2 == 0
    black = ~red

    energies = [chan_vese_energy(f, region, params)]
    sweeps = 0
    for sweeps in range(1, params.max_iter + 1):
        flips = _flip_half_sweep(f, region, red, params)
        flips += _flip_half_sweep(f, region, black, params)
        if not region.any():
            raise DegenerateResultError(
                f"contour collapsed to the empty set after {sweeps} sweeps",
                iterations=sweeps,
            )
        energies.append(chan_vese_energy(f, region, params))
        if flips == 0:
            break
        if params.tol > 0 and energies[-2] > 0:
            if (energies[-2] - energies[-1]) / abs(energies[-2]) < params.tol:
                break

    if not any(region[y, x] for x, y in seeds):
        raise DegenerateResultError(
            f"segmented region contains no seed after {sweeps} sweeps", iterations=sweeps
        )

    inside = f[region]
    outside = f[~region]
    c1 = float(inside.mean())
    c2 = float(outside.mean()) if outside.size else c1
    if abs(c1 - c2) <= 1e-12:
        raise DegenerateResultError(
            f"no intensity separation between region and background after {sweeps} sweeps",
            iterations=sweeps,
        )
    return ChanVeseResult(
        mask=region, c1=c1, c2=c2, iterations=sweeps, energies=np.asarray(energies)
    )


# ---------------------------------------------------------------------------
# k-means labeling
# ---------------------------------------------------------------------------

KMEANS_MAX_ITER = 300


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding."""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[i:] = points[rng.integers(n, size=k - i)]
            break
        probs = d2 / total
        centers[i] = points[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, ((points - centers[i]) ** 2).sum(axis=1))
    return centers


def _pairwise_sq(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # |p - c|^2 = |p|^2 - 2 p.c + |c|^2 ; the |p|^2 term is constant per row
    # and irrelevant for argmin, but kept so inertia reads off directly.
    cross = points @ centers.T
    p2 = (points**2).sum(axis=1)[:, None]
    c2 = (centers**2).sum(axis=1)[None, :]
    return np.maximum(p2 - 2.0 * cross + c2, 0.0)


def _lloyd(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Lloyd iterations to assignment fixpoint (or KMEANS_MAX_ITER)."""
    k = centers.shape[0]
    labels = np.full(points.shape[0], -1, dtype=np.int32)
    for _ in range(KMEANS_MAX_ITER):
        d2 = _pairwise_sq(points, centers)
        new_labels = np.argmin(d2, axis=1).astype(np.int32)

        # Re-seed empty clusters at the point farthest from its assigned centroid.
        assigned = d2[np.arange(points.shape[0]), new_labels]
        for c in range(k):
            if not np.any(new_labels == c):
                far = int(np.argmax(assigned))
                centers[c] = points[far]
                new_labels[far] = c
                assigned[far] = 0.0

        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            member = labels == c
            if member.any():
                centers[c] = points[member].mean(axis=0)

    d2 = _pairwise_sq(points, centers)
    labels = np.argmin(d2, axis=1).astype(np.int32)
    inertia = float(d2[np.arange(points.shape[0]), labels].sum())
    return labels, centers, inertia


def kmeans_points(
    points: np.ndarray, k: int, restarts: int = 5, rng_seed: int = 0
) -> tuple[np.ndarray, np.ndarray, float]:
    """Best-of-restarts k-means on raw points; returns (labels, centers, inertia)."""
    points = np.asarray(points, dtype=np.float64)
    if k < 2:
        raise InvalidInputError("k must be at least 2")
    n_distinct = np.unique(points, axis=0).shape[0]
    if k > n_distinct:
        warnings.warn(
            f"k={k} exceeds the {n_distinct} distinct points; reducing k",
            RuntimeWarning,
            stacklevel=2,
        )
        k = max(n_distinct, 1)
        if k == 1:
            labels = np.zeros(points.shape[0], dtype=np.int32)
            return labels, points[:1].copy(), 0.0

    rng = np.random.default_rng(rng_seed)
    best: tuple[np.ndarray, np.ndarray, float] | None = None
    for _ in range(max(restarts, 1)):
        centers = _kmeans_pp_init(points, k, rng)
        labels, centers, inertia = _lloyd(points, centers)
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia)
    return best


def kmeans_label(
    features: FeatureImage, k: int = 35, restarts: int = 5, rng_seed: int = 0
) -> tuple[LabelMap, np.ndarray]:
    """Cluster the per-pixel feature vectors into k classes.

    Deterministic given rng_seed; the restart with the lowest within-cluster
    sum of squares wins.
    """
    points = features.as_points()
    labels, centers, _ = kmeans_points(points, k, restarts=restarts, rng_seed=rng_seed)
    ids = labels.reshape(features.height, features.width)
    return LabelMap(ids=ids, n_clusters=centers.shape[0]), centers


def propagate_training_labels(
    labels: LabelMap, training: np.ndarray, min_overlap: float = 0.05
) -> np.ndarray:
    """Union of every cluster holding at least min_overlap of the training pixels."""
    training = np.asarray(training, dtype=bool)
    if training.shape != labels.ids.shape:
        raise InvalidInputError(
            f"training shape {training.shape} != label map shape {labels.ids.shape}"
        )
    n_training = int(training.sum())
    if n_training == 0:
        raise InvalidInputError("training mask is empty")

    counts = np.bincount(labels.ids[training].ravel(), minlength=labels.n_clusters)
    selected = np.flatnonzero(counts / n_training >= min_overlap)
    return np.isin(labels.ids, selected)


def refine_mask(mask: np.ndarray, min_area: int = 20, closing_radius: int = 2) -> np.ndarray:
    """Morphological closing with a disc, then removal of small 4-connected
    components.  The (close, remove) pair is iterated to a fixpoint so the
    operation is idempotent."""
    current = np.asarray(mask, dtype=bool)
    structure = _disc(closing_radius)
    four = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

    for _ in range(16):
        closed = _closing(current, structure) if closing_radius > 0 else current
        labeled, n = ndimage.label(closed, structure=four)
        if n:
            areas = np.bincount(labeled.ravel())
            keep = np.flatnonzero(areas >= min_area)
            keep = keep[keep != 0]
            cleaned = np.isin(labeled, keep)
        else:
            cleaned = closed
        if np.array_equal(cleaned, current):
            return cleaned
        current = cleaned
    return current


def _disc(radius: int) -> np.ndarray:
    if radius <= 0:
        return np.ones((1, 1), dtype=bool)
    span = np.arange(-radius, radius + 1)
    yy, xx = np.meshgrid(span, span, indexing="ij")
    return xx**2 + yy**2 <= radius**2


def _closing(mask: np.ndarray, structure: np.ndarray) -> np.ndarray:
    """Closing with infinite-canvas semantics (pad so the border never erodes)."""
    pad = max(structure.shape) // 2 + 1
    padded = np.pad(mask, pad, mode="constant", constant_values=False)
    dilated = ndimage.binary_dilation(padded, structure=structure)
    eroded = ndimage.binary_erosion(dilated, structure=structure)
    return eroded[pad:-pad, pad:-pad]
