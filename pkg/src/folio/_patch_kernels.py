"""Numba kernels for the patch-based inpainting hot loops.

Conventions shared by every kernel:

* img is (h, w, c) float64; r = patch_side // 2.
* Source patches are centered at the clamped center of the inpainting pixel
  (pixels closer than r to the border use the nearest fully-inside patch).
* Target centers live where valid[ty, tx] is True, which already encodes
  "patch fully inside the image" and "center outside the inpainting domain".
* Ties between equal distances resolve to the lexicographically smallest
  (row, col) target, which makes every kernel deterministic.

Propagation is sequential by scan order (its correctness depends on it);
everything here stays single-threaded for exact reproducibility.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def clamp(v: int, lo: int, hi: int) -> int:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


@njit(cache=True)
def patch_ssd(img, ay, ax, by, bx, r):
    """Sum of squared differences over two fully-inside patches."""
    total = 0.0
    for oy in range(-r, r + 1):
        for ox in range(-r, r + 1):
            for c in range(img.shape[2]):
                diff = img[ay + oy, ax + ox, c] - img[by + oy, bx + ox, c]
                total += diff * diff
    return total


@njit(cache=True)
def patch_ssd_capped(img, ay, ax, by, bx, r, cap):
    """SSD with early exit once the running sum exceeds cap."""
    total = 0.0
    for oy in range(-r, r + 1):
        for ox in range(-r, r + 1):
            for c in range(img.shape[2]):
                diff = img[ay + oy, ax + ox, c] - img[by + oy, bx + ox, c]
                total += diff * diff
        if total > cap:
            return total
    return total


@njit(cache=True)
def compute_distances(img, in_d, ty, tx, r):
    h, w = in_d.shape
    dist = np.zeros((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            if in_d[y, x]:
                cy = clamp(y, r, h - 1 - r)
                cx = clamp(x, r, w - 1 - r)
                dist[y, x] = patch_ssd(img, cy, cx, ty[y, x], tx[y, x], r)
    return dist


@njit(cache=True)
def nnf_energy(img, in_d, ty, tx, r):
    h, w = in_d.shape
    total = 0.0
    for y in range(h):
        for x in range(w):
            if in_d[y, x]:
                cy = clamp(y, r, h - 1 - r)
                cx = clamp(x, r, w - 1 - r)
                total += patch_ssd(img, cy, cx, ty[y, x], tx[y, x], r)
    return total


@njit(cache=True)
def brute_force_pass(img, in_d, valid, r):
    """Exact nearest-neighbor field: full scan over all valid target centers."""
    h, w = in_d.shape
    ty = np.zeros((h, w), dtype=np.int32)
    tx = np.zeros((h, w), dtype=np.int32)
    dist = np.zeros((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            if not in_d[y, x]:
                continue
            cy = clamp(y, r, h - 1 - r)
            cx = clamp(x, r, w - 1 - r)
            best = np.inf
            by = -1
            bx = -1
            for yy in range(r, h - r):
                for xx in range(r, w - r):
                    if not valid[yy, xx]:
                        continue
                    d = patch_ssd_capped(img, cy, cx, yy, xx, r, best)
                    if d < best:
                        best = d
                        by = yy
                        bx = xx
            ty[y, x] = by
            tx[y, x] = bx
            dist[y, x] = best
    return ty, tx, dist


@njit(cache=True)
def _try_candidate(img, cy, cx, cand_y, cand_x, valid, r, best_d, best_y, best_x):
    h, w = valid.shape
    if cand_y < r or cand_y >= h - r or cand_x < r or cand_x >= w - r:
        return best_d, best_y, best_x
    if not valid[cand_y, cand_x]:
        return best_d, best_y, best_x
    if cand_y == best_y and cand_x == best_x:
        return best_d, best_y, best_x
    d = patch_ssd_capped(img, cy, cx, cand_y, cand_x, r, best_d)
    if d < best_d or (d == best_d and (cand_y < best_y or (cand_y == best_y and cand_x < best_x))):
        return d, cand_y, cand_x
    return best_d, best_y, best_x


@njit(cache=True)
def patchmatch_pass(img, in_d, valid, ty, tx, dist, r, reverse, rand, d_index, n_samples, n_levels):
    """One PatchMatch iteration: propagation + random search, in scan order.

    rand is (n_inpaint, n_samples, 2) uniform [0,1) draws consumed by the
    random-search candidates of this iteration; the radius schedule
    max(h, w) * (1/2)^k repeats until the samples are used up.  d_index maps
    a pixel to its row in rand.  Updates ty/tx/dist in place.
    """
    h, w = in_d.shape
    max_dim = max(h, w)
    for i in range(h * w):
        idx = h * w - 1 - i if reverse else i
        y = idx // w
        x = idx % w
        if not in_d[y, x]:
            continue
        cy = clamp(y, r, h - 1 - r)
        cx = clamp(x, r, w - 1 - r)
        best_d = dist[y, x]
        best_y = ty[y, x]
        best_x = tx[y, x]

        # Propagation: shifted targets of all four neighbors.  The two
        # scan-order neighbors carry this iteration's values, the other two
        # last iteration's.
        if x - 1 >= 0 and in_d[y, x - 1]:
            best_d, best_y, best_x = _try_candidate(
                img, cy, cx, ty[y, x - 1], tx[y, x - 1] + 1, valid, r, best_d, best_y, best_x
            )
        if x + 1 < w and in_d[y, x + 1]:
            best_d, best_y, best_x = _try_candidate(
                img, cy, cx, ty[y, x + 1], tx[y, x + 1] - 1, valid, r, best_d, best_y, best_x
            )
        if y - 1 >= 0 and in_d[y - 1, x]:
            best_d, best_y, best_x = _try_candidate(
                img, cy, cx, ty[y - 1, x] + 1, tx[y - 1, x], valid, r, best_d, best_y, best_x
            )
        if y + 1 < h and in_d[y + 1, x]:
            best_d, best_y, best_x = _try_candidate(
                img, cy, cx, ty[y + 1, x] - 1, tx[y + 1, x], valid, r, best_d, best_y, best_x
            )

        # Random search around the current best, radius halving to 1 px.
        row = d_index[y, x]
        for s in range(n_samples):
            radius = float(max_dim) * 0.5 ** (s % n_levels)
            if radius < 1.0:
                continue
            cand_y = best_y + int(np.floor((2.0 * rand[row, s, 0] - 1.0) * radius + 0.5))
            cand_x = best_x + int(np.floor((2.0 * rand[row, s, 1] - 1.0) * radius + 0.5))
            best_d, best_y, best_x = _try_candidate(
                img, cy, cx, cand_y, cand_x, valid, r, best_d, best_y, best_x
            )

        ty[y, x] = best_y
        tx[y, x] = best_x
        dist[y, x] = best_d
    return ty, tx, dist


@njit(cache=True)
def accumulate_votes(img, in_d, ty, tx, dist, r, sigma):
    """Weighted patch voting: every patch covering an inpainting pixel
    contributes its nearest neighbor's corresponding sample."""
    h, w, c = img.shape
    acc = np.zeros((h, w, c), dtype=np.float64)
    wsum = np.zeros((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            if not in_d[y, x]:
                continue
            cy = clamp(y, r, h - 1 - r)
            cx = clamp(x, r, w - 1 - r)
            if sigma > 0.0:
                weight = np.exp(-dist[y, x] / (2.0 * sigma * sigma))
                if weight < 1e-300:
                    weight = 1e-300
            else:
                weight = 1.0
            for oy in range(-r, r + 1):
                for ox in range(-r, r + 1):
                    zy = cy + oy
                    zx = cx + ox
                    if in_d[zy, zx]:
                        for ch in range(c):
                            acc[zy, zx, ch] += weight * img[ty[y, x] + oy, tx[y, x] + ox, ch]
                        wsum[zy, zx] += weight

    out = img.copy()
    for y in range(h):
        for x in range(w):
            if in_d[y, x] and wsum[y, x] > 0.0:
                for ch in range(c):
                    out[y, x, ch] = acc[y, x, ch] / wsum[y, x]
    return out
