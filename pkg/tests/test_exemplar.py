import numpy as np
import pytest
from scipy import ndimage

from conftest import motif_scene, psnr
from folio.errors import InfeasibleDomainError, InvalidInputError
from folio.exemplar import (
    PatchParams,
    ShiftMap,
    brute_force_nnf,
    inpaint_exemplar,
    patch_distance,
    patchmatch_nnf,
    reconstruct,
    shift_map_energy,
)
from folio.raster import Image


def periodic_texture(h=64, w=64, tile=8, channels=1, seed=0):
    """Exact-repeat texture built by tiling a smoothed random tile."""
    rng = np.random.default_rng(seed)
    base = ndimage.gaussian_filter(rng.uniform(0, 1, size=(tile, tile, channels)), 1.0, mode="wrap")
    lo, hi = base.min(), base.max()
    base = (base - lo) / (hi - lo + 1e-9) * 0.8 + 0.1
    reps = (h + tile - 1) // tile, (w + tile - 1) // tile
    return np.tile(base, (reps[0], reps[1], 1))[:h, :w]


def smooth_texture(h=64, w=64, channels=1, seed=0, sigma=2.0):
    """Non-repeating correlated texture."""
    rng = np.random.default_rng(seed)
    arr = ndimage.gaussian_filter(rng.uniform(0, 1, size=(h, w, channels)), sigma)
    lo, hi = arr.min(), arr.max()
    return (arr - lo) / (hi - lo + 1e-9) * 0.8 + 0.1


def box_mask(h, w, box):
    mask = np.zeros((h, w), dtype=bool)
    y0, x0, y1, x1 = box
    mask[y0:y1, x0:x1] = True
    return mask


def assert_valid_shift_map(nnf: ShiftMap, in_d, r):
    ty, tx = nnf.targets()
    h, w = in_d.shape
    ys, xs = np.nonzero(in_d)
    t_y, t_x = ty[ys, xs], tx[ys, xs]
    assert np.all((t_y >= r) & (t_y < h - r) & (t_x >= r) & (t_x < w - r))
    assert not in_d[t_y, t_x].any()


class TestPatchDistance:
    def test_identity_shift_is_zero(self, rng):
        img = rng.uniform(0, 1, size=(12, 12, 3))
        assert patch_distance(img, (5, 6), (5, 6), 5) == 0.0

    def test_constant_image_is_zero(self):
        img = np.full((10, 10, 1), 0.4)
        assert patch_distance(img, (3, 3), (6, 5), 5) == 0.0

    def test_matches_double_loop_oracle(self, rng):
        img = rng.uniform(0, 1, size=(12, 12, 2))
        a, b = (4, 5), (7, 3)
        got = patch_distance(img, a, b, 5)

        total = 0.0
        for oy in range(-2, 3):
            for ox in range(-2, 3):
                for c in range(2):
                    diff = img[a[1] + oy, a[0] + ox, c] - img[b[1] + oy, b[0] + ox, c]
                    total += diff * diff
        assert got == pytest.approx(total, rel=1e-12)

    def test_symmetric(self, rng):
        img = rng.uniform(0, 1, size=(12, 12, 1))
        assert patch_distance(img, (4, 4), (8, 7), 7) == pytest.approx(
            patch_distance(img, (8, 7), (4, 4), 7)
        )

    def test_out_of_bounds_rejected(self, rng):
        img = rng.uniform(0, 1, size=(8, 8, 1))
        with pytest.raises(InvalidInputError):
            patch_distance(img, (1, 4), (4, 4), 5)


class TestBruteForce:
    def test_single_valid_target(self, rng):
        img = rng.uniform(0, 1, size=(12, 12, 1))
        in_d = np.ones((12, 12), dtype=bool)
        in_d[6, 6] = False
        nnf = brute_force_nnf(img, in_d, 5)
        ty, tx = nnf.targets()
        assert np.all(ty[in_d] == 6)
        assert np.all(tx[in_d] == 6)

    def test_periodic_texture_attains_zero(self):
        img = periodic_texture(32, 32, tile=8, seed=1)
        in_d = box_mask(32, 32, (8, 8, 16, 16))
        nnf = brute_force_nnf(img, in_d, 5)
        ty, tx = nnf.targets()
        for y, x in np.argwhere(in_d):
            cy = np.clip(y, 2, 29)
            cx = np.clip(x, 2, 29)
            assert patch_distance(img, (int(cx), int(cy)), (int(tx[y, x]), int(ty[y, x])), 5) <= 1e-12

    def test_beats_random_alternatives(self, rng):
        img = rng.uniform(0, 1, size=(32, 32, 1))
        in_d = box_mask(32, 32, (12, 12, 20, 20))
        nnf = brute_force_nnf(img, in_d, 5)
        ty, tx = nnf.targets()

        valid = np.zeros((32, 32), dtype=bool)
        valid[2:30, 2:30] = True
        valid &= ~in_d
        candidates = np.argwhere(valid)
        pts = np.argwhere(in_d)
        for y, x in pts[rng.integers(len(pts), size=20)]:
            cy, cx = int(np.clip(y, 2, 29)), int(np.clip(x, 2, 29))
            best = patch_distance(img, (cx, cy), (int(tx[y, x]), int(ty[y, x])), 5)
            for ay, ax in candidates[rng.integers(len(candidates), size=100)]:
                alt = patch_distance(img, (cx, cy), (int(ax), int(ay)), 5)
                assert best <= alt + 1e-12

    def test_tie_breaks_lexicographic(self):
        img = np.full((16, 16, 1), 0.5)
        in_d = box_mask(16, 16, (6, 6, 10, 10))
        nnf = brute_force_nnf(img, in_d, 3)
        ty, tx = nnf.targets()
        # All distances are zero; smallest (row, col) target must win.
        assert np.all(ty[in_d] == 1)
        assert np.all(tx[in_d] == 1)

    def test_size_guard(self):
        img = np.zeros((130, 16, 1))
        with pytest.raises(InvalidInputError):
            brute_force_nnf(img, np.zeros((130, 16), dtype=bool), 5)

    def test_infeasible_domain(self):
        img = np.zeros((10, 10, 1))
        in_d = np.ones((10, 10), dtype=bool)
        with pytest.raises(InfeasibleDomainError):
            brute_force_nnf(img, in_d, 5)


class TestPatchMatch:
    def test_brute_force_init_is_fixpoint(self):
        img = smooth_texture(40, 40, seed=2)
        in_d = box_mask(40, 40, (14, 14, 24, 24))
        exact = brute_force_nnf(img, in_d, 5)
        params = PatchParams(patch_side=5, propagation_iters=4, rng_seed=7)
        out = patchmatch_nnf(img, in_d, init=exact, params=params)
        assert np.array_equal(out.dy[in_d], exact.dy[in_d])
        assert np.array_equal(out.dx[in_d], exact.dx[in_d])

    def test_deterministic(self):
        img = smooth_texture(48, 48, seed=3)
        in_d = box_mask(48, 48, (16, 16, 30, 30))
        params = PatchParams(patch_side=5, propagation_iters=6, rng_seed=11)
        a = patchmatch_nnf(img, in_d, params=params)
        b = patchmatch_nnf(img, in_d, params=params)
        assert np.array_equal(a.dy, b.dy)
        assert np.array_equal(a.dx, b.dx)

    def test_energy_non_increasing_over_iterations(self):
        img = smooth_texture(48, 48, seed=4)
        in_d = box_mask(48, 48, (16, 16, 30, 30))
        energies = []
        for iters in range(1, 9):
            params = PatchParams(patch_side=5, propagation_iters=iters, rng_seed=5)
            nnf = patchmatch_nnf(img, in_d, params=params)
            energies.append(shift_map_energy(img, nnf, 5))
        assert np.all(np.diff(energies) <= 1e-12)

    def test_close_to_brute_force(self):
        img = motif_scene(seed=6)
        in_d = box_mask(64, 64, (10, 10, 22, 22))
        exact = brute_force_nnf(img, in_d, 5)
        e_star = shift_map_energy(img, exact, 5)
        params = PatchParams(patch_side=5, propagation_iters=12, rng_seed=1)
        nnf = patchmatch_nnf(img, in_d, params=params)
        assert shift_map_energy(img, nnf, 5) <= 1.1 * e_star

    def test_targets_always_valid(self):
        img = smooth_texture(32, 32, seed=8)
        in_d = box_mask(32, 32, (2, 2, 26, 29))  # touches the border region
        params = PatchParams(patch_side=7, propagation_iters=4, rng_seed=2)
        nnf = patchmatch_nnf(img, in_d, params=params)
        assert_valid_shift_map(nnf, in_d, 3)

    def test_empty_domain_rejected(self):
        img = np.zeros((16, 16, 1))
        with pytest.raises(InvalidInputError):
            patchmatch_nnf(img, np.zeros((16, 16), dtype=bool))


class TestReconstruct:
    def test_constant_image_stays_constant(self, rng):
        img = np.full((24, 24, 1), 0.7)
        in_d = box_mask(24, 24, (8, 8, 16, 16))
        nnf = patchmatch_nnf(img, in_d, params=PatchParams(patch_side=5, rng_seed=0))
        out = reconstruct(img, in_d, nnf, 5)
        assert np.allclose(out.data, 0.7, atol=1e-12)

    def test_zero_distance_field_reproduces_texture(self):
        img = periodic_texture(48, 48, tile=8, seed=9)
        in_d = box_mask(48, 48, (16, 16, 24, 24))
        # Shift map jumping exactly one period right: zero distance everywhere.
        dy = np.zeros((48, 48), dtype=np.int32)
        dx = np.full((48, 48), 8, dtype=np.int32)
        nnf = ShiftMap(dy=dy, dx=dx, domain=in_d)
        out = reconstruct(img, in_d, nnf, 7)
        assert psnr(img, out.data, where=in_d) >= 40.0

    def test_uniform_source_fills_with_its_color(self):
        img = np.full((32, 32, 1), 0.25)
        img[:, 16:] = np.random.default_rng(0).uniform(0.5, 1.0, size=(32, 16, 1))
        in_d = box_mask(32, 32, (12, 20, 18, 26))
        # Every vote comes from deep inside the uniform left half.
        dy = np.zeros((32, 32), dtype=np.int32)
        dx = np.zeros((32, 32), dtype=np.int32)
        ys, xs = np.nonzero(in_d)
        dy[ys, xs] = 8 - ys
        dx[ys, xs] = 8 - xs
        nnf = ShiftMap(dy=dy, dx=dx, domain=in_d)
        out = reconstruct(img, in_d, nnf, 5)
        assert np.allclose(out.data[in_d], 0.25, atol=1e-12)

    def test_never_modifies_outside_domain(self, rng):
        img = rng.uniform(0, 1, size=(24, 24, 3))
        in_d = box_mask(24, 24, (6, 6, 14, 14))
        nnf = patchmatch_nnf(img, in_d, params=PatchParams(patch_side=5, rng_seed=3))
        out = reconstruct(img, in_d, nnf, 5)
        assert np.array_equal(out.data[~in_d], img[~in_d])


class TestInpaintExemplar:
    def test_empty_domain_returns_input(self, rng):
        img = Image(rng.uniform(0, 1, size=(16, 16, 3)))
        result = inpaint_exemplar(img, np.zeros((16, 16), dtype=bool))
        assert result.image is img

    def test_periodic_texture_hole(self):
        truth = periodic_texture(64, 64, tile=8, channels=3, seed=10)
        in_d = box_mask(64, 64, (24, 24, 40, 40))
        torn = truth.copy()
        torn[in_d] = 0.5
        params = PatchParams(patch_side=7, propagation_iters=12, scales=2, rng_seed=0)
        result = inpaint_exemplar(Image(torn), in_d, params=params)
        assert psnr(truth, result.image.data, where=in_d) >= 30.0

    def test_bit_identical_for_equal_seeds(self):
        truth = periodic_texture(48, 48, tile=8, channels=1, seed=11)
        in_d = box_mask(48, 48, (18, 18, 30, 30))
        torn = truth.copy()
        torn[in_d] = 0.2
        params = PatchParams(patch_side=5, propagation_iters=6, scales=2, rng_seed=21)
        a = inpaint_exemplar(Image(torn), in_d, params=params)
        b = inpaint_exemplar(Image(torn), in_d, params=params)
        assert np.array_equal(a.image.data, b.image.data)

    def test_energy_history_monotone_within_scale(self):
        truth = periodic_texture(48, 48, tile=8, channels=1, seed=12)
        in_d = box_mask(48, 48, (18, 18, 30, 30))
        torn = truth.copy()
        torn[in_d] = 0.9
        params = PatchParams(patch_side=5, propagation_iters=8, scales=2, rng_seed=4)
        result = inpaint_exemplar(Image(torn), in_d, params=params)
        assert result.energy_history
        for trace in result.energy_history:
            assert np.all(np.diff(trace) <= 1e-9)

    def test_outside_domain_untouched(self):
        truth = periodic_texture(48, 48, tile=8, channels=3, seed=13)
        in_d = box_mask(48, 48, (20, 20, 28, 28))
        torn = truth.copy()
        torn[in_d] = 0.0
        result = inpaint_exemplar(Image(torn), in_d, params=PatchParams(patch_side=5, scales=2))
        assert np.array_equal(result.image.data[~in_d], torn[~in_d])
