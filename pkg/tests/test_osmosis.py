import numpy as np
import pytest

from folio.errors import IllPosedError, InvalidInputError
from folio.osmosis import (
    DriftField,
    OsmosisProblem,
    assemble_drift,
    canonical_drift,
    evolve_parabolic,
    osmosis_restore,
    solve_elliptic,
)
from folio.raster import AnnotationMask, Image, Label


def smooth_channel(h, w, seed=0, lo=0.2, hi=0.9):
    rng = np.random.default_rng(seed)
    base = rng.uniform(size=(h // 4 + 2, w // 4 + 2))
    up = np.kron(base, np.ones((4, 4)))[:h, :w]
    from scipy import ndimage

    sm = ndimage.gaussian_filter(up, 2.0)
    sm = (sm - sm.min()) / (sm.max() - sm.min() + 1e-12)
    return lo + (hi - lo) * sm


def box_annotation(h, w, box, rim_label=None):
    labels = np.zeros((h, w), dtype=np.uint8)
    y0, x0, y1, x1 = box
    labels[y0:y1, x0:x1] = int(Label.INPAINT)
    if rim_label is not None:
        ring = np.zeros((h, w), dtype=bool)
        ring[y0 - 1 : y1 + 1, x0 - 1 : x1 + 1] = True
        ring[y0:y1, x0:x1] = False
        labels[ring] = int(rim_label)
    return AnnotationMask(labels)


class TestCanonicalDrift:
    def test_constant_image_zero_field(self):
        d = canonical_drift(np.full((8, 8), 0.5))
        assert np.all(d.d1 == 0.0)
        assert np.all(d.d2 == 0.0)

    def test_multiplicative_invariance_exact(self):
        f = smooth_channel(12, 12, seed=1, lo=0.2, hi=0.9)
        base = canonical_drift(f)
        for c in (0.5, 2.0):
            scaled = canonical_drift(np.clip(c * f, 0, None))
            assert np.array_equal(scaled.d1, base.d1) or np.allclose(
                scaled.d1, base.d1, atol=1e-12
            )
            assert np.allclose(scaled.d2, base.d2, atol=1e-12)

    def test_exponential_profile_matches_closed_form(self):
        a = 0.13
        x = np.arange(16)
        img = np.tile(np.exp(a * x) / np.exp(a * 15), (8, 1))
        d = canonical_drift(img)
        # 2 (e^a - 1) / (e^a + 1) = 2 tanh(a/2) at every horizontal half-point
        expected = 2.0 * np.tanh(a / 2.0)
        assert np.allclose(d.d1, expected, atol=1e-12)
        assert np.allclose(d.d2, 0.0, atol=1e-12)

    def test_half_grid_shapes(self):
        d = canonical_drift(np.full((5, 7), 0.4))
        assert d.d1.shape == (5, 6)
        assert d.d2.shape == (4, 7)


class TestAssembleDrift:
    def test_foreign_equals_base_is_identity(self):
        f = smooth_channel(10, 10, seed=2)
        base = canonical_drift(f)
        ann = box_annotation(10, 10, (3, 3, 7, 7))
        out = assemble_drift(base, base, ann)
        assert np.allclose(out.d1, base.d1)
        assert np.allclose(out.d2, base.d2)

    def test_all_keep_returns_base(self):
        f = smooth_channel(10, 10, seed=3)
        g = smooth_channel(10, 10, seed=4)
        base = canonical_drift(f)
        foreign = canonical_drift(g)
        ann = AnnotationMask.blank(10, 10)
        out = assemble_drift(base, foreign, ann)
        assert np.array_equal(out.d1, base.d1)
        assert np.array_equal(out.d2, base.d2)

    def test_manual_splice_oracle(self):
        h = w = 12
        base = canonical_drift(smooth_channel(h, w, seed=5))
        foreign = canonical_drift(smooth_channel(h, w, seed=6))
        ann = box_annotation(h, w, (4, 4, 8, 8))
        out = assemble_drift(base, foreign, ann)

        in_d = ann.inpaint
        for y in range(h):
            for x in range(w - 1):
                left, right = in_d[y, x], in_d[y, x + 1]
                if left and right:
                    expected = foreign.d1[y, x]
                elif left or right:
                    expected = 0.5 * (base.d1[y, x] + foreign.d1[y, x])
                else:
                    expected = base.d1[y, x]
                assert out.d1[y, x] == pytest.approx(expected, abs=1e-15)

    def test_zero_drift_line_zeroes_only_its_links(self):
        # 2-px thick vertical white line: only links between marked pixels
        # lose their drift.
        h = w = 10
        base = canonical_drift(smooth_channel(h, w, seed=7))
        labels = np.zeros((h, w), dtype=np.uint8)
        labels[2:8, 2:8] = int(Label.INPAINT)
        labels[2:8, 4:6] = int(Label.ZERO_DRIFT_EDGE)
        ann = AnnotationMask(labels)
        out = assemble_drift(base, base, ann)
        # Crossing links (between the two marked columns) are zeroed.
        assert np.all(out.d1[2:8, 4] == 0.0)
        # Vertical links within each marked column are zeroed too.
        assert np.all(out.d2[2:7, 4] == 0.0)
        # Links from a marked to an unmarked pixel keep their drift.
        assert np.array_equal(out.d1[2:8, 3], base.d1[2:8, 3])
        assert np.array_equal(out.d1[2:8, 5], base.d1[2:8, 5])


class TestSolveElliptic:
    def test_reproduces_image_from_its_own_drift(self):
        f = smooth_channel(20, 20, seed=8)
        ann = box_annotation(20, 20, (5, 5, 15, 15))
        problem = OsmosisProblem(
            base=f, annotation=ann, drift=canonical_drift(f), bc_mode="dirichlet"
        )
        u = solve_elliptic(problem)
        assert np.abs(u - f).max() <= 1e-6

    def test_zero_drift_constant_dirichlet_gives_constant(self):
        f = np.full((12, 12), 0.35)
        ann = box_annotation(12, 12, (3, 3, 9, 9))
        zero = DriftField(d1=np.zeros((12, 11)), d2=np.zeros((11, 12)))
        problem = OsmosisProblem(base=f, annotation=ann, drift=zero)
        u = solve_elliptic(problem)
        assert np.allclose(u, 0.35, atol=1e-12)

    def test_matches_dense_oracle_on_random_problem(self, rng):
        h = w = 16
        f = np.clip(smooth_channel(h, w, seed=9) + rng.normal(0, 0.05, (h, w)), 0.05, 1)
        ann = box_annotation(h, w, (4, 5, 11, 12))
        drift = canonical_drift(smooth_channel(h, w, seed=10))
        problem = OsmosisProblem(base=f, annotation=ann, drift=drift)
        u = solve_elliptic(problem)

        # Independent dense assembly of the same five-point stencil.
        in_d = ann.inpaint
        idx = {tuple(p): i for i, p in enumerate(np.argwhere(in_d))}
        n = len(idx)
        a = np.zeros((n, n))
        b = np.zeros(n)
        for (y, x), i in idx.items():
            for dy, dx, sign in ((0, 1, 1), (0, -1, -1), (1, 0, 1), (-1, 0, -1)):
                ny, nx = y + dy, x + dx
                if not (0 <= ny < h and 0 <= nx < w):
                    continue
                if dx == 1:
                    d = drift.d1[y, x]
                elif dx == -1:
                    d = drift.d1[y, x - 1]
                elif dy == 1:
                    d = drift.d2[y, x]
                else:
                    d = drift.d2[y - 1, x]
                coef = 1.0 - sign * d / 2.0
                a[i, i] += 1.0 + sign * d / 2.0
                if (ny, nx) in idx:
                    a[i, idx[(ny, nx)]] -= coef
                else:
                    b[i] += coef * f[ny, nx]
        expected = np.linalg.solve(a, b)
        got = u[in_d]
        order = np.argsort([i for _, i in sorted(idx.items())])
        dense = np.empty(n)
        for (y, x), i in idx.items():
            dense[i] = expected[i]
        assert np.allclose(np.sort(got), np.sort(dense), atol=1e-9)
        for (y, x), i in idx.items():
            assert u[y, x] == pytest.approx(expected[i], abs=1e-9)

    def test_maximum_principle_zero_drift(self, rng):
        h = w = 14
        f = rng.uniform(0.1, 0.9, size=(h, w))
        ann = box_annotation(h, w, (4, 4, 10, 10))
        zero = DriftField(d1=np.zeros((h, w - 1)), d2=np.zeros((h - 1, w)))
        problem = OsmosisProblem(base=f, annotation=ann, drift=zero)
        u = solve_elliptic(problem)
        rim = np.zeros((h, w), dtype=bool)
        rim[3:11, 3:11] = True
        rim &= ~ann.inpaint
        inside = u[ann.inpaint]
        assert inside.min() >= f[rim].min() - 1e-10
        assert inside.max() <= f[rim].max() + 1e-10

    def test_neumann_line_blocks_flux(self):
        # A 2-px red line splits the domain; each side relaxes to its own rim
        # with no mixing across the line.
        h, w = 10, 14
        f = np.zeros((h, w))
        f[:, :7] = 0.2
        f[:, 7:] = 0.8
        labels = np.zeros((h, w), dtype=np.uint8)
        labels[2:8, 2:12] = int(Label.INPAINT)
        labels[2:8, 6:8] = int(Label.NEUMANN_EDGE)
        ann = AnnotationMask(labels)
        zero = DriftField(d1=np.zeros((h, w - 1)), d2=np.zeros((h - 1, w)))
        problem = OsmosisProblem(base=f, annotation=ann, drift=zero)
        u = solve_elliptic(problem)
        # Pure diffusion with a one-sided rim gives back the rim constant.
        assert np.allclose(u[2:8, 2:7], 0.2, atol=1e-8)
        assert np.allclose(u[2:8, 7:12], 0.8, atol=1e-8)

    def test_fully_enclosed_component_is_ill_posed(self):
        # A 2-px thick Neumann ring severs the interior from every rim link.
        h = w = 12
        labels = np.zeros((h, w), dtype=np.uint8)
        labels[2:10, 2:10] = int(Label.INPAINT)
        ring = np.zeros((h, w), dtype=bool)
        ring[2:10, 2:10] = True
        ring[4:8, 4:8] = False
        labels[ring] = int(Label.NEUMANN_EDGE)
        ann = AnnotationMask(labels)
        f = np.full((h, w), 0.5)
        zero = DriftField(d1=np.zeros((h, w - 1)), d2=np.zeros((h - 1, w)))
        problem = OsmosisProblem(base=f, annotation=ann, drift=zero)
        with pytest.raises(IllPosedError):
            solve_elliptic(problem)

    def test_pure_neumann_pinned_solution(self):
        f = smooth_channel(12, 12, seed=11)
        ann = box_annotation(12, 12, (4, 4, 9, 9))
        problem = OsmosisProblem(
            base=f, annotation=ann, drift=canonical_drift(f), bc_mode="neumann"
        )
        u = solve_elliptic(problem)
        # Canonical drift of f keeps f a steady state for any active link set.
        assert np.abs(u - f).max() <= 1e-6


class TestEvolveParabolic:
    def test_steady_state_is_fixpoint(self):
        f = smooth_channel(16, 16, seed=12)
        ann = box_annotation(16, 16, (5, 5, 11, 11))
        problem = OsmosisProblem(base=f, annotation=ann, drift=canonical_drift(f))
        u = evolve_parabolic(problem, step=0.1, n_steps=10)
        assert np.abs(u - f).max() <= 1e-8

    def test_unstable_step_rejected(self):
        f = smooth_channel(10, 10, seed=13)
        ann = box_annotation(10, 10, (3, 3, 7, 7))
        problem = OsmosisProblem(base=f, annotation=ann, drift=canonical_drift(f))
        with pytest.raises(InvalidInputError):
            evolve_parabolic(problem, step=0.5, n_steps=1)

    def test_heat_equation_preserves_mean_under_pure_neumann(self, rng):
        h = w = 12
        f = rng.uniform(0.1, 0.9, size=(h, w))
        labels = np.zeros((h, w), dtype=np.uint8)
        labels[2:10, 2:10] = int(Label.INPAINT)
        ring = np.zeros((h, w), dtype=bool)
        ring[2:10, 2:10] = True
        ring[4:8, 4:8] = False
        labels[ring] = int(Label.NEUMANN_EDGE)
        ann = AnnotationMask(labels)
        zero = DriftField(d1=np.zeros((h, w - 1)), d2=np.zeros((h - 1, w)))
        # The 2-px Neumann ring severs the inner layer + interior from every
        # rim link; explicit steps must conserve that block's mean exactly
        # (flux-form antisymmetry).
        problem = OsmosisProblem(base=f, annotation=ann, drift=zero)
        isolated = np.zeros((h, w), dtype=bool)
        isolated[3:9, 3:9] = True
        u = evolve_parabolic(problem, step=0.2, n_steps=200)
        assert u[isolated].mean() == pytest.approx(f[isolated].mean(), abs=1e-12)

    def test_converges_to_elliptic_solution(self):
        f = smooth_channel(24, 24, seed=14)
        ann = box_annotation(24, 24, (7, 7, 17, 17))
        drift = canonical_drift(smooth_channel(24, 24, seed=15))
        problem = OsmosisProblem(base=f, annotation=ann, drift=drift)
        steady = solve_elliptic(problem)
        step = 0.99 * 0.25 / (1.0 + drift.max_abs())
        evolved = evolve_parabolic(problem, step=step, n_steps=50_000)
        assert np.abs(evolved - steady).max() <= 1e-4


class TestOsmosisRestore:
    def test_proportional_channels_reproduced_from_gray_infrared(self):
        base = smooth_channel(20, 20, seed=16, lo=0.3, hi=0.9)
        rgb = np.stack([0.9 * base, 0.7 * base, 0.5 * base], axis=-1)
        img = Image(rgb)
        ir = img.to_gray()
        ann = box_annotation(20, 20, (6, 6, 14, 14))
        out = osmosis_restore(img, ir, ann)
        assert np.abs(out.data - rgb).max() <= 1e-4

    def test_empty_domain_returns_input(self):
        img = Image(np.full((8, 8, 3), 0.5))
        ann = AnnotationMask.blank(8, 8)
        out = osmosis_restore(img, img.to_gray(), ann)
        assert out is img

    def test_outside_domain_untouched(self):
        base = smooth_channel(16, 16, seed=17)
        rgb = np.stack([base, base**1.5, base**0.5], axis=-1).clip(0, 1)
        img = Image(rgb)
        ann = box_annotation(16, 16, (5, 5, 11, 11))
        out = osmosis_restore(img, img.to_gray(), ann)
        outside = ~ann.inpaint
        assert np.array_equal(out.data[outside], rgb[outside])

    def test_multiplicative_overpaint_removed(self):
        # Ideal sharp constant shadow: the truth is locally constant across
        # the shadow edge (its gradient there would leak flux through the
        # pure-diffusion links), varying away from it.  A 2-px zero-drift
        # band straddling the edge then erases the x0.5 jump exactly.
        from scipy import ndimage as ndi

        h = w = 40
        varying = smooth_channel(h, w, seed=18, lo=0.45, hi=0.8)
        ring = np.zeros((h, w), dtype=bool)
        ring[12:28, 12:28] = True
        ring[13:27, 13:27] = False
        dist = ndi.distance_transform_edt(~ring)
        weight = np.clip((dist - 3.0) / 5.0, 0.0, 1.0)
        truth = 0.6 + (varying - 0.6) * weight

        shadow = np.zeros((h, w), dtype=bool)
        shadow[12:28, 12:28] = True
        damaged = np.where(shadow, 0.5 * truth, truth)
        rgb = Image(np.repeat(damaged[:, :, None], 3, axis=2))

        labels = np.zeros((h, w), dtype=np.uint8)
        labels[shadow] = int(Label.INPAINT)
        band = np.zeros((h, w), dtype=bool)
        band[11:29, 11:29] = True
        band[13:27, 13:27] = False
        labels[band] = int(Label.ZERO_DRIFT_EDGE)
        ann = AnnotationMask(labels)

        out = osmosis_restore(rgb, None, ann)
        rel = np.abs(out.data[:, :, 0] - truth) / np.maximum(truth, 1e-6)
        assert rel[shadow].max() <= 0.01

    def test_dimension_mismatch_rejected(self):
        img = Image(np.full((8, 8, 3), 0.5))
        ir = Image(np.full((9, 8, 1), 0.5))
        ann = box_annotation(8, 8, (2, 2, 6, 6))
        with pytest.raises(InvalidInputError):
            osmosis_restore(img, ir, ann)
