"""Linear osmosis on a subdomain with mixed boundary conditions.

The drift-diffusion steady state  Lap(u) = div(d * u)  is discretized on the
pixel grid with the drift living on half-grid points between neighbors:
the flux through the link between p and its right neighbor q is

    (u_q - u_p) - d_pq * (u_q + u_p) / 2 .

With the canonical drift  d_pq = 2 (I_q - I_p) / (I_q + I_p)  every link flux
of I vanishes identically, so an image is reproduced exactly from its own
drift regardless of which links are active.  (An upwind weighting would not
have this property; the arithmetic mean is what makes steady-state
reproduction bit-tight.)

Mask conventions on the annotation:
* INPAINT, ZERO_DRIFT_EDGE and NEUMANN_EDGE pixels are solved for.
* Edge lines are drawn at least 2 px thick, straddling the edge they act
  on; a half-grid link is affected only when BOTH its endpoints carry the
  mark, which pinpoints exactly the links crossing the drawn line.
* ZERO_DRIFT_EDGE links lose their drift (pure diffusion across the line,
  the shadow-removal device); NEUMANN_EDGE links are dropped entirely
  (no flux crosses, keeping color discontinuities crisp).
* Outside pixels adjacent to the domain form the rim; in dirichlet mode all
  rim links clamp to the base image, in mixed mode only DIRICHLET_RIM-labeled
  pixels do, and in neumann mode rim links are dropped and each floating
  component is pinned through its lexicographically smallest rim pixel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from .errors import IllPosedError, InvalidInputError, NumericalFailureError
from .raster import AnnotationMask, Image, Label

DRIFT_EPS = 1e-4
RESIDUAL_RTOL = 1e-8
DIRECT_SOLVE_LIMIT = 100_000


@dataclass(frozen=True)
class DriftField:
    """Drift on half-grid points: d1 between horizontal neighbors (h, w-1),
    d2 between vertical neighbors (h-1, w)."""

    d1: np.ndarray
    d2: np.ndarray

    def __post_init__(self):
        d1 = np.ascontiguousarray(np.asarray(self.d1, dtype=np.float64))
        d2 = np.ascontiguousarray(np.asarray(self.d2, dtype=np.float64))
        if d1.ndim != 2 or d2.ndim != 2:
            raise InvalidInputError("drift components must be 2-D")
        if d1.shape[0] != d2.shape[0] + 1 or d1.shape[1] + 1 != d2.shape[1]:
            raise InvalidInputError(
                f"inconsistent half-grid shapes d1={d1.shape}, d2={d2.shape}"
            )
        if not (np.all(np.isfinite(d1)) and np.all(np.isfinite(d2))):
            raise InvalidInputError("drift contains non-finite values")
        object.__setattr__(self, "d1", d1)
        object.__setattr__(self, "d2", d2)

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.d1.shape[0], self.d2.shape[1]

    def max_abs(self) -> float:
        vals = [float(np.abs(self.d1).max()) if self.d1.size else 0.0]
        vals.append(float(np.abs(self.d2).max()) if self.d2.size else 0.0)
        return max(vals)


@dataclass(frozen=True)
class OsmosisProblem:
    """One channel, its annotation, the drift to follow and the rim mode."""

    base: np.ndarray
    annotation: AnnotationMask
    drift: DriftField
    bc_mode: str = "dirichlet"

    def __post_init__(self):
        base = np.ascontiguousarray(np.asarray(self.base, dtype=np.float64))
        if base.ndim != 2:
            raise InvalidInputError("problem base must be a single channel (HxW)")
        if self.annotation.labels.shape != base.shape:
            raise InvalidInputError("annotation shape differs from base image")
        if self.drift.grid_shape != base.shape:
            raise InvalidInputError("drift grid differs from base image")
        if self.bc_mode not in ("dirichlet", "neumann", "mixed"):
            raise InvalidInputError(f"unknown bc_mode {self.bc_mode!r}")
        if not _solve_domain(self.annotation).any():
            raise InvalidInputError("inpainting domain is empty")
        object.__setattr__(self, "base", base)


def _solve_domain(annotation: AnnotationMask) -> np.ndarray:
    labels = annotation.labels
    return (
        (labels == int(Label.INPAINT))
        | (labels == int(Label.ZERO_DRIFT_EDGE))
        | (labels == int(Label.NEUMANN_EDGE))
    )


def _as_channel(img: Image | np.ndarray) -> np.ndarray:
    if isinstance(img, Image):
        if img.channels != 1:
            raise InvalidInputError("expected a single-channel image")
        return img.data[:, :, 0]
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise InvalidInputError(f"expected a single channel, got shape {arr.shape}")
    return arr


def canonical_drift(img: Image | np.ndarray) -> DriftField:
    """Half-grid discretization of grad(I)/I, guarded below DRIFT_EPS.

    Exactly invariant under I -> c*I whenever the guard stays inactive.
    """
    i = np.maximum(_as_channel(img), DRIFT_EPS)
    d1 = 2.0 * (i[:, 1:] - i[:, :-1]) / (i[:, 1:] + i[:, :-1])
    d2 = 2.0 * (i[1:, :] - i[:-1, :]) / (i[1:, :] + i[:-1, :])
    return DriftField(d1=d1, d2=d2)


def assemble_drift(
    base: DriftField, foreign: DriftField, annotation: AnnotationMask
) -> DriftField:
    """Splice the foreign drift into the base one over the annotated domain.

    Links inside the domain take the foreign values, links straddling its
    boundary the arithmetic mean, and links whose two endpoints are both
    ZERO_DRIFT_EDGE are zeroed (the line must be >= 2 px thick to act).
    """
    if base.grid_shape != foreign.grid_shape:
        raise InvalidInputError("drift fields have different grid shapes")
    if base.grid_shape != annotation.labels.shape:
        raise InvalidInputError("annotation shape differs from drift grid")

    labels = annotation.labels
    in_d = (
        (labels == int(Label.INPAINT))
        | (labels == int(Label.NEUMANN_EDGE))
        | (labels == int(Label.ZERO_DRIFT_EDGE))
    )
    zero = labels == int(Label.ZERO_DRIFT_EDGE)

    def splice(b, f, left_in, right_in, both_zero):
        inside = left_in & right_in
        straddle = left_in ^ right_in
        out = np.where(inside, f, b)
        out = np.where(straddle, 0.5 * (b + f), out)
        return np.where(both_zero, 0.0, out)

    d1 = splice(base.d1, foreign.d1, in_d[:, :-1], in_d[:, 1:], zero[:, :-1] & zero[:, 1:])
    d2 = splice(base.d2, foreign.d2, in_d[:-1, :], in_d[1:, :], zero[:-1, :] & zero[1:, :])
    return DriftField(d1=d1, d2=d2)


def _link_drift(drift: DriftField, y: int, x: int, dy: int, dx: int) -> float:
    if dx == 1:
        return drift.d1[y, x]
    if dx == -1:
        return drift.d1[y, x - 1]
    if dy == 1:
        return drift.d2[y, x]
    return drift.d2[y - 1, x]


def _assemble_system(problem: OsmosisProblem, require_anchored: bool = True):
    """Build A u = b over the unknown pixels (positive-diagonal form).

    require_anchored refuses singular systems (components without any
    Dirichlet link); the parabolic evolution accepts them, the elliptic
    solve does not.
    """
    base = problem.base
    labels = problem.annotation.labels
    drift = problem.drift
    h, w = base.shape

    unknown = _solve_domain(problem.annotation)
    no_flux = labels == int(Label.NEUMANN_EDGE)
    index = np.full((h, w), -1, dtype=np.int64)
    ys, xs = np.nonzero(unknown)
    index[ys, xs] = np.arange(ys.size)
    n = ys.size

    dirichlet = np.zeros((h, w), dtype=bool)
    if problem.bc_mode == "dirichlet":
        dirichlet = ~unknown
    elif problem.bc_mode == "mixed":
        dirichlet = labels == int(Label.DIRICHLET_RIM)
    elif problem.bc_mode == "neumann":
        dirichlet = _neumann_pins(unknown)

    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    b = np.zeros(n)
    has_dirichlet = np.zeros(n, dtype=bool)

    for p, (y, x) in enumerate(zip(ys.tolist(), xs.tolist())):
        diag = 0.0
        for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            ny, nx = y + dy, x + dx
            if not (0 <= ny < h and 0 <= nx < w):
                continue
            if no_flux[ny, nx] and no_flux[y, x]:
                continue  # link crosses a Neumann line
            q = index[ny, nx]
            if q < 0 and not dirichlet[ny, nx]:
                continue  # no-flux link (neumann rim, or unmarked rim in mixed mode)
            d = _link_drift(drift, y, x, dy, dx)
            sign = 1.0 if (dy + dx) > 0 else -1.0
            off = 1.0 - sign * d / 2.0   # coefficient of u_neighbor in (L - DIV)
            diag += 1.0 + sign * d / 2.0
            if q >= 0:
                rows.append(p)
                cols.append(int(q))
                vals.append(-off)
            else:
                b[p] += off * base[ny, nx]
                has_dirichlet[p] = True
        rows.append(p)
        cols.append(p)
        vals.append(diag)

    a = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    if require_anchored:
        _check_anchored(a, has_dirichlet, n, problem.bc_mode)
    return a, b, index, unknown


def _neumann_pins(unknown: np.ndarray) -> np.ndarray:
    """Pick one rim pixel (smallest (row, col)) per connected component of
    the unknowns; its links act as Dirichlet anchors."""
    from scipy import ndimage

    four = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
    comp, n_comp = ndimage.label(unknown, structure=four)
    pins = np.zeros_like(unknown)
    h, w = unknown.shape
    for c in range(1, n_comp + 1):
        best: tuple[int, int] | None = None
        for y, x in np.argwhere(comp == c):
            for dy, dx in ((-1, 0), (0, -1), (0, 1), (1, 0)):
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and not unknown[ny, nx]:
                    cand = (int(ny), int(nx))
                    if best is None or cand < best:
                        best = cand
        if best is None:
            raise IllPosedError(
                "a pure-Neumann component has no rim pixel available for pinning"
            )
        pins[best] = True
    return pins


def _check_anchored(a: sparse.csr_matrix, has_dirichlet: np.ndarray, n: int, bc_mode: str):
    """Every connected component of the unknown graph needs a Dirichlet link."""
    if n == 0:
        return
    from scipy.sparse import csgraph

    n_comp, comp = csgraph.connected_components(a != 0, directed=False)
    anchored = np.zeros(n_comp, dtype=bool)
    np.logical_or.at(anchored, comp, has_dirichlet)
    if not anchored.all():
        raise IllPosedError(
            f"{int((~anchored).sum())} unknown component(s) have no Dirichlet "
            f"anchor under bc_mode={bc_mode!r}; the system is singular"
        )


def solve_elliptic(problem: OsmosisProblem) -> np.ndarray:
    """Solve the steady state on the domain; returns the full channel with
    the domain replaced.  The residual must meet ||Au-b||_inf <= 1e-8 ||b||_inf."""
    a, b, index, unknown = _assemble_system(problem)
    n = b.size
    if n <= DIRECT_SOLVE_LIMIT:
        u = sparse_linalg.spsolve(a.tocsc(), b)
    else:
        ilu = sparse_linalg.spilu(a.tocsc(), drop_tol=1e-5, fill_factor=20)
        precond = sparse_linalg.LinearOperator(a.shape, ilu.solve)
        u, info = sparse_linalg.bicgstab(a, b, M=precond, rtol=1e-12, atol=0.0)
        if info != 0:
            raise NumericalFailureError(f"iterative solver failed (info={info})")

    residual = float(np.abs(a @ u - b).max())
    bound = RESIDUAL_RTOL * max(float(np.abs(b).max()), 1e-30)
    if residual > bound and residual > 1e-12:
        raise NumericalFailureError(
            f"solver residual {residual:.3e} exceeds contract {bound:.3e}",
            residual=residual,
        )

    out = problem.base.copy()
    out[unknown] = u[index[unknown]]
    return out


def evolve_parabolic(problem: OsmosisProblem, step: float, n_steps: int) -> np.ndarray:
    """Explicit Euler evolution of the same spatial stencil; serves as the
    cross-validation oracle for solve_elliptic."""
    bound = 0.25 / (1.0 + problem.drift.max_abs())
    if step > bound:
        raise InvalidInputError(
            f"explicit step {step:.4g} exceeds the stability bound {bound:.4g}"
        )
    if n_steps < 0:
        raise InvalidInputError("n_steps must be non-negative")

    a, b, index, unknown = _assemble_system(problem, require_anchored=False)
    u = problem.base[unknown].astype(np.float64)
    for _ in range(n_steps):
        u = u + step * (b - a @ u)
    out = problem.base.copy()
    out[unknown] = u
    return out


def osmosis_restore(
    rgb: Image,
    infrared: Image | None,
    annotation: AnnotationMask,
) -> Image:
    """Replace the visible drift by the infrared drift on the annotated
    domain and solve per channel; pixels outside the domain are untouched.

    With infrared=None the image's own drift is kept (the pure shadow-removal
    setting, where only the zero-drift edges act).
    """
    if annotation.labels.shape != (rgb.height, rgb.width):
        raise InvalidInputError("annotation shape differs from image")
    if not _solve_domain(annotation).any():
        return rgb

    if infrared is None:
        ir_chan = None
    else:
        if (infrared.height, infrared.width) != (rgb.height, rgb.width):
            raise InvalidInputError("infrared image dimensions differ from rgb")
        ir_chan = _as_channel(infrared.to_gray())

    bc_mode = "mixed" if annotation.mask(Label.DIRICHLET_RIM).any() else "dirichlet"
    foreign_drift = canonical_drift(ir_chan) if ir_chan is not None else None

    out = rgb.data.copy()
    for c in range(rgb.channels):
        chan = rgb.data[:, :, c]
        base_drift = canonical_drift(chan)
        foreign = foreign_drift if foreign_drift is not None else base_drift
        drift = assemble_drift(base_drift, foreign, annotation)
        problem = OsmosisProblem(base=chan, annotation=annotation, drift=drift, bc_mode=bc_mode)
        out[:, :, c] = solve_elliptic(problem)
    return Image(np.clip(out, 0.0, 1.0), colorspace=rgb.colorspace)
