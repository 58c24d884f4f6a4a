"""Test-problem generators: a 2-D convection-diffusion operator and the 3-D
staggered-grid (Yee) curl operator for lossless Maxwell equations.

The convection-diffusion matrix is the five-point central-difference stencil
scaled by h^2, so its symmetric (diffusion) part has norm about 4(D1+D2) and
its skew (convection) part about Pe*max|v|*h, independent of 1/h^2 factors.
Convection is discretized in the split form (v . grad u)/2 + div(v u)/2 on
edges, which makes its matrix contribution exactly skew-symmetric.

The Maxwell generator stacks all six field components on full (N+1)^3 vertex
lattices (H block first, then E), keeping perfectly-conducting-boundary and
ghost slots as inert zero rows/columns; the problem size is 6*(N+1)^3.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .sparse import SparseMatrix

__all__ = [
    "GridSpec",
    "convection_diffusion_matrix",
    "convection_matrix",
    "conv_diff_initial",
    "maxwell_yee_matrix",
    "maxwell_initial",
    "maxwell_block_slices",
    "build_problem",
]

# Maxwell geometry: cube of air with a dielectric specimen containing 27
# spherical voids on a regular 3x3x3 pattern.
_DOMAIN_HALF = 6.05
_SPECIMEN_HALF = 4.55
_SPECIMEN_EPS = 5.0
_VOID_RADIUS = 1.4
_VOID_SPACING = 3.03

_COMPONENTS = ("hx", "hy", "hz", "ex", "ey", "ez")


@dataclass(frozen=True)
class GridSpec:
    """Problem selector for the CLI and service layers."""

    kind: str  # "conv-diff-2d" | "maxwell-yee-3d"
    nx: int = 0
    pe: float = 0.0
    cells: int = 0
    face_average: str = "arithmetic"

    def __post_init__(self):
        if self.kind == "conv-diff-2d":
            if self.nx < 4:
                raise ValueError("conv-diff-2d needs nx >= 4 grid points per axis")
            if self.pe < 0:
                raise ValueError("Peclet number must be nonnegative")
        elif self.kind == "maxwell-yee-3d":
            if self.cells < 8 or self.cells % 2:
                raise ValueError("maxwell-yee-3d needs an even cells count >= 8")
        else:
            raise ValueError(f"unknown problem kind {self.kind!r}")


def _diffusivity(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """D1(x, y): 10^3 on the central square [0.25, 0.75]^2, 1 elsewhere."""
    inside = (x >= 0.25) & (x <= 0.75) & (y >= 0.25) & (y <= 0.75)
    return np.where(inside, 1.0e3, 1.0)


def _face_values(d: np.ndarray, axis: int, how: str) -> np.ndarray:
    a = d
    b = np.roll(d, -1, axis=axis)
    if how == "arithmetic":
        return 0.5 * (a + b)
    if how == "harmonic":
        return 2.0 * a * b / (a + b)
    raise ValueError(f"unknown face average {how!r}")


def convection_diffusion_matrix(nx: int, pe: float, *,
                                face_average: str = "arithmetic") -> SparseMatrix:
    """Five-point operator on the unit square with homogeneous Dirichlet
    boundary: nx grid points per axis including the boundary, (nx-2)^2
    interior unknowns, entries scaled by h^2."""
    if nx < 4:
        raise ValueError("nx must be at least 4")
    if pe < 0:
        raise ValueError("pe must be nonnegative")
    return _assemble_conv_diff(nx, pe, face_average, with_diffusion=True)


def convection_matrix(nx: int, pe: float) -> SparseMatrix:
    """Convection part alone (diffusivities set to zero); exactly skew-symmetric."""
    if nx < 4:
        raise ValueError("nx must be at least 4")
    return _assemble_conv_diff(nx, pe, "arithmetic", with_diffusion=False)


def _assemble_conv_diff(nx: int, pe: float, face_average: str,
                        with_diffusion: bool) -> SparseMatrix:
    m = nx - 2
    n = m * m
    h = 1.0 / (nx - 1)
    x = np.arange(nx) * h
    xg, yg = np.meshgrid(x, x, indexing="ij")  # index i along x, j along y

    def idx(i, j):  # interior (i, j) with 1 <= i, j <= nx-2
        return (i - 1) * m + (j - 1)

    ii = np.arange(1, nx - 1)
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []

    if with_diffusion:
        d1 = _diffusivity(xg, yg)
        d2 = 0.5 * d1
        fx = _face_values(d1, 0, face_average)  # fx[i, j]: face (i+1/2, j)
        fy = _face_values(d2, 1, face_average)  # fy[i, j]: face (i, j+1/2)

        gi, gj = np.meshgrid(ii, ii, indexing="ij")
        diag = (fx[gi - 1, gj] + fx[gi, gj] + fy[gi, gj - 1] + fy[gi, gj]).ravel()
        rows.append(idx(gi, gj).ravel())
        cols.append(idx(gi, gj).ravel())
        vals.append(diag)

        # interior x-neighbors (i, j) -- (i+1, j)
        ei, ej = np.meshgrid(np.arange(1, nx - 2), ii, indexing="ij")
        f = fx[ei, ej].ravel()
        r, c = idx(ei, ej).ravel(), idx(ei + 1, ej).ravel()
        rows += [r, c]
        cols += [c, r]
        vals += [-f, -f]

        # interior y-neighbors (i, j) -- (i, j+1)
        ei, ej = np.meshgrid(ii, np.arange(1, nx - 2), indexing="ij")
        f = fy[ei, ej].ravel()
        r, c = idx(ei, ej).ravel(), idx(ei, ej + 1).ravel()
        rows += [r, c]
        cols += [c, r]
        vals += [-f, -f]

    if pe > 0:
        v1 = xg + yg
        v2 = xg - yg
        # x-edges between interior neighbors: one coefficient per edge, used
        # with opposite signs in the two incident rows (exact skew symmetry)
        ei, ej = np.meshgrid(np.arange(1, nx - 2), ii, indexing="ij")
        cx = (pe * h * 0.25) * (v1[ei, ej] + v1[ei + 1, ej])
        r, c = idx(ei, ej).ravel(), idx(ei + 1, ej).ravel()
        rows += [r, c]
        cols += [c, r]
        vals += [cx.ravel(), -cx.ravel()]

        ei, ej = np.meshgrid(ii, np.arange(1, nx - 2), indexing="ij")
        cy = (pe * h * 0.25) * (v2[ei, ej] + v2[ei, ej + 1])
        r, c = idx(ei, ej).ravel(), idx(ei, ej + 1).ravel()
        rows += [r, c]
        cols += [c, r]
        vals += [cy.ravel(), -cy.ravel()]

    if not rows:
        return SparseMatrix(n, np.zeros(n + 1, dtype=np.int64),
                            np.zeros(0, dtype=np.int64), np.zeros(0))
    coo = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return SparseMatrix.from_scipy(coo)


def conv_diff_initial(nx: int) -> np.ndarray:
    """sin(pi x) sin(pi y) sampled at the interior points, unit 2-norm."""
    if nx < 4:
        raise ValueError("nx must be at least 4")
    h = 1.0 / (nx - 1)
    x = np.arange(1, nx - 1) * h
    v = np.outer(np.sin(np.pi * x), np.sin(np.pi * x)).ravel()
    return v / np.linalg.norm(v)


def _maxwell_eps(xs: np.ndarray, ys: np.ndarray, zs: np.ndarray) -> np.ndarray:
    """Relative permittivity at the broadcast points (xs, ys, zs)."""
    inside = ((np.abs(xs) <= _SPECIMEN_HALF)
              & (np.abs(ys) <= _SPECIMEN_HALF)
              & (np.abs(zs) <= _SPECIMEN_HALF))
    in_void = np.zeros(np.broadcast(xs, ys, zs).shape, dtype=bool)
    r2 = _VOID_RADIUS * _VOID_RADIUS
    for ci in (-1, 0, 1):
        for cj in (-1, 0, 1):
            for ck in (-1, 0, 1):
                d2 = ((xs - _VOID_SPACING * ci) ** 2
                      + (ys - _VOID_SPACING * cj) ** 2
                      + (zs - _VOID_SPACING * ck) ** 2)
                in_void |= d2 <= r2
    return np.where(inside & ~in_void, _SPECIMEN_EPS, 1.0)


def maxwell_block_slices(cells_per_axis: int) -> dict:
    p3 = (cells_per_axis + 1) ** 3
    return {name: slice(c * p3, (c + 1) * p3) for c, name in enumerate(_COMPONENTS)}


def maxwell_yee_matrix(cells_per_axis: int) -> tuple[SparseMatrix, np.ndarray]:
    """Generator A of y' = -A y for the lossless Maxwell system on a Yee grid
    with perfectly conducting boundary, plus the diagonal scaling d such that
    diag(d)^{-1} A diag(d) is skew-symmetric.

    Unknown order: (Hx, Hy, Hz, Ex, Ey, Ez), each component on the full
    (N+1)^3 vertex lattice in lexicographic (i, j, k) order, i along x
    slowest.  Component slot (i, j, k) sits at the usual staggered position
    (Ex at (i+1/2, j, k), Hx at (i, j+1/2, k+1/2), and cyclically).
    """
    n_cells = cells_per_axis
    if n_cells < 8 or n_cells % 2:
        raise ValueError("cells_per_axis must be an even value >= 8")
    p = n_cells + 1
    p3 = p * p * p
    h = 2.0 * _DOMAIN_HALF / n_cells
    inv_h = 1.0 / h

    centers = -_DOMAIN_HALF + np.arange(p) * h
    middles = -_DOMAIN_HALF + (np.arange(p) + 0.5) * h

    axis = np.arange(p)
    gi, gj, gk = np.meshgrid(axis, axis, axis, indexing="ij")
    interior = lambda w: (w >= 1) & (w <= n_cells - 1)  # noqa: E731
    within = lambda w: w <= n_cells - 1  # staggered index in range  # noqa: E731

    active = {
        "ex": within(gi) & interior(gj) & interior(gk),
        "ey": interior(gi) & within(gj) & interior(gk),
        "ez": interior(gi) & interior(gj) & within(gk),
        "hx": interior(gi) & within(gj) & within(gk),
        "hy": within(gi) & interior(gj) & within(gk),
        "hz": within(gi) & within(gj) & interior(gk),
    }
    eps = {
        "ex": _maxwell_eps(middles[:, None, None], centers[None, :, None], centers[None, None, :]),
        "ey": _maxwell_eps(centers[:, None, None], middles[None, :, None], centers[None, None, :]),
        "ez": _maxwell_eps(centers[:, None, None], centers[None, :, None], middles[None, None, :]),
    }
    comp_offset = {name: c * p3 for c, name in enumerate(_COMPONENTS)}

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []

    def couple(row_comp: str, col_comp: str, shift: tuple[int, int, int],
               sign: float) -> None:
        """Entry A[row_comp(i,j,k), col_comp(i+di,j+dj,k+dk)] = sign / (h*eps_row)."""
        di, dj, dk = shift
        pts = np.argwhere(active[row_comp])
        shifted_pts = pts + np.array(shift)
        ok = np.all((shifted_pts >= 0) & (shifted_pts < p), axis=1)
        pts, shifted_pts = pts[ok], shifted_pts[ok]
        ok = active[col_comp][shifted_pts[:, 0], shifted_pts[:, 1], shifted_pts[:, 2]]
        pts, shifted_pts = pts[ok], shifted_pts[ok]
        flat_r = (pts[:, 0] * p + pts[:, 1]) * p + pts[:, 2]
        flat_c = (shifted_pts[:, 0] * p + shifted_pts[:, 1]) * p + shifted_pts[:, 2]
        if row_comp.startswith("e"):
            coeff = sign * inv_h / eps[row_comp][pts[:, 0], pts[:, 1], pts[:, 2]]
        else:
            coeff = np.full(flat_r.shape, sign * inv_h)
        rows.append(comp_offset[row_comp] + flat_r)
        cols.append(comp_offset[col_comp] + flat_c)
        vals.append(coeff)

    # H rows: A = -(dH/dt coefficients), mu_r = 1
    couple("hx", "ez", (0, 1, 0), +1.0)
    couple("hx", "ez", (0, 0, 0), -1.0)
    couple("hx", "ey", (0, 0, 1), -1.0)
    couple("hx", "ey", (0, 0, 0), +1.0)
    couple("hy", "ex", (0, 0, 1), +1.0)
    couple("hy", "ex", (0, 0, 0), -1.0)
    couple("hy", "ez", (1, 0, 0), -1.0)
    couple("hy", "ez", (0, 0, 0), +1.0)
    couple("hz", "ey", (1, 0, 0), +1.0)
    couple("hz", "ey", (0, 0, 0), -1.0)
    couple("hz", "ex", (0, 1, 0), -1.0)
    couple("hz", "ex", (0, 0, 0), +1.0)
    # E rows: A = -(dE/dt coefficients) with edge-midpoint permittivity
    couple("ex", "hz", (0, 0, 0), -1.0)
    couple("ex", "hz", (0, -1, 0), +1.0)
    couple("ex", "hy", (0, 0, 0), +1.0)
    couple("ex", "hy", (0, 0, -1), -1.0)
    couple("ey", "hx", (0, 0, 0), -1.0)
    couple("ey", "hx", (0, 0, -1), +1.0)
    couple("ey", "hz", (0, 0, 0), +1.0)
    couple("ey", "hz", (-1, 0, 0), -1.0)
    couple("ez", "hy", (0, 0, 0), -1.0)
    couple("ez", "hy", (-1, 0, 0), +1.0)
    couple("ez", "hx", (0, 0, 0), +1.0)
    couple("ez", "hx", (0, -1, 0), -1.0)

    n = 6 * p3
    coo = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    a = SparseMatrix.from_scipy(coo)

    d = np.ones(n)
    for comp in ("ex", "ey", "ez"):
        d[comp_offset[comp]: comp_offset[comp] + p3] = (1.0 / np.sqrt(eps[comp])).ravel()
    return a, d


def maxwell_initial(cells_per_axis: int) -> np.ndarray:
    """Zero fields except the Ex and Ey edges nearest the domain center
    (a point emission), normalized to unit 2-norm."""
    n_cells = cells_per_axis
    if n_cells < 8 or n_cells % 2:
        raise ValueError("cells_per_axis must be an even value >= 8")
    p = n_cells + 1
    p3 = p * p * p
    mid = n_cells // 2
    v = np.zeros(6 * p3)

    def gid(comp: int, i: int, j: int, k: int) -> int:
        return comp * p3 + (i * p + j) * p + k

    # component order (hx, hy, hz, ex, ey, ez): ex block 3, ey block 4
    v[gid(3, mid - 1, mid, mid)] = 1.0
    v[gid(3, mid, mid, mid)] = 1.0
    v[gid(4, mid, mid - 1, mid)] = 1.0
    v[gid(4, mid, mid, mid)] = 1.0
    return v / np.linalg.norm(v)


def build_problem(spec: GridSpec) -> tuple[SparseMatrix, np.ndarray, Optional[np.ndarray]]:
    """(A, initial vector, optional symmetrizing diagonal) for a GridSpec."""
    if spec.kind == "conv-diff-2d":
        a = convection_diffusion_matrix(spec.nx, spec.pe, face_average=spec.face_average)
        return a, conv_diff_initial(spec.nx), None
    a, d = maxwell_yee_matrix(spec.cells)
    return a, maxwell_initial(spec.cells), d
