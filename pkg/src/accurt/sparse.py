"""Sparse CSR matrices, shifted-matrix construction, and solve handles.

``SparseMatrix`` is an immutable CSR triplet.  ``Factorization`` wraps either
an exact sparse LU (SuperLU with a fill-reducing column ordering) or an
authored ILUT (incomplete LU with threshold dropping); both expose the same
``solve`` surface so the iterative solvers and the restart engine can treat
them interchangeably.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "SparseMatrix",
    "Factorization",
    "SingularMatrixError",
    "spmv",
    "shifted",
    "lu_factorize",
    "ilut_factorize",
    "solve",
]


class SingularMatrixError(RuntimeError):
    """Raised when an exact factorization meets a zero or near-zero pivot."""


@dataclass(frozen=True)
class SparseMatrix:
    """Square real matrix in CSR form; immutable after construction."""

    n: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        n = self.n
        offs = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        cols = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if offs.shape != (n + 1,):
            raise ValueError(f"row_offsets must have length n+1={n + 1}, got {offs.shape}")
        if offs[0] != 0 or offs[-1] != cols.size or np.any(np.diff(offs) < 0):
            raise ValueError("row_offsets must be nondecreasing from 0 to nnz")
        if cols.shape != vals.shape:
            raise ValueError("col_indices and values must have equal length")
        if cols.size:
            if cols.min() < 0 or cols.max() >= n:
                raise ValueError("column index out of range")
            # strictly increasing column indices within each row
            d = np.diff(cols)
            row_starts = offs[1:-1]  # positions in `d` that cross a row boundary
            boundary = np.zeros(d.shape, dtype=bool)
            boundary[row_starts[(row_starts > 0) & (row_starts < cols.size)] - 1] = True
            if np.any(d[~boundary] <= 0):
                raise ValueError("column indices must be strictly increasing within each row")
        if not np.isfinite(vals).all():
            raise ValueError("matrix values must be finite")
        for arr, name in ((offs, "row_offsets"), (cols, "col_indices"), (vals, "values")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_csr_cache", None)

    @property
    def nnz(self) -> int:
        return int(self.col_indices.size)

    def to_csr(self) -> sp.csr_matrix:
        """Backing scipy CSR view (cached, shared, read-only buffers)."""
        cached = getattr(self, "_csr_cache")
        if cached is None:
            cached = sp.csr_matrix(
                (self.values, self.col_indices, self.row_offsets), shape=(self.n, self.n)
            )
            object.__setattr__(self, "_csr_cache", cached)
        return cached

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()

    @staticmethod
    def from_scipy(a) -> "SparseMatrix":
        a = sp.csr_matrix(a)
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        a = a.copy()
        a.sum_duplicates()
        a.sort_indices()
        a.eliminate_zeros()
        return SparseMatrix(
            n=a.shape[0],
            row_offsets=a.indptr.astype(np.int64),
            col_indices=a.indices.astype(np.int64),
            values=a.data.astype(np.float64),
        )

    @staticmethod
    def from_dense(a) -> "SparseMatrix":
        return SparseMatrix.from_scipy(sp.csr_matrix(np.asarray(a, dtype=float)))

    @staticmethod
    def identity(n: int) -> "SparseMatrix":
        return SparseMatrix.from_scipy(sp.eye(n, format="csr"))


def spmv(a: SparseMatrix, x: np.ndarray) -> np.ndarray:
    """A @ x.  Sequential and deterministic (fixed summation order per row)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (a.n,):
        raise ValueError(f"vector length {x.shape} does not match matrix dimension {a.n}")
    return a.to_csr() @ x


def shifted(a: SparseMatrix, gamma: float) -> SparseMatrix:
    """I + gamma*A, with explicit unit diagonal entries on every row."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    m = (sp.eye(a.n, format="csr") + gamma * a.to_csr()).tocsr()
    # eye() guarantees an explicit diagonal even where A has structural zeros
    return SparseMatrix.from_scipy(m)


@dataclass
class Factorization:
    """Reusable solve handle: exact LU or ILUT preconditioner application."""

    kind: str  # "exact-lu" | "ilut"
    n: int
    shift_gamma: float
    drop_tolerance: Optional[float] = None
    pivot_repairs: int = 0
    # exact-lu backend
    _superlu: object = field(default=None, repr=False)
    # ilut factors: unit-lower L (strict part stored) and upper U, both CSR
    _lower: object = field(default=None, repr=False)
    _upper: object = field(default=None, repr=False)

    @property
    def lower(self):
        """Unit-lower-triangular factor (CSR)."""
        return self._superlu.L.tocsr() if self.kind == "exact-lu" else self._lower

    @property
    def upper(self):
        """Upper-triangular factor (CSR)."""
        return self._superlu.U.tocsr() if self.kind == "exact-lu" else self._upper

    @property
    def row_permutation(self) -> np.ndarray:
        if self.kind == "exact-lu":
            return np.asarray(self._superlu.perm_r)
        return np.arange(self.n)

    @property
    def col_permutation(self) -> np.ndarray:
        if self.kind == "exact-lu":
            return np.asarray(self._superlu.perm_c)
        return np.arange(self.n)

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape != (self.n,):
            raise ValueError(f"vector length {b.shape} does not match factorization dimension {self.n}")
        if self.kind == "exact-lu":
            return self._superlu.solve(b)
        y = spla.spsolve_triangular(self._lower, b, lower=True, unit_diagonal=True)
        return spla.spsolve_triangular(self._upper, y, lower=False)


def lu_factorize(m: SparseMatrix, *, shift_gamma: float = 0.0) -> Factorization:
    """Exact sparse LU with a fill-reducing column ordering (COLAMD)."""
    a = m.to_csr().tocsc()
    try:
        handle = spla.splu(a, permc_spec="COLAMD")
    except RuntimeError as exc:  # SuperLU signals exact singularity this way
        raise SingularMatrixError(f"sparse LU failed: {exc}") from exc
    # SuperLU does not flag merely tiny pivots; reject them explicitly.
    u_diag = handle.U.diagonal()
    max_entry = float(np.max(np.abs(m.values))) if m.nnz else 0.0
    if m.nnz == 0 or np.min(np.abs(u_diag)) <= 1e-14 * max_entry:
        raise SingularMatrixError("near-zero pivot: matrix is numerically singular")
    return Factorization(kind="exact-lu", n=m.n, shift_gamma=shift_gamma, _superlu=handle)


def ilut_factorize(
    m: SparseMatrix,
    drop_eps: float,
    *,
    shift_gamma: float = 0.0,
    relative_to_row_norm: bool = True,
) -> Factorization:
    """Incomplete LU with threshold dropping (no pivoting, no fill cap).

    Entries with magnitude below ``drop_eps`` times the 2-norm of the original
    row (or below plain ``drop_eps`` when ``relative_to_row_norm`` is False)
    are discarded during elimination.  A zero pivot is replaced by the drop
    threshold with the sign of the dropped value preserved, and every such
    repair is counted on the returned handle.
    """
    if drop_eps < 0:
        raise ValueError("drop_eps must be nonnegative")
    n = m.n
    offs, cols, vals = m.row_offsets, m.col_indices, m.values
    lower_rows: list[dict[int, float]] = []
    upper_rows: list[dict[int, float]] = []
    upper_diag = np.empty(n)
    repairs = 0

    for i in range(n):
        start, end = offs[i], offs[i + 1]
        row = dict(zip(cols[start:end].tolist(), vals[start:end].tolist()))
        row_norm = float(np.linalg.norm(vals[start:end]))
        tau = drop_eps * row_norm if relative_to_row_norm else drop_eps

        l_row: dict[int, float] = {}
        # eliminate columns k < i in ascending order; fill-in may add more
        pending = sorted(k for k in row if k < i)
        pos = 0
        while pos < len(pending):
            k = pending[pos]
            pos += 1
            factor = row.pop(k) / upper_diag[k]
            if abs(factor) < tau:
                continue
            l_row[k] = factor
            for j, ukj in upper_rows[k].items():
                if j in row:
                    row[j] -= factor * ukj
                else:
                    row[j] = -factor * ukj
                    if j < i:
                        # keep the pending queue sorted past the current position
                        lo = pos
                        while lo < len(pending) and pending[lo] < j:
                            lo += 1
                        pending.insert(lo, j)

        pivot = row.pop(i, 0.0)
        if abs(pivot) < tau or pivot == 0.0:
            sign = -1.0 if pivot < 0 else 1.0
            replacement = tau if tau > 0 else np.finfo(float).eps * max(row_norm, 1.0)
            pivot = sign * replacement
            repairs += 1
        u_row = {j: v for j, v in row.items() if j > i and abs(v) >= tau}
        upper_diag[i] = pivot
        lower_rows.append(l_row)
        upper_rows.append(u_row)

    def rows_to_csr(rows, diag=None):
        indptr = np.zeros(n + 1, dtype=np.int64)
        idx: list[np.ndarray] = []
        dat: list[np.ndarray] = []
        for i, row in enumerate(rows):
            items = sorted(row.items())
            if diag is not None:
                items.insert(0, (i, diag[i]))  # row keys are all > i
            indptr[i + 1] = indptr[i] + len(items)
            if items:
                idx.append(np.fromiter((c for c, _ in items), dtype=np.int64, count=len(items)))
                dat.append(np.fromiter((v for _, v in items), dtype=np.float64, count=len(items)))
        indices = np.concatenate(idx) if idx else np.zeros(0, dtype=np.int64)
        data = np.concatenate(dat) if dat else np.zeros(0)
        return sp.csr_matrix((data, indices, indptr), shape=(n, n))

    # store strict lower part only; the unit diagonal is implied by the solver
    lower = rows_to_csr(lower_rows)
    upper = rows_to_csr(upper_rows, diag=upper_diag)
    return Factorization(
        kind="ilut",
        n=n,
        shift_gamma=shift_gamma,
        drop_tolerance=drop_eps,
        pivot_repairs=repairs,
        _lower=lower,
        _upper=upper,
    )


def solve(f: Factorization, b: np.ndarray) -> np.ndarray:
    """Apply the solve handle: the inverse action (exact-lu) or the preconditioner (ilut)."""
    return f.solve(b)
