"""Matrix Market coordinate I/O (real, general) for SparseMatrix.

Values are written with ``%.17g`` so that export -> import -> export
round-trips bit-exactly.  Entries are emitted in row-major CSR order, which
makes the writer deterministic.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .sparse import SparseMatrix

__all__ = ["write_matrix_market", "read_matrix_market"]

_HEADER = "%%MatrixMarket matrix coordinate real general"


def write_matrix_market(a: SparseMatrix, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(_HEADER + "\n")
        fh.write(f"{a.n} {a.n} {a.nnz}\n")
        rows = np.repeat(np.arange(a.n, dtype=np.int64), np.diff(a.row_offsets))
        for r, c, v in zip(rows, a.col_indices, a.values):
            fh.write(f"{r + 1} {c + 1} {v:.17g}\n")


def read_matrix_market(path) -> SparseMatrix:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        parts = header.lower().split()
        if (len(parts) < 5 or parts[0] != "%%matrixmarket" or parts[1] != "matrix"
                or parts[2] != "coordinate" or parts[3] != "real" or parts[4] != "general"):
            raise ValueError(f"unsupported Matrix Market header: {header!r}")
        line = fh.readline()
        while line.startswith("%"):
            line = fh.readline()
        dims = line.split()
        if len(dims) != 3:
            raise ValueError(f"malformed size line: {line!r}")
        nrows, ncols, nnz = (int(x) for x in dims)
        if nrows != ncols:
            raise ValueError(f"expected a square matrix, got {nrows}x{ncols}")
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=np.float64)
        k = 0
        for line in fh:
            line = line.strip()
            if not line or line.startswith("%"):
                continue
            r, c, v = line.split()
            rows[k], cols[k], vals[k] = int(r) - 1, int(c) - 1, float(v)
            k += 1
        if k != nnz:
            raise ValueError(f"expected {nnz} entries, found {k}")
    coo = sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols))
    return SparseMatrix.from_scipy(coo)
