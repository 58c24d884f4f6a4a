"""Independent reference solutions for exp(-tA)v and error measurement.

Two reference routes: densify-and-exponentiate for moderate dimensions, and an
unrestarted polynomial Krylov iteration driven to a tight residual tolerance
for larger ones.  The Krylov route has its own (block Gram-Schmidt) Arnoldi
loop so it shares no iteration machinery with the engines it cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dense import expm
from .sparse import SparseMatrix, spmv

__all__ = ["Reference", "OracleError", "reference_solution", "true_error"]

_DENSE_LIMIT = 2000
_MEMORY_BUDGET_BYTES = 2_000_000_000


class OracleError(RuntimeError):
    """The reference computation could not reach its accuracy target."""


@dataclass
class Reference:
    method: str  # "dense-expm" | "tight-polynomial-krylov"
    solution: np.ndarray
    accuracy: float
    steps: int = 0  # Krylov steps spent (0 for the dense route)


def true_error(y: np.ndarray, ref: Reference) -> float:
    """Absolute 2-norm error ||y - ref|| (start vectors are unit-norm here)."""
    y = np.asarray(y, dtype=float)
    if y.shape != ref.solution.shape:
        raise ValueError(f"shape {y.shape} does not match reference {ref.solution.shape}")
    return float(np.linalg.norm(y - ref.solution))


def reference_solution(
    a: SparseMatrix,
    v: np.ndarray,
    t: float,
    method: str = "auto",
    tol: float = 1e-12,
    max_steps: int = 2000,
    dense_limit: int = _DENSE_LIMIT,
) -> Reference:
    """Reference for exp(-tA)v: dense route for n <= dense_limit, residual-
    controlled polynomial Krylov otherwise."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    v = np.asarray(v, dtype=float)
    if v.shape != (a.n,):
        raise ValueError(f"vector length {v.shape} does not match n={a.n}")
    if method == "auto":
        method = "dense-expm" if a.n <= dense_limit else "tight-polynomial-krylov"
    if t == 0.0:
        return Reference(method=method, solution=v.copy(), accuracy=0.0)
    if method == "dense-expm":
        if a.n > dense_limit:
            raise OracleError(f"dense reference not built for n={a.n} > {dense_limit}")
        y = expm(-t * a.to_dense(), max_dim=dense_limit) @ v
        return Reference(method=method, solution=y, accuracy=1e-13)
    if method == "tight-polynomial-krylov":
        return _krylov_reference(a, v, t, tol, max_steps)
    raise ValueError(f"unknown reference method {method!r}")


def _krylov_reference(a: SparseMatrix, v: np.ndarray, t: float,
                      tol: float, max_steps: int) -> Reference:
    n = a.n
    beta = float(np.linalg.norm(v))
    if beta == 0.0:
        return Reference("tight-polynomial-krylov", np.zeros(n), 0.0)
    cap = min(max_steps, n)
    need = 8 * n * (cap + 1)
    if need > _MEMORY_BUDGET_BYTES:
        raise OracleError(
            f"Krylov reference for n={n} with {cap} steps would need ~{need / 1e9:.1f} GB; "
            "disable the oracle for this run"
        )
    big = a.to_csr()
    basis = np.empty((n, cap + 1))
    hess = np.zeros((cap + 1, cap))
    basis[:, 0] = v / beta
    # residual controlled at a small time grid; the defect bounds the error
    # of the assembled iterate via integration over [0, t]
    grid = 16
    threshold = tol * beta / max(1.0, t)
    checkpoints = _check_schedule(cap)
    breakdown_scale = float(abs(big).sum(axis=0).max()) if a.nnz else 1.0

    k_final = 0
    max_resid = np.inf
    exact = False
    for k in range(cap):
        w = big @ basis[:, k]
        # block classical Gram-Schmidt, two passes
        for _ in range(2):
            coeff = basis[:, : k + 1].T @ w
            w -= basis[:, : k + 1] @ coeff
            hess[: k + 1, k] += coeff
        nrm = float(np.linalg.norm(w))
        hess[k + 1, k] = nrm
        k_final = k + 1
        if nrm <= 1e-14 * breakdown_scale:
            hess[k + 1, k] = 0.0
            exact = True
            max_resid = 0.0
            break
        basis[:, k + 1] = w / nrm
        if k_final in checkpoints or k_final == cap:
            max_resid = _poly_residual_max(hess[: k_final + 1, : k_final], beta, t, grid)
            if max_resid <= threshold:
                break
    if not exact and max_resid > threshold:
        raise OracleError(
            f"polynomial Krylov reference stalled at k={k_final} "
            f"(residual {max_resid:.3e} > target {threshold:.3e})"
        )
    h_k = hess[:k_final, :k_final]
    e1 = np.zeros(k_final)
    e1[0] = beta
    u = expm(-t * h_k, max_dim=max(k_final, 1)) @ e1
    y = basis[:, :k_final] @ u
    accuracy = max(t * max_resid, 64 * np.finfo(float).eps * beta)
    return Reference("tight-polynomial-krylov", y, float(accuracy), steps=k_final)


def _check_schedule(cap: int) -> set[int]:
    ks = {8, 16, 32, 64, 128, 256}
    ks.update(range(384, cap + 1, 128))
    return {k for k in ks if k <= cap}


def _poly_residual_max(hbar: np.ndarray, beta: float, t: float, grid: int) -> float:
    """max_j h_{k+1,k} |e_k^T u(s_j)| over s_j = j*t/grid, j = 1..grid."""
    k = hbar.shape[1]
    h_sub = float(hbar[k, k - 1])
    h_k = hbar[:k, :k]
    step = expm(-(t / grid) * h_k, max_dim=max(k, 1))
    u = np.zeros(k)
    u[0] = beta
    worst = 0.0
    for _ in range(grid):
        u = step @ u
        worst = max(worst, abs(h_sub * u[k - 1]))
    return worst
