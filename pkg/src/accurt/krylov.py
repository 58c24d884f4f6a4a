"""Arnoldi engines for exp(-tA)v: polynomial and shift-and-invert (SAI) modes.

The SAI mode runs Arnoldi on (I + gamma*A)^{-1} and works with the transformed
Hessenberg pair: the stored ``hess`` is the SAI projection, and the projected
generator is recovered through ``back_transform``.  Residual norms over time
are available from small-matrix quantities only; ``explicit_residual_norm``
assembles the defect -A y_k(s) - y_k'(s) in full n-vector arithmetic and is
the independent cross-check for them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dense import expm, expm_action, phi, spectral_norm
from .sparse import SparseMatrix, lu_factorize, shifted, spmv
from .solvers import SolveStats

__all__ = [
    "POLYNOMIAL",
    "SAI",
    "ArnoldiState",
    "ResidualSamples",
    "start_state",
    "arnoldi_step_polynomial",
    "arnoldi_step_sai",
    "extend_after_breakdown",
    "arnoldi_build",
    "exact_shifted_solver",
    "back_transform",
    "projected_matrix",
    "projected_solution",
    "residual_norm",
    "residual_samples",
    "omega_k",
    "residual_bound",
    "assemble_iterate",
    "explicit_residual_vector",
    "explicit_residual_norm",
]

POLYNOMIAL = "polynomial"
SAI = "sai"

# MGS is re-run once in full when the post-orthogonalization norm drops below
# this fraction of the pre-orthogonalization norm.
_REORTH_FRACTION = 1.0 / np.sqrt(2.0)
_BREAKDOWN_RELATIVE = 1e-14
# SAI solves return w with ||w|| ~ ||v||; genuine invariance leaves only
# rounding-level mass after orthogonalization.  A looser threshold misreads a
# nearly-converged shift (tiny gamma) as exact and fabricates zero residuals.
_BREAKDOWN_RELATIVE_SAI = 4.0 * np.finfo(float).eps


@dataclass
class ResidualSamples:
    """Residual norms ||r_k(s_j)|| at strictly increasing times in (0, t]."""

    times: np.ndarray
    norms: np.ndarray


@dataclass
class ArnoldiState:
    """Single-owner mutable state of an Arnoldi run.

    After ``k`` steps, ``basis[:, :k+1]`` holds the orthonormal vectors
    v_1..v_{k+1} and ``hess[:k+1, :k]`` the extended Hessenberg projection
    (the SAI projection in "sai" mode).  ``w_norms[k-1]`` caches
    ||(I + gamma*A) v_{k+1}|| in SAI mode (1.0 in polynomial mode) so that
    residual sampling never touches n-vectors.
    """

    mode: str
    gamma: float
    beta: float
    basis: np.ndarray
    hess: np.ndarray
    k: int = 0
    exact: bool = False
    w_norms: list = field(default_factory=list)
    inner_iterations: list = field(default_factory=list)
    breakdown_scale: Optional[float] = None

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def capacity(self) -> int:
        return self.hess.shape[1]

    @property
    def subdiag(self) -> float:
        """h_{k+1,k} of the current step (0 after a happy breakdown)."""
        return float(self.hess[self.k, self.k - 1])

    @property
    def w_next_norm(self) -> float:
        return float(self.w_norms[self.k - 1])


def start_state(v: np.ndarray, capacity: int, mode: str = POLYNOMIAL,
                gamma: float = 0.0) -> ArnoldiState:
    if mode not in (POLYNOMIAL, SAI):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == SAI and gamma <= 0:
        raise ValueError("sai mode requires gamma > 0")
    if capacity < 1:
        raise ValueError("capacity must be at least 1")
    v = np.asarray(v, dtype=float)
    beta = float(np.linalg.norm(v))
    if beta == 0.0:
        raise ValueError("start vector must be nonzero")
    basis = np.zeros((v.size, capacity + 1))
    basis[:, 0] = v / beta
    hess = np.zeros((capacity + 1, capacity))
    return ArnoldiState(mode=mode, gamma=float(gamma), beta=beta, basis=basis, hess=hess)


def _orthogonalize(state: ArnoldiState, w: np.ndarray, col: int) -> float:
    """MGS of w against v_1..v_{col+1} into hess[:, col]; one full re-pass
    when cancellation is detected.  Returns the remaining norm."""
    pre = float(np.linalg.norm(w))
    for i in range(col + 1):
        hij = float(state.basis[:, i] @ w)
        state.hess[i, col] += hij
        w -= hij * state.basis[:, i]
    nrm = float(np.linalg.norm(w))
    if nrm < _REORTH_FRACTION * pre:
        for i in range(col + 1):
            hij = float(state.basis[:, i] @ w)
            state.hess[i, col] += hij
            w -= hij * state.basis[:, i]
        nrm = float(np.linalg.norm(w))
    return nrm


def _finish_step(state: ArnoldiState, w: np.ndarray, nrm: float, threshold: float) -> None:
    col = state.k
    if nrm <= threshold:
        state.hess[col + 1, col] = 0.0
        state.exact = True
    else:
        state.hess[col + 1, col] = nrm
        state.basis[:, col + 1] = w / nrm
    state.k += 1


def arnoldi_step_polynomial(state: ArnoldiState, a: SparseMatrix) -> ArnoldiState:
    """Extend A V_k = V_{k+1} H_k by one column."""
    if state.mode != POLYNOMIAL:
        raise ValueError("state is not in polynomial mode")
    if state.k >= state.capacity:
        raise ValueError("Arnoldi capacity exceeded")
    if state.exact:
        raise ValueError("cannot step past a happy breakdown; extend the basis first")
    if state.breakdown_scale is None:
        csr = a.to_csr()
        state.breakdown_scale = float(abs(csr).sum(axis=0).max()) if a.nnz else 1.0
    w = spmv(a, state.basis[:, state.k])
    nrm = _orthogonalize(state, w, state.k)
    state.w_norms.append(1.0)
    _finish_step(state, w, nrm, _BREAKDOWN_RELATIVE * state.breakdown_scale)
    return state


def arnoldi_step_sai(
    state: ArnoldiState,
    a: SparseMatrix,
    shifted_solver: Callable[[np.ndarray], tuple[np.ndarray, Optional[SolveStats]]],
) -> ArnoldiState:
    """One SAI step: solve (I + gamma*A) w = v_k, orthogonalize, and cache
    ||(I + gamma*A) v_{k+1}|| for residual evaluation."""
    if state.mode != SAI:
        raise ValueError("state is not in sai mode")
    if state.k >= state.capacity:
        raise ValueError("Arnoldi capacity exceeded")
    if state.exact:
        raise ValueError("cannot step past a happy breakdown; extend the basis first")
    w, stats = shifted_solver(state.basis[:, state.k])
    state.inner_iterations.append(0 if stats is None else int(stats.iterations))
    w = np.asarray(w, dtype=float).copy()
    scale = float(np.linalg.norm(w))
    nrm = _orthogonalize(state, w, state.k)
    if nrm <= _BREAKDOWN_RELATIVE_SAI * scale:
        state.w_norms.append(0.0)
    else:
        v_next = w / nrm
        state.w_norms.append(float(np.linalg.norm(v_next + state.gamma * spmv(a, v_next))))
    _finish_step(state, w, nrm, _BREAKDOWN_RELATIVE_SAI * scale)
    return state


def extend_after_breakdown(state: ArnoldiState, a: SparseMatrix) -> ArnoldiState:
    """Append a deterministic orthonormal continuation vector after a happy
    breakdown so the iteration can formally proceed (the new subdiagonal stays
    exactly zero, so residuals remain zero)."""
    if not state.exact or state.k < 1:
        raise ValueError("state has no breakdown to extend past")
    col = state.k  # the unset basis column
    rng = np.random.default_rng(0x5A1)
    for _ in range(50):
        q = rng.standard_normal(state.n)
        for _ in range(2):
            q -= state.basis[:, :col] @ (state.basis[:, :col].T @ q)
        nq = float(np.linalg.norm(q))
        if nq > 1e-3 * np.sqrt(state.n):
            q /= nq
            state.basis[:, col] = q
            if state.mode == SAI:
                state.w_norms[col - 1] = float(np.linalg.norm(q + state.gamma * spmv(a, q)))
            else:
                state.w_norms[col - 1] = 1.0
            state.exact = False
            return state
    raise RuntimeError("could not construct a continuation vector")


def exact_shifted_solver(a: SparseMatrix, gamma: float):
    """Direct solver for (I + gamma*A) w = v backed by one sparse LU."""
    handle = lu_factorize(shifted(a, gamma), shift_gamma=gamma)

    def solver(v: np.ndarray) -> tuple[np.ndarray, SolveStats]:
        x = handle.solve(v)
        return x, SolveStats(0, 0.0, True, 0.0)

    return solver


def arnoldi_build(
    a: SparseMatrix,
    v: np.ndarray,
    steps: int,
    mode: str = POLYNOMIAL,
    gamma: float = 0.0,
    shifted_solver=None,
) -> ArnoldiState:
    """Run up to ``steps`` Arnoldi steps (stops early on happy breakdown)."""
    state = start_state(v, steps, mode=mode, gamma=gamma)
    if mode == SAI and shifted_solver is None:
        shifted_solver = exact_shifted_solver(a, gamma)
    for _ in range(steps):
        if mode == POLYNOMIAL:
            arnoldi_step_polynomial(state, a)
        else:
            arnoldi_step_sai(state, a, shifted_solver)
        if state.exact:
            break
    return state


def back_transform(h_tilde: np.ndarray, gamma: float) -> np.ndarray:
    """Projected generator from the SAI projection: (inv(h_tilde) - I)/gamma,
    computed by a dense solve against the identity."""
    h_tilde = np.asarray(h_tilde, dtype=float)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    k = h_tilde.shape[0]
    if h_tilde.shape != (k, k):
        raise ValueError(f"expected a square matrix, got shape {h_tilde.shape}")
    eye = np.eye(k)
    try:
        inv = np.linalg.solve(h_tilde, eye)
    except np.linalg.LinAlgError as exc:
        raise ValueError("SAI projection is singular (degenerate projection)") from exc
    cond_est = float(np.linalg.norm(h_tilde, 1) * np.linalg.norm(inv, 1))
    if not np.isfinite(cond_est) or cond_est > 1e14:
        raise ValueError(
            f"SAI projection is numerically singular (condition estimate {cond_est:.2e})"
        )
    return (inv - eye) / gamma


def projected_matrix(state: ArnoldiState) -> np.ndarray:
    """The k x k projected generator of the current state."""
    k = state.k
    if k < 1:
        raise ValueError("no Arnoldi steps taken yet")
    h = state.hess[:k, :k]
    return back_transform(h, state.gamma) if state.mode == SAI else h.copy()


def projected_solution(h_k: np.ndarray, beta: float, s: float) -> np.ndarray:
    """u(s) = exp(-s*h_k) (beta*e1), the projected trajectory coefficient."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    k = h_k.shape[0]
    e1 = np.zeros(k)
    e1[0] = beta
    return expm_action(h_k, s, e1)


def _residual_row(state: ArnoldiState, h_k: np.ndarray) -> tuple[float, np.ndarray, float]:
    """(scale, row, w_norm) with ||r_k(s)|| = scale * |row @ u(s)| * w_norm."""
    k = state.k
    if k < 1:
        raise ValueError("no Arnoldi steps taken yet")
    if h_k.shape != (k, k):
        raise ValueError(f"projected matrix shape {h_k.shape} does not match k={k}")
    h_sub = state.subdiag
    if state.mode == POLYNOMIAL:
        row = np.zeros(k)
        row[k - 1] = 1.0
        return abs(h_sub), row, 1.0
    # e_k^T (I + gamma*H_k): one row, avoids any small solve per sample
    row = state.gamma * h_k[k - 1, :].copy()
    row[k - 1] += 1.0
    return abs(h_sub) / state.gamma, row, state.w_next_norm


def residual_norm(state: ArnoldiState, h_k: np.ndarray, s: float) -> float:
    """||r_k(s)|| from small-matrix quantities only."""
    scale, row, w_norm = _residual_row(state, h_k)
    if scale == 0.0:
        return 0.0
    u = projected_solution(h_k, state.beta, s)
    return scale * abs(float(row @ u)) * w_norm


def residual_samples(state: ArnoldiState, h_k: np.ndarray, t: float, count: int,
                     refresh_every: int = 50) -> ResidualSamples:
    """||r_k(s_j)|| at s_j = j*t/count, j = 1..count.

    The projected trajectory is advanced by repeated multiplication with
    exp(-(t/count) h_k) and refreshed by a direct evaluation every
    ``refresh_every`` samples to bound drift.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if t <= 0:
        raise ValueError("t must be positive")
    scale, row, w_norm = _residual_row(state, h_k)
    times = t * (np.arange(1, count + 1, dtype=float) / count)
    k = state.k
    u = np.zeros(k)
    u[0] = state.beta
    step = expm(-(t / count) * h_k)
    norms = np.empty(count)
    for j in range(1, count + 1):
        if refresh_every > 0 and j % refresh_every == 0:
            u = projected_solution(h_k, state.beta, times[j - 1])
        else:
            u = step @ u
        norms[j - 1] = scale * abs(float(row @ u)) * w_norm
    return ResidualSamples(times=times, norms=norms)


def omega_k(h_tilde: np.ndarray, gamma: float) -> float:
    """Decay constant of the projected generator: (1/||h_tilde|| - 1)/gamma.

    Nonnegative whenever the underlying operator has a nonnegative-real-part
    field of values and the SAI relation holds.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    nrm = spectral_norm(np.asarray(h_tilde, dtype=float))
    if nrm == 0.0:
        raise ValueError("SAI projection has zero norm")
    return (1.0 / nrm - 1.0) / gamma


def residual_bound(state: ArnoldiState, h_k: np.ndarray, s: float) -> float:
    """Computable upper bound on ||r_k(s)|| for SAI states.

    beta * h_{k+1,k} * ( min{ s ||(I+gH)H|| phi(-s w), ||I+gH|| (1+e^{-s w}) } / g
    + |H[k,1]| ) * ||w_{k+1}||, with w the decay constant of the projection.
    """
    if state.mode != SAI:
        raise ValueError("residual_bound is defined for sai states")
    if s < 0:
        raise ValueError("s must be nonnegative")
    k = state.k
    if k < 1:
        raise ValueError("no Arnoldi steps taken yet")
    gamma = state.gamma
    h_sub = abs(state.subdiag)
    if h_sub == 0.0:
        return 0.0
    w = omega_k(state.hess[:k, :k], gamma)
    eye_gh = np.eye(k) + gamma * h_k
    term_small_s = s * spectral_norm(eye_gh @ h_k) * phi(-s * w)
    term_large_s = spectral_norm(eye_gh) * (1.0 + np.exp(-s * w))
    h_k1 = abs(float(h_k[k - 1, 0]))
    return state.beta * h_sub * (min(term_small_s, term_large_s) / gamma + h_k1) * state.w_next_norm


def assemble_iterate(state: ArnoldiState, u: np.ndarray) -> np.ndarray:
    """y = V_k u (the projected coefficient u already carries beta)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (state.k,):
        raise ValueError(f"coefficient length {u.shape} does not match k={state.k}")
    return state.basis[:, : state.k] @ u


def explicit_residual_vector(a: SparseMatrix, state: ArnoldiState,
                             h_k: np.ndarray, s: float) -> np.ndarray:
    """-A y_k(s) - y_k'(s) assembled in full n-vector arithmetic."""
    u = projected_solution(h_k, state.beta, s)
    y = assemble_iterate(state, u)
    y_prime = -assemble_iterate(state, h_k @ u)
    return -spmv(a, y) - y_prime


def explicit_residual_norm(a: SparseMatrix, state: ArnoldiState,
                           h_k: np.ndarray, s: float) -> float:
    return float(np.linalg.norm(explicit_residual_vector(a, state, h_k, s)))
