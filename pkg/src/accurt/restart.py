"""Residual-time restarting for the SAI Krylov evaluation of exp(-tA)v.

Outer loop: run up to ``k_max`` SAI Arnoldi steps, testing the residual at the
three checkpoints s = t/3, 2t/3, t of the remaining interval after every step.
On reaching ``k_max`` without convergence, scan the residual over the interval
(500 points), advance to the largest time delta where it is within tolerance,
shrink the interval and restart from the iterate at delta.  When no scan point
qualifies, plain RT restarts from the point of minimum residual and flags an
accuracy warning; AccuRT instead halves the shift gamma, switches the shifted
solves to GMRES preconditioned by the original factorization (computed once,
at the initial shift), and narrows the next scan to the first half of the
interval until a restart succeeds again.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .krylov import (
    SAI,
    ArnoldiState,
    arnoldi_step_sai,
    assemble_iterate,
    extend_after_breakdown,
    projected_matrix,
    projected_solution,
    residual_samples,
    start_state,
)
from .solvers import (
    ConvergenceError,
    LinearOperator,
    SolveStats,
    gmres_restarted,
    prefer_preconditioner,
    spectral_radius_estimate,
)
from .sparse import Factorization, SparseMatrix, ilut_factorize, lu_factorize, shifted

__all__ = [
    "AccuRTConfig",
    "RestartRecord",
    "RestartSnapshot",
    "RunReport",
    "StagnationError",
    "EngineSolveError",
    "find_delta",
    "run",
    "resume_with_gamma",
]

BACKENDS = ("direct-lu", "gmres-ilut", "gmres-unpreconditioned")
MODES = ("rt", "accurt")


class StagnationError(RuntimeError):
    """Restart budget exhausted without convergence; carries the report."""

    def __init__(self, message: str, report: "RunReport"):
        super().__init__(message)
        self.report = report


class EngineSolveError(RuntimeError):
    """An inner shifted solve failed; carries the partial report."""

    def __init__(self, message: str, report: "RunReport"):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class AccuRTConfig:
    tol: float = 1e-8
    k_max: int = 10
    gamma0: Optional[float] = None  # default t/20 at run time
    checkpoint_count: int = 3
    scan_count: int = 500
    gamma_halving: float = 2.0
    backend: str = "direct-lu"
    inner_tol: Optional[float] = None  # default 1e-2*tol/max(1, t), floor 1e-12
    max_restarts: int = 200
    mode: str = "accurt"
    # halving below this fraction of gamma0 means the shifted iteration has
    # degenerated (no scan point ever qualified); stop with a diagnosis
    # instead of grinding toward an eps-sized shift
    gamma_floor_ratio: float = 2.0 ** -30
    ilut_drop_tol: float = 1e-3
    ilut_relative_drop: bool = True
    gmres_restart: int = 10
    max_inner_cycles: int = 200
    precond_advice: bool = False
    keep_states: bool = False

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.k_max < 2:
            raise ValueError("k_max must be at least 2")
        if self.gamma0 is not None and self.gamma0 <= 0:
            raise ValueError("gamma0 must be positive")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.checkpoint_count < 1 or self.scan_count < 1:
            raise ValueError("checkpoint_count and scan_count must be positive")
        if self.gamma_halving <= 1:
            raise ValueError("gamma_halving must exceed 1")

    def resolved_inner_tol(self, t: float) -> float:
        if self.inner_tol is not None:
            return self.inner_tol
        return max(1e-12, 1e-2 * self.tol / max(1.0, t))


@dataclass
class RestartRecord:
    index: int
    gamma: float
    solver_label: str
    delta: float = 0.0
    steps: int = 0
    inner_per_step: list = field(default_factory=list)
    scan_min: Optional[float] = None
    gamma_halved: bool = False
    warning: bool = False
    converged: bool = False
    precond_advised: Optional[bool] = None

    @property
    def inner_total(self) -> int:
        return int(sum(self.inner_per_step))


@dataclass
class RestartSnapshot:
    """Per-restart state kept for verification (``keep_states`` runs only)."""

    basis: np.ndarray  # n x k
    h_k: np.ndarray
    beta: float
    delta: float
    t_segment: float
    v_next: Optional[np.ndarray]


@dataclass
class RunReport:
    n: int
    t_start: float
    tol: float
    mode: str
    backend: str
    gamma0: float
    inner_tol: float
    records: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    gamma_final: float = 0.0
    converged: bool = False
    termination: str = ""  # "checkpoint-converged" | "time-exhausted"
    warning: bool = False
    t_remaining: float = 0.0
    lu_factorizations: int = 0
    rho_estimate: Optional[float] = None
    checkpoint_times: Optional[np.ndarray] = None
    checkpoint_residuals: Optional[np.ndarray] = None
    solution: Optional[np.ndarray] = None

    @property
    def total_steps(self) -> int:
        return int(sum(r.steps for r in self.records))

    @property
    def total_inner_iterations(self) -> int:
        return int(sum(r.inner_total for r in self.records))

    @property
    def deltas(self) -> list:
        return [r.delta for r in self.records]

    @property
    def delta_sum(self) -> float:
        return float(np.sum(self.deltas)) if self.records else 0.0

    def to_lines(self) -> list[str]:
        """Line-oriented key=value rendering, deterministic."""
        out = [
            f"n = {self.n}",
            f"t = {self.t_start!r}",
            f"tol = {self.tol!r}",
            f"mode = {self.mode}",
            f"backend = {self.backend}",
            f"gamma0 = {self.gamma0!r}",
            f"inner_tol = {self.inner_tol!r}",
            f"gamma_final = {self.gamma_final!r}",
            f"converged = {str(self.converged).lower()}",
            f"termination = {self.termination}",
            f"warning = {str(self.warning).lower()}",
            f"restarts = {len(self.records)}",
            f"steps_total = {self.total_steps}",
            f"inner_total = {self.total_inner_iterations}",
            f"lu_factorizations = {self.lu_factorizations}",
            f"t_remaining = {self.t_remaining!r}",
            f"delta_sum = {self.delta_sum!r}",
        ]
        if self.rho_estimate is not None:
            out.append(f"rho_estimate = {self.rho_estimate!r}")
        if self.checkpoint_times is not None:
            out.append("checkpoint_times = " + ", ".join(repr(float(x)) for x in self.checkpoint_times))
            out.append("checkpoint_residuals = " + ", ".join(repr(float(x)) for x in self.checkpoint_residuals))
        for rec in self.records:
            out.append(f"[restart {rec.index}]")
            out.append(f"gamma = {rec.gamma!r}")
            out.append(f"solver = {rec.solver_label}")
            out.append(f"steps = {rec.steps}")
            out.append(f"delta = {rec.delta!r}")
            out.append(f"inner_iterations = {rec.inner_total}")
            out.append("inner_per_step = " + ", ".join(str(i) for i in rec.inner_per_step))
            if rec.scan_min is not None:
                out.append(f"scan_min = {rec.scan_min!r}")
            out.append(f"gamma_halved = {str(rec.gamma_halved).lower()}")
            out.append(f"warning = {str(rec.warning).lower()}")
            out.append(f"converged = {str(rec.converged).lower()}")
            if rec.precond_advised is not None:
                out.append(f"precond_advised = {str(rec.precond_advised).lower()}")
        return out


def find_delta(samples, tol: float) -> float:
    """Largest sampled time whose residual norm is within tol; 0 if none."""
    norms = np.asarray(samples.norms)
    times = np.asarray(samples.times)
    if norms.size == 0:
        raise ValueError("empty residual samples")
    ok = norms <= tol
    return float(times[ok].max()) if ok.any() else 0.0


def _make_solver(
    a: SparseMatrix,
    gamma: float,
    use_direct: bool,
    direct: Optional[Factorization],
    precond: Optional[Factorization],
    cfg: AccuRTConfig,
    inner_tol: float,
) -> tuple[Callable, str]:
    if use_direct:
        def solver(v: np.ndarray):
            return direct.solve(v), SolveStats(0, 0.0, True, 0.0)

        return solver, "direct-lu"
    op = LinearOperator.shifted_action(a, gamma)
    label = f"gmres{cfg.gmres_restart}" + ("+precond" if precond is not None else "")

    def solver(v: np.ndarray):
        return gmres_restarted(
            op, v,
            restart_m=cfg.gmres_restart,
            precond=precond,
            tol=inner_tol,
            max_outer=cfg.max_inner_cycles,
        )

    return solver, label


def run(a: SparseMatrix, v: np.ndarray, t: float,
        cfg: AccuRTConfig) -> tuple[np.ndarray, RunReport]:
    """Compute y ~ exp(-tA)v with RT or AccuRT restarting; returns (y, report)."""
    if t <= 0:
        raise ValueError("t must be positive")
    v = np.asarray(v, dtype=float)
    if v.shape != (a.n,):
        raise ValueError(f"vector length {v.shape} does not match n={a.n}")
    if float(np.linalg.norm(v)) == 0.0:
        raise ValueError("initial vector must be nonzero")

    gamma0 = cfg.gamma0 if cfg.gamma0 is not None else t / 20.0
    inner_tol = cfg.resolved_inner_tol(t)
    report = RunReport(n=a.n, t_start=t, tol=cfg.tol, mode=cfg.mode,
                       backend=cfg.backend, gamma0=gamma0, inner_tol=inner_tol)

    direct: Optional[Factorization] = None
    precond: Optional[Factorization] = None
    if cfg.backend == "direct-lu":
        direct = lu_factorize(shifted(a, gamma0), shift_gamma=gamma0)
        report.lu_factorizations = 1
    elif cfg.backend == "gmres-ilut":
        precond = ilut_factorize(
            shifted(a, gamma0), cfg.ilut_drop_tol,
            shift_gamma=gamma0, relative_to_row_norm=cfg.ilut_relative_drop,
        )
    if cfg.precond_advice:
        report.rho_estimate = spectral_radius_estimate(a, 50)

    gamma = gamma0
    gamma_changed = False
    restricted_scan = False
    t_rem = t
    v_cur = v.astype(float, copy=True)
    converged = False
    final_state: Optional[ArnoldiState] = None
    final_h = None

    while t_rem > 0 and not converged:
        if len(report.records) >= cfg.max_restarts:
            report.gamma_final = gamma
            report.t_remaining = t_rem
            raise StagnationError(
                f"no convergence within {cfg.max_restarts} restarts "
                f"(t remaining {t_rem!r})", report)

        use_direct = cfg.backend == "direct-lu" and not gamma_changed
        # after a shift change the original factorization keeps serving,
        # demoted from solver to preconditioner
        gmres_precond = direct if cfg.backend == "direct-lu" else precond
        solver, label = _make_solver(a, gamma, use_direct, direct, gmres_precond, cfg, inner_tol)
        rec = RestartRecord(index=len(report.records) + 1, gamma=gamma, solver_label=label)
        if cfg.precond_advice and gamma < gamma0:
            rec.precond_advised = prefer_preconditioner(gamma, gamma0, report.rho_estimate)
        state = start_state(v_cur, cfg.k_max, mode=SAI, gamma=gamma)
        h_k = None
        t_segment = t_rem

        for _k in range(1, cfg.k_max + 1):
            if state.exact:
                extend_after_breakdown(state, a)
            try:
                arnoldi_step_sai(state, a, solver)
            except ConvergenceError as exc:
                rec.steps = state.k
                rec.inner_per_step = list(state.inner_iterations)
                report.records.append(rec)
                report.gamma_final = gamma
                report.t_remaining = t_rem
                raise EngineSolveError(f"shifted solve failed: {exc}", report) from exc
            h_k = projected_matrix(state)
            cps = residual_samples(state, h_k, t_rem, cfg.checkpoint_count)
            resnorm = float(np.max(cps.norms))
            if resnorm <= cfg.tol and state.k > 1:
                converged = True
                rec.converged = True
                break
            if state.k == cfg.k_max:
                scan_t = t_rem / 2.0 if restricted_scan else t_rem
                scan = residual_samples(state, h_k, scan_t, cfg.scan_count)
                r_min = float(np.min(scan.norms))
                rec.scan_min = r_min
                if r_min > cfg.tol:
                    if cfg.mode == "accurt":
                        delta = 0.0
                        if gamma / cfg.gamma_halving < gamma0 * cfg.gamma_floor_ratio:
                            rec.steps = state.k
                            rec.inner_per_step = list(state.inner_iterations)
                            report.records.append(rec)
                            report.gamma_final = gamma
                            report.t_remaining = t_rem
                            raise StagnationError(
                                f"shift halved to {gamma!r} without any scan point "
                                f"reaching tol={cfg.tol:g} (scan min {r_min:.3e})", report)
                        gamma = gamma / cfg.gamma_halving
                        gamma_changed = True
                        restricted_scan = True
                        rec.gamma_halved = True
                    else:
                        delta = float(scan.times[int(np.argmin(scan.norms))])
                        rec.warning = True
                        report.warning = True
                else:
                    delta = find_delta(scan, cfg.tol)
                if delta > 0:
                    restricted_scan = False
                u_delta = projected_solution(h_k, state.beta, delta)
                v_next = assemble_iterate(state, u_delta)
                rec.delta = delta
                if cfg.keep_states:
                    report.snapshots.append(RestartSnapshot(
                        basis=state.basis[:, : state.k].copy(),
                        h_k=h_k.copy(), beta=state.beta, delta=delta,
                        t_segment=t_segment, v_next=v_next.copy()))
                v_cur = v_next
                t_rem = t_rem - delta

        rec.steps = state.k
        rec.inner_per_step = list(state.inner_iterations)
        report.records.append(rec)
        if converged:
            final_state = state
            final_h = h_k

    report.gamma_final = gamma
    report.t_remaining = t_rem
    if converged:
        u_final = projected_solution(final_h, final_state.beta, t_rem)
        y = assemble_iterate(final_state, u_final)
        cps = residual_samples(final_state, final_h, t_rem, cfg.checkpoint_count)
        report.termination = "checkpoint-converged"
    else:
        # the last restart consumed the whole remaining interval
        y = v_cur
        final_state = None
        cps = None
        report.termination = "time-exhausted"
    report.converged = True
    if cps is not None:
        report.checkpoint_times = cps.times
        report.checkpoint_residuals = cps.norms
    if cfg.keep_states and final_state is not None:
        report.snapshots.append(RestartSnapshot(
            basis=final_state.basis[:, : final_state.k].copy(),
            h_k=final_h.copy(), beta=final_state.beta, delta=float(t_rem),
            t_segment=t_rem, v_next=None))
    report.solution = y
    return y, report


def resume_with_gamma(a: SparseMatrix, v: np.ndarray, t: float, cfg: AccuRTConfig,
                      gamma_detected: float) -> tuple[np.ndarray, RunReport]:
    """Re-run with a previously detected shift: the direct factorization is
    rebuilt at that shift; halving re-engages only if a scan fails again."""
    if gamma_detected <= 0:
        raise ValueError("gamma_detected must be positive")
    return run(a, v, t, dataclasses.replace(cfg, gamma0=gamma_detected))
