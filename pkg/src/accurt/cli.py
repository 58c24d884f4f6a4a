"""Command-line driver: run restarted evaluations, dump residual curves,
export generated matrices, and verify a run's bookkeeping contracts.

Exit codes: 0 success, 2 finished with an accuracy warning (plain RT had to
restart from an over-tolerance point), 1 any error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import krylov, mmio, oracle, problems, restart
from .config import ConfigError, RunConfig
from .dense import expm_action
from .restart import AccuRTConfig, EngineSolveError, StagnationError
from .solvers import gmres_restarted, LinearOperator
from .sparse import SparseMatrix, ilut_factorize, shifted

__all__ = ["main"]

_REPORT_FORMAT_VERSION = 1


def _load_problem(cfg: RunConfig) -> tuple[SparseMatrix, np.ndarray]:
    if cfg.problem == "conv-diff":
        spec = problems.GridSpec(kind="conv-diff-2d", nx=cfg.nx, pe=cfg.pe,
                                 face_average=cfg.face_average)
        a, v, _ = problems.build_problem(spec)
        return a, v
    if cfg.problem == "maxwell":
        spec = problems.GridSpec(kind="maxwell-yee-3d", cells=cfg.cells)
        a, v, _ = problems.build_problem(spec)
        return a, v
    a = mmio.read_matrix_market(cfg.matrix_file)
    if cfg.initial_file:
        v = np.loadtxt(cfg.initial_file, dtype=float).ravel()
        if v.size != a.n:
            raise ConfigError(
                f"initial_file holds {v.size} values but the matrix has dimension {a.n}")
    else:
        v = np.ones(a.n)
    nrm = float(np.linalg.norm(v))
    if nrm == 0.0:
        raise ConfigError("initial vector is zero")
    return a, v / nrm


def _engine_config(cfg: RunConfig, keep_states: bool = False) -> AccuRTConfig:
    return AccuRTConfig(
        tol=cfg.tol,
        k_max=cfg.k_max,
        gamma0=cfg.gamma,
        checkpoint_count=cfg.checkpoint_count,
        scan_count=cfg.scan_count,
        backend=cfg.backend,
        inner_tol=cfg.inner_tol,
        max_restarts=cfg.max_restarts,
        mode=cfg.method,
        ilut_drop_tol=cfg.ilut_drop_tol,
        ilut_relative_drop=cfg.ilut_relative_drop,
        gmres_restart=cfg.gmres_restart,
        max_inner_cycles=cfg.max_inner_cycles,
        precond_advice=cfg.precond_advice,
        keep_states=keep_states,
    )


def _reference_error(cfg: RunConfig, a: SparseMatrix, v: np.ndarray,
                     y: np.ndarray) -> tuple[str, list[str]]:
    """(table cell, report lines) for the oracle error column."""
    if cfg.oracle == "off":
        return "---", ["reference = off"]
    try:
        ref = oracle.reference_solution(a, v, cfg.t, max_steps=cfg.poly_max_steps)
        err = oracle.true_error(y, ref)
    except oracle.OracleError as exc:
        print(f"reference unavailable: {exc}", file=sys.stderr)
        return "---", [f"reference = unavailable ({exc})"]
    return f"{err:.2e}", [
        f"reference = {ref.method}",
        f"reference_accuracy = {ref.accuracy!r}",
        "error_norm = absolute-2-norm",
        f"error_vs_reference = {err!r}",
    ]


def _write_report(path: Path, cfg: RunConfig, body: list[str]) -> None:
    lines = [f"format = {_REPORT_FORMAT_VERSION}", "[config]"]
    lines += cfg.resolved_lines()
    lines += ["[run]"]
    lines += body
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_solution(path: Path, y: np.ndarray) -> None:
    path.write_text("\n".join(repr(float(x)) for x in y) + "\n", encoding="utf-8")


def _table(method: str, tol: float, error_cell: str, steps: int, inner: int) -> str:
    inner_cell = str(inner) if inner else "---"
    header = f"{'method':<12} {'tolerance':<11} {'error':<11} steps (inner iterations)"
    row = f"{method:<12} {tol:<11.1e} {error_cell:<11} {steps} ({inner_cell})"
    return header + "\n" + row


def _cmd_run(cfg: RunConfig, out: Path, keep_states: bool = False):
    """Shared by `run` and `verify`; returns (exit_code, report or None, extras)."""
    a, v = _load_problem(cfg)
    if cfg.method == "polynomial":
        try:
            ref = oracle.reference_solution(
                a, v, cfg.t, method="tight-polynomial-krylov",
                tol=cfg.tol, max_steps=cfg.poly_max_steps)
        except oracle.OracleError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1, None, {}
        y = ref.solution
        error_cell, error_lines = _reference_error(cfg, a, v, y)
        body = [
            f"n = {a.n}",
            "method = polynomial",
            f"t = {cfg.t!r}",
            f"tol = {cfg.tol!r}",
            f"steps_total = {ref.steps}",
            "inner_total = 0",
            f"residual_accuracy = {ref.accuracy!r}",
        ] + error_lines
        _write_report(out / cfg.report_file, cfg, body)
        _write_solution(out / cfg.solution_file, y)
        print(_table("polynomial", cfg.tol, error_cell, ref.steps, 0))
        return 0, None, {"a": a, "v": v, "y": y}

    engine_cfg = _engine_config(cfg, keep_states=keep_states)
    try:
        y, report = restart.run(a, v, cfg.t, engine_cfg)
    except (StagnationError, EngineSolveError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        _write_report(out / cfg.report_file, cfg,
                      [f"failed = {exc}"] + exc.report.to_lines())
        return 1, exc.report, {}
    error_cell, error_lines = _reference_error(cfg, a, v, y)
    _write_report(out / cfg.report_file, cfg, report.to_lines() + error_lines)
    _write_solution(out / cfg.solution_file, y)
    print(_table(cfg.method, cfg.tol, error_cell, report.total_steps,
                 report.total_inner_iterations))
    code = 2 if report.warning else 0
    return code, report, {"a": a, "v": v, "y": y}


def _cmd_curve(cfg: RunConfig, out: Path, steps: int, samples: int) -> int:
    a, v = _load_problem(cfg)
    gamma = cfg.gamma if cfg.gamma is not None else cfg.t / 20.0
    if cfg.method == "polynomial":
        state = krylov.arnoldi_build(a, v, steps, mode=krylov.POLYNOMIAL)
    else:
        solver = None  # exact LU by default
        if cfg.backend != "direct-lu":
            precond = None
            if cfg.backend == "gmres-ilut":
                precond = ilut_factorize(shifted(a, gamma), cfg.ilut_drop_tol,
                                         shift_gamma=gamma,
                                         relative_to_row_norm=cfg.ilut_relative_drop)
            op = LinearOperator.shifted_action(a, gamma)
            inner_tol = (cfg.inner_tol if cfg.inner_tol is not None
                         else max(1e-12, 1e-2 * cfg.tol / max(1.0, cfg.t)))

            def solver(w, _op=op, _p=precond):
                return gmres_restarted(_op, w, restart_m=cfg.gmres_restart, precond=_p,
                                       tol=inner_tol, max_outer=cfg.max_inner_cycles)
        state = krylov.arnoldi_build(a, v, steps, mode=krylov.SAI, gamma=gamma,
                                     shifted_solver=solver)
    h_k = krylov.projected_matrix(state)
    curve = krylov.residual_samples(state, h_k, cfg.t, samples)
    path = out / cfg.curve_file
    lines = ["s,residual_norm"]
    lines += [f"{float(s)!r},{float(r)!r}" for s, r in zip(curve.times, curve.norms)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {path} ({samples} samples, k={state.k}, gamma={gamma!r})")
    return 0


def _cmd_export(cfg: RunConfig, out: Path) -> int:
    a, _ = _load_problem(cfg)
    path = out / cfg.matrix_out
    mmio.write_matrix_market(a, path)
    print(f"wrote {path} ({a.n}x{a.n}, {a.nnz} entries)")
    return 0


def _cmd_verify(cfg: RunConfig, out: Path) -> int:
    if cfg.method == "polynomial":
        print("verify applies to the restarted methods (rt | accurt)", file=sys.stderr)
        return 1
    code, report, extras = _cmd_run(cfg, out, keep_states=True)
    if report is None or code == 1:
        return 1
    a = extras["a"]
    checks: list[tuple[str, bool]] = []

    t_replay = cfg.t
    for rec in report.records:
        t_replay = t_replay - rec.delta
    checks.append(("time-bookkeeping-exact", t_replay == report.t_remaining))
    checks.append(("halved-restarts-have-zero-delta",
                   all(r.delta == 0.0 for r in report.records if r.gamma_halved)))
    gammas = [r.gamma for r in report.records]
    checks.append(("shift-never-increases",
                   all(g2 <= g1 for g1, g2 in zip(gammas, gammas[1:]))))
    checks.append(("totals-consistent",
                   report.total_steps == sum(r.steps for r in report.records)))

    restart_ok = True
    for snap in report.snapshots:
        if snap.v_next is None:
            continue
        k = snap.h_k.shape[0]
        e1 = np.zeros(k)
        e1[0] = snap.beta
        u = expm_action(snap.h_k, snap.delta, e1)
        v_re = snap.basis @ u
        if float(np.linalg.norm(v_re - snap.v_next)) > 1e-12 * max(1.0, snap.beta):
            restart_ok = False
    checks.append(("restart-vectors-reproducible", restart_ok))

    if report.termination == "checkpoint-converged" and report.snapshots:
        final = report.snapshots[-1]
        state = krylov.ArnoldiState(
            mode=krylov.SAI, gamma=report.gamma_final, beta=final.beta,
            basis=final.basis, hess=np.zeros((final.basis.shape[1] + 1, final.basis.shape[1])),
            k=final.basis.shape[1])
        ok = True
        for s in report.checkpoint_times:
            r_exp = np.linalg.norm(
                krylov.explicit_residual_vector(a, state, final.h_k, float(s)))
            if r_exp > cfg.tol * (1.0 + 1e-6):
                ok = False
        checks.append(("final-checkpoint-residuals-within-tol", ok))

    failed = [name for name, ok in checks if not ok]
    for name, ok in checks:
        print(f"verify {name}: {'PASS' if ok else 'FAIL'}")
    if failed:
        return 1
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="accurt",
        description="Restarted shift-and-invert Krylov evaluation of exp(-tA)v",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, extra in (
        ("run", "execute a configured run and write report/solution files"),
        ("curve", "sample a residual-vs-time curve without restarting"),
        ("export", "write the configured problem matrix in Matrix Market format"),
        ("verify", "run and then check the restart bookkeeping contracts"),
    ):
        p = sub.add_parser(name, help=extra)
        p.add_argument("--config", required=True, help="flat key=value configuration file")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--gamma", type=float, default=None, help="override the initial shift")
        p.add_argument("--strict", action="store_true",
                       help="force the strictly sequential deterministic mode")
        if name == "curve":
            p.add_argument("--steps", type=int, default=10, help="Arnoldi steps (default 10)")
            p.add_argument("--samples", type=int, default=500,
                           help="number of residual samples (default 500)")
    args = parser.parse_args(argv)

    try:
        cfg = RunConfig.from_file(args.config)
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.gamma is not None:
        if args.gamma <= 0:
            print("error: --gamma must be positive", file=sys.stderr)
            return 1
        cfg.gamma = args.gamma
    if args.strict:
        cfg.strict = True

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "run":
            code, _, _ = _cmd_run(cfg, out)
            return code
        if args.command == "curve":
            return _cmd_curve(cfg, out, args.steps, args.samples)
        if args.command == "export":
            return _cmd_export(cfg, out)
        return _cmd_verify(cfg, out)
    except (ConfigError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
