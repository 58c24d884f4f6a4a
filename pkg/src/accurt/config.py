"""Flat key=value run configuration for the command-line driver.

One ``key = value`` pair per line; ``#`` starts a comment.  ``problem`` and
``tol`` are required, every other key has a documented default (see README).
Parse failures name the offending line.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

__all__ = ["RunConfig", "ConfigError"]


class ConfigError(ValueError):
    """Malformed configuration; message carries the line number."""


_REQUIRED = ("problem", "tol")

_CHOICES = {
    "problem": ("conv-diff", "maxwell", "mtx"),
    "method": ("accurt", "rt", "polynomial"),
    "backend": ("direct-lu", "gmres-ilut", "gmres-unpreconditioned"),
    "oracle": ("auto", "off"),
    "face_average": ("arithmetic", "harmonic"),
}


@dataclass
class RunConfig:
    problem: str = ""
    tol: float = 0.0
    # problem parameters
    nx: int = 102
    pe: float = 200.0
    cells: int = 8
    matrix_file: str = ""
    initial_file: str = ""
    face_average: str = "arithmetic"
    # method parameters
    method: str = "accurt"
    t: float = 1.0
    k_max: int = 10
    gamma: Optional[float] = None
    backend: str = "direct-lu"
    inner_tol: Optional[float] = None
    ilut_drop_tol: float = 1e-3
    ilut_relative_drop: bool = True
    scan_count: int = 500
    checkpoint_count: int = 3
    max_restarts: int = 200
    gmres_restart: int = 10
    max_inner_cycles: int = 200
    poly_max_steps: int = 2000
    precond_advice: bool = False
    oracle: str = "auto"
    strict: bool = True
    # output artifact names (resolved against --out)
    report_file: str = "report.txt"
    solution_file: str = "solution.txt"
    curve_file: str = "curve.csv"
    matrix_out: str = "matrix.mtx"

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        spec = {f.name: f for f in fields(cls)}
        values: dict = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
                key, _, text = line.partition("=")
                key = key.strip().replace("-", "_")
                text = text.strip()
                if key not in spec:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                if key in values:
                    raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
                values[key] = _convert(spec[key].type, key, text, path, lineno)
        for key in _REQUIRED:
            if key not in values:
                raise ConfigError(f"{path}: missing required key {key!r}")
        cfg = cls(**values)
        cfg.validate(path)
        return cfg

    def validate(self, origin: str = "config") -> None:
        for key, allowed in _CHOICES.items():
            val = getattr(self, key)
            if val not in allowed:
                raise ConfigError(f"{origin}: {key} must be one of {allowed}, got {val!r}")
        if self.tol <= 0:
            raise ConfigError(f"{origin}: tol must be positive")
        if self.t <= 0:
            raise ConfigError(f"{origin}: t must be positive")
        if self.gamma is not None and self.gamma <= 0:
            raise ConfigError(f"{origin}: gamma must be positive")
        if self.problem == "mtx" and not self.matrix_file:
            raise ConfigError(f"{origin}: problem = mtx requires matrix_file")

    def resolved_lines(self) -> list[str]:
        """Deterministic key=value echo of the effective configuration."""
        out = []
        for f in fields(self):
            val = getattr(self, f.name)
            if val is None:
                rendered = "default"
            elif isinstance(val, bool):
                rendered = str(val).lower()
            elif isinstance(val, float):
                rendered = repr(val)
            else:
                rendered = str(val)
            out.append(f"{f.name} = {rendered}")
        return out


def _convert(ftype, key: str, text: str, path, lineno: int):
    if text == "":
        raise ConfigError(f"{path}:{lineno}: empty value for {key!r}")
    try:
        if ftype in ("int", int):
            return int(text)
        if ftype in ("float", float, "Optional[float]", Optional[float]):
            return float(text)
        if ftype in ("bool", bool):
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        return text
    except ValueError as exc:
        raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
