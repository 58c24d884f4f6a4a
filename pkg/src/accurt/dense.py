"""Dense kernels: small matrix exponentials, the phi function, spectral norms.

These routines back the projected (small Hessenberg) problems of the Krylov
engines.  Matrices are plain 2-D float ndarrays, row-major.
"""

from __future__ import annotations

import numpy as np

__all__ = ["expm", "expm_action", "phi", "spectral_norm", "DEFAULT_EXPM_DIM_CAP"]

# Guards against accidentally feeding a large operator to the dense routine;
# projected matrices in this package have dimension <= the restart length.
DEFAULT_EXPM_DIM_CAP = 64

# Diagonal Pade approximants of degree 3..13 with norm thresholds for the
# scaling-and-squaring evaluation (the widely used degree-13 scheme).
_PADE_COEFFS = {
    3: [120.0, 60.0, 12.0, 1.0],
    5: [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
    7: [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0],
    9: [17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0],
    13: [64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
         960960.0, 16380.0, 182.0, 1.0],
}
_PADE_THETA = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
    (13, 5.371920351148152e0),
]


def _as_square(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError("matrix has non-finite entries")
    return m


def _pade(m: np.ndarray, degree: int) -> np.ndarray:
    """Evaluate the degree-`degree` diagonal Pade approximant of exp(m)."""
    c = _PADE_COEFFS[degree]
    n = m.shape[0]
    eye = np.eye(n)
    if degree < 13:
        # powers m^0, m^2, m^4, ...
        pows = [eye, m @ m]
        for _ in range(2, degree // 2 + 1):
            pows.append(pows[-1] @ pows[1])
        u = np.zeros_like(m)
        v = np.zeros_like(m)
        for j in range(degree, 0, -2):
            u += c[j] * pows[j // 2]
        u = m @ u
        for j in range(degree - 1, -1, -2):
            v += c[j] * pows[(j + 1) // 2]
    else:
        m2 = m @ m
        m4 = m2 @ m2
        m6 = m2 @ m4
        u = m @ (m6 @ (c[13] * m6 + c[11] * m4 + c[9] * m2)
                 + c[7] * m6 + c[5] * m4 + c[3] * m2 + c[1] * eye)
        v = (m6 @ (c[12] * m6 + c[10] * m4 + c[8] * m2)
             + c[6] * m6 + c[4] * m4 + c[2] * m2 + c[0] * eye)
    return np.linalg.solve(v - u, v + u)


def expm(m: np.ndarray, *, max_dim: int = DEFAULT_EXPM_DIM_CAP) -> np.ndarray:
    """exp(m) for a small square matrix by Pade scaling-and-squaring.

    ``max_dim`` caps the accepted dimension; callers that legitimately need
    larger dense exponentials (e.g. reference solutions) pass a higher cap.
    """
    m = _as_square(m)
    n = m.shape[0]
    if n > max_dim:
        raise ValueError(f"matrix dimension {n} exceeds the dense expm cap {max_dim}")
    if n == 0:
        return np.zeros((0, 0))

    norm1 = float(np.max(np.sum(np.abs(m), axis=0))) if n else 0.0
    for degree, theta in _PADE_THETA:
        if norm1 <= theta:
            return _pade(m, degree)
    # scale so that ||m / 2^s|| <= theta_13, square s times afterwards
    theta13 = _PADE_THETA[-1][1]
    s = max(0, int(np.ceil(np.log2(norm1 / theta13))))
    f = _pade(m / (2.0 ** s), 13)
    for _ in range(s):
        f = f @ f
    return f


def expm_action(m: np.ndarray, t: float, w: np.ndarray,
                *, max_dim: int = DEFAULT_EXPM_DIM_CAP) -> np.ndarray:
    """exp(-t*m) @ w for a small square matrix m and t >= 0."""
    m = _as_square(m)
    w = np.asarray(w, dtype=float)
    if t < 0:
        raise ValueError("t must be nonnegative")
    if w.shape != (m.shape[0],):
        raise ValueError(f"vector length {w.shape} does not match matrix dimension {m.shape[0]}")
    if t == 0.0:
        return w.copy()
    return expm(-t * m, max_dim=max_dim) @ w


def phi(z: float, *, series_threshold: float = 1e-5) -> float:
    """phi(z) = (e^z - 1)/z, with a short series near z = 0 to avoid cancellation."""
    z = float(z)
    if not np.isfinite(z):
        raise ValueError("phi requires a finite argument")
    if abs(z) < series_threshold:
        return 1.0 + z / 2.0 + z * z / 6.0
    return float(np.expm1(z) / z)


def spectral_norm(m: np.ndarray) -> float:
    """2-norm (largest singular value) via the Gram matrix of the smaller side."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim {m.ndim}")
    if not np.isfinite(m).all():
        raise ValueError("matrix has non-finite entries")
    if m.size == 0:
        return 0.0
    gram = m @ m.T if m.shape[0] <= m.shape[1] else m.T @ m
    lam = float(np.linalg.eigvalsh(gram)[-1])
    return float(np.sqrt(max(lam, 0.0)))
