"""Hermitian matrix algebra and the geometry of the positive-definite cone.

Positive Hermitian matrices are treated as points of the symmetric space
GL(d)/U(d): geodesics are ``t -> e^{tA} H e^{tA}`` for Hermitian ``A`` and the
distance is half the Killing norm of the relative logarithm, so that the
geodesic generated by ``A`` has speed ``||A|| = sqrt(tr A^2)``.
"""

from __future__ import annotations

import json

import numpy as np

# Relative tolerance for accepting a matrix as Hermitian.
HERMITIAN_RTOL = 1e-12

# Eigenvalues below EIG_FLOOR * max|eig| mean the matrix has effectively
# degenerated; we fail loudly instead of regularizing.
EIG_FLOOR = 1e-14


class NotHermitianError(ValueError):
    """Input matrix is not Hermitian within tolerance."""


class DegenerateMatrixError(ValueError):
    """A positive matrix has (numerically) lost positivity."""


def _as_square(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def check_hermitian(a: np.ndarray, rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    """Validate and return ``a`` as a Hermitian matrix."""
    a = _as_square(a)
    scale = max(np.linalg.norm(a), 1.0)
    if np.linalg.norm(a - a.conj().T) > rtol * scale:
        raise NotHermitianError("matrix is not Hermitian within tolerance")
    return 0.5 * (a + a.conj().T)


def hermitian_part(a: np.ndarray) -> np.ndarray:
    """(A + A*) / 2."""
    a = _as_square(a)
    return 0.5 * (a + a.conj().T)


def trace_free(a: np.ndarray) -> np.ndarray:
    """Remove the trace: A - (tr A / d) I."""
    a = check_hermitian(a)
    d = a.shape[0]
    return a - (np.trace(a).real / d) * np.eye(d)


def killing_norm(a: np.ndarray) -> float:
    """sqrt(tr A^2) for Hermitian A (the Frobenius norm)."""
    a = check_hermitian(a)
    return float(np.linalg.norm(a))


def op_norm(a: np.ndarray) -> float:
    """Largest eigenvalue modulus of a Hermitian matrix."""
    a = check_hermitian(a)
    if a.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(a))))


def _eigh_positive(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a positive matrix; fails loudly on degeneracy."""
    h = check_hermitian(h)
    w, v = np.linalg.eigh(h)
    if w[-1] <= 0 or w[0] <= EIG_FLOOR * w[-1]:
        raise DegenerateMatrixError(
            f"matrix is not safely positive definite (eigs in [{w[0]:.3e}, {w[-1]:.3e}])"
        )
    return w, v


def check_positive(h: np.ndarray) -> np.ndarray:
    """Validate and return ``h`` as a positive-definite Hermitian matrix."""
    h = check_hermitian(h)
    _eigh_positive(h)
    return h


def herm_exp(a: np.ndarray) -> np.ndarray:
    """exp(A) for Hermitian A via eigendecomposition."""
    a = check_hermitian(a)
    w, v = np.linalg.eigh(a)
    return hermitian_part((v * np.exp(w)) @ v.conj().T)


def pos_log(h: np.ndarray) -> np.ndarray:
    """log(H) for positive-definite Hermitian H."""
    w, v = _eigh_positive(h)
    return hermitian_part((v * np.log(w)) @ v.conj().T)


def pos_power(h: np.ndarray, p: float) -> np.ndarray:
    """H^p for positive-definite Hermitian H."""
    w, v = _eigh_positive(h)
    return hermitian_part((v * w**p) @ v.conj().T)


def random_hermitian(rng: np.random.Generator, dim: int, norm: float | None = None) -> np.ndarray:
    """Random Hermitian matrix, optionally rescaled to a given Killing norm."""
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    a = hermitian_part(a)
    if norm is not None:
        a *= norm / np.linalg.norm(a)
    return a


def geodesic_point(h0: np.ndarray, a: np.ndarray, t: float) -> np.ndarray:
    """Point e^{tA} H0 e^{tA} on the geodesic through H0 generated by A."""
    h0 = check_positive(h0)
    a = check_hermitian(a)
    if a.shape != h0.shape:
        raise ValueError(f"dimension mismatch: {h0.shape} vs {a.shape}")
    e = herm_exp(t * a)
    return hermitian_part(e @ h0 @ e)


def distance(h0: np.ndarray, h1: np.ndarray) -> float:
    """Symmetric-space distance (1/2) ||log(H0^{-1/2} H1 H0^{-1/2})||.

    With this normalization d(H, e^{A} H e^{A}) = ||A|| for Hermitian A, i.e.
    the geodesic generated by A has unit speed when ||A|| = 1.
    """
    h0 = check_positive(h0)
    h1 = check_positive(h1)
    if h0.shape != h1.shape:
        raise ValueError("dimension mismatch")
    r = pos_power(h0, -0.5)
    m = hermitian_part(r @ h1 @ r)
    return 0.5 * float(np.linalg.norm(pos_log(m)))


def scaled_distance(h0: np.ndarray, h1: np.ndarray, k: int, n: int = 1) -> float:
    """Distance rescaled by k^{-(n+2)/2} (quadratic form k^{-(n+2)} tr A^2)."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    return float(k) ** (-(n + 2) / 2.0) * distance(h0, h1)


# ---------------------------------------------------------------------------
# Serialization: {dim, re, im} with row-major entry lists.
# ---------------------------------------------------------------------------


def matrix_to_dict(a: np.ndarray) -> dict:
    """JSON-ready dict {dim, re, im} (row-major)."""
    a = _as_square(a)
    return {
        "dim": int(a.shape[0]),
        "re": [float(x) for x in a.real.ravel()],
        "im": [float(x) for x in a.imag.ravel()],
    }


def matrix_from_dict(d: dict) -> np.ndarray:
    dim = int(d["dim"])
    re = np.asarray(d["re"], dtype=float).reshape(dim, dim)
    im = np.asarray(d["im"], dtype=float).reshape(dim, dim)
    return re + 1j * im


def matrix_to_json(a: np.ndarray) -> str:
    return json.dumps(matrix_to_dict(a))


def matrix_from_json(s: str) -> np.ndarray:
    return matrix_from_dict(json.loads(s))
