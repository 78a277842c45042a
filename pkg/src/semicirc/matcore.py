"""Dense complex Hermitian linear algebra and the geometry of the PD cone.

All matrices are plain complex ``numpy`` arrays.  Hermitian matrices are kept
Hermitian by explicit symmetrization, positive definite matrices are guarded
by a relative eigenvalue floor, and matrix functions go through the Hermitian
eigendecomposition (sizes here are small, so clarity beats Schur/Pade).
"""

from __future__ import annotations

import numpy as np

from .errors import MatrixDomainError

# Declares "not positive definite" below this fraction of the spectral norm.
PD_FLOOR = 1e-12


def as_matrix(m) -> np.ndarray:
    """Coerce to a square complex matrix, rejecting non-finite entries."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise MatrixDomainError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise MatrixDomainError("matrix has non-finite entries")
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).conj().T


def hermitize(m) -> np.ndarray:
    """Return the Hermitian part (M + M*)/2."""
    a = as_matrix(m)
    return (a + dagger(a)) / 2


def hermitian_defect(m) -> float:
    a = as_matrix(m)
    return float(np.linalg.norm(a - dagger(a)))


def check_hermitian(m, tol: float = 1e-12) -> np.ndarray:
    """Validate that ``m`` is Hermitian within ``tol`` (relative) and symmetrize."""
    a = as_matrix(m)
    scale = max(1.0, float(np.linalg.norm(a)))
    if hermitian_defect(a) > tol * scale:
        raise MatrixDomainError("matrix is not Hermitian within tolerance")
    return hermitize(a)


def herm_eig(h) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns eigenvalues in ascending order and the unitary of eigenvectors,
    so that ``h = u @ diag(w) @ u.conj().T``.
    """
    a = check_hermitian(h)
    w, u = np.linalg.eigh(a)
    return w, u


def _pd_eig(h, floor: float = PD_FLOOR) -> tuple[np.ndarray, np.ndarray]:
    w, u = herm_eig(h)
    if w[0] <= floor * max(w[-1], 0.0) or w[0] <= 0.0:
        raise MatrixDomainError(
            f"matrix is not positive definite (min eigenvalue {w[0]:.3e})"
        )
    return w, u


def is_pd(h, floor: float = PD_FLOOR) -> bool:
    try:
        _pd_eig(h, floor)
    except MatrixDomainError:
        return False
    return True


def _herm_fn(w, u, f) -> np.ndarray:
    return hermitize(u @ np.diag(f(w)) @ dagger(u))


def mat_sqrt(h) -> np.ndarray:
    """Principal square root of a positive definite matrix."""
    w, u = _pd_eig(h)
    return _herm_fn(w, u, np.sqrt)


def mat_inv_sqrt(h) -> np.ndarray:
    w, u = _pd_eig(h)
    return _herm_fn(w, u, lambda x: 1.0 / np.sqrt(x))


def mat_log(h) -> np.ndarray:
    w, u = _pd_eig(h)
    return _herm_fn(w, u, np.log)


def mat_inv(h) -> np.ndarray:
    w, u = _pd_eig(h)
    return _herm_fn(w, u, lambda x: 1.0 / x)


def mat_power(h, t: float) -> np.ndarray:
    """Real power H^t of a positive definite matrix."""
    w, u = _pd_eig(h)
    return _herm_fn(w, u, lambda x: x**t)


def herm_exp(h) -> np.ndarray:
    """Matrix exponential of a Hermitian matrix (always positive definite)."""
    w, u = herm_eig(h)
    return _herm_fn(w, u, np.exp)


def pd_geodesic(a, b, t: float) -> np.ndarray:
    """Point at parameter ``t`` on the PD-cone geodesic from ``a`` to ``b``.

    gamma(t) = a^{1/2} (a^{-1/2} b a^{-1/2})^t a^{1/2}, so gamma(0) = a and
    gamma(1) = b.
    """
    ri = mat_inv_sqrt(a)
    r = mat_sqrt(a)
    mid = mat_power(hermitize(ri @ as_matrix(b) @ ri), t)
    return hermitize(r @ mid @ r)


def geometric_mean(a, b) -> np.ndarray:
    """Geodesic midpoint a # b, the unique PD solution X of X a^{-1} X = b."""
    return pd_geodesic(a, b, 0.5)


def pd_distance(a, b) -> float:
    """Affine-invariant geodesic distance ||log(a^{-1/2} b a^{-1/2})||_F."""
    ri = mat_inv_sqrt(a)
    w, _ = _pd_eig(hermitize(ri @ as_matrix(b) @ ri))
    return float(np.sqrt(np.sum(np.log(w) ** 2)))


def ntrace(m) -> float:
    """Normalized trace (1/n) Tr, real part."""
    a = np.asarray(m)
    return float(np.trace(a).real) / a.shape[0]


def cond_2(m) -> float:
    """Spectral condition number; inf for singular input."""
    s = np.linalg.svd(as_matrix(m), compute_uv=False)
    if s[-1] <= 0.0:
        return float("inf")
    return float(s[0] / s[-1])
