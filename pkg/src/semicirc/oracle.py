"""Closed-form reference solutions used to certify the main solvers.

Everything here is independent of the fixed-point and descent machinery in
``scaling`` and ``spectra``: densities come from explicit formulas or a
companion-matrix root solve, and the brute-force capacity is a direct
multi-start simplex minimization over an explicit chart of the det-1 cone.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

from .cpmap import CpMap, apply
from .errors import MatrixDomainError

CUBIC_EDGE = 1.5 * np.sqrt(3.0)  # support edge of the cusp density


def wigner_density(x: float) -> float:
    """Semicircle density sqrt(4 - x^2) / (2 pi) on [-2, 2], zero outside."""
    if abs(x) >= 2.0:
        return 0.0
    return float(np.sqrt(4.0 - x * x) / (2.0 * np.pi))


def scaled_semicircle_density(x: float, sigma: float) -> float:
    """Semicircle with variance sigma^2, supported on [-2 sigma, 2 sigma]."""
    return wigner_density(x / sigma) / sigma


def cubic_boundary_root(x: float) -> complex:
    """Upper-half-plane root of v^3 - x v^2 + x = 0 for x inside the support.

    The discriminant x^2 (4 x^2 - 27) is negative exactly on the open support,
    where the cubic has one real root and a complex pair; the boundary values
    of the Herglotz solution select the root with positive imaginary part.
    """
    if x == 0.0:
        raise MatrixDomainError("x = 0 is the singular point of the cusp density")
    if 4.0 * x * x - 27.0 >= 0.0:
        raise MatrixDomainError(f"|x| = {abs(x)} is outside the support")
    roots = np.roots([1.0, -x, 0.0, x])
    upper = [v for v in roots if v.imag > 0]
    if len(upper) != 1:
        raise MatrixDomainError("root selection failed inside the support")
    return complex(upper[0])


def cubic_density(x: float) -> float:
    """Density with an |x|^{-1/3} cusp at 0, supported on [-3 sqrt3/2, 3 sqrt3/2].

    f(x) = (beta / 2 pi) (1 + 1/|v|^2) where v = alpha + i beta is the
    upper-half-plane root of v^3 - x v^2 + x = 0.  Returns 0 outside the
    support; refuses x = 0, which is the singular point.
    """
    if x == 0.0:
        raise MatrixDomainError("x = 0 is the singular point of the cusp density")
    if 4.0 * x * x - 27.0 >= 0.0:
        return 0.0
    v = cubic_boundary_root(x)
    return float(v.imag / (2.0 * np.pi) * (1.0 + 1.0 / abs(v) ** 2))


def diag_family_solution(t: float) -> tuple[np.ndarray, bool]:
    """Member diag(t, 1/(3t)) of the diagonal solution family of the map with
    eta(diag(a, d)) = diag(3d, 3a).

    Every member satisfies eta(C) C = I; the trace-minimal member sits at
    t = 1/sqrt(3).  Returns (C, True).
    """
    if t <= 0.0:
        raise MatrixDomainError("family parameter must be positive")
    return np.diag([t, 1.0 / (3.0 * t)]).astype(complex), True


def _det1_chart(xi: np.ndarray) -> np.ndarray:
    """Exponential chart exp(H(xi)) over traceless Hermitian 2x2 matrices."""
    h = np.array(
        [[xi[0], xi[1] + 1j * xi[2]], [xi[1] - 1j * xi[2], -xi[0]]], dtype=complex
    )
    w, u = np.linalg.eigh(h)
    return u @ np.diag(np.exp(w)) @ u.conj().T


def brute_capacity(eta: CpMap, samples: int = 24, seed: int = 0) -> float:
    """Direct minimization of det eta(B) over det-1 positive definite B, n = 2.

    Multi-start Nelder-Mead over the 3-parameter traceless exponential chart.
    The result is an upper bound on the capacity up to sampling error.
    """
    if eta.n != 2:
        raise MatrixDomainError("brute-force capacity is implemented for n = 2 only")

    def objective(xi):
        b = _det1_chart(np.asarray(xi))
        return float(np.linalg.det(apply(eta, b)).real)

    rng = np.random.default_rng(seed)
    best = objective(np.zeros(3))
    starts = [np.zeros(3)] + [rng.normal(scale=1.5, size=3) for _ in range(samples - 1)]
    for x0 in starts:
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 2000})
        best = min(best, float(res.fun))
    return best
