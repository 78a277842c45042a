"""Completely positive maps given by Kraus lists.

A map acts as X -> sum_i K_i X K_i*.  The covariance maps of Hermitian
pencils have Hermitian Kraus operators and are therefore self-adjoint with
respect to the Hilbert-Schmidt inner product; several routines below rely on
that and check it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MatrixDomainError, NotSelfAdjointError
from .matcore import (
    as_matrix,
    check_hermitian,
    cond_2,
    dagger,
    hermitian_defect,
    hermitize,
)

# Kraus operators below this norm are dropped on construction.
ZERO_KRAUS_NORM = 1e-14

HERMITIAN_KRAUS_TOL = 1e-12


@dataclass(frozen=True)
class CpMap:
    """A CP map on n x n matrices, stored as a stack of Kraus operators."""

    kraus: np.ndarray  # shape (r, n, n)
    hermitian_kraus: bool = False

    @property
    def n(self) -> int:
        return self.kraus.shape[1]

    @property
    def r(self) -> int:
        return self.kraus.shape[0]

    def __call__(self, x) -> np.ndarray:
        return apply(self, x)


def make_cp_map(kraus_ops, hermitian: bool | None = None) -> CpMap:
    """Build a CpMap from a list of same-size square matrices.

    Zero operators are dropped; at least one nonzero operator is required.
    With ``hermitian=None`` the flag is detected from the operators.
    """
    ops = [as_matrix(k) for k in kraus_ops]
    if not ops:
        raise MatrixDomainError("empty Kraus list")
    n = ops[0].shape[0]
    if any(k.shape != (n, n) for k in ops):
        raise MatrixDomainError("Kraus operators must share one square shape")
    ops = [k for k in ops if np.linalg.norm(k) >= ZERO_KRAUS_NORM]
    if not ops:
        raise MatrixDomainError("all Kraus operators are zero")
    stack = np.array(ops)
    all_herm = all(
        hermitian_defect(k) <= HERMITIAN_KRAUS_TOL * max(1.0, np.linalg.norm(k))
        for k in ops
    )
    if hermitian is None:
        hermitian = all_herm
    elif hermitian and not all_herm:
        raise MatrixDomainError("hermitian flag set but a Kraus operator is not Hermitian")
    if hermitian:
        stack = np.array([hermitize(k) for k in stack])
    return CpMap(kraus=stack, hermitian_kraus=hermitian)


def identity_channel(n: int) -> CpMap:
    return make_cp_map([np.eye(n)])


def apply(eta: CpMap, x) -> np.ndarray:
    """sum_i K_i X K_i*.  Maps Hermitian to Hermitian and PSD to PSD."""
    a = as_matrix(x)
    if a.shape[0] != eta.n:
        raise MatrixDomainError(f"dimension mismatch: map is {eta.n}, input {a.shape[0]}")
    return np.einsum("rij,jk,rlk->il", eta.kraus, a, eta.kraus.conj())


def adjoint_apply(eta: CpMap, x) -> np.ndarray:
    """sum_i K_i* X K_i, the Hilbert-Schmidt adjoint of ``apply``."""
    a = as_matrix(x)
    if a.shape[0] != eta.n:
        raise MatrixDomainError(f"dimension mismatch: map is {eta.n}, input {a.shape[0]}")
    return np.einsum("rji,jk,rkl->il", eta.kraus.conj(), a, eta.kraus)


def adjoint_map(eta: CpMap) -> CpMap:
    return CpMap(kraus=np.array([dagger(k) for k in eta.kraus]),
                 hermitian_kraus=eta.hermitian_kraus)


def is_self_adjoint(eta: CpMap, tol: float = 1e-10) -> bool:
    """Test eta = eta* on the full matrix-unit basis."""
    n = eta.n
    scale = max(1.0, float(np.linalg.norm(eta.kraus)) ** 2)
    for p in range(n):
        for q in range(n):
            e = np.zeros((n, n), dtype=complex)
            e[p, q] = 1.0
            if np.linalg.norm(apply(eta, e) - adjoint_apply(eta, e)) > tol * scale:
                return False
    return True


def hermitian_kraus(eta: CpMap, tol: float = 1e-10) -> CpMap:
    """Rewrite a self-adjoint CP map with Hermitian Kraus operators.

    Each operator K splits as H + iS with H, S Hermitian; for a self-adjoint
    map the cross terms cancel and {H, S} is an equivalent Kraus list.  Raises
    ``NotSelfAdjointError`` when the self-adjointness test fails.
    """
    if eta.hermitian_kraus:
        return eta
    if not is_self_adjoint(eta, tol):
        raise NotSelfAdjointError("map is not self-adjoint; no Hermitian Kraus form")
    ops = []
    for k in eta.kraus:
        ops.append((k + dagger(k)) / 2)
        ops.append((k - dagger(k)) / 2j)
    ops = [o for o in ops if np.linalg.norm(o) >= ZERO_KRAUS_NORM]
    out = make_cp_map(ops, hermitian=True)
    # The rewrite must reproduce the original action exactly.
    n = eta.n
    for p in range(n):
        for q in range(n):
            e = np.zeros((n, n), dtype=complex)
            e[p, q] = 1.0
            err = np.linalg.norm(apply(out, e) - apply(eta, e))
            if err > tol * max(1.0, float(np.linalg.norm(eta.kraus)) ** 2):
                raise NotSelfAdjointError("Hermitian rewrite failed to reproduce the map")
    return out


def ds_defect(eta: CpMap) -> tuple[np.ndarray, np.ndarray]:
    """(eta(I) - I, eta*(I) - I)."""
    i = np.eye(eta.n)
    return apply(eta, i) - i, adjoint_apply(eta, i) - i


def ds_distance(eta: CpMap) -> float:
    """Squared defect from the doubly stochastic class:
    Tr[(eta(I) - I)^2] + Tr[(eta*(I) - I)^2]."""
    du, dt = ds_defect(eta)
    return float(np.trace(du @ du).real + np.trace(dt @ dt).real)


@dataclass(frozen=True)
class ScaledMap:
    """Lazy two-sided scaling X -> c1 eta(c2* X c2) c1* of a base CP map."""

    base: CpMap
    c1: np.ndarray
    c2: np.ndarray

    @property
    def n(self) -> int:
        return self.base.n

    def __call__(self, x) -> np.ndarray:
        a = as_matrix(x)
        return self.c1 @ apply(self.base, dagger(self.c2) @ a @ self.c2) @ dagger(self.c1)

    def adjoint(self, x) -> np.ndarray:
        a = as_matrix(x)
        return self.c2 @ adjoint_apply(self.base, dagger(self.c1) @ a @ self.c1) @ dagger(self.c2)

    def materialize(self) -> CpMap:
        """Kraus operators of the scaled map: {c1 K_i c2*}."""
        return make_cp_map([self.c1 @ k @ dagger(self.c2) for k in self.base.kraus])


def scale(eta: CpMap, c1, c2, cond_limit: float = 1e12) -> ScaledMap:
    """Two-sided operator scaling by invertible c1, c2."""
    a1, a2 = as_matrix(c1), as_matrix(c2)
    for c in (a1, a2):
        if c.shape[0] != eta.n:
            raise MatrixDomainError("scaling matrix has wrong size")
        if cond_2(c) > cond_limit:
            raise MatrixDomainError("scaling matrix is numerically singular")
    return ScaledMap(base=eta, c1=a1, c2=a2)


def symmetric_scaled_map(eta: CpMap, c_sqrt) -> ScaledMap:
    """The symmetric scaling with c1 = c2 = C^{1/2}."""
    return scale(eta, c_sqrt, c_sqrt)


def hermitian_basis(n: int) -> list[np.ndarray]:
    """Orthonormal basis of n x n Hermitian matrices under <X,Y> = Tr(XY).

    Order: diagonal units, then symmetric pairs (E_pq + E_qp)/sqrt2, then
    imaginary antisymmetric pairs i(E_qp - E_pq)/sqrt2, each row-major p < q.
    """
    basis = []
    for p in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[p, p] = 1.0
        basis.append(e)
    s = 1.0 / np.sqrt(2.0)
    for p in range(n):
        for q in range(p + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[p, q] = s
            e[q, p] = s
            basis.append(e)
    for p in range(n):
        for q in range(p + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[p, q] = -1j * s
            e[q, p] = 1j * s
            basis.append(e)
    return basis


def superoperator_matrix(phi) -> np.ndarray:
    """Real n^2 x n^2 matrix of a Hermiticity-preserving map on the Hermitian basis.

    Entry (a, b) is Tr(E_a phi(E_b)).  The matrix is symmetric exactly when
    the map is self-adjoint.
    """
    n = phi.n
    basis = hermitian_basis(n)
    m = np.empty((n * n, n * n))
    for b, eb in enumerate(basis):
        out = phi(eb)
        defect = hermitian_defect(out)
        if defect > 1e-10 * max(1.0, float(np.linalg.norm(out))):
            raise MatrixDomainError("map does not preserve Hermiticity")
        out = hermitize(out)
        for a, ea in enumerate(basis):
            m[a, b] = np.trace(ea @ out).real
    return m


@dataclass(frozen=True)
class KernelBasis:
    """Orthonormal Hermitian basis of the (-1)-eigenspace of a DS map.

    ``spectral_gap`` is the distance from -1 to the nearest rejected
    eigenvalue, so callers can detect marginal acceptance windows.
    """

    base_point: np.ndarray
    dim: int
    basis: list = field(default_factory=list)
    eig_tolerance: float = 1e-8
    spectral_gap: float = float("inf")


def neg_unit_eigenspace(phi, c, tol: float = 1e-8) -> KernelBasis:
    """Extract the Hermitian eigenspace of eigenvalue -1 of a DS map.

    ``phi`` must be doubly stochastic within sqrt(tol) (measured by the
    squared DS defect of the materialized map).  Eigenvalues are accepted
    iff ``|lambda + 1| < tol``; the basis is orthonormal under Tr(XY) and
    automatically traceless.
    """
    mat = phi.materialize() if isinstance(phi, ScaledMap) else phi
    defect = ds_distance(mat)
    if defect > np.sqrt(tol):
        raise MatrixDomainError(
            f"map is not doubly stochastic enough for kernel extraction "
            f"(DS defect {defect:.3e})"
        )
    m = superoperator_matrix(mat)
    asym = np.linalg.norm(m - m.T)
    if asym > 1e-8 * max(1.0, np.linalg.norm(m)):
        raise MatrixDomainError("superoperator is not symmetric; map not self-adjoint")
    w, v = np.linalg.eigh((m + m.T) / 2)
    accepted = np.abs(w + 1.0) < tol
    rejected = np.abs(w[~accepted] + 1.0)
    gap = float(rejected.min()) if rejected.size else float("inf")
    basis_mats = hermitian_basis(mat.n)
    ys = []
    for col in np.nonzero(accepted)[0]:
        y = sum(v[a, col] * basis_mats[a] for a in range(len(basis_mats)))
        ys.append(hermitize(y))
    return KernelBasis(
        base_point=as_matrix(c),
        dim=len(ys),
        basis=ys,
        eig_tolerance=tol,
        spectral_gap=gap,
    )
