"""Operator Sinkhorn scaling, capacity, and symmetric DS-scaling.

The central objects are the solution set {W > 0 : eta(W) W = I} of a
self-adjoint CP map, its trace minimizer, and the bifurcation Jacobian that
certifies the minimizer.  Scaling matrices are accumulated explicitly so a
converged run yields the 2-cycle (D, E) = (c2* c2, c1* c1) of X -> eta(X)^{-1},
whose geodesic midpoint solves eta(C) = C^{-1}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cpmap import (
    CpMap,
    KernelBasis,
    ScaledMap,
    adjoint_apply,
    apply,
    ds_distance,
    hermitian_kraus,
    make_cp_map,
    neg_unit_eigenspace,
    scale,
)
from .errors import MatrixDomainError, NotScalableError
from .matcore import (
    as_matrix,
    cond_2,
    dagger,
    geometric_mean,
    herm_exp,
    hermitize,
    mat_inv,
    mat_inv_sqrt,
    mat_sqrt,
    ntrace,
    pd_geodesic,
)

SINKHORN_TOL = 1e-10
SINKHORN_MAX_ITER = 100_000
SINKHORN_COND_LIMIT = 1e8
PLATEAU_WINDOW = 100
PLATEAU_REL_DECREASE = 1e-3

RESIDUAL_TARGET = 1e-9
FOC_TARGET = 1e-7
KERNEL_EIG_TOL = 1e-8

STATUS_CONVERGED = "converged"
STATUS_DIVERGED = "diverged"
STATUS_BUDGET = "budget"


@dataclass
class SinkhornResult:
    c1: np.ndarray
    c2: np.ndarray
    ds_history: list
    iterations: int
    status: str
    divergence_reason: str | None = None

    @property
    def final_ds(self) -> float:
        return self.ds_history[-1] if self.ds_history else float("nan")


def sinkhorn(eta: CpMap, tol: float = SINKHORN_TOL,
             max_iter: int = SINKHORN_MAX_ITER,
             cond_limit: float = SINKHORN_COND_LIMIT) -> SinkhornResult:
    """Alternate row/column normalizations driving a CP map toward DS.

    Accumulates the scaling pair (c1, c2) so that X -> c1 eta(c2* X c2) c1*
    is the current iterate.  Stops when the squared DS defect falls below
    ``tol``.  Divergence is declared (not raised) when the accumulated
    scalings pass ``cond_limit`` in condition number, or when the defect
    plateaus (relative decrease below 1e-3 over 100 iterations); exceeding
    the iteration budget without either verdict returns status "budget".
    """
    n = eta.n
    c1 = np.eye(n, dtype=complex)
    c2 = np.eye(n, dtype=complex)
    kraus = eta.kraus.copy()

    def current_ds(k):
        s = np.einsum("rij,rkj->ik", k, k.conj())  # sum K K*
        t = np.einsum("rji,rjk->ik", k.conj(), k)  # sum K* K
        i = np.eye(n)
        return (
            float(np.trace((s - i) @ (s - i)).real + np.trace((t - i) @ (t - i)).real),
            s,
            t,
        )

    history = []
    ds, s, t = current_ds(kraus)
    history.append(ds)
    if ds <= tol:
        return SinkhornResult(c1, c2, history, 0, STATUS_CONVERGED)

    for it in range(1, max_iter + 1):
        g = mat_inv_sqrt(hermitize(s))
        kraus = np.einsum("ij,rjk->rik", g, kraus)
        c1 = g @ c1
        _, _, t = current_ds(kraus)
        h = mat_inv_sqrt(hermitize(t))
        kraus = np.einsum("rij,jk->rik", kraus, h)
        c2 = h @ c2
        ds, s, t = current_ds(kraus)
        history.append(ds)

        if ds <= tol:
            return SinkhornResult(c1, c2, history, it, STATUS_CONVERGED)
        if max(cond_2(c1), cond_2(c2)) > cond_limit:
            return SinkhornResult(c1, c2, history, it, STATUS_DIVERGED,
                                  divergence_reason="condition_number")
        if it >= PLATEAU_WINDOW:
            prev = history[it - PLATEAU_WINDOW]
            if prev > 0 and (prev - ds) / prev < PLATEAU_REL_DECREASE:
                return SinkhornResult(c1, c2, history, it, STATUS_DIVERGED,
                                      divergence_reason="plateau")
    return SinkhornResult(c1, c2, history, max_iter, STATUS_BUDGET)


# ---------------------------------------------------------------------------
# Capacity


@dataclass
class CapacityResult:
    value: float
    minimizer: np.ndarray | None
    method: str
    residual: float
    solver_agreement: float | None = None


METHOD_FIXED_POINT = "fixed_point"
METHOD_GRADIENT = "gradient_descent"
METHOD_NOT_ATTAINED = "not_attained"


def _det1(c: np.ndarray) -> np.ndarray:
    d = np.linalg.det(c).real
    return c / d ** (1.0 / c.shape[0])


def capacity_foc_residual(eta: CpMap, c: np.ndarray) -> float:
    """||eta*(eta(C)^{-1}) - C^{-1}||_F, the first-order condition defect."""
    lhs = adjoint_apply(eta, mat_inv(hermitize(apply(eta, c))))
    return float(np.linalg.norm(lhs - mat_inv(c)))


def _capacity_fixed_point(eta: CpMap, tol: float, max_iter: int,
                          cond_limit: float) -> CapacityResult:
    """Self-adjoint capacity iteration C <- det-normalized eta(eta(C)^{-1})^{-1}."""
    n = eta.n
    c = np.eye(n, dtype=complex)
    for _ in range(max_iter):
        nxt = _det1(mat_inv(hermitize(apply(eta, mat_inv(hermitize(apply(eta, c)))))))
        step = float(np.linalg.norm(nxt - c))
        c = nxt
        if cond_2(c) > cond_limit:
            value = float(np.linalg.det(hermitize(apply(eta, c))).real)
            return CapacityResult(value, None, METHOD_NOT_ATTAINED,
                                  capacity_foc_residual(eta, c))
        if step <= tol:
            break
    res = capacity_foc_residual(eta, c)
    value = float(np.linalg.det(hermitize(apply(eta, c))).real)
    if res > 1e-6:
        return CapacityResult(value, None, METHOD_NOT_ATTAINED, res)
    return CapacityResult(value, c, METHOD_FIXED_POINT, res)


def _capacity_gradient(eta: CpMap, tol: float, max_iter: int,
                       cond_limit: float) -> CapacityResult:
    """Geodesic projected gradient descent of log det eta(X) on {det X = 1}.

    The Euclidean gradient is eta*(eta(X)^{-1}); steps move along PD-cone
    geodesics in the det-1 slice with Armijo backtracking.  log det eta is
    geodesically convex, so descent converges to the global infimum whenever
    it is attained; condition-number blowup of the iterate signals a
    non-attained infimum.
    """
    n = eta.n
    x = np.eye(n, dtype=complex)

    def f(c):
        return float(np.log(np.linalg.det(hermitize(apply(eta, c))).real))

    fx = f(x)
    alpha = 1.0
    for _ in range(max_iter):
        grad = adjoint_apply(eta, mat_inv(hermitize(apply(eta, x))))
        # Riemannian gradient in the exp chart at x, projected to traceless.
        rs = mat_sqrt(x)
        g_chart = hermitize(rs @ grad @ rs)
        g_chart -= np.trace(g_chart).real / n * np.eye(n)
        gnorm = float(np.linalg.norm(g_chart))
        res = capacity_foc_residual(eta, x)
        if res <= tol:
            break
        accepted = False
        while alpha > 1e-16:
            cand = _det1(hermitize(rs @ herm_exp(-alpha * g_chart) @ rs))
            fc = f(cand)
            if fc <= fx - 0.25 * alpha * gnorm**2:
                x, fx = cand, fc
                alpha = min(alpha * 1.5, 4.0)
                accepted = True
                break
            alpha /= 2
        if not accepted:
            break
        if cond_2(x) > cond_limit:
            value = float(np.linalg.det(hermitize(apply(eta, x))).real)
            return CapacityResult(value, None, METHOD_NOT_ATTAINED,
                                  capacity_foc_residual(eta, x))
    res = capacity_foc_residual(eta, x)
    value = float(np.linalg.det(hermitize(apply(eta, x))).real)
    if res > 1e-6:
        return CapacityResult(value, None, METHOD_NOT_ATTAINED, res)
    return CapacityResult(value, x, METHOD_GRADIENT, res)


def capacity(eta: CpMap, tol: float = 1e-10, max_iter: int = 10_000,
             cond_limit: float = SINKHORN_COND_LIMIT,
             method: str = "auto") -> CapacityResult:
    """Capacity inf{det eta(B) : B > 0, det B = 1} with cross-checked solvers.

    ``method`` selects "fixed_point" (self-adjoint maps only),
    "gradient_descent", or "auto", which runs both when the map is
    self-adjoint and records their relative disagreement.
    """
    if method == METHOD_FIXED_POINT:
        return _capacity_fixed_point(eta, tol, max_iter, cond_limit)
    if method == METHOD_GRADIENT:
        return _capacity_gradient(eta, tol, max_iter, cond_limit)
    if method != "auto":
        raise ValueError(f"unknown capacity method {method!r}")
    grad = _capacity_gradient(eta, tol, max_iter, cond_limit)
    if not eta.hermitian_kraus:
        return grad
    fp = _capacity_fixed_point(eta, tol, max_iter, cond_limit)
    ref = max(abs(fp.value), abs(grad.value), 1e-30)
    agreement = abs(fp.value - grad.value) / ref
    primary = fp if fp.method != METHOD_NOT_ATTAINED else grad
    primary.solver_agreement = agreement
    return primary


# ---------------------------------------------------------------------------
# Symmetric scaling and the solution manifold


@dataclass
class ScalingCertificate:
    """A certified point C of the solution set, with its kernel data.

    ``residual`` is ||eta(C) C - I||_F.  ``kernel`` is the orthonormal
    (-1)-eigenspace basis {Y_j} of the symmetrically scaled map at C,
    ``foc_residual`` is max_j |Tr(Y_j C)| and ``jacobian`` the symmetric
    d x d matrix with entries (Tr(Y_j C Y_k) + Tr(Y_k C Y_j)) / 2.
    """

    c: np.ndarray
    residual: float
    kernel: KernelBasis
    trace_minimal: bool
    foc_residual: float
    jacobian: np.ndarray
    status: str = "ok"

    @property
    def dim(self) -> int:
        return self.kernel.dim


def scaling_residual(eta: CpMap, c) -> float:
    a = as_matrix(c)
    return float(np.linalg.norm(apply(eta, a) @ a - np.eye(eta.n)))


def _jacobian_matrix(c: np.ndarray, ys: list) -> np.ndarray:
    d = len(ys)
    m = np.empty((d, d))
    for j in range(d):
        for k in range(d):
            m[j, k] = 0.5 * (np.trace(ys[j] @ c @ ys[k]).real
                             + np.trace(ys[k] @ c @ ys[j]).real)
    return (m + m.T) / 2


def certificate_at(eta: CpMap, c, kernel_tol: float = KERNEL_EIG_TOL,
                   status: str = "ok") -> ScalingCertificate:
    """Assemble the certificate (kernel, FOC defect, Jacobian) at a point C."""
    cm = hermitize(c)
    res = scaling_residual(eta, cm)
    phi = scale(eta, mat_sqrt(cm), mat_sqrt(cm))
    kernel = neg_unit_eigenspace(phi, cm, tol=kernel_tol)
    foc = max((abs(np.trace(y @ cm).real) for y in kernel.basis), default=0.0)
    jac = _jacobian_matrix(cm, kernel.basis)
    minimal = foc <= FOC_TARGET and (kernel.dim == 0
                                     or np.linalg.eigvalsh(jac)[0] > 0.0)
    return ScalingCertificate(c=cm, residual=res, kernel=kernel,
                              trace_minimal=minimal, foc_residual=foc,
                              jacobian=jac, status=status)


def _polish_fixed_point(eta: CpMap, c0: np.ndarray, target: float,
                        max_iter: int = 2000) -> np.ndarray:
    """Damped geodesic iteration C <- gamma_{C -> eta(C)^{-1}}(t).

    The undamped map reflects geodesics, so plain iteration oscillates on
    2-cycles; stepping to the geodesic midpoint is the natural damping.
    A step is accepted only if the residual decreases, otherwise the
    geodesic parameter is halved.
    """
    c = hermitize(c0)
    res = scaling_residual(eta, c)
    t = 0.5
    for _ in range(max_iter):
        if res <= target:
            break
        target_pt = mat_inv(hermitize(apply(eta, c)))
        stepped = False
        ts = t
        while ts > 1e-12:
            cand = hermitize(pd_geodesic(c, target_pt, ts))
            cres = scaling_residual(eta, cand)
            if cres < res:
                c, res = cand, cres
                t = min(0.5, ts * 2)
                stepped = True
                break
            ts /= 2
        if not stepped:
            break
    return c


def symmetric_scale(eta: CpMap, tol: float = SINKHORN_TOL,
                    max_iter: int = SINKHORN_MAX_ITER,
                    residual_target: float = RESIDUAL_TARGET,
                    kernel_tol: float = KERNEL_EIG_TOL) -> ScalingCertificate:
    """Find C > 0 with eta(C) = C^{-1} for a self-adjoint CP map.

    Runs the Sinkhorn iteration; on convergence the accumulated scalings give
    the 2-cycle pair (D, E) = (c2* c2, c1* c1) of X -> eta(X)^{-1}.  Both
    cycle identities are verified before use, and the geodesic midpoint
    D # E is returned after a residual polish.  Raises ``NotScalableError``
    when Sinkhorn diverges or exhausts its budget.
    """
    eta = hermitian_kraus(eta)
    sk = sinkhorn(eta, tol=tol, max_iter=max_iter)
    if sk.status != STATUS_CONVERGED:
        raise NotScalableError(
            f"Sinkhorn did not converge (status {sk.status}"
            + (f", {sk.divergence_reason}" if sk.divergence_reason else "")
            + ")",
            sinkhorn_result=sk,
        )
    d = hermitize(dagger(sk.c2) @ sk.c2)
    e = hermitize(dagger(sk.c1) @ sk.c1)
    n = eta.n
    scale_norm = max(1.0, float(np.linalg.norm(d)), float(np.linalg.norm(e)))
    cycle_tol = 10.0 * max(np.sqrt(tol), 1e-12) * scale_norm
    err1 = np.linalg.norm(apply(eta, d) @ e - np.eye(n))
    err2 = np.linalg.norm(apply(eta, e) @ d - np.eye(n))
    if max(err1, err2) > cycle_tol:
        raise NotScalableError(
            f"scaling cycle identities failed verification "
            f"({err1:.3e}, {err2:.3e} > {cycle_tol:.3e})",
            sinkhorn_result=sk,
        )
    c = geometric_mean(d, e)
    c = _polish_fixed_point(eta, c, residual_target)
    res = scaling_residual(eta, c)
    if res > residual_target:
        raise NotScalableError(
            f"residual {res:.3e} above target after polish", sinkhorn_result=sk
        )
    return certificate_at(eta, c, kernel_tol=kernel_tol)


def symmetric_scale_fixed_point(eta: CpMap, c0=None,
                                residual_target: float = RESIDUAL_TARGET,
                                max_iter: int = 20_000,
                                kernel_tol: float = KERNEL_EIG_TOL) -> ScalingCertificate:
    """Damped geodesic fixed-point route to eta(C) = C^{-1} (cross-check)."""
    eta = hermitian_kraus(eta)
    c = np.eye(eta.n, dtype=complex) if c0 is None else hermitize(c0)
    c = _polish_fixed_point(eta, c, residual_target, max_iter=max_iter)
    res = scaling_residual(eta, c)
    if res > residual_target:
        raise NotScalableError(f"fixed-point iteration stalled at residual {res:.3e}")
    return certificate_at(eta, c, kernel_tol=kernel_tol)


def solution_family(cert: ScalingCertificate, s) -> np.ndarray:
    """Point C^{1/2} exp(sum_j s_j Y_j) C^{1/2} of the solution manifold."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if s.shape != (cert.kernel.dim,):
        raise MatrixDomainError(
            f"parameter vector has length {s.shape}, kernel dimension is {cert.kernel.dim}"
        )
    y = sum((sj * yj for sj, yj in zip(s, cert.kernel.basis)),
            np.zeros((cert.c.shape[0], cert.c.shape[0]), dtype=complex))
    r = mat_sqrt(cert.c)
    return hermitize(r @ herm_exp(y) @ r)


def trace_minimizer(eta: CpMap, start: ScalingCertificate,
                    foc_target: float = FOC_TARGET,
                    residual_target: float = RESIDUAL_TARGET,
                    max_iter: int = 500,
                    kernel_tol: float = KERNEL_EIG_TOL) -> ScalingCertificate:
    """Descend the trace over the solution manifold to its unique minimizer.

    Re-centered descent: at the current point V the kernel basis {Y_j} of the
    scaled map at V is recomputed, the gradient components are
    g_j = Tr(Y_j V), and the step moves along the exact solution family
    V <- V^{1/2} exp(-alpha sum g_j Y_j) V^{1/2} with backtracking on the
    trace.  Stops when max_j |g_j| <= ``foc_target``.  A stall (step below
    1e-14 with the first-order conditions unmet) is reported in ``status``.
    """
    if start.residual > residual_target:
        raise MatrixDomainError(
            f"starting certificate residual {start.residual:.3e} above target"
        )
    eta = hermitian_kraus(eta)
    v = hermitize(start.c)
    n = eta.n
    alpha = 1.0
    status = "ok"
    for _ in range(max_iter):
        cert = certificate_at(eta, v, kernel_tol=kernel_tol)
        ys = cert.kernel.basis
        if not ys:
            break
        g = np.array([np.trace(y @ v).real for y in ys])
        if np.max(np.abs(g)) <= foc_target:
            break
        direction = sum((gj * yj for gj, yj in zip(g, ys)),
                        np.zeros((n, n), dtype=complex))
        r = mat_sqrt(v)
        tr_v = np.trace(v).real
        stepped = False
        a = alpha
        while a > 1e-14:
            cand = hermitize(r @ herm_exp(-a * direction) @ r)
            if np.trace(cand).real < tr_v:
                v = cand
                alpha = min(a * 1.5, 4.0)
                stepped = True
                break
            a /= 2
        if not stepped:
            status = "stalled"
            break
        if scaling_residual(eta, v) > residual_target:
            v = _polish_fixed_point(eta, v, residual_target / 2)
    out = certificate_at(eta, v, kernel_tol=kernel_tol, status=status)
    if status == "stalled":
        out.trace_minimal = False
    return out


def bifurcation_jacobian(cert: ScalingCertificate) -> np.ndarray:
    """Jacobian of the reduced bifurcation equations at a trace minimizer.

    The d x d symmetric matrix M_jk = (Tr(Y_j C Y_k) + Tr(Y_k C Y_j)) / 2;
    positive definiteness is asserted, since it is what powers the
    implicit-function extension of the solution through the axis.
    """
    if not cert.trace_minimal:
        raise MatrixDomainError("bifurcation Jacobian requires a trace-minimal certificate")
    m = _jacobian_matrix(cert.c, cert.kernel.basis)
    if m.size and np.linalg.eigvalsh(m)[0] <= 0.0:
        raise MatrixDomainError("bifurcation Jacobian is not positive definite")
    return m


def linearization_apply(eta: CpMap, c, k) -> np.ndarray:
    """Linearization K -> K + C eta(K) C of the solution equation at C."""
    cm, km = as_matrix(c), as_matrix(k)
    return km + cm @ apply(eta, km) @ cm


def linearization_adjoint_apply(eta: CpMap, c, ell) -> np.ndarray:
    """Adjoint L -> L + eta(C L C) of the linearization under Tr(XY)."""
    cm, lm = as_matrix(c), as_matrix(ell)
    return lm + apply(eta, cm @ lm @ cm)


def capacity_lower_bound_trace(cert: ScalingCertificate) -> float:
    """det(C)^{1/n}, the AM-GM lower bound on the normalized trace of C."""
    n = cert.c.shape[0]
    return float(np.linalg.det(cert.c).real ** (1.0 / n))


def normalized_trace(cert: ScalingCertificate) -> float:
    return ntrace(cert.c)
