"""Spectral densities of matrix semicircles via the half-plane fixed point.

The matrix-valued Cauchy transform G of the semicircle attached to a CP map
eta satisfies the self-consistent quadratic equation; in the right-half-plane
variables W(u) = i G(iu) it reads eta(W) W + u W = I with W strictly
accretive for Re u > 0.  The density at a spectral point x is recovered by
running u = eps - i x down a vertical segment (inside every non-tangential
approach cone) and extrapolating Re tr W to eps = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cpmap import CpMap, apply
from .errors import HfsConvergenceError, MatrixDomainError
from .matcore import ntrace
from .scaling import ScalingCertificate

HFS_TOL = 1e-12
HFS_MAX_ITER = 200_000

DEFAULT_EPS_PATH = (1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 3e-6, 1e-6)
DEFAULT_EXTRAPOLATION_ORDER = 2

STATUS_OK = "ok"
STATUS_CLAMPED = "clamped"
STATUS_SINGULAR = "singular"
STATUS_FAILED = "failed"


@dataclass
class BoundaryLimitConfig:
    """Approach-to-the-axis policy for Stieltjes inversion.

    ``eps_path`` must decrease strictly; the vertical segment u = eps - i x
    sits inside the cone of any aperture, so ``aperture`` and ``radius`` are
    recorded for reporting only.
    """

    aperture: float = 1.0
    radius: float = 1e-2
    eps_path: tuple = DEFAULT_EPS_PATH
    extrapolation_order: int = DEFAULT_EXTRAPOLATION_ORDER
    hfs_tol: float = HFS_TOL
    max_iter: int = HFS_MAX_ITER

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_path)
        if len(eps) < self.extrapolation_order + 1:
            raise MatrixDomainError("eps path shorter than extrapolation stencil")
        if any(e <= 0 for e in eps) or any(b <= a for a, b in zip(eps, eps[1:])):
            raise MatrixDomainError("eps path must decrease strictly to a positive floor")
        if eps[-1] < 1e-8:
            raise MatrixDomainError("eps floor below 1e-8 is not resolvable")
        if self.aperture <= 0 or self.radius <= 0:
            raise MatrixDomainError("aperture and radius must be positive")
        self.eps_path = eps


@dataclass
class HfsState:
    """Solution of eta(W) W + u W = I at one point of the right half-plane."""

    u: complex
    w: np.ndarray
    residual: float
    accretivity_margin: float
    iterations: int


def _hfs_residual(eta: CpMap, w: np.ndarray, u: complex) -> float:
    n = eta.n
    return float(np.linalg.norm(apply(eta, w) @ w + u * w - np.eye(n)))


def hfs_solve(eta: CpMap, u: complex, w_init: np.ndarray | None = None,
              tol: float = HFS_TOL, max_iter: int = HFS_MAX_ITER) -> HfsState:
    """Damped fixed-point solve of the half-plane equation at one point.

    Iterates W <- (1 - theta) W + theta (eta(W) + u I)^{-1} with theta
    adapted: start at 1, halve on residual increase, grow gently on success.
    The map is a contraction for large Re u; close to the axis the damping
    and warm starts from ``hfs_continuation`` keep it convergent.  Raises
    ``HfsConvergenceError`` with the last residual when the budget runs out.
    """
    u = complex(u)
    if u.real <= 0.0:
        raise MatrixDomainError(f"Re u = {u.real} must be positive")
    n = eta.n
    w = np.eye(n, dtype=complex) / (1.0 + abs(u)) if w_init is None else np.array(w_init, dtype=complex)
    res = _hfs_residual(eta, w, u)
    theta = 1.0
    it = 0
    while res > tol:
        if it >= max_iter:
            raise HfsConvergenceError(
                f"no convergence at u = {u} after {max_iter} iterations",
                last_residual=res, u=u,
            )
        target = np.linalg.inv(apply(eta, w) + u * np.eye(n))
        accepted = False
        th = theta
        while th >= 1e-8:
            cand = (1.0 - th) * w + th * target
            cres = _hfs_residual(eta, cand, u)
            if cres < res:
                w, res = cand, cres
                theta = min(1.0, th * 1.3)
                accepted = True
                break
            th /= 2
        if not accepted:
            raise HfsConvergenceError(
                f"damping exhausted at u = {u} (residual {res:.3e})",
                last_residual=res, u=u,
            )
        it += 1
    margin = float(np.linalg.eigvalsh((w + w.conj().T) / 2)[0])
    if margin <= 0.0:
        raise HfsConvergenceError(
            f"solution at u = {u} lost strict accretivity (margin {margin:.3e})",
            last_residual=res, u=u,
        )
    return HfsState(u=u, w=w, residual=res, accretivity_margin=margin, iterations=it)


def hfs_continuation(eta: CpMap, u_path, tol: float = HFS_TOL,
                     max_iter: int = HFS_MAX_ITER) -> list:
    """Warm-started solves along a path ordered by decreasing Re u."""
    us = [complex(u) for u in u_path]
    if any(u.real <= 0 for u in us):
        raise MatrixDomainError("continuation path must stay in the right half-plane")
    if any(b.real > a.real for a, b in zip(us, us[1:])):
        raise MatrixDomainError("continuation path must be ordered by decreasing Re u")
    states = []
    w = None
    for idx, u in enumerate(us):
        try:
            state = hfs_solve(eta, u, w_init=w, tol=tol, max_iter=max_iter)
        except HfsConvergenceError as exc:
            raise HfsConvergenceError(
                f"continuation failed at path index {idx} (u = {u}): {exc}",
                last_residual=exc.last_residual, u=u,
            ) from exc
        states.append(state)
        w = state.w
    return states


def cauchy_transform(eta: CpMap, z: complex, tol: float = HFS_TOL,
                     max_iter: int = HFS_MAX_ITER) -> np.ndarray:
    """Matrix Cauchy transform G(z) = -i W(-i z) for Im z > 0."""
    z = complex(z)
    if z.imag <= 0:
        raise MatrixDomainError("Cauchy transform is evaluated in the upper half-plane")
    state = hfs_solve(eta, -1j * z, tol=tol, max_iter=max_iter)
    return -1j * state.w


def _extrapolate_to_zero(eps: np.ndarray, vals: np.ndarray, order: int) -> float:
    """Polynomial extrapolation to eps = 0 from the smallest `order`+1 nodes."""
    k = order + 1
    x = eps[-k:]
    y = vals[-k:]
    # Lagrange evaluation at 0; nodes are distinct by construction.
    total = 0.0
    for i in range(k):
        li = 1.0
        for j in range(k):
            if j != i:
                li *= x[j] / (x[j] - x[i])
        total += li * y[i]
    return float(total)


def density_at(eta: CpMap, x: float, cfg: BoundaryLimitConfig | None = None) -> tuple[float, str]:
    """Spectral density at x by Stieltjes inversion along u = eps - i x.

    Returns (value, status).  The trace of W is tracked along the descending
    eps path; a tail whose increments stop shrinking signals a boundary
    singularity and is flagged instead of trusted, with the last (not the
    extrapolated) value reported.  Negative round-off values are clamped to
    zero with a "clamped" status.
    """
    cfg = cfg or BoundaryLimitConfig()
    eps = np.asarray(cfg.eps_path)
    path = [e - 1j * x for e in eps]
    states = hfs_continuation(eta, path, tol=cfg.hfs_tol, max_iter=cfg.max_iter)
    vals = np.array([ntrace(s.w.real) for s in states]) / np.pi

    diffs = np.abs(np.diff(vals))
    singular = False
    if len(diffs) >= 2 and diffs[-1] > 0:
        # Increments of an analytic boundary limit shrink with eps; a growing
        # tail (relative to value scale) marks a suspected singularity.
        if diffs[-1] >= diffs[-2] and diffs[-1] > 1e-7 * max(1.0, abs(vals[-1])):
            singular = True
    if singular:
        return float(vals[-1]), STATUS_SINGULAR
    f = _extrapolate_to_zero(eps, vals, cfg.extrapolation_order)
    if f < 0.0:
        if f < -1e-8:
            return float(vals[-1]), STATUS_SINGULAR
        return 0.0, STATUS_CLAMPED
    return f, STATUS_OK


@dataclass
class DensityTable:
    """Grid samples of the spectral density with per-point diagnostics."""

    xs: np.ndarray
    fs: np.ndarray
    statuses: list
    eps_path: tuple = DEFAULT_EPS_PATH
    extrapolation_order: int = DEFAULT_EXTRAPOLATION_ORDER

    def __len__(self) -> int:
        return len(self.xs)

    def mass(self) -> float:
        """Trapezoid mass of the table."""
        if len(self.xs) < 2:
            return 0.0
        return float(np.trapezoid(self.fs, self.xs))


def density_grid(eta: CpMap, xs, cfg: BoundaryLimitConfig | None = None) -> DensityTable:
    """Independent per-point density evaluation; failures become statuses.

    Points share nothing but the immutable map and config, so any parallel
    schedule would produce the same table; evaluation here is sequential.
    """
    cfg = cfg or BoundaryLimitConfig()
    xs = np.asarray(xs, dtype=float)
    fs = np.zeros(len(xs))
    statuses = []
    for i, x in enumerate(xs):
        try:
            f, status = density_at(eta, float(x), cfg)
        except HfsConvergenceError:
            f, status = 0.0, STATUS_FAILED
        fs[i] = f
        statuses.append(status)
    return DensityTable(xs=xs, fs=fs, statuses=statuses,
                        eps_path=cfg.eps_path,
                        extrapolation_order=cfg.extrapolation_order)


def f0_from_certificate(cert: ScalingCertificate) -> float:
    """Density at 0 from the trace minimizer: (1/pi) (1/n) Tr C."""
    if not cert.trace_minimal:
        raise MatrixDomainError("density formula requires the trace-minimal certificate")
    return ntrace(cert.c) / np.pi


def support_edges(eta: CpMap, table: DensityTable,
                  cfg: BoundaryLimitConfig | None = None,
                  threshold: float = 1e-6, xtol: float = 1e-4) -> tuple[float, float] | None:
    """Locate the outermost support edges by bisection on f > threshold.

    Brackets come from the outermost table point above the threshold and its
    outward neighbor; each probe is a fresh density evaluation.
    """
    cfg = cfg or BoundaryLimitConfig()
    above = np.nonzero(table.fs > threshold)[0]
    if above.size == 0:
        return None

    def bisect(inner: float, outer: float) -> float:
        lo, hi = inner, outer
        while abs(hi - lo) > xtol:
            mid = 0.5 * (lo + hi)
            f, _ = density_at(eta, mid, cfg)
            if f > threshold:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    hi_idx = above[-1]
    lo_idx = above[0]
    right = table.xs[-1] if hi_idx == len(table) - 1 else table.xs[hi_idx + 1]
    left = table.xs[0] if lo_idx == 0 else table.xs[lo_idx - 1]
    return (bisect(table.xs[lo_idx], left), bisect(table.xs[hi_idx], right))


def fk_determinant(table: DensityTable) -> tuple[float, float]:
    """Fuglede-Kadison determinant exp(integral of log|x| against the table).

    The table must cover the support (mass within 1e-3 of 1) and carry
    refinement near 0 and the edges so that the trapezoid rule resolves the
    integrable log singularity.  The innermost gap around 0 is integrated
    analytically with f frozen at the nearest samples.  Returns
    (determinant, estimated quadrature error).
    """
    xs = np.asarray(table.xs, dtype=float)
    fs = np.asarray(table.fs, dtype=float)
    order = np.argsort(xs)
    xs, fs = xs[order], fs[order]
    keep = xs != 0.0
    xs, fs = xs[keep], fs[keep]
    if len(xs) < 8:
        raise MatrixDomainError("table too small for the log-moment quadrature")
    mass = float(np.trapezoid(fs, xs))

    integrand = np.log(np.abs(xs)) * fs
    total = float(np.trapezoid(integrand, xs))

    # Central gap (-a, b) around zero: freeze f at the innermost samples.
    neg = xs[xs < 0]
    pos = xs[xs > 0]
    central = 0.0
    central_mass = 0.0
    if neg.size and pos.size:
        a, b = -neg.max(), pos.min()
        i_a = np.nonzero(xs == neg.max())[0][0]
        i_b = np.nonzero(xs == pos.min())[0][0]
        fbar = 0.5 * (fs[i_a] + fs[i_b])
        # integral of log|x| over (-a, b) is a(log a - 1) + b(log b - 1)
        central = fbar * (a * (np.log(a) - 1.0) + b * (np.log(b) - 1.0))
        central_mass = fbar * (a + b)
        # remove the trapezoid cell spanning the gap, which is wrong there
        cell = 0.5 * (integrand[i_a] + integrand[i_b]) * (b + a)
        total += central - cell
        mass += central_mass - 0.5 * (fs[i_a] + fs[i_b]) * (b + a)

    if abs(mass - 1.0) > 1e-3:
        raise MatrixDomainError(
            f"table does not cover the support (mass {mass:.6f})"
        )
    # Error estimate: compare with the half-resolution quadrature.
    coarse = float(np.trapezoid(integrand[::2], xs[::2]))
    err = abs(total - (coarse + central))
    return float(np.exp(total)), err


def cusp_exponent_fit(table: DensityTable, window: tuple[float, float]) -> tuple[float, float]:
    """Two-sided log-log slope of the density over |x| in [x_lo, x_hi].

    Least squares of log f against log |x| on each side of 0, slopes
    averaged; requires at least 5 points per available side and a window
    whose inner edge clears the eps floor by a factor of 10.
    """
    x_lo, x_hi = window
    if x_lo <= 0 or x_hi <= x_lo:
        raise MatrixDomainError("window must satisfy 0 < x_lo < x_hi")
    floor = min(table.eps_path)
    if x_lo < 10.0 * floor:
        raise MatrixDomainError(
            f"window inner edge {x_lo} is inside the eps floor {floor}"
        )
    xs = np.asarray(table.xs, dtype=float)
    fs = np.asarray(table.fs, dtype=float)
    slopes = []
    resid = []
    for side in (1.0, -1.0):
        sel = (side * xs >= x_lo) & (side * xs <= x_hi) & (fs > 0)
        if np.sum(sel) == 0:
            continue
        if np.sum(sel) < 5:
            raise MatrixDomainError("fewer than 5 points in the fit window")
        lx = np.log(np.abs(xs[sel]))
        lf = np.log(fs[sel])
        coef, res, _, _ = np.linalg.lstsq(
            np.column_stack([lx, np.ones_like(lx)]), lf, rcond=None
        )
        slopes.append(coef[0])
        ss_tot = float(np.sum((lf - lf.mean()) ** 2))
        ss_res = float(res[0]) if res.size else 0.0
        resid.append(1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0)
    if not slopes:
        raise MatrixDomainError("no points in the fit window")
    return float(np.mean(slopes)), float(np.min(resid))
