"""Small dense convex QP solver (primal-dual interior point, Mehrotra predictor-corrector).

Solves::

    minimize    1/2 x'Qx + c'x
    subject to  E x  = f
                G x <= h

``G`` may be a dense array or a ``scipy.sparse`` matrix; the reduced Newton
matrix ``Q + G' W G`` is always factored densely.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import DimensionMismatch, NotPSD

PSD_FLOOR = -1e-9
REG_THRESHOLD = 1e-10


class QPStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITERATIONS = "MaxIterations"


@dataclass
class QuadraticProgram:
    Q: np.ndarray
    c: np.ndarray
    E: np.ndarray | None = None
    f: np.ndarray | None = None
    G: np.ndarray | sp.spmatrix | None = None
    h: np.ndarray | None = None

    def __post_init__(self):
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        d = self.Q.shape[0]
        if self.Q.shape != (d, d):
            raise DimensionMismatch(f"Q must be square, got {self.Q.shape}")
        self.c = np.zeros(d) if self.c is None else np.asarray(self.c, dtype=float).ravel()
        if self.c.shape != (d,):
            raise DimensionMismatch(f"c has shape {self.c.shape}, expected ({d},)")
        self.E, self.f = _constraint_pair(self.E, self.f, d, "E", "f")
        self.G, self.h = _constraint_pair(self.G, self.h, d, "G", "h")

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.Q @ x + self.c @ x)


def _constraint_pair(A, b, d, an, bn):
    if A is None:
        if b is not None and np.size(b):
            raise DimensionMismatch(f"{bn} given without {an}")
        return np.zeros((0, d)), np.zeros(0)
    if sp.issparse(A):
        A = sp.csr_matrix(A, dtype=float)
    else:
        A = np.asarray(A, dtype=float)
        if A.ndim == 1:
            A = A[None, :]
    b = np.asarray(b, dtype=float).ravel()
    if A.shape[1] != d or A.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"{an} {A.shape} and {bn} {b.shape} do not match dimension {d}")
    return A, b


@dataclass
class QPSolution:
    x_star: np.ndarray
    objective: float
    status: QPStatus
    iterations: int = 0

    @property
    def ok(self) -> bool:
        return self.status is QPStatus.OPTIMAL


def _prepare_hessian(Q: np.ndarray, check_psd: bool) -> np.ndarray:
    Qs = 0.5 * (Q + Q.T)
    n = len(Qs)
    if n == 0:
        return Qs
    eye = np.eye(n)
    try:
        np.linalg.cholesky(Qs - REG_THRESHOLD * eye)
        return Qs
    except np.linalg.LinAlgError:
        pass
    if check_psd:
        try:
            np.linalg.cholesky(Qs - PSD_FLOOR * eye)
        except np.linalg.LinAlgError:
            lo = np.linalg.eigvalsh(Qs)[0]
            if lo < PSD_FLOOR:
                raise NotPSD(f"Q has eigenvalue {lo:.3e} below {PSD_FLOOR}")
    # not strictly convex: a tiny ridge keeps the Newton systems definite
    return Qs + REG_THRESHOLD * eye


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not neg.any():
        return 1.0
    with np.errstate(over="ignore"):
        return float(min(1.0, np.min(-v[neg] / dv[neg])))


def _polish(Q, c, E, f, G, h, x, z, s, tol):
    """Re-solve on the guessed active set; keep the result only if it is optimal.

    Interior-point iterates approach degenerate optima (active constraints
    with zero multipliers) only like sqrt(mu); the equality-constrained
    solve on the active set lands on them exactly.
    """
    n, p = len(x), E.shape[0]
    active = np.flatnonzero(z > s) if len(s) else np.zeros(0, dtype=int)
    GA = G[active]
    if sp.issparse(GA):
        GA = GA.toarray()
    A = np.vstack([E, GA]) if p or len(active) else np.zeros((0, n))
    b = np.concatenate([f, h[active]])
    k = A.shape[0]
    K = np.block([[Q, A.T], [A, np.zeros((k, k))]])
    rhs = np.concatenate([-c, b])
    try:
        with np.errstate(all="ignore"), warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            sol = sla.solve(K, rhs, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        return x
    if not np.all(np.isfinite(sol)) or np.abs(K @ sol - rhs).max() > tol:
        return x
    xp, mult = sol[:n], sol[n + p:]
    if len(mult) and mult.min() < -tol:
        return x
    if len(h) and (G @ xp - h).max() > tol:
        return x
    if p and np.abs(E @ xp - f).max() > tol:
        return x
    obj = lambda v: 0.5 * v @ Q @ v + c @ v
    if obj(xp) > obj(x) + 1e-12 * (1 + abs(obj(x))):
        return x
    return xp


def _weighted_gram(G: sp.spmatrix, n: int):
    """Return ``w -> G' diag(w) G`` as a dense matrix, precomputing row pairs.

    Each row ``r`` contributes ``w_r g_r g_r'``; the index pairs of its
    nonzeros are enumerated once so every call is a single bincount.
    """
    coo = G.tocsr().tocoo()
    order = np.argsort(coo.row, kind="stable")
    rows, cols, vals = coo.row[order], coo.col[order], coo.data[order]
    starts = np.searchsorted(rows, np.arange(G.shape[0] + 1))
    counts = np.diff(starts)
    pr, pk, pv = [], [], []
    for k in np.unique(counts):
        if k == 0:
            continue
        which = np.flatnonzero(counts == k)
        idx = starts[which][:, None] + np.arange(k)[None, :]  # (R, k)
        a = idx[:, :, None]
        b = idx[:, None, :]
        pr.append(np.broadcast_to(which[:, None, None], (len(which), k, k)).ravel())
        pk.append((cols[a] * n + cols[b]).ravel())
        pv.append((vals[a] * vals[b]).ravel())
    if not pr:
        return lambda w: np.zeros((n, n))
    pr, pk, pv = np.concatenate(pr), np.concatenate(pk), np.concatenate(pv)
    return lambda w: np.bincount(pk, weights=w[pr] * pv, minlength=n * n).reshape(n, n)


def solve_qp(qp: QuadraticProgram, tol: float = 1e-8, x0=None, max_iter: int = 200,
             check_psd: bool = True) -> QPSolution:
    """Solve ``qp`` to tolerance ``tol``.

    Status ``Optimal`` guarantees equality and inequality residuals below
    ``tol``, a stationarity residual below ``tol * (1 + |c|_inf)`` and a total
    duality gap below ``tol``.
    Problems with no feasible point come back ``Infeasible``; running out of
    iterations otherwise gives ``MaxIterations``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    Q = _prepare_hessian(qp.Q, check_psd)
    c, E, f, G, h = qp.c, qp.E, qp.f, qp.G, qp.h
    n, p, m = qp.dim, E.shape[0], G.shape[0]
    sparse_G = sp.issparse(G)
    Gt = G.T.tocsr() if sparse_G else G.T
    gram = _weighted_gram(G, n) if sparse_G and m else None
    cscale = 1.0 + (np.abs(c).max() if n else 0.0)
    data_scale = max(1.0, np.abs(Q).max() if n else 1.0, np.abs(h).max() if m else 1.0,
                     np.abs(f).max() if p else 1.0)
    reg = 1e-13 * data_scale

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    y = np.zeros(p)
    if m:
        s = np.maximum(h - G @ x, 1.0)
        z = np.ones(m)
    else:
        s = z = np.zeros(0)

    def residuals(x, y, z, s):
        rd = Q @ x + c
        if p:
            rd = rd + E.T @ y
        if m:
            rd = rd + Gt @ z
        rp = E @ x - f if p else np.zeros(0)
        ri = G @ x + s - h if m else np.zeros(0)
        return rd, rp, ri

    def converged(x, rd, rp, mu):
        if np.abs(rd).max(initial=0.0) > tol * cscale:
            return False
        if p and np.abs(rp).max() > tol:
            return False
        if m:
            # total duality gap s'z = m * mu, not the per-constraint average
            if (G @ x - h).max() > tol or m * mu > tol:
                return False
        return True

    it = 0
    for it in range(1, max_iter + 1):
        rd, rp, ri = residuals(x, y, z, s)
        mu = float(s @ z / m) if m else 0.0
        if n and np.abs(x).max() > 1e9 * data_scale:
            # diverging iterates: objective unbounded below on the feasible set
            return QPSolution(x, qp.objective(x), QPStatus.MAX_ITERATIONS, it)
        if converged(x, rd, rp, mu):
            x = _polish(Q, c, E, f, G, h, x, z, s, tol)
            return QPSolution(x, qp.objective(x), QPStatus.OPTIMAL, it - 1)
        if m and (z.max() > 1e12 * data_scale or s.max() > 1e14 * data_scale):
            return QPSolution(x, qp.objective(x), QPStatus.INFEASIBLE, it)

        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            w = z / s if m else np.zeros(0)
        if m and not np.all(np.isfinite(w)):
            return QPSolution(x, qp.objective(x), QPStatus.INFEASIBLE, it)
        H = Q + reg * np.eye(n)
        if m:
            if sparse_G:
                H = H + gram(w)
            else:
                H = H + (G.T * w) @ G
        try:
            cho = sla.cho_factor(H, check_finite=False)
        except np.linalg.LinAlgError:
            return QPSolution(x, qp.objective(x), QPStatus.INFEASIBLE, it)
        if p:
            HiEt = sla.cho_solve(cho, E.T, check_finite=False)
            schur = E @ HiEt + reg * np.eye(p)
            schur_lu = sla.lu_factor(schur, check_finite=False)

        def newton(rc):
            # rc is the complementarity residual s*z - target
            rhs = -rd
            if m:
                rhs = rhs - Gt @ (w * ri - rc / s)
            hr = sla.cho_solve(cho, rhs, check_finite=False)
            if p:
                dy = sla.lu_solve(schur_lu, E @ hr + rp, check_finite=False)
                dx = hr - HiEt @ dy
            else:
                dy = np.zeros(0)
                dx = hr
            if m:
                dz = w * (G @ dx + ri) - rc / s
                ds = -ri - G @ dx
            else:
                dz = ds = np.zeros(0)
            return dx, dy, dz, ds

        if m:
            dx, dy, dz, ds = newton(s * z)
            alpha = min(_max_step(s, ds), _max_step(z, dz))
            mu_aff = float((s + alpha * ds) @ (z + alpha * dz) / m)
            sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
            dx, dy, dz, ds = newton(s * z + ds * dz - sigma * mu)
            alpha = min(_max_step(s, ds), _max_step(z, dz))
            alpha = min(1.0, 0.99 * alpha)
        else:
            dx, dy, dz, ds = newton(np.zeros(0))
            alpha = 1.0
        x = x + alpha * dx
        y = y + alpha * dy
        if m:
            z = z + alpha * dz
            s = s + alpha * ds
            # keep strictly interior after roundoff
            s = np.maximum(s, 1e-300)
            z = np.maximum(z, 1e-300)

    rd, rp, ri = residuals(x, y, z, s)
    mu = float(s @ z / m) if m else 0.0
    if converged(x, rd, rp, mu):
        x = _polish(Q, c, E, f, G, h, x, z, s, tol)
        return QPSolution(x, qp.objective(x), QPStatus.OPTIMAL, max_iter)
    primal = max(np.abs(rp).max(initial=0.0), (G @ x - h).max(initial=0.0) if m else 0.0)
    status = QPStatus.INFEASIBLE if primal > tol else QPStatus.MAX_ITERATIONS
    return QPSolution(x, qp.objective(x), status, max_iter)
