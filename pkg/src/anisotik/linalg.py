"""Preconditioned conjugate gradients for the SPD systems of the package."""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import SolverError


def pcg(a, rhs, tol=1e-8, maxiter=2000, inv_diag=None, x0=None, what="CG", precond=None, info=None):
    """Preconditioned CG; stops when ``|b - A x| <= tol |b|``.

    ``a`` is anything supporting ``a @ x``. The preconditioner is ``precond``
    (a callable) when given, else Jacobi from ``inv_diag`` or the diagonal of
    a sparse ``a``. Raises :class:`SolverError` with the final relative
    residual when ``maxiter`` is exhausted. When ``info`` is a dict the
    iteration count is stored under ``"iterations"``.
    """
    b = np.asarray(rhs, dtype=np.float64)
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return np.zeros_like(b)
    if precond is None and inv_diag is None:
        if not sp.issparse(a):
            raise TypeError("inv_diag is required for matrix-free operators")
        d = a.diagonal()
        inv_diag = np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), 1.0)
    if precond is None:
        def precond(v):
            return inv_diag * v
    if info is None:
        info = {}
    info["iterations"] = 0
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - a @ x if x0 is not None else b.copy()
    stop = tol * b_norm
    if np.linalg.norm(r) <= stop:
        return x
    z = precond(r)
    p = z.copy()
    rz = r @ z
    for k in range(maxiter):
        q = a @ p
        step = rz / (p @ q)
        x += step * p
        r -= step * q
        if np.linalg.norm(r) <= stop:
            info["iterations"] = k + 1
            return x
        z = precond(r)
        rz_new = r @ z
        p *= rz_new / rz
        p += z
        rz = rz_new
    info["iterations"] = maxiter
    res = np.linalg.norm(b - a @ x) / b_norm
    raise SolverError(f"{what} did not converge in {maxiter} iterations", residual=res)


def lu_preconditioner(a):
    """Sparse LU of a symmetric ``a`` packaged as a CG preconditioner callable."""
    try:
        lu = splu(sp.csc_matrix(a), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                  options={"SymmetricMode": True})
    except RuntimeError as exc:
        raise SolverError(f"LU preconditioner failed: {exc}") from exc
    return lu.solve
