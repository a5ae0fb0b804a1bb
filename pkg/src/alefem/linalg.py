"""Sparse direct solves for the coupled velocity-pressure systems.

One monolithic LU factorization per solve (SuperLU with COLAMD ordering
and partial pivoting); the zero-mean pressure constraint is imposed by a
single scalar multiplier row/column bordering the saddle block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu


class SolverError(Exception):
    pass


def lu_solve(A: sparse.spmatrix, b: np.ndarray) -> np.ndarray:
    """Solve A x = b by sparse LU; verifies the residual bound."""
    b = np.asarray(b, dtype=float)
    A = A.tocsc()
    if A.shape[0] != A.shape[1] or A.shape[0] != len(b):
        raise SolverError(f"shape mismatch: A is {A.shape}, b has {len(b)}")
    try:
        lu = splu(A)
    except RuntimeError as err:
        raise SolverError(f"factorization failed: {err}") from err
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SolverError("factorization produced non-finite entries "
                          "(singular to working precision)")
    resid = np.abs(A @ x - b).max(initial=0.0)
    scale = _inf_norm(A) * np.abs(x).max(initial=0.0) + np.abs(b).max(initial=0.0)
    if resid > 1e-10 * max(scale, 1e-30):
        raise SolverError(
            f"residual {resid:.3e} exceeds 1e-10 * {scale:.3e}")
    return x


def _inf_norm(A: sparse.spmatrix) -> float:
    return float(np.abs(A).sum(axis=1).max()) if A.nnz else 0.0


@dataclass
class SaddleSystem:
    """Constrained saddle-point problem

        [ Kuu  B^T  0 ] [u]   [rhs_u]
        [ B    0    m ] [p] = [rhs_p]
        [ 0    m^T  0 ] [l]   [  0  ]

    where m is the pressure-mean functional, so m^T p = 0 holds exactly
    at the solution and l absorbs any mean component of rhs_p.
    """

    Kuu: sparse.spmatrix
    B: sparse.spmatrix
    rhs_u: np.ndarray
    rhs_p: np.ndarray
    mean_vector: np.ndarray

    def __post_init__(self):
        n_u = self.Kuu.shape[0]
        n_p = self.B.shape[0]
        if self.B.shape[1] != n_u:
            raise SolverError(f"B has shape {self.B.shape}, expected (*, {n_u})")
        if len(self.rhs_u) != n_u or len(self.rhs_p) != n_p:
            raise SolverError("right-hand side sizes do not match the blocks")
        if len(self.mean_vector) != n_p:
            raise SolverError("mean vector size does not match pressure block")


def solve_saddle(system: SaddleSystem):
    """Solve the bordered saddle problem; returns (u, p, multiplier).

    The multiplier row/column couple the dense pressure-mean functional
    to every pressure DOF, which ruins the fill-reducing ordering if
    factored verbatim.  Instead the two-by-two saddle block is made
    nonsingular by a sparse rank-one shift on one pinned pressure DOF,
    factored once, and the bordered solution is recovered from three
    triangular solves plus a two-by-two closure; iterative refinement on
    the exact bordered residual restores full accuracy.
    """
    n_u = system.Kuu.shape[0]
    n_p = system.B.shape[0]
    n = n_u + n_p
    m = system.mean_vector
    c = np.concatenate([np.zeros(n_u), m])
    pin = n_u + int(np.argmax(np.abs(m)))
    A0 = sparse.bmat([[system.Kuu, system.B.T], [system.B, None]],
                     format="csc")
    sigma = float(np.abs(system.Kuu.diagonal()).max())
    if sigma == 0.0:
        sigma = 1.0
    shift = sparse.coo_matrix(([sigma], ([pin], [pin])), shape=(n, n))
    try:
        lu = splu((A0 + shift).tocsc())
    except RuntimeError as err:
        raise SolverError(f"factorization failed: {err}") from err

    x2 = lu.solve(c)
    e = np.zeros(n)
    e[pin] = 1.0
    x3 = lu.solve(e)

    def bordered(r, s):
        # A0 x + lam c = r and c^T x = s via the rank-one-shifted factor
        x1 = lu.solve(r)
        a11 = 1.0 - sigma * x3[pin]
        a12 = x2[pin]
        a21 = -sigma * (c @ x3)
        a22 = c @ x2
        det = a11 * a22 - a12 * a21
        if det == 0.0 or not np.isfinite(det):
            raise SolverError("bordered closure is singular "
                              "(mean vector incompatible with the blocks)")
        r1, r2 = x1[pin], (c @ x1) - s
        alpha = (r1 * a22 - a12 * r2) / det
        lam = (a11 * r2 - r1 * a21) / det
        return x1 - lam * x2 + sigma * alpha * x3, lam

    rhs = np.concatenate([system.rhs_u, system.rhs_p])
    x, lam = bordered(rhs, 0.0)
    norm_A = _inf_norm(A0) + np.abs(m).sum()
    for _ in range(3):
        res = rhs - (A0 @ x + lam * c)
        res_s = -(c @ x)
        bound = max(norm_A * np.abs(x).max(initial=0.0),
                    np.abs(rhs).max(initial=0.0), 1e-30)
        if max(np.abs(res).max(initial=0.0), abs(res_s)) <= 1e-12 * bound:
            break
        dx, dlam = bordered(res, res_s)
        x = x + dx
        lam = lam + dlam
    res = rhs - (A0 @ x + lam * c)
    bound = max(norm_A * np.abs(x).max(initial=0.0),
                np.abs(rhs).max(initial=0.0), 1e-30)
    if np.abs(res).max(initial=0.0) > 1e-9 * bound:
        raise SolverError(
            f"saddle residual {np.abs(res).max():.3e} exceeds 1e-9 * {bound:.3e}")
    u = x[:n_u]
    p = x[n_u:]
    mean = float(m @ p)
    if abs(mean) > 1e-10 * max(np.abs(p).max(initial=0.0), 1.0) * \
            max(np.abs(m).sum(), 1.0):
        raise SolverError(f"pressure mean {mean:.3e} not eliminated")
    return u, p, float(lam)
