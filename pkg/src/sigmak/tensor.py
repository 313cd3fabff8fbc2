"""Small symmetric-matrix machinery: packed storage, spectra, perturbation distance.

Eigenvalues of 3x3 matrices use the trigonometric closed form with a cyclic
Jacobi fallback near the degenerate discriminant; 4x4 to 6x6 use cyclic
Jacobi.  Both paths are dependency-free and accurate to machine tolerance at
these sizes; ``numpy.linalg.eigvalsh`` is kept out of the library so the test
suite can use it as an independent oracle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .symfun import MAX_DIM, MIN_DIM, Spectrum

_JACOBI_SWEEPS = 30
_PIVOT_REL_TOL = 1e-14
_DISC_REL_TOL = 1e-14


def as_matrix(A):
    """Coerce SymTensor/MetricTensor/array-like into a float (n, n) ndarray."""
    mat = getattr(A, "mat", None)
    if mat is not None:
        return np.array(mat, dtype=float)
    A = np.asarray(A, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError("expected a square matrix")
    return A


@dataclass(frozen=True)
class SymTensor:
    """Symmetric n x n tensor stored as the packed lower triangle (row-major)."""

    dim: int
    packed: np.ndarray

    def __post_init__(self):
        if not (MIN_DIM <= self.dim <= MAX_DIM):
            raise ValueError(f"dim must be in [{MIN_DIM}, {MAX_DIM}]")
        packed = np.asarray(self.packed, dtype=float).ravel()
        want = self.dim * (self.dim + 1) // 2
        if packed.size != want:
            raise ValueError(f"packed length {packed.size} != {want}")
        packed = packed.copy()
        packed.flags.writeable = False
        object.__setattr__(self, "packed", packed)

    @classmethod
    def from_matrix(cls, M):
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("expected a square matrix")
        scale = np.abs(M).max() + 1.0
        if np.abs(M - M.T).max() > 1e-12 * scale:
            raise ValueError("matrix is not symmetric")
        n = M.shape[0]
        sym = 0.5 * (M + M.T)
        rows, cols = np.tril_indices(n)
        return cls(dim=n, packed=sym[rows, cols])

    @property
    def mat(self):
        n = self.dim
        M = np.zeros((n, n))
        rows, cols = np.tril_indices(n)
        M[rows, cols] = self.packed
        M[cols, rows] = self.packed
        return M


class MetricTensor(SymTensor):
    """SymTensor that is positive definite; checked on construction."""

    def __post_init__(self):
        super().__post_init__()
        cholesky_lower(self.mat)  # raises if not positive definite


def cholesky_lower(g):
    """Lower Cholesky factor of a positive definite matrix.

    Fails loudly when a pivot drops below 1e-14 * trace: degenerate metrics
    are caller bugs, not a case to paper over.
    """
    g = as_matrix(g)
    n = g.shape[0]
    tol = _PIVOT_REL_TOL * max(np.trace(g), 1e-300)
    L = np.zeros_like(g)
    for i in range(n):
        s = g[i, i] - L[i, :i] @ L[i, :i]
        if s <= tol:
            raise ValueError("matrix is not positive definite (pivot below tolerance)")
        L[i, i] = math.sqrt(s)
        for j in range(i + 1, n):
            L[j, i] = (g[j, i] - L[j, :i] @ L[i, :i]) / L[i, i]
    return L


def _solve_lower(L, B):
    """Solve L X = B by forward substitution (L lower triangular)."""
    n = L.shape[0]
    X = np.array(B, dtype=float)
    for i in range(n):
        for j in range(i):
            X[i] = X[i] - L[i, j] * X[j]
        X[i] = X[i] / L[i, i]
    return X


def eigvals3_closed(A):
    """Descending eigenvalues of batched symmetric 3x3 matrices, closed form.

    Trigonometric solution of the characteristic cubic.  Near the fully
    degenerate discriminant the acos formulation loses accuracy; those
    entries are flagged by the second return value for a Jacobi fallback.
    """
    A = np.asarray(A, dtype=float)
    q = np.trace(A, axis1=-2, axis2=-1) / 3.0
    C = A - q[..., None, None] * np.eye(3)
    p2 = np.einsum("...ij,...ij->...", C, C)
    scale = np.einsum("...ij,...ij->...", A, A) + 1e-300
    degenerate = p2 < _DISC_REL_TOL * scale
    p = np.sqrt(np.maximum(p2, 1e-300) / 6.0)
    B = C / p[..., None, None]
    detB = np.linalg.det(B)
    r = np.clip(detB / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    e1 = q + 2.0 * p * np.cos(phi)
    e3 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    e2 = 3.0 * q - e1 - e3
    vals = np.stack([e1, e2, e3], axis=-1)
    if np.any(degenerate):
        vals = np.where(degenerate[..., None], q[..., None], vals)
    return vals, degenerate


def jacobi_eigh(A, vectors=False):
    """Batched cyclic Jacobi diagonalisation of symmetric matrices.

    Returns descending eigenvalues (and the orthogonal factor with matching
    column order when ``vectors``); converges to machine tolerance for the
    small dimensions used here.
    """
    A = np.array(as_matrix(A), dtype=float)
    single = A.ndim == 2
    if single:
        A = A[None]
    n = A.shape[-1]
    B = A.shape[0] if A.ndim == 3 else int(np.prod(A.shape[:-2]))
    A = A.reshape(B, n, n).copy()
    V = np.tile(np.eye(n), (B, 1, 1))
    scale = np.abs(A).max(axis=(-2, -1)) + 1e-300
    for _ in range(_JACOBI_SWEEPS):
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[:, p, q]
                active = np.abs(apq) > 1e-16 * scale
                if not np.any(active):
                    continue
                app = A[:, p, p]
                aqq = A[:, q, q]
                theta = np.where(active, (aqq - app) / (2.0 * np.where(active, apq, 1.0)), 0.0)
                t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
                t = np.where(theta == 0.0, 1.0, t)
                t = np.where(active, t, 0.0)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # rotate rows/columns p and q of every matrix in the batch
                Ap = A[:, p, :].copy()
                Aq = A[:, q, :].copy()
                A[:, p, :] = c[:, None] * Ap - s[:, None] * Aq
                A[:, q, :] = s[:, None] * Ap + c[:, None] * Aq
                Ap = A[:, :, p].copy()
                Aq = A[:, :, q].copy()
                A[:, :, p] = c[:, None] * Ap - s[:, None] * Aq
                A[:, :, q] = s[:, None] * Ap + c[:, None] * Aq
                Vp = V[:, :, p].copy()
                Vq = V[:, :, q].copy()
                V[:, :, p] = c[:, None] * Vp - s[:, None] * Vq
                V[:, :, q] = s[:, None] * Vp + c[:, None] * Vq
        iu = np.triu_indices(n, 1)
        off = np.abs(A[:, iu[0], iu[1]]).max(axis=-1)
        if np.all(off <= 1e-15 * scale):
            break
    vals = np.diagonal(A, axis1=-2, axis2=-1).copy()
    order = np.argsort(-vals, axis=-1, kind="stable")
    vals = np.take_along_axis(vals, order, axis=-1)
    V = np.take_along_axis(V, order[:, None, :], axis=-1)
    if single:
        return (vals[0], V[0]) if vectors else vals[0]
    return (vals, V) if vectors else vals


def eigvals_sym_batch(A):
    """Descending eigenvalues of batched symmetric 3x3 matrices (fast path).

    Exactly diagonal matrices short-circuit to their sorted diagonal; the
    closed form handles the rest, with a Jacobi pass for entries it flags as
    degenerate or whose spectrum comes out nearly double (the acos form loses
    ~sqrt(eps) * scale on the split of a close pair).
    """
    A = np.asarray(A, dtype=float)
    iu = np.triu_indices(3, 1)
    off = np.abs(A[..., iu[0], iu[1]]).max(axis=-1)
    scale = np.abs(A).max(axis=(-2, -1)) + 1e-300
    diag_like = off <= 1e-15 * scale
    vals, degenerate = eigvals3_closed(A)
    diag_sorted = -np.sort(-np.diagonal(A, axis1=-2, axis2=-1), axis=-1)
    vals = np.where(diag_like[..., None], diag_sorted, vals)
    gaps = np.minimum(vals[..., 0] - vals[..., 1], vals[..., 1] - vals[..., 2])
    refine = (~diag_like) & (degenerate | (gaps < 1e-6 * scale))
    if np.any(refine):
        idx = np.nonzero(refine)
        fixed = jacobi_eigh(A[idx])
        if fixed.ndim == 1:
            fixed = fixed[None]
        vals[idx] = fixed
    return vals


def sym_eigen(A, vectors=False):
    """Spectrum of a symmetric matrix, descending.

    With ``vectors`` the orthogonal factor Q is returned as well and the
    reconstruction Q diag(vals) Q^T matches A to 1e-12 * (1 + |A|).
    """
    M = as_matrix(A)
    if M.ndim != 2:
        raise ValueError("sym_eigen expects a single matrix; see eigvals_sym_batch")
    n = M.shape[0]
    if not (MIN_DIM <= n <= MAX_DIM):
        raise ValueError(f"dim must be in [{MIN_DIM}, {MAX_DIM}]")
    scale = np.abs(M).max() + 1.0
    if np.abs(M - M.T).max() > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    M = 0.5 * (M + M.T)
    if vectors:
        vals, Q = jacobi_eigh(M, vectors=True)
        return Spectrum(vals), Q
    if n == 3:
        vals = eigvals_sym_batch(M[None])[0]
    else:
        vals = jacobi_eigh(M)
    return Spectrum(vals)


def gen_eigen(g, A):
    """Eigenvalues of A with respect to the metric g, descending.

    Computed by symmetric congruence: factor g = L L^T and diagonalise
    L^{-1} A L^{-T}; the result is real and identical to the spectrum of
    g^{-1} A.  For g = I this reduces bit-exactly to ``sym_eigen``.
    """
    gm = as_matrix(g)
    Am = as_matrix(A)
    if gm.shape != Am.shape:
        raise ValueError("metric and tensor dimensions differ")
    L = cholesky_lower(gm)
    B = _solve_lower(L, Am)          # L^{-1} A
    B = _solve_lower(L, B.T).T       # L^{-1} A L^{-T}
    return sym_eigen(0.5 * (B + B.T))


def eigen_match_distance(M, Mt):
    """Minimum over permutations of sum_i |lambda_i(M) - lambda_sigma(i)(Mt)|.

    Exhaustive over the at most 6! = 720 permutations.
    """
    lam = np.asarray(sym_eigen(M).values)
    mu = np.asarray(sym_eigen(Mt).values)
    if lam.size != mu.size:
        raise ValueError("matrices must have the same dimension")
    best = math.inf
    for perm in itertools.permutations(range(mu.size)):
        d = float(np.abs(lam - mu[list(perm)]).sum())
        if d < best:
            best = d
    return best


def match_distance_batch(lam, mu):
    """Batched eigen match distance for precomputed eigenvalue arrays."""
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    n = lam.shape[-1]
    perms = np.array(list(itertools.permutations(range(n))))
    d = np.abs(lam[..., None, :] - mu[..., perms]).sum(axis=-1)
    return d.min(axis=-1)
