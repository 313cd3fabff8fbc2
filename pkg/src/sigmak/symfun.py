"""Elementary symmetric polynomials, Newton transformations and Garding cones.

Everything here is a pure function of its arguments; eigenvalue vectors may be
plain arrays or :class:`Spectrum` objects, and matrix arguments may be plain
symmetric ndarrays or :class:`sigmak.tensor.SymTensor`.  Most vector routines
accept batched input with the eigenvalue axis last.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MIN_DIM = 3
MAX_DIM = 6


def _values(lam):
    """Coerce a Spectrum or array-like into a float array (eigenvalues last)."""
    vals = np.asarray(getattr(lam, "values", lam), dtype=float)
    if vals.ndim == 0:
        raise ValueError("eigenvalue input must be a vector")
    return vals


def _matrix(A):
    from .tensor import as_matrix

    return as_matrix(A)


@dataclass(frozen=True)
class Spectrum:
    """Ordered eigenvalue vector of a symmetric tensor relative to a metric.

    Values are sorted descending, length between 3 and 6.
    """

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or not (MIN_DIM <= vals.size <= MAX_DIM):
            raise ValueError(f"spectrum length must be in [{MIN_DIM}, {MAX_DIM}]")
        if np.any(np.diff(vals) > 0):
            raise ValueError("spectrum values must be sorted descending")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def of(cls, values):
        """Build a Spectrum from any ordering of eigenvalues."""
        vals = np.sort(np.asarray(values, dtype=float))[::-1]
        return cls(vals)

    @property
    def n(self):
        return self.values.size

    def __len__(self):
        return self.values.size

    def __iter__(self):
        return iter(self.values)


@dataclass(frozen=True)
class ConeReport:
    """Membership result for the k-th Garding cone (positive or negative)."""

    k: int
    sign: str
    member: bool
    margins: np.ndarray = field(repr=False)
    margin: float = 0.0

    def __post_init__(self):
        if self.sign not in ("positive", "negative"):
            raise ValueError("sign must be 'positive' or 'negative'")


def elementary_symmetric_table(vals, kmax):
    """All sigma_j(vals) for j = 0..kmax, vectorised over leading axes.

    Uses the stable one-pass recurrence e_j += x * e_{j-1}; sigma_j = 0 for
    j greater than the vector length, sigma_0 = 1.
    """
    vals = np.asarray(vals, dtype=float)
    n = vals.shape[-1]
    out = np.zeros(vals.shape[:-1] + (kmax + 1,), dtype=float)
    out[..., 0] = 1.0
    for i in range(n):
        x = vals[..., i]
        for j in range(min(i + 1, kmax), 0, -1):
            out[..., j] += x * out[..., j - 1]
    return out


def sigma_k(lam, k):
    """k-th elementary symmetric polynomial of the eigenvalues.

    sigma_0 = 1 and sigma_k = 0 for k > n.  Scalar for a single vector,
    array for batched input.
    """
    if k < 0:
        raise ValueError("sigma_k is undefined for negative k")
    vals = _values(lam)
    n = vals.shape[-1]
    if k == 0:
        out = np.ones(vals.shape[:-1])
    elif k > n:
        out = np.zeros(vals.shape[:-1])
    else:
        out = elementary_symmetric_table(vals, k)[..., k]
    return float(out) if out.ndim == 0 else out


def sigma_truncated(lam, k, omit):
    """sigma_k with the eigenvalues at the given indices set to zero.

    ``omit`` is an index set of size at most two (distinct, in range).
    """
    vals = _values(lam)
    n = vals.shape[-1]
    idx = sorted(set(int(i) for i in np.atleast_1d(list(omit))))
    if len(idx) != len(list(omit)):
        raise ValueError("omitted indices must be distinct")
    if len(idx) > 2:
        raise ValueError("at most two indices may be omitted")
    if idx and (idx[0] < 0 or idx[-1] >= n):
        raise ValueError(f"omit index out of range for n={n}")
    reduced = np.delete(vals, idx, axis=-1)
    return sigma_k(reduced, k)


def sigma_chain(A, k):
    """sigma_0..sigma_k of a symmetric matrix plus the gradient tensor.

    Returns ``(sig, T)`` where ``sig[..., j] = sigma_j(A)`` and ``T`` is the
    (k-1)-th Newton transformation, i.e. d sigma_k / dA.  Evaluated by the
    trace recurrence T_j = sigma_j I - T_{j-1} A, sigma_j = tr(T_{j-1} A)/j,
    which is stable for n <= 6 and works on batched (..., n, n) input.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= {n}, got k={k}")
    eye = np.broadcast_to(np.eye(n), A.shape).copy()
    sig = np.zeros(A.shape[:-2] + (k + 1,), dtype=float)
    sig[..., 0] = 1.0
    T_prev = eye
    for j in range(1, k + 1):
        M = T_prev @ A
        sig[..., j] = np.trace(M, axis1=-2, axis2=-1) / j
        if j < k:
            T_prev = sig[..., j, None, None] * eye - M
    return sig, T_prev


def sigma_k_matrix(A, k):
    """sigma_k of a symmetric matrix (sum of k x k principal minors)."""
    A = _matrix(A)
    if k < 0:
        raise ValueError("sigma_k is undefined for negative k")
    if k > A.shape[-1]:
        return 0.0
    sig, _ = sigma_chain(A, k)
    return float(sig[..., k]) if sig.ndim == 1 else sig[..., k]


def newton_transform(A, k):
    """k-th Newton transformation sigma_k(A) I - sigma_{k-1}(A) A + ... + (-1)^k A^k."""
    A = _matrix(A)
    n = A.shape[-1]
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= {n}, got k={k}")
    eye = np.eye(n)
    T = eye.copy()
    for j in range(1, k + 1):
        M = T @ A
        s_j = np.trace(M) / j
        T = s_j * eye - M
    return 0.5 * (T + T.T)


def sigma_k_gradient(A, k):
    """Gradient of sigma_k with respect to the matrix entries: T_{k-1}(A)."""
    A = _matrix(A)
    if not 1 <= k <= A.shape[-1]:
        raise ValueError(f"need 1 <= k <= {A.shape[-1]}")
    return newton_transform(A, k - 1)


def cone_membership(lam, k, sign="positive"):
    """Membership report for the Garding cone Gamma_k^+ (or its negative).

    Member iff sigma_j(+/-lam) > 0 for every j = 1..k; the margin is the raw
    minimum of those sigma values (no normalisation, callers rescale).
    """
    vals = _values(lam)
    n = vals.shape[-1]
    if vals.ndim != 1:
        raise ValueError("cone_membership expects a single eigenvalue vector")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}")
    if sign == "negative":
        vals = -vals
    elif sign != "positive":
        raise ValueError("sign must be 'positive' or 'negative'")
    margins = elementary_symmetric_table(vals, k)[1:]
    margin = float(margins.min())
    return ConeReport(k=k, sign=sign, member=margin > 0.0, margins=margins, margin=margin)


def maclaurin_ratio(lam, k):
    """(sigma_k / C(n,k))^{1/k} / (sigma_1 / n); at most 1 on Gamma_k^+.

    Equality holds exactly at equal eigenvalues.
    """
    vals = _values(lam)
    n = vals.shape[-1]
    report = cone_membership(vals, k)
    if not report.member:
        raise ValueError("maclaurin_ratio requires lam in Gamma_k^+")
    sig = elementary_symmetric_table(vals, k)
    num = (sig[k] / math.comb(n, k)) ** (1.0 / k)
    return float(num / (sig[1] / n))


def sample_cone(rng, n, k, size=1, sign="positive", box=(-1.0, 2.0)):
    """Rejection-sample eigenvalue vectors from Gamma_k^+ (or Gamma_k^-).

    Draws uniform vectors from ``box`` per coordinate and keeps cone members.
    ``rng`` is a numpy Generator, so runs are seedable and reproducible.
    """
    if not (MIN_DIM <= n <= MAX_DIM):
        raise ValueError(f"n must be in [{MIN_DIM}, {MAX_DIM}]")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}")
    lo, hi = box
    out = np.empty((0, n))
    attempts = 0
    while out.shape[0] < size:
        attempts += 1
        if attempts > 1000:
            raise RuntimeError("cone sampling did not reach the requested size")
        batch = rng.uniform(lo, hi, size=(max(4 * size, 4096), n))
        sig = elementary_symmetric_table(batch, k)
        mask = np.all(sig[:, 1:] > 0.0, axis=1)
        out = np.concatenate([out, batch[mask]])
    out = out[:size]
    if sign == "negative":
        out = -out
    elif sign != "positive":
        raise ValueError("sign must be 'positive' or 'negative'")
    return out
