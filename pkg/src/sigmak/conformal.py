"""Pointwise curvature calculus for the Einstein and modified Schouten tensors.

Two conformal conventions are supported and cross-validated:

* log scale, g~ = exp(-2u) g, acting on the scalar u and its jet;
* power scale, g~ = w^{4/(n-2)} g, acting on a positive factor w.

The log-scale law is implemented with the Laplacian term multiplying the
metric, -(lap u) g.  A transcription that drops the metric factor is not
tensorial and fails the cross-convention consistency check; the chain rule
w = exp(-(n-2) u / 2) forces the form used here (validated to 1e-9 in the
test suite).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .symfun import sigma_k
from .tensor import as_matrix, cholesky_lower, gen_eigen

_TRACE_TOL = 1e-10


def _inv(g):
    return np.linalg.inv(as_matrix(g))


def trace_with_metric(g, A):
    """tr(g^{-1} A) for a metric g and symmetric tensor A."""
    return float(np.trace(_inv(g) @ as_matrix(A)))


def einstein_from_ric(ric, scal, g, n):
    """Einstein tensor (Ric - (R/2) g) / (n - 2)."""
    if n < 3:
        raise ValueError("the Einstein tensor needs n >= 3")
    return (as_matrix(ric) - 0.5 * scal * as_matrix(g)) / (n - 2)


def schouten_tau(ric, scal, g, n, tau):
    """Modified Schouten tensor (Ric - tau R / (2(n-1)) g) / (n - 2).

    tau = 1 is the classical Schouten tensor, tau = n - 1 the Einstein tensor.
    """
    if n < 3:
        raise ValueError("the modified Schouten tensor needs n >= 3")
    return (as_matrix(ric) - tau * scal / (2.0 * (n - 1)) * as_matrix(g)) / (n - 2)


@dataclass(frozen=True)
class CurvaturePoint:
    """Curvature data of a background metric at a point.

    Units: ric, scal, einstein, schouten carry 1/length^2; tau dimensionless.
    """

    n: int
    tau: float
    g: np.ndarray
    ric: np.ndarray
    scal: float
    einstein: np.ndarray
    schouten: np.ndarray

    def __post_init__(self):
        g = as_matrix(self.g)
        ric = as_matrix(self.ric)
        cholesky_lower(g)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "ric", ric)
        object.__setattr__(self, "einstein", as_matrix(self.einstein))
        object.__setattr__(self, "schouten", as_matrix(self.schouten))
        scale = abs(self.scal) + np.abs(ric).max() + 1.0
        if abs(trace_with_metric(g, ric) - self.scal) > _TRACE_TOL * scale:
            raise ValueError("scalar curvature does not match tr(g^{-1} Ric)")
        want_e = einstein_from_ric(ric, self.scal, g, self.n)
        if np.abs(self.einstein - want_e).max() > _TRACE_TOL * scale:
            raise ValueError("einstein field inconsistent with ric/scal")

    @classmethod
    def build(cls, g, ric, scal=None, tau=None):
        """Assemble a consistent curvature point from metric and Ricci data."""
        g = as_matrix(g)
        ric = as_matrix(ric)
        n = g.shape[0]
        if scal is None:
            scal = trace_with_metric(g, ric)
        if tau is None:
            tau = float(n - 1)
        return cls(
            n=n,
            tau=float(tau),
            g=g,
            ric=ric,
            scal=float(scal),
            einstein=einstein_from_ric(ric, scal, g, n),
            schouten=schouten_tau(ric, scal, g, n, tau),
        )

    def schouten_at(self, tau):
        """Modified Schouten tensor of this point for an arbitrary tau."""
        return schouten_tau(self.ric, self.scal, self.g, self.n, tau)


@dataclass(frozen=True)
class ConformalJet:
    """Value, gradient (covariant components), Hessian and Laplacian of u.

    Derivatives are covariant with respect to the background Levi-Civita
    connection; lap must equal tr(g^{-1} hess) for the metric the jet was
    built against.
    """

    u: float
    grad: np.ndarray
    hess: np.ndarray
    lap: float

    def __post_init__(self):
        object.__setattr__(self, "grad", np.asarray(self.grad, dtype=float))
        object.__setattr__(self, "hess", as_matrix(self.hess))

    @classmethod
    def from_parts(cls, u, grad, hess, g):
        hess = as_matrix(hess)
        return cls(u=float(u), grad=np.asarray(grad, dtype=float), hess=hess,
                   lap=trace_with_metric(g, hess))

    @classmethod
    def zero(cls, n):
        return cls(u=0.0, grad=np.zeros(n), hess=np.zeros((n, n)), lap=0.0)

    def check_against(self, g, tol=_TRACE_TOL):
        scale = abs(self.lap) + np.abs(self.hess).max() + 1.0
        if abs(trace_with_metric(g, self.hess) - self.lap) > tol * scale:
            raise ValueError("jet Laplacian inconsistent with tr(g^{-1} hess)")


def _grad_square(g, grad):
    ginv = _inv(g)
    return float(grad @ ginv @ grad)


def conformal_schouten_log(base: CurvaturePoint, jet: ConformalJet, tau):
    """A^tau of g~ = exp(-2u) g, expressed in the background frame.

    A^tau_~ = A^tau + hess u + (1-tau)/(n-2) (lap u) g + du (x) du
              - (2-tau)/2 |grad u|^2 g.
    """
    n = base.n
    g = base.g
    du = jet.grad
    gsq = _grad_square(g, du)
    return (base.schouten_at(tau)
            + jet.hess
            + (1.0 - tau) / (n - 2) * jet.lap * g
            + np.outer(du, du)
            - 0.5 * (2.0 - tau) * gsq * g)


def conformal_einstein_log(base: CurvaturePoint, jet: ConformalJet, n=None):
    """Einstein tensor of g~ = exp(-2u) g in the background frame.

    E_~ = E + hess u - (lap u) g + du (x) du + (n-3)/2 |grad u|^2 g.
    """
    if n is not None and n != base.n:
        raise ValueError("dimension mismatch with curvature point")
    return conformal_schouten_log(base, jet, tau=base.n - 1.0)


def conformal_schouten_power(base: CurvaturePoint, w, grad_w, hess_w, tau):
    """A^tau of g~ = w^{4/(n-2)} g for a positive conformal factor w."""
    if w <= 0.0:
        raise ValueError("conformal factor w must be positive")
    n = base.n
    g = base.g
    dw = np.asarray(grad_w, dtype=float)
    hw = as_matrix(hess_w)
    lap_w = trace_with_metric(g, hw)
    gsq = _grad_square(g, dw)
    c1 = 2.0 / (n - 2)
    c2 = 2.0 / (n - 2) ** 2
    return (-c1 / w * hw
            - c2 * (1.0 - tau) / w * lap_w * g
            + n * c2 / w**2 * np.outer(dw, dw)
            - c2 / w**2 * gsq * g
            + base.schouten_at(tau))


def conformal_einstein_power(base: CurvaturePoint, w, grad_w, hess_w, n=None):
    """Einstein tensor of g~ = w^{4/(n-2)} g for a positive factor w."""
    if n is not None and n != base.n:
        raise ValueError("dimension mismatch with curvature point")
    return conformal_schouten_power(base, w, grad_w, hess_w, tau=base.n - 1.0)


def equation_residual_point(base: CurvaturePoint, jet: ConformalJet, n, k, target):
    """sigma_k of -E_~ relative to g~ = exp(-2u) g, minus the target value.

    The eigenvalues are taken with respect to the conformal metric itself,
    which scales the background-frame eigenvalues by exp(2u).
    """
    if n != base.n:
        raise ValueError("dimension mismatch with curvature point")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}")
    e_tilde = conformal_einstein_log(base, jet)
    g_tilde = np.exp(-2.0 * jet.u) * base.g
    lam = gen_eigen(g_tilde, -e_tilde)
    return float(sigma_k(lam, k) - target)
