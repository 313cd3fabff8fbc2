"""Homotopy continuation for the deformed sigma_k curvature equation.

The residual per node is

    F = sigma_k^{1/k}(lambda(W_t)) - phi(t) h^{1/k} e^{-2u}
        - (1 - t) (integral of e^{-(n+1)u})^{2/(n+1)}

with W_t = lambda_k (1 - phi) g - phi E_g - hess u + (lap u) g - du (x) du
+ (3-n)/2 |grad u|^2 g, assembled in the orthonormal frame of a model
geometry.  sigma_k and its gradient are evaluated by the Newton-transform
trace recurrence (no per-node eigensolve); cone margins come from the same
sigma table.  At t = 0 the equation is solved exactly by the constant
log(vol)/(n+1), which is where the path starts; at t = 1 it is the
prescribed-curvature equation sigma_k(-lambda(E_tilde)) = h.

The corrector is a damped Newton iteration whose linear systems are solved
matrix-free by restarted GMRES with diagonal preconditioning; the driver
adapts the t step, halving on failure and growing after easy successes, and
refuses any state whose cone margin is not strictly positive.
"""

from __future__ import annotations

import csv
import io
import math
from collections import namedtuple
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .conformal import equation_residual_point
from .exactsol import model_curvature
from .grid import (
    RadialGrid,
    ScalarField,
    TorusGrid,
    all_jets,
    field_norms,
    quadrature_weights,
)
from .symfun import elementary_symmetric_table, sigma_chain

# newton_correct failure codes
CONVERGED = "converged"
LINE_SEARCH_STALL = "line_search_stall"
ITERATION_CAP = "iteration_cap"
CONE_EXIT = "cone_exit"

# continuation_solve statuses
PATH_CONVERGED = "converged"
STEP_UNDERFLOW = "min_step_underflow"


def phi(t):
    """Homotopy weight: C^1 ramp, 0 at t=0, 1 for t >= 1/2, returns (value, slope).

    Concrete choice 3(2t)^2 - 2(2t)^3 below one half; both one-sided slopes
    vanish at the joint.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError("homotopy parameter must lie in [0, 1]")
    if t >= 0.5:
        return 1.0, 0.0
    s = 2.0 * t
    return 3.0 * s * s - 2.0 * s**3, 12.0 * s * (1.0 - s)


@dataclass(frozen=True)
class ModelGeometry:
    """A model background bundled with its discrete grid.

    Curvature is homogeneous and expressed in the pointwise orthonormal
    frame, so the frame metric is the identity and jets from the grid are
    rescaled by the geometry scale (sphere radius).
    """

    name: str
    grid: object
    base: object  # CurvaturePoint in the orthonormal frame
    scale: float = 1.0

    @classmethod
    def sphere(cls, n_nodes, radius=1.0, volume_normalized=False):
        """Round 3-sphere on a polar grid; optionally rescaled to unit volume."""
        if volume_normalized:
            radius = (2.0 * math.pi**2) ** (-1.0 / 3.0)
        grid = RadialGrid("sphere_polar", n=n_nodes)
        return cls(name="sphere", grid=grid, scale=radius,
                   base=model_curvature("round_sphere", radius=radius))

    @classmethod
    def torus(cls, n_nodes, length=1.0):
        """Flat 3-torus; the unit period is volume-normalized already."""
        grid = TorusGrid(n=n_nodes, length=length)
        return cls(name="torus", grid=grid, base=model_curvature("torus"))

    @classmethod
    def radial(cls, n_nodes, r_max=1.0):
        """Flat radial ball (diagnostic stand-in, not a closed manifold)."""
        grid = RadialGrid("euclidean_radial", n=n_nodes, extent=r_max)
        return cls(name="radial", grid=grid, base=model_curvature("flat"))

    @property
    def weights(self):
        w = quadrature_weights(self.grid)
        if isinstance(self.grid, RadialGrid) and self.grid.kind == "sphere_polar":
            return w * self.scale**3
        return w

    @property
    def volume(self):
        return float(self.weights.sum())

    def jets(self, values):
        """Frame jets of nodal values, including the geometry scale."""
        f = ScalarField(self.grid, values)
        grad, hess, lap = all_jets(f)
        if self.scale != 1.0:
            grad = grad / self.scale
            hess = hess / self.scale**2
            lap = lap / self.scale**2
        return grad, hess, lap

    def field(self, values):
        return ScalarField(self.grid, values)

    def coordinate_arrays(self):
        """Coordinates for prescribing h: (x, y, z) on the torus, else (theta,)."""
        if isinstance(self.grid, TorusGrid):
            return self.grid.coordinates()
        return (self.grid.nodes,)


@dataclass(frozen=True)
class DeformationProblem:
    """A full instance of the deformation equation on a model geometry."""

    geometry: ModelGeometry
    h: ScalarField
    n: int = 3
    k: int = 2
    phi: object = phi

    def __post_init__(self):
        if self.n != 3:
            raise ValueError("model geometries are 3-dimensional")
        if not 1 <= self.k <= self.n:
            raise ValueError("need 1 <= k <= n")
        if self.h.grid != self.geometry.grid:
            raise ValueError("h must live on the geometry's grid")
        if self.h.values.min() <= 0.0:
            raise ValueError("the prescribed function h must be positive")
        lam = np.full(self.n, self.lambda_k)
        sig = elementary_symmetric_table(lam, self.k)[self.k]
        if abs(sig ** (1.0 / self.k) - 1.0) > 1e-12:
            raise AssertionError("lambda_k normalisation violated")

    @property
    def lambda_k(self):
        """C(n, k)^{-1/k}: the constant making sigma_k^{1/k}(lambda_k 1) = 1."""
        return math.comb(self.n, self.k) ** (-1.0 / self.k)

    @property
    def h_root(self):
        """h^{1/k}: the equation drives sigma_k^{1/k}, the input h is sigma_k."""
        return self.h.values ** (1.0 / self.k)


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for the Newton corrector and the continuation driver."""

    newton_tol: float = 1e-9
    newton_max_iter: int = 25
    linear_rtol: float = 1e-8
    linear_restart: int = 200
    linear_maxiter: int = 40          # restart cycles
    line_search_max: int = 20
    cone_margin_min: float = 1e-10
    dt_init: float = 0.1
    dt_min: float = 1e-4
    dt_max: float = 0.25
    dt_growth: float = 1.5
    easy_iters: int = 4
    max_steps: int = 500


@dataclass(frozen=True)
class ContinuationState:
    """One accepted point on the homotopy path."""

    t: float
    u: ScalarField
    residual_sup: float
    cone_margin: float
    apriori_ratio: float
    admissible: bool = True


NewtonResult = namedtuple("NewtonResult", "converged code state iterations linear_iters")
PathRecord = namedtuple(
    "PathRecord", "t residual_sup cone_margin apriori_ratio newton_iters linear_iters"
)


@dataclass(frozen=True)
class ContinuationResult:
    success: bool
    status: str
    diagnosis: str
    final_state: ContinuationState
    path: list
    background_admissible: bool
    background_margin: float
    independent_residual: float = math.nan


# --- assembly -----------------------------------------------------------------


def _assemble(prob: DeformationProblem, u, t):
    """Residual and Jacobian ingredients at (u, t); u is the nodal value array."""
    geo = prob.geometry
    n, k = prob.n, prob.k
    phival, _ = prob.phi(t)
    grad, hess, lap = geo.jets(u)
    gsq = (grad**2).sum(axis=-1)
    eye = np.eye(n)
    W = (
        (prob.lambda_k * (1.0 - phival) + lap)[..., None, None] * eye
        - phival * geo.base.einstein
        - hess
        - grad[..., :, None] * grad[..., None, :]
        + (0.5 * (3.0 - n) * gsq)[..., None, None] * eye
    )
    sig, T = sigma_chain(W, k)
    margins = sig[..., 1:]
    margin_min = float(margins.min())
    admissible = margin_min > 0.0
    sig_k = sig[..., k]
    root = np.power(np.where(margins.min(axis=-1) > 0.0, sig_k, 1.0), 1.0 / k)
    e2u = np.exp(-2.0 * u)
    weights = geo.weights
    expo = -(n + 1.0) * u
    if expo.max() > 700.0:
        raise OverflowError("exp overflow in the volume term")
    wexp = weights * np.exp(expo)
    S = float(wexp.sum())
    integ = S ** (2.0 / (n + 1.0))
    F = root - phival * prob.h_root * e2u - (1.0 - t) * integ
    node_margin = margins.min(axis=-1)
    F = np.where(node_margin > 0.0, F, node_margin - 1.0)
    return {
        "u": u, "t": t, "phi": phival, "grad": grad,
        "F": F, "margins": margins, "margin_min": margin_min,
        "admissible": admissible, "sig_k": sig_k, "root": root, "T": T,
        "e2u": e2u, "S": S, "integ": integ, "wexp": wexp,
    }


def _jacobian_apply(prob: DeformationProblem, ctx, v):
    """Directional derivative of the residual at the assembled state ctx."""
    geo = prob.geometry
    n, k = prob.n, prob.k
    gv, hv, lv = geo.jets(v)
    grad = ctx["grad"]
    eye = np.eye(n)
    dW = (
        lv[..., None, None] * eye
        - hv
        - grad[..., :, None] * gv[..., None, :]
        - gv[..., :, None] * grad[..., None, :]
        + ((3.0 - n) * (grad * gv).sum(axis=-1))[..., None, None] * eye
    )
    local = (ctx["root"] / (k * ctx["sig_k"])) * np.einsum("...ij,...ij->...", ctx["T"], dW)
    zeroth = 2.0 * ctx["phi"] * prob.h_root * ctx["e2u"] * v
    nl_coef = 2.0 * (1.0 - ctx["t"]) * ctx["S"] ** ((1.0 - n) / (n + 1.0))
    nonlocal_term = nl_coef * float((ctx["wexp"] * v).sum())
    return local + zeroth + nonlocal_term


def deformation_residual(prob: DeformationProblem, u, t):
    """Residual field of the deformation equation at (u, t).

    Nodes whose cone check fails carry the signed penalty margin - 1 instead
    of the sigma_k^{1/k} value; such a state is inadmissible and only guards
    transients, it can never be accepted by the solver.
    """
    uvals = u.values if isinstance(u, ScalarField) else np.asarray(u, dtype=float)
    ctx = _assemble(prob, uvals, t)
    return prob.geometry.field(ctx["F"])


def residual_report(prob: DeformationProblem, u, t):
    """(residual field, cone margin, admissible flag) at (u, t)."""
    uvals = u.values if isinstance(u, ScalarField) else np.asarray(u, dtype=float)
    ctx = _assemble(prob, uvals, t)
    return prob.geometry.field(ctx["F"]), ctx["margin_min"], ctx["admissible"]


def jacobian_action(prob: DeformationProblem, u, t, v):
    """Directional derivative of the residual at u in direction v.

    The state must be admissible: off the cone the equation is not elliptic
    and the derivative is undefined.
    """
    uvals = u.values if isinstance(u, ScalarField) else np.asarray(u, dtype=float)
    vvals = v.values if isinstance(v, ScalarField) else np.asarray(v, dtype=float)
    ctx = _assemble(prob, uvals, t)
    if not ctx["admissible"]:
        raise ValueError("jacobian undefined at an inadmissible (off-cone) state")
    return prob.geometry.field(_jacobian_apply(prob, ctx, vvals))


def make_state(prob: DeformationProblem, u, t):
    uvals = u.values if isinstance(u, ScalarField) else np.asarray(u, dtype=float)
    ctx = _assemble(prob, uvals, t)
    fld = prob.geometry.field(uvals)
    norms = field_norms(fld)
    return ContinuationState(
        t=t, u=fld, residual_sup=float(np.abs(ctx["F"]).max()),
        cone_margin=ctx["margin_min"], apriori_ratio=norms.apriori_ratio,
        admissible=ctx["admissible"],
    )


# --- Newton corrector -----------------------------------------------------------


def _precondition_diag(prob, ctx):
    """Cheap analytic diagonal of the Jacobian for Jacobi preconditioning.

    Only the centre coefficients of the stencils enter; accuracy is
    irrelevant beyond equilibrating the linear system.
    """
    geo = prob.geometry
    n, k = prob.n, prob.k
    T = ctx["T"]
    fac = ctx["root"] / (k * ctx["sig_k"])
    if isinstance(geo.grid, TorusGrid):
        h2 = geo.grid.spacing**2
        trT = np.trace(T, axis1=-2, axis2=-1)
        local = fac * (-4.0 / h2) * trT
    else:
        h2 = (geo.grid.spacing * geo.scale) ** 2
        local = fac * (-2.0 / h2) * (T[..., 1, 1] + T[..., 2, 2])
    diag = local + 2.0 * ctx["phi"] * prob.h_root * ctx["e2u"]
    diag = diag + 2.0 * (1.0 - ctx["t"]) * ctx["S"] ** ((1.0 - n) / (n + 1.0)) * ctx["wexp"]
    bad = np.abs(diag) < 1e-12
    return np.where(bad, 1.0, diag)


def newton_correct(prob: DeformationProblem, state: ContinuationState,
                   max_iter=None, tol=None, config: SolverConfig | None = None):
    """Damped Newton at fixed t, matrix-free GMRES inner solves.

    Backtracking halves the step until the sup residual decreases and the
    iterate stays strictly inside the cone; distinct failure codes carry the
    last state.
    """
    config = config or SolverConfig()
    max_iter = config.newton_max_iter if max_iter is None else max_iter
    tol = config.newton_tol if tol is None else tol
    t = state.t
    u = state.u.values.copy()
    ctx = _assemble(prob, u, t)
    if not ctx["admissible"]:
        return NewtonResult(False, CONE_EXIT, state, 0, 0)
    res = float(np.abs(ctx["F"]).max())
    shape = u.shape
    size = u.size
    linear_total = 0
    for it in range(max_iter):
        if res <= tol:
            return NewtonResult(True, CONVERGED, make_state(prob, u, t), it, linear_total)

        counter = {"n": 0}

        def matvec(x):
            counter["n"] += 1
            return _jacobian_apply(prob, ctx, x.reshape(shape)).ravel()

        op = LinearOperator((size, size), matvec=matvec)
        dinv = 1.0 / _precondition_diag(prob, ctx).ravel()
        M = LinearOperator((size, size), matvec=lambda x: dinv * x)
        rhs = -ctx["F"].ravel()
        delta, info = gmres(op, rhs, rtol=config.linear_rtol, atol=0.0,
                            restart=min(config.linear_restart, size),
                            maxiter=config.linear_maxiter, M=M)
        linear_total += counter["n"]
        delta = delta.reshape(shape)
        if not np.all(np.isfinite(delta)):
            return NewtonResult(False, LINE_SEARCH_STALL, make_state(prob, u, t),
                                it, linear_total)
        # backtracking on the sup residual, cone-guarded
        step = 1.0
        accepted = False
        cone_blocked = False
        for _ in range(config.line_search_max + 1):
            trial = u + step * delta
            try:
                ctx_trial = _assemble(prob, trial, t)
            except OverflowError:
                step *= 0.5
                continue
            res_trial = float(np.abs(ctx_trial["F"]).max())
            if ctx_trial["margin_min"] <= config.cone_margin_min:
                cone_blocked = True
                step *= 0.5
                continue
            if res_trial < res:
                u, ctx, res = trial, ctx_trial, res_trial
                accepted = True
                break
            step *= 0.5
        if not accepted:
            code = CONE_EXIT if cone_blocked else LINE_SEARCH_STALL
            return NewtonResult(False, code, make_state(prob, u, t), it + 1, linear_total)
    if res <= tol:
        return NewtonResult(True, CONVERGED, make_state(prob, u, t), max_iter, linear_total)
    return NewtonResult(False, ITERATION_CAP, make_state(prob, u, t), max_iter, linear_total)


# --- continuation driver ---------------------------------------------------------


def background_admissibility(prob: DeformationProblem):
    """Cone margin of -E_g for the background: the t = 1 ellipticity requirement."""
    lam = np.sort(np.diag(-prob.geometry.base.einstein))[::-1]
    sig = elementary_symmetric_table(lam, prob.k)[1:]
    margin = float(sig.min())
    return margin > 0.0, margin


def exact_start_constant(prob: DeformationProblem):
    """Constant solving the t=0 equation exactly on the discrete geometry.

    At t=0 any constant c gives sigma_k^{1/k} = 1 pointwise and the volume
    term e^{-2c} vol^{2/(n+1)}, so c = log(vol)/(n+1); with the quadrature
    volume this zeroes the discrete residual to rounding.
    """
    return math.log(prob.geometry.weights.sum()) / (prob.n + 1.0)


def continuation_solve(prob: DeformationProblem, config: SolverConfig | None = None,
                       verbose=False):
    """Follow the homotopy from the exact t=0 solution to t=1.

    Constant-u predictor, Newton corrector, adaptive step: halve on corrector
    failure down to dt_min, grow by dt_growth after two easy successes.  Every
    accepted state is strictly inside the cone.  On reaching t=1 the solution
    is re-verified through the pointwise conformal residual, independently of
    the deformation assembly.
    """
    config = config or SolverConfig()
    adm, margin = background_admissibility(prob)
    diagnosis = "" if adm else (
        "background not negative k-admissible: lambda(-E_g) has cone margin "
        f"{margin:.3e} <= 0 at the t=1 end of the path"
    )
    u0 = np.full(prob.geometry.grid.shape, exact_start_constant(prob))
    state = make_state(prob, u0, 0.0)
    result = newton_correct(prob, state, config=config)
    path = []
    if not result.converged:
        return ContinuationResult(
            False, result.code, diagnosis or "t=0 solve failed", result.state,
            path, adm, margin)
    state = result.state
    path.append(PathRecord(state.t, state.residual_sup, state.cone_margin,
                           state.apriori_ratio, result.iterations, result.linear_iters))
    dt = config.dt_init
    easy = 0
    for _ in range(config.max_steps):
        if state.t >= 1.0:
            break
        t_next = min(1.0, state.t + dt)
        predictor = ContinuationState(
            t=t_next, u=state.u, residual_sup=math.inf,
            cone_margin=state.cone_margin, apriori_ratio=state.apriori_ratio)
        result = newton_correct(prob, predictor, config=config)
        if result.converged and result.state.cone_margin > config.cone_margin_min:
            state = result.state
            path.append(PathRecord(state.t, state.residual_sup, state.cone_margin,
                                   state.apriori_ratio, result.iterations,
                                   result.linear_iters))
            if verbose:
                print(f"t={state.t:.6f} res={state.residual_sup:.3e} "
                      f"margin={state.cone_margin:.3e} iters={result.iterations}")
            easy = easy + 1 if result.iterations <= config.easy_iters else 0
            if easy >= 2:
                dt = min(dt * config.dt_growth, config.dt_max)
                easy = 0
        else:
            dt *= 0.5
            if dt < config.dt_min:
                diag = diagnosis or (
                    f"continuation stalled at t={state.t:.6f} ({result.code})")
                return ContinuationResult(False, STEP_UNDERFLOW, diag, state,
                                          path, adm, margin)
    else:
        return ContinuationResult(False, STEP_UNDERFLOW,
                                  diagnosis or "step budget exhausted before t=1",
                                  state, path, adm, margin)
    indep = independent_residual(prob, state.u)
    return ContinuationResult(True, PATH_CONVERGED, diagnosis, state, path,
                              adm, margin, independent_residual=indep)


def independent_residual(prob: DeformationProblem, u: ScalarField):
    """Sup over nodes of the pointwise conformal-equation residual against h.

    Goes through the conformal tensor assembly and the eigenvalue route,
    sharing no code with the trace-recurrence deformation residual.
    """
    geo = prob.geometry
    grad, hess, lap = geo.jets(u.values)
    uflat = u.values.ravel()
    gflat = grad.reshape(-1, 3)
    hflat = hess.reshape(-1, 3, 3)
    lflat = lap.ravel()
    hvals = prob.h.values.ravel()
    from .conformal import ConformalJet

    worst = 0.0
    for i in range(uflat.size):
        jet = ConformalJet(u=float(uflat[i]), grad=gflat[i], hess=hflat[i],
                           lap=float(lflat[i]))
        r = equation_residual_point(geo.base, jet, prob.n, prob.k, float(hvals[i]))
        worst = max(worst, abs(r))
    return worst


def write_path_csv(path_records, fileobj_or_path):
    """Emit the accepted-path log as CSV."""
    own = isinstance(fileobj_or_path, (str, bytes)) or hasattr(fileobj_or_path, "__fspath__")
    fh = open(fileobj_or_path, "w", newline="") if own else fileobj_or_path
    try:
        writer = csv.writer(fh)
        writer.writerow(["t", "residual_sup", "cone_margin", "apriori_ratio",
                         "newton_iters", "linear_iters"])
        for rec in path_records:
            writer.writerow([f"{rec.t:.12g}", f"{rec.residual_sup:.12g}",
                             f"{rec.cone_margin:.12g}", f"{rec.apriori_ratio:.12g}",
                             rec.newton_iters, rec.linear_iters])
    finally:
        if own:
            fh.close()


def path_csv_string(path_records):
    buf = io.StringIO()
    write_path_csv(path_records, buf)
    return buf.getvalue()
