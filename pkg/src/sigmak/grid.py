"""Discrete geometries and calculus on them.

Three grid kinds, all with second-order central stencils:

* periodic flat 3-torus, nodes on a uniform N^3 lattice;
* radial grid on flat R^3 for rotationally symmetric functions;
* polar grid on the 3-sphere for functions of the polar angle only.

Radial grids are cell-centred (nodes at half-steps, poles excluded) with
even-reflection ghosts at the axis; below twice the spacing the tangential
term u'/r (resp. cot(theta) u') is replaced by its series limit, a one-sided
second-order estimate of u'' at the pole.  Fields are immutable once built;
all jet and reduction routines are pure and can be mapped over nodes in
parallel.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .conformal import ConformalJet

AXIS_LIMIT_FACTOR = 2.0  # tangential series limit applies below this many spacings

RADIAL_KINDS = ("euclidean_radial", "sphere_polar")


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on the flat 3-torus of period L."""

    n: int
    length: float = 1.0

    def __post_init__(self):
        if self.n < 8 or self.n % 2:
            raise ValueError("torus grid needs an even node count >= 8")
        if self.length <= 0.0:
            raise ValueError("period must be positive")

    @property
    def spacing(self):
        return self.length / self.n

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @property
    def node_count(self):
        return self.n**3

    def coordinates(self):
        """Node coordinate arrays (x, y, z), each shaped like the field."""
        axis = np.arange(self.n) * self.spacing
        return np.meshgrid(axis, axis, axis, indexing="ij")


@dataclass(frozen=True)
class RadialGrid:
    """Uniform cell-centred 1-D grid on (0, extent); extent = r_max or pi."""

    kind: str
    n: int
    extent: float = math.pi

    def __post_init__(self):
        if self.kind not in RADIAL_KINDS:
            raise ValueError(f"kind must be one of {RADIAL_KINDS}")
        if self.n < 8:
            raise ValueError("radial grid needs at least 8 nodes")
        if self.extent <= 0.0:
            raise ValueError("extent must be positive")
        if self.kind == "sphere_polar" and abs(self.extent - math.pi) > 1e-12:
            raise ValueError("sphere_polar grids span (0, pi)")

    @property
    def spacing(self):
        return self.extent / self.n

    @property
    def shape(self):
        return (self.n,)

    @property
    def node_count(self):
        return self.n

    @property
    def nodes(self):
        return (np.arange(self.n) + 0.5) * self.spacing


@dataclass(frozen=True)
class ScalarField:
    """Scalar values attached to the nodes of a grid; immutable."""

    grid: object
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, grid, value=0.0):
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid, fn):
        """Sample fn over node coordinates (x, y, z) or the radial coordinate."""
        if isinstance(grid, TorusGrid):
            return cls(grid, fn(*grid.coordinates()))
        return cls(grid, fn(grid.nodes))


# --- difference operators ---------------------------------------------------


def _torus_jets(grid: TorusGrid, v):
    h = grid.spacing

    def d1(f, ax):
        return (np.roll(f, -1, axis=ax) - np.roll(f, 1, axis=ax)) / (2.0 * h)

    def d2(f, ax):
        return (np.roll(f, -1, axis=ax) - 2.0 * f + np.roll(f, 1, axis=ax)) / (h * h)

    grad = np.stack([d1(v, ax) for ax in range(3)], axis=-1)
    hess = np.empty(v.shape + (3, 3))
    for ax in range(3):
        hess[..., ax, ax] = d2(v, ax)
    for ax in range(3):
        for bx in range(ax + 1, 3):
            mixed = d1(grad[..., ax], bx)  # mixed partials by double application
            hess[..., ax, bx] = mixed
            hess[..., bx, ax] = mixed
    lap = hess[..., 0, 0] + hess[..., 1, 1] + hess[..., 2, 2]
    return grad, hess, lap


def _radial_derivatives(grid: RadialGrid, v):
    """(u', u'') on the 1-D grid with reflection ghosts / one-sided edge."""
    h = grid.spacing
    left = v[0]  # even reflection across the axis (cell-centred)
    if grid.kind == "sphere_polar":
        right = v[-1]  # even reflection across the far pole
    else:
        right = None
    vl = np.concatenate([[left], v])
    vr = np.concatenate([v, [right]]) if right is not None else None
    up = np.empty_like(v)
    upp = np.empty_like(v)
    up[:-1] = (v[1:] - vl[:-2]) / (2.0 * h)
    upp[:-1] = (v[1:] - 2.0 * v[:-1] + vl[:-2]) / (h * h)
    if right is not None:
        up[-1] = (right - v[-2]) / (2.0 * h)
        upp[-1] = (right - 2.0 * v[-1] + v[-2]) / (h * h)
    else:
        # one-sided second order at the outer edge
        up[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
        upp[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / (h * h)
    return up, upp


def _radial_jets(grid: RadialGrid, v):
    """Orthonormal-frame jets of a rotationally symmetric field (unit scale)."""
    h = grid.spacing
    x = grid.nodes
    up, upp = _radial_derivatives(grid, v)
    if grid.kind == "euclidean_radial":
        tang = up / x
        limit_lo = x < AXIS_LIMIT_FACTOR * h
        tang = np.where(limit_lo, (v[1] - v[0]) / (h * h), tang)
    else:
        tang = up / np.tan(x)
        limit_lo = x < AXIS_LIMIT_FACTOR * h
        limit_hi = (math.pi - x) < AXIS_LIMIT_FACTOR * h
        tang = np.where(limit_lo, (v[1] - v[0]) / (h * h), tang)
        tang = np.where(limit_hi, (v[-2] - v[-1]) / (h * h), tang)
    grad = np.zeros(v.shape + (3,))
    grad[..., 0] = up
    hess = np.zeros(v.shape + (3, 3))
    hess[..., 0, 0] = upp
    hess[..., 1, 1] = tang
    hess[..., 2, 2] = tang
    lap = upp + 2.0 * tang
    return grad, hess, lap


def all_jets(field: ScalarField):
    """Gradient, Hessian and Laplacian fields in the orthonormal frame.

    Unit-scale convention: sphere_polar jets are per unit radius (divide by
    rho, rho^2 for a sphere of radius rho).
    """
    if isinstance(field.grid, TorusGrid):
        return _torus_jets(field.grid, field.values)
    return _radial_jets(field.grid, field.values)


def jet_at(field: ScalarField, node):
    """ConformalJet at one node (index tuple on the torus, int on radial grids)."""
    grad, hess, lap = all_jets(field)
    idx = tuple(node) if isinstance(field.grid, TorusGrid) else int(node)
    return ConformalJet(u=float(field.values[idx]), grad=grad[idx],
                        hess=hess[idx], lap=float(lap[idx]))


# --- quadrature and reductions ----------------------------------------------


def quadrature_weights(grid):
    """Positive quadrature weights per node.

    torus: uniform cell volume (midpoint rule); euclidean_radial: shell
    volumes 4 pi r^2 dr; sphere_polar: 4 pi sin^2(theta) dtheta rescaled so
    the unit 3-sphere volume is exactly 2 pi^2.
    """
    if isinstance(grid, TorusGrid):
        return np.full(grid.shape, grid.spacing**3)
    x = grid.nodes
    h = grid.spacing
    if grid.kind == "euclidean_radial":
        return 4.0 * math.pi * x**2 * h
    w = 4.0 * math.pi * np.sin(x) ** 2 * h
    return w * (2.0 * math.pi**2 / w.sum())


def integrate_exp(field: ScalarField, n):
    """(sum_i w_i exp(-(n+1) u_i))^{2/(n+1)} over the field's grid."""
    w = quadrature_weights(field.grid)
    expo = -(n + 1.0) * field.values
    if expo.max() > 700.0:
        idx = np.unravel_index(int(np.argmax(expo)), expo.shape)
        raise OverflowError(f"exp overflow in the volume term at node {idx}")
    total = float((w * np.exp(expo)).sum())
    return total ** (2.0 / (n + 1.0))


FieldNorms = namedtuple("FieldNorms", "sup_u sup_grad_sq sup_hess apriori_ratio")


def field_norms(field: ScalarField):
    """Discrete sup norms (|u|, |grad u|^2, |hess u|_F) plus the estimate ratio.

    The ratio (sup |hess u| + sup |grad u|^2) / (1 + exp(-2 inf u)) is the
    running diagnostic mirroring the interior derivative estimate for the
    curvature equation.
    """
    grad, hess, _ = all_jets(field)
    sup_u = float(np.abs(field.values).max())
    gsq = float((grad**2).sum(axis=-1).max())
    hnorm = float(np.sqrt((hess**2).sum(axis=(-2, -1))).max())
    ratio = (hnorm + gsq) / (1.0 + math.exp(-2.0 * float(field.values.min())))
    return FieldNorms(sup_u, gsq, hnorm, ratio)


# --- snapshots ---------------------------------------------------------------


def save_field(field: ScalarField, path):
    """Plain-text snapshot: header `field <kind> <N> <extent>` then node values.

    Values are written with 17 significant digits (one per line, C order) so
    the reader round-trips bit-exactly.
    """
    grid = field.grid
    if isinstance(grid, TorusGrid):
        header = f"field torus {grid.n} {grid.length:.17g}"
    else:
        header = f"field {grid.kind} {grid.n} {grid.extent:.17g}"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for v in field.values.ravel(order="C"):
            fh.write(f"{v:.17g}\n")


def load_field(path):
    """Read a snapshot written by save_field."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "field":
            raise ValueError(f"malformed field header in {path}")
        _, kind, n, extent = header
        n = int(n)
        extent = float(extent)
        values = np.array([float(line) for line in fh if line.strip()])
    if kind == "torus":
        grid = TorusGrid(n=n, length=extent)
    else:
        grid = RadialGrid(kind=kind, n=n, extent=extent)
    return ScalarField(grid, values.reshape(grid.shape, order="C"))
