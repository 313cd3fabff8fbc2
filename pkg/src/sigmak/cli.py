"""Command line entry point: property suites, exact-solution verifiers, solves.

    sigmak verify|bubble|barrier|solve [--config FILE] [--seed N] [--out DIR]
           [--model sphere|torus|radial] [--n N] [--k K] [--h EXPR|@file]
           [--nodes N] [--tol T] [--auto-constants] ...

Every command writes a machine-readable JSON report (plus CSV artifacts) to
the output directory.  Reports are reproducible: the same config and seed
produce a byte-identical report body; no timestamps are embedded.  Exit
codes: 0 all checks pass, 1 check failure, 2 usage error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import checks, exactsol
from .continuation import (
    ContinuationResult,
    DeformationProblem,
    ModelGeometry,
    SolverConfig,
    continuation_solve,
    write_path_csv,
)
from .exprs import ExpressionError, parse_h_expression
from .grid import ScalarField, field_norms, load_field, save_field

EXIT_PASS = 0
EXIT_CHECK_FAILURE = 1
EXIT_USAGE = 2
EXIT_SOLVER_FAILURE = 3

BARRIER_GRID_POINTS = 200
BARRIER_GRID_RANGE = (1e-4, 0.5)


class UsageError(ValueError):
    pass


@dataclasses.dataclass
class RunConfig:
    command: str
    model: str = "sphere"
    n: int = 3
    k: int = 2
    tau: float = 2.0
    h: str = "3"
    nodes: int = 200
    radius: float = 1.0
    period: float = 1.0
    rmax: float = 1.0
    volume_normalized: bool = False
    tol: float = 1e-8
    seed: int = 0
    samples: int = 10_000
    out: str = "sigmak_out"
    auto_constants: bool = False
    deltas: tuple = (0.05, 0.1, 0.2)
    corrupt_hook: bool = False

    def hashed(self):
        """Canonical dict for the config hash; the output path is excluded."""
        d = dataclasses.asdict(self)
        d.pop("out")
        d["deltas"] = list(self.deltas)
        return d


def config_hash(cfg: RunConfig):
    blob = json.dumps(cfg.hashed(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclasses.dataclass
class ReportDocument:
    command: str
    config: dict
    config_hash: str
    checks: list
    artifacts: list

    @property
    def overall(self):
        return "pass" if all(c["status"] == "pass" for c in self.checks) else "fail"

    def body(self):
        return json.dumps(
            {"command": self.command, "config": self.config,
             "config_hash": self.config_hash, "checks": self.checks,
             "artifacts": self.artifacts, "overall": self.overall},
            sort_keys=True, indent=2) + "\n"


def _record(name, passed, value, tolerance, detail=""):
    return {"name": name, "status": "pass" if passed else "fail",
            "value": float(value), "tolerance": float(tolerance), "detail": detail}


def _report(cfg, records, artifacts):
    return ReportDocument(command=cfg.command, config=cfg.hashed(),
                          config_hash=config_hash(cfg), checks=records,
                          artifacts=artifacts)


def _emit(report: ReportDocument, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "report.json")
    with open(path, "w") as fh:
        fh.write(report.body())
    for c in report.checks:
        print(f"[{c['status']}] {c['name']}: {c['value']:.6g} (tol {c['tolerance']:g})")
    print(f"overall: {report.overall}  report: {path}")
    return path


# --- commands -----------------------------------------------------------------


def cmd_verify(cfg: RunConfig):
    records = [
        dataclasses.asdict(r) | {"status": r.status}
        for r in checks.run_verify_suites(seed=cfg.seed, samples=cfg.samples,
                                          corrupt=cfg.corrupt_hook)
    ]
    for r in records:
        r.pop("passed")
    report = _report(cfg, records, [])
    return report, EXIT_PASS if report.overall == "pass" else EXIT_CHECK_FAILURE


def cmd_bubble(cfg: RunConfig):
    n, k, tau = cfg.n, cfg.k, cfg.tau
    if not 1 <= k <= n <= 6:
        raise UsageError(f"bubble verification needs 1 <= k <= n <= 6, got n={n} k={k}")
    records = []
    if cfg.auto_constants:
        try:
            const, rep = exactsol.resolve_constant(n, k, tau, method="symbolic")
        except ValueError as exc:
            records.append(_record("constant resolution", False, math.nan, 0.0, str(exc)))
            report = _report(cfg, records, [])
            return report, EXIT_CHECK_FAILURE
        rejected = {name: r for name, r in rep.items() if not r["accepted"]}
        detail = (f"resolved by symbolic radial plug-in: c = {const:.12g}; "
                  f"rejected candidates: "
                  + ", ".join(f"{name} (c={r['constant']:.6g}, residual={r['residual']:.3g}, "
                              f"cone margin={r['cone_margin']:.3g})"
                              for name, r in rejected.items()))
        records.append(_record("constant resolution", True, const, 0.0, detail))
    else:
        const = exactsol.liouville_constant(n, tau)
        records.append(_record("constant resolution", True, const, 0.0,
                               "frozen constants table (no --auto-constants)"))
    params = exactsol.BubbleParams.normalized(n, k, tau)
    samples = exactsol.default_bubble_samples(params, count=100)
    residual = exactsol.verify_liouville(params, samples)
    records.append(_record("bubble curvature residual", residual < 1e-9, residual, 1e-9,
                           f"max |sigma_{k} + target| deviation over {len(samples)} radii, "
                           f"normalized target {exactsol.bubble_target(params):.12g}"))
    margin = exactsol.bubble_cone_margin(params, samples[:: max(1, len(samples) // 16)])
    records.append(_record("bubble cone membership", margin > 0.0, margin, 0.0,
                           "min Gamma_k^+ margin of -lambda over sampled radii"))
    report = _report(cfg, records, [])
    return report, EXIT_PASS if report.overall == "pass" else EXIT_CHECK_FAILURE


def cmd_barrier(cfg: RunConfig):
    records = []
    artifacts = []
    os.makedirs(cfg.out, exist_ok=True)
    for delta in cfg.deltas:
        try:
            params = exactsol.BarrierParams(delta=delta)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        grid = np.geomspace(*BARRIER_GRID_RANGE, BARRIER_GRID_POINTS)
        scan = exactsol.barrier_scan(params, grid)
        fine = exactsol.barrier_scan(params, np.geomspace(*BARRIER_GRID_RANGE,
                                                          4 * BARRIER_GRID_POINTS))
        below = scan.grid <= scan.r1
        signs_ok = bool(np.all(scan.sigma1[below] < 0.0) and np.all(scan.sigma2[below] < 0.0))
        records.append(_record(f"barrier exit radius, delta={delta:g}", scan.r1 > 0.0,
                               scan.r1, 0.0, "largest grid radius outside the negative cone"))
        records.append(_record(f"barrier sign pattern, delta={delta:g}", signs_ok,
                               float(max(scan.sigma1[below].max(), scan.sigma2[below].max())),
                               0.0, "max of sigma_1, sigma_2 below r1 (must be < 0)"))
        drift = abs(fine.r1 - scan.r1) / scan.r1
        records.append(_record(f"barrier refinement stability, delta={delta:g}",
                               drift < 0.05, drift, 0.05,
                               f"relative r1 drift under a 4x finer grid ({fine.r1:.6g})"))
        records.append(_record(f"barrier model agreement, delta={delta:g}",
                               bool(np.all(scan.model_dev <= scan.fit_constant
                                           * scan.grid * scan.d1 + 1e-30)),
                               scan.fit_constant, 0.0,
                               "fitted C with |lambda_full - lambda_model| <= C r D1"))
        name = f"barrier_delta_{delta:g}.csv"
        with open(os.path.join(cfg.out, name), "w") as fh:
            fh.write("r,D1,D2,sigma1,sigma2,lam_full_1,lam_full_2,lam_full_3\n")
            for i, r in enumerate(scan.grid):
                fh.write(f"{r:.12g},{scan.d1[i]:.12g},{scan.d2[i]:.12g},"
                         f"{scan.sigma1[i]:.12g},{scan.sigma2[i]:.12g},"
                         f"{scan.full_eigs[i,0]:.12g},{scan.full_eigs[i,1]:.12g},"
                         f"{scan.full_eigs[i,2]:.12g}\n")
        artifacts.append(name)
    report = _report(cfg, records, artifacts)
    return report, EXIT_PASS if report.overall == "pass" else EXIT_CHECK_FAILURE


def _build_geometry(cfg: RunConfig):
    if cfg.model == "sphere":
        return ModelGeometry.sphere(cfg.nodes, radius=cfg.radius,
                                    volume_normalized=cfg.volume_normalized)
    if cfg.model == "torus":
        return ModelGeometry.torus(cfg.nodes, length=cfg.period)
    if cfg.model == "radial":
        return ModelGeometry.radial(cfg.nodes, r_max=cfg.rmax)
    raise UsageError(f"unknown model {cfg.model!r}")


def _build_h(cfg: RunConfig, geometry: ModelGeometry):
    if cfg.h.startswith("@"):
        fld = load_field(cfg.h[1:])
        if fld.grid != geometry.grid:
            raise UsageError("h field file does not match the model grid")
        return fld
    try:
        fn = parse_h_expression(cfg.h)
    except ExpressionError as exc:
        raise UsageError(str(exc)) from None
    coords = geometry.coordinate_arrays()
    names = ("x", "y", "z") if len(coords) == 3 else \
        (("theta",) if geometry.name == "sphere" else ("r",))
    values = fn(**dict(zip(names, coords))) * np.ones(geometry.grid.shape)
    if np.min(values) <= 0.0:
        raise UsageError("prescribed h must be positive on the whole model")
    return ScalarField(geometry.grid, values)


def cmd_solve(cfg: RunConfig):
    if cfg.n != 3:
        raise UsageError("solves run on 3-dimensional model geometries")
    if cfg.k not in (2, 3):
        raise UsageError("solves support k = 2 or k = 3")
    geometry = _build_geometry(cfg)
    h = _build_h(cfg, geometry)
    prob = DeformationProblem(geometry=geometry, h=h, n=cfg.n, k=cfg.k)
    config = SolverConfig(newton_tol=min(cfg.tol, 1e-9))
    result: ContinuationResult = continuation_solve(prob, config)
    os.makedirs(cfg.out, exist_ok=True)
    artifacts = []
    write_path_csv(result.path, os.path.join(cfg.out, "path.csv"))
    artifacts.append("path.csv")
    save_field(result.final_state.u, os.path.join(cfg.out, "solution.field"))
    artifacts.append("solution.field")

    records = [
        _record("background negative k-admissible", result.background_admissible,
                result.background_margin, 0.0,
                result.diagnosis or "cone margin of lambda(-E_g)"),
        _record("continuation reached t=1", result.success,
                result.final_state.t, 1.0, result.diagnosis or result.status),
    ]
    st = result.final_state
    if result.success:
        records.append(_record("final residual", st.residual_sup < cfg.tol,
                               st.residual_sup, cfg.tol, "sup norm of the deformation residual"))
        records.append(_record("cone margin", st.cone_margin > 0.0, st.cone_margin, 0.0,
                               "min over nodes of the sigma_j margins"))
        records.append(_record("independent curvature residual",
                               result.independent_residual < 1e-7,
                               result.independent_residual, 1e-7,
                               "pointwise conformal re-check against h (eigenvalue route)"))
        norms = field_norms(st.u)
        records.append(_record("derivative-estimate ratio", math.isfinite(norms.apriori_ratio),
                               norms.apriori_ratio, math.inf,
                               f"sup|u|={norms.sup_u:.6g}, sup|grad u|^2={norms.sup_grad_sq:.6g}, "
                               f"sup|hess u|={norms.sup_hess:.6g}"))
        records.append(_record("oscillation max u - min u", True,
                               float(st.u.values.max() - st.u.values.min()), math.inf,
                               "log-scale solution oscillation"))
    report = _report(cfg, records, artifacts)
    if not result.success:
        return report, EXIT_SOLVER_FAILURE
    return report, EXIT_PASS if report.overall == "pass" else EXIT_CHECK_FAILURE


# --- argument handling ----------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="sigmak", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("verify", "bubble", "barrier", "solve"):
        q = sub.add_parser(name)
        q.add_argument("--config", help="key = value file mirroring the flags; flags win")
        q.add_argument("--seed", type=int)
        q.add_argument("--out")
        q.add_argument("--model", choices=("sphere", "torus", "radial"))
        q.add_argument("--n", type=int)
        q.add_argument("--k", type=int)
        q.add_argument("--h", help="expression over coordinates, or @file for a snapshot")
        q.add_argument("--nodes", type=int)
        q.add_argument("--tol", type=float)
        q.add_argument("--tau", type=float)
        q.add_argument("--radius", type=float)
        q.add_argument("--period", type=float)
        q.add_argument("--rmax", type=float)
        q.add_argument("--samples", type=int)
        q.add_argument("--deltas", help="comma-separated list for barrier scans")
        q.add_argument("--auto-constants", action="store_true", default=None)
        q.add_argument("--volume-normalized", action="store_true", default=None)
        q.add_argument("--corrupt-hook", action="store_true", default=None,
                       help="negative-control hook: corrupt sigma_k and expect failure")
    return p


def load_config_file(path):
    """Parse `key = value` lines; '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}
_BOOL_FIELDS = ("volume_normalized", "auto_constants", "corrupt_hook")


def _coerce(key, value):
    if key in _BOOL_FIELDS:
        if isinstance(value, bool):
            return value
        return str(value).lower() in ("1", "true", "yes", "on")
    if key == "deltas":
        if isinstance(value, (tuple, list)):
            return tuple(float(v) for v in value)
        return tuple(float(v) for v in str(value).split(","))
    if key in ("n", "k", "nodes", "seed", "samples"):
        return int(value)
    if key in ("tau", "tol", "radius", "period", "rmax"):
        return float(value)
    return str(value)


def make_config(args):
    cfg = RunConfig(command=args.command)
    file_values = load_config_file(args.config) if args.config else {}
    for key, value in file_values.items():
        if key not in _FIELD_TYPES or key == "command":
            raise UsageError(f"unknown config key {key!r}")
        setattr(cfg, key, _coerce(key, value))
    for key in _FIELD_TYPES:
        if key == "command":
            continue
        flag = getattr(args, key, None)
        if flag is not None:
            setattr(cfg, key, _coerce(key, flag))
    return cfg


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = make_config(args)
        if cfg.command == "verify":
            report, code = cmd_verify(cfg)
        elif cfg.command == "bubble":
            report, code = cmd_bubble(cfg)
        elif cfg.command == "barrier":
            report, code = cmd_barrier(cfg)
        elif cfg.command == "solve":
            report, code = cmd_solve(cfg)
        else:  # pragma: no cover - argparse enforces the choices
            raise UsageError(f"unknown command {cfg.command!r}")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _emit(report, cfg.out)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
