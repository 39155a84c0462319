"""Solve-estimate-mark-refine driver, configuration, outputs, and CLI.

One iteration solves the discrete problem on the current mesh, computes
the per-element indicators, records convergence data, marks elements whose
indicator power exceeds half the maximum (strict inequality, threshold
configurable), and refines by conforming longest-edge bisection. Uniform
refinement reuses the same path with every element marked.

File outputs per run: ``records.csv`` (one row per iteration, columns
iteration, ndof, estimator, error_grad, error_pressure, effectivity),
``indicators_<i>.csv``, ``mesh_<i>.vtk`` and ``summary.json``. All output
is deterministic for a fixed configuration.
"""

import argparse
import json
import sys
import time
import warnings
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import assembly, estimator
from .exact import StokesletField, effectivity, error_norms, velocity
from .mesh import MeshError, build_initial_mesh, refine, write_vtk
from .spaces import boundary_values, build_space

RECORD_COLUMNS = (
    "iteration",
    "ndof",
    "estimator",
    "error_grad",
    "error_pressure",
    "effectivity",
)

L_SHAPE_CORNER = (0.5, 0.5)
LOCALIZATION_RADIUS = 0.1

SCHEMES = ("taylor_hood", "stabilized_p1p0")
BC_MODES = ("homogeneous", "exact_stokeslet")
REFINEMENTS = ("adaptive", "uniform")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemConfig:
    domain: object = "unit_square"
    sources: tuple = ()
    p: float = 1.4
    scheme: str = "taylor_hood"
    tau_div: float = 0.0
    tau_t: float = 0.0
    tau_s: float = 1.0 / 12.0
    theta: float = 0.5
    max_iterations: int = 100
    max_ndof: int = 200000
    bc_mode: str = "homogeneous"
    refinement: str = "adaptive"
    output_dir: object = None

    def validate(self):
        try:
            assembly.check_integrability(self.p)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.bc_mode not in BC_MODES:
            raise ConfigError(f"unknown bc_mode {self.bc_mode!r}")
        if self.refinement not in REFINEMENTS:
            raise ConfigError(f"unknown refinement {self.refinement!r}")
        if not 0.0 < self.theta < 1.0:
            raise ConfigError(f"theta must be in (0, 1), got {self.theta}")
        if self.max_iterations < 0 or self.max_ndof <= 0:
            raise ConfigError("max_iterations and max_ndof must be positive")
        if self.scheme == "stabilized_p1p0":
            if self.tau_s <= 0.0:
                raise ConfigError(f"tau_s must be positive, got {self.tau_s}")
            if self.tau_div < 0.0 or self.tau_t < 0.0:
                raise ConfigError("tau_div and tau_t must be nonnegative")
        mesh = build_initial_mesh(self.domain)
        for t, f in self.sources:
            t = np.asarray(t, dtype=float)
            if not (np.all(np.isfinite(t)) and np.all(np.isfinite(f))):
                raise ConfigError(f"non-finite source entry {t}, {f}")
            if not _strictly_inside(mesh, t):
                raise ConfigError(
                    f"source point {tuple(t)} is not strictly inside the domain"
                )
        if self.bc_mode == "exact_stokeslet" and not self.sources:
            raise ConfigError("exact_stokeslet boundary data needs sources")
        return self

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        raw_sources = data.pop("sources", [])
        sources = []
        for entry in raw_sources:
            if isinstance(entry, dict):
                sources.append(
                    (tuple(entry["point"]), tuple(entry["force"]))
                )
            else:
                point, force = entry
                sources.append((tuple(point), tuple(force)))
        domain = data.pop("domain", "unit_square")
        if isinstance(domain, dict):
            domain = ("from_file", domain["from_file"])
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(domain=domain, sources=tuple(sources), **data)

    @classmethod
    def from_json_file(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from None
        return cls.from_dict(data)

    def to_jsonable(self):
        data = asdict(self)
        data["sources"] = [
            {"point": list(t), "force": list(f)} for t, f in self.sources
        ]
        if isinstance(self.domain, tuple):
            data["domain"] = {"from_file": self.domain[1]}
        if data["output_dir"] is not None:
            data["output_dir"] = str(data["output_dir"])
        return data


def _strictly_inside(mesh, x):
    lam = mesh.barycentric(x)
    if not np.any(np.all(lam >= -1e-12, axis=1)):
        return False
    # must stay away from the boundary polyline
    bids = np.nonzero(mesh.boundary_edges)[0]
    a = mesh.vertices[mesh.edges[bids, 0]]
    b = mesh.vertices[mesh.edges[bids, 1]]
    ab = b - a
    t = np.clip(np.sum((x - a) * ab, axis=1) / np.sum(ab**2, axis=1), 0, 1)
    dist = np.hypot(*(x - (a + t[:, None] * ab)).T)
    return bool(dist.min() > 1e-12)


@dataclass(frozen=True)
class ConvergenceRecord:
    iteration: int
    ndof: int
    num_triangles: int
    h_max: float
    estimator: float
    error_grad: float = float("nan")
    error_pressure: float = float("nan")
    effectivity: float = float("nan")
    wall_time: float = 0.0
    localization: float = float("nan")

    @property
    def error_total(self):
        return self.error_grad + self.error_pressure


def _spaces_for(config, mesh):
    if config.scheme == "taylor_hood":
        return build_space(mesh, "vector_p2"), build_space(mesh, "scalar_p1")
    return build_space(mesh, "vector_p1"), build_space(mesh, "scalar_p0")


def _ndof(vspace, pspace):
    # velocity dofs vanish on the boundary, so only interior ones count
    return vspace.num_interior_dofs + pspace.ndof


def _solve_on(config, mesh, reference_field):
    vspace, pspace = _spaces_for(config, mesh)
    if config.scheme == "taylor_hood":
        system = assembly.assemble_taylor_hood(vspace, pspace, config.sources)
    else:
        system = assembly.assemble_stabilized(
            vspace,
            pspace,
            config.sources,
            tau_div=config.tau_div,
            tau_t=config.tau_t,
            tau_s=config.tau_s,
        )
    if config.bc_mode == "exact_stokeslet":
        data = boundary_values(
            vspace, lambda xy: velocity(reference_field, xy)
        )
    else:
        data = None
    solution = assembly.solve(assembly.apply_dirichlet(system, data))
    return solution, _ndof(vspace, pspace)


def localization_points(config):
    """Source points plus the reentrant corner on the L-shape."""
    points = [np.asarray(t, dtype=float) for t, _ in config.sources]
    if config.domain == "l_shape":
        points.append(np.asarray(L_SHAPE_CORNER))
    return points


def ball_fraction(mesh, centers, radius=LOCALIZATION_RADIUS):
    """Fraction of triangles intersecting the union of closed balls."""
    if not centers:
        return float("nan")
    hit = np.zeros(mesh.num_triangles, dtype=bool)
    verts = mesh.vertices[mesh.triangles]
    for center in centers:
        lam = mesh.barycentric(center)
        hit |= np.all(lam >= -1e-12, axis=1)
        for i in range(3):
            a = verts[:, i]
            b = verts[:, (i + 1) % 3]
            ab = b - a
            t = np.clip(
                np.sum((center - a) * ab, axis=1) / np.sum(ab**2, axis=1),
                0.0,
                1.0,
            )
            proj = a + t[:, None] * ab
            hit |= np.hypot(*(center - proj).T) <= radius
    return float(hit.mean())


def _velocity_at_vertices(solution):
    nv = solution.mesh.num_vertices
    return np.column_stack(
        [solution.velocity[0:2 * nv:2], solution.velocity[1:2 * nv:2]]
    )


def _pressure_at_vertices(solution):
    mesh = solution.mesh
    if solution.pressure_space.family == "p1":
        return solution.pressure[: mesh.num_vertices]
    offsets, tids = mesh.vertex_triangles()
    # one-sided rule: lowest-indexed incident triangle
    return solution.pressure[tids[offsets[:-1]]]


def _emit_iteration(out_dir, iteration, mesh, solution, field):
    estimator.write_indicator_csv(
        field, out_dir / f"indicators_{iteration}.csv"
    )
    write_vtk(
        mesh,
        out_dir / f"mesh_{iteration}.vtk",
        cell_data={"eta_pow": field.eta_pow},
        point_data={
            "velocity": _velocity_at_vertices(solution),
            "pressure": _pressure_at_vertices(solution),
        },
    )


def _format_value(value):
    return f"{value:.12e}"


def write_records_csv(records, path):
    with open(path, "w") as fh:
        fh.write(",".join(RECORD_COLUMNS) + "\n")
        for rec in records:
            fh.write(
                f"{rec.iteration},{rec.ndof},"
                f"{_format_value(rec.estimator)},"
                f"{_format_value(rec.error_grad)},"
                f"{_format_value(rec.error_pressure)},"
                f"{_format_value(rec.effectivity)}\n"
            )


def read_records_csv(path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    data = np.atleast_1d(data)
    return [
        ConvergenceRecord(
            iteration=int(row["iteration"]),
            ndof=int(row["ndof"]),
            num_triangles=-1,
            h_max=float("nan"),
            estimator=float(row["estimator"]),
            error_grad=float(row["error_grad"]),
            error_pressure=float(row["error_pressure"]),
            effectivity=float(row["effectivity"]),
        )
        for row in data
    ]


def _run(config, mark_all, progress=None):
    config.validate()
    mesh = build_initial_mesh(config.domain)
    reference = (
        StokesletField(config.sources)
        if config.bc_mode == "exact_stokeslet"
        else None
    )
    out_dir = None
    if config.output_dir is not None:
        out_dir = Path(config.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    loc_points = localization_points(config)
    tau_div = config.tau_div if config.scheme == "stabilized_p1p0" else 0.0

    records = []
    iteration = 0
    angle_floor = 0.2 * float(mesh.min_angles().min())
    while True:
        tic = time.perf_counter()
        if float(mesh.min_angles().min()) < angle_floor:
            # bisection theory keeps angles above a fixed fraction of the
            # initial minimum; tripping this means broken shape regularity
            warnings.warn(
                f"minimum angle fell below {angle_floor:.2f} degrees "
                f"at iteration {iteration}"
            )
        solution, ndof = _solve_on(config, mesh, reference)
        field = estimator.compute_indicators(
            solution, config.sources, config.p, tau_div=tau_div
        )
        eta = estimator.global_estimator(field)
        err_grad = err_pres = eff = float("nan")
        if reference is not None:
            norms = error_norms(solution, reference, config.p)
            err_grad, err_pres = norms.grad, norms.pressure
            eff = effectivity(eta, norms.total)
        record = ConvergenceRecord(
            iteration=iteration,
            ndof=ndof,
            num_triangles=mesh.num_triangles,
            h_max=float(mesh.diameters().max()),
            estimator=eta,
            error_grad=err_grad,
            error_pressure=err_pres,
            effectivity=eff,
            wall_time=time.perf_counter() - tic,
            localization=ball_fraction(mesh, loc_points),
        )
        records.append(record)
        if out_dir is not None:
            _emit_iteration(out_dir, iteration, mesh, solution, field)
        if progress is not None:
            progress(record)
        if iteration >= config.max_iterations or ndof >= config.max_ndof:
            break
        if mark_all:
            marked = np.arange(mesh.num_triangles)
        else:
            marked = estimator.mark(field, theta=config.theta)
        try:
            mesh = refine(mesh, marked)
        except MeshError as exc:
            # deep refinement at the singular points can exhaust double
            # precision (bisection midpoints collide with endpoints);
            # stop with the completed iterations recorded
            warnings.warn(
                f"refinement stopped at iteration {iteration}: {exc}"
            )
            break
        iteration += 1

    if out_dir is not None:
        write_records_csv(records, out_dir / "records.csv")
        _write_summary(config, records, out_dir / "summary.json")
    return records


def run_adaptive(config, progress=None):
    """Adaptive loop driven by the marking rule; returns the records."""
    if config.refinement == "uniform":
        return _run(config, mark_all=True, progress=progress)
    return _run(config, mark_all=False, progress=progress)


def run_uniform(config, progress=None):
    """Same loop with every element marked each iteration."""
    return _run(config, mark_all=True, progress=progress)


# -- convergence-rate fitting ----------------------------------------------


def _record_quantity(record, quantity):
    if quantity == "estimator":
        return record.estimator
    if quantity == "error":
        return record.error_total
    if quantity == "error_grad":
        return record.error_grad
    if quantity == "error_pressure":
        return record.error_pressure
    raise ValueError(f"unknown quantity {quantity!r}")


def fit_rate(records, quantity="estimator", window=None):
    """Least-squares slope of log(quantity) against log(Ndof).

    window selects that many trailing records; None uses all of them.
    Raises ValueError on fewer than 3 records or nonpositive values.
    """
    if window is not None:
        records = records[-window:]
    if len(records) < 3:
        raise ValueError("rate fit needs at least 3 records")
    ndof = np.array([r.ndof for r in records], dtype=float)
    values = np.array(
        [_record_quantity(r, quantity) for r in records], dtype=float
    )
    if np.any(~np.isfinite(values)) or np.any(values <= 0.0):
        raise ValueError(
            f"nonpositive or missing {quantity} values in the fit window"
        )
    slope = np.polyfit(np.log(ndof), np.log(values), 1)[0]
    return float(slope)


def trailing_decade_window(records):
    """Record count covering the trailing decade of Ndof, at least 10."""
    ndof = np.array([r.ndof for r in records], dtype=float)
    in_decade = int(np.sum(ndof >= ndof[-1] / 10.0))
    return min(len(records), max(10, in_decade))


def _write_summary(config, records, path):
    window = trailing_decade_window(records)
    summary = {
        "config": config.to_jsonable(),
        "iterations": len(records),
        "final_ndof": records[-1].ndof,
        "final_estimator": records[-1].estimator,
        "rate_window": window,
        "slopes": {},
    }
    for quantity in ("estimator", "error"):
        try:
            summary["slopes"][quantity] = fit_rate(
                records, quantity, window=window
            )
        except ValueError:
            summary["slopes"][quantity] = None
    eff = records[-1].effectivity
    summary["final_effectivity"] = None if np.isnan(eff) else eff
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- command line interface -------------------------------------------------


def _cmd_run(args):
    config = ProblemConfig.from_json_file(args.config)
    if args.out is not None:
        config = replace(config, output_dir=args.out)
    if args.max_ndof is not None:
        config = replace(config, max_ndof=args.max_ndof)
    if config.output_dir is None:
        config = replace(config, output_dir="out")
    progress = None
    if not args.quiet:
        def progress(rec):
            print(
                f"iter {rec.iteration:3d}  ndof {rec.ndof:8d}  "
                f"estimator {rec.estimator:.6e}  "
                f"effectivity {rec.effectivity:.3f}"
            )
    records = run_adaptive(config, progress=progress)
    if not args.quiet:
        print(f"wrote {Path(config.output_dir) / 'records.csv'}")
    return 0


def _cmd_validate(args):
    config = ProblemConfig.from_json_file(args.config)
    config.validate()
    print(f"config {args.config} is valid "
          f"({config.scheme}, p={config.p}, {len(config.sources)} sources)")
    return 0


def _cmd_rates(args):
    records = read_records_csv(args.records)
    window = args.window
    print(f"{'quantity':<16}{'slope':>10}")
    for quantity in ("estimator", "error", "error_grad", "error_pressure"):
        try:
            slope = fit_rate(records, quantity, window=window)
            print(f"{quantity:<16}{slope:>10.4f}")
        except ValueError:
            print(f"{quantity:<16}{'n/a':>10}")
    return 0


def cli_main(argv=None):
    parser = argparse.ArgumentParser(
        prog="stokesdirac",
        description="Adaptive Stokes solver with point forces",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an adaptive or uniform study")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument("--max-ndof", type=int, default=None)
    run_p.add_argument("--quiet", action="store_true")
    run_p.set_defaults(func=_cmd_run)

    val_p = sub.add_parser("validate", help="check a configuration file")
    val_p.add_argument("--config", required=True)
    val_p.set_defaults(func=_cmd_validate)

    rates_p = sub.add_parser("rates", help="fit slopes from records.csv")
    rates_p.add_argument("records")
    rates_p.add_argument("--window", type=int, default=10)
    rates_p.set_defaults(func=_cmd_rates)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError, assembly.SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(cli_main())
