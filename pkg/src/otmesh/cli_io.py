"""Command-line scenarios and file formats.

Formats: mesh CSV, legacy VTK structured grid, JSON manifest and flat
``key = value`` config files; see ``docs/formats.md`` for byte-level
examples. Exit codes: 0 success, 1 configuration error, 2 solver error,
3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .analytic_linear import LinearMap, orthogonal_shocks, shock_width_skewness, single_shock, skewness_from_eigenvalues
from .analytic_radial import (
    RadialDensity, RadialMap, boundary_skewness, qs_max_blowup, radial_skewness_profile, region_radii,
    theta_from_boundary,
)
from .bl_sim import BLConfig, run as bl_run
from .density import DensityField
from .errors import OTMeshError
from .feature_analysis import feature_density, sine_feature, sine_feature_study
from .geometry import Ellipse, Grid2D, QualityReport, ellipse_field, quality_report
from .ma_solver import SolverConfig, solve_ma

MESH_COLUMNS = ("i", "j", "xi", "eta", "x", "y", "Qs", "lambda1", "lambda2", "e1x", "e1y")
_INT_COLUMNS = {"i", "j"}


def fmt(v: float) -> str:
    """Scientific notation with 17 significant digits (round-trips every double)."""
    return f"{float(v):.16e}"


class MeshTable(NamedTuple):
    i: np.ndarray
    j: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    x: np.ndarray
    y: np.ndarray
    Qs: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    e1x: np.ndarray
    e1y: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return int(self.i.max()) + 1, int(self.j.max()) + 1

    def grid_field(self, name: str) -> np.ndarray:
        """Column reshaped to the node grid."""
        out = np.empty(self.shape)
        out[self.i, self.j] = getattr(self, name)
        return out


def mesh_table(report: QualityReport) -> MeshTable:
    mesh = report.mesh
    xi, eta = mesh.grid.nodes()
    ii, jj = np.indices(mesh.grid.shape)
    e1 = np.asarray(report.eigen.e1)
    cols = (ii, jj, xi, eta, mesh.xs, mesh.ys, report.qs,
            report.eigen.lambda1, report.eigen.lambda2, e1[..., 0], e1[..., 1])
    return MeshTable(*(np.asarray(c).ravel() for c in cols))


def write_mesh_csv(path, report: QualityReport) -> Path:
    """One row per node in row-major (``i`` slowest) order."""
    t = mesh_table(report)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MESH_COLUMNS)
        for k in range(len(t.i)):
            w.writerow([int(t.i[k]), int(t.j[k])] + [fmt(getattr(t, c)[k]) for c in MESH_COLUMNS[2:]])
    return path


def read_mesh_csv(path) -> MeshTable:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header = tuple(rows[0])
    if header != MESH_COLUMNS:
        raise ValueError(f"unexpected mesh CSV header {header!r}")
    data = rows[1:]
    cols = []
    for k, name in enumerate(MESH_COLUMNS):
        if name in _INT_COLUMNS:
            cols.append(np.array([int(r[k]) for r in data], dtype=int))
        else:
            cols.append(np.array([float(r[k]) for r in data], dtype=float))
    return MeshTable(*cols)


def write_ellipses_csv(path, ellipses: list[Ellipse]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("cx", "cy", "a", "b", "angle"))
        for e in ellipses:
            w.writerow([fmt(e.center[0]), fmt(e.center[1]), fmt(e.semi_axes[0]), fmt(e.semi_axes[1]), fmt(e.angle)])
    return path


def write_vtk(path, report: QualityReport, extra: dict[str, np.ndarray] | None = None, title: str = "otmesh") -> Path:
    """Legacy ASCII STRUCTURED_GRID with point-data scalars.

    VTK orders points with the first index fastest, so nodes are written
    ``j``-major here (the transpose of the CSV order).
    """
    mesh = report.mesh
    nx, ny = mesh.grid.shape
    fields = {"Qs": report.qs, "lambda1": report.eigen.lambda1, "lambda2": report.eigen.lambda2,
              "residual": report.residual}
    fields.update(extra or {})
    path = Path(path)
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII", "DATASET STRUCTURED_GRID",
             f"DIMENSIONS {nx} {ny} 1", f"POINTS {nx * ny} double"]
    xs, ys = mesh.xs.T.ravel(), mesh.ys.T.ravel()
    lines += [f"{fmt(x)} {fmt(y)} {fmt(0.0)}" for x, y in zip(xs, ys)]
    lines.append(f"POINT_DATA {nx * ny}")
    for name, arr in fields.items():
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (nx, ny):
            raise ValueError(f"field {name!r} has shape {arr.shape}, expected {(nx, ny)}")
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [fmt(v) for v in arr.T.ravel()]
    path.write_text("\n".join(lines) + "\n")
    return path


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def write_manifest(path, manifest: dict) -> Path:
    """Pretty-printed JSON with sorted keys; non-finite floats become ``null``."""
    path = Path(path)
    path.write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())


def parse_config(text: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment, blank lines are ignored.

    Keys are normalized to use underscores. Values stay strings; the CLI
    converts them with the matching option's type.
    """
    out: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {n}: expected key = value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValueError(f"line {n}: empty key")
        out[key.replace("-", "_")] = value
    return out


def read_config(path) -> dict[str, str]:
    return parse_config(Path(path).read_text())


# ---------------------------------------------------------------------------
# scenarios

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3
FORMATS = ("csv", "vtk", "json")
SCENARIOS = ("linear-shock", "linear-cross", "radial-blowup", "radial-ring",
             "ma-numeric", "sine-feature", "buckley-leverett")


class ConfigError(ValueError):
    """Invalid scenario parameters; ``field`` names the offending option."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class ScenarioConfig:
    scenario: str
    params: dict
    out: Path
    formats: tuple[str, ...] = FORMATS
    ellipse_stride: int = 4
    verbose: bool = False

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError("scenario", f"unknown scenario {self.scenario!r}")
        bad = [f for f in self.formats if f not in FORMATS]
        if bad:
            raise ConfigError("formats", f"unknown format(s) {', '.join(bad)}")
        if self.ellipse_stride < 1:
            raise ConfigError("ellipse_stride", "must be >= 1")
        for key, v in self.params.items():
            if key in _GRID_KEYS and (not isinstance(v, int) or v < 3):
                raise ConfigError(key, f"grid size must be an integer >= 3, got {v!r}")
            if key in _POSITIVE_KEYS and not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(key, f"must be positive, got {v!r}")
            if key in _NONNEGATIVE_KEYS and not (isinstance(v, (int, float)) and v >= 0):
                raise ConfigError(key, f"must be >= 0, got {v!r}")


_GRID_KEYS = {"n", "grid"}
_POSITIVE_KEYS = {"alpha", "alpha2", "width2", "r_star", "R_star", "tolerance", "dtau", "end_time", "nprime"}
_NONNEGATIVE_KEYS = {"alpha1", "amplitude2", "a", "smoothing"}


class _Writer:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.files: list[str] = []
        cfg.out.mkdir(parents=True, exist_ok=True)

    def _path(self, name):
        p = self.cfg.out / name
        self.files.append(p.name)
        return p

    def report(self, stem: str, report: QualityReport, extra=None):
        if "csv" in self.cfg.formats:
            write_mesh_csv(self._path(f"{stem}_mesh.csv"), report)
            write_ellipses_csv(self._path(f"{stem}_ellipses.csv"), ellipse_field(report, self.cfg.ellipse_stride))
        if "vtk" in self.cfg.formats:
            write_vtk(self._path(f"{stem}_mesh.vtk"), report, extra, title=f"otmesh {self.cfg.scenario} {stem}")

    def table(self, name: str, header, rows):
        if "csv" not in self.cfg.formats:
            return
        with self._path(name).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([v if isinstance(v, (int, np.integer, str)) else fmt(v) for v in r])

    def manifest(self, data: dict):
        data = dict(data, scenario=self.cfg.scenario, parameters=self.cfg.params,
                    files=sorted(self.files + (["manifest.json"] if "json" in self.cfg.formats else [])))
        if "json" in self.cfg.formats:
            write_manifest(self._path("manifest.json"), data)
        return data


def _report_summary(report: QualityReport) -> dict:
    s = report.summary()
    return {"max_qs": s["max_qs"], "max_qs_location": s["max_qs_location"], "max_qs_node": s["max_qs_node"],
            "mean_qs": s["mean_qs"], "mesh_residual": s["max_residual"]}


def _linear_shock(p, w: _Writer) -> dict:
    lm = LinearMap(single_shock(p["alpha"]), p["nprime"])
    report = quality_report(lm.mesh(p["n"]), lm.density_field())
    sk = shock_width_skewness(p["alpha"], lm.theta)
    w.report("linear_shock", report)
    return {"theta": lm.theta, "theta1": lm.theta1, "theta2": lm.theta2,
            "qs_feature": sk.exact, "qs_feature_asymptotic": sk.asymptotic,
            "qs_off_feature": float(skewness_from_eigenvalues(lm.theta1, lm.theta2)),
            "mesh": _report_summary(report)}


def _linear_cross(p, w: _Writer) -> dict:
    d = orthogonal_shocks(p["alpha"], p["amplitude2"], p["width2"])
    lm = LinearMap(d, p["nprime"])
    th1, th2 = lm.theta1, lm.theta2
    on1, off1 = d.rho1(0.0), d.rho1(0.5)
    on2, off2 = d.rho2(0.0), d.rho2(0.5)
    table = {
        "on_feature1_off_feature2": float(skewness_from_eigenvalues(th1 / on1, th2 / off2)),
        "off_feature1_on_feature2": float(skewness_from_eigenvalues(th1 / off1, th2 / on2)),
        "on_both": float(skewness_from_eigenvalues(th1 / on1, th2 / on2)),
        "off_both": float(skewness_from_eigenvalues(th1 / off1, th2 / off2)),
    }
    report = quality_report(lm.mesh(p["n"]), lm.density_field())
    w.report("linear_cross", report)
    return {"theta": lm.theta, "theta1": th1, "theta2": th2, "qs_table": table, "mesh": _report_summary(report)}


def _radial(p, w: _Writer, kind: str) -> dict:
    d = RadialDensity(p["alpha1"], p["alpha2"], p.get("a", 0.0), p["r_star"], p["R_star"])
    m = RadialMap(d)
    r = np.linspace(0.0, d.r_star, 2001)
    prof = radial_skewness_profile(m, r)
    R = m.R(r)
    k = int(np.argmax(prof.exact))
    out = {"theta": m.theta, "theta_boundary": theta_from_boundary(d), "boundary_qs": boundary_skewness(d),
           "region_radii": list(region_radii(d)),
           "max_qs": float(prof.exact[k]), "max_qs_R": float(R[k]), "max_qs_r": float(r[k])}
    if kind == "blowup":
        try:
            out["qs_max_formula"] = qs_max_blowup(d.alpha1)
        except OTMeshError as err:
            out["qs_max_formula"] = None
            out["qs_max_formula_note"] = str(err)
    else:
        out["qs_at_a"] = float(_qs_at_R(m, d.a)) if d.a > 0 else None
    grid = Grid2D.square(p["n"])
    report = quality_report(m.mesh(grid), m.density_field(), theta=m.theta)
    w.report(f"radial_{kind}", report)
    w.table(f"radial_{kind}_profile.csv", ("r", "R", "Qs_approx", "Qs_exact"),
            zip(r, R, prof.approx, prof.exact))
    out["mesh"] = _report_summary(report)
    return out


def _qs_at_R(m: RadialMap, R: float) -> float:
    r = np.sqrt(m.density.F(R) / m.theta)
    return float(radial_skewness_profile(m, r).exact)


NUMERIC_DEFAULTS = {"ring": (10.0, 200.0, 0.25), "blowup": (50.0, 100.0, 0.0)}


def ma_numeric_case(density: str = "ring", grid: int = 60, alpha1=None, alpha2=None, a=None,
                    cfg: SolverConfig = SolverConfig()):
    """Numerical mesh for a radial density on ``(-1/2, 1/2)^2`` (Neumann).

    Returns ``(potential, mesh, report, density, seconds)``.
    """
    if density not in NUMERIC_DEFAULTS:
        raise ConfigError("density", f"expected ring or blowup, got {density!r}")
    d1, d2, da = NUMERIC_DEFAULTS[density]
    alpha1 = d1 if alpha1 is None else alpha1
    alpha2 = d2 if alpha2 is None else alpha2
    a = (da if a is None else a) if density == "ring" else 0.0
    rd = RadialDensity(alpha1, alpha2, a, r_star=None, R_star=None, theta=1.0)
    rho = rd.density_field()
    rho = DensityField(rho.func, None, None, density)
    t0 = time.perf_counter()
    pf, mesh = solve_ma(rho, Grid2D.square(grid), cfg)
    seconds = time.perf_counter() - t0
    report = quality_report(mesh, rho, theta=pf.theta)
    return pf, mesh, report, rd, seconds


def _ma_numeric(p, w: _Writer) -> dict:
    cfg = SolverConfig(dtau=p["dtau"], smoothing=p["smoothing"], tolerance=p["tolerance"], max_iter=p["max_iter"])
    pf, mesh, report, rd, secs = ma_numeric_case(p["density"], p["grid"], p.get("alpha1"), p.get("alpha2"), p.get("a"), cfg)
    pts = [(0.0, 0.0), (rd.a, 0.0), (0.5, 0.0)] if p["density"] == "ring" else [(0.0, 0.0), (0.5, 0.0)]
    samples = report.sample(pts)
    w.report(f"ma_{p['density']}", report)
    return {"theta": pf.theta, "theta_quadrature": pf.info.theta_quadrature, "iterations": pf.info.iterations,
            "residual": pf.info.residual, "runtime_seconds": secs,
            "qs_samples": [{"x": x, "y": y, "qs": float(q)} for (x, y), q in zip(pts, samples)],
            "density_parameters": {"alpha1": rd.alpha1, "alpha2": rd.alpha2, "a": rd.a},
            "mesh": _report_summary(report)}


def _sine_feature(p, w: _Writer) -> dict:
    cfg = SolverConfig(tolerance=p["tolerance"])
    st = sine_feature_study(p["alpha1"], p["alpha2"], p["grid"], p["a"], cfg)
    rho = feature_density(sine_feature(), p["alpha1"], p["alpha2"])
    report = quality_report(st.mesh, rho, theta=st.theta)
    w.report("sine_feature", report)
    lin = st.linear
    w.table("sine_feature_alignment.csv",
            ("i", "j", "x", "y", "curvature_radius", "angle", "lambda_normal", "lambda_tangential",
             "rel_error_normal", "rel_error_tangential", "near_boundary"),
            ((int(i), int(j), x, y, R, an, ln, lt, en, et, int(nb)) for (i, j), (x, y), R, an, ln, lt, en, et, nb in zip(
                lin.nodes, lin.points, st.curvature_radius, lin.angle, lin.lambda_normal, lin.lambda_tangential,
                lin.rel_error_normal, lin.rel_error_tangential, lin.near_boundary)))
    return dict(st.summary(), mesh=_report_summary(report))


def _buckley_leverett(p, w: _Writer) -> dict:
    cfg = BLConfig(n=p["n"], adaptive=not p["fixed_mesh"])
    snaps = tuple(float(s) for s in str(p["snapshots"]).split(",") if s.strip())
    t0 = time.perf_counter()
    states = bl_run(p["end_time"], cfg, snapshot_times=snaps)
    out = {"runtime_seconds": time.perf_counter() - t0, "snapshots": []}
    for s in states:
        stem = f"bl_t{s.t:.4f}".replace(".", "p")
        w.report(stem, s.report, extra={"u": s.u, "rho": s.rho})
        out["snapshots"].append({"t": s.t, "steps": s.steps, "u_min": float(s.u.min()), "u_max": float(s.u.max()),
                                 "rho_max": float(s.rho.max()), "min_det": float(s.report.jacobian.det().min()),
                                 "mesh": _report_summary(s.report)})
    return out


_RUNNERS = {
    "linear-shock": _linear_shock,
    "linear-cross": _linear_cross,
    "radial-blowup": lambda p, w: _radial(p, w, "blowup"),
    "radial-ring": lambda p, w: _radial(p, w, "ring"),
    "ma-numeric": _ma_numeric,
    "sine-feature": _sine_feature,
    "buckley-leverett": _buckley_leverett,
}


def run_scenario(cfg: ScenarioConfig) -> dict:
    """Run one scenario, write its files into ``cfg.out`` and return the manifest."""
    w = _Writer(cfg)
    result = _RUNNERS[cfg.scenario](dict(cfg.params), w)
    return w.manifest(result)


# ---------------------------------------------------------------------------
# command line


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_common(sp):
    sp.add_argument("--out", type=Path, default=None, help="output directory (default $OTMESH_OUT or ./otmesh_out)")
    sp.add_argument("--formats", default=",".join(FORMATS), help="comma list of csv, vtk, json")
    sp.add_argument("--config", type=Path, default=None, help="key = value file; flags given on the command line win")
    sp.add_argument("--ellipse-stride", type=int, default=4)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="otmesh", description="Optimally transported meshes: analytic and numerical scenarios.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="scenario", required=True, parser_class=_Parser)

    sp = sub.add_parser("linear-shock", help="periodic diagonal sech^2 shock (exact map)")
    sp.add_argument("--alpha", type=float, default=50.0)
    sp.add_argument("--n", type=int, default=60)
    sp.add_argument("--nprime", type=int, default=1000)

    sp2 = sub.add_parser("linear-cross", help="two orthogonal shock families (exact map)")
    sp2.add_argument("--alpha", type=float, default=50.0)
    sp2.add_argument("--amplitude2", type=float, default=10.0)
    sp2.add_argument("--width2", type=float, default=25.0)
    sp2.add_argument("--n", type=int, default=60)
    sp2.add_argument("--nprime", type=int, default=1000)

    radial = []
    for name, a in (("radial-blowup", None), ("radial-ring", 0.25)):
        s = sub.add_parser(name, help="exact radially symmetric map on the disc")
        s.add_argument("--alpha1", type=float, default=10.0)
        s.add_argument("--alpha2", type=float, default=200.0)
        if a is not None:
            s.add_argument("--a", type=float, default=a)
        s.add_argument("--r-star", dest="r_star", type=float, default=0.5)
        s.add_argument("--R-star", dest="R_star", type=float, default=0.5)
        s.add_argument("--n", type=int, default=61)
        radial.append(s)

    sm = sub.add_parser("ma-numeric", help="numerical Monge-Ampere mesh for a radial density on the square")
    sm.add_argument("--density", choices=sorted(NUMERIC_DEFAULTS), default="ring")
    sm.add_argument("--grid", type=int, default=60)
    sm.add_argument("--alpha1", type=float, default=None)
    sm.add_argument("--alpha2", type=float, default=None)
    sm.add_argument("--a", type=float, default=None)
    sm.add_argument("--tolerance", type=float, default=1e-3)
    sm.add_argument("--dtau", type=float, default=0.02)
    sm.add_argument("--smoothing", type=float, default=0.1)
    sm.add_argument("--max-iter", dest="max_iter", type=int, default=20000)

    ss = sub.add_parser("sine-feature", help="sinusoidal feature with periodic x and Neumann y")
    ss.add_argument("--alpha1", type=float, default=20.0)
    ss.add_argument("--alpha2", type=float, default=100.0)
    ss.add_argument("--a", type=float, default=0.25)
    ss.add_argument("--grid", type=int, default=60)
    ss.add_argument("--tolerance", type=float, default=1e-3)

    sb = sub.add_parser("buckley-leverett", help="moving-mesh Buckley-Leverett run")
    sb.add_argument("--n", type=int, default=80)
    sb.add_argument("--end-time", dest="end_time", type=float, default=0.44)
    sb.add_argument("--snapshots", default="0.4", help="comma list of intermediate snapshot times")
    sb.add_argument("--fixed-mesh", dest="fixed_mesh", action="store_true")

    for s in [sp, sp2, *radial, sm, ss, sb]:
        _add_common(s)
    return parser


_COMMON = {"out", "formats", "config", "ellipse_stride", "scenario", "verbose"}


def parse_args(argv=None) -> ScenarioConfig:
    """Parse flags, merging a ``--config`` file underneath them."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        try:
            values = read_config(args.config)
        except OSError as err:
            raise ConfigError("config", f"cannot read {args.config}: {err.strerror}") from err
        except ValueError as err:
            raise ConfigError("config", str(err)) from err
        values.pop("scenario", None)
        sub = parser._subparsers._group_actions[0].choices[args.scenario]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown option in config file")
        flags = {a.dest: a for a in sub._actions}
        for k, v in values.items():
            if isinstance(flags[k], argparse._StoreTrueAction):
                values[k] = v.lower() in ("1", "true", "yes", "on")
        sub.set_defaults(**values)
        args = parser.parse_args(argv)
    out = args.out or Path(os.environ.get("OTMESH_OUT", "otmesh_out"))
    formats = tuple(f.strip() for f in args.formats.split(",") if f.strip())
    params = {k: v for k, v in vars(args).items() if k not in _COMMON}
    if args.scenario == "ma-numeric":
        params = {k: v for k, v in params.items() if v is not None}
    return ScenarioConfig(args.scenario, params, Path(out), formats, args.ellipse_stride, args.verbose)


def main(argv=None) -> int:
    try:
        cfg = parse_args(argv)
    except ConfigError as err:
        print(f"otmesh: configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if cfg.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        manifest = run_scenario(cfg)
    except ConfigError as err:
        print(f"otmesh: configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"otmesh: I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    except (OTMeshError, ValueError, FloatingPointError, RuntimeError) as err:
        print(f"otmesh: solver error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_SOLVER
    print(json.dumps(_jsonable({k: v for k, v in manifest.items() if k != "files"}), indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
