"""Thin-tube asymptotics: eps sweeps, power-law fits and tube traces.

A sweep solves the Steklov problem on a family of dumbbells with shrinking
tube width and compares ``sigma_k / eps`` with the eigenvalues ``mu_k`` of
the one-dimensional limit problem with dynamical boundary conditions.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import fem, geometry, limit1d, meshgen
from .errors import InvalidSpec, NonPositiveValue, OutsideTube, SteklovError, ZeroFunction
from .geometry import DumbbellSpec
from .linalg import DEFAULT_SETTINGS


@dataclass(frozen=True)
class RateFit:
    gamma: float
    C: float
    residual: float
    n_points: int
    successive: tuple = ()   # local exponents between consecutive points

    def to_dict(self):
        return {"gamma": self.gamma, "C": self.C, "residual": self.residual,
                "n_points": self.n_points, "successive": list(self.successive)}


def fit_rate(eps, sigma) -> RateFit:
    """Least-squares fit of ``sigma = C eps**gamma`` in log-log coordinates."""
    e = np.asarray(eps, float)
    s = np.asarray(sigma, float)
    if e.shape != s.shape or e.ndim != 1:
        raise InvalidSpec("eps and sigma must be 1-D sequences of equal length")
    if len(e) < 3:
        raise InvalidSpec("a rate fit needs at least 3 points")
    if np.any(e <= 0) or np.any(s <= 0) or not np.all(np.isfinite(s)):
        raise NonPositiveValue("rate fit needs strictly positive eps and sigma")
    x, y = np.log(e), np.log(s)
    A = np.column_stack([x, np.ones_like(x)])
    (gamma, logC), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ np.array([gamma, logC]) - y) ** 2)))
    local = tuple(float(v) for v in np.diff(y) / np.diff(x))
    return RateFit(float(gamma), float(math.exp(logC)), resid, len(e), local)


@dataclass
class TubeTrace:
    x: np.ndarray
    values: np.ndarray
    k: int
    L: float

    def __post_init__(self):
        if len(self.x) < 64:
            raise InvalidSpec("a tube trace needs at least 64 samples")
        if not np.all(np.isfinite(self.values)):
            raise InvalidSpec("tube trace has non-finite samples")

    def to_dict(self):
        return {"k": self.k, "L": self.L, "x": self.x.tolist(), "values": self.values.tolist()}


def _midline_row(mesh):
    grid = mesh.tube_grid
    if grid is None or grid.shape[1] % 2 == 0:
        # grid has n_y + 1 columns; an odd column count puts a node row on x2 = 0
        raise OutsideTube("mesh has no tube grid with a node row on the midline")
    row = grid[:, grid.shape[1] // 2]
    pts = mesh.nodes[row]
    if np.max(np.abs(pts[:, 1])) > 1e-12 * max(1.0, np.ptp(pts[:, 0])):
        raise OutsideTube("middle grid row does not lie on x2 = 0")
    return row, pts[:, 0]


def trace_tube(result: fem.SteklovResult, k, n_samples=128) -> TubeTrace:
    """Sample eigenfunction ``k`` along the tube midline on a uniform grid.

    The midline is a row of grid edges, so the P1 interpolant restricted to
    it is piecewise linear in the node values of that row.
    """
    if not 0 <= k < result.modes.shape[1]:
        raise InvalidSpec(f"k={k} exceeds the computed modes")
    row, xs = _midline_row(result.mesh)
    x = np.linspace(xs[0], xs[-1], int(n_samples))
    if x[0] < xs[0] - 1e-12 or x[-1] > xs[-1] + 1e-12:
        raise OutsideTube("sample outside the tube block")
    vals = np.interp(x, xs, result.modes[row, k])
    return TubeTrace(x=x, values=vals, k=k, L=float(xs[-1] - xs[0]))


def _l2(x, v):
    return math.sqrt(float(np.trapezoid(v * v, x)))


def compare_eigenfunctions(trace: TubeTrace, limit: limit1d.Spectrum1D, k) -> float:
    """Relative L2 error between the midline trace and limit eigenfunction ``k`` (unit-norm, sign-resolved)."""
    grid = limit.grid
    if abs((grid[-1] - grid[0]) - trace.L) > 1e-8 * max(1.0, trace.L):
        raise InvalidSpec("trace and limit spectrum live on different tube lengths")
    # limit grid is centred on 0; trace abscissae are mapped onto it
    x = trace.x - trace.x[0] + grid[0]
    V = np.interp(x, grid, limit.functions[:, k])
    u = np.asarray(trace.values, float)
    nu, nv = _l2(x, u), _l2(x, V)
    if nu < 1e-12 or nv < 1e-12:
        raise ZeroFunction("cannot normalize a vanishing function")
    u, V = u / nu, V / nv
    if np.trapezoid(u * V, x) < 0:
        u = -u
    return _l2(x, u - V) / _l2(x, V)


def disk_plateaus(result: fem.SteklovResult, k):
    """Mean of eigenfunction ``k`` over the interior nodes of each disk region."""
    mesh = result.mesh
    interior = np.zeros(mesh.n_nodes, bool)
    interior[mesh.interior_nodes] = True
    out = []
    for tag in ("D1", "D2"):
        idx = np.asarray(mesh.regions[tag])
        idx = idx[interior[idx]]
        out.append(float(np.mean(result.modes[idx, k])))
    return tuple(out)


def plateau_gap(result: fem.SteklovResult, limit: limit1d.Spectrum1D, k):
    """Largest gap between the disk plateaus and the limit endpoint values of mode ``k``.

    The FEM modes have unit norm on the whole boundary, where the tube counts
    twice (both sides), so they are compared with ``V_k / sqrt(2)``.  The sign
    is taken from the midline trace.
    """
    trace = trace_tube(result, k)
    x = trace.x - trace.x[0] + limit.grid[0]
    V = limit.functions[:, k]
    sgn = 1.0 if np.trapezoid(trace.values * np.interp(x, limit.grid, V), x) >= 0 else -1.0
    c1, c2 = disk_plateaus(result, k)
    ends = np.array([V[0], V[-1]]) / math.sqrt(2.0)
    return float(np.max(np.abs(sgn * np.array([c1, c2]) - ends)))


def default_h_rule(spec: DumbbellSpec):
    h = min(0.1, spec.L / 60)
    return lambda eps: h


@dataclass
class SweepRecord:
    eps: float
    sigma: np.ndarray
    mu1: float
    area: float
    perimeter: float
    mesh_stats: dict
    compare_errors: dict = field(default_factory=dict)   # k -> relative L2 error of the midline trace
    plateau_gaps: dict = field(default_factory=dict)
    traces: dict = field(default_factory=dict)

    def to_dict(self, with_traces=True):
        d = {"eps": self.eps, "sigma": [float(v) for v in self.sigma], "mu1": self.mu1, "area": self.area,
             "perimeter": self.perimeter, "mesh": self.mesh_stats,
             "compare_errors": {str(k): v for k, v in self.compare_errors.items()},
             "plateau_gaps": {str(k): v for k, v in self.plateau_gaps.items()}}
        if with_traces:
            d["traces"] = {str(k): t.to_dict() for k, t in self.traces.items()}
        return d


@dataclass
class SweepReport:
    spec_base: DumbbellSpec
    k_max: int
    records: list
    limit: limit1d.Spectrum1D
    aborted: bool = False
    error: str | None = None

    def __post_init__(self):
        eps = [r.eps for r in self.records]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise InvalidSpec("sweep records must have strictly decreasing eps")

    @property
    def eps(self):
        return np.array([r.eps for r in self.records])

    @property
    def mu(self):
        """Limit eigenvalues mu_0 .. mu_k_max."""
        return self.limit.values

    def sigma(self, k):
        return np.array([r.sigma[k] for r in self.records])

    def fits(self):
        return {k: fit_rate(self.eps, self.sigma(k)) for k in range(1, self.k_max + 1)}

    def relative_errors(self, k):
        """``sigma_k / (mu_k eps) - 1`` per record."""
        return self.sigma(k) / (self.mu[k] * self.eps) - 1.0

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps"] + [f"sigma_{k}" for k in range(self.k_max + 1)] + ["mu1", "area", "perimeter"])
        for r in self.records:
            w.writerow([_g(r.eps)] + [_g(v) for v in r.sigma] + [_g(r.mu1), _g(r.area), _g(r.perimeter)])
        return buf.getvalue()

    def plot_data_csv(self):
        """eps against sigma_k/eps next to the limit reference mu_k."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "k", "sigma_over_eps", "mu_k"])
        for r in self.records:
            for k in range(1, self.k_max + 1):
                w.writerow([_g(r.eps), k, _g(r.sigma[k] / r.eps), _g(self.mu[k])])
        return buf.getvalue()

    def to_json(self):
        try:
            fits = {str(k): f.to_dict() for k, f in self.fits().items()}
        except SteklovError as exc:
            fits = {"error": str(exc)}
        return json.dumps({
            "spec": self.spec_base.to_dict(),
            "k_max": self.k_max,
            "mu": [float(v) for v in self.mu],
            "records": [r.to_dict() for r in self.records],
            "fits": fits,
            "aborted": self.aborted,
            "error": self.error,
        }, indent=1)


def _g(v):
    return format(float(v), ".17g")


def limit_for(spec: DumbbellSpec, k_max, N=4096):
    """Limit problem with dynamical boundary conditions matching ``spec`` (full disk perimeters)."""
    p = limit1d.Limit1DProblem(spec.profile, spec.L, dim=2, P1=2 * math.pi * spec.r1, P2=2 * math.pi * spec.r2)
    return limit1d.solve_dynamic_bc(p, N=N, k_max=max(k_max, 1))


def _solve_one(spec_base, eps, k_max, h, n_y, limit, settings, n_samples):
    r_min = min(spec_base.r1, spec_base.r2)
    n_arc = max(16, math.ceil(2 * math.pi * r_min / h))
    spec = replace(spec_base, eps=float(eps), n_arc=n_arc)
    geom = geometry.make_dumbbell(spec)
    mesh = meshgen.mesh_dumbbell(geom, h, n_y)
    system = fem.assemble(mesh)
    res = fem.solve_steklov(system, k_max, settings)
    mu1 = float(fem.solve_neumann(system, 1, settings).values[0])
    q = meshgen.mesh_quality(mesh)
    stats = {"h": h, "n_y": n_y, "n_arc": n_arc, "n_nodes": q.n_nodes, "n_tris": q.n_tris,
             "n_boundary": int(len(mesh.boundary_nodes)), "min_angle": q.min_angle, "max_aspect": q.max_aspect}
    rec = SweepRecord(eps=float(eps), sigma=res.values.copy(), mu1=mu1, area=geometry.area(geom),
                      perimeter=geometry.perimeter(geom), mesh_stats=stats)
    for k in range(1, k_max + 1):
        tr = trace_tube(res, k, n_samples)
        rec.traces[k] = tr
        rec.compare_errors[k] = compare_eigenfunctions(tr, limit, k)
        rec.plateau_gaps[k] = plateau_gap(res, limit, k)
    return rec


def sweep(spec_base: DumbbellSpec, eps_list, k_max=3, h_rule=None, n_y=4, settings=DEFAULT_SETTINGS,
          threads=1, n_samples=128) -> SweepReport:
    """Solve the Steklov problem for each eps (strictly decreasing) on a fixed-size mesh.

    A failure at some eps stops the sweep; the records computed before it
    are kept and the report is flagged as aborted.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise InvalidSpec("eps_list is empty")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise InvalidSpec("eps_list must be strictly decreasing")
    if k_max < 0:
        raise InvalidSpec("k_max must be non-negative")
    for e in eps_list:
        replace(spec_base, eps=e).validate()
    h_rule = h_rule or default_h_rule(spec_base)
    limit = limit_for(spec_base, k_max)

    def job(e):
        return _solve_one(spec_base, e, k_max, float(h_rule(e)), n_y, limit, settings, n_samples)

    records, error = [], None
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(job, e) for e in eps_list]
            for fut in futures:
                try:
                    records.append(fut.result())
                except SteklovError as exc:
                    error = str(exc)
                    break
    else:
        for e in eps_list:
            try:
                records.append(job(e))
            except SteklovError as exc:
                error = f"eps={e}: {exc}"
                break
    return SweepReport(spec_base=spec_base, k_max=k_max, records=records, limit=limit,
                       aborted=error is not None, error=error)
