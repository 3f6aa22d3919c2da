"""Failure of ``mu_1 |Omega| >= sigma_1 P(Omega)`` on long thin dumbbells.

Two unit-area disks joined by a straight tube of length L.  At the limit
level the first eigenvalue of the dynamical problem, ``alpha_1 = w_1**2``,
is compared with the Neumann bound ``4 / ((2 sqrt(pi) + L) L)``; at the FEM
level both sides of the inequality are computed on one mesh.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import fem, geometry, limit1d, meshgen
from .errors import InvalidSpec
from .geometry import DumbbellSpec, TubeProfile
from .linalg import DEFAULT_SETTINGS

THRESHOLD = 0.75 * (math.sqrt(2.0) + 1.0) * math.pi ** 1.5
DISK_PERIMETER = 2.0 * math.sqrt(math.pi)   # perimeter of a unit-area disk
PROBE_EPS = (0.1, 0.05, 0.025)


def bound_mu(L):
    """Asymptotic Neumann bound coefficient ``4 / ((2 sqrt(pi) + L) L)``."""
    return 4.0 / ((DISK_PERIMETER + L) * L)


@dataclass
class FemRecord:
    eps: float
    h: float
    mu1: float
    sigma1: float
    area: float
    perimeter: float

    @property
    def lhs(self):
        return self.mu1 * self.area

    @property
    def rhs(self):
        return self.sigma1 * self.perimeter

    @property
    def verdict(self):
        """True when the inequality fails, i.e. ``mu_1 |Omega| < sigma_1 P(Omega)``."""
        return self.lhs < self.rhs

    @property
    def margin(self):
        return self.rhs - self.lhs

    def to_dict(self):
        d = asdict(self)
        d.update(lhs=self.lhs, rhs=self.rhs, margin=self.margin, verdict=self.verdict)
        return d


@dataclass
class CounterexampleReport:
    L: float
    threshold: float
    w1: float
    alpha1: float
    bound_mu: float
    chain_lower: float              # 9 pi^2 / (16 L^2)
    above_threshold: bool
    positivity_ok: bool             # f > 0 at every sample of (0, 3 pi / (4 L))
    min_f: float
    chain_holds: bool | None        # None below the threshold: nothing is claimed there
    failed_step: str | None = None
    records: list = field(default_factory=list)

    def mu_bound_ok(self, rec: FemRecord, slack=0.2):
        return rec.mu1 <= (1 + slack) * (4.0 / self.L) * rec.eps

    def sigma_ratio(self, rec: FemRecord):
        """``(sigma_1 / eps) / alpha_1``; tends to 1 as eps -> 0."""
        return rec.sigma1 / rec.eps / self.alpha1

    def first_counterexample(self):
        return next((r for r in self.records if r.verdict), None)

    def to_dict(self):
        d = {k: v for k, v in asdict(self).items() if k != "records"}
        d["records"] = [r.to_dict() for r in self.records]
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        fields = FemRecord.__dataclass_fields__
        recs = [FemRecord(**{k: r[k] for k in fields}) for r in data.pop("records")]
        return cls(**data, records=recs)

    def summary(self):
        lines = [
            f"L = {self.L:g} (threshold {self.threshold:.6f}, {'above' if self.above_threshold else 'below'})",
            f"w1 = {self.w1:.10g}, alpha1 = w1^2 = {self.alpha1:.10g}",
            f"9 pi^2/(16 L^2) = {self.chain_lower:.10g}, 4/((2 sqrt(pi)+L) L) = {self.bound_mu:.10g}",
            f"f > 0 on (0, 3pi/(4L)): {self.positivity_ok} (min sample {self.min_f:.6g})",
        ]
        if self.chain_holds is None:
            lines.append(f"chain not asserted: {self.failed_step}")
        else:
            lines.append(f"alpha1 >= 9pi^2/(16L^2) > bound: {self.chain_holds}")
        for r in self.records:
            lines.append(f"eps={r.eps:g} h={r.h:g}: mu1|Omega| = {r.lhs:.8g}, sigma1 P = {r.rhs:.8g}, "
                         f"margin {r.margin:.3e}, inequality fails: {r.verdict}")
        return "\n".join(lines) + "\n"


def check_limit_inequality(L, n_samples=1000) -> CounterexampleReport:
    L = float(L)
    if not (L > 0 and math.isfinite(L)):
        raise InvalidSpec("L must be positive")
    w1 = float(limit1d.transcendental_roots(L, DISK_PERIMETER, DISK_PERIMETER, 1)[0])
    alpha1 = w1 * w1
    lower = 9 * math.pi ** 2 / (16 * L * L)
    b = bound_mu(L)
    xs = np.linspace(0.0, 3 * math.pi / (4 * L), n_samples + 2)[1:-1]
    fv = np.array([limit1d.f_eval(x, L) for x in xs])
    positivity_ok = bool(np.all(fv > 0))
    above = L > THRESHOLD
    chain, failed = None, None
    if not positivity_ok:
        failed = "f is not positive on (0, 3pi/(4L))"
    elif not above:
        failed = "L is below the threshold"
    else:
        chain = bool(alpha1 >= lower > b)
        if not chain:
            failed = "alpha1 >= 9pi^2/(16L^2) > bound chain is violated"
    return CounterexampleReport(L=L, threshold=THRESHOLD, w1=w1, alpha1=alpha1, bound_mu=b, chain_lower=lower,
                                above_threshold=above, positivity_ok=positivity_ok, min_f=float(fv.min()),
                                chain_holds=chain, failed_step=failed)


def dumbbell_spec(L, eps, h):
    r = 1.0 / math.sqrt(math.pi)
    n_arc = max(16, math.ceil(2 * math.pi * r / h))
    return DumbbellSpec(r, r, float(L), TubeProfile.constant(1.0, L), float(eps), n_arc=n_arc)


def fem_record(L, eps, h, n_y=4, settings=DEFAULT_SETTINGS) -> FemRecord:
    """Neumann and Steklov first eigenvalues on one mesh, with mesh-measured area and perimeter."""
    geom = geometry.make_dumbbell(dumbbell_spec(L, eps, h))
    mesh = meshgen.mesh_dumbbell(geom, h, n_y)
    system = fem.assemble(mesh)
    mu1 = float(fem.solve_neumann(system, 1, settings).values[0])
    sigma1 = float(fem.solve_steklov(system, 1, settings).values[1])
    return FemRecord(eps=float(eps), h=float(h), mu1=mu1, sigma1=sigma1, area=mesh.area(),
                     perimeter=float(np.sum(mesh.edge_lengths())))


def check_fem_inequality(L, eps, h=0.15, n_y=4, settings=DEFAULT_SETTINGS) -> CounterexampleReport:
    rep = check_limit_inequality(L)
    rep.records.append(fem_record(L, eps, h, n_y, settings))
    return rep


def probe(L, h=0.15, eps_list=PROBE_EPS, n_y=4, settings=DEFAULT_SETTINGS) -> CounterexampleReport:
    """Run every eps of ``eps_list``; all records are kept, see ``first_counterexample``."""
    rep = check_limit_inequality(L)
    for e in eps_list:
        rep.records.append(fem_record(L, e, h, n_y, settings))
    return rep
