"""Parametric dumbbells: two disks joined by a thin tube along the x1-axis.

The realized boundary is a single counter-clockwise polygon split into four
tagged chains (left disk arc, lower tube side, right disk arc, upper tube
side).  Each disk has the cap beyond its junction line cut off, so it meets
the tube along a flat vertical face of half-width ``eps * rho(-+L/2)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DegenerateProfile, InvalidSpec, NonSimpleBoundary, OutOfDomain


class BoundaryTag(str, Enum):
    D1 = "D1"
    D2 = "D2"
    TubePlus = "TubePlus"
    TubeMinus = "TubeMinus"


ALL = "All"


@dataclass(frozen=True)
class TubeProfile:
    """Tube half-width profile rho on [-L/2, L/2].

    kind is ``"constant"`` (params ``(c,)``), ``"cosine_bump"`` (params
    ``(c0, c1)``, ``rho = c0 + c1 cos(pi x / L)``) or ``"table"`` (params is a
    sequence of ``(x, rho)`` samples, interpolated linearly).
    """

    kind: str
    params: tuple
    L: float

    @classmethod
    def constant(cls, c, L):
        return cls("constant", (float(c),), float(L))

    @classmethod
    def cosine_bump(cls, c0, c1, L):
        return cls("cosine_bump", (float(c0), float(c1)), float(L))

    @classmethod
    def table(cls, samples, L):
        pts = tuple(sorted((float(x), float(y)) for x, y in samples))
        if len(pts) < 2:
            raise DegenerateProfile("a tabulated profile needs at least two samples")
        if pts[0][0] > -L / 2 + 1e-12 or pts[-1][0] < L / 2 - 1e-12:
            raise DegenerateProfile("tabulated profile must cover [-L/2, L/2]")
        return cls("table", pts, float(L))

    def __call__(self, x1):
        return profile_eval(self, x1)

    def with_length(self, L):
        return TubeProfile(self.kind, self.params, float(L))

    def scaled(self, factor):
        """Profile of the dilated tube: x -> factor*x and rho -> rho (the width scale eps is untouched)."""
        L = self.L * factor
        if self.kind == "table":
            return TubeProfile("table", tuple((x * factor, y) for x, y in self.params), L)
        return TubeProfile(self.kind, self.params, L)

    def sample_grid(self, n=2001):
        x = np.linspace(-self.L / 2, self.L / 2, n)
        return x, profile_eval(self, x)

    def max_value(self):
        return float(np.max(self.sample_grid()[1]))

    def check_positive(self):
        _, y = self.sample_grid()
        if not np.all(np.isfinite(y)) or np.min(y) <= 0:
            raise DegenerateProfile(f"profile {self.kind} is not positive on [-L/2, L/2]")

    def to_dict(self):
        return {"kind": self.kind, "params": [list(p) if isinstance(p, tuple) else p for p in self.params]}

    @classmethod
    def from_dict(cls, d, L):
        kind = d["kind"]
        params = d.get("params", [])
        if kind == "constant":
            return cls.constant(params[0], L)
        if kind == "cosine_bump":
            return cls.cosine_bump(params[0], params[1], L)
        if kind == "table":
            return cls.table(params, L)
        raise InvalidSpec(f"unknown profile kind {kind!r}")


def profile_eval(profile: TubeProfile, x1):
    """Evaluate rho at ``x1`` (scalar or array); raises OutOfDomain outside [-L/2, L/2]."""
    x = np.asarray(x1, dtype=float)
    half = profile.L / 2
    if np.any(np.abs(x) > half * (1 + 1e-12) + 1e-14):
        raise OutOfDomain(f"x1 outside [-{half}, {half}]")
    if profile.kind == "constant":
        out = np.full_like(x, profile.params[0])
    elif profile.kind == "cosine_bump":
        c0, c1 = profile.params
        out = c0 + c1 * np.cos(np.pi * x / profile.L)
    elif profile.kind == "table":
        xs, ys = zip(*profile.params)
        out = np.interp(x, xs, ys)
    else:
        raise InvalidSpec(f"unknown profile kind {profile.kind!r}")
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DumbbellSpec:
    r1: float
    r2: float
    L: float
    profile: TubeProfile
    eps: float
    n_arc: int = 64
    dim: int = 2
    # tube sides are sampled with n_tube segments; None means 1 for a constant profile
    n_tube: int | None = None

    def validate(self):
        if not (self.L > 0 and self.r1 > 0 and self.r2 > 0):
            raise InvalidSpec("L, r1 and r2 must be positive")
        if not self.eps > 0:
            raise InvalidSpec("eps must be positive")
        if self.n_arc < 16:
            raise InvalidSpec("n_arc must be at least 16")
        if self.dim < 2:
            raise InvalidSpec("dim must be at least 2")
        if abs(self.profile.L - self.L) > 1e-12 * self.L:
            raise InvalidSpec("profile length does not match L")
        self.profile.check_positive()
        if self.eps * self.profile.max_value() >= min(self.r1, self.r2):
            raise InvalidSpec("tube half-width eps*max(rho) must stay below min(r1, r2)")
        return self

    def tube_segments(self):
        if self.n_tube is not None:
            return int(self.n_tube)
        return 1 if self.profile.kind == "constant" else 64

    def scaled(self, s):
        return DumbbellSpec(self.r1 * s, self.r2 * s, self.L * s, self.profile.scaled(s), self.eps * s,
                            self.n_arc, self.dim, self.n_tube)

    def to_dict(self):
        return {"r1": self.r1, "r2": self.r2, "L": self.L, "profile": self.profile.to_dict(),
                "eps": self.eps, "n_arc": self.n_arc, "dim": self.dim, "n_tube": self.n_tube}


@dataclass
class Chain:
    tag: BoundaryTag
    points: np.ndarray  # (m, 2), consecutive chains share end points

    def length(self):
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))


@dataclass
class DumbbellGeometry:
    chains: list
    junction_nodes: np.ndarray  # rows: (-L/2, +a1), (-L/2, -a1), (L/2, -a2), (L/2, +a2)
    spec: DumbbellSpec | None = None
    disk_centers: dict = field(default_factory=dict)

    def chain(self, tag):
        tag = BoundaryTag(tag)
        return next(c for c in self.chains if c.tag == tag)

    def loop(self):
        """Closed polygon vertices (first vertex not repeated)."""
        return np.vstack([c.points[:-1] for c in self.chains])

    def to_json(self):
        return json.dumps({"chains": [{"tag": c.tag.value, "points": c.points.tolist()} for c in self.chains]})

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        chains = [Chain(BoundaryTag(c["tag"]), np.asarray(c["points"], float)) for c in data["chains"]]
        return cls(chains=chains, junction_nodes=np.empty((0, 2)))


def _disk_arc(center, r, half_width, side, n_arc):
    """Arc of the circle from the upper to the lower junction vertex, CCW, around the far side."""
    d = math.sqrt(r * r - half_width * half_width)
    theta0 = math.atan2(half_width, d)
    if side < 0:
        # left disk: junction face faces +x; go from angle theta0 to 2pi - theta0
        angles = np.linspace(theta0, 2 * math.pi - theta0, n_arc + 1)
    else:
        # right disk: junction face faces -x; go from pi + theta0 to 3pi - theta0 (bottom to top)
        angles = np.linspace(math.pi + theta0, 3 * math.pi - theta0, n_arc + 1)
    pts = np.column_stack([center[0] + r * np.cos(angles), center[1] + r * np.sin(angles)])
    return pts


def make_dumbbell(spec: DumbbellSpec) -> DumbbellGeometry:
    """Realize ``spec`` as a tagged counter-clockwise polygon."""
    spec.validate()
    L, eps = spec.L, spec.eps
    a1 = eps * spec.profile(-L / 2)
    a2 = eps * spec.profile(L / 2)
    d1 = math.sqrt(spec.r1 ** 2 - a1 ** 2)
    d2 = math.sqrt(spec.r2 ** 2 - a2 ** 2)
    c1 = (-L / 2 - d1, 0.0)
    c2 = (L / 2 + d2, 0.0)

    top1, bot1 = np.array([-L / 2, a1]), np.array([-L / 2, -a1])
    bot2, top2 = np.array([L / 2, -a2]), np.array([L / 2, a2])

    arc1 = _disk_arc(c1, spec.r1, a1, -1, spec.n_arc)
    arc2 = _disk_arc(c2, spec.r2, a2, +1, spec.n_arc)
    # pin junction vertices exactly so neighbouring chains share them bit-for-bit
    arc1[0], arc1[-1] = top1, bot1
    arc2[0], arc2[-1] = bot2, top2

    xs = np.linspace(-L / 2, L / 2, spec.tube_segments() + 1)
    rho = np.asarray(spec.profile(xs), dtype=float)
    lower = np.column_stack([xs, -eps * rho])
    lower[0], lower[-1] = bot1, bot2
    upper = np.column_stack([xs[::-1], eps * rho[::-1]])
    upper[0], upper[-1] = top2, top1

    chains = [
        Chain(BoundaryTag.D1, arc1),
        Chain(BoundaryTag.TubeMinus, lower),
        Chain(BoundaryTag.D2, arc2),
        Chain(BoundaryTag.TubePlus, upper),
    ]
    geom = DumbbellGeometry(chains=chains, junction_nodes=np.array([top1, bot1, bot2, top2]), spec=spec,
                            disk_centers={BoundaryTag.D1: np.array(c1), BoundaryTag.D2: np.array(c2)})
    check_simple(geom.loop())
    return geom


def perimeter(geom: DumbbellGeometry, tag=ALL) -> float:
    if tag == ALL:
        return float(sum(c.length() for c in geom.chains))
    return geom.chain(tag).length()


def polygon_area(points) -> float:
    p = np.asarray(points, float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def check_simple(points):
    """Raise NonSimpleBoundary if any two non-adjacent edges of the closed polygon intersect."""
    p = np.asarray(points, float)
    m = len(p)
    a = p
    b = np.roll(p, -1, axis=0)

    def orient(p0, p1, p2):
        return (p1[..., 0] - p0[..., 0]) * (p2[..., 1] - p0[..., 1]) - (p1[..., 1] - p0[..., 1]) * (p2[..., 0] - p0[..., 0])

    # batched over rows to keep memory bounded
    for start in range(0, m, 256):
        i = np.arange(start, min(start + 256, m))[:, None]
        j = np.arange(m)[None, :]
        ai, bi = a[i[:, 0]][:, None, :], b[i[:, 0]][:, None, :]
        aj, bj = a[None, :, :], b[None, :, :]
        o1 = orient(ai, bi, aj)
        o2 = orient(ai, bi, bj)
        o3 = orient(aj, bj, ai)
        o4 = orient(aj, bj, bi)
        cross = (o1 * o2 < 0) & (o3 * o4 < 0)
        adjacent = (np.abs(i - j) <= 1) | (np.abs(i - j) == m - 1)
        if np.any(cross & ~adjacent & (j > i)):
            raise NonSimpleBoundary("boundary polygon self-intersects")


def area(geom: DumbbellGeometry) -> float:
    """Shoelace area of the realized polygon."""
    loop = geom.loop()
    check_simple(loop)
    A = polygon_area(loop)
    if A <= 0:
        raise NonSimpleBoundary("boundary loop is not counter-clockwise")
    return A


def circle_cap_values(r, half_width):
    """Exact arc length and area of a disk of radius r with the cap beyond a chord of half-width a removed."""
    a = half_width
    theta0 = math.atan2(a, math.sqrt(r * r - a * a))
    arc = r * (2 * math.pi - 2 * theta0)
    seg_area = r * r * (2 * theta0 - math.sin(2 * theta0)) / 2
    return arc, math.pi * r * r - seg_area
