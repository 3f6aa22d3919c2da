"""Conforming P1 triangle meshes for dumbbells and disks.

The tube is an ``n_x`` by ``n_y`` mapped grid.  Each disk is filled by
concentric rings scaled toward the disk centre and zipped together, with a
fan at the centre.  Disk rings and the tube share the junction-face nodes,
so the result is conforming without any constrained Delaunay step.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MeshFailure
from .geometry import BoundaryTag, DumbbellGeometry


@dataclass
class TriMesh:
    nodes: np.ndarray          # (N, 2)
    triangles: np.ndarray      # (T, 3), counter-clockwise
    boundary_edges: np.ndarray  # (E, 2)
    edge_tags: np.ndarray      # (E,) of tag strings
    # optional bookkeeping used for point location and region averages
    tube_grid: np.ndarray | None = None   # (n_x+1, n_y+1) node indices, column-major in x
    regions: dict = field(default_factory=dict)  # region name -> node index array

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.boundary_edges = np.asarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        self.edge_tags = np.asarray(self.edge_tags, dtype=object)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def boundary_nodes(self):
        return np.unique(self.boundary_edges)

    @property
    def interior_nodes(self):
        mask = np.ones(self.n_nodes, bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    def signed_areas(self):
        p = self.nodes[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))

    def area(self):
        return float(np.sum(self.signed_areas()))

    def edge_lengths(self, tag=None):
        e = self.boundary_edges if tag is None else self.boundary_edges[self.edge_tags == str(getattr(tag, "value", tag))]
        return np.linalg.norm(self.nodes[e[:, 1]] - self.nodes[e[:, 0]], axis=1)

    def all_edges(self):
        """Unique undirected edges and how many triangles use each one."""
        t = self.triangles
        e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e = np.sort(e, axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq, counts

    def to_json(self):
        return json.dumps({
            "nodes": self.nodes.tolist(),
            "triangles": self.triangles.tolist(),
            "boundary_edges": [{"i": int(i), "j": int(j), "tag": str(t)}
                               for (i, j), t in zip(self.boundary_edges, self.edge_tags)],
        })

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        be = d["boundary_edges"]
        return cls(nodes=np.asarray(d["nodes"], float), triangles=np.asarray(d["triangles"], int),
                   boundary_edges=np.array([[e["i"], e["j"]] for e in be], dtype=int).reshape(-1, 2),
                   edge_tags=np.array([e["tag"] for e in be], dtype=object))


@dataclass(frozen=True)
class MeshQuality:
    min_angle: float
    max_aspect: float
    n_nodes: int
    n_tris: int


def mesh_quality(mesh: TriMesh) -> MeshQuality:
    p = mesh.nodes[mesh.triangles]
    a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
    b = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
    c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)

    def angle(opp, s1, s2):
        cosv = (s1 ** 2 + s2 ** 2 - opp ** 2) / (2 * s1 * s2)
        return np.degrees(np.arccos(np.clip(cosv, -1.0, 1.0)))

    angles = np.column_stack([angle(a, b, c), angle(b, c, a), angle(c, a, b)])
    sides = np.column_stack([a, b, c])
    aspect = sides.max(axis=1) / sides.min(axis=1)
    return MeshQuality(float(angles.min()), float(aspect.max()), mesh.n_nodes, len(mesh.triangles))


class _NodeStore:
    def __init__(self):
        self.points = []

    def add(self, xy):
        self.points.append((float(xy[0]), float(xy[1])))
        return len(self.points) - 1

    def add_many(self, pts):
        return np.array([self.add(p) for p in pts], dtype=np.int64)

    def array(self):
        return np.array(self.points, float).reshape(-1, 2)


def _subdivide(points, h):
    """Insert equally spaced points on every polyline segment longer than h."""
    pts = [points[0]]
    for p, q in zip(points[:-1], points[1:]):
        m = max(1, math.ceil(np.linalg.norm(q - p) / h - 1e-9))
        for k in range(1, m + 1):
            pts.append(p + (q - p) * (k / m))
    out = np.array(pts, float)
    out[-1] = points[-1]
    return out


def _radial_function(center, ring_pts):
    """Return r(theta) for the closed star-shaped polygon ``ring_pts`` about ``center``."""
    rel = ring_pts - center
    ang = np.arctan2(rel[:, 1], rel[:, 0])
    order_ang = np.unwrap(ang)
    if order_ang[-1] < order_ang[0]:
        raise MeshFailure("ring is not counter-clockwise about its centre")
    base = order_ang[0]
    closed = np.vstack([rel, rel[:1]])
    closed_ang = np.append(order_ang, base + 2 * np.pi)

    def r_of(theta):
        th = base + np.mod(np.asarray(theta) - base, 2 * np.pi)
        k = np.clip(np.searchsorted(closed_ang, th, side="right") - 1, 0, len(rel) - 1)
        p, q = closed[k], closed[k + 1]
        d = np.column_stack([np.cos(th), np.sin(th)])
        # intersect ray s*d with segment p + u (q - p)
        e = q - p
        den = d[:, 0] * e[:, 1] - d[:, 1] * e[:, 0]
        s = (p[:, 0] * e[:, 1] - p[:, 1] * e[:, 0]) / den
        return s

    return r_of, base


def _zip_rings(outer, inner, nodes, center):
    """Triangulate the annulus between two CCW rings of node indices.

    Both rings are swept by polar angle about ``center``; each step advances
    whichever ring has the nearer next node, which gives ``len(outer) +
    len(inner)`` triangles.
    """
    def angles(idx, ref):
        rel = nodes[idx] - center
        return ref + np.mod(np.arctan2(rel[:, 1], rel[:, 0]) - ref, 2 * np.pi)

    rel0 = nodes[outer[0]] - center
    ref = math.atan2(rel0[1], rel0[0])
    a_ang = angles(outer, ref)
    b_ang = angles(inner, ref)
    start = int(np.argmin(b_ang))
    inner = np.roll(inner, -start)
    b_ang = np.roll(b_ang, -start)
    nA, nB = len(outer), len(inner)
    a_next = np.append(a_ang, ref + 2 * np.pi)

    tris = []
    i = j = 0
    cur = inner[-1]
    while i < nA or j < nB:
        na = a_next[i + 1] if i < nA else np.inf
        nb = b_ang[j] if j < nB else np.inf
        if na <= nb:
            tris.append((outer[i], outer[(i + 1) % nA], cur))
            i += 1
        else:
            tris.append((outer[i % nA], inner[j], cur))
            cur = inner[j]
            j += 1
    return tris


def _star_fill(store, outer_idx, center, h, offset_phase=0.5):
    """Fill a star-shaped ring (node indices, CCW) toward ``center``; returns triangles and new node ids."""
    nodes = store.array()
    ring = nodes[outer_idx]
    r_of, base = _radial_function(center, ring)
    rmean = float(np.mean(np.linalg.norm(ring - center, axis=1)))
    J = max(1, int(round(rmean / h)))
    tris = []
    new_nodes = []
    prev = np.asarray(outer_idx)
    for j in range(J - 1, 0, -1):
        t = j / J
        n_ring = max(6, int(round(2 * np.pi * rmean * t / h)))
        theta = base + (np.arange(n_ring) + offset_phase * (j % 2)) * (2 * np.pi / n_ring)
        r = t * r_of(theta)
        pts = center + np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        idx = store.add_many(pts)
        new_nodes.extend(idx.tolist())
        nodes = store.array()
        tris.extend(_zip_rings(prev, idx, nodes, center))
        prev = idx
    c = store.add(center)
    new_nodes.append(c)
    for k in range(len(prev)):
        tris.append((prev[k], prev[(k + 1) % len(prev)], c))
    return tris, np.array(new_nodes, dtype=np.int64)


def _finalize(store, tris, bedges, btags, **extra):
    mesh = TriMesh(nodes=store.array(), triangles=np.array(tris, dtype=np.int64),
                   boundary_edges=np.array(bedges, dtype=np.int64), edge_tags=np.array(btags, dtype=object), **extra)
    areas = mesh.signed_areas()
    if np.any(areas <= 0):
        raise MeshFailure(f"{int(np.sum(areas <= 0))} inverted or degenerate triangles")
    return mesh


def mesh_disk(radius, h, center=(0.0, 0.0), tag=BoundaryTag.D1) -> TriMesh:
    """Radial ring mesh of a full disk; the boundary is tagged ``tag``."""
    if not radius > 0 or not 0 < h < radius:
        raise MeshFailure("mesh_disk needs radius > 0 and 0 < h < radius")
    center = np.asarray(center, float)
    J = max(1, int(round(radius / h)))
    m = max(6, int(round(2 * np.pi * J)))
    theta = np.arange(m) * (2 * np.pi / m)
    store = _NodeStore()
    outer = store.add_many(center + radius * np.column_stack([np.cos(theta), np.sin(theta)]))
    tris, inner = _star_fill(store, outer, center, radius / J)
    bedges = [(outer[k], outer[(k + 1) % m]) for k in range(m)]
    tag = str(getattr(tag, "value", tag))
    return _finalize(store, tris, bedges, [tag] * m, regions={"disk": np.concatenate([outer, inner])})


def mesh_polygon_grid(x0, x1, y0, y1, nx, ny, tag="D1") -> TriMesh:
    """Structured mesh of an axis-aligned rectangle (test fixture, e.g. the unit square)."""
    store = _NodeStore()
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    grid = np.array([[store.add((x, y)) for y in ys] for x in xs])
    tris = _grid_triangles(grid)
    loop = list(grid[:, 0]) + list(grid[-1, 1:]) + list(grid[-2::-1, -1]) + list(grid[0, -2:0:-1])
    bedges = [(loop[k], loop[(k + 1) % len(loop)]) for k in range(len(loop))]
    return _finalize(store, tris, bedges, [tag] * len(bedges), tube_grid=grid)


def _grid_triangles(grid):
    tris = []
    nx, ny = grid.shape[0] - 1, grid.shape[1] - 1
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = grid[i, j], grid[i + 1, j], grid[i + 1, j + 1], grid[i, j + 1]
            if (i + j) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    return tris


def mesh_dumbbell(geom: DumbbellGeometry, h, n_y=4) -> TriMesh:
    """Mesh a realized dumbbell: mapped tube grid plus ring-filled disks."""
    if not h > 0:
        raise MeshFailure("h must be positive")
    if n_y < 2 or n_y % 2:
        raise MeshFailure("n_y must be an even integer >= 2")

    lower = geom.chain(BoundaryTag.TubeMinus).points
    upper = geom.chain(BoundaryTag.TubePlus).points[::-1]
    if not np.allclose(lower[:, 0], upper[:, 0], rtol=0, atol=1e-12):
        raise MeshFailure("upper and lower tube chains must share x samples")

    # tube columns: subdivide each chain segment so no side edge exceeds h
    cols_lo, cols_hi = [lower[0]], [upper[0]]
    for k in range(len(lower) - 1):
        seg = max(np.linalg.norm(lower[k + 1] - lower[k]), np.linalg.norm(upper[k + 1] - upper[k]))
        m = max(1, math.ceil(seg / h - 1e-9))
        for s in range(1, m + 1):
            cols_lo.append(lower[k] + (lower[k + 1] - lower[k]) * (s / m))
            cols_hi.append(upper[k] + (upper[k + 1] - upper[k]) * (s / m))
    cols_lo[-1], cols_hi[-1] = lower[-1], upper[-1]
    cols_lo, cols_hi = np.array(cols_lo), np.array(cols_hi)
    n_x = len(cols_lo) - 1

    store = _NodeStore()
    grid = np.empty((n_x + 1, n_y + 1), dtype=np.int64)
    for i in range(n_x + 1):
        for j in range(n_y + 1):
            if j == 0:
                p = cols_lo[i]
            elif j == n_y:
                p = cols_hi[i]
            else:
                p = cols_lo[i] + (cols_hi[i] - cols_lo[i]) * (j / n_y)
            grid[i, j] = store.add(p)
    tris = _grid_triangles(grid)
    bedges, btags = [], []
    for i in range(n_x):
        bedges.append((grid[i, 0], grid[i + 1, 0]))
        btags.append(BoundaryTag.TubeMinus.value)
        bedges.append((grid[i + 1, n_y], grid[i, n_y]))
        btags.append(BoundaryTag.TubePlus.value)

    regions = {}
    for tag, col, face_order in ((BoundaryTag.D1, 0, range(1, n_y)), (BoundaryTag.D2, n_x, range(n_y - 1, 0, -1))):
        arc = _subdivide(geom.chain(tag).points, h)
        first = grid[col, n_y] if tag == BoundaryTag.D1 else grid[col, 0]
        last = grid[col, 0] if tag == BoundaryTag.D1 else grid[col, n_y]
        arc_idx = np.concatenate([[first], store.add_many(arc[1:-1]), [last]])
        for a, b in zip(arc_idx[:-1], arc_idx[1:]):
            bedges.append((a, b))
            btags.append(tag.value)
        ring = np.concatenate([arc_idx, grid[col, list(face_order)]])
        center = geom.disk_centers.get(tag)
        if center is None:
            center = np.mean(store.array()[ring], axis=0)
        disk_tris, inner = _star_fill(store, ring, np.asarray(center, float), h)
        tris += disk_tris
        regions[tag.value] = np.concatenate([arc_idx[1:-1], inner])
    regions["tube"] = grid.ravel()

    mesh = _finalize(store, tris, bedges, btags, tube_grid=grid, regions=regions)
    return mesh
