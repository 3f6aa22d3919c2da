"""P1 finite elements for the Steklov and Neumann eigenproblems.

The Steklov problem ``-Lap u = 0`` in the domain, ``du/dn = sigma u`` on the
boundary is reduced to the boundary by the Schur complement of the
stiffness matrix (the discrete Dirichlet-to-Neumann map) and solved as the
dense pencil ``(S, B_bb)``.  Interior values are recovered by harmonic
extension.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import linalg
from .errors import DegenerateTriangle, NumericalError
from .linalg import DEFAULT_SETTINGS, NumericSettings, Spectrum
from .meshgen import TriMesh


@dataclass
class AssembledSystem:
    K: sp.csr_matrix
    B: sp.csr_matrix
    M: sp.csr_matrix
    interior: np.ndarray
    boundary: np.ndarray
    mesh: TriMesh

    @property
    def perm(self):
        """Interior-first, boundary-last ordering of the degrees of freedom."""
        return np.concatenate([self.interior, self.boundary])


def local_stiffness(p):
    """Element stiffness matrices for triangles ``p`` of shape (T, 3, 2)."""
    x, y = p[..., 0], p[..., 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    Kloc = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (4.0 * area[:, None, None])
    return Kloc, area


def local_edge_mass(length):
    return np.asarray(length, float)[:, None, None] / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])


def local_mass(area):
    return np.asarray(area, float)[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))


def _scatter(n, conn, local):
    k = conn.shape[1]
    rows = np.repeat(conn, k, axis=1).ravel()
    cols = np.tile(conn, (1, k)).ravel()
    return linalg.sym_from_triplets(n, rows, cols, local.ravel())


def assemble(mesh: TriMesh) -> AssembledSystem:
    n = mesh.n_nodes
    span = np.ptp(mesh.nodes, axis=0).max()
    bad = mesh.signed_areas() < 1e-14 * span ** 2
    if np.any(bad):
        raise DegenerateTriangle(f"{int(np.sum(bad))} triangles have (near) zero area")
    Kloc, area = local_stiffness(mesh.nodes[mesh.triangles])
    K = _scatter(n, mesh.triangles, Kloc)
    M = _scatter(n, mesh.triangles, local_mass(area))
    e = mesh.boundary_edges
    length = np.linalg.norm(mesh.nodes[e[:, 1]] - mesh.nodes[e[:, 0]], axis=1)
    B = _scatter(n, e, local_edge_mass(length))
    return AssembledSystem(K=K, B=B, M=M, interior=mesh.interior_nodes, boundary=mesh.boundary_nodes, mesh=mesh)


def _as_system(obj) -> AssembledSystem:
    return obj if isinstance(obj, AssembledSystem) else assemble(obj)


def harmonic_extension_operator(sys: AssembledSystem, settings: NumericSettings = DEFAULT_SETTINGS):
    """Dense ``X = K_II^{-1} K_Ib`` (so interior values of the harmonic extension are ``-X @ u_b``)."""
    I, G = sys.interior, sys.boundary
    if len(I) == 0:
        return np.zeros((0, len(G)))
    K = sys.K
    K_II = K[I][:, I].tocsr()
    K_IG = K[I][:, G].toarray()
    return linalg.cg_solve(K_II, K_IG, tol=settings.cg_tol, settings=settings)


def dtn_schur(sys, settings: NumericSettings = DEFAULT_SETTINGS, return_extension=False):
    """Discrete Dirichlet-to-Neumann matrix ``S = K_bb - K_bI K_II^{-1} K_Ib`` on boundary DOFs."""
    sys = _as_system(sys)
    I, G = sys.interior, sys.boundary
    K = sys.K
    S = K[G][:, G].toarray()
    X = harmonic_extension_operator(sys, settings)
    if len(I):
        S = S - K[G][:, I] @ X
    S = linalg.symmetrize(S)
    return (S, X) if return_extension else S


@dataclass
class SteklovResult:
    spectrum: Spectrum          # over boundary DOFs, B_bb-orthonormal
    values: np.ndarray          # sigma_0 <= sigma_1 <= ...
    modes: np.ndarray           # (n_nodes, k_max+1) harmonic extensions
    system: AssembledSystem

    @property
    def mesh(self):
        return self.system.mesh


def solve_steklov(mesh_or_sys, k_max, settings: NumericSettings = DEFAULT_SETTINGS) -> SteklovResult:
    """Lowest ``k_max + 1`` Steklov pairs; eigenvectors have unit L2 norm on the boundary."""
    sys = _as_system(mesh_or_sys)
    G = sys.boundary
    if not 0 <= k_max < len(G):
        raise ValueError(f"k_max={k_max} must be below the number of boundary DOFs ({len(G)})")
    S, X = dtn_schur(sys, settings, return_extension=True)
    Bgg = sys.B[G][:, G].toarray()
    full = linalg.gen_sym_eig(S, Bgg, settings)
    vals = full.values[: k_max + 1].copy()
    vecs = full.vectors[:, : k_max + 1].copy()
    # fix the arbitrary sign: largest-magnitude boundary entry positive
    pivot = np.argmax(np.abs(vecs), axis=0)
    vecs *= np.sign(vecs[pivot, np.arange(vecs.shape[1])])
    modes = np.zeros((sys.mesh.n_nodes, k_max + 1))
    modes[G] = vecs
    if len(sys.interior):
        modes[sys.interior] = -X @ vecs
    spec = Spectrum(vals, vecs, gram="B", gram_matrix=Bgg)
    return SteklovResult(spectrum=spec, values=vals, modes=modes, system=sys)


def solve_neumann(mesh_or_sys, k_max, settings: NumericSettings = DEFAULT_SETTINGS) -> Spectrum:
    """Neumann eigenpairs mu_1 <= ... <= mu_k_max with the constant mode removed.

    Uses ARPACK shift-invert slightly below zero; the computed zero mode is
    checked to be constant and discarded, and the rest are M-orthonormalized.
    """
    sys = _as_system(mesh_or_sys)
    K, M = sys.K.tocsc(), sys.M.tocsc()
    n = K.shape[0]
    if not 1 <= k_max < n - 1:
        raise ValueError("k_max must satisfy 1 <= k_max < n_nodes - 1")
    ratio = float(np.max(K.diagonal()) / np.max(M.diagonal()))
    sigma = -1e-6 * ratio
    nev = k_max + 1
    if n <= 400:
        import scipy.linalg
        w, V = scipy.linalg.eigh(K.toarray(), M.toarray(), subset_by_index=[0, nev - 1])
    else:
        # fixed start vector: ARPACK's default draws from a process-global stream
        v0 = np.random.default_rng(0).standard_normal(n)
        w, V = spla.eigsh(K, k=nev, M=M, sigma=sigma, which="LM", tol=1e-13, v0=v0)
    order = np.argsort(w)
    w, V = w[order], V[:, order]
    ones = np.ones(n)
    const = ones / np.sqrt(ones @ (M @ ones))
    overlap = np.abs(const @ (M @ V))
    zero = int(np.argmax(overlap))
    if overlap[zero] < 1 - 1e-6 or abs(w[zero]) > 1e-8 * max(1.0, abs(w[-1])):
        raise NumericalError("failed to identify the constant Neumann mode")
    keep = [i for i in range(nev) if i != zero]
    w, V = w[keep], V[:, keep]
    # project out the constant and restore M-orthonormality
    V = V - np.outer(const, const @ (M @ V))
    G = V.T @ (M @ V)
    Lg = np.linalg.cholesky(linalg.symmetrize(G))
    V = np.linalg.solve(Lg, V.T).T
    return Spectrum(w, V, gram="M", gram_matrix=sys.M)
