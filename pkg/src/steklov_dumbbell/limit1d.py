"""One-dimensional limit eigenvalue problems on the tube axis [-L/2, L/2].

All problems share the weak form

    int a V' phi'  =  lam * ( int b V phi + w_b P1 V(-L/2) phi(-L/2) + w_b P2 V(L/2) phi(L/2) )

discretized with P1 elements on a uniform grid.  For ``dim == 2`` the
coefficients are ``a = rho, b = 1, w_b = 1/2`` (the dynamic problem whose
eigenvalues are the slopes of the Steklov eigenvalues in the width).  For
``dim >= 3``, ``a = omega_{n-1} rho^{n-1}`` and ``b = kappa rho^{n-2}`` where
``kappa`` is the angular constant selected by ``convention``; the endpoint
weight is ``eps^{2-n}``.  The Dirichlet variant drops the endpoint masses and
pins both ends to zero.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidGrid, NoBracket, PoleAt, ValidationError
from .geometry import TubeProfile


def omega(n):
    """Lebesgue measure of the unit ball in R^n."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def angular_constant(n, convention="paper"):
    if convention == "paper":
        return omega(n - 2)
    if convention == "sphere":
        # surface measure of the unit (n-2)-sphere bounding a tube cross-section
        return (n - 1) * omega(n - 1)
    raise ValidationError(f"unknown angular constant convention {convention!r}")


@dataclass(frozen=True)
class Limit1DProblem:
    profile: TubeProfile
    L: float
    dim: int = 2
    P1: float = 2 * math.sqrt(math.pi)
    P2: float = 2 * math.sqrt(math.pi)
    w_b: float | None = None
    convention: str = "paper"

    @classmethod
    def ep4(cls, profile, L, dim, P1, P2, eps, convention="paper"):
        """The eps-dependent problem whose endpoint masses are ``P_i / eps^{n-2}``."""
        return cls(profile, L, dim, P1, P2, w_b=eps ** -(dim - 2), convention=convention)

    def validate(self):
        if not self.L > 0:
            raise ValidationError("L must be positive")
        if not (self.P1 > 0 and self.P2 > 0):
            raise ValidationError("P1 and P2 must be positive")
        if self.dim < 2:
            raise ValidationError("dim must be at least 2")
        if abs(self.profile.L - self.L) > 1e-12 * self.L:
            raise ValidationError("profile length does not match L")
        self.profile.check_positive()
        angular_constant(self.dim, self.convention)
        return self

    def boundary_weight(self):
        if self.w_b is not None:
            return float(self.w_b)
        if self.dim == 2:
            return 0.5
        raise ValidationError("dim >= 3 needs an explicit boundary weight (use Limit1DProblem.ep4)")

    def stiffness_coeff(self, x):
        rho = np.asarray(self.profile(x))
        if self.dim == 2:
            return rho
        return omega(self.dim - 1) * rho ** (self.dim - 1)

    def mass_coeff(self, x):
        rho = np.asarray(self.profile(x))
        if self.dim == 2:
            return np.ones_like(rho)
        return angular_constant(self.dim, self.convention) * rho ** (self.dim - 2)


@dataclass
class Spectrum1D:
    values: np.ndarray
    functions: np.ndarray   # (N+1, k) nodal values
    grid: np.ndarray        # (N+1,)
    gram: sp.csr_matrix     # weighted mass plus endpoint masses
    stiffness: sp.csr_matrix
    problem: Limit1DProblem
    kind: str = "dynamic"
    meta: dict = field(default_factory=dict)

    def orthonormality_defect(self):
        G = self.functions.T @ (self.gram @ self.functions)
        return float(np.max(np.abs(G - np.eye(G.shape[0]))))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "value"])
        first = 0 if self.kind == "dynamic" else 1
        for k, v in enumerate(self.values, start=first):
            w.writerow([k, format(float(v), ".17g")])
        return buf.getvalue()

    def to_json(self):
        first = 0 if self.kind == "dynamic" else 1
        return json.dumps({
            "kind": self.kind,
            "first_index": first,
            "values": [float(v) for v in self.values],
            "grid": self.grid.tolist(),
            "functions": self.functions.T.tolist(),
            **self.meta,
        })


def _check_grid(N, k_max):
    if N < 64:
        raise InvalidGrid("N must be at least 64")
    if k_max > N / 4:
        raise InvalidGrid("too many eigenvalues requested for this grid (k_max <= N/4)")


def assemble_1d(p: Limit1DProblem, N):
    """Tridiagonal stiffness and weighted mass (without endpoint masses) on N uniform intervals."""
    x = np.linspace(-p.L / 2, p.L / 2, N + 1)
    h = p.L / N
    a = np.asarray(p.stiffness_coeff(0.5 * (x[:-1] + x[1:])), float)
    b = np.asarray(p.mass_coeff(x), float)
    kd = np.zeros(N + 1)
    kd[:-1] += a / h
    kd[1:] += a / h
    K = sp.diags([kd, -a / h, -a / h], [0, 1, -1], format="csr")
    # exact integral of (linearly interpolated b) * phi_i * phi_j per element
    bl, br = b[:-1], b[1:]
    md = np.zeros(N + 1)
    md[:-1] += h * (3 * bl + br) / 12
    md[1:] += h * (bl + 3 * br) / 12
    off = h * (bl + br) / 12
    M = sp.diags([md, off, off], [0, 1, -1], format="csr")
    return x, K, M


def _lowest_pairs(K, M, nev):
    n = K.shape[0]
    if n <= 600:
        w, V = scipy.linalg.eigh(K.toarray(), M.toarray(), subset_by_index=[0, nev - 1])
    else:
        scale = float(np.max(K.diagonal()) / np.max(M.diagonal()))
        v0 = np.random.default_rng(0).standard_normal(n)
        w, V = spla.eigsh(K.tocsc(), k=nev, M=M.tocsc(), sigma=-1e-8 * scale, which="LM", tol=1e-14, v0=v0)
    order = np.argsort(w)
    w, V = w[order], V[:, order]
    # M-orthonormalize (ARPACK vectors are only orthogonal to working precision)
    G = V.T @ (M @ V)
    Lg = np.linalg.cholesky(0.5 * (G + G.T))
    V = np.linalg.solve(Lg, V.T).T
    pivot = np.argmax(np.abs(V), axis=0)
    V *= np.sign(V[pivot, np.arange(V.shape[1])])
    return w, V


def solve_dynamic_bc(p: Limit1DProblem, N=4096, k_max=5) -> Spectrum1D:
    """Eigenpairs 0 = lam_0 < lam_1 <= ... <= lam_k_max of the dynamic-boundary problem."""
    p.validate()
    _check_grid(N, k_max)
    wb = p.boundary_weight()
    x, K, M = assemble_1d(p, N)
    M = M.tolil()
    M[0, 0] += wb * p.P1
    M[N, N] += wb * p.P2
    M = M.tocsr()
    w, V = _lowest_pairs(K, M, k_max + 1)
    return Spectrum1D(w, V, x, M, K, p, kind="dynamic", meta={"boundary_weight": wb})


def solve_dirichlet_weighted(p: Limit1DProblem, N=4096, k_max=5) -> Spectrum1D:
    """Lowest ``k_max`` Dirichlet eigenvalues alpha_1 <= ... (values[0] is alpha_1)."""
    p.validate()
    _check_grid(N, k_max)
    x, K, M = assemble_1d(p, N)
    inner = slice(1, N)
    Ki, Mi = K[inner][:, inner].tocsr(), M[inner][:, inner].tocsr()
    w, Vi = _lowest_pairs(Ki, Mi, k_max)
    V = np.zeros((N + 1, k_max))
    V[1:N] = Vi
    return Spectrum1D(w, V, x, M, K, p, kind="dirichlet")


def inverse_profile_integral(p: Limit1DProblem, panels=2 ** 14):
    """Composite Simpson approximation of int rho^{1-n} over [-L/2, L/2]."""
    x = np.linspace(-p.L / 2, p.L / 2, panels + 1)
    y = np.asarray(p.profile(x), float) ** (1 - p.dim)
    return float(scipy.integrate.simpson(y, x=x))


def sigma1_closed_form(p: Limit1DProblem) -> float:
    """First nonzero limit eigenvalue for dim >= 3: omega_{n-1}(P1+P2) / (P1 P2 int rho^{1-n})."""
    p.validate()
    if p.dim < 3:
        raise ValidationError("the closed form applies to dim >= 3")
    I = inverse_profile_integral(p)
    return omega(p.dim - 1) * (p.P1 + p.P2) / (p.P1 * p.P2 * I)


def bisect(fun, lo, hi, xtol=1e-15, maxiter=300):
    """Plain bisection on a sign change of ``fun`` over [lo, hi]."""
    flo, fhi = fun(lo), fun(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise NoBracket(f"no sign change on [{lo}, {hi}]", interval=(lo, hi))
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= xtol * max(1.0, abs(mid)):
            break
        fm = fun(mid)
        if fm == 0:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def shooting_matrix(p: Limit1DProblem):
    """Fundamental matrix of (V, rho^{n-1} V')' = (rho^{1-n} Q, 0) across the tube, by adaptive RK."""
    n = p.dim

    def rhs(x, y):
        rho = float(p.profile(min(max(x, -p.L / 2), p.L / 2)))
        # columns: two independent solutions, state (V, Q)
        return np.array([y[1] / rho ** (n - 1), 0.0, y[3] / rho ** (n - 1), 0.0])

    sol = scipy.integrate.solve_ivp(rhs, (-p.L / 2, p.L / 2), [1.0, 0.0, 0.0, 1.0], method="DOP853",
                                    rtol=1e-13, atol=1e-15)
    y = sol.y[:, -1]
    return np.array([[y[0], y[2]], [y[1], y[3]]])


def sigma1_determinant_oracle(p: Limit1DProblem, lo=1e-8, hi=1e4) -> float:
    """Independent check of the closed form: bisect the 2x2 boundary determinant in sigma."""
    p.validate()
    if p.dim < 3:
        raise ValidationError("the determinant oracle applies to dim >= 3")
    Phi = shooting_matrix(p)
    w = omega(p.dim - 1)

    def det(s):
        # unknowns (V(-L/2), Q(-L/2)); rows are the left and right boundary conditions
        left = np.array([s * p.P1 / w, 1.0])
        right = Phi[1] - (s * p.P2 / w) * Phi[0]
        return left[0] * right[1] - left[1] * right[0]

    try:
        return bisect(det, lo, hi)
    except NoBracket as exc:
        raise NoBracket(f"determinant has no sign change in ({lo}, {hi})", interval=(lo, hi)) from exc


def g_eval(w, L, P1, P2):
    """cot(wL) minus the right-hand side of the constant-profile characteristic equation."""
    return 1.0 / math.tan(w * L) - (w * w * P1 * P2 - 4.0) / (2.0 * w * (P1 + P2))


def transcendental_roots(L, P1, P2, k_max):
    """Roots w_1 < ... < w_k_max with w_m in ((m-1) pi/L, m pi/L); mu_m = w_m^2."""
    if not (L > 0 and P1 > 0 and P2 > 0):
        raise ValidationError("L, P1 and P2 must be positive")
    roots = []
    step = math.pi / L
    for m in range(1, k_max + 1):
        lo, hi = (m - 1) * step, m * step
        # stay off the poles of cot at the interval ends
        a, b = lo + 1e-9 * step, hi - 1e-9 * step
        fa, fb = g_eval(a, L, P1, P2), g_eval(b, L, P1, P2)
        if not (fa > 0 > fb):
            raise NoBracket(f"expected g(+) > 0 > g(-) on interval {m}: ({lo}, {hi})", interval=(lo, hi))
        roots.append(bisect(lambda w: g_eval(w, L, P1, P2), a, b))
    return np.array(roots)


def f_eval(w, L):
    """g_eval specialized to two unit-area disks (P1 = P2 = 2 sqrt(pi))."""
    if not w > 0:
        raise ValidationError("w must be positive")
    m = round(w * L / math.pi)
    if abs(w * L - m * math.pi) < 1e-12:
        raise PoleAt(f"w*L = {w * L} is at a pole of cot")
    return 1.0 / math.tan(w * L) - (w * w * math.pi - 1.0) / (2.0 * math.sqrt(math.pi) * w)
