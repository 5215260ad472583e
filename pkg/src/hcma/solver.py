"""Damped Newton solver for the regularized Monge-Ampere Dirichlet problem.

The scalar equation solved on [0,1]_t x T^2 is

    Phi_tt (1 + a) - |Phi_tzbar|^2 = eps_tilde(t),      a = Phi_zzbar,

with Dirichlet data on the t = 0, 1 planes.  In Annulus mode
eps_tilde(t) = 4 eps e^{2t}, the pullback of the constant right-hand side
eps on the annulus {1 < |tau| < e} under tau = e^{t+is}; Constant mode uses
eps_tilde = eps0 directly.  A field-valued right-hand side (FieldRhs) exists
solely for manufactured-solution testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid, ScalarField
from .quantities import NonConvexBoundaryError


class SolverError(RuntimeError):
    pass


class InadmissibleStateError(SolverError):
    """Iterate left the admissible cone (1 + a > 0, det h > 0)."""


class ContinuationFailure(SolverError):
    def __init__(self, index: int, epsilon: float, solution: "Solution"):
        super().__init__(
            f"continuation rung {index} (eps={epsilon}) failed: {solution.message}")
        self.index = index
        self.epsilon = epsilon
        self.solution = solution


# --- right-hand sides --------------------------------------------------------

@dataclass(frozen=True)
class ConstantProfile:
    """eps_tilde(t) = eps0."""

    epsilon0: float

    def __post_init__(self):
        if self.epsilon0 <= 0:
            raise ValueError(f"epsilon0 must be positive, got {self.epsilon0}")

    def tilde(self, t):
        return self.epsilon0 * np.ones_like(np.asarray(t, dtype=float))

    def rhs_on(self, grid: Grid) -> np.ndarray:
        return np.broadcast_to(
            self.tilde(grid.t_values)[:, None, None], grid.shape)

    @property
    def max_tilde(self) -> float:
        return self.epsilon0

    @property
    def min_tilde(self) -> float:
        return self.epsilon0

    def describe(self) -> str:
        return f"constant(eps0={self.epsilon0})"


@dataclass(frozen=True)
class AnnulusProfile:
    """eps_tilde(t) = 4 eps e^{2t} (annulus {1<|tau|<e} pulled back to the strip)."""

    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    def tilde(self, t):
        return 4.0 * self.epsilon * np.exp(2.0 * np.asarray(t, dtype=float))

    def rhs_on(self, grid: Grid) -> np.ndarray:
        return np.broadcast_to(
            self.tilde(grid.t_values)[:, None, None], grid.shape)

    @property
    def max_tilde(self) -> float:
        return 4.0 * self.epsilon * math.exp(2.0)

    @property
    def min_tilde(self) -> float:
        return 4.0 * self.epsilon

    def describe(self) -> str:
        return f"annulus(eps={self.epsilon})"


class FieldRhs:
    """Explicit right-hand-side field f(t, x, y); manufactured solutions only."""

    def __init__(self, grid: Grid, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError(f"rhs shape {values.shape} != grid {grid.shape}")
        self.grid = grid
        self.values = values.copy()

    def rhs_on(self, grid: Grid) -> np.ndarray:
        if grid.shape != self.grid.shape:
            raise ValueError("rhs defined on a different grid")
        return self.values

    @property
    def max_tilde(self) -> float:
        return float(self.values.max())

    @property
    def min_tilde(self) -> float:
        return float(self.values.min())

    def describe(self) -> str:
        return "field-rhs(manufactured)"


# --- boundary data -----------------------------------------------------------

@dataclass(frozen=True)
class BoundarySpec:
    """Boundary potentials phi0, phi1 as finite lists of Fourier modes.

    Each mode is (kx, ky, amplitude); the evaluated field is
    Re sum_m amp_m exp(2 pi i (kx x + ky y)).  Convexity (1 + a > 0 and
    |b| < 1 + a at every node) is checked from the analytic mode derivatives
    when the spec is evaluated on a grid.
    """

    phi0: tuple = ()
    phi1: tuple = ()

    @staticmethod
    def _eval_modes(modes, grid: Grid) -> np.ndarray:
        x = grid.x_values[:, None]
        y = grid.y_values[None, :]
        out = np.zeros((grid.nx, grid.ny))
        for kx, ky, amp in modes:
            out += (complex(amp) * np.exp(2j * np.pi * (kx * x + ky * y))).real
        return out

    @staticmethod
    def _mode_jets(modes, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
        """Analytic (a, b) of the evaluated field on the torus grid."""
        x = grid.x_values[:, None]
        y = grid.y_values[None, :]
        gxx = np.zeros((grid.nx, grid.ny), dtype=complex)
        gxy = np.zeros_like(gxx)
        gyy = np.zeros_like(gxx)
        for kx, ky, amp in modes:
            e = complex(amp) * np.exp(2j * np.pi * (kx * x + ky * y))
            gxx += (2j * np.pi * kx) ** 2 * e
            gxy += (2j * np.pi * kx) * (2j * np.pi * ky) * e
            gyy += (2j * np.pi * ky) ** 2 * e
        pxx, pxy, pyy = gxx.real, gxy.real, gyy.real
        c1, c2 = grid.lattice.dz_coefficients
        a = (abs(c1) ** 2 * pxx + 2 * (c1 * np.conj(c2)).real * pxy
             + abs(c2) ** 2 * pyy)
        b = c1 ** 2 * pxx + 2 * c1 * c2 * pxy + c2 ** 2 * pyy
        return a, b

    def evaluate(self, grid: Grid, which: int) -> np.ndarray:
        return self._eval_modes(self.phi0 if which == 0 else self.phi1, grid)

    def analytic_jets(self, grid: Grid, which: int):
        return self._mode_jets(self.phi0 if which == 0 else self.phi1, grid)

    def validate(self, grid: Grid) -> None:
        for which in (0, 1):
            a, b = self.analytic_jets(grid, which)
            gap = (1.0 + a) - np.abs(b)
            bad = np.unravel_index(np.argmin(gap), gap.shape)
            if gap[bad] <= 0.0 or (1.0 + a)[bad] <= 0.0:
                raise NonConvexBoundaryError(
                    f"phi{which} not omega_0-convex: gap {gap[bad]:.3e} at "
                    f"node (x,y)={bad}")

    def scaled(self, lam: float) -> "BoundarySpec":
        sc = lambda modes: tuple((kx, ky, lam * complex(amp))
                                 for kx, ky, amp in modes)
        return BoundarySpec(phi0=sc(self.phi0), phi1=sc(self.phi1))

    def describe(self) -> str:
        fmt = lambda modes: ";".join(
            f"({kx},{ky},{complex(amp)})" for kx, ky, amp in modes) or "0"
        return f"phi0=[{fmt(self.phi0)}] phi1=[{fmt(self.phi1)}]"


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    max_halvings: int = 30
    admissibility_margin: float = 1e-8
    linear_rtol: float = 1e-12

    def __post_init__(self):
        for name in ("newton_tol", "admissibility_margin", "linear_rtol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class Solution:
    phi: ScalarField
    grid: Grid
    profile: object
    boundary: BoundarySpec
    converged: bool
    final_residual: float
    iterations: int
    residual_history: list = dc_field(default_factory=list)
    message: str = "ok"

    def interior_one_plus_a(self) -> np.ndarray:
        return 1.0 + self.phi.jets.a[1:-1]

    def interior_det_h(self) -> np.ndarray:
        """det of the strip-frame h matrix = (Phi_tt(1+a) - |Phi_tzbar|^2)/4."""
        j = self.phi.jets
        return 0.25 * (j.d_tt[1:-1] * (1.0 + j.a[1:-1])
                       - np.abs(j.d_tzb[1:-1]) ** 2)

    @property
    def admissible(self) -> bool:
        return (self.interior_one_plus_a().min() > 0.0
                and self.interior_det_h().min() > 0.0)


# --- residual and linearization ---------------------------------------------

def residual(phi: ScalarField, profile) -> ScalarField:
    """Interior residual Phi_tt (1+a) - |Phi_tzbar|^2 - eps_tilde; boundary 0."""
    grid = phi.grid
    j = phi.jets
    rhs = profile.rhs_on(grid)
    r = np.zeros(grid.shape)
    r[1:-1] = (j.d_tt[1:-1] * (1.0 + j.a[1:-1])
               - np.abs(j.d_tzb[1:-1]) ** 2 - rhs[1:-1])
    return ScalarField(grid, r)


def _admissibility(phi: ScalarField):
    j = phi.jets
    opa = 1.0 + j.a[1:-1]
    quad = j.d_tt[1:-1] * opa - np.abs(j.d_tzb[1:-1]) ** 2
    return float(opa.min()), float(quad.min())


def _coefficient_planes(phi: ScalarField):
    """Interior coefficient arrays of the first variation, keyed by stencil."""
    grid = phi.grid
    c1, c2 = grid.lattice.dz_coefficients
    j = phi.jets
    opa = 1.0 + j.a[1:-1]
    phitt = j.d_tt[1:-1]
    w = j.d_tz[1:-1]                     # conj(Phi_tzbar) for real Phi
    return {
        "ptt": opa,
        "pxx": phitt * abs(c1) ** 2,
        "pyy": phitt * abs(c2) ** 2,
        "pxy": phitt * 2.0 * (c1 * np.conj(c2)).real,
        "ptx": -2.0 * (w * np.conj(c1)).real,
        "pty": -2.0 * (w * np.conj(c2)).real,
    }


def linearize(phi: ScalarField, profile=None) -> sp.csr_matrix:
    """Exact Jacobian of the interior residual; identity rows on t-planes.

    First variation: (1+a) dPhi_tt + Phi_tt da - 2 Re(Phi_tz dPhi_tzbar),
    expressed through the same central stencils the residual uses, so Newton
    is exactly quadratic.
    """
    grid = phi.grid
    opa_min, quad_min = _admissibility(phi)
    if opa_min <= 0.0 or quad_min <= 0.0:
        raise InadmissibleStateError(
            f"min(1+a)={opa_min:.3e}, min(det-form)={quad_min:.3e}")
    nt, nx, ny = grid.shape
    ht, hx, hy = grid.ht, grid.hx, grid.hy

    c = _coefficient_planes(phi)
    ptt, pxx, pyy = c["ptt"], c["pxx"], c["pyy"]
    pxy, ptx, pty = c["pxy"], c["ptx"], c["pty"]

    it, ix, iy = np.meshgrid(np.arange(1, nt - 1), np.arange(nx),
                             np.arange(ny), indexing="ij")
    flat = lambda t, x, y: (t * nx + x % nx) * ny + y % ny
    rows_c = flat(it, ix, iy).ravel()

    rows, cols, vals = [], [], []

    def leg(dt, dx, dy, coeff):
        rows.append(rows_c)
        cols.append(flat(it + dt, ix + dx, iy + dy).ravel())
        vals.append(np.broadcast_to(coeff, it.shape).ravel())

    leg(0, 0, 0, -2 * ptt / ht**2 - 2 * pxx / hx**2 - 2 * pyy / hy**2)
    leg(1, 0, 0, ptt / ht**2)
    leg(-1, 0, 0, ptt / ht**2)
    leg(0, 1, 0, pxx / hx**2)
    leg(0, -1, 0, pxx / hx**2)
    leg(0, 0, 1, pyy / hy**2)
    leg(0, 0, -1, pyy / hy**2)
    cxy = pxy / (4 * hx * hy)
    for sx, sy in ((1, 1), (-1, -1)):
        leg(0, sx, sy, cxy)
    for sx, sy in ((1, -1), (-1, 1)):
        leg(0, sx, sy, -cxy)
    ctx = ptx / (4 * ht * hx)
    for st, sx in ((1, 1), (-1, -1)):
        leg(st, sx, 0, ctx)
    for st, sx in ((1, -1), (-1, 1)):
        leg(st, sx, 0, -ctx)
    cty = pty / (4 * ht * hy)
    for st, sy in ((1, 1), (-1, -1)):
        leg(st, 0, sy, cty)
    for st, sy in ((1, -1), (-1, 1)):
        leg(st, 0, sy, -cty)

    # Dirichlet planes as identity rows
    n_bnd = 2 * nx * ny
    bt, bx, by = np.meshgrid(np.array([0, nt - 1]), np.arange(nx),
                             np.arange(ny), indexing="ij")
    bidx = flat(bt, bx, by).ravel()
    rows.append(bidx)
    cols.append(bidx)
    vals.append(np.ones(n_bnd))

    n = grid.n_nodes
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n))
    return mat.tocsr()


class _SeparablePreconditioner:
    """Fast approximate inverse of the Jacobian.

    Uses the separable averaged operator ptt(t) d_tt + pxx(t) d_xx +
    pyy(t) d_yy (plane means of the true coefficients, mixed terms dropped):
    FFT-diagonal in the periodic x, y directions, tridiagonal in t, solved
    by a vectorized Thomas sweep.  The true operator differs only by small
    variable-coefficient and mixed-stencil corrections, so preconditioned
    GMRES converges in a handful of iterations.
    """

    def __init__(self, grid: Grid, coeffs: dict):
        nt, nx, ny = grid.shape
        self.grid = grid
        ptt_t = coeffs["ptt"].mean(axis=(1, 2))        # (nt-2,)
        pxx_t = coeffs["pxx"].mean(axis=(1, 2))
        pyy_t = coeffs["pyy"].mean(axis=(1, 2))
        lam_x = (2.0 * np.cos(2.0 * np.pi * np.arange(nx) / nx) - 2.0) / grid.hx**2
        lam_y = (2.0 * np.cos(2.0 * np.pi * np.arange(ny) / ny) - 2.0) / grid.hy**2
        # per-mode diagonal shift, shape (nt-2, nx, ny)
        self.mu = (pxx_t[:, None, None] * lam_x[None, :, None]
                   + pyy_t[:, None, None] * lam_y[None, None, :])
        self.off = ptt_t / grid.ht**2                  # sub/super-diagonal
        self.diag = -2.0 * self.off[:, None, None] + self.mu

    def solve(self, v: np.ndarray) -> np.ndarray:
        grid = self.grid
        nt, nx, ny = grid.shape
        r = v.reshape(grid.shape)
        out = np.empty(grid.shape)
        out[0], out[-1] = r[0], r[-1]                  # identity rows
        rhs = np.fft.fft2(r[1:-1], axes=(1, 2))
        z0 = np.fft.fft2(r[0])
        z1 = np.fft.fft2(r[-1])
        rhs = rhs.copy()
        rhs[0] -= self.off[0] * z0
        rhs[-1] -= self.off[-1] * z1
        # Thomas sweep over the t-index, vectorized over all (kx, ky) modes
        m = nt - 2
        cp = np.empty_like(rhs)
        dp = np.empty_like(rhs)
        cp[0] = self.off[0] / self.diag[0]
        dp[0] = rhs[0] / self.diag[0]
        for k in range(1, m):
            denom = self.diag[k] - self.off[k] * cp[k - 1]
            cp[k] = self.off[k] / denom
            dp[k] = (rhs[k] - self.off[k] * dp[k - 1]) / denom
        z = np.empty_like(rhs)
        z[m - 1] = dp[m - 1]
        for k in range(m - 2, -1, -1):
            z[k] = dp[k] - cp[k] * z[k + 1]
        out[1:-1] = np.fft.ifft2(z, axes=(1, 2)).real
        return out.ravel()

    def as_operator(self) -> spla.LinearOperator:
        n = self.grid.n_nodes
        return spla.LinearOperator((n, n), matvec=self.solve)


def _solve_linear(grid: Grid, jac: sp.csr_matrix, rhs: np.ndarray,
                  coeffs: dict, rtol: float) -> np.ndarray | None:
    """Solve jac @ x = rhs to relative residual <= rtol, or return None.

    Preconditioned GMRES first; sparse direct factorization as fallback.
    """
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        return np.zeros_like(rhs)
    M = _SeparablePreconditioner(grid, coeffs).as_operator()
    x, info = spla.gmres(jac, rhs, M=M, rtol=0.1 * rtol, atol=0.0,
                         restart=60, maxiter=20)
    if info == 0 and np.linalg.norm(jac @ x - rhs) <= rtol * rhs_norm:
        return x
    try:
        lu = spla.splu(jac.tocsc())
        x = lu.solve(rhs)
    except RuntimeError:
        return None
    if np.linalg.norm(jac @ x - rhs) <= rtol * max(1.0, rhs_norm):
        return x
    return None


# --- Newton iteration --------------------------------------------------------

def default_initial_guess(grid: Grid, boundary: BoundarySpec, profile) -> ScalarField:
    """Linear blend of the boundary data plus a convex-in-t parabola.

    Phi0 = (1-t) phi0 + t phi1 + (max eps_tilde / 2) t(t-1), so that
    Phi0_tt = max eps_tilde > 0 keeps the first iterates admissible.
    """
    t = grid.t_values[:, None, None]
    p0 = boundary.evaluate(grid, 0)[None]
    p1 = boundary.evaluate(grid, 1)[None]
    c0 = 0.5 * profile.max_tilde
    vals = (1.0 - t) * p0 + t * p1 + c0 * t * (t - 1.0)
    return ScalarField(grid, vals)


def newton_solve(grid: Grid, boundary: BoundarySpec, profile,
                 config: SolverConfig = SolverConfig(),
                 initial: ScalarField | None = None) -> Solution:
    """Damped Newton with admissibility-guarded backtracking line search."""
    boundary.validate(grid)
    if profile.min_tilde <= 0.0:
        raise ValueError("right-hand side must be strictly positive")

    phi = initial if initial is not None else default_initial_guess(
        grid, boundary, profile)
    # adjust to the exact Dirichlet data by a linear-in-t lift, so a warm
    # start with different boundary values stays smooth in t
    t = grid.t_values[:, None, None]
    vals = (phi.values
            + (1.0 - t) * (boundary.evaluate(grid, 0) - phi.values[0])[None]
            + t * (boundary.evaluate(grid, 1) - phi.values[-1])[None])
    vals[0] = boundary.evaluate(grid, 0)
    vals[-1] = boundary.evaluate(grid, 1)
    phi = ScalarField(grid, vals)
    if initial is not None:
        opa_min, quad_min = _admissibility(phi)
        if opa_min <= 0.0 or quad_min <= 0.0:
            phi = default_initial_guess(grid, boundary, profile)

    margin = config.admissibility_margin
    floor_quad = margin * profile.min_tilde
    history = []

    def fail(msg, rn, k):
        return Solution(phi=phi, grid=grid, profile=profile, boundary=boundary,
                        converged=False, final_residual=rn, iterations=k,
                        residual_history=history, message=msg)

    r = residual(phi, profile)
    rn = float(np.abs(r.values[1:-1]).max())
    history.append(rn)
    for k in range(config.max_newton_iters):
        if rn <= config.newton_tol:
            return Solution(phi=phi, grid=grid, profile=profile,
                            boundary=boundary, converged=True,
                            final_residual=rn, iterations=k,
                            residual_history=history)
        try:
            jac = linearize(phi, profile)
        except InadmissibleStateError as exc:
            return fail(f"inadmissible iterate: {exc}", rn, k)
        rhs = -r.values.ravel()
        step = _solve_linear(grid, jac, rhs, _coefficient_planes(phi),
                             config.linear_rtol)
        if step is None:
            return fail("linear-solve-failure", rn, k)
        step = step.reshape(grid.shape)
        s = 1.0
        accepted = None
        for _ in range(config.max_halvings + 1):
            cand = ScalarField(grid, phi.values + s * step)
            opa_min, quad_min = _admissibility(cand)
            if opa_min > margin and quad_min > floor_quad:
                rc = residual(cand, profile)
                rcn = float(np.abs(rc.values[1:-1]).max())
                if rcn < rn:
                    accepted = (cand, rc, rcn)
                    break
            s *= 0.5
        if accepted is None:
            return fail("line-search-exhausted", rn, k)
        phi, r, rn = accepted
        history.append(rn)

    if rn <= config.newton_tol:
        return Solution(phi=phi, grid=grid, profile=profile, boundary=boundary,
                        converged=True, final_residual=rn,
                        iterations=config.max_newton_iters,
                        residual_history=history)
    return fail("max-iterations-exceeded", rn, config.max_newton_iters)


def continuation_solve(grid: Grid, boundary: BoundarySpec, schedule,
                       config: SolverConfig = SolverConfig(),
                       make_profile=AnnulusProfile) -> list[Solution]:
    """Solve along a strictly decreasing epsilon schedule with warm starts."""
    schedule = list(schedule)
    if not schedule or any(e <= 0 for e in schedule):
        raise ValueError("schedule must be non-empty and positive")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly decreasing")
    out = []
    warm = None
    for k, eps in enumerate(schedule):
        sol = newton_solve(grid, boundary, make_profile(eps), config,
                           initial=warm)
        if not sol.converged:
            raise ContinuationFailure(k, eps, sol)
        out.append(sol)
        warm = sol.phi
    return out


def lambda_sweep(grid: Grid, boundary: BoundarySpec, lambdas, profile,
                 config: SolverConfig = SolverConfig()) -> list[Solution]:
    """Solve with boundary data scaled by each lambda in a non-decreasing ladder."""
    lambdas = list(lambdas)
    if any(l < 0 or l > 1 for l in lambdas):
        raise ValueError("lambdas must lie in [0, 1]")
    if any(b < a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambda ladder must be non-decreasing")
    out = []
    warm = None
    for k, lam in enumerate(lambdas):
        sol = newton_solve(grid, boundary.scaled(lam), profile, config,
                           initial=warm)
        if not sol.converged:
            raise ContinuationFailure(k, lam, sol)
        out.append(sol)
        warm = sol.phi
    return out
