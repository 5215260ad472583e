"""Pointwise estimate machinery: a, b, Q, cones, and the K/P matrix algebra.

Two layers live here.  The torus layer (TorusPointState and friends) works
with the pure second-derivative quantity Q = |b|^2/(1+a)^2 used by the
convexity, lower-bound and upper-bound checks.  The general-n flat layer
(general_flat_state) evaluates the composite Q = Q_A + Q_B + Q_G together
with the coefficient matrices of the scaled product-space Laplacian and the
non-negative terms E, P, T, for an arbitrary complex dimension n with flat
background metric.  At n = 1 the two layers must agree exactly; that cross
check is part of the test suite.

Index conventions: g^{ab*} is stored as the matrix conj(inv(G)) where
G[a, b] = g_{ab*}; with that choice any contraction h^{ij*} X_{ij*} of
Hermitian matrices is tr(inv(H) @ X).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import (Jet, ScalarField, dt1, dt2, wirt_z, wirt_zbar,
                   wirt_zzbar)


class DegenerateMetricError(ValueError):
    """1 + a vanished (or g lost positivity) where a metric is required."""


class NonConvexBoundaryError(ValueError):
    """Boundary data violates strict omega_0-convexity."""


class InfeasibleKError(ValueError):
    """No K can dominate a boundary Q that reaches 1."""


# --- torus layer -------------------------------------------------------------

@dataclass(frozen=True)
class TorusPointState:
    """Second-order state of a potential at one point of the torus problem."""

    a: float
    b: complex
    one_plus_a: float
    Q: float
    h: np.ndarray | None = None       # 2x2 Hermitian, strip (zeta, z) frame
    det_h: float | None = None
    epsilon_tilde: float | None = None

    @classmethod
    def from_ab(cls, a: float, b: complex) -> "TorusPointState":
        if 1.0 + a == 0.0:
            raise DegenerateMetricError("1 + a = 0")
        return cls(a=a, b=complex(b), one_plus_a=1.0 + a,
                   Q=abs(b) ** 2 / (1.0 + a) ** 2)


def torus_state(jet: Jet, epsilon_tilde: float | None = None) -> TorusPointState:
    """Build the pointwise state from a jet.

    The h-matrix is assembled in strip coordinates: Phi_zetazetabar =
    Phi_tt/4 and Phi_zetazbar = Phi_tzbar/2 for Im(zeta)-independent fields.
    """
    a = jet.a
    if 1.0 + a == 0.0:
        raise DegenerateMetricError("1 + a = 0")
    pzz = 0.25 * jet.d_tt
    pzzb = 0.5 * jet.d_tzb
    h = np.array([[pzz, pzzb], [np.conj(pzzb), 1.0 + a]], dtype=complex)
    det_h = pzz * (1.0 + a) - abs(pzzb) ** 2
    return TorusPointState(
        a=a, b=jet.b, one_plus_a=1.0 + a,
        Q=abs(jet.b) ** 2 / (1.0 + a) ** 2,
        h=h, det_h=float(det_h), epsilon_tilde=epsilon_tilde)


def q_gamma(state: TorusPointState, gamma: complex) -> float:
    """Shifted quantity |b - gamma|^2 / (1+a)^2."""
    if state.one_plus_a <= 0.0:
        raise DegenerateMetricError(f"1 + a = {state.one_plus_a} <= 0")
    return abs(state.b - gamma) ** 2 / state.one_plus_a ** 2


def cone_membership(b: complex, a: float, gamma: complex) -> bool:
    """Strict membership in the cone C_gamma = {|b - gamma| < 1 + a, a > -1}."""
    return a > -1.0 and abs(b - gamma) < a + 1.0


def boundary_S(boundary_jets) -> float:
    """max over boundary of (a + 1 + |b|); bounds |b| + a + 1 in the interior."""
    pairs = list(boundary_jets)
    if not pairs:
        raise ValueError("empty boundary jet list")
    return max(a + 1.0 + abs(b) for a, b in pairs)


def boundary_delta(boundary_jets) -> float:
    """Boundary gap delta = min over boundary of ((1 + a) - |b|).

    For every |gamma| <= gamma' < delta the shifted quantity q_gamma stays
    below 1 on the whole boundary; the interior metric bound 1 + a > delta
    follows.  Raises when the boundary is not strictly omega_0-convex.
    """
    pairs = list(boundary_jets)
    if not pairs:
        raise ValueError("empty boundary jet list")
    delta = min((1.0 + a) - abs(b) for a, b in pairs)
    if delta <= 0.0:
        raise NonConvexBoundaryError(
            f"boundary gap {delta} <= 0: data not strictly omega_0-convex")
    return delta


def sigma_roots(K: float) -> tuple[float, float]:
    """Roots sigma_1 < 0 < sigma_2 < 1 of -Q^2 + (1 - 1/K) Q + 1/(2K)."""
    if K <= 0.0:
        raise ValueError(f"K must be positive, got {K}")
    s = math.sqrt(1.0 + 1.0 / K**2)
    return (1.0 - 1.0 / K - s) / 2.0, (1.0 - 1.0 / K + s) / 2.0


def choose_K(max_boundary_Q: float) -> int:
    """Smallest integer K >= 3 with sigma_2(K) > max_boundary_Q."""
    if not (0.0 <= max_boundary_Q < 1.0):
        raise InfeasibleKError(
            f"sigma_2 < 1 for every K; boundary Q = {max_boundary_Q} >= 1 "
            "cannot be dominated")
    K = 3
    while sigma_roots(K)[1] <= max_boundary_Q:
        K += 1
    return K


def m_matrix(K: float, state: TorusPointState) -> tuple[np.ndarray, float, float]:
    """Matrix M of the e^{KQ} subharmonicity argument.

    Returns (M, det(M), closed-form det) where the closed form is
    2K [-Q^2 + (1 - 1/K) Q + 1/(2K)]; the two determinants must agree to
    1e-12 relative.
    """
    if state.one_plus_a <= 0.0:
        raise DegenerateMetricError(f"1 + a = {state.one_plus_a} <= 0")
    Q = state.Q
    w = state.b ** 2 / state.one_plus_a ** 2
    M = np.array([[1.0 + K * Q, K * np.conj(w)],
                  [K * w, 1.0 - 2.0 * Q + K * Q]], dtype=complex)
    det = float(np.linalg.det(M).real)
    closed = 2.0 * K * (-Q**2 + (1.0 - 1.0 / K) * Q + 1.0 / (2.0 * K))
    return M, det, closed


def n_matrix(P: float, state: TorusPointState, eta: complex) -> np.ndarray:
    """Matrix N of the upper-bound (cone complement) argument.

    N is positive semidefinite once Q_eta exceeds the larger root
    sigma_2'(P) = (1 + 1/P + sqrt(1 + 1/P^2)) / 2 of
    Q^2 - (1 + 1/P) Q + 1/(2P).
    """
    if P <= 1.0:
        raise ValueError(f"P must exceed 1, got {P}")
    if state.one_plus_a <= 0.0:
        raise DegenerateMetricError(f"1 + a = {state.one_plus_a} <= 0")
    Qe = q_gamma(state, eta)
    w = (state.b - eta) ** 2 / state.one_plus_a ** 2
    return np.array([[P * Qe - 1.0, P * np.conj(w)],
                     [P * w, (P + 2.0) * Qe - 1.0]], dtype=complex)


def sigma2_prime(P: float) -> float:
    """Larger root of Q^2 - (1 + 1/P) Q + 1/(2P); threshold for N >= 0."""
    return 0.5 * (1.0 + 1.0 / P + math.sqrt(1.0 + 1.0 / P**2))


# --- general-n flat layer ----------------------------------------------------

@dataclass(frozen=True)
class FlatJet:
    """Derivative data of a potential at one point, flat background, dim n.

    A[t, g] = Phi_{t gbar} (Hermitian), B[t, g] = Phi_{,tg} (symmetric),
    grad[a] = Phi_a, tau_alphabar[a] = Phi_{tau abar}, tau_alpha[a] =
    Phi_{tau a}.  Third-derivative blocks are indexed with the product-space
    index i in {tau, 1..n} first: A_d[i, t, g] = A_{t gbar, i} and
    B_dbar[j, t, g] = B_{tg, jbar}.
    """

    A: np.ndarray
    B: np.ndarray
    grad: np.ndarray
    tau_alphabar: np.ndarray
    tau_alpha: np.ndarray
    A_d: np.ndarray
    B_dbar: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class GeneralFlatState:
    n: int
    g: np.ndarray
    Q_A: float
    Q_B: float
    Q_G: float
    Q: float
    T: float
    P: float
    E: float
    L_coeff: np.ndarray       # (n+1)x(n+1) Hermitian
    p_coeff: np.ndarray       # (n+1)x(n+1) Hermitian, rank 1, PSD


def general_flat_state(jet: FlatJet, epsilon_over_gratio: float) -> GeneralFlatState:
    """Composite quantity Q = Q_A + Q_B + Q_G and the L/p coefficient matrices.

    Flat background: covariant derivatives are plain derivatives and the
    curvature terms vanish identically.  epsilon_over_gratio is the scalar
    eps*b/g multiplying the background-metric block of L; at n = 1 on the
    strip it equals eps_tilde / (4 (1+a)).
    """
    n = jet.n
    G = np.eye(n, dtype=complex) + jet.A
    eigmin = float(np.linalg.eigvalsh(G).min())
    if eigmin <= 0.0:
        raise DegenerateMetricError(f"g = I + A has min eigenvalue {eigmin} <= 0")
    gup = np.conj(np.linalg.inv(G))          # gup[a, b] = g^{a bbar}

    A, B = jet.A, jet.B
    Q_B = np.einsum("ab,gt,at,bg->", B, np.conj(B), gup, gup).real
    Q_A = np.einsum("ab,gt,at,gb->", A, A, gup, gup).real
    Q_G = np.einsum("a,b,ab->", jet.grad, np.conj(jet.grad), gup).real

    m = jet.tau_alphabar                      # Phi_{tau abar}
    T = (np.einsum("b,a,ab->", m, np.conj(m), gup)
         + np.einsum("a,b,ab->", jet.tau_alpha, np.conj(jet.tau_alpha), gup)).real

    # v_i = (1, -g^{a tbar} Phi_{tau tbar}); p = v v^*, L = p + ratio * diag(0, gup)
    v = np.empty(n + 1, dtype=complex)
    v[0] = 1.0
    v[1:] = -gup @ m
    p_coeff = np.outer(v, np.conj(v))
    L_coeff = p_coeff.copy()
    L_coeff[1:, 1:] += epsilon_over_gratio * gup

    Ad, Bd = jet.A_d, jet.B_dbar
    Ad_s, Bd_s = Ad[1:], Bd[1:]               # spatial derivative slots only
    E = (np.einsum("atg,bzh,ba,th,gz->", Bd_s, np.conj(Bd_s), gup, gup, gup)
         + np.einsum("atg,bzh,ab,hg,tz->", Ad_s, np.conj(Ad_s), gup, gup, gup)).real
    P = (np.einsum("jtg,izh,ij,th,gz->", Bd, np.conj(Bd), p_coeff, gup, gup)
         + np.einsum("itg,jzh,ij,hg,tz->", Ad, np.conj(Ad), p_coeff, gup, gup)).real

    return GeneralFlatState(
        n=n, g=G, Q_A=float(Q_A), Q_B=float(Q_B), Q_G=float(Q_G),
        Q=float(Q_A + Q_B + Q_G), T=float(T), P=float(P), E=float(E),
        L_coeff=L_coeff, p_coeff=p_coeff)


# --- solution-level operators (n = 1, strip frame) ---------------------------

class InadmissibleSolutionError(ValueError):
    """Operator application requested on a non-admissible solution."""


def _strip_frame(solution):
    """Interior arrays (g, m, q, det) of the strip h-matrix [[q, m], [m*, g]].

    q = Phi_tt/4, m = Phi_tzbar/2, g = 1 + a; det = q g - |m|^2.
    """
    j = solution.phi.jets
    g = 1.0 + j.a[1:-1]
    m = 0.5 * j.d_tzb[1:-1]
    q = 0.25 * j.d_tt[1:-1]
    det = q * g - np.abs(m) ** 2
    if g.min() <= 0.0 or det.min() <= 0.0:
        raise InadmissibleSolutionError(
            f"min(1+a)={g.min():.3e}, min(det h)={det.min():.3e}")
    return g, m, q, det


def h_contract(solution, values: np.ndarray) -> np.ndarray:
    """Interior h^{ij*} w_{ij*} of a (possibly complex) grid array w.

    Second derivatives of w are realized through the strip identities
    w_zetazetabar = w_tt/4, w_zeta zbar = w_tzbar/2 (w s-independent);
    the contraction is tr(inv(H) @ W) with the solution's h-matrix.
    """
    grid = solution.grid
    if values.shape != grid.shape:
        raise ValueError("field shape does not match the solution grid")
    g, m, q, det = _strip_frame(solution)
    w_zz = 0.25 * dt2(grid, values)[1:-1]
    w_zzbar = wirt_zzbar(grid, values)[1:-1]
    w_tz = dt1(grid, wirt_z(grid, values))[1:-1]
    w_tzb = dt1(grid, wirt_zbar(grid, values))[1:-1]
    return (g * w_zz - m * 0.5 * w_tz - np.conj(m) * 0.5 * w_tzb
            + q * w_zzbar) / det


def l_coefficient_fields(solution):
    """Interior coefficient arrays of L = p + (eps b/g) diag(0, g^{-1}).

    Returns (L00, L01, L10, L11) with L[w] = L00 w_zetazetabar +
    L01 w_zeta zbar + L10 w_z zetabar + L11 w_z zbar; L00 is identically 1.
    The scalar eps b/g at n = 1 on the strip is eps_tilde / (4 (1+a)).
    """
    g, m, _, _ = _strip_frame(solution)
    ratio = solution.profile.rhs_on(solution.grid)[1:-1] / (4.0 * g)
    L00 = np.ones_like(g)
    L01 = -np.conj(m) / g
    L10 = -m / g
    L11 = np.abs(m) ** 2 / g**2 + ratio / g
    return L00, L01, L10, L11


def apply_L(solution, field: ScalarField) -> ScalarField:
    """Scaled product-space Laplacian L^{ij*} w_{ij*} of a real field.

    Interior values only; boundary planes are set to 0.
    """
    grid = solution.grid
    if field.grid.shape != grid.shape:
        raise ValueError("field lives on a different grid")
    L00, L01, L10, L11 = l_coefficient_fields(solution)
    j = field.jets
    w_zz = 0.25 * j.d_tt[1:-1]
    w_tz = 0.5 * j.d_tz[1:-1]
    w_tzb = 0.5 * j.d_tzb[1:-1]
    w_zzbar = j.a[1:-1]
    out = np.zeros(grid.shape)
    out[1:-1] = (L00 * w_zz + L01 * w_tzb + L10 * w_tz + L11 * w_zzbar).real
    return ScalarField(grid, out)


def flat_jet_from_torus(jet: Jet, strip: bool = True) -> FlatJet:
    """Package an order-3 torus jet as an n=1 FlatJet in strip normalization.

    Strip normalization: Phi_zetazbar = Phi_tzbar / 2 and derivative slots
    along zeta carry the factor 1/2 from d/dzeta = (d/dt)/2 on
    Im(zeta)-independent fields.
    """
    if jet.order < 3:
        raise ValueError("order-3 jet required")
    half = 0.5 if strip else 1.0
    A = np.array([[jet.a]], dtype=complex)
    B = np.array([[jet.b]], dtype=complex)
    a_z = jet.d_zzbz
    a_tau = half * jet.d_tzzb
    b_zbar = jet.d_zzzb
    # Im(zeta)-independence: d/dzetabar b = (d/dt b)/2, same as d/dzeta b
    b_taubar = half * jet.d_tzz
    A_d = np.array([[[a_tau]], [[a_z]]], dtype=complex)
    B_dbar = np.array([[[b_taubar]], [[b_zbar]]], dtype=complex)
    return FlatJet(
        A=A, B=B,
        grad=np.array([jet.d_z], dtype=complex),
        tau_alphabar=np.array([half * jet.d_tzb], dtype=complex),
        tau_alpha=np.array([half * jet.d_tz], dtype=complex),
        A_d=A_d, B_dbar=B_dbar)
