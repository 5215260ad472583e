"""Approximate Monge-Ampere characteristics traced through a solution.

The kernel direction of the degenerate product metric is
d_X = d_zeta - Phi_zeta zbar g^{-1} d_z, so along the real zeta-direction a
leaf satisfies dz/dt = -Phi_tzbar / (2 (1+a)).  At epsilon > 0 exact kernels
do not exist; the traced curves are approximate characteristics and every
threshold carries epsilon-dependent slack.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import interpolate_array
from .solver import Solution


class LeafError(ValueError):
    pass


@dataclass
class LeafPath:
    start: tuple                      # (t0, z0)
    ts: np.ndarray
    zs: np.ndarray                    # complex, reduced modulo the lattice
    a_samples: np.ndarray
    qb_samples: np.ndarray
    step: float
    aborted: bool = False
    message: str = "ok"
    diagnostics: dict = dc_field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return len(self.ts)


def _z_to_lattice(z: complex, modulus: complex) -> tuple[float, float]:
    """Lattice coordinates (x, y) of z = x + modulus*y, wrapped to [0, 1)."""
    y = z.imag / modulus.imag
    x = z.real - modulus.real * y
    return x % 1.0, y % 1.0


def rk4_path(velocity, t0: float, z0: complex, t1: float = 1.0,
             step: float = 0.01):
    """Classical explicit 4th-order integration of dz/dt = velocity(t, z).

    Returns (ts, zs); the last step is shortened to land exactly on t1.
    Raises whatever `velocity` raises (used by trace_leaf to abort on
    degenerate interpolated states).
    """
    ts = [t0]
    zs = [complex(z0)]
    t, z = t0, complex(z0)
    while t < t1 - 1e-14:
        h = min(step, t1 - t)
        k1 = velocity(t, z)
        k2 = velocity(t + h / 2, z + h / 2 * k1)
        k3 = velocity(t + h / 2, z + h / 2 * k2)
        k4 = velocity(t + h, z + h * k3)
        z = z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t + h
        ts.append(t)
        zs.append(z)
    return np.array(ts), np.array(zs)


def trace_leaf(solution: Solution, start: tuple, step: float = 0.01) -> LeafPath:
    """Trace one leaf from (t0, z0) to t = 1 with trilinear interpolation."""
    t0, z0 = start
    grid = solution.grid
    if not (0.0 <= t0 < 1.0):
        raise LeafError(f"start t = {t0} outside [0, 1)")
    if step <= 0:
        raise LeafError("step must be positive")
    modulus = grid.lattice.modulus
    jets = solution.phi.jets
    d_tzb = jets.d_tzb
    a_arr = jets.a.astype(float)
    b_arr = jets.b

    def sample(t, z):
        x, y = _z_to_lattice(complex(z), modulus)
        a = float(interpolate_array(grid, a_arr, t, x, y).real)
        w = interpolate_array(grid, d_tzb, t, x, y)
        return a, complex(w)

    def velocity(t, z):
        a, w = sample(t, z)
        if 1.0 + a <= 0.0:
            raise _DegenerateLeafState(t, z)
        return -w / (2.0 * (1.0 + a))

    # step-by-step RK4 so an abort keeps the partial path
    ts = [t0]
    zs = [complex(z0)]
    t, z = t0, complex(z0)
    aborted, message = False, "ok"
    while t < 1.0 - 1e-14:
        h = min(step, 1.0 - t)
        try:
            k1 = velocity(t, z)
            k2 = velocity(t + h / 2, z + h / 2 * k1)
            k3 = velocity(t + h / 2, z + h / 2 * k2)
            k4 = velocity(t + h, z + h * k3)
        except _DegenerateLeafState as exc:
            aborted, message = True, f"degenerate state near t={exc.t:.4f}"
            break
        z = z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t + h
        ts.append(t)
        zs.append(z)
    ts = np.array(ts)

    a_s = np.empty(len(ts))
    qb_s = np.empty(len(ts))
    zs_mod = np.empty(len(ts), dtype=complex)
    for k, (t, z) in enumerate(zip(ts, zs)):
        x, y = _z_to_lattice(complex(z), modulus)
        a = float(interpolate_array(grid, a_arr, t, x, y).real)
        b = interpolate_array(grid, b_arr, t, x, y)
        a_s[k] = a
        qb_s[k] = abs(b) ** 2 / (1.0 + a) ** 2 if 1.0 + a > 0 else np.nan
        zs_mod[k] = x + modulus * y
    return LeafPath(start=(t0, complex(z0)), ts=ts, zs=zs_mod, a_samples=a_s,
                    qb_samples=qb_s, step=step, aborted=aborted,
                    message=message)


class _DegenerateLeafState(Exception):
    def __init__(self, t, z):
        super().__init__(f"1 + a <= 0 at t={t}, z={z}")
        self.t, self.z = t, z


def qb_along_leaf(solution: Solution, path: LeafPath, margin: float = 0.0):
    """Q_B along a leaf and its discrete second derivative in the X-direction.

    (Q_B)_XXbar is estimated as one quarter of the second t-difference of
    Q_B along the path (the zeta-scaling of the leaf direction).  Returns
    (qb, second_diff, record_dict); out-of-hypothesis when Q_B reaches 1/2.
    """
    if path.n_samples < 3:
        raise LeafError("need at least 3 samples for a second difference")
    qb = path.qb_samples
    dt = np.diff(path.ts)
    h = float(dt[0])
    core = np.abs(dt[:-1] - h).max() < 1e-12 and np.abs(dt[1:] - h).max() < 1e-12
    if core:
        second = 0.25 * (qb[:-2] - 2.0 * qb[1:-1] + qb[2:]) / h**2
    else:
        # non-uniform tail step: restrict to the uniform prefix
        n_uniform = int(np.argmax(np.abs(dt - h) > 1e-12)) or len(dt)
        q = qb[:n_uniform + 1]
        second = 0.25 * (q[:-2] - 2.0 * q[1:-1] + q[2:]) / h**2
    in_hypothesis = bool(np.nanmax(qb) < 0.5 - margin)
    record = {
        "min_second_diff": float(np.nanmin(second)) if len(second) else 0.0,
        "max_qb": float(np.nanmax(qb)),
        "in_hypothesis": in_hypothesis,
    }
    return qb, second, record
