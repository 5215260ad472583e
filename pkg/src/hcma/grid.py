"""Discretization of [0,1]_t x T^2 (flat torus, one complex dimension).

The torus is the quotient of the z-plane by the lattice generated by 1 and a
modulus lam with Im(lam) != 0, parametrized as z = x + lam*y with x, y in
[0,1).  All spatial derivatives are second-order central differences with
periodic wrap; t-derivatives are central in the interior and one-sided
second-order on the two Dirichlet planes t=0, t=1.  Wirtinger combinations
are obtained from the (x, y) derivatives through the constant Jacobian of
z = x + lam*y.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class GridError(ValueError):
    """Invalid grid construction or node access."""


class DegenerateLatticeError(GridError):
    """Lattice modulus with vanishing imaginary part."""


class DimensionTooSmallError(GridError):
    """Grid dimensions below the minimum stencil support."""


@dataclass(frozen=True)
class TorusLattice:
    """Flat torus C / (Z + modulus*Z); fundamental domain z = x + modulus*y."""

    modulus: complex = 1j
    period_one: float = 1.0

    def __post_init__(self):
        if self.modulus.imag == 0.0:
            raise DegenerateLatticeError(
                f"lattice modulus {self.modulus} has Im = 0")

    @property
    def dz_coefficients(self) -> tuple[complex, complex]:
        """(c1, c2) such that d/dz = c1*d/dx + c2*d/dy.

        From d/dx = d/dz + d/dzbar and d/dy = lam*d/dz + conj(lam)*d/dzbar.
        For the square lattice (modulus=i) this is (1/2, -i/2), i.e. the
        familiar d/dz = (d/dx - i*d/dy)/2.
        """
        lam = complex(self.modulus)
        denom = lam.conjugate() - lam  # -2i Im(lam), nonzero
        return lam.conjugate() / denom, -1.0 / denom


@dataclass(frozen=True)
class Grid:
    """Tensor grid on [0,1]_t x T^2 with Dirichlet t-planes at both ends."""

    nt: int
    nx: int
    ny: int
    lattice: TorusLattice = field(default_factory=TorusLattice)

    def __post_init__(self):
        if self.nt < 3 or self.nx < 4 or self.ny < 4:
            raise DimensionTooSmallError(
                f"grid ({self.nt},{self.nx},{self.ny}) below minimum (3,4,4)")

    @property
    def ht(self) -> float:
        return 1.0 / (self.nt - 1)

    @property
    def hx(self) -> float:
        return 1.0 / self.nx

    @property
    def hy(self) -> float:
        return 1.0 / self.ny

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nt, self.nx, self.ny)

    @property
    def n_nodes(self) -> int:
        return self.nt * self.nx * self.ny

    @property
    def t_values(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.nt)

    @property
    def x_values(self) -> np.ndarray:
        return np.arange(self.nx) * self.hx

    @property
    def y_values(self) -> np.ndarray:
        return np.arange(self.ny) * self.hy

    def is_interior_t(self, it: int) -> bool:
        return 0 < it < self.nt - 1

    def check_node(self, node: tuple[int, int, int]) -> tuple[int, int, int]:
        it, ix, iy = node
        if not (0 <= it < self.nt):
            raise GridError(f"t-index {it} out of range [0, {self.nt})")
        return it, ix % self.nx, iy % self.ny


def make_grid(nt: int, nx: int, ny: int, modulus: complex = 1j) -> Grid:
    """Build a Grid; raises on degenerate lattice or undersized dimensions."""
    return Grid(nt=nt, nx=nx, ny=ny, lattice=TorusLattice(modulus=complex(modulus)))


# --- stencil primitives (operate on (nt, nx, ny) arrays, real or complex) ---

def dx1(grid: Grid, v: np.ndarray) -> np.ndarray:
    return (np.roll(v, -1, axis=1) - np.roll(v, 1, axis=1)) / (2 * grid.hx)


def dy1(grid: Grid, v: np.ndarray) -> np.ndarray:
    return (np.roll(v, -1, axis=2) - np.roll(v, 1, axis=2)) / (2 * grid.hy)


def dx2(grid: Grid, v: np.ndarray) -> np.ndarray:
    return (np.roll(v, -1, axis=1) - 2 * v + np.roll(v, 1, axis=1)) / grid.hx**2


def dy2(grid: Grid, v: np.ndarray) -> np.ndarray:
    return (np.roll(v, -1, axis=2) - 2 * v + np.roll(v, 1, axis=2)) / grid.hy**2


def dxy(grid: Grid, v: np.ndarray) -> np.ndarray:
    """4-point centered cross stencil for the mixed x,y derivative."""
    vpp = np.roll(v, (-1, -1), axis=(1, 2))
    vpm = np.roll(v, (-1, 1), axis=(1, 2))
    vmp = np.roll(v, (1, -1), axis=(1, 2))
    vmm = np.roll(v, (1, 1), axis=(1, 2))
    return (vpp - vpm - vmp + vmm) / (4 * grid.hx * grid.hy)


def dt1(grid: Grid, v: np.ndarray) -> np.ndarray:
    """First t-derivative: central interior, one-sided O(ht^2) on t-planes."""
    h = grid.ht
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    out[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
    out[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
    return out


def dt2(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Second t-derivative: central interior, one-sided O(ht^2) on t-planes."""
    h = grid.ht
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2
    if grid.nt >= 4:
        out[0] = (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / h**2
        out[-1] = (2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / h**2
    else:
        # nt == 3: fall back to the plain second difference (exact on quadratics)
        out[0] = (v[0] - 2 * v[1] + v[2]) / h**2
        out[-1] = out[0]
    return out


# --- Wirtinger combinations --------------------------------------------------

def wirt_z(grid: Grid, v: np.ndarray) -> np.ndarray:
    c1, c2 = grid.lattice.dz_coefficients
    return c1 * dx1(grid, v) + c2 * dy1(grid, v)


def wirt_zbar(grid: Grid, v: np.ndarray) -> np.ndarray:
    c1, c2 = grid.lattice.dz_coefficients
    return np.conj(c1) * dx1(grid, v) + np.conj(c2) * dy1(grid, v)


def wirt_zz(grid: Grid, v: np.ndarray) -> np.ndarray:
    c1, c2 = grid.lattice.dz_coefficients
    return c1**2 * dx2(grid, v) + 2 * c1 * c2 * dxy(grid, v) + c2**2 * dy2(grid, v)


def wirt_zzbar(grid: Grid, v: np.ndarray) -> np.ndarray:
    c1, c2 = grid.lattice.dz_coefficients
    out = (abs(c1)**2 * dx2(grid, v)
           + 2 * (c1 * np.conj(c2)).real * dxy(grid, v)
           + abs(c2)**2 * dy2(grid, v))
    return out


def wirt_tz(grid: Grid, v: np.ndarray) -> np.ndarray:
    return dt1(grid, wirt_z(grid, v))


def wirt_tzbar(grid: Grid, v: np.ndarray) -> np.ndarray:
    return dt1(grid, wirt_zbar(grid, v))


# --- jets --------------------------------------------------------------------

@dataclass(frozen=True)
class Jet:
    """Pointwise Wirtinger derivative record of a real field.

    a = Phi_zzbar (real), b = Phi_zz.  For real fields d_tzb = conj(d_tz).
    Third-order entries are present only for order-3 jets.  one_sided_t marks
    t-derivatives computed with boundary stencils; consumers that need true
    interior t-derivatives must skip such jets.
    """

    value: float
    d_t: float
    d_tt: float
    d_z: complex
    a: float
    b: complex
    d_tz: complex
    d_tzb: complex
    one_sided_t: bool
    d_zzz: complex | None = None
    d_zzzb: complex | None = None
    d_zzbz: complex | None = None
    d_tzz: complex | None = None
    d_tzzb: complex | None = None

    @property
    def order(self) -> int:
        return 3 if self.d_zzz is not None else 2


class JetFields:
    """Whole-grid derivative arrays of one ScalarField, computed lazily.

    Single code path for pointwise jets and vectorized consumers (solver,
    verifier): wirtinger_jet just reads these arrays at a node.
    """

    def __init__(self, fld: "ScalarField"):
        self._f = fld

    @cached_property
    def d_t(self):
        return dt1(self._f.grid, self._f.values)

    @cached_property
    def d_tt(self):
        return dt2(self._f.grid, self._f.values)

    @cached_property
    def d_z(self):
        return wirt_z(self._f.grid, self._f.values)

    @cached_property
    def a(self):
        return wirt_zzbar(self._f.grid, self._f.values).real

    @cached_property
    def b(self):
        return wirt_zz(self._f.grid, self._f.values)

    @cached_property
    def d_tz(self):
        return dt1(self._f.grid, self.d_z)

    @cached_property
    def d_tzb(self):
        return np.conj(self.d_tz)

    # third order: difference the second-order jets (O(h) accepted)
    @cached_property
    def d_zzz(self):
        return wirt_z(self._f.grid, self.b)

    @cached_property
    def d_zzzb(self):
        return wirt_zbar(self._f.grid, self.b)

    @cached_property
    def d_zzbz(self):
        return wirt_z(self._f.grid, self.a)

    @cached_property
    def d_tzz(self):
        return dt1(self._f.grid, self.b)

    @cached_property
    def d_tzzb(self):
        return dt1(self._f.grid, self.a.astype(complex))


class ScalarField:
    """Real-valued function sampled on a Grid; immutable after construction."""

    def __init__(self, grid: Grid, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.size != grid.n_nodes:
            raise GridError(
                f"value count {values.size} != node count {grid.n_nodes}")
        if not np.all(np.isfinite(values)):
            raise GridError("field contains non-finite values")
        values = values.reshape(grid.shape).copy()
        values.setflags(write=False)
        self.grid = grid
        self.values = values
        self.jets = JetFields(self)

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        t, x, y = np.meshgrid(grid.t_values, grid.x_values, grid.y_values,
                              indexing="ij")
        return cls(grid, fn(t, x, y))

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)


def wirtinger_jet(fld: ScalarField, node: tuple[int, int, int],
                  order: int = 2) -> Jet:
    """Jet of a field at a grid node; order 2 or 3."""
    if order not in (2, 3):
        raise GridError(f"jet order must be 2 or 3, got {order}")
    it, ix, iy = fld.grid.check_node(node)
    j = fld.jets
    idx = (it, ix, iy)
    third = {}
    if order == 3:
        third = dict(
            d_zzz=complex(j.d_zzz[idx]),
            d_zzzb=complex(j.d_zzzb[idx]),
            d_zzbz=complex(j.d_zzbz[idx]),
            d_tzz=complex(j.d_tzz[idx]),
            d_tzzb=complex(j.d_tzzb[idx]),
        )
    return Jet(
        value=float(fld.values[idx]),
        d_t=float(j.d_t[idx]),
        d_tt=float(j.d_tt[idx]),
        d_z=complex(j.d_z[idx]),
        a=float(j.a[idx]),
        b=complex(j.b[idx]),
        d_tz=complex(j.d_tz[idx]),
        d_tzb=complex(j.d_tzb[idx]),
        one_sided_t=not fld.grid.is_interior_t(it),
        **third,
    )


def interpolate(fld: ScalarField, t: float, x: float, y: float) -> float:
    """Trilinear interpolation; periodic wrap in x, y; t must lie in [0,1]."""
    return float(interpolate_array(fld.grid, fld.values, t, x, y))


def interpolate_array(grid: Grid, values: np.ndarray, t: float, x: float,
                      y: float):
    """Trilinear interpolation of an arbitrary (possibly complex) array."""
    if not (0.0 <= t <= 1.0):
        raise GridError(f"t={t} outside [0, 1]")
    st = min(t / grid.ht, grid.nt - 1 - 1e-12)
    it = int(st)
    ft = st - it
    sx = (x % 1.0) / grid.hx
    ix = int(sx) % grid.nx
    fx = sx - int(sx)
    sy = (y % 1.0) / grid.hy
    iy = int(sy) % grid.ny
    fy = sy - int(sy)
    ixp = (ix + 1) % grid.nx
    iyp = (iy + 1) % grid.ny
    out = 0.0
    for dit, wt in ((0, 1 - ft), (1, ft)):
        for jx, wx in ((ix, 1 - fx), (ixp, fx)):
            for jy, wy in ((iy, 1 - fy), (iyp, fy)):
                out = out + wt * wx * wy * values[it + dit, jx, jy]
    return out
