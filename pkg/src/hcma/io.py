"""Config files, binary snapshots, and report/CSV emission.

Config format: INI-style ``key = value`` under bracketed sections, parsed
with configparser; unknown sections or keys are rejected.  Snapshot format
(all little-endian):

    offset  size  field
    0       8     magic "HCMASNAP"
    8       4     version u32 (currently 1)
    12      12    nt, nx, ny as u32
    24      16    lattice modulus (re, im) as f64
    40      4     converged flag u32
    44      4     newton iterations u32
    48      8     final residual f64
    56      4     config-echo byte length u32
    60      n     config echo, UTF-8
    60+n    -     nt*nx*ny potential values f64, it-major (it, ix, iy)
"""

from __future__ import annotations

import configparser
import csv
import json
import struct
from dataclasses import dataclass, field as dc_field
from datetime import datetime, timezone

import numpy as np

from .grid import Grid, make_grid
from .solver import (AnnulusProfile, BoundarySpec, ConstantProfile,
                     SolverConfig)

MAGIC = b"HCMASNAP"
SNAPSHOT_VERSION = 1


class ConfigError(ValueError):
    pass


class SnapshotError(ValueError):
    pass


_SCHEMA = {
    "grid": {"nt", "nx", "ny", "modulus"},
    "profile": {"kind", "epsilon", "epsilon0", "schedule"},
    "boundary": {"phi0", "phi1"},
    "sweep": {"lambdas"},
    "solver": {"newton_tol", "max_newton_iters", "max_halvings",
               "admissibility_margin"},
    "run": {"out_dir", "seed", "checks"},
    "trace": {"starts", "step"},
}


def _parse_modes(text: str):
    """Fourier mode list 'kx,ky,re,im; ...' -> tuple of (kx, ky, amplitude)."""
    text = text.strip()
    if not text:
        return ()
    out = []
    for chunk in text.split(";"):
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) != 4:
            raise ConfigError(f"bad boundary mode {chunk!r}: want kx,ky,re,im")
        try:
            kx, ky = int(parts[0]), int(parts[1])
            amp = complex(float(parts[2]), float(parts[3]))
        except ValueError as exc:
            raise ConfigError(f"bad boundary mode {chunk!r}: {exc}") from None
        out.append((kx, ky, amp))
    return tuple(out)


def _fmt_modes(modes) -> str:
    return "; ".join(f"{kx},{ky},{complex(amp).real!r},{complex(amp).imag!r}"
                     for kx, ky, amp in modes)


def _parse_floats(text: str):
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}: {exc}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    nt: int = 9
    nx: int = 16
    ny: int = 16
    modulus: complex = 1j
    profile_kind: str = "annulus"          # "annulus" | "constant"
    epsilon: float = 1e-3
    epsilon0: float = 0.25
    schedule: tuple = ()                   # continuation epsilons, decreasing
    phi0_modes: tuple = ()
    phi1_modes: tuple = ()
    lambdas: tuple = ()
    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    max_halvings: int = 30
    admissibility_margin: float = 1e-8
    out_dir: str = "out"
    seed: int = 0
    checks: tuple | None = None            # None = all
    trace_starts: tuple = ()
    trace_step: float = 0.01

    @classmethod
    def parse(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        for section in cp.sections():
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}]")
            for key in cp[section]:
                if key not in _SCHEMA[section]:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")

        def get(section, key, default, conv):
            if cp.has_option(section, key):
                raw = cp.get(section, key)
                try:
                    return conv(raw)
                except (ValueError, TypeError) as exc:
                    raise ConfigError(
                        f"bad value for {key!r} in [{section}]: {exc}") from None
            return default

        kind = get("profile", "kind", cls.profile_kind, str).strip().lower()
        if kind not in ("annulus", "constant"):
            raise ConfigError(f"unknown profile kind {kind!r}")
        checks_raw = get("run", "checks", "all", str).strip()
        checks = None if checks_raw in ("", "all") else tuple(
            c.strip() for c in checks_raw.split(","))
        starts_raw = get("trace", "starts", "", str).strip()
        starts = ()
        if starts_raw:
            triples = []
            for chunk in starts_raw.split(";"):
                vals = _parse_floats(chunk)
                if len(vals) != 3:
                    raise ConfigError(f"bad trace start {chunk!r}: want t,x,y")
                triples.append(vals)
            starts = tuple(triples)
        return cls(
            nt=get("grid", "nt", cls.nt, int),
            nx=get("grid", "nx", cls.nx, int),
            ny=get("grid", "ny", cls.ny, int),
            modulus=get("grid", "modulus", cls.modulus,
                        lambda s: complex(s.replace(" ", ""))),
            profile_kind=kind,
            epsilon=get("profile", "epsilon", cls.epsilon, float),
            epsilon0=get("profile", "epsilon0", cls.epsilon0, float),
            schedule=get("profile", "schedule", (), _parse_floats),
            phi0_modes=get("boundary", "phi0", (), _parse_modes),
            phi1_modes=get("boundary", "phi1", (), _parse_modes),
            lambdas=get("sweep", "lambdas", (), _parse_floats),
            newton_tol=get("solver", "newton_tol", cls.newton_tol, float),
            max_newton_iters=get("solver", "max_newton_iters",
                                 cls.max_newton_iters, int),
            max_halvings=get("solver", "max_halvings", cls.max_halvings, int),
            admissibility_margin=get("solver", "admissibility_margin",
                                     cls.admissibility_margin, float),
            out_dir=get("run", "out_dir", cls.out_dir, str).strip(),
            seed=get("run", "seed", cls.seed, int),
            checks=checks,
            trace_starts=starts,
            trace_step=get("trace", "step", cls.trace_step, float),
        )

    def serialize(self) -> str:
        m = self.modulus
        lines = [
            "[grid]",
            f"nt = {self.nt}",
            f"nx = {self.nx}",
            f"ny = {self.ny}",
            f"modulus = {m.real!r}{m.imag:+}j",
            "",
            "[profile]",
            f"kind = {self.profile_kind}",
            f"epsilon = {self.epsilon!r}",
            f"epsilon0 = {self.epsilon0!r}",
            f"schedule = {', '.join(repr(v) for v in self.schedule)}",
            "",
            "[boundary]",
            f"phi0 = {_fmt_modes(self.phi0_modes)}",
            f"phi1 = {_fmt_modes(self.phi1_modes)}",
            "",
            "[sweep]",
            f"lambdas = {', '.join(repr(v) for v in self.lambdas)}",
            "",
            "[solver]",
            f"newton_tol = {self.newton_tol!r}",
            f"max_newton_iters = {self.max_newton_iters}",
            f"max_halvings = {self.max_halvings}",
            f"admissibility_margin = {self.admissibility_margin!r}",
            "",
            "[run]",
            f"out_dir = {self.out_dir}",
            f"seed = {self.seed}",
            "checks = " + ("all" if self.checks is None
                           else ", ".join(self.checks)),
            "",
            "[trace]",
            "starts = " + "; ".join(
                f"{t!r},{x!r},{y!r}" for t, x, y in self.trace_starts),
            f"step = {self.trace_step!r}",
            "",
        ]
        return "\n".join(lines)

    # --- object factories ---
    def make_grid(self) -> Grid:
        return make_grid(self.nt, self.nx, self.ny, self.modulus)

    def make_profile(self, epsilon: float | None = None):
        if self.profile_kind == "constant":
            return ConstantProfile(self.epsilon0 if epsilon is None
                                   else epsilon)
        return AnnulusProfile(self.epsilon if epsilon is None else epsilon)

    def make_boundary(self) -> BoundarySpec:
        return BoundarySpec(phi0=self.phi0_modes, phi1=self.phi1_modes)

    def make_solver_config(self) -> SolverConfig:
        return SolverConfig(
            newton_tol=self.newton_tol,
            max_newton_iters=self.max_newton_iters,
            max_halvings=self.max_halvings,
            admissibility_margin=self.admissibility_margin)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return ExperimentConfig.parse(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


# --- snapshots ---------------------------------------------------------------

@dataclass
class Snapshot:
    config_text: str
    nt: int
    nx: int
    ny: int
    modulus: complex
    converged: bool
    iterations: int
    final_residual: float
    values: np.ndarray = dc_field(repr=False, default=None)

    @classmethod
    def from_solution(cls, solution, config: ExperimentConfig) -> "Snapshot":
        g = solution.grid
        return cls(config_text=config.serialize(), nt=g.nt, nx=g.nx, ny=g.ny,
                   modulus=g.lattice.modulus, converged=solution.converged,
                   iterations=solution.iterations,
                   final_residual=solution.final_residual,
                   values=solution.phi.values)

    def save(self, path) -> None:
        cfg = self.config_text.encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<IIII", SNAPSHOT_VERSION,
                                 self.nt, self.nx, self.ny))
            fh.write(struct.pack("<dd", self.modulus.real, self.modulus.imag))
            fh.write(struct.pack("<IId", int(self.converged),
                                 self.iterations, self.final_residual))
            fh.write(struct.pack("<I", len(cfg)))
            fh.write(cfg)
            fh.write(np.ascontiguousarray(
                self.values, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "Snapshot":
        try:
            with open(path, "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise SnapshotError(f"cannot read snapshot {path}: {exc}") from None
        if len(raw) < 60 or raw[:8] != MAGIC:
            raise SnapshotError("bad snapshot magic")
        version, nt, nx, ny = struct.unpack_from("<IIII", raw, 8)
        if version != SNAPSHOT_VERSION:
            raise SnapshotError(f"unsupported snapshot version {version}")
        mre, mim = struct.unpack_from("<dd", raw, 24)
        conv, iters, res = struct.unpack_from("<IId", raw, 40)
        (cfg_len,) = struct.unpack_from("<I", raw, 56)
        cfg = raw[60:60 + cfg_len].decode("utf-8")
        n = nt * nx * ny
        body = raw[60 + cfg_len:]
        if len(body) != 8 * n:
            raise SnapshotError(
                f"snapshot payload {len(body)} bytes, expected {8 * n}")
        values = np.frombuffer(body, dtype="<f8").reshape(nt, nx, ny).copy()
        return cls(config_text=cfg, nt=nt, nx=nx, ny=ny,
                   modulus=complex(mre, mim), converged=bool(conv),
                   iterations=iters, final_residual=res, values=values)

    def to_solution(self):
        """Rebuild a Solution from the embedded config echo."""
        from .grid import ScalarField
        from .solver import Solution
        config = ExperimentConfig.parse(self.config_text)
        grid = make_grid(self.nt, self.nx, self.ny, self.modulus)
        return Solution(
            phi=ScalarField(grid, self.values), grid=grid,
            profile=config.make_profile(), boundary=config.make_boundary(),
            converged=self.converged, final_residual=self.final_residual,
            iterations=self.iterations), config


# --- reports and CSV ---------------------------------------------------------

def report_json(report_dict: dict, timestamp: bool = True) -> str:
    """Deterministic JSON; the timestamp lives in its own meta field so
    comparisons can strip it."""
    out = dict(report_dict)
    meta = dict(out.get("meta", {}))
    if timestamp:
        meta["timestamp"] = datetime.now(timezone.utc).isoformat()
    out["meta"] = meta
    return json.dumps(out, sort_keys=True, indent=2) + "\n"


def write_report(report_dict: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report_json(report_dict))


def write_fields_csv(path, grid: Grid, fields: dict) -> None:
    """Node-per-row CSV: it, ix, iy, then one column per named field."""
    names = list(fields)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["it", "ix", "iy"] + names)
        for it in range(grid.nt):
            for ix in range(grid.nx):
                for iy in range(grid.ny):
                    w.writerow([it, ix, iy] +
                               [repr(float(fields[n][it, ix, iy]))
                                for n in names])


def write_leaf_csv(path, path_obj) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "re_z", "im_z", "q_b"])
        for t, z, qb in zip(path_obj.ts, path_obj.zs, path_obj.qb_samples):
            w.writerow([repr(float(t)), repr(float(z.real)),
                        repr(float(z.imag)), repr(float(qb))])
