"""Prognostic state, configuration, symmetry projections and initial data."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .spectral import (
    Grid,
    SpectralField3D,
    dealias,
    enforce_hermitian,
    forward,
    linf_norm,
    symmetrize,
)

SCHEMES = ("imex_cn_ab2", "imex_euler")
INIT_KINDS = ("random_smooth", "manufactured", "file")


class ConstraintError(ValueError):
    """The barotropic (vertically integrated) divergence does not vanish."""


@dataclass
class Params:
    """Physical and numerical configuration of a run."""

    h: float = 1.0
    epsilon: float = 0.0
    f0: float = 0.0
    nu_h: float = 1.0
    kappa_z: float = 1.0
    dt: float = 1e-3
    t_final: float = 0.1
    scheme: str = "imex_cn_ab2"
    nx: int = 32
    ny: int = 32
    nz: int = 16
    monitor_stride: int = 10
    q_list: tuple = (4, 8, 16, 32)
    q_T: float = 4.0
    seed: int = 0
    init: str = "random_smooth"
    init_file: str = ""
    spectrum_slope: float = 4.0
    amplitude: float = 1.0
    temperature_bound: float = 1.0
    checkpoint_every: int = 0
    snapshot_every: int = 0

    def __post_init__(self):
        self.q_list = tuple(float(q) if float(q) != int(q) else int(q) for q in self.q_list)
        self.validate()

    def validate(self) -> None:
        if not self.h > 0:
            raise ValueError("h must be positive")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")
        if not (self.nu_h > 0 and self.kappa_z > 0):
            raise ValueError("nu_h and kappa_z must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_final < 0:
            raise ValueError("t_final must be nonnegative")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.monitor_stride < 1:
            raise ValueError("monitor_stride must be >= 1")
        if any(q < 1 for q in self.q_list) or not self.q_list:
            raise ValueError("q_list entries must be >= 1")
        if self.q_T < 2:
            raise ValueError("q_T must be >= 2")
        if self.init not in INIT_KINDS:
            raise ValueError(f"init must be one of {INIT_KINDS}")
        if self.checkpoint_every < 0 or self.snapshot_every < 0:
            raise ValueError("output intervals must be nonnegative")
        # Coriolis is the only explicit linear term; keep its rotation resolved.
        if abs(self.f0) * self.dt >= 1.0:
            raise ValueError("dt * |f0| must be below 1 for the explicit Coriolis term")
        Grid(self.nx, self.ny, self.nz, self.h)

    @property
    def grid(self) -> Grid:
        return Grid(self.nx, self.ny, self.nz, self.h)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def replace(self, **changes) -> Params:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["q_list"] = list(self.q_list)
        return d


@dataclass(frozen=True, eq=False)
class State:
    v1: SpectralField3D
    v2: SpectralField3D
    T: SpectralField3D
    t: float = 0.0
    step: int = 0

    def __post_init__(self):
        if self.v1.parity != "even" or self.v2.parity != "even":
            raise ValueError("velocity components must be even in z")
        if self.T.parity != "odd":
            raise ValueError("temperature must be odd in z")

    @property
    def grid(self) -> Grid:
        return self.v1.grid

    @classmethod
    def zeros(cls, grid: Grid, t: float = 0.0) -> State:
        return cls(
            SpectralField3D.zeros(grid, "even"),
            SpectralField3D.zeros(grid, "even"),
            SpectralField3D.zeros(grid, "odd"),
            t,
        )

    def with_fields(self, v1=None, v2=None, T=None, t=None, step=None) -> State:
        return State(
            self.v1 if v1 is None else v1,
            self.v2 if v2 is None else v2,
            self.T if T is None else T,
            self.t if t is None else t,
            self.step if step is None else step,
        )

    def fields(self):
        return (self.v1, self.v2, self.T)


# ---------------------------------------------------------------------------
# Projections
# ---------------------------------------------------------------------------


def _clean(f: SpectralField3D) -> SpectralField3D:
    c = enforce_hermitian(f.coeffs)
    if f.parity == "odd":
        c[:, :, 0] = 0.0
    return dealias(SpectralField3D(f.grid, f.parity, c))


def project_symmetry(state: State) -> State:
    """Remove content outside the symmetry class: non-Hermitian parts, odd
    ``m = 0`` modes and modes past the dealias cutoff."""
    return state.with_fields(_clean(state.v1), _clean(state.v2), _clean(state.T))


def project_symmetry_physical(v1: np.ndarray, v2: np.ndarray, T: np.ndarray):
    """Physical-space counterpart: keep the even part of v and the odd part of T.

    Inputs are full-domain arrays ``(nx, ny, 2*nz)``; this is the orthogonal
    projection onto the symmetry class of the sampled data.
    """
    return symmetrize(v1, "even"), symmetrize(v2, "even"), symmetrize(T, "odd")


def barotropic_residual(v1: SpectralField3D, v2: SpectralField3D) -> float:
    """Max modal size of ``div_H int_{-h}^{h} v dz``."""
    g = v1.grid
    kx = g.kx[:, None]
    ky = g.ky[None, :]
    div = 2j * np.pi * (kx * v1.coeffs[:, :, 0] + ky * v2.coeffs[:, :, 0]) * 2.0 * g.h
    return float(np.max(np.abs(div)))


def project_barotropic(v1: SpectralField3D, v2: SpectralField3D):
    """Replace the vertical mean of v by its horizontally divergence-free part."""
    g = v1.grid
    kx = g.kx[:, None]
    ky = g.ky[None, :]
    k2 = kx**2 + ky**2
    a = v1.coeffs[:, :, 0]
    b = v2.coeffs[:, :, 0]
    proj = np.where(k2 == 0, 0.0, (kx * a + ky * b) / np.where(k2 == 0, 1.0, k2))
    c1 = v1.coeffs.copy()
    c2 = v2.coeffs.copy()
    c1[:, :, 0] = a - kx * proj
    c2[:, :, 0] = b - ky * proj
    return SpectralField3D(g, "even", c1), SpectralField3D(g, "even", c2)


def project_state(state: State) -> State:
    s = project_symmetry(state)
    v1, v2 = project_barotropic(s.v1, s.v2)
    return s.with_fields(v1, v2)


def check_constraint(v1: SpectralField3D, v2: SpectralField3D, tol: float = 1e-10) -> None:
    scale = max(1.0, float(np.max(np.abs(v1.coeffs), initial=0.0)),
                float(np.max(np.abs(v2.coeffs), initial=0.0)))
    res = barotropic_residual(v1, v2)
    if res > tol * scale * 2 * np.pi * max(v1.grid.nx, v1.grid.ny) * v1.grid.h:
        raise ConstraintError(f"barotropic divergence residual {res:.3e} exceeds tolerance")


# ---------------------------------------------------------------------------
# Initial data
# ---------------------------------------------------------------------------


def _random_field(grid: Grid, parity: str, rng: np.random.Generator, slope: float):
    shape = grid.shape
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    kx, ky, m = grid.KX, grid.KY, grid.m[None, None, :]
    c = c * (1.0 + kx**2 + ky**2 + m**2) ** (-slope / 2.0)
    return _clean(SpectralField3D(grid, parity, c))


def make_initial_data(
    params: Params,
    kind: str | None = None,
    *,
    seed: int | None = None,
    spectrum_slope: float | None = None,
    amplitude: float | None = None,
    temperature_bound: float | None = None,
    path: str | Path | None = None,
) -> State:
    """Build an admissible initial state.

    ``random_smooth``: Gaussian modal amplitudes with algebraic decay of order
    ``spectrum_slope``, projected, then scaled so the grid max of ``|v|``
    equals ``amplitude`` and the grid max of ``|T|`` equals
    ``min(amplitude, temperature_bound)``.

    ``manufactured``: ``v = (amplitude sin(2 pi y), 0)`` and
    ``T = temperature_bound sin(pi z / h)``.

    ``file``: read a snapshot written by :func:`apes.io.write_snapshot`.
    """
    kind = params.init if kind is None else kind
    seed = params.seed if seed is None else seed
    slope = params.spectrum_slope if spectrum_slope is None else spectrum_slope
    amp = params.amplitude if amplitude is None else amplitude
    tbound = params.temperature_bound if temperature_bound is None else temperature_bound
    grid = params.grid
    if kind not in INIT_KINDS:
        raise ValueError(f"unknown initial data kind {kind!r}")
    if amp < 0 or tbound < 0:
        raise ValueError("amplitude and temperature bound must be nonnegative")

    if kind == "random_smooth":
        if slope < 3:
            raise ValueError("spectrum_slope must be >= 3")
        rng = np.random.default_rng(seed)
        v1 = _random_field(grid, "even", rng, slope)
        v2 = _random_field(grid, "even", rng, slope)
        T = _random_field(grid, "odd", rng, slope)
        v1, v2 = project_barotropic(v1, v2)
        # scale against both the collocation grid and the padded monitor grid
        vmax = max(linf_norm(v1, v2), linf_norm(v1, v2, n=grid.n_pad))
        tmax = max(linf_norm(T), linf_norm(T, n=grid.n_pad))
        sv = amp / vmax if vmax > 0 else 0.0
        st = min(amp, tbound) / tmax if tmax > 0 else 0.0
        return State(v1 * sv, v2 * sv, T * st, 0.0)

    if kind == "manufactured":
        X, Y, Z = grid.mesh()
        v1 = forward(amp * np.sin(2 * np.pi * Y), grid, "even")
        v2 = SpectralField3D.zeros(grid, "even")
        T = forward(tbound * np.sin(np.pi * Z / grid.h), grid, "odd")
        return project_state(State(v1, v2, T, 0.0))

    from .io import read_snapshot

    source = path if path is not None else params.init_file
    if not source:
        raise ValueError("file initial data needs a path")
    state, _ = read_snapshot(source)
    if state.grid != grid:
        raise ValueError(f"snapshot grid {state.grid} does not match configured grid {grid}")
    return state
