"""Right-hand side and IMEX time integration of the prognostic system.

The stiff linear dissipation is diagonal in the modal basis and is treated
implicitly.  Advection, Coriolis, buoyancy and the surface-pressure gradient
are explicit.  The pressure gradient is obtained by projecting the vertical
mean of the explicit tendency onto horizontally divergence-free fields, which
is the same as solving the surface-pressure Poisson problem with the
advective form of the nonlinearity.
"""

from __future__ import annotations

import logging
from functools import lru_cache
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.fft as sfft

from .spectral import (
    Grid,
    HorizontalField,
    SpectralField3D,
    _hermitian_expand,
    fft_workers,
    inner,
    symmetrize,
)
from .state import Params, State, check_constraint, project_barotropic, project_symmetry

log = logging.getLogger(__name__)

BLOWUP_VMAX = 1e8


class BlowUpError(RuntimeError):
    """Raised when the solution becomes non-finite or exceeds the velocity cap."""

    def __init__(self, t: float, message: str, result=None):
        super().__init__(f"blow-up at t = {t:.6g}: {message}")
        self.t = t
        self.result = result


@dataclass
class Tendency:
    dv1: SpectralField3D
    dv2: SpectralField3D
    dT: SpectralField3D


# ---------------------------------------------------------------------------
# Explicit terms
# ---------------------------------------------------------------------------


class _Operators:
    """Cached wavenumber arrays in the rfft half layout ``(nx, ny//2+1, nz)``."""

    def __init__(self, grid: Grid):
        self.grid = grid
        nyh = grid.ny // 2 + 1
        self.nyh = nyh
        n = grid.n_pad
        self.se, self.ae = grid.basis("even", n)
        self.so, self.ao = grid.basis("odd", n)
        kx = grid.kx[:, None, None]
        ky = grid.ky[None, :nyh, None]
        self.kx = kx
        self.ky = ky
        self.ikx = 2j * np.pi * kx
        self.iky = 2j * np.pi * ky
        kz = (np.pi / grid.h) * np.arange(grid.nz)[None, None, :]
        self.kz = kz
        inv_kz = np.zeros_like(kz)
        inv_kz[..., 1:] = 1.0 / kz[..., 1:]
        self.inv_kz = inv_kz
        self.sign_m = (-1.0) ** np.arange(grid.nz)
        self.mask = grid.dealias_mask[:, :nyh, :]
        kmx, kmy = grid.kmax_x, grid.kmax_y
        self.kx_keep = np.r_[0 : kmx + 1, grid.nx - kmx : grid.nx]
        self.ky_keep = kmy + 1
        k2 = (kx**2 + ky**2)[:, :, 0]
        self.k2 = k2
        self.inv_k2 = np.where(k2 == 0, 0.0, 1.0 / np.where(k2 == 0, 1.0, k2))

    def to_phys(self, stack: np.ndarray, synth: np.ndarray) -> np.ndarray:
        """Dealiased half-layout coefficients ``(k, nx, nyh, nz)`` to samples
        ``(k, n+1, nx, ny)``.  Only the retained block enters the vertical GEMM."""
        k = stack.shape[0]
        sub = stack[:, self.kx_keep, : self.ky_keep]
        nkx, nky, nz = sub.shape[1:]
        cols = np.ascontiguousarray(sub.reshape(k, nkx * nky, nz).transpose(0, 2, 1))
        # real matrix times complex data: multiply the interleaved re/im pairs
        cols = np.matmul(synth, cols.view(float)).view(complex).reshape(k, -1, nkx, nky)
        full = np.zeros((k, cols.shape[1], self.grid.nx, self.nyh), dtype=complex)
        full[:, :, self.kx_keep, : self.ky_keep] = cols
        return sfft.irfft2(full, s=(self.grid.nx, self.grid.ny), axes=(-2, -1),
                           norm="forward", workers=fft_workers())

    def to_spec(self, values: np.ndarray, analysis: np.ndarray) -> np.ndarray:
        """Samples ``(k, n+1, nx, ny)`` to dealiased half-layout coefficients."""
        half = sfft.rfft2(values, axes=(-2, -1), norm="forward", workers=fft_workers())
        sub = half[:, :, self.kx_keep, : self.ky_keep]
        k, n1, nkx, nky = sub.shape
        sub = np.ascontiguousarray(sub).reshape(k, n1, nkx * nky)
        coef = np.matmul(analysis, sub.view(float)).view(complex)
        out = np.zeros((k, self.grid.nx, self.nyh, coef.shape[1]), dtype=complex)
        out[:, self.kx_keep, : self.ky_keep] = coef.transpose(0, 2, 1).reshape(k, nkx, nky, -1)
        return out


_OPS: dict[Grid, _Operators] = {}


def _ops(grid: Grid) -> _Operators:
    op = _OPS.get(grid)
    if op is None:
        op = _OPS[grid] = _Operators(grid)
    return op


def _explicit_half(v1, v2, T, params: Params, p_s_override=None):
    """Explicit tendencies in half layout; inputs are half-layout coefficients."""
    op = _ops(params.grid)
    div = op.ikx * v1 + op.iky * v2
    w = -div * op.inv_kz  # primitive of cos is sin/k; m = 0 removed by inv_kz[0] = 0
    # Flux form: (v.grad)v + w dz v = div_H(v v) + dz(w v) because div_H v + dz w = 0,
    # and products of retained modes are projected exactly, so both forms agree.
    pe = op.to_phys(np.stack([v1, v2]), op.se)
    po = op.to_phys(np.stack([w, T]), op.so)
    V1, V2 = pe
    W, TT = po
    fe = op.to_spec(np.stack([V1 * V1, V1 * V2, V2 * V2, W * TT]), op.ae)
    fo = op.to_spec(np.stack([W * V1, W * V2, V1 * TT, V2 * TT]), op.ao)
    v11, v12, v22, wT = fe
    wv1, wv2, v1T, v2T = fo
    a1 = op.ikx * v11 + op.iky * v12 + op.kz * wv1
    a2 = op.ikx * v12 + op.iky * v22 + op.kz * wv2
    aT = op.ikx * v1T + op.iky * v2T - op.kz * wT

    # int_{-h}^{z} T: sin -> -(cos - (-1)^m)/k
    IT = -T * op.inv_kz
    IT[..., 0] = np.sum(T * op.sign_m * op.inv_kz, axis=-1)
    f0 = params.f0
    E1 = -a1 + f0 * v2 + op.ikx * IT * op.mask
    E2 = -a2 - f0 * v1 + op.iky * IT * op.mask
    # surface pressure: remove the divergent part of the column mean
    if p_s_override is None:
        kdotE = op.kx[:, :, 0] * E1[..., 0] + op.ky[:, :, 0] * E2[..., 0]
        p_hat = -1j * kdotE * op.inv_k2 / (2.0 * np.pi)
    else:
        p_hat = p_s_override
    E1[..., 0] -= op.ikx[:, :, 0] * p_hat
    E2[..., 0] -= op.iky[:, :, 0] * p_hat
    ET = -aT
    return E1, E2, ET, p_hat


def explicit_tendency(state: State, params: Params, p_s: HorizontalField | None = None):
    """Explicit part of the tendency as full-layout arrays, plus the surface pressure."""
    g = state.grid
    nyh = g.ny // 2 + 1
    override = None if p_s is None else p_s.coeffs[:, :nyh]
    E1, E2, ET, p_hat = _explicit_half(
        state.v1.coeffs[:, :nyh], state.v2.coeffs[:, :nyh], state.T.coeffs[:, :nyh], params, override
    )
    out = [_hermitian_expand(a, g.ny) for a in (E1, E2, ET)]
    p_full = _hermitian_expand(p_hat[:, :, None], g.ny)[:, :, 0]
    if p_s is not None:
        p_full = p_s.coeffs
    return out[0], out[1], out[2], HorizontalField(g, p_full)


def linear_symbols(params: Params) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal symbols of the implicit operators for v and T."""
    g = params.grid
    kh2 = g.k2_h
    kz2 = g.KZ**2
    Lv = -params.nu_h * kh2 - params.epsilon * kz2
    LT = -params.epsilon * kh2 - params.kappa_z * kz2
    return Lv, LT


def rhs(state: State, params: Params, p_s: HorizontalField | None = None) -> Tendency:
    """Full tendency ``d/dt (v1, v2, T)`` at ``state``.

    ``p_s`` overrides the surface pressure (used for gauge checks); by default
    it is solved from the state.
    """
    check_constraint(state.v1, state.v2)
    g = state.grid
    E1, E2, ET, _ = explicit_tendency(state, params, p_s)
    Lv, LT = linear_symbols(params)
    return Tendency(
        SpectralField3D(g, "even", E1 + Lv * state.v1.coeffs),
        SpectralField3D(g, "even", E2 + Lv * state.v2.coeffs),
        SpectralField3D(g, "odd", ET + LT * state.T.coeffs),
    )


# ---------------------------------------------------------------------------
# Time stepping
# ---------------------------------------------------------------------------


def _abs_sum_bound(c: np.ndarray) -> float:
    return float(np.sum(np.abs(c)))


def check_finite(state: State) -> None:
    for name, f in (("v1", state.v1), ("v2", state.v2), ("T", state.T)):
        if not np.all(np.isfinite(f.coeffs)):
            raise BlowUpError(state.t, f"non-finite coefficients in {name}")
    # sum |c| bounds the sup norm; only evaluate the grid max when it might matter
    if _abs_sum_bound(state.v1.coeffs) + _abs_sum_bound(state.v2.coeffs) > BLOWUP_VMAX:
        from .spectral import linf_norm

        vmax = linf_norm(state.v1, state.v2)
        if vmax > BLOWUP_VMAX:
            raise BlowUpError(state.t, f"|v| reached {vmax:.3e}")


class Integrator:
    """Owns one evolving state and the Adams-Bashforth history."""

    def __init__(self, params: Params, state: State, prev_explicit=None):
        self.params = params
        self.state = state
        self.prev_explicit = prev_explicit
        self.Lv, self.LT = linear_symbols(params)
        dt = params.dt
        if params.scheme == "imex_cn_ab2":
            self._num_v = 1.0 + 0.5 * dt * self.Lv
            self._num_T = 1.0 + 0.5 * dt * self.LT
            self._den_v = 1.0 / (1.0 - 0.5 * dt * self.Lv)
            self._den_T = 1.0 / (1.0 - 0.5 * dt * self.LT)
        else:
            self._num_v = np.ones_like(self.Lv)
            self._num_T = np.ones_like(self.LT)
            self._den_v = 1.0 / (1.0 - dt * self.Lv)
            self._den_T = 1.0 / (1.0 - dt * self.LT)

    def step(self) -> State:
        p = self.params
        s = self.state
        dt = p.dt
        E = explicit_tendency(s, p)[:3]
        if p.scheme == "imex_cn_ab2" and self.prev_explicit is not None:
            Ex = [1.5 * a - 0.5 * b for a, b in zip(E, self.prev_explicit)]
        else:
            Ex = list(E)
        c1 = (self._num_v * s.v1.coeffs + dt * Ex[0]) * self._den_v
        c2 = (self._num_v * s.v2.coeffs + dt * Ex[1]) * self._den_v
        cT = (self._num_T * s.T.coeffs + dt * Ex[2]) * self._den_T
        g = s.grid
        new = State(
            SpectralField3D(g, "even", c1),
            SpectralField3D(g, "even", c2),
            SpectralField3D(g, "odd", cT),
            t=(s.step + 1) * dt,
            step=s.step + 1,
        )
        new = project_symmetry(new)
        v1, v2 = project_barotropic(new.v1, new.v2)
        new = new.with_fields(v1, v2)
        check_finite(new)
        self.prev_explicit = E
        self.state = new
        return new


def step(state: State, params: Params, prev_explicit=None) -> State:
    """Advance one step.  Without history this is the startup step of the scheme."""
    integ = Integrator(params, state, prev_explicit)
    return integ.step()


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    state: State
    records: list = field(default_factory=list)
    states: list = field(default_factory=list)
    energy_imbalance: list = field(default_factory=list)
    status: str = "ok"
    files: list = field(default_factory=list)


@lru_cache(maxsize=8)
def _energy_weights(grid: Grid):
    we = grid.vertical_weights("even")
    wo = grid.vertical_weights("odd")
    kh2 = (2 * np.pi) ** 2 * (grid.KX**2 + grid.KY**2)
    km = np.pi * grid.m / grid.h
    inv_km = np.zeros_like(km)
    inv_km[1:] = 1.0 / km[1:]
    sgn = (-1.0) ** grid.m
    return {
        "we": we, "wo": wo, "we_kh2": we * kh2, "wo_kh2": wo * kh2, "wo_km2": wo * km**2,
        "inv_km": inv_km, "sgn_inv_km": sgn * inv_km,
        "gx": 2j * np.pi * grid.KX * we, "gy": 2j * np.pi * grid.KY * we,
    }


def _energy(grid: Grid, c1, c2, cT) -> float:
    w = _energy_weights(grid)
    return 0.5 * float(np.vdot(c1 * w["we"], c1).real + np.vdot(c2 * w["we"], c2).real
                       + np.vdot(cT * w["wo"], cT).real)


def _energy_coeffs(grid: Grid, c1, c2, cT, params: Params) -> tuple[float, float, float]:
    w = _energy_weights(grid)
    sv = c1.real**2 + c1.imag**2 + c2.real**2 + c2.imag**2
    sT = cT.real**2 + cT.imag**2
    energy = 0.5 * float(np.sum(w["we"] * sv) + np.sum(w["wo"] * sT))
    # d_z maps cos <-> sin; for m >= 1 both weights equal h
    diss = params.nu_h * np.sum(w["we_kh2"] * sv) + params.kappa_z * np.sum(w["wo_km2"] * sT)
    if params.epsilon:
        diss += params.epsilon * (np.sum(w["wo_km2"] * sv) + np.sum(w["wo_kh2"] * sT))
    # int_{-h}^{z} T: sin(k z) -> (cos(m pi) - cos(k z)) / k
    IT = -cT * w["inv_km"]
    IT[:, :, 0] = np.sum(cT * w["sgn_inv_km"], axis=2)
    work = np.sum(np.real(c1 * np.conj(w["gx"] * IT) + c2 * np.conj(w["gy"] * IT)))
    return energy, float(diss), float(work)


def _energy_terms(state: State, params: Params) -> tuple[float, float, float]:
    """``(1/2 ||(v,T)||^2, dissipation rate, buoyancy work)``, all diagonal in modal space."""
    return _energy_coeffs(state.grid, state.v1.coeffs, state.v2.coeffs, state.T.coeffs, params)


def energy_imbalance(before: State, after: State, params: Params) -> float:
    """Discrete energy balance defect over one step, with dissipation and work
    at the midpoint state."""
    g = before.grid
    e_before = _energy(g, before.v1.coeffs, before.v2.coeffs, before.T.coeffs)
    e_after = _energy(g, after.v1.coeffs, after.v2.coeffs, after.T.coeffs)
    _, diss, work = _energy_coeffs(
        g,
        0.5 * (before.v1.coeffs + after.v1.coeffs),
        0.5 * (before.v2.coeffs + after.v2.coeffs),
        0.5 * (before.T.coeffs + after.T.coeffs),
        params,
    )
    dt = after.t - before.t
    return (e_after - e_before) + dt * diss - dt * work


def run(
    params: Params,
    state: State | None = None,
    *,
    output_dir: str | Path | None = None,
    keep_states: bool = False,
    track_energy: bool = False,
    monitor: bool = True,
    resume: str | Path | None = None,
    callback: Callable[[State], None] | None = None,
) -> RunResult:
    """Integrate to ``params.t_final``.

    Monitor records are taken at step 0, every ``monitor_stride`` steps and at
    the final step.  With ``output_dir`` the records stream to ``monitors.csv``
    and snapshots/checkpoints are written at their configured intervals.
    """
    from . import io as apes_io
    from .monitors import monitor_report

    prev = None
    if resume is not None:
        state, prev = apes_io.read_checkpoint(resume)
    elif state is None:
        from .state import make_initial_data

        state = make_initial_data(params)
    n_total = params.n_steps
    integ = Integrator(params, state, prev)
    result = RunResult(state=state)
    out = Path(output_dir) if output_dir is not None else None
    writer = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        writer = apes_io.MonitorWriter(out / "monitors.csv", params.q_list,
                                       append=resume is not None)
        result.files.append(out / "monitors.csv")

    def record(s: State):
        if monitor:
            rec = monitor_report(s, params)
            result.records.append(rec)
            if writer is not None:
                writer.write(rec)
        if keep_states:
            result.states.append(s)
        if callback is not None:
            callback(s)

    if resume is None:
        record(state)
        if out is not None and params.snapshot_every:
            path = out / f"snapshot_{state.step:08d}.apes"
            apes_io.write_snapshot(path, state)
            result.files.append(path)
    try:
        while integ.state.step < n_total:
            before = integ.state
            s = integ.step()
            if track_energy:
                result.energy_imbalance.append(energy_imbalance(before, s, params))
            if s.step % params.monitor_stride == 0 or s.step == n_total:
                record(s)
            if out is not None:
                if params.snapshot_every and s.step % params.snapshot_every == 0:
                    path = out / f"snapshot_{s.step:08d}.apes"
                    apes_io.write_snapshot(path, s)
                    result.files.append(path)
                if params.checkpoint_every and s.step % params.checkpoint_every == 0:
                    path = out / f"checkpoint_{s.step:08d}.apes"
                    apes_io.write_checkpoint(path, s, integ.prev_explicit)
                    result.files.append(path)
    except BlowUpError as exc:
        result.status = "blowup"
        result.state = integ.state
        exc.result = result
        raise
    finally:
        if writer is not None:
            writer.close()
    result.state = integ.state
    return result


# ---------------------------------------------------------------------------
# Reflection maps between the half column and the full periodic column
# ---------------------------------------------------------------------------

EVEN_NAMES = ("v1", "v2", "p")
ODD_NAMES = ("w", "T")
BC_TOL = 1e-8


def _field_parity(name: str) -> str:
    if name in EVEN_NAMES:
        return "even"
    if name in ODD_NAMES:
        return "odd"
    raise ValueError(f"unknown field name {name!r}; expected one of {EVEN_NAMES + ODD_NAMES}")


def map_half_full(fields: dict, direction: str) -> dict:
    """Reflect between ``z in [-h, 0]`` samples ``(nx, ny, N+1)`` and full-column
    samples ``(nx, ny, 2N)``.

    ``extend`` reflects v and p evenly and w and T oddly about ``z = 0``;
    the odd fields must vanish at ``z = -h`` and ``z = 0``.  ``restrict`` keeps
    the lower half column and is the left inverse of ``extend``.
    """
    out = {}
    for name, arr in fields.items():
        parity = _field_parity(name)
        arr = np.asarray(arr, dtype=float)
        if direction == "extend":
            n = arr.shape[2] - 1
            if parity == "odd":
                scale = max(float(np.max(np.abs(arr))), np.finfo(float).tiny)
                bad = max(np.max(np.abs(arr[:, :, 0])), np.max(np.abs(arr[:, :, n])))
                if bad > BC_TOL * scale:
                    raise ValueError(f"{name} violates the boundary condition {name} = 0 at z = -h, 0")
                sign = -1.0
            else:
                sign = 1.0
            upper = sign * arr[:, :, n - 1 : 0 : -1]
            full = np.concatenate([arr, upper], axis=2)
            if parity == "odd":
                full[:, :, 0] = 0.0
                full[:, :, n] = 0.0
            out[name] = full
        elif direction == "restrict":
            n = arr.shape[2] // 2
            sym = symmetrize(arr, parity)
            scale = max(float(np.max(np.abs(arr))), np.finfo(float).tiny)
            if np.max(np.abs(sym - arr)) > BC_TOL * scale:
                raise ValueError(f"{name} does not have {parity} symmetry about z = 0")
            out[name] = arr[:, :, : n + 1].copy()
        else:
            raise ValueError(f"unknown direction {direction!r}")
    return out
