"""A solver posed directly on the physical half column ``z in [-h, 0]``.

Velocity satisfies ``d_z v = 0`` and temperature ``T = 0`` at ``z = -h, 0``, so
v is expanded with DCT-I and T with DST-I on the half column.  This model
shares no transform or tendency code with :mod:`apes.dynamics`: it uses
``numpy.fft`` complex 2D transforms, ``scipy.fft`` trigonometric transforms and
the advective form of the nonlinearity.  It exists to test that the symmetric
full-column formulation reproduces the physical boundary-value problem.
"""

from __future__ import annotations

import numpy as np
from scipy.fft import dct, dst

from .state import Params


class HalfDomainModel:
    """Fields are physical samples of shape ``(nx, ny, N+1)`` on ``z_j = -h + j h / N``."""

    def __init__(self, params: Params):
        self.params = params
        g = params.grid
        self.nx, self.ny, self.N = g.nx, g.ny, g.nz
        self.h = g.h
        self.Np = g.n_pad
        kx = np.fft.fftfreq(self.nx, 1.0 / self.nx)[:, None, None]
        ky = np.fft.fftfreq(self.ny, 1.0 / self.ny)[None, :, None]
        self.kx, self.ky = kx, ky
        self.dxs = 2j * np.pi * kx
        self.dys = 2j * np.pi * ky
        m = np.arange(self.N)[None, None, :]
        self.km = np.pi * m / self.h
        self.keep = ((3 * np.abs(kx) < self.nx) & (3 * np.abs(ky) < self.ny)).astype(float)
        dt = params.dt
        kh2 = 4 * np.pi**2 * (kx**2 + ky**2)
        Lv = -params.nu_h * kh2 - params.epsilon * self.km**2
        LT = -params.epsilon * kh2 - params.kappa_z * self.km**2
        self.Lv, self.LT = Lv, LT
        if params.scheme == "imex_cn_ab2":
            self.av, self.bv = (1 + 0.5 * dt * Lv), 1 / (1 - 0.5 * dt * Lv)
            self.aT, self.bT = (1 + 0.5 * dt * LT), 1 / (1 - 0.5 * dt * LT)
        else:
            self.av, self.bv = np.ones_like(Lv), 1 / (1 - dt * Lv)
            self.aT, self.bT = np.ones_like(LT), 1 / (1 - dt * LT)
        self.prev = None
        self.t = 0.0
        self.steps = 0

    # -- vertical transforms -------------------------------------------------

    def _cos_analysis(self, f: np.ndarray) -> np.ndarray:
        """Samples on N+1 points to cosine coefficients m < nz (real or complex input)."""
        n = f.shape[2] - 1
        b = dct(f, type=1, axis=2) / (2 * n)
        b[..., 1:n] *= 2
        b = b[..., : self.N]
        return b * ((-1.0) ** np.arange(self.N))

    def _sin_analysis(self, f: np.ndarray) -> np.ndarray:
        n = f.shape[2] - 1
        b = dst(f[..., 1:n], type=1, axis=2) / n
        out = np.zeros(f.shape[:2] + (self.N,), dtype=b.dtype)
        out[..., 1:] = b[..., : self.N - 1]
        return out * ((-1.0) ** np.arange(self.N))

    def _cos_synthesis(self, a: np.ndarray, n: int) -> np.ndarray:
        b = np.zeros(a.shape[:2] + (n + 1,), dtype=a.dtype)
        b[..., : self.N] = a * ((-1.0) ** np.arange(self.N))
        b[..., 1:n] *= 0.5
        return dct(b, type=1, axis=2)

    def _sin_synthesis(self, a: np.ndarray, n: int) -> np.ndarray:
        b = np.zeros(a.shape[:2] + (n - 1,), dtype=a.dtype)
        b[..., : self.N - 1] = (a * ((-1.0) ** np.arange(self.N)))[..., 1:]
        out = np.zeros(a.shape[:2] + (n + 1,), dtype=a.dtype)
        out[..., 1:n] = dst(0.5 * b, type=1, axis=2)
        return out

    # -- full transforms ------------------------------------------------------

    def to_coeffs(self, f: np.ndarray, kind: str) -> np.ndarray:
        fh = np.fft.fft2(f, axes=(0, 1)) / (self.nx * self.ny)
        a = self._cos_analysis(fh) if kind == "cos" else self._sin_analysis(fh)
        return a * self.keep

    def to_values(self, a: np.ndarray, kind: str, n: int | None = None) -> np.ndarray:
        n = self.N if n is None else n
        col = self._cos_synthesis(a, n) if kind == "cos" else self._sin_synthesis(a, n)
        return np.fft.ifft2(col, axes=(0, 1)).real * (self.nx * self.ny)

    # -- dynamics -------------------------------------------------------------

    def _explicit(self, c1, c2, cT):
        Np = self.Np
        dxs, dys, km = self.dxs, self.dys, self.km

        def cos_vals(a):
            return self.to_values(a, "cos", Np)

        def sin_vals(a):
            return self.to_values(a, "sin", Np)

        div = dxs * c1 + dys * c2
        cw = np.zeros_like(div)
        cw[..., 1:] = -div[..., 1:] / km[..., 1:]
        V1, V2 = cos_vals(c1), cos_vals(c2)
        W = sin_vals(cw)
        V1x, V1y, V2x, V2y = cos_vals(dxs * c1), cos_vals(dys * c1), cos_vals(dxs * c2), cos_vals(dys * c2)
        V1z, V2z = sin_vals(-km * c1), sin_vals(-km * c2)
        Tx, Ty, Tz = sin_vals(dxs * cT), sin_vals(dys * cT), cos_vals(km * cT)
        A1 = self.to_coeffs(V1 * V1x + V2 * V1y + W * V1z, "cos")
        A2 = self.to_coeffs(V1 * V2x + V2 * V2y + W * V2z, "cos")
        AT = self.to_coeffs(V1 * Tx + V2 * Ty + W * Tz, "sin")
        # buoyancy: grad_H of int_{-h}^{z} T
        IT = np.zeros_like(cT)
        IT[..., 1:] = -cT[..., 1:] / km[..., 1:]
        sgn = (-1.0) ** np.arange(self.N)
        IT[..., 0] = np.sum(cT[..., 1:] * sgn[1:] / km[..., 1:], axis=-1)
        f0 = self.params.f0
        E1 = -A1 + f0 * c2 + dxs * IT * self.keep
        E2 = -A2 - f0 * c1 + dys * IT * self.keep
        E1, E2 = self._leray_mean(E1, E2)
        return E1, E2, -AT

    def _leray_mean(self, a1, a2):
        kx, ky = self.kx[..., 0], self.ky[..., 0]
        k2 = kx**2 + ky**2
        safe = np.where(k2 == 0, 1.0, k2)
        proj = np.where(k2 == 0, 0.0, (kx * a1[..., 0] + ky * a2[..., 0]) / safe)
        a1 = a1.copy()
        a2 = a2.copy()
        a1[..., 0] -= kx * proj
        a2[..., 0] -= ky * proj
        return a1, a2

    def set_state(self, v1: np.ndarray, v2: np.ndarray, T: np.ndarray, t: float = 0.0):
        self.c1 = self.to_coeffs(v1, "cos")
        self.c2 = self.to_coeffs(v2, "cos")
        self.cT = self.to_coeffs(T, "sin")
        self.c1, self.c2 = self._leray_mean(self.c1, self.c2)
        self.prev = None
        self.t = t
        self.steps = 0

    def step(self):
        dt = self.params.dt
        E = self._explicit(self.c1, self.c2, self.cT)
        if self.params.scheme == "imex_cn_ab2" and self.prev is not None:
            X = [1.5 * e - 0.5 * p for e, p in zip(E, self.prev)]
        else:
            X = E
        c1 = (self.av * self.c1 + dt * X[0]) * self.bv
        c2 = (self.av * self.c2 + dt * X[1]) * self.bv
        cT = (self.aT * self.cT + dt * X[2]) * self.bT
        self.c1, self.c2 = self._leray_mean(c1 * self.keep, c2 * self.keep)
        self.cT = cT * self.keep
        self.prev = E
        self.steps += 1
        self.t = self.steps * dt

    def values(self) -> dict:
        """Physical half-column samples of v1, v2, T and the diagnosed w."""
        div = self.dxs * self.c1 + self.dys * self.c2
        cw = np.zeros_like(div)
        cw[..., 1:] = -div[..., 1:] / self.km[..., 1:]
        return {
            "v1": self.to_values(self.c1, "cos"),
            "v2": self.to_values(self.c2, "cos"),
            "T": self.to_values(self.cT, "sin"),
            "w": self.to_values(cw, "sin"),
        }
