"""Tracked norms along a run and the explicit logarithmic Gronwall bound."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .diagnostics import compute_aux_fields
from .spectral import (
    dx,
    dy,
    dz,
    grid_integral,
    l2_sq,
    laplacian_h,
    linf_norm,
    lq_norm,
    magnitude,
)
from .state import Params, State


@dataclass
class MonitorRecord:
    t: float
    l2_vT: float
    diss: float
    max_T: float
    lq_v: dict
    A2: float
    B2: float
    vinf_proxy: float
    A3: float
    B3: float
    A4: float
    B4: float
    grad2_T: float

    def columns(self) -> list[str]:
        return record_columns(self.lq_v.keys())

    def values(self) -> list[float]:
        head = [self.t, self.l2_vT, self.diss, self.max_T]
        tail = [self.A2, self.B2, self.vinf_proxy, self.A3, self.B3, self.A4, self.B4, self.grad2_T]
        return head + [self.lq_v[q] for q in self.lq_v] + tail


def _qname(q) -> str:
    return f"lq_v_{q:g}"


def record_columns(q_list) -> list[str]:
    """CSV column order: t, l2_vT, diss, max_T, lq_v_<q>..., A2, B2, vinf_proxy, A3, B3, A4, B4, grad2_T."""
    return (["t", "l2_vT", "diss", "max_T"] + [_qname(q) for q in q_list]
            + ["A2", "B2", "vinf_proxy", "A3", "B3", "A4", "B4", "grad2_T"])


def grad_h_sq(*fields) -> float:
    """``sum ||grad_H f||_2^2`` by Parseval."""
    return sum(l2_sq(dx(f), dy(f)) for f in fields)


def dissipation(state: State, params: Params) -> float:
    """Energy dissipation rate: ``nu_h ||grad_H v||^2 + kappa_z ||d_z T||^2
    + eps ||d_z v||^2 + eps ||grad_H T||^2``."""
    v1, v2, T = state.v1, state.v2, state.T
    eps = params.epsilon
    total = params.nu_h * grad_h_sq(v1, v2) + params.kappa_z * l2_sq(dz(T))
    if eps:
        total += eps * (l2_sq(dz(v1), dz(v2)) + grad_h_sq(T))
    return float(total)


def monitor_report(state: State, params: Params) -> MonitorRecord:
    v1, v2, T = state.v1, state.v2, state.T
    g = state.grid
    eps = params.epsilon
    n = g.n_pad
    aux = compute_aux_fields(v1, v2, T)
    u1, u2 = aux["u"]
    eta, theta = aux["eta"], aux["theta"]

    l2_vT = l2_sq(v1, v2, T)
    diss = dissipation(state, params)
    max_T = linf_norm(T, n=n)
    lq = {q: lq_norm(v1, v2, q=q, n=n) / np.sqrt(q) for q in params.q_list}

    u_mag = magnitude(u1, u2, n=n)
    A2 = l2_sq(theta, eta, u1, u2) + 0.5 * grid_integral(u_mag**4, g) + np.e
    B2 = grad_h_sq(theta, eta, u1, u2)
    if eps:
        B2 += eps * l2_sq(dz(eta), dz(theta), dz(u1), dz(u2))
    vmax = linf_norm(v1, v2, n=n)
    vinf_proxy = vmax**2 / np.log(A2 + B2)

    qT = params.q_T
    Tx, Ty, Tz = dx(T), dy(T), dz(T)
    gradT_q = grid_integral(magnitude(Tx, Ty, n=n) ** qT, g)
    gradH_T2 = l2_sq(Tx, Ty)
    A3 = grad_h_sq(eta, theta) + 0.5 * l2_sq(Tx, Ty, Tz) + gradT_q / qT
    B3 = 0.5 * l2_sq(laplacian_h(eta), laplacian_h(theta))
    if eps:
        B3 += 0.5 * eps * grad_h_sq(dz(eta), dz(theta))
    B3 += l2_sq(dz(Tz), dx(Tz), dy(Tz))
    if eps:
        B3 += eps * l2_sq(laplacian_h(T))
    A4 = (2.0 / qT) * gradT_q + gradH_T2
    B4 = l2_sq(dx(Tz), dy(Tz))
    grad2_T = (l2_sq(dx(Tx), dy(Ty), dz(Tz))
               + 2.0 * l2_sq(dy(Tx), dz(Tx), dz(Ty)))
    return MonitorRecord(
        t=float(state.t),
        l2_vT=float(l2_vT),
        diss=diss,
        max_T=float(max_T),
        lq_v={q: float(val) for q, val in lq.items()},
        A2=float(A2),
        B2=float(B2),
        vinf_proxy=float(vinf_proxy),
        A3=float(A3),
        B3=float(B3),
        A4=float(A4),
        B4=float(B4),
        grad2_T=float(grad2_T),
    )


def fit_growth_rate(times, values) -> float:
    """Smallest ``c >= 0`` with ``values(t) <= values(0) exp(c t)`` at every sample."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    v0 = values[0]
    mask = times > 0
    if v0 <= 0 or not np.any(mask):
        return 0.0
    rates = np.log(np.maximum(values[mask], np.finfo(float).tiny) / v0) / times[mask]
    return float(max(0.0, np.max(rates)))


# ---------------------------------------------------------------------------
# Logarithmic Gronwall bound
# ---------------------------------------------------------------------------


@dataclass
class GronwallInstance:
    """Sampled hypotheses of the logarithmic Gronwall lemma.

    ``times`` is nondecreasing from 0 to the horizon; repeating a time encodes a
    jump, so piecewise constant integrands are integrated exactly.
    """

    A0: float
    times: np.ndarray
    ell: np.ndarray
    m: np.ndarray
    n: np.ndarray
    f: np.ndarray
    K: float
    alpha: float
    B: np.ndarray | None = None
    _cum: dict = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        for name in ("ell", "m", "n", "f"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), self.times.shape)
            setattr(self, name, np.array(arr))
        if self.B is not None:
            self.B = np.array(np.broadcast_to(np.asarray(self.B, dtype=float), self.times.shape))
        self.validate()

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def K_eff(self) -> float:
        """K floored at 1/2; the bound is monotone in K so this stays valid."""
        return max(self.K, 0.5)

    def validate(self) -> None:
        if self.times.ndim != 1 or self.times.size < 1:
            raise ValueError("times must be a nonempty 1-d array")
        if self.times[0] != 0.0 or np.any(np.diff(self.times) < 0):
            raise ValueError("times must start at 0 and be nondecreasing")
        if self.A0 < 0:
            raise ValueError("A0 must be nonnegative")
        if not (self.K > 0 and self.alpha > 0):
            raise ValueError("K and alpha must be positive")
        for name in ("ell", "m", "n", "f"):
            arr = getattr(self, name)
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite and nonnegative")
        if self.B is not None and np.any(self.B < 0):
            raise ValueError("B must be nonnegative")

    def cumulative(self) -> dict:
        if self._cum is None:
            t = self.times
            logK = np.log(2.0 * self.K_eff)
            if t.size == 1:
                z = np.zeros(1)
                self._cum = {"mn": z, "rest": z}
            else:
                self._cum = {
                    "mn": cumulative_trapezoid(self.m + self.n, t, initial=0.0),
                    "rest": cumulative_trapezoid(self.ell + self.f + logK * self.n, t, initial=0.0),
                }
        return self._cum


def gronwall_bound(instance: GronwallInstance, t: float) -> dict:
    """``Q(t)`` and ``(2Q+1) e^Q`` with trapezoid integrals of the sampled data."""
    if t < 0 or t > instance.horizon * (1 + 1e-12):
        raise ValueError(f"t = {t} outside [0, {instance.horizon}]")
    cum = instance.cumulative()
    times = instance.times
    i_mn = float(np.interp(t, times, cum["mn"]))
    i_rest = float(np.interp(t, times, cum["rest"]))
    Q = np.exp((instance.alpha + 1.0) * i_mn) * (np.log(instance.A0 + np.e) + i_rest + t)
    with np.errstate(over="ignore"):
        bound = (2.0 * Q + 1.0) * np.exp(Q)
    return {"Q": float(Q), "bound": float(bound)}
