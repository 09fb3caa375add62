"""Property checks of functional inequalities on random trigonometric polynomials.

Everything here is evaluated by direct summation of trigonometric series on an
oversampled uniform grid and trapezoid quadrature.  None of it calls into
:mod:`apes.spectral`, so the two implementations can check each other.

Each check returns the left side and the right side with any unknown constant
factored out.  For the inequalities with explicit constants the constant is
folded into ``rhs_structural`` and ``ratio <= 1`` is the claim under test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .monitors import GronwallInstance, gronwall_bound

EXPLICIT = {"ineqlad": 1.0, "ineqlad1": 1.0, "zt4": 3.0, "ht4": 3.0}
C_BEARING = ("lad", "lem2_3_a", "lem2_3_b", "lem2_3_c", "lem2_3_d", "log_sobolev", "bgw", "bkm")
NAMES = tuple(EXPLICIT) + C_BEARING
# families whose two sides scale with the same power of the fields
HOMOGENEOUS = ("lad", "ineqlad", "ineqlad1", "lem2_3_a", "lem2_3_c", "zt4", "ht4")
N_FIELDS = {"lad": 3, "ineqlad": 3, "ineqlad1": 3, "bkm": 2}
LOG_SOBOLEV_R = tuple(range(2, 65, 2))


class HypothesisError(ValueError):
    """The inputs do not satisfy the hypotheses of the inequality."""


@dataclass
class TrigPoly:
    """``Re sum c[kx, ky, m] exp(2 pi i (kx x + ky y)) Z_m(z)`` on (0,1)^2 x (-h, h).

    ``kx, ky`` run over ``-K .. K`` (array index ``k + K``); ``Z_m`` is
    ``cos(m pi z / h)`` for even parity and ``sin(m pi z / h)`` for odd.
    """

    coeffs: np.ndarray
    parity: str = "even"
    h: float = 1.0

    @property
    def K(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    @property
    def M(self) -> int:
        return self.coeffs.shape[2]

    def scaled(self, lam: float) -> TrigPoly:
        return TrigPoly(self.coeffs * lam, self.parity, self.h)

    def deriv(self, axis: str) -> TrigPoly:
        k = np.arange(-self.K, self.K + 1)
        if axis == "x":
            return TrigPoly(self.coeffs * (2j * np.pi * k)[:, None, None], self.parity, self.h)
        if axis == "y":
            return TrigPoly(self.coeffs * (2j * np.pi * k)[None, :, None], self.parity, self.h)
        kz = np.pi * np.arange(self.M) / self.h
        if self.parity == "even":
            return TrigPoly(-self.coeffs * kz, "odd", self.h)
        return TrigPoly(self.coeffs * kz, "even", self.h)

    def sample(self, nq: int, nz: int) -> np.ndarray:
        """Values on the periodic grid ``nq x nq x nz`` (``z_j = -h + 2 h j / nz``)."""
        x = np.arange(nq) / nq
        z = -self.h + 2.0 * self.h * np.arange(nz) / nz
        k = np.arange(-self.K, self.K + 1)
        ex = np.exp(2j * np.pi * np.outer(x, k))
        arg = np.pi * np.outer(z, np.arange(self.M)) / self.h
        zb = np.cos(arg) if self.parity == "even" else np.sin(arg)
        a = np.tensordot(ex, self.coeffs, axes=([1], [0]))  # (x, ky, m)
        a = np.tensordot(a, ex, axes=([1], [1]))  # (x, m, y)
        a = np.tensordot(a, zb, axes=([1], [1]))  # (x, y, z)
        return a.real


def random_trig_poly(rng: np.random.Generator, K: int = 4, M: int = 4, parity: str = "even",
                     slope: float = 2.0, h: float = 1.0) -> TrigPoly:
    shape = (2 * K + 1, 2 * K + 1, M)
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    k = np.arange(-K, K + 1)
    decay = (1.0 + k[:, None, None] ** 2 + k[None, :, None] ** 2 + np.arange(M) ** 2) ** (-slope / 2)
    c = c * decay
    if parity == "odd":
        c[:, :, 0] = 0.0
    return TrigPoly(c, parity, h)


def constant_poly(value: float, h: float = 1.0, K: int = 0, M: int = 1) -> TrigPoly:
    c = np.zeros((2 * K + 1, 2 * K + 1, M), dtype=complex)
    c[K, K, 0] = value
    return TrigPoly(c, "even", h)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


class _Quad:
    """Uniform periodic grid with trapezoid (equal) weights."""

    def __init__(self, polys, oversample: int = 2):
        K = max(p.K for p in polys)
        M = max(p.M for p in polys)
        self.h = polys[0].h
        # oversample times the point count needed to resolve the generating spectrum
        # counts are rounded up to multiples of 4 so quarter points are sampled
        self.nq = 4 * -(-max(4, oversample * (2 * K + 1)) // 4)
        self.nz = 4 * -(-max(4, oversample * (2 * M + 1)) // 4)
        self.dA = 1.0 / self.nq**2
        self.dz = 2.0 * self.h / self.nz

    def values(self, p: TrigPoly) -> np.ndarray:
        return p.sample(self.nq, self.nz)

    def sup(self, p: TrigPoly) -> float:
        """Grid maximum of |p| on a twice finer grid (a lower bound of the sup norm)."""
        return float(np.max(np.abs(p.sample(2 * self.nq, 2 * self.nz))))

    def integral(self, f: np.ndarray) -> float:
        return float(np.sum(f) * self.dA * self.dz)

    def integral_M(self, f: np.ndarray) -> np.ndarray:
        """Integral over M at each level."""
        return np.sum(f, axis=(0, 1)) * self.dA

    def integral_z(self, f: np.ndarray) -> np.ndarray:
        """Integral over the column at each horizontal point (or of a profile)."""
        return np.sum(f, axis=-1) * self.dz

    def norm(self, f: np.ndarray, p: float) -> float:
        return self.integral(np.abs(f) ** p) ** (1.0 / p)

    def norm_M(self, f: np.ndarray, p: float) -> np.ndarray:
        return self.integral_M(np.abs(f) ** p) ** (1.0 / p)


def l2_quadrature(p: TrigPoly, oversample: int = 2) -> float:
    q = _Quad([p], oversample)
    return q.norm(q.values(p), 2)


def _grad_h(q: _Quad, p: TrigPoly):
    return q.values(p.deriv("x")), q.values(p.deriv("y"))


def _hess_h(q: _Quad, p: TrigPoly):
    px, py = p.deriv("x"), p.deriv("y")
    return q.values(px.deriv("x")), q.values(px.deriv("y")), q.values(py.deriv("y"))


# ---------------------------------------------------------------------------
# Individual inequalities: return (lhs, rhs_structural)
# ---------------------------------------------------------------------------


def _lad(q, phi, vphi, psi):
    a, b, c = q.values(phi), q.values(vphi), q.values(psi)
    lhs = float(np.sum(q.integral_z(np.abs(a)) * q.integral_z(np.abs(b * c))) * q.dA)

    def factor(p, v):
        n = q.norm(v, 2)
        gx, gy = _grad_h(q, p)
        g = np.sqrt(q.integral(gx**2 + gy**2))
        return np.sqrt(n) * (np.sqrt(n) + np.sqrt(g))

    rhs = q.norm(a, 2) * factor(vphi, b) * factor(psi, c)
    return lhs, rhs


def _ineqlad(q, phi, vphi, psi):
    a, b, c = q.values(phi), q.values(vphi), q.values(psi)
    lhs = float(np.sum(q.integral_z(np.abs(a)) * q.integral_z(np.abs(b) * np.abs(c))) * q.dA)
    rhs = (float(q.integral_z(q.norm_M(a, 4)))
           * float(q.integral_z(q.norm_M(b, 4) ** 2)) ** 0.5
           * q.norm(c, 2))
    return lhs, rhs


def _ineqlad1(q, phi, vphi, psi):
    a, b, c = q.values(phi), q.values(vphi), q.values(psi)
    lhs = float(np.sum(q.integral_z(np.abs(a) * np.abs(b)) * q.integral_z(np.abs(c))) * q.dA)
    rhs = (float(q.integral_z(q.norm_M(a, 4) ** 2)) ** 0.5
           * float(q.integral_z(q.norm_M(b, 4) ** 2)) ** 0.5
           * float(q.integral_z(q.norm_M(c, 2))))
    return lhs, rhs


def _lem2_3(q, f, variant):
    h = f.h
    if variant in ("a", "b"):
        v = q.values(f)
        gx, gy = _grad_h(q, f)
        n0 = q.norm(v, 2)
        n1 = np.sqrt(q.integral(gx**2 + gy**2))
        col = float(q.integral_z(q.norm_M(v, 4) ** 2))
        struct = np.sqrt(n0 * n1) + n0
    else:
        gx, gy = _grad_h(q, f)
        fxx, fxy, fyy = _hess_h(q, f)
        mag = np.sqrt(gx**2 + gy**2)
        n1 = np.sqrt(q.integral(gx**2 + gy**2))
        n2 = np.sqrt(q.integral(fxx**2 + 2 * fxy**2 + fyy**2))
        col = float(q.integral_z(q.norm_M(mag, 4) ** 2))
        struct = np.sqrt(n1 * n2)
    if variant in ("a", "c"):
        return float(np.sqrt(col)), float(struct)
    return col, float(np.sqrt(h) * struct)


def _zt4(q, T):
    if T.parity != "odd":
        raise HypothesisError("zt4 needs T odd in z so that T vanishes at z = -h")
    tz = q.values(T.deriv("z"))
    tzz = q.values(T.deriv("z").deriv("z"))
    lhs = q.norm(tz, 4) ** 2
    rhs = EXPLICIT["zt4"] * q.sup(T) * q.norm(tzz, 2)
    return lhs, rhs


def _ht4(q, T):
    gx, gy = _grad_h(q, T)
    fxx, _, fyy = _hess_h(q, T)
    lhs = np.sqrt(q.integral((gx**2 + gy**2) ** 2))
    rhs = EXPLICIT["ht4"] * q.sup(T) * q.norm(fxx + fyy, 2)
    return float(lhs), float(rhs)


def _log_sobolev(q, F, lam: float, p: float = 4.0):
    v = q.values(F)
    lhs = float(np.max(np.abs(v)))
    sup_r = max(q.norm(v, r) / r**lam for r in LOG_SOBOLEV_R)
    w1p = q.norm(v, p) + sum(q.norm(q.values(F.deriv(a)), p) for a in ("x", "y", "z"))
    rhs = max(1.0, sup_r) * np.log(w1p + np.e) ** lam
    return lhs, float(rhs)


def _slice_norm(f, p):
    """L^p(M) norm per level for arrays shaped (nq, nq, nz)."""
    return (np.mean(np.abs(f) ** p, axis=(0, 1))) ** (1.0 / p)


def _bgw(q, g):
    v = q.values(g)
    gx, gy = _grad_h(q, g)
    fxx, fxy, fyy = _hess_h(q, g)
    lhs = np.max(np.abs(v), axis=(0, 1))
    l2 = _slice_norm(v, 2) ** 2
    h1 = np.sqrt(l2 + _slice_norm(gx, 2) ** 2 + _slice_norm(gy, 2) ** 2)
    h2 = np.sqrt(h1**2 + _slice_norm(fxx, 2) ** 2 + 2 * _slice_norm(fxy, 2) ** 2 + _slice_norm(fyy, 2) ** 2)
    rhs = (1.0 + h1) * np.sqrt(np.log(np.e + h2))
    i = int(np.argmax(lhs / rhs))
    return float(lhs[i]), float(rhs[i])


def _bkm(q, g1, g2, qexp: float = 4.0):
    a1x, a1y = _grad_h(q, g1)
    a2x, a2y = _grad_h(q, g2)
    lhs = np.max(np.sqrt(a1x**2 + a1y**2 + a2x**2 + a2y**2), axis=(0, 1))
    curl = -a1y + a2x
    div = a1x + a2y
    v1, v2 = q.values(g1), q.values(g2)
    w1q = (_slice_norm(v1, qexp) + _slice_norm(v2, qexp)
           + sum(_slice_norm(d, qexp) for d in (a1x, a1y, a2x, a2y)))
    rhs = (np.max(np.abs(curl), axis=(0, 1)) + np.max(np.abs(div), axis=(0, 1)) + 1.0) * np.log(np.e + w1q)
    i = int(np.argmax(lhs / rhs))
    return float(lhs[i]), float(rhs[i])


# ---------------------------------------------------------------------------
# Public interface
# ---------------------------------------------------------------------------


@dataclass
class InequalityCase:
    name: str
    lhs: float
    rhs_structural: float
    ratio: float
    constant: float | None = None
    fields: tuple = field(default=(), repr=False)


def _ratio(lhs: float, rhs: float) -> float:
    if rhs > 0:
        return lhs / rhs
    return 0.0 if lhs == 0 else float("inf")


def check_inequality(name: str, fields, oversample: int = 2, lam: float = 0.5) -> InequalityCase:
    """Evaluate both sides of inequality ``name`` for the given fields."""
    if name not in NAMES:
        raise ValueError(f"unknown inequality {name!r}; expected one of {NAMES}")
    fields = tuple(fields)
    need = N_FIELDS.get(name, 1)
    if len(fields) != need:
        raise ValueError(f"{name} takes {need} field(s), got {len(fields)}")
    if oversample < 1:
        raise ValueError("oversample must be a positive integer")
    q = _Quad(fields, oversample)
    if name == "lad":
        lhs, rhs = _lad(q, *fields)
    elif name == "ineqlad":
        lhs, rhs = _ineqlad(q, *fields)
    elif name == "ineqlad1":
        lhs, rhs = _ineqlad1(q, *fields)
    elif name.startswith("lem2_3_"):
        lhs, rhs = _lem2_3(q, fields[0], name[-1])
    elif name == "zt4":
        lhs, rhs = _zt4(q, fields[0])
    elif name == "ht4":
        lhs, rhs = _ht4(q, fields[0])
    elif name == "log_sobolev":
        lhs, rhs = _log_sobolev(q, fields[0], lam)
    elif name == "bgw":
        lhs, rhs = _bgw(q, fields[0])
    else:
        lhs, rhs = _bkm(q, *fields)
    return InequalityCase(name, float(lhs), float(rhs), _ratio(lhs, rhs), EXPLICIT.get(name), fields)


def random_fields(name: str, rng: np.random.Generator, K: int = 4, M: int = 4,
                  slope: float = 2.0, h: float = 1.0):
    parity = "odd" if name == "zt4" else None
    out = []
    for _ in range(N_FIELDS.get(name, 1)):
        par = parity or ("odd" if rng.random() < 0.5 else "even")
        out.append(random_trig_poly(rng, K, M, par, slope, h))
    return out


def empirical_constant(name: str, seed: int = 0, count: int = 100, K: int = 4, M: int = 4,
                       slope: float = 2.0, h: float = 1.0, bins: int = 20, oversample: int = 2) -> dict:
    """Ensemble maximum of the ratio (the empirical constant) with a histogram."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    cases = []
    for _ in range(count):
        cases.append(check_inequality(name, random_fields(name, rng, K, M, slope, h), oversample))
    ratios = np.array([c.ratio for c in cases])
    hist, edges = np.histogram(ratios, bins=bins)
    return {
        "name": name,
        "max_ratio": float(ratios.max()),
        "histogram": hist,
        "edges": edges,
        "ratios": ratios,
        "cases": cases,
    }


# ---------------------------------------------------------------------------
# Logarithmic Gronwall oracle
# ---------------------------------------------------------------------------


def gronwall_oracle(instance: GronwallInstance, B=None, rtol: float = 1e-10, atol: float = 1e-12) -> dict:
    """Integrate the equality case of the differential inequality and compare
    ``A(t) + int_0^t B`` with the bound at every sample time.

    ``B`` is a callable ``B(t, A) >= 0``; default is zero.
    """
    B = (lambda t, A: 0.0) if B is None else B
    times = instance.times
    e = np.e

    def coef(t, arr):
        return float(np.interp(t, times, arr))

    # integrate between distinct sample times so jumps sit on segment ends
    uniq = np.unique(times)
    A_vals = [instance.A0]
    IB_vals = [0.0]
    y = np.array([instance.A0, 0.0])
    for t0, t1 in zip(uniq[:-1], uniq[1:]):
        # data are constant on each open segment
        mid = 0.5 * (t0 + t1)
        frozen = {k: coef(mid, getattr(instance, k)) for k in ("ell", "m", "n", "f")}

        def seg(t, yy, fr=frozen):
            A = max(yy[0], 0.0)
            b = B(t, A)
            dA = (fr["ell"] + fr["m"] * np.log(A + e) + fr["n"] * np.log(A + b + e)) * (A + e) + fr["f"] - b
            return [dA, b]

        def violated(t, yy, fr=frozen):
            return fr["n"] - instance.K * (max(yy[0], 0.0) + e) ** instance.alpha * (1 + 1e-12)

        violated.terminal = True
        violated.direction = 1
        if violated(t0, y) > 0:
            raise HypothesisError(f"n exceeds K (A + e)^alpha at t = {t0}")
        sol = solve_ivp(seg, (t0, t1), y, method="RK45", rtol=rtol, atol=atol, events=violated)
        if sol.status == 1:
            raise HypothesisError("n exceeds K (A + e)^alpha along the trajectory")
        if not sol.success:
            raise RuntimeError(f"ODE integration failed: {sol.message}")
        y = sol.y[:, -1]
        A_vals.append(y[0])
        IB_vals.append(y[1])
    A_vals = np.array(A_vals)
    IB_vals = np.array(IB_vals)

    # hypothesis n <= K (A + e)^alpha at every sample
    A_at = np.interp(times, uniq, A_vals)
    if np.any(instance.n > instance.K * (A_at + e) ** instance.alpha * (1 + 1e-12)):
        raise HypothesisError("n(t) exceeds K (A + e)^alpha along the trajectory")

    bounds = np.array([gronwall_bound(instance, t)["bound"] for t in uniq])
    Qs = np.array([gronwall_bound(instance, t)["Q"] for t in uniq])
    lhs = A_vals + IB_vals
    holds = bool(np.all(lhs <= bounds))
    return {
        "times": uniq,
        "A": A_vals,
        "int_B": IB_vals,
        "Q": Qs,
        "bound": bounds,
        "holds": holds,
        "margin": float(np.min(bounds - lhs)) if uniq.size else 0.0,
    }


def random_gronwall_instance(rng: np.random.Generator, horizon: float = 1.0, pieces: int = 4):
    """A valid instance with piecewise-constant data and ``B = beta A``.

    Since ``A >= 0`` along the equality trajectory, ``n <= K e^alpha`` guarantees
    the growth hypothesis.
    """
    K = rng.uniform(0.5, 3.0)
    alpha = rng.uniform(0.5, 3.0)
    beta = rng.uniform(0.0, 5.0)
    edges = np.concatenate([[0.0], np.sort(rng.uniform(0, horizon, pieces - 1)), [horizon]])
    # duplicate the interior cuts to encode jumps
    times = np.concatenate([[edges[0]], np.repeat(edges[1:-1], 2), [edges[-1]]])

    def sample(high):
        vals = rng.uniform(0, high, pieces)
        return np.repeat(vals, 2)

    ell = sample(1.0)
    m = sample(0.5)
    n = np.minimum(sample(1.0), K * np.e**alpha)
    f = sample(1.0)
    A0 = rng.uniform(0.0, 3.0)
    inst = GronwallInstance(A0=A0, times=times, ell=ell, m=m, n=n, f=f, K=K, alpha=alpha)
    return inst, beta
