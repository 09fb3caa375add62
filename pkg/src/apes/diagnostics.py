"""Diagnostic fields derived from a state, and residuals of their evolution equations.

All nonlinear terms go through :func:`apes.spectral.multiply`, which is exact
on retained modes, so the identities linking these fields to the prognostic
equations hold at the discrete level up to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import (
    HorizontalField,
    SpectralField3D,
    curl_h,
    div_h,
    dx,
    dy,
    dz,
    dzz,
    horizontal_mean,
    integrate_z_from_bottom,
    l2,
    laplacian_h,
    multiply,
    remove_vertical_mean,
    solve_poisson_2d,
    vertical_mean,
)
from .state import Params, State, check_constraint

Pair = tuple[SpectralField3D, SpectralField3D]


@dataclass
class AuxFields:
    w: SpectralField3D
    Phi: SpectralField3D
    eta: SpectralField3D
    theta: SpectralField3D
    u: Pair
    varphi: SpectralField3D
    psi: SpectralField3D
    p_s: HorizontalField
    p: SpectralField3D
    zeta: Pair
    varpi: Pair
    f_bar: HorizontalField


# ---------------------------------------------------------------------------
# Small operator helpers
# ---------------------------------------------------------------------------


def _zero_m0(f: SpectralField3D) -> SpectralField3D:
    c = f.coeffs.copy()
    c[:, :, 0] = 0.0
    return SpectralField3D(f.grid, f.parity, c)


def advect(v1, v2, w, f: SpectralField3D) -> SpectralField3D:
    """``(v . grad_H) f + w d_z f``."""
    return multiply(v1, dx(f)) + multiply(v2, dy(f)) + multiply(w, dz(f))


def coriolis(f0: float, a: SpectralField3D, b: SpectralField3D) -> Pair:
    """``f0 k x (a, b) = f0 (-b, a)``."""
    return -b * f0, a * f0


def temperature_integral(T: SpectralField3D) -> SpectralField3D:
    """``int_{-h}^{z} T dxi`` (even)."""
    return integrate_z_from_bottom(T)


def momentum_nonlinear(v1, v2, w, f0: float) -> Pair:
    """``N = (v . grad_H) v + w d_z v + f0 k x v``."""
    c1, c2 = coriolis(f0, v1, v2)
    return advect(v1, v2, w, v1) + c1, advect(v1, v2, w, v2) + c2


def div_tensor(v1, v2) -> Pair:
    """``div_H (v (x) v)``, component i is ``d_j (v_j v_i)``."""
    v11 = multiply(v1, v1)
    v12 = multiply(v1, v2)
    v22 = multiply(v2, v2)
    return dx(v11) + dy(v12), dx(v12) + dy(v22)


# ---------------------------------------------------------------------------
# Diagnostic fields
# ---------------------------------------------------------------------------


def compute_w(v1: SpectralField3D, v2: SpectralField3D) -> SpectralField3D:
    """``w = -int_{-h}^{z} div_H v dxi`` (odd)."""
    check_constraint(v1, v2)
    return -integrate_z_from_bottom(_zero_m0(div_h(v1, v2)))


def compute_phi(T: SpectralField3D) -> SpectralField3D:
    """Vertical primitive of T with its column mean removed."""
    return remove_vertical_mean(temperature_integral(T))


def compute_aux_fields(v1, v2, T) -> dict:
    Phi = compute_phi(T)
    u1, u2 = dz(v1), dz(v2)
    return {
        "Phi": Phi,
        "u": (u1, u2),
        "eta": div_h(v1, v2) + Phi,
        "theta": curl_h(v1, v2),
        "varphi": div_h(u1, u2) + T,
        "psi": curl_h(u1, u2),
    }


def surface_pressure_rhs(v1, v2, T, f0: float) -> HorizontalField:
    """``(1/2h) div_H int (div_H(v (x) v) + f0 k x v - int grad_H T) dz``."""
    a1, a2 = div_tensor(v1, v2)
    c1, c2 = coriolis(f0, v1, v2)
    IT = temperature_integral(T)
    g1 = a1 + c1 - dx(IT)
    g2 = a2 + c2 - dy(IT)
    return vertical_mean(div_h(g1, g2))


def solve_surface_pressure(v1, v2, T, f0: float = 0.0) -> HorizontalField:
    check_constraint(v1, v2)
    return solve_poisson_2d(surface_pressure_rhs(v1, v2, T, f0))


def reconstruct_pressure(p_s: HorizontalField, T: SpectralField3D) -> SpectralField3D:
    """``p = p_s - int_{-h}^{z} T dxi``."""
    return p_s.lift() - temperature_integral(T)


def decompose_zeta_varpi(v1, v2, T) -> tuple[Pair, Pair]:
    """Return ``(zeta, varpi)`` with ``varpi = grad_H chi`` and
    ``Delta_H chi = Phi - mean_M Phi`` level by level."""
    Phi = compute_phi(T)
    rhs = Phi - horizontal_mean(Phi)
    chi = -solve_poisson_2d(rhs)
    w1, w2 = dx(chi), dy(chi)
    return (v1 + w1, v2 + w2), (w1, w2)


def compute_f_bar(v1, v2, T, w, epsilon: float, f0: float = 0.0) -> HorizontalField:
    """Column-mean forcing term of the eta equation."""
    inner = div_h(multiply(v1, T), multiply(v2, T)) - laplacian_h(T) * epsilon
    part1 = integrate_z_from_bottom(inner) + multiply(w, T)
    a1, a2 = div_tensor(v1, v2)
    c1, c2 = coriolis(f0, v1, v2)
    part2 = div_h(a1 + c1, a2 + c2)
    return vertical_mean(part1) + vertical_mean(part2)


def compute_all(state: State, params: Params) -> AuxFields:
    v1, v2, T = state.v1, state.v2, state.T
    w = compute_w(v1, v2)
    aux = compute_aux_fields(v1, v2, T)
    p_s = solve_surface_pressure(v1, v2, T, params.f0)
    zeta, varpi = decompose_zeta_varpi(v1, v2, T)
    return AuxFields(
        w=w,
        Phi=aux["Phi"],
        eta=aux["eta"],
        theta=aux["theta"],
        u=aux["u"],
        varphi=aux["varphi"],
        psi=aux["psi"],
        p_s=p_s,
        p=reconstruct_pressure(p_s, T),
        zeta=zeta,
        varpi=varpi,
        f_bar=compute_f_bar(v1, v2, T, w, params.epsilon, params.f0),
    )


def aux_invariant_residuals(state: State, aux: AuxFields) -> dict:
    """Residuals of the structural identities satisfied by the diagnostic fields."""
    v1, v2, T = state.v1, state.v2, state.T
    g = state.grid
    top = aux.w.half_values()[:, :, 0]  # w at z = -h; w(h) = -w(-h) by parity
    w_full = aux.w.values()
    div = div_h(v1, v2)
    Phi_mean = horizontal_mean(aux.Phi)
    return {
        "w_boundary": float(max(np.max(np.abs(top)), np.max(np.abs(w_full[:, :, 0])))),
        "w_constraint": float(np.max(np.abs((dz(aux.w) + _zero_m0(div)).coeffs))),
        "hydrostatic": l2(dz(aux.p) + T),
        "eta_column_mean": float(np.max(np.abs(aux.eta.coeffs[:, :, 0]))),
        "p_s_mean": abs(aux.p_s.coeffs[0, 0]),
        "zeta_div": l2(div_h(*aux.zeta) - (aux.eta - Phi_mean)),
        "zeta_curl": l2(curl_h(*aux.zeta) - aux.theta),
        "varpi_curl": float(np.max(np.abs(curl_h(*aux.varpi).coeffs))),
        "varpi_mean": float(np.max(np.abs(aux.varpi[0].coeffs[0, 0]))
                            + np.max(np.abs(aux.varpi[1].coeffs[0, 0]))),
        "grid": g.shape,
    }


# ---------------------------------------------------------------------------
# Right-hand sides of the derived equations
# ---------------------------------------------------------------------------


def derived_rhs(state: State, params: Params) -> dict:
    """Time derivatives of ``u, eta, theta, varphi, psi`` implied by the derived
    equations, evaluated at ``state``.  Reduces to the unit-coefficient forms when
    ``nu_h = kappa_z = 1``."""
    v1, v2, T = state.v1, state.v2, state.T
    nu, kap, eps, f0 = params.nu_h, params.kappa_z, params.epsilon, params.f0
    w = compute_w(v1, v2)
    aux = compute_aux_fields(v1, v2, T)
    u1, u2 = aux["u"]
    Phi, eta, theta = aux["Phi"], aux["eta"], aux["theta"]
    varphi, psi = aux["varphi"], aux["psi"]
    divv = div_h(v1, v2)

    def diffuse(f):
        return laplacian_h(f) * nu + dzz(f) * eps

    N1, N2 = momentum_nonlinear(v1, v2, w, f0)

    d_theta = diffuse(theta) - curl_h(N1, N2)

    inner = div_h(multiply(v1, T), multiply(v2, T)) - laplacian_h(T) * eps
    f_bar = compute_f_bar(v1, v2, T, w, eps, f0)
    d_eta = (
        diffuse(eta)
        - div_h(N1, N2)
        + laplacian_h(Phi) * (1.0 - nu)
        + dz(T) * (kap - eps)
        - multiply(w, T)
        - integrate_z_from_bottom(inner)
        + f_bar.lift()
    )

    # (u . grad_H) v - (div_H v) u
    s1 = multiply(u1, dx(v1)) + multiply(u2, dy(v1)) - multiply(divv, u1)
    s2 = multiply(u1, dx(v2)) + multiply(u2, dy(v2)) - multiply(divv, u2)
    k1, k2 = coriolis(f0, u1, u2)
    d_u1 = -(advect(v1, v2, w, u1) - diffuse(u1) + k1 + s1 - dx(T))
    d_u2 = -(advect(v1, v2, w, u2) - diffuse(u2) + k2 + s2 - dy(T))

    # sum_ij d_i v_j d_j u_i and its perpendicular analogue
    grads_v = {("x", 1): dx(v1), ("y", 1): dy(v1), ("x", 2): dx(v2), ("y", 2): dy(v2)}
    grads_u = {("x", 1): dx(u1), ("y", 1): dy(u1), ("x", 2): dx(u2), ("y", 2): dy(u2)}
    axes = ("x", "y")
    cross = None
    cross_perp = None
    for i in (1, 2):
        for j in (1, 2):
            gu = grads_u[(axes[j - 1], i)]
            term = multiply(grads_v[(axes[i - 1], j)], gu)
            # grad_perp = (-d_y, d_x)
            perp = grads_v[("y", j)] * -1.0 if i == 1 else grads_v[("x", j)]
            term_p = multiply(perp, gu)
            cross = term if cross is None else cross + term
            cross_perp = term_p if cross_perp is None else cross_perp + term_p
    wz1, wz2 = dx(w), dy(w)
    grad_w_u = multiply(wz1, dz(u1)) + multiply(wz2, dz(u2))
    perp_w_u = multiply(-wz2, dz(u1)) + multiply(wz1, dz(u2))

    d_varphi = (
        -advect(v1, v2, w, varphi)
        + diffuse(varphi)
        + psi * f0
        - div_h(s1, s2)
        + laplacian_h(T) * (1.0 - nu + eps)
        + dzz(T) * (kap - eps)
        - cross
        - grad_w_u
    )
    d_psi = (
        -advect(v1, v2, w, psi)
        + diffuse(psi)
        - div_h(u1, u2) * f0
        - curl_h(s1, s2)
        - cross_perp
        - perp_w_u
    )
    return {
        "u": (d_u1, d_u2),
        "eta": d_eta,
        "theta": d_theta,
        "varphi": d_varphi,
        "psi": d_psi,
    }


def _aux_for_residuals(state: State) -> dict:
    aux = compute_aux_fields(state.v1, state.v2, state.T)
    return {
        "u": aux["u"],
        "eta": aux["eta"],
        "theta": aux["theta"],
        "varphi": aux["varphi"],
        "psi": aux["psi"],
    }


def compute_residuals(states, params: Params, rtol: float = 1e-6) -> dict:
    """L^2 norm of (centered time difference) - (derived right-hand side at the
    middle state) for each derived equation."""
    if len(states) != 3:
        raise ValueError("need three consecutive states")
    s0, s1, s2 = states
    d1 = s1.t - s0.t
    d2 = s2.t - s1.t
    if d1 <= 0 or abs(d2 - d1) > rtol * abs(d1):
        raise ValueError(f"states are not equally spaced in time ({d1!r}, {d2!r})")
    a0 = _aux_for_residuals(s0)
    a2 = _aux_for_residuals(s2)
    rhs = derived_rhs(s1, params)
    out = {}
    for key in ("u", "eta", "theta", "varphi", "psi"):
        if key == "u":
            r = [(a2["u"][i] - a0["u"][i]) / (2 * d1) - rhs["u"][i] for i in range(2)]
            out[key] = l2(*r)
        else:
            out[key] = l2((a2[key] - a0[key]) / (2 * d1) - rhs[key])
    return out
