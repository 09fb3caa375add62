"""Cross-checks: spatial identity of the eta/theta equations, half versus full
column runs, continuous dependence on initial data and the epsilon sweep."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .diagnostics import compute_aux_fields, compute_phi, compute_w, derived_rhs, solve_surface_pressure
from .dynamics import Integrator, map_half_full, rhs
from .halfdomain import HalfDomainModel
from .monitors import fit_growth_rate
from .spectral import HorizontalField, curl_h, div_h, l2, l2_sq
from .state import Params, State, _random_field, make_initial_data, project_barotropic


@dataclass
class TwinRunReport:
    times: np.ndarray
    delta_l2: np.ndarray
    growth_exponent: float
    sup_exponent: float
    delta0: float
    base_l2: np.ndarray = field(repr=False, default=None)
    perturbed_l2: np.ndarray = field(repr=False, default=None)

    def to_json(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, np.ndarray):
                d[k] = v.tolist()
        return d


def random_perturbation(params: Params, seed: int) -> State:
    """Admissible perturbation direction with unit ``||(v, T)||_2``."""
    g = params.grid
    rng = np.random.default_rng(seed)
    v1 = _random_field(g, "even", rng, params.spectrum_slope)
    v2 = _random_field(g, "even", rng, params.spectrum_slope)
    T = _random_field(g, "odd", rng, params.spectrum_slope)
    v1, v2 = project_barotropic(v1, v2)
    n = l2(v1, v2, T)
    return State(v1 / n, v2 / n, T / n)


def _add(a: State, b: State, s: float) -> State:
    return State(a.v1 + b.v1 * s, a.v2 + b.v2 * s, a.T + b.T * s, a.t, a.step)


def _diff_sq(a: State, b: State) -> float:
    return l2_sq(a.v1 - b.v1, a.v2 - b.v2, a.T - b.T)


def _trajectory(params: Params, state: State, stride: int):
    integ = Integrator(params, state)
    out = [state]
    for _ in range(params.n_steps):
        s = integ.step()
        if s.step % stride == 0:
            out.append(s)
    return out


def fit_exponent(times, delta) -> float:
    """Least-squares rate c in ``delta(t) ~ delta(0) exp(c t)`` (line through the origin)."""
    times = np.asarray(times, dtype=float)
    delta = np.asarray(delta, dtype=float)
    y = np.log(delta / delta[0])
    denom = float(np.dot(times, times))
    return float(np.dot(times, y) / denom) if denom > 0 else 0.0


def continuous_dependence_experiment(
    params: Params,
    delta: float,
    horizon: float | None = None,
    *,
    base: State | None = None,
    perturbation: State | None = None,
    record_stride: int | None = None,
) -> TwinRunReport:
    """Run from ``(v0, T0)`` and ``(v0, T0) + delta (v~, T~)`` and track the squared
    L^2 distance.  The perturbation direction has unit norm, so
    ``delta_l2(0) = delta**2``."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if horizon is not None:
        params = params.replace(t_final=horizon)
    stride = record_stride or params.monitor_stride
    base = make_initial_data(params) if base is None else base
    pert = random_perturbation(params, params.seed + 1) if perturbation is None else perturbation
    other = _add(base, pert, delta)
    ta = _trajectory(params, base, stride)
    tb = ta if delta == 0 else _trajectory(params, other, stride)
    times = np.array([s.t for s in ta])
    dl2 = np.array([_diff_sq(a, b) for a, b in zip(ta, tb)])
    if delta == 0:
        growth = sup = 0.0
    else:
        growth = fit_exponent(times, dl2)
        sup = fit_growth_rate(times, dl2)
    return TwinRunReport(
        times=times,
        delta_l2=dl2,
        growth_exponent=growth,
        sup_exponent=sup,
        delta0=float(dl2[0]),
        base_l2=np.array([l2_sq(*s.fields()) for s in ta]),
        perturbed_l2=np.array([l2_sq(*s.fields()) for s in tb]),
    )


def appendix_a_check(state: State, params: Params, ps_gauge: float = 0.0) -> dict:
    """Spatial form of the eta and theta equations.

    The time derivatives of eta and theta are obtained by applying the
    defining operators to the prognostic tendency, then compared with the
    right-hand sides of their own evolution equations.  Returns absolute and
    relative L^2 residuals for both, plus u, varphi and psi.
    """
    g = state.grid
    p_s = solve_surface_pressure(state.v1, state.v2, state.T, params.f0)
    if ps_gauge:
        c = p_s.coeffs.copy()
        c[0, 0] += ps_gauge
        p_s = HorizontalField(g, c)
    tend = rhs(state, params, p_s=p_s)
    chain = compute_aux_fields(tend.dv1, tend.dv2, tend.dT)
    d_eta = div_h(tend.dv1, tend.dv2) + compute_phi(tend.dT)
    d_theta = curl_h(tend.dv1, tend.dv2)
    target = derived_rhs(state, params)
    out = {}

    def put(name, lhs_fields, rhs_fields):
        res = l2(*[a - b for a, b in zip(lhs_fields, rhs_fields)])
        scale = l2(*rhs_fields)
        out[name] = res
        out[name + "_rel"] = res / scale if scale > 0 else res

    put("eta", [d_eta], [target["eta"]])
    put("theta", [d_theta], [target["theta"]])
    put("u", list(chain["u"]), list(target["u"]))
    put("varphi", [chain["varphi"]], [target["varphi"]])
    put("psi", [chain["psi"]], [target["psi"]])
    return out


def halfdomain_equivalence(params: Params, n_steps: int = 100, state: State | None = None) -> dict:
    """Evolve the symmetric full-column model and the half-column model from
    matched data and report the max discrepancy of the restricted fields."""
    state = make_initial_data(params) if state is None else state
    full0 = {"v1": state.v1.values(), "v2": state.v2.values(), "T": state.T.values()}
    half0 = map_half_full(full0, "restrict")
    hm = HalfDomainModel(params)
    hm.set_state(half0["v1"], half0["v2"], half0["T"])
    integ = Integrator(params, state)
    worst = 0.0
    history = []
    for _ in range(n_steps):
        s = integ.step()
        hm.step()
        w = compute_w(s.v1, s.v2)
        restricted = map_half_full(
            {"v1": s.v1.values(), "v2": s.v2.values(), "T": s.T.values(), "w": w.values()}, "restrict"
        )
        hv = hm.values()
        err = max(float(np.max(np.abs(restricted[k] - hv[k]))) for k in ("v1", "v2", "T", "w"))
        history.append(err)
        worst = max(worst, err)
    scale = max(float(np.max(np.abs(v))) for v in hm.values().values())
    return {"max_discrepancy": worst, "history": np.array(history), "field_scale": scale,
            "steps": n_steps}


def epsilon_sweep(params: Params, epsilons=(1e-1, 1e-2, 1e-3), t_final: float = 0.2,
                  state: State | None = None) -> dict:
    """Distance at ``t_final`` between runs with each epsilon and the epsilon = 0 run."""
    params = params.replace(t_final=t_final)
    state = make_initial_data(params) if state is None else state

    def final(eps):
        integ = Integrator(params.replace(epsilon=eps), state)
        for _ in range(params.n_steps):
            integ.step()
        return integ.state

    ref = final(0.0)
    dist = {}
    for eps in epsilons:
        s = final(eps)
        dist[eps] = float(np.sqrt(_diff_sq(s, ref)))
    ordered = sorted(dist)
    monotone = all(dist[a] < dist[b] for a, b in zip(ordered[:-1], ordered[1:]))
    return {"distance": dist, "monotone": monotone}


def residual_convergence(params: Params, t_eval: float, dts, state: State | None = None) -> dict:
    """Derived-equation residuals at ``t_eval`` for each time step in ``dts``.

    Each run starts from the same data and keeps the three states
    ``t_eval - dt, t_eval, t_eval + dt`` for the centered difference.
    """
    from .diagnostics import compute_residuals

    state = make_initial_data(params) if state is None else state
    out = {}
    for dt in dts:
        p = params.replace(dt=dt)
        n_mid = int(round(t_eval / dt))
        if abs(n_mid * dt - t_eval) > 1e-9 * max(t_eval, dt) or n_mid < 1:
            raise ValueError(f"t_eval = {t_eval} is not a positive multiple of dt = {dt}")
        integ = Integrator(p, state)
        keep = []
        for _ in range(n_mid + 1):
            s = integ.step()
            if s.step >= n_mid - 1:
                keep.append(s)
        if n_mid == 1:
            keep = [state] + keep
        out[dt] = compute_residuals(keep[-3:], p)
    ordered = sorted(out, reverse=True)
    ratios = {}
    for a, b in zip(ordered[:-1], ordered[1:]):
        ratios[(a, b)] = {k: out[a][k] / out[b][k] if out[b][k] > 0 else np.inf for k in out[a]}
    return {"residuals": out, "ratios": ratios}
