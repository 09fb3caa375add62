"""Functional inequalities on random trigonometric polynomials and the
logarithmic Gronwall oracle."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from apes.inequalities import (
    C_BEARING,
    EXPLICIT,
    HOMOGENEOUS,
    N_FIELDS,
    NAMES,
    HypothesisError,
    TrigPoly,
    check_inequality,
    constant_poly,
    empirical_constant,
    gronwall_oracle,
    l2_quadrature,
    random_fields,
    random_gronwall_instance,
    random_trig_poly,
)
from apes.monitors import GronwallInstance
from apes.spectral import Grid, SpectralField3D, l2


def to_spectral(p: TrigPoly, grid: Grid) -> SpectralField3D:
    """Embed ``Re sum c e^{2 pi i k.x} Z_m`` in the modal layout of spectral-core."""
    K = p.K
    c = np.zeros(grid.shape, complex)
    ks = np.arange(-K, K + 1)
    for i, kx in enumerate(ks):
        for j, ky in enumerate(ks):
            a = p.coeffs[i, j]
            b = np.conj(p.coeffs[2 * K - i, 2 * K - j])
            c[kx % grid.nx, ky % grid.ny, : p.M] += 0.5 * (a + b)
    return SpectralField3D(grid, p.parity, c)


class TestTrigPoly:
    def test_sample_single_mode(self):
        c = np.zeros((3, 3, 2), complex)
        c[2, 1, 1] = 1.0  # exp(2 pi i x) cos(pi z)
        v = TrigPoly(c, "even").sample(8, 8)
        x = np.arange(8) / 8
        z = -1 + 2 * np.arange(8) / 8
        expect = np.cos(2 * np.pi * x)[:, None, None] * np.cos(np.pi * z)[None, None, :]
        assert np.allclose(v, np.broadcast_to(expect, v.shape))

    def test_derivative_parity(self, rng):
        p = random_trig_poly(rng, 2, 3, "even")
        assert p.deriv("z").parity == "odd" and p.deriv("z").deriv("z").parity == "even"

    def test_quadrature_matches_parseval(self, rng):
        """Independent implementations of the L^2 norm agree."""
        grid = Grid(16, 16, 8)
        for _ in range(20):
            parity = "odd" if rng.random() < 0.5 else "even"
            p = random_trig_poly(rng, 4, 4, parity)
            assert l2_quadrature(p) == pytest.approx(l2(to_spectral(p, grid)), rel=1e-8)


class TestClosedForms:
    def test_ineqlad_equality(self):
        one = constant_poly(1.0)
        case = check_inequality("ineqlad", [one, one, one])
        assert case.lhs == pytest.approx(4.0) and case.rhs_structural == pytest.approx(4.0)
        assert abs(case.ratio - 1.0) <= 1e-10

    def test_zt4_sine(self):
        c = np.zeros((1, 1, 2), complex)
        c[0, 0, 1] = 1.0
        case = check_inequality("zt4", [TrigPoly(c, "odd")])
        assert case.ratio == pytest.approx(1 / (2 * np.sqrt(3)), rel=1e-12)

    @pytest.mark.parametrize("name", NAMES)
    def test_zero_fields(self, name):
        parity = "odd" if name == "zt4" else "even"
        zero = TrigPoly(np.zeros((3, 3, 3), complex), parity)
        case = check_inequality(name, [zero] * N_FIELDS.get(name, 1))
        assert case.lhs == 0.0

    def test_bad_input(self, rng):
        p = random_trig_poly(rng)
        with pytest.raises(ValueError):
            check_inequality("nope", [p])
        with pytest.raises(ValueError):
            check_inequality("lad", [p])
        with pytest.raises(HypothesisError):
            check_inequality("zt4", [random_trig_poly(rng, parity="even")])


class TestEnsembles:
    @pytest.mark.parametrize("name", sorted(EXPLICIT))
    def test_explicit_constants_hold(self, name):
        out = empirical_constant(name, seed=3, count=100)
        assert out["max_ratio"] <= 1 + 1e-6

    @pytest.mark.parametrize("name", C_BEARING)
    def test_c_bearing_finite(self, name):
        out = empirical_constant(name, seed=1, count=20)
        assert np.isfinite(out["max_ratio"]) and out["max_ratio"] > 0
        assert out["histogram"].sum() == 20

    def test_deterministic(self):
        a = empirical_constant("lem2_3_a", seed=5, count=1)
        b = empirical_constant("lem2_3_a", seed=5, count=1)
        assert a["max_ratio"] == b["max_ratio"]

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), lam=st.floats(0.01, 100), name=st.sampled_from(HOMOGENEOUS))
    def test_scale_invariance(self, seed, lam, name):
        rng = np.random.default_rng(seed)
        fields = random_fields(name, rng, K=2, M=3)
        base = check_inequality(name, fields).ratio
        scaled = check_inequality(name, [f.scaled(lam) for f in fields]).ratio
        assert scaled == pytest.approx(base, rel=1e-9)


class TestGronwallOracle:
    def test_closed_form(self):
        t = np.linspace(0, 5, 501)
        inst = GronwallInstance(A0=0.0, times=t, ell=1.0, m=0, n=0, f=0, K=1, alpha=1)
        res = gronwall_oracle(inst)
        assert np.allclose(res["A"], np.e * (np.exp(res["times"]) - 1), rtol=1e-7, atol=1e-9)
        assert np.allclose(res["Q"], 1 + 2 * res["times"], rtol=1e-12)
        assert res["holds"]

    def test_zero_instance(self):
        inst = GronwallInstance(A0=2.0, times=np.linspace(0, 1, 11), ell=0, m=0, n=0, f=0, K=1, alpha=1)
        res = gronwall_oracle(inst)
        assert np.allclose(res["A"], 2.0) and res["holds"]

    def test_random_instances_hold(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            inst, beta = random_gronwall_instance(rng)
            res = gronwall_oracle(inst, B=lambda t, A, b=beta: b * A)
            assert res["holds"] and np.isfinite(res["bound"]).all()
            assert res["margin"] > 0

    def test_hypothesis_violation_rejected(self):
        t = np.linspace(0, 1, 5)
        inst = GronwallInstance(A0=0.0, times=t, ell=0, m=0, n=50.0, f=0, K=0.5, alpha=0.5)
        with pytest.raises(HypothesisError):
            gronwall_oracle(inst)
