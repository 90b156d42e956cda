import numpy as np
import pytest
from hypothesis import given, strategies as st

from mlsilab import functions
from mlsilab.errors import PreconditionError
from mlsilab.potential import (analyze_regularity, check_convex_superlinear, custom, evaluate,
                               from_spec, gaussian, oscillation, perturbed, polynomial, power,
                               probe_points, quartic, sextic)

BUILTINS = [gaussian(), gaussian(2), power(4), power(3), power(4, dim=2), quartic(), sextic(),
            perturbed(gaussian(), amplitude=0.1)]


def test_evaluate_examples():
    assert evaluate(gaussian(), 2.0) == 2.0
    assert evaluate(gaussian(shift=0.3), 2.0) == pytest.approx(2.3, abs=1e-15)
    assert evaluate(power(4), 2.0, "grad") == 8.0
    assert evaluate(quartic(), 0.0, "hess") == 1.0


def test_evaluate_errors():
    with pytest.raises(ValueError):
        evaluate(gaussian(), [1.0, 2.0])
    with pytest.raises(ValueError):
        evaluate(gaussian(), np.nan)
    with pytest.raises(ValueError):
        evaluate(gaussian(), 1.0, "third")


def test_from_spec_roundtrip():
    for pot in [gaussian(), gaussian(3, shift=1.5), power(4), quartic(),
                perturbed(gaussian(), amplitude=0.2)]:
        again = from_spec(pot.to_spec())
        X = np.random.default_rng(0).normal(size=(20, pot.dim))
        assert np.allclose(again.value(X), pot.value(X), rtol=0, atol=1e-14)
    with pytest.raises(ValueError):
        from_spec({"kind": "power"})
    with pytest.raises(ValueError):
        from_spec({"kind": "cubic"})


@pytest.mark.parametrize("pot", BUILTINS, ids=lambda p: f"{p.name}-{p.dim}")
def test_finite_difference_consistency(pot):
    rng = np.random.default_rng(7)
    X = rng.uniform(-3, 3, size=(100, pot.dim))
    h = 1e-5
    for i in range(pot.dim):
        e = np.zeros(pot.dim)
        e[i] = h
        fd = (pot.value(X + e) - pot.value(X - e)) / (2 * h)
        g = pot.grad(X)[:, i]
        assert np.all(np.abs(fd - g) <= 1e-6 * (1 + np.abs(g)))
        fdh = (pot.grad(X + e) - pot.grad(X - e)) / (2 * h)
        H = pot.hess(X)[:, :, i]
        assert np.all(np.abs(fdh - H) <= 1e-4 * (1 + np.abs(H)))


@pytest.mark.parametrize("pot", BUILTINS, ids=lambda p: f"{p.name}-{p.dim}")
def test_hessian_floor_and_symmetry(pot):
    prof = analyze_regularity(pot, integrability=False)
    # a perturbed potential is profiled through its base
    pot = pot.base if pot.kind == "perturbed" else pot
    X = probe_points(pot.dim, 20.0, 401)
    H = pot.hess(X)
    assert np.allclose(H, np.swapaxes(H, 1, 2))
    assert np.linalg.eigvalsh(H)[:, 0].min() >= prof.lam - 1e-9
    if prof.is_even:
        f = pot.value(X)
        assert np.all(np.abs(f - pot.value(-X)) <= 1e-12 * (1 + np.abs(f)))


def test_regularity_gaussian():
    prof = analyze_regularity(gaussian())
    assert prof.lam == pytest.approx(1.0, abs=1e-12)
    assert prof.is_even and not prof.hess_unbounded
    assert prof.growth_A is None or prof.growth_A <= 2.0
    assert prof.homogeneity_q == pytest.approx(2.0)


def test_regularity_power4():
    prof = analyze_regularity(power(4))
    assert prof.lam == 0.0
    assert prof.homogeneity_q == pytest.approx(4.0)


def test_regularity_quartic():
    prof = analyze_regularity(quartic())
    assert prof.lam == pytest.approx(1.0, abs=1e-12)
    assert prof.hess_unbounded and prof.is_even
    assert prof.growth_A == 3.0
    # 3 phi(x) <= x phi'(x)  <=>  x^2 >= 6
    assert prof.C_A == pytest.approx(np.sqrt(6.0), rel=1e-9)
    assert prof.homogeneity_q is None
    assert prof.growth_B == 4.0


def test_regularity_profile_invariants():
    for pot in BUILTINS:
        prof = analyze_regularity(pot, integrability=False)
        if prof.growth_A is not None:
            assert prof.growth_A > 1 and prof.C_A > 0
        q = prof.homogeneity_q
        # shape constants of a perturbed potential describe its base
        pot = pot.base if pot.kind == "perturbed" else pot
        if q is not None:
            X = np.linspace(-5, 5, 41)[:, None] * np.ones((1, pot.dim))
            c = pot.centered()
            assert np.all(np.abs(c.value(2 * X) - 2**q * c.value(X))
                          <= 1e-9 * np.abs(c.value(2 * X)) + 1e-12)


def test_regularity_rejects_nonconvex():
    bad = polynomial([0.0, 0.0, -0.5, 0.0, 0.1])
    with pytest.raises(PreconditionError) as exc:
        analyze_regularity(bad, integrability=False)
    assert exc.value.witness is not None


def test_regularity_rejects_linear_growth():
    # strictly convex but only linear at infinity: sqrt(1 + x^2)
    soft = custom(lambda X: np.sqrt(1 + X[:, 0] ** 2),
                  lambda X: (X[:, 0] / np.sqrt(1 + X[:, 0] ** 2))[:, None],
                  lambda X: ((1 + X[:, 0] ** 2) ** -1.5)[:, None, None], name="soft")
    with pytest.raises(PreconditionError):
        check_convex_superlinear(soft)


def test_regularity_probe_count_floor():
    with pytest.raises(ValueError):
        analyze_regularity(gaussian(), probe_count=8)


def test_perturbed_oscillation():
    pot = perturbed(gaussian(), amplitude=0.1)
    prof = analyze_regularity(pot, integrability=False)
    assert prof.osc_U == pytest.approx(0.2, abs=1e-6)
    assert prof.osc_U >= 0
    with pytest.raises(PreconditionError):
        oscillation(functions.linear([1.0]), 1, 20.0)


def test_integrability_flag_quartic():
    prof = analyze_regularity(quartic())
    assert prof.integrability_flag is True
    assert set(prof.integrability_values) == {1.0, 5.0, 10.0}


@given(st.floats(-30, 30), st.floats(0.1, 4))
def test_power_homogeneity_property(x, t):
    pot = power(4)
    assert pot.value([t * x])[0] == pytest.approx(t**4 * pot.value([x])[0], rel=1e-12, abs=1e-300)
