import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from mlsilab import conjugate as cj
from mlsilab import functions
from mlsilab.conjugate import (GridFunction1D, conjugate_at, conjugate_batch, expansion_order,
                               grad_inverse, llt_1d, mlsi_bracket, mlsi_integrand_at,
                               sup_convolution)
from mlsilab.errors import ConvergenceError, FitError
from mlsilab.potential import custom, gaussian, power, quartic, sextic

POTS = [gaussian(), power(3), power(4), quartic(), sextic(), gaussian(2), power(4, dim=2)]


def brute_conjugate(pot, y, lo=-10.0, hi=10.0, h=1e-4):
    z = np.arange(lo, hi + h / 2, h)
    return float(np.max(y * z - pot.value(z[:, None])))


def test_conjugate_examples():
    assert conjugate_at(gaussian(), 3.0).value == 4.5
    # |x|^3/3 has conjugate |y|^{3/2}/(3/2)
    assert conjugate_at(power(3), 4.0).value == pytest.approx(16.0 / 3.0, rel=1e-14)
    res = conjugate_at(quartic(), 4.0 / 3.0)
    assert res.argmax[0] == pytest.approx(1.0, abs=1e-12)
    assert res.value == pytest.approx(0.75, abs=1e-12)
    assert res.value == pytest.approx(brute_conjugate(quartic(), 4.0 / 3.0), abs=1e-8)


def test_gaussian_shift_in_closed_form():
    assert conjugate_at(gaussian(shift=0.4), 2.0).value == pytest.approx(1.6, abs=1e-15)


def test_closed_form_matches_newton():
    rng = np.random.default_rng(5)
    for pot in [gaussian(), power(3), power(4), gaussian(2), power(4, dim=2)]:
        Y = rng.uniform(-3, 3, size=(50, pot.dim))
        a, _ = conjugate_batch(pot, Y, closed_form=True)
        b, _ = conjugate_batch(pot, Y, closed_form=False)
        assert np.allclose(a, b, rtol=1e-10, atol=1e-12)


def test_result_invariants():
    for pot in POTS:
        y = np.linspace(-2, 3, pot.dim)
        r = conjugate_at(pot, y, closed_form=False)
        assert r.residual <= 1e-10 * (1 + np.linalg.norm(y))
        assert r.value == y @ r.argmax - pot.value(r.argmax[None, :])[0]


def test_grad_inverse_examples():
    assert grad_inverse(gaussian(), 0.7) == pytest.approx(0.7, abs=1e-15)
    assert grad_inverse(quartic(), 4.0 / 3.0) == pytest.approx(1.0, abs=1e-12)
    assert grad_inverse(power(3), 4.0) == pytest.approx(2.0, abs=1e-12)


def test_grad_inverse_errors():
    with pytest.raises(ValueError):
        grad_inverse(gaussian(), [1.0, 2.0])
    # gradient of sqrt(1 + x^2) never reaches 2
    soft = custom(lambda X: np.sqrt(1 + X[:, 0] ** 2),
                  lambda X: (X[:, 0] / np.sqrt(1 + X[:, 0] ** 2))[:, None],
                  lambda X: ((1 + X[:, 0] ** 2) ** -1.5)[:, None, None])
    with pytest.raises(ConvergenceError):
        grad_inverse(soft, 2.0)


@pytest.mark.parametrize("pot", POTS, ids=lambda p: f"{p.name}-{p.dim}")
def test_young_inequality_random(pot):
    rng = np.random.default_rng(11)
    X = rng.uniform(-4, 4, size=(1000, pot.dim))
    Y = rng.uniform(-4, 4, size=(1000, pot.dim))
    phis, _ = conjugate_batch(pot, Y)
    assert np.all(np.sum(X * Y, axis=1) <= pot.value(X) + phis + 1e-9)
    G = pot.grad(X)
    at_grad, _ = conjugate_batch(pot, G, closed_form=False)
    gap = pot.value(X) + at_grad - np.sum(X * G, axis=1)
    assert np.all(np.abs(gap) <= 1e-8 * (1 + np.abs(pot.value(X))))


@pytest.mark.parametrize("pot", POTS, ids=lambda p: f"{p.name}-{p.dim}")
def test_gradient_inverse_identity(pot):
    X = np.random.default_rng(2).uniform(-5, 5, size=(300, pot.dim))
    Z = cj.grad_inverse_batch(pot, pot.grad(X))
    err = np.linalg.norm(Z - X, axis=1)
    assert np.all(err <= 1e-8 * (1 + np.linalg.norm(X, axis=1)))


@given(st.floats(-6, 6), st.floats(-6, 6))
def test_young_property_quartic(x, y):
    pot = quartic()
    assert x * y <= pot.value([x])[0] + conjugate_at(pot, y).value + 1e-9


@given(st.floats(-6, 6))
def test_conjugate_of_gradient_identity(x):
    pot = sextic()
    gx = pot.grad([x])[0]
    lhs = conjugate_at(pot, gx).value
    rhs = x * gx[0] - pot.value([x])[0]
    assert abs(lhs - rhs) <= 1e-9 * (1 + abs(pot.value([x])[0]))


@given(arrays(float, 2, elements=st.floats(-5, 5)), arrays(float, 2, elements=st.floats(-5, 5)))
def test_bracket_nonnegative(x, v):
    for pot in (quartic(), power(4)):
        assert mlsi_bracket(pot, x[:1], v[:1])[0] >= -1e-9
    assert mlsi_bracket(power(4, dim=2), x, v)[0] >= -1e-9


# ---------------------------------------------------------------------------
# discrete transform


def brute_llt(f, y):
    fin = np.isfinite(f.values)
    return np.max(y[:, None] * f.x[fin][None, :] - f.values[fin][None, :], axis=1)


def test_llt_quadratic_bound():
    f = GridFunction1D.sample(lambda x: x**2 / 2, -4, 4, 401)
    g = llt_1d(f, (-3, 3, 301))
    bound = f.h * np.abs(g.x) + f.h**2 / 2
    assert np.all(np.abs(g.values - g.x**2 / 2) <= bound + 1e-15)
    assert np.array_equal(g.values, brute_llt(f, g.x))


def test_llt_abs():
    f = GridFunction1D.sample(np.abs, -1, 1, 201)
    g = llt_1d(f, (-1, 1, 41))
    assert np.allclose(g.values, 0.0, atol=1e-15)


def test_llt_single_point():
    v = np.full(11, np.inf)
    v[4] = 2.5
    f = GridFunction1D(0.0, 1.0, v)
    g = llt_1d(f, (-2, 2, 9))
    assert np.allclose(g.values, g.x * 0.4 - 2.5, atol=1e-15)


def test_grid_function_validation():
    with pytest.raises(ValueError):
        GridFunction1D(0.0, 1.0, [np.inf, np.inf])
    with pytest.raises(ValueError):
        GridFunction1D(0.0, 1.0, [1.0])
    with pytest.raises(ValueError):
        GridFunction1D(1.0, 0.0, [1.0, 2.0])
    with pytest.raises(ValueError):
        GridFunction1D(0.0, 1.0, [1.0, np.nan])


@given(arrays(float, st.integers(2, 60), elements=st.floats(-100, 100)),
       st.floats(-50, 50), st.floats(0.1, 20))
def test_llt_matches_brute_force(vals, lo, width):
    f = GridFunction1D(lo, lo + width, vals)
    dual = (-30.0, 30.0, 97)
    g = llt_1d(f, dual)
    ref = brute_llt(f, g.x)
    assert np.allclose(g.values, ref, rtol=1e-12, atol=1e-9)


def _random_convex(rng, n=201):
    # positive combination of convex pieces, sampled on [-2, 2]
    a, b, c, d = rng.uniform(0.1, 2.0, 4)
    s = rng.uniform(-1, 1)
    return lambda x: a * x**2 + b * np.abs(x - s) + c * np.exp(0.5 * x) + d * x**4 / 10


def test_biconjugation_fixed_point():
    rng = np.random.default_rng(8)
    for _ in range(20):
        f = GridFunction1D.sample(_random_convex(rng), -2, 2, 201)
        slope = np.abs(np.diff(f.values) / f.h).max()
        dual = (-slope - 1, slope + 1, 801)
        ff = llt_1d(llt_1d(f, dual), f)
        interior = slice(1, -1)
        bound = 2 * f.h * slope + f.h**2
        assert np.all(np.abs(ff.values[interior] - f.values[interior]) <= bound)


@given(arrays(float, st.integers(2, 40), elements=st.floats(-1e6, 1e6)), st.floats(-10, 10))
def test_grid_csv_roundtrip(vals, lo):
    vals = vals.copy()
    vals[0] = np.inf if vals.size > 2 else vals[0]
    f = GridFunction1D(lo, lo + 3.0, vals)
    g = GridFunction1D.from_csv(f.to_csv())
    assert g.lo == f.lo and g.hi == f.hi
    assert np.array_equal(g.values, f.values)


def test_grid_csv_rejects_bad_input(tmp_path):
    with pytest.raises(ValueError):
        GridFunction1D.from_csv("a,b\n0,1\n1,2\n")
    with pytest.raises(ValueError):
        GridFunction1D.from_csv("x,value\n0,1\n1,2\n3,4\n")
    p = tmp_path / "f.csv"
    GridFunction1D.sample(np.exp, 0, 1, 5).to_csv(p)
    assert GridFunction1D.from_csv(str(p)).count == 5


# ---------------------------------------------------------------------------
# sup-convolution


def brute_supconv(g, pot, s, z, lo=-10.0, hi=10.0):
    """Nested grid maximization of the defining sup over z = t x + s y."""
    t = 1 - s

    def J(y):
        x = z / t - (s / t) * y
        return (g.value(x[:, None]) - t * pot.value(x[:, None]) - s * pot.value(y[:, None])
                + pot.value(np.array([[z]]))[0])

    y = np.arange(lo, hi, 1e-3)
    c = y[np.argmax(J(y))]
    y = np.arange(c - 2e-3, c + 2e-3, 1e-5)
    return float(J(y).max())


def test_supconv_zero_function():
    zero = functions.constant(0.0)
    for pot in (gaussian(), quartic(), power(4)):
        for z in (-1.3, 0.0, 0.4, 2.0):
            for s in (0.01, 0.2, 0.45):
                assert sup_convolution(zero, pot, s, z) == pytest.approx(0.0, abs=1e-12)


def test_supconv_gaussian_bump_oracle():
    g = functions.bump(0.1, 0.0, 1.0 / np.sqrt(2))  # 0.1 exp(-x^2)
    val = sup_convolution(g, gaussian(), 0.01, 0.5)
    assert val == pytest.approx(brute_supconv(g, gaussian(), 0.01, 0.5), abs=1e-7)


@given(st.floats(-3, 3), st.floats(0.001, 0.4), st.floats(-0.5, 0.5))
def test_supconv_lower_bound(z, s, amp):
    g = functions.bump(amp, 0.3, 0.8)
    val = sup_convolution(g, quartic(), s, z)
    assert np.isfinite(val)
    assert val >= g.value([z])[0] - 1e-12


def test_supconv_fallback_reports():
    g = functions.bump(0.3, 0.0, 1.0)
    info = sup_convolution(g, quartic(), 0.1, 0.5, return_info=True, max_iter=0)
    assert not info.newton_converged
    ref = sup_convolution(g, quartic(), 0.1, 0.5)
    assert info.value == pytest.approx(ref, abs=1e-10)


def test_supconv_rejects_s():
    g = functions.constant(0.0)
    for s in (0.0, 0.5, -0.1):
        with pytest.raises(ValueError):
            sup_convolution(g, gaussian(), s, 0.0)


def test_expansion_zero_function():
    fit = expansion_order(functions.constant(0.0), gaussian(), 0.3)
    assert fit.slope == pytest.approx(0.0, abs=1e-12)


def test_expansion_gaussian_bump():
    g = functions.bump(0.1, 0.0, 1.0 / np.sqrt(2))
    fit = expansion_order(g, gaussian(), 0.5)
    # for the Gaussian the bracket is |g'(z)|^2 / 2
    gp = g.grad([0.5])[0, 0]
    assert fit.integrand == pytest.approx(gp**2 / 2, rel=1e-12)
    assert fit.integrand == pytest.approx(mlsi_integrand_at(g, gaussian(), 0.5), rel=1e-14)
    assert fit.relative_gap <= 1e-4
    assert fit.kappa >= 0.9


def test_expansion_non_monotone(monkeypatch):
    vals = iter([0.3, 0.1, 0.4, 0.2, 0.5])
    monkeypatch.setattr(cj, "sup_convolution", lambda *a, **k: next(vals))
    with pytest.raises(FitError):
        expansion_order(functions.constant(0.0), gaussian(), 0.0)


def test_expansion_ladder_validation():
    with pytest.raises(ValueError):
        expansion_order(functions.constant(0.0), gaussian(), 0.0, (0.01, 0.02, 0.005))
