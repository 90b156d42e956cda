import numpy as np
import pytest
from scipy import stats

from mlsilab import concentration as conc
from mlsilab.errors import PreconditionError
from mlsilab.inequality import extract_hphi
from mlsilab.potential import gaussian, quartic


@pytest.fixture(scope="module")
def quartic_bound():
    return conc.calibrate_constants(extract_hphi(quartic()), 4.0)


def test_bound_at_zero(quartic_bound):
    assert quartic_bound(0.0, 5)[0] == 2.0
    assert conc.gross_bound(1.0)(0.0, 10)[0] == 2.0


def test_regime_switch(quartic_bound):
    b = quartic_bound
    n = 3
    edge = n * b.C3
    lam = np.array([edge * (1 - 1e-9), edge, edge * (1 + 1e-9)])
    assert list(b.regime(lam, n)) == ["quadratic", "quadratic", "potential"]
    vals = b(lam, n)
    quad = 2 * np.exp(-b.C1 * lam**2 / n)
    assert vals[0] == quad[0] and vals[1] == quad[1]
    pot = 2 * np.exp(-n * b.C1 * b.Phi.value(b.C2 * lam[2:] / n))
    assert vals[2] == pot[0]
    # continuity at the switch: Phi(C2 C3) = C3^2
    assert vals[2] == pytest.approx(vals[1], rel=1e-6)


def test_quartic_calibration_regression(quartic_bound):
    b = quartic_bound
    assert b.C1 == 0.125
    assert b.C2 == pytest.approx(1 / 3, rel=1e-15)
    # frozen after the first calibration run
    assert b.C3 == pytest.approx(30.2985, abs=1e-4)
    assert b.meta["min_slack"] >= -1e-12


def test_calibration_errors():
    prof = extract_hphi(quartic())
    with pytest.raises(PreconditionError):
        conc.calibrate_constants(prof, None)
    with pytest.raises(PreconditionError, match="hess_unbounded"):
        conc.calibrate_constants(extract_hphi(gaussian()), 4.0)


def test_herbst_kappa_star_dominates(quartic_bound):
    herbst = conc.HerbstTransform(extract_hphi(quartic()))
    u, ks = herbst.kappa_star(10.0)
    assert np.all(ks >= quartic_bound.C1 * u**2 - 1e-12)
    # small u: kappa* ~ lam u^2 / 2
    assert ks[1] == pytest.approx(u[1] ** 2 / 2, rel=1e-2)


def test_wilson_upper():
    assert conc.wilson_upper(0, 100) > 0
    assert conc.wilson_upper(100, 100) == 1.0
    ref = stats.binomtest(30, 1000).proportion_ci(0.95, method="wilson").high
    assert conc.wilson_upper(30, 1000) == pytest.approx(ref, rel=1e-12)


def test_lipschitz_check():
    conc.check_coordinate_lipschitz(conc.sum_statistic, 5)
    conc.check_coordinate_lipschitz(conc.smooth_max(0.3), 5)
    with pytest.raises(PreconditionError):
        conc.check_coordinate_lipschitz(lambda X: 2 * X.sum(axis=1), 3)


def test_gaussian_tail_against_exact(gauss_measure):
    b = conc.gross_bound(1.0)
    res = conc.run_concentration(gauss_measure, conc.sum_statistic, 10, b, [6.0], 100_000, seed=0)
    p = 2 * stats.norm.sf(6 / np.sqrt(10))
    se = np.sqrt(p * (1 - p) / 100_000)
    assert abs(res.empirical[0] - p) <= 3 * se
    assert res.holds


def test_quartic_concentration_holds(quartic_measure, quartic_bound):
    for n in (5, 10):
        res = conc.run_concentration(quartic_measure, conc.sum_statistic, n, quartic_bound,
                                     samples=20_000, seed=1)
        assert res.holds
        assert res.meta["C1"] == quartic_bound.C1


def test_concentration_deterministic(gauss_measure):
    b = conc.gross_bound(1.0)
    a = conc.run_concentration(gauss_measure, conc.sum_statistic, 4, b, samples=10_000, seed=9)
    c = conc.run_concentration(gauss_measure, conc.sum_statistic, 4, b, samples=10_000, seed=9)
    assert a.to_csv() == c.to_csv()


def test_concentration_sample_floor(gauss_measure):
    with pytest.raises(ValueError):
        conc.run_concentration(gauss_measure, conc.sum_statistic, 2, conc.gross_bound(1.0),
                               samples=100)


def test_lambda_grid_floor(quartic_bound):
    grid = conc.default_lambda_grid(quartic_bound, 5)
    assert grid[0] == 0.0
    assert quartic_bound(grid[-1], 5)[0] >= 1e-3
