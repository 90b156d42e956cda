"""Acceptance criteria 1-12, each at its stated tolerance and runtime limit.

Every criterion prints one PASS/FAIL line. Run standalone with
``python tests/test_acceptance.py`` for the summary alone.
"""
import sys
import time
import traceback

import numpy as np
import pytest
from scipy import stats

from mlsilab import concentration as conc
from mlsilab import functions
from mlsilab import inequality as ineq
from mlsilab.conjugate import (GridFunction1D, conjugate_batch, expansion_order, grad_inverse_batch,
                               llt_1d)
from mlsilab.measure import build_measure
from mlsilab.potential import gaussian, power, quartic, sextic
from mlsilab.suite import ConcentrationSpec, ExperimentConfig, FunctionSuite, emit_report, run_suite
from mlsilab.transport import (bregman_cost, discrete_ot_cost, make_instance,
                               monotone_coupling_cost, verify_transport, wasserstein_bregman_1d)

SUITE_VERIFIERS = ("mlsi", "brascamp_lieb", "power_lsi", "hphi", "perturbed", "nontight")
SUITE_POTENTIALS = ({"kind": "gaussian"}, {"kind": "power", "p": 4}, {"kind": "quartic"})


def _say(line):
    print(line, flush=True)


def run_criterion(num, title, limit, fn):
    t0 = time.perf_counter()
    try:
        fn()
    except Exception as exc:
        dt = time.perf_counter() - t0
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        _say(f"criterion {num:2d} FAIL ({dt:6.2f}s, limit {limit:g}s) {title}: {msg[:160]}")
        raise
    dt = time.perf_counter() - t0
    if dt > limit:
        _say(f"criterion {num:2d} FAIL ({dt:6.2f}s, limit {limit:g}s) {title}: over time")
        raise AssertionError(f"criterion {num} took {dt:.2f}s > {limit}s")
    _say(f"criterion {num:2d} PASS ({dt:6.2f}s, limit {limit:g}s) {title}")


# ---------------------------------------------------------------------------


def c1_gross_reduction():
    rng = np.random.default_rng(0)
    x, v = rng.uniform(-5, 5, size=(2, 10_000, 1))
    vals = ineq.gaussian_bracket_identity(x, v, atol=np.inf)
    err = np.abs(vals - 0.5 * v[:, 0] ** 2)
    assert err.max() <= 1e-12, f"max |bracket - v^2/2| = {err.max():.3e}"


def c2_equality_cases():
    m = build_measure(gaussian())
    for th in (0.5, 1.0, 1.5):
        r = ineq.verify_mlsi(m, functions.linear([th]))
        exact = th**2 / 2 * np.exp(th**2 / 2)
        assert abs(r.lhs - r.rhs) <= 1e-6 * r.rhs, f"theta={th}: |lhs-rhs|={abs(r.lhs - r.rhs):.3e}"
        assert abs(r.lhs - exact) <= 1e-7, f"theta={th}: lhs off closed form by {abs(r.lhs - exact):.3e}"
    phi = m.potential
    r = ineq.verify_euclidean_lsi(phi, functions.negative_potential(phi, center=[0.7]), 1.0)
    assert abs(r.margin) <= 1e-6, f"Euclidean extremal margin {r.margin:.3e}"
    for b in (1.0, 2.0):
        r = ineq.verify_homogeneous_elsi(gaussian(), 2.0,
                                         functions.negative_potential(gaussian(), b, [0.5]))
        assert abs(r.margin) <= 1e-6, f"homogeneous b={b}: margin {r.margin:.3e}"


def c3_power_constant():
    ineq.power_constant_info.cache_clear()
    for d in (1, 2, 3):
        c = ineq.power_lsi_constant(2, d)
        assert abs(c - 0.5) <= 1e-8, f"d={d}: c={c!r}"
    c4 = ineq.power_lsi_constant(4, 1, z_cap=4.0)
    c8 = ineq.power_lsi_constant(4, 1, z_cap=8.0)
    assert c4 > 0 and abs(c4 - c8) <= 1e-6, f"p=4: {c4!r} vs {c8!r}"


def c4_conjugation_engine():
    rng = np.random.default_rng(1)
    for pot in (gaussian(), power(3), power(4), quartic(), sextic(), gaussian(2), power(4, dim=2)):
        X = rng.uniform(-5, 5, size=(1000, pot.dim))
        G = pot.grad(X)
        val, _ = conjugate_batch(pot, G, closed_form=False)
        gap = np.abs(pot.value(X) + val - np.sum(X * G, axis=1))
        assert gap.max() <= 1e-8, f"{pot.name}: Young gap {gap.max():.3e}"
        Z = grad_inverse_batch(pot, G)
        err = np.linalg.norm(Z - X, axis=1).max()
        assert err <= 1e-8, f"{pot.name}: grad-inverse error {err:.3e}"
    for _ in range(20):
        a, b, c, d = rng.uniform(0.1, 2.0, 4)
        s = rng.uniform(-1, 1)
        f = GridFunction1D.sample(lambda x: a * x**2 + b * np.abs(x - s) + c * np.exp(0.5 * x)
                                  + d * x**4 / 10, -2, 2, 201)
        slope = np.abs(np.diff(f.values) / f.h).max()
        ff = llt_1d(llt_1d(f, (-slope - 1, slope + 1, 801)), f)
        dev = np.abs(ff.values[1:-1] - f.values[1:-1]).max()
        assert dev <= 2 * f.h * slope + f.h**2, f"biconjugation deviation {dev:.3e}"


def c5_expansion_asymptotics():
    triples = [(gaussian(), functions.bump(0.1, 0.0, 1 / np.sqrt(2)), 0.5),
               (quartic(), functions.bump(0.3, 0.5, 1.0), 0.2),
               (power(4), functions.bump(0.2, -0.3, 0.8), 0.7),
               (sextic(), functions.sine(0.1), -0.4),
               (gaussian(2), functions.bump(0.2, [0.3, -0.2], 1.0), [0.4, 0.1])]
    for pot, g, z in triples:
        fit = expansion_order(g, pot, z)
        assert fit.relative_gap <= 1e-4, f"{pot.name}: slope gap {fit.relative_gap:.3e}"
        assert fit.kappa >= 0.9, f"{pot.name}: kappa {fit.kappa:.3f}"


def c6_randomized_suite():
    for pot in SUITE_POTENTIALS:
        cfg = ExperimentConfig(potential=pot, verifiers=SUITE_VERIFIERS,
                               functions=FunctionSuite(count=50, seed=2024),
                               perturbation_amplitude=0.1)
        rep = run_suite(cfg)
        bad = [(v, r.meta.get("index"), r.margin) for v, rs in rep.reports.items()
               for r in rs if not r.ok]
        assert not bad, f"{pot}: violations {bad[:3]}"
        assert rep.total >= 150, f"{pot}: only {rep.total} reports"
        for v in ("hphi", "power_lsi"):
            for r in rep.reports.get(v, []):
                assert r.meta["dominates_mlsi"], f"{pot} {v} #{r.meta['index']}: MLSI rhs not dominated"
        if pot["kind"] == "quartic":
            assert len(rep.reports["hphi"]) == 50
        else:
            assert len(rep.reports["power_lsi"]) == 50


def c7_pointwise_hphi_lemma():
    pot = quartic()
    prof = ineq.extract_hphi(pot)
    assert prof.lam == 1.0 and prof.A == 3.0, f"profile ({prof.lam}, {prof.A})"
    assert abs(prof.C - np.sqrt(6.0)) <= 1e-12, f"C = {prof.C!r}"
    grid = np.linspace(-6, 6, 201)
    rep = ineq.check_pointwise_bound(prof, pot, grid, grid, tol=1e-9)
    n = rep.meta["violations"]
    assert n == 0, (f"{n} grid violations, worst excess {rep.lhs:.4f} at (x, y) = {rep.witness}; "
                    f"coefficient {prof.coeff:g} = 2A/(A-1)")


def c8_nontight_gaussian():
    m = build_measure(gaussian())
    cst = ineq.nontight_constants(m)
    lam_star = 1.0 / (1.0 - np.exp(-2.0))
    assert abs(cst.lam - lam_star) <= 1e-4, f"lambda {cst.lam} vs {lam_star}"
    for a in (0.05, 0.1, 0.2):
        psi = ineq.psi_alpha(gaussian(), a)
        assert abs(psi - 1 / (1 - a)) <= 1e-6, f"psi({a}) = {psi!r}"
    for g in functions.random_bumps(50, seed=2024):
        r = ineq.verify_nontight(m, g, cst)
        assert r.ok, f"{g.name}: margin {r.margin:.3e}"


def c9_transport():
    m = build_measure(gaussian())
    shift = functions.SmoothFunction(1, lambda X: np.exp(0.8 * X[:, 0] - 0.32), None)
    inst = make_instance(m, shift)
    W = wasserstein_bregman_1d(inst)
    rep = verify_transport(inst)
    assert abs(W - 0.32) <= 1e-6 and abs(rep.rhs - 0.32) <= 1e-6, f"W={W!r}, Ent={rep.rhs!r}"
    assert rep.status == "equality"
    rng = np.random.default_rng(3)
    cost = lambda a, b: float(bregman_cost(quartic(), a, b))
    xa, xb = np.sort(rng.uniform(-2, 2, (2, 21)), axis=1)
    wa, wb = rng.uniform(0.1, 1, (2, 21))
    d = abs(monotone_coupling_cost(xa, wa, xb, wb, cost) - discrete_ot_cost(xa, wa, xb, wb, cost))
    assert d <= 1e-8, f"monotone vs LP {d:.3e}"
    for pot in (gaussian(), quartic()):
        mm = build_measure(pot)
        for g in functions.random_bumps(20, seed=5):
            F = functions.SmoothFunction(1, lambda X, g=g: np.exp(g.value(X)), None)
            r = verify_transport(make_instance(mm, F))
            assert r.ok, f"{pot.name} {g.name}: margin {r.margin:.3e}"


def c10_concentration():
    cases = [(build_measure(gaussian()), conc.gross_bound(1.0, gaussian())),
             (build_measure(quartic()), conc.calibrate_constants(ineq.extract_hphi(quartic()), 4.0))]
    for m, bound in cases:
        triple = (bound.C1, bound.C2, bound.C3)
        for n in (5, 10):
            res = conc.run_concentration(m, conc.sum_statistic, n, bound, samples=100_000, seed=n)
            assert (res.meta["C1"], res.meta["C2"], res.meta["C3"]) == triple
            k = int(np.argmax(res.wilson_upper - res.bound))
            assert res.holds, (f"{m.potential.name} n={n}: Wilson {res.wilson_upper[k]:.4g} > "
                               f"bound {res.bound[k]:.4g} at lambda {res.lambda_grid[k]:.3g}")
    res = conc.run_concentration(cases[0][0], conc.sum_statistic, 10, cases[0][1], [6.0],
                                 100_000, seed=42)
    p = 2 * stats.norm.sf(6 / np.sqrt(10))
    se = np.sqrt(p * (1 - p) / 100_000)
    assert abs(res.empirical[0] - p) <= 3 * se, f"tail {res.empirical[0]} vs {p} (se {se:.2e})"


def c11_prekopa_leindler():
    f = GridFunction1D.sample(lambda x: np.exp(-x**2 / 2), -10, 10, 1001)
    r = ineq.check_prekopa_leindler(f, f, f, 0.5)
    assert r.meta["hypothesis_holds"] and abs(r.lhs - r.rhs) <= 1e-6, f"Gaussian triple {r.status}"
    assert abs(r.rhs - np.sqrt(2 * np.pi)) <= 1e-6
    ind = GridFunction1D.sample(lambda x: ((x >= 0) & (x <= 1)).astype(float), -0.5, 1.5, 201)
    r = ineq.check_prekopa_leindler(ind, ind, ind, 0.5)
    assert r.meta["hypothesis_holds"] and r.ok, f"indicator triple {r.status}"
    w0 = GridFunction1D.sample(np.zeros_like, -0.5, 1.5, 201)
    r = ineq.check_prekopa_leindler(ind, ind, w0, 0.5)
    assert r.status == "violated-hypothesis" and r.witness is not None, "broken triple not flagged"


def c12_determinism(tmp_dir):
    cfg = ExperimentConfig(
        potential={"kind": "quartic"},
        verifiers=("mlsi", "brascamp_lieb", "hphi", "perturbed", "euclidean", "nontight",
                   "prekopa_leindler", "transport", "concentration"),
        functions=FunctionSuite(count=8, seed=9),
        concentration=ConcentrationSpec(n=(5,), samples=20_000))
    blobs = []
    for k in range(2):
        emit_report(run_suite(cfg), tmp_dir / f"run{k}")
        blobs.append((tmp_dir / f"run{k}" / "suite.json").read_bytes())
    assert blobs[0] == blobs[1], "suite.json differs between identical runs"


CRITERIA = [
    (1, "Gross reduction of the Gaussian bracket", 1.0, c1_gross_reduction),
    (2, "equality cases", 10.0, c2_equality_cases),
    (3, "power-LSI constant", 30.0, c3_power_constant),
    (4, "conjugation engine", 10.0, c4_conjugation_engine),
    (5, "sup-convolution expansion", 60.0, c5_expansion_asymptotics),
    (6, "randomized inequality suite", 300.0, c6_randomized_suite),
    (7, "pointwise H_phi lemma", 30.0, c7_pointwise_hphi_lemma),
    (8, "non-tight constants", 30.0, c8_nontight_gaussian),
    (9, "transport", 30.0, c9_transport),
    (10, "concentration", 120.0, c10_concentration),
    (11, "Prekopa-Leindler", 5.0, c11_prekopa_leindler),
    (12, "determinism", 60.0, None),
]


@pytest.mark.parametrize("num,title,limit,fn", [c for c in CRITERIA if c[3] is not None],
                         ids=lambda v: f"c{v}" if isinstance(v, int) else None)
def test_criterion(num, title, limit, fn, capsys):
    with capsys.disabled():
        run_criterion(num, title, limit, fn)


def test_criterion_12_determinism(tmp_path, capsys):
    with capsys.disabled():
        run_criterion(12, "determinism", 60.0, lambda: c12_determinism(tmp_path))


if __name__ == "__main__":
    import pathlib
    import tempfile

    failed = 0
    for num, title, limit, fn in CRITERIA:
        if fn is None:
            tmp = pathlib.Path(tempfile.mkdtemp())
            fn = lambda tmp=tmp: c12_determinism(tmp)
        try:
            run_criterion(num, title, limit, fn)
        except Exception:
            failed += 1
    _say(f"{len(CRITERIA) - failed}/{len(CRITERIA)} criteria passed")
    sys.exit(1 if failed else 0)
