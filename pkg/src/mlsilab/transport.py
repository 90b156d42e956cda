"""Bregman-cost transport between F dmu and mu in one dimension.

The cost L(x, y) = phi(y) - phi(x) - (y - x) phi'(x) has mixed derivative
-phi''(x) < 0, so the monotone (quantile) coupling is optimal.
"""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .measure import Cdf1D, _entropy_rule, _values
from .report import make_report


def bregman_cost(potential, x, y):
    """L(x, y) = phi(y) - phi(x) - (y - x) phi'(x), elementwise for 1-D arrays."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    X, Y = x.reshape(-1, 1), y.reshape(-1, 1)
    L = potential.raw_value(Y) - potential.raw_value(X) - (Y - X)[:, 0] * potential.raw_grad(X)[:, 0]
    return L.reshape(np.broadcast(x, y).shape)


@dataclass(frozen=True, eq=False)
class TransportInstance:
    """F dmu with F rescaled so that int F dmu = 1."""

    measure: object
    F: object
    scale: float
    cdf: Cdf1D

    def density_ratio(self, X):
        return self.scale * _values(self.F, X)

    def cost(self, x, y):
        return bregman_cost(self.measure.potential, x, y)


def make_instance(measure, F, cells=4096):
    if measure.dim != 1:
        raise ValueError("transport instances are one-dimensional")
    mass = measure.fine.integrate(_values(F, measure.fine.nodes))
    if not mass > 0 or not np.isfinite(mass):
        raise ValueError("F must have positive finite integral")
    scale = 1.0 / mass
    pot = measure.potential
    R = measure.radius

    def logdens(x):
        x = np.asarray(x, dtype=float)
        X = x.reshape(-1, 1)
        with np.errstate(divide="ignore"):
            out = np.log(scale * np.asarray(F(X), dtype=float)) - pot.value(X)
        return out.reshape(x.shape)

    return TransportInstance(measure, F, scale, Cdf1D(logdens, -R, R, cells=cells))


def _transport_map(inst, y):
    """T = Q_F o F_mu, through the survival branch in the upper half."""
    mc = inst.measure.cdf
    u = mc.cdf(y)
    upper = u > 0.5
    out = np.empty_like(y)
    out[~upper] = inst.cdf.ppf(u[~upper])
    out[upper] = inst.cdf.isf(mc.sf(y[upper]))
    return out


def _w_rule(inst, rule):
    y = rule.nodes[:, 0]
    x = _transport_map(inst, y)
    return rule.integrate(inst.cost(x, y))


def wasserstein_bregman_1d(inst, return_error=False):
    """int_0^1 L(Q_F(t), Q_mu(t)) dt, written as int L(T(y), y) dmu(y)."""
    val = _w_rule(inst, inst.measure.fine)
    if return_error:
        return val, abs(val - _w_rule(inst, inst.measure.coarse))
    return val


def _logF(inst):
    return lambda X: np.log(inst.density_ratio(X))


def verify_transport(inst):
    """W_L(F dmu, mu) <= Ent_mu(F)."""
    m = inst.measure
    lhs, werr = wasserstein_bregman_1d(inst, return_error=True)
    logF = _logF(inst)
    rhs = _entropy_rule(m.fine, _values(logF, m.fine.nodes))
    rerr = abs(rhs - _entropy_rule(m.coarse, _values(logF, m.coarse.nodes)))
    return make_report("transport", lhs, rhs, werr + rerr, None,
                       {"potential": m.potential.name, "F": getattr(inst.F, "name", "F"),
                        "cost": "bregman"})


def monotone_coupling_cost(xa, wa, xb, wb, cost):
    """North-west-corner (comonotone) coupling of two sorted discrete marginals."""
    wa = np.asarray(wa, dtype=float) / np.sum(wa)
    wb = np.asarray(wb, dtype=float) / np.sum(wb)
    na, nb = len(wa), len(wb)
    i = j = 0
    ra, rb = wa[0], wb[0]
    total = 0.0
    while i < na and j < nb:
        m = min(ra, rb)
        total += m * cost(xa[i], xb[j])
        ra -= m
        rb -= m
        if ra <= 1e-15:
            i += 1
            ra = wa[i] if i < na else 0.0
        if rb <= 1e-15:
            j += 1
            rb = wb[j] if j < nb else 0.0
    return float(total)


def discrete_ot_cost(xa, wa, xb, wb, cost):
    """Exact discrete optimal transport cost by linear programming."""
    wa = np.asarray(wa, dtype=float) / np.sum(wa)
    wb = np.asarray(wb, dtype=float) / np.sum(wb)
    na, nb = len(wa), len(wb)
    Cm = np.array([[cost(a, b) for b in xb] for a in xa], dtype=float)
    A = np.zeros((na + nb, na * nb))
    for i in range(na):
        A[i, i * nb:(i + 1) * nb] = 1.0
    for j in range(nb):
        A[na + j, j::nb] = 1.0
    res = linprog(Cm.ravel(), A_eq=A, b_eq=np.concatenate([wa, wb]), bounds=(0, None),
                  method="highs", options={"primal_feasibility_tolerance": 1e-10,
                                           "dual_feasibility_tolerance": 1e-10})
    if not res.success:
        raise RuntimeError(f"linear program failed: {res.message}")
    return float(res.fun)
