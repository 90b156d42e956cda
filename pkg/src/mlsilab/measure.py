"""Normalized log-concave measures e^{-phi} dx on R^d, d <= 2.

Integrals use composite Gauss-Legendre panels (32 nodes each) on a box
[-R, R]^d. Every measure keeps a fine rule and the rule with half as many
panels; their disagreement is the reported quadrature error.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import PreconditionError, QuadratureError
from .potential import check_convex_superlinear, probe_points, ray_directions

GL_ORDER = 32
TAIL_GAP = 46.0  # e^{-46} ~ 1e-20


@lru_cache(maxsize=None)
def _gl(order):
    return np.polynomial.legendre.leggauss(order)


def gauss_legendre_1d(lo, hi, panels, order=GL_ORDER):
    t, w = _gl(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    wx = (half[:, None] * w[None, :]).ravel()
    return x, wx


def gauss_legendre_box(d, box, panels, order=GL_ORDER, center=None):
    """Tensor composite Gauss-Legendre rule on center + [-box, box]^d.

    Returns nodes of shape (N, d) and weights of shape (N,).
    """
    if d not in (1, 2):
        raise ValueError("tensor quadrature is limited to dimension 1 or 2")
    c = np.zeros(d) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
    x, w = gauss_legendre_1d(-box, box, panels, order)
    if d == 1:
        return (x + c[0])[:, None], w
    a, b = np.meshgrid(x, x, indexing="ij")
    wa, wb = np.meshgrid(w, w, indexing="ij")
    return np.column_stack([a.ravel() + c[0], b.ravel() + c[1]]), (wa * wb).ravel()


@dataclass(frozen=True, eq=False)
class QuadRule:
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values):
        return float(np.sum(self.weights * values))


def _values(f, X):
    v = np.asarray(f(X), dtype=float)
    if v.shape != (len(X),):
        v = v.reshape(len(X))
    if not np.all(np.isfinite(v)):
        k = int(np.argmax(~np.isfinite(v)))
        raise QuadratureError(f"non-finite integrand sample at {X[k].tolist()}")
    return v


def _entropy_rule(rule, gv):
    m = float(gv.max())
    if m > 700:
        raise QuadratureError(f"e^g overflows on the quadrature box (max g = {m:.4g})")
    a = gv - m
    e = np.exp(a)
    M = rule.integrate(e)
    if not M > 0:
        raise QuadratureError("e^g underflows on the quadrature box")
    return np.exp(m) * rule.integrate(e * (a - np.log(M)))


# ---------------------------------------------------------------------------
# 1-D distribution functions


class Cdf1D:
    """Distribution of a density exp(logdens) on [lo, hi], accurate in both tails.

    Cumulative masses are stored from the left and from the right so that
    cdf and sf keep relative accuracy far into their respective tails.
    """

    def __init__(self, logdens, lo, hi, cells=4096, order=12):
        self.logdens = logdens
        self.lo, self.hi = float(lo), float(hi)
        self.edges = np.linspace(lo, hi, cells + 1)
        self.order = order
        x, w = gauss_legendre_1d(lo, hi, cells, order)
        ld = logdens(x)
        self.ref = float(ld.max())
        mass = (w * np.exp(ld - self.ref)).reshape(cells, order).sum(axis=1)
        self.total = float(mass.sum())
        mass = mass / self.total
        self.cell_mass = mass
        self.left = np.concatenate([[0.0], np.cumsum(mass)])
        self.right = np.concatenate([np.cumsum(mass[::-1])[::-1], [0.0]])
        self.left[-1] = 1.0
        self.right[0] = 1.0
        # trim tails carrying less than 1e-17 of mass so the table is strictly increasing
        first = int(np.flatnonzero(self.left <= 1e-17)[-1])
        last = int(np.flatnonzero(self.right <= 1e-17)[0])
        u = self.left[first:last + 1].copy()
        u[0], u[-1] = 0.0, 1.0
        x = self.edges[first:last + 1]
        keep = np.concatenate([[True], np.diff(u) > 0])
        self.table_u = u[keep]
        self.table_x = x[keep]
        self._sampler = PchipInterpolator(self.table_u, self.table_x)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lo) & (x <= self.hi)
        out = np.zeros_like(x)
        out[inside] = np.exp(self.logdens(x[inside]) - self.ref) / self.total
        return out

    def _partial(self, a, b):
        t, w = _gl(self.order)
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        pts = mid[:, None] + half[:, None] * t[None, :]
        vals = np.exp(self.logdens(pts.ravel()) - self.ref).reshape(pts.shape)
        return half * (vals @ w) / self.total

    def _cell(self, x):
        k = np.searchsorted(self.edges, x, side="right") - 1
        return np.clip(k, 0, len(self.edges) - 2)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        k = self._cell(x)
        return np.clip(self.left[k] + self._partial(self.edges[k], x), 0.0, 1.0)

    def sf(self, x):
        x = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        k = self._cell(x)
        return np.clip(self.right[k + 1] + self._partial(x, self.edges[k + 1]), 0.0, 1.0)

    def _invert(self, u, table, fn, sign):
        u = np.asarray(u, dtype=float)
        if np.any((u < 0) | (u > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        if sign > 0:
            k = np.searchsorted(table, u, side="right") - 1
        else:
            k = np.searchsorted(-table, -u, side="right") - 1
        k = np.clip(k, 0, len(self.edges) - 2)
        a, b = self.edges[k].copy(), self.edges[k + 1].copy()
        # start from linear interpolation inside the bracketing cell
        ma = np.where(self.cell_mass[k] > 0, self.cell_mass[k], 1.0)
        frac = np.clip(sign * (u - table[k]) / ma, 0.0, 1.0)
        x = a + frac * (b - a)
        for _ in range(60):
            r = sign * (fn(x) - u)
            dens = self.pdf(x)
            a = np.where(r < 0, x, a)
            b = np.where(r > 0, x, b)
            with np.errstate(divide="ignore", invalid="ignore"):
                xn = x - r / dens
            bad = ~np.isfinite(xn) | (xn <= a) | (xn >= b)
            xn = np.where(bad, 0.5 * (a + b), xn)
            done = np.abs(xn - x) <= 1e-14 * (1 + np.abs(x))
            x = xn
            if np.all(done):
                break
        return x

    def ppf(self, u):
        return self._invert(u, self.left, self.cdf, 1.0)

    def isf(self, u):
        return self._invert(u, self.right, self.sf, -1.0)

    def sample(self, count, rng):
        return self._sampler(rng.random(count))


# ---------------------------------------------------------------------------
# measures


@dataclass(frozen=True, eq=False)
class Measure:
    """mu = e^{-phi} dx with phi = potential (already normalized)."""

    potential: object
    Z: float
    log_Z: float
    raw_shift: float
    radius: float
    panels: int
    accuracy: float
    quad_error: float
    fine: QuadRule
    coarse: QuadRule
    cdf: Optional[Cdf1D] = None

    @property
    def dim(self):
        return self.potential.dim

    @property
    def nodes(self):
        return self.fine.nodes

    @property
    def weights(self):
        return self.fine.weights

    @property
    def quantile_table(self):
        if self.cdf is None:
            return None
        return self.cdf.table_u, self.cdf.table_x


def _rule_for(potential, d, R, panels, ref):
    X, w = gauss_legendre_box(d, R, panels)
    dens = np.exp(-(potential.value(X) - ref))
    return X, w * dens


def _boundary_points(d, R, n=257):
    t = np.linspace(-R, R, n)
    if d == 1:
        return np.array([[-R], [R]])
    e = np.full(n, R)
    return np.vstack([np.column_stack([t, e]), np.column_stack([t, -e]),
                      np.column_stack([e, t]), np.column_stack([-e, t])])


def build_measure(potential, accuracy=1e-10, check=True, max_radius=4096.0, cdf_cells=4096):
    """Normalize e^{-phi} by quadrature and fold log Z into the shift."""
    d = potential.dim
    if d > 2:
        raise ValueError("measures are limited to dimension 1 or 2")
    if not accuracy > 0:
        raise ValueError("accuracy must be positive")
    if check:
        check_convex_superlinear(potential, count=401 if d == 1 else 61)
    ref = float(min(potential.value(probe_points(d, 4.0, 81 if d == 1 else 41)).min(),
                    potential.value(np.zeros((1, d)))[0]))
    dirs = ray_directions(d)
    R = 1.0
    while np.any(potential.value(R * dirs) - ref < TAIL_GAP):
        R *= 2
        if R > max_radius:
            raise QuadratureError(f"no truncation radius up to {max_radius} (potential grows too slowly)")
    P = 8 if d == 1 else 4
    cap = 1024 if d == 1 else 32
    while True:
        Xf, wf = _rule_for(potential, d, R, 2 * P, ref)
        Xc, wc = _rule_for(potential, d, R, P, ref)
        Zf, Zc = wf.sum(), wc.sum()
        edge = np.exp(-(potential.value(_boundary_points(d, R)) - ref)).max()
        if edge >= 1e-16 * Zf:
            R *= 2
            if R > max_radius:
                raise QuadratureError("boundary integrand does not decay within the radius cap")
            continue
        if abs(Zf - Zc) <= accuracy * Zf:
            break
        P *= 2
        if P > cap:
            raise QuadratureError(f"normalization did not converge with {2 * cap} panels")
    log_Z = -ref + np.log(Zf)
    pot = potential.with_shift(potential.shift + log_Z)
    fine = QuadRule(Xf, wf / Zf)
    coarse = QuadRule(Xc, wc / Zc)
    cdf = None
    if d == 1:
        cdf = Cdf1D(lambda x: -pot.value(np.ravel(x)).reshape(np.shape(x)), -R, R, cells=cdf_cells)
    return Measure(pot, float(np.exp(log_Z)), float(log_Z), float(potential.shift), float(R),
                   2 * P, float(accuracy), float(abs(Zf - Zc) / Zf), fine, coarse, cdf)


def integrate(measure, f, return_error=False):
    """int f dmu; with ``return_error`` also the fine/coarse disagreement."""
    val = measure.fine.integrate(_values(f, measure.fine.nodes))
    if not return_error:
        return val
    err = abs(val - measure.coarse.integrate(_values(f, measure.coarse.nodes)))
    return val, err


def entropy(measure, g, return_error=False):
    """Ent_mu(e^g) = int e^g log(e^g / int e^g dmu) dmu, max-shift stabilized."""
    val = _entropy_rule(measure.fine, _values(g, measure.fine.nodes))
    if not return_error:
        return val
    err = abs(val - _entropy_rule(measure.coarse, _values(g, measure.coarse.nodes)))
    return val, err


def _variance_rule(rule, gv):
    mean = rule.integrate(gv)
    return max(0.0, rule.integrate((gv - mean) ** 2))


def variance(measure, g, return_error=False):
    val = _variance_rule(measure.fine, _values(g, measure.fine.nodes))
    if not return_error:
        return val
    err = abs(val - _variance_rule(measure.coarse, _values(g, measure.coarse.nodes)))
    return val, err


def sample_1d(measure, count, seed=0):
    """Inverse-CDF samples through a monotone cubic fit of the quantile table."""
    if measure.dim != 1 or measure.cdf is None:
        raise ValueError("sampling is only available for 1-D measures")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return measure.cdf.sample(int(count), rng)


# ---------------------------------------------------------------------------
# Lebesgue reference on a box adapted to e^g


@dataclass(frozen=True, eq=False)
class LebesgueRule:
    fine: QuadRule
    coarse: QuadRule
    radius: float
    center: np.ndarray


def lebesgue_rule(g, dim, accuracy=1e-10, center=None, max_radius=4096.0):
    """Quadrature for int h dx where h carries the factor e^g.

    The box grows until g drops 46 below its probe maximum on the boundary,
    then panels double until int e^g dx is stable to ``accuracy``.
    """
    if dim > 2:
        raise ValueError("Lebesgue quadrature is limited to dimension 1 or 2")
    c = np.zeros(dim) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
    gmax = float(np.max(_values(g, probe_points(dim, 8.0, 161 if dim == 1 else 41) + c)))
    R = 1.0
    P = 8 if dim == 1 else 4
    cap = 1024 if dim == 1 else 32
    while True:
        edge = _values(g, _boundary_points(dim, R) + c)
        if np.all(edge - gmax <= -TAIL_GAP):
            Xf, wf = gauss_legendre_box(dim, R, 2 * P, center=c)
            Xc, wc = gauss_legendre_box(dim, R, P, center=c)
            If = np.sum(wf * np.exp(_values(g, Xf) - gmax))
            Ic = np.sum(wc * np.exp(_values(g, Xc) - gmax))
            if abs(If - Ic) <= accuracy * If:
                return LebesgueRule(QuadRule(Xf, wf), QuadRule(Xc, wc), R, c)
            P *= 2
            if P > cap:
                raise QuadratureError("Lebesgue quadrature of e^g did not converge")
            continue
        R *= 2
        if R > max_radius:
            raise PreconditionError("e^g is not integrable on the truncation box")
