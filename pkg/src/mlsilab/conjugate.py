"""Legendre-Fenchel conjugation.

Pointwise conjugates go through the gradient bijection z = (grad phi)^{-1}(y),
solved by damped Newton. Gaussian and power potentials use closed forms.
The 1-D grid transform is the linear-time hull/merge algorithm.
"""
import csv
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import curve_fit, minimize, minimize_scalar

from ._util import as_point, as_points
from .errors import ConvergenceError, FitError, PreconditionError

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 100
ARMIJO_C = 1e-4
BACKTRACK = 0.5


@dataclass(frozen=True)
class ConjugateResult:
    value: float
    argmax: np.ndarray
    newton_iters: int
    residual: float


def _solve_batch(H, R):
    mu = 1e-14 * (1.0 + np.abs(H).reshape(len(H), -1).max(axis=1))
    Hr = H + mu[:, None, None] * np.eye(H.shape[1])
    if H.shape[1] == 1:
        return R / Hr[:, 0, :]
    return np.linalg.solve(Hr, R[..., None])[..., 0]


def grad_inverse_batch(potential, Y, Z0=None, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER,
                       return_iters=False):
    """Solve grad phi(z) = y row-wise by damped Newton.

    The merit function is |grad phi(z) - y|^2 / 2 with Armijo backtracking.
    Raises ConvergenceError if any row misses |residual| <= tol (1 + |y|).
    Without Z0 the start is the closed-form inverse when one exists: for
    p > 2 power potentials the Hessian vanishes at 0, so a small residual
    alone does not pin z down near the origin.
    """
    d = potential.dim
    Y = as_points(Y, d)
    if Z0 is None:
        cf = _closed_form(potential, Y)
        Z = Y.copy() if cf is None else cf[1]
    else:
        Z = as_points(Z0, d).copy()
    thresh = tol * (1.0 + np.linalg.norm(Y, axis=1))
    R = potential.grad(Z) - Y
    res = np.linalg.norm(R, axis=1)
    active = ~(res <= thresh)
    iters = np.zeros(len(Y), dtype=int)
    it = 0
    while np.any(active):
        if it >= max_iter:
            worst = np.flatnonzero(active)[0]
            raise ConvergenceError(
                f"Newton gradient inversion did not converge for y={Y[worst].tolist()} "
                f"(residual {res[worst]:.3e} after {max_iter} iterations)")
        idx = np.flatnonzero(active)
        Za, Ra, Ya = Z[idx], R[idx], Y[idx]
        D = -_solve_batch(potential.hess(Za), Ra)
        f0 = 0.5 * np.sum(Ra * Ra, axis=1)
        step = np.ones(len(idx))
        pending = np.ones(len(idx), dtype=bool)
        for _ in range(60):
            pi = np.flatnonzero(pending)
            Zt = Za[pi] + step[pi, None] * D[pi]
            Rt = potential.grad(Zt) - Ya[pi]
            ft = 0.5 * np.sum(Rt * Rt, axis=1)
            ok = ft <= (1.0 - 2.0 * ARMIJO_C * step[pi]) * f0[pi]
            acc = pi[ok]
            Z[idx[acc]] = Zt[ok]
            R[idx[acc]] = Rt[ok]
            pending[acc] = False
            step[pi[~ok]] *= BACKTRACK
            if not np.any(pending):
                break
        iters[idx] += 1
        res[idx] = np.linalg.norm(R[idx], axis=1)
        active[idx] = ~(res[idx] <= thresh[idx])
        it += 1
    if return_iters:
        return Z, iters, res
    return Z


def grad_inverse(potential, y, z0=None):
    """(grad phi)^{-1}(y) at a single point."""
    y = as_point(y, potential.dim)
    Z = grad_inverse_batch(potential, y[None, :], None if z0 is None else np.atleast_1d(z0)[None, :])
    return float(Z[0, 0]) if potential.dim == 1 else Z[0]


def _closed_form(potential, Y):
    """phi*(y) and its maximizer for gaussian and power potentials, else None."""
    if potential.kind == "gaussian":
        return 0.5 * np.sum(Y * Y, axis=1) - potential.shift, Y.copy()
    if potential.kind == "power":
        p = potential.p
        if p <= 1:
            raise PreconditionError("power potential with p <= 1 has no finite conjugate")
        q = p / (p - 1.0)
        r = np.linalg.norm(Y, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(r > 0, r ** (q - 2), 0.0)
        return r**q / q - potential.shift, Y * f[:, None]
    return None


def conjugate_batch(potential, Y, Z0=None, closed_form=True):
    """phi*(y) row-wise; returns (values, maximizers)."""
    Y = as_points(Y, potential.dim)
    if closed_form:
        cf = _closed_form(potential, Y)
        if cf is not None:
            return cf
    Z = grad_inverse_batch(potential, Y, Z0)
    return np.sum(Y * Z, axis=1) - potential.value(Z), Z


def conjugate_at(potential, y, closed_form=True):
    """phi*(y) = sup_z {y.z - phi(z)} with its maximizer."""
    y = as_point(y, potential.dim)
    Y = y[None, :]
    cf = _closed_form(potential, Y) if closed_form else None
    if cf is not None:
        val, Z = cf
        iters = 0
    else:
        Z, it, _ = grad_inverse_batch(potential, Y, return_iters=True)
        iters = int(it[0])
        val = np.sum(Y * Z, axis=1) - potential.value(Z)
    resid = float(np.linalg.norm(potential.grad(Z)[0] - y))
    return ConjugateResult(float(val[0]), Z[0].copy(), iters, resid)


def mlsi_bracket(potential, X, V):
    """x.v - phi*(grad phi(x)) + phi*(grad phi(x) - v), row-wise.

    phi*(grad phi(x)) uses the identity x.grad phi(x) - phi(x).
    """
    X = as_points(X, potential.dim)
    V = as_points(V, potential.dim)
    G = potential.grad(X)
    at_grad = np.sum(X * G, axis=1) - potential.value(X)
    shifted, _ = conjugate_batch(potential, G - V, Z0=X)
    return np.sum(X * V, axis=1) - at_grad + shifted


# ---------------------------------------------------------------------------
# discrete transform on grids


@dataclass(frozen=True, eq=False)
class GridFunction1D:
    """Uniform samples on [lo, hi]; +inf marks points outside the domain."""

    lo: float
    hi: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("grid function needs at least 2 samples")
        if not self.lo < self.hi:
            raise ValueError("grid needs lo < hi")
        if np.any(np.isnan(v)) or np.any(v == -np.inf):
            raise ValueError("grid values must be finite or +inf")
        fin = np.flatnonzero(np.isfinite(v))
        if fin.size == 0:
            raise ValueError("grid function has empty effective domain")
        if fin[-1] - fin[0] + 1 != fin.size:
            raise ValueError("effective domain must be a contiguous index range")

    @property
    def count(self):
        return self.values.size

    @property
    def h(self):
        return (self.hi - self.lo) / (self.count - 1)

    @property
    def x(self):
        return np.linspace(self.lo, self.hi, self.count)

    @classmethod
    def sample(cls, f, lo, hi, count):
        x = np.linspace(lo, hi, count)
        return cls(float(lo), float(hi), np.asarray(f(x), dtype=float))

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "value"])
        for xi, vi in zip(self.x, self.values):
            w.writerow([repr(float(xi)), "inf" if np.isinf(vi) else repr(float(vi))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path_or_text):
        if "\n" in str(path_or_text):
            text = str(path_or_text)
        else:
            with open(path_or_text) as fh:
                text = fh.read()
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["x", "value"]:
            raise ValueError("grid CSV must have header 'x,value'")
        x = np.array([float(r[0]) for r in rows[1:]])
        v = np.array([np.inf if r[1].strip() == "inf" else float(r[1]) for r in rows[1:]])
        if x.size < 2:
            raise ValueError("grid CSV needs at least 2 rows")
        if not np.allclose(np.diff(x), (x[-1] - x[0]) / (x.size - 1), rtol=1e-9, atol=1e-12):
            raise ValueError("grid CSV abscissae are not uniformly spaced")
        return cls(float(x[0]), float(x[-1]), v)


def _lower_hull(x, v):
    hx, hv = [], []
    for xi, vi in zip(x, v):
        while len(hx) >= 2:
            # drop the middle point when it lies on or above the chord
            cross = (hx[-1] - hx[-2]) * (vi - hv[-2]) - (hv[-1] - hv[-2]) * (xi - hx[-2])
            if cross <= 0:
                hx.pop()
                hv.pop()
            else:
                break
        hx.append(xi)
        hv.append(vi)
    return np.array(hx), np.array(hv)


def llt_1d(f, dual):
    """Discrete conjugate f*(y_j) = max_i {y_j x_i - f(x_i)} in O(n + m).

    ``dual`` is a (lo, hi, count) triple or a GridFunction1D whose domain is
    reused. Ties go to the smaller abscissa.
    """
    if isinstance(dual, GridFunction1D):
        lo, hi, m = dual.lo, dual.hi, dual.count
    else:
        lo, hi, m = dual
    y = np.linspace(lo, hi, int(m))
    fin = np.isfinite(f.values)
    hx, hv = _lower_hull(f.x[fin], f.values[fin])
    slopes = np.diff(hv) / np.diff(hx)
    out = np.empty(y.size)
    k = 0
    nk = hx.size
    for j, yj in enumerate(y):
        # vertex k maximizes when slope[k-1] < y <= slope[k]
        while k < nk - 1 and slopes[k] < yj:
            k += 1
        out[j] = yj * hx[k] - hv[k]
    return GridFunction1D(float(lo), float(hi), out)


# ---------------------------------------------------------------------------
# sup-convolution g_s


@dataclass(frozen=True)
class SupConvolution:
    value: float
    y: np.ndarray
    newton_converged: bool
    degraded: bool


def _supconv_parts(g, potential, s, z):
    t = 1.0 - s

    def xof(Y):
        return z / t - (s / t) * Y

    def J(Y):
        Xs = xof(Y)
        # convexity defect t phi(x) + s phi(y) - phi(z) uses raw values (shift cancels)
        return g.value(Xs) - t * potential.raw_value(Xs) - s * potential.raw_value(Y)

    def Gt(Y):
        Xs = xof(Y)
        return -g.grad(Xs) / t + potential.grad(Xs) - potential.grad(Y)

    def Ht(Y):
        Xs = xof(Y)
        return (s / t**2) * g.hess(Xs) - (s / t) * potential.hess(Xs) - potential.hess(Y)

    return J, Gt, Ht


def sup_convolution(g, potential, s, z, return_info=False, max_iter=100):
    """g_s(z) = sup over z = t x + s y of g(x) - (t phi(x) + s phi(y) - phi(tx + sy)).

    Newton on the stationarity condition in y, started at
    (grad phi)^{-1}(grad phi(z) - grad g(z)); grid search plus polish as fallback.
    """
    if not 0.0 < s < 0.5:
        raise ValueError("s must lie in (0, 1/2)")
    d = potential.dim
    z = as_point(z, d)
    J, Gt, Ht = _supconv_parts(g, potential, s, z)
    Z1 = z[None, :]
    y = grad_inverse_batch(potential, potential.grad(Z1) - g.grad(Z1))
    converged = False
    for _ in range(max_iter):
        G = Gt(y)
        scale = 1.0 + np.linalg.norm(potential.grad(y)) + np.linalg.norm(g.grad(y))
        if np.linalg.norm(G) <= 1e-13 * scale:
            converged = True
            break
        H = Ht(y)
        if not np.all(np.linalg.eigvalsh(H[0]) < 0):
            break
        step = -np.linalg.solve(H[0], G[0])[None, :]
        j0 = J(y)[0]
        slope = float(G[0] @ step[0])
        a = 1.0
        while a > 1e-12:
            yt = y + a * step
            if J(yt)[0] >= j0 + ARMIJO_C * a * s * slope - 1e-15 * (1 + abs(j0)):
                break
            a *= BACKTRACK
        y = y + a * step
    degraded = False
    if not converged:
        y, degraded = _supconv_fallback(J, z, d)
    Xs = z / (1.0 - s) - (s / (1.0 - s)) * y
    val = g.value(Xs)[0] - ((1 - s) * potential.raw_value(Xs)[0] + s * potential.raw_value(y)[0]
                            - potential.raw_value(z[None, :])[0])
    if return_info:
        return SupConvolution(float(val), y[0].copy(), converged, degraded)
    return float(val)


def _supconv_fallback(J, z, d):
    half = 10.0 * (1.0 + np.linalg.norm(z))
    n = 2001 if d == 1 else 201
    axes = [np.linspace(zi - half, zi + half, n) for zi in z]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    vals = J(pts)
    best = pts[np.argmax(vals)]
    step = 2 * half / (n - 1)
    if d == 1:
        r = minimize_scalar(lambda t: -J(np.array([[t]]))[0],
                            bounds=(best[0] - step, best[0] + step), method="bounded",
                            options={"xatol": 1e-13})
        return np.array([[r.x]]), not r.success
    r = minimize(lambda v: -J(v[None, :])[0], best, method="Nelder-Mead",
                 options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 20000})
    return r.x[None, :], not r.success


@dataclass(frozen=True)
class ExpansionFit:
    slope: float
    beta: float
    kappa: float
    s: np.ndarray
    D: np.ndarray
    integrand: float

    @property
    def relative_gap(self):
        return abs(self.slope - self.integrand) / max(abs(self.integrand), 1e-300)


def mlsi_integrand_at(g, potential, z):
    """z.grad g - phi*(grad phi(z)) + phi*(grad phi(z) - grad g(z)) via conjugate_at."""
    z = as_point(z, potential.dim)
    gz = g.grad(z[None, :])[0]
    pz = potential.grad(z[None, :])[0]
    return float(z @ gz - conjugate_at(potential, pz).value + conjugate_at(potential, pz - gz).value)


S_LADDER = (0.01, 0.005, 0.0025, 0.00125, 0.000625)


def expansion_order(g, potential, z, s_ladder=S_LADDER):
    """Fit D(s) = (g_s(z) - g(z))/s = m + beta s^kappa on a decreasing ladder.

    The three-parameter fit absorbs the O(s^2) remainder into kappa, so the
    bias of m shrinks with the smallest rung; the default ladder keeps it
    near 1e-5 relative on smooth bumps.
    """
    s = np.asarray(s_ladder, dtype=float)
    if s.size < 3 or np.any(np.diff(s) >= 0):
        raise ValueError("s_ladder must be decreasing with at least 3 entries")
    z = as_point(z, potential.dim)
    g0 = float(g.value(z[None, :])[0])
    D = np.array([(sup_convolution(g, potential, si, z) - g0) / si for si in s])
    integrand = mlsi_integrand_at(g, potential, z)
    diffs = np.diff(D)
    noise = 1e-11 * (1.0 + np.abs(D).max())
    if np.all(np.abs(diffs) <= noise):
        return ExpansionFit(float(D[-1]), 0.0, float("nan"), s, D, integrand)
    if not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise FitError(f"D(s) is not monotone along the ladder: {D.tolist()}")
    ratios = diffs[:-1] / diffs[1:]
    k0 = float(np.mean(np.log(ratios) / np.log(s[:-2] / s[1:-1])))
    b0 = diffs[-1] / (s[-1] ** k0 - s[-2] ** k0)
    m0 = D[-1] - b0 * s[-1] ** k0
    try:
        popt, _ = curve_fit(lambda ss, m, b, k: m + b * ss**k, s, D, p0=(m0, b0, k0),
                            maxfev=20000, xtol=1e-15, ftol=1e-15)
        m, b, k = (float(v) for v in popt)
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"expansion fit failed: {exc}") from exc
    return ExpansionFit(m, b, k, s, D, integrand)
