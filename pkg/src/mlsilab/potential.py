"""Convex potentials phi with value/gradient/Hessian oracles and regularity probes."""
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from ._util import as_point, as_points
from .errors import PreconditionError
from . import functions

KINDS = ("gaussian", "power", "polynomial", "perturbed", "custom")

# minimal relative growth of the ray slope over the last radius doubling
SLOPE_GROWTH = 1e-3
# Ladder used for the growth constants A (A phi <= x phi') and B (x phi' <= B phi).
GROWTH_LADDER = (1.25, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 16.0)


@dataclass(frozen=True, eq=False)
class Potential:
    """phi(x) = raw(x) + shift on R^dim.

    ``raw_*`` oracles take (N, dim) arrays. Instances are immutable; use
    :meth:`with_shift` to renormalize.
    """

    dim: int
    kind: str
    raw_value: Callable
    raw_grad: Callable
    raw_hess: Callable
    shift: float = 0.0
    p: Optional[float] = None
    coeffs: Optional[tuple] = None
    base: Optional["Potential"] = None
    perturbation: Optional[functions.SmoothFunction] = None
    amplitude: Optional[float] = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dimension must be positive")

    def value(self, x):
        return self.raw_value(as_points(x, self.dim)) + self.shift

    def grad(self, x):
        return self.raw_grad(as_points(x, self.dim))

    def hess(self, x):
        return self.raw_hess(as_points(x, self.dim))

    def with_shift(self, shift):
        return replace(self, shift=float(shift))

    def centered(self):
        """Same potential shifted so that phi(0) = 0."""
        return self.with_shift(self.shift - float(self.value(np.zeros(self.dim))[0]))

    def to_spec(self):
        if self.kind == "gaussian":
            spec = {"kind": "gaussian", "dim": self.dim}
        elif self.kind == "power":
            spec = {"kind": "power", "p": self.p, "dim": self.dim}
        elif self.kind == "polynomial":
            spec = {"kind": "polynomial", "coeffs": list(self.coeffs)}
        elif self.kind == "perturbed" and self.amplitude is not None:
            spec = {"kind": "perturbed", "base": self.base.to_spec(),
                    "perturbation_amplitude": self.amplitude}
        else:
            raise ValueError(f"potential kind {self.kind!r} has no spec form")
        extra = self.shift - (self.base.shift if self.kind == "perturbed" else 0.0)
        if extra:
            spec["shift"] = extra
        return spec

    def __repr__(self):
        return f"Potential({self.name or self.kind}, dim={self.dim}, shift={self.shift:.6g})"


def gaussian(dim=1, shift=0.0):
    """phi(x) = |x|^2 / 2 + shift."""
    return Potential(
        dim, "gaussian",
        lambda X: 0.5 * np.sum(X * X, axis=1),
        lambda X: X.copy(),
        lambda X: np.broadcast_to(np.eye(dim), (len(X), dim, dim)).copy(),
        shift=float(shift), p=2.0, name="gaussian",
    )


def power(p, dim=1, shift=0.0):
    """phi(x) = |x|^p / p + shift (Euclidean norm)."""
    p = float(p)
    if p < 1:
        raise ValueError("power potential needs p >= 1")

    def val(X):
        return np.linalg.norm(X, axis=1) ** p / p

    def grad(X):
        r = np.linalg.norm(X, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(r > 0, r ** (p - 2), 0.0 if p > 1 else 0.0)
        return X * f[:, None]

    def hess(X):
        r = np.linalg.norm(X, axis=1)
        eye = np.eye(dim)
        with np.errstate(divide="ignore", invalid="ignore"):
            rp = np.where(r > 0, r ** (p - 2), 1.0 if p == 2 else (0.0 if p > 2 else np.inf))
            u = np.where(r[:, None] > 0, X / np.where(r > 0, r, 1.0)[:, None], 0.0)
        H = rp[:, None, None] * (eye + (p - 2) * u[:, :, None] * u[:, None, :])
        if p < 2:
            # |x|^p with p < 2 has no Hessian at 0; mark it with inf
            H[r == 0] = np.inf * eye
        return H

    return Potential(dim, "power", val, grad, hess, shift=float(shift), p=p, name=f"power({p:g})")


def polynomial(coeffs, shift=0.0):
    """1-D polynomial phi(x) = sum_k coeffs[k] x^k + shift."""
    P = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
    dP, d2P = P.deriv(), P.deriv(2)
    return Potential(
        1, "polynomial",
        lambda X: P(X[:, 0]),
        lambda X: dP(X[:, 0])[:, None],
        lambda X: d2P(X[:, 0])[:, None, None],
        shift=float(shift), coeffs=tuple(float(c) for c in coeffs),
        name=f"poly{tuple(float(c) for c in coeffs)}",
    )


def quartic():
    """phi(x) = x^4/12 + x^2/2, the running super-Gaussian example."""
    return polynomial([0.0, 0.0, 0.5, 0.0, 1.0 / 12.0])


def sextic():
    """phi(x) = x^6/30 + x^2/2."""
    return polynomial([0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 1.0 / 30.0])


def perturbed(base, U=None, amplitude=None):
    """Phi = phi + U with U bounded; ``amplitude`` builds U = amplitude * sum sin."""
    if U is None:
        if amplitude is None:
            raise ValueError("perturbed potential needs U or amplitude")
        U = functions.sine(amplitude, base.dim)
    if U.dim != base.dim:
        raise ValueError("perturbation dimension mismatch")
    return Potential(
        base.dim, "perturbed",
        lambda X: base.raw_value(X) + U.value_fn(X),
        lambda X: base.raw_grad(X) + U.grad_fn(X),
        lambda X: base.raw_hess(X) + U.hess(X),
        shift=base.shift, base=base, perturbation=U,
        amplitude=None if amplitude is None else float(amplitude),
        name=f"{base.name}+{U.name}",
    )


def custom(value, grad, hess, dim=1, shift=0.0, name="custom"):
    """Wrap user oracles acting on (N, dim) arrays."""
    return Potential(dim, "custom", value, grad, hess, shift=float(shift), name=name)


def from_spec(spec):
    """Build a potential from its config-file dictionary form."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValueError(f"potential spec must be an object with a 'kind' field: {spec!r}")
    kind = spec["kind"]
    shift = float(spec.get("shift", 0.0))
    if kind == "gaussian":
        return gaussian(int(spec.get("dim", 1)), shift)
    if kind == "power":
        if "p" not in spec:
            raise ValueError("power potential spec needs 'p'")
        return power(float(spec["p"]), int(spec.get("dim", 1)), shift)
    if kind in ("quartic", "sextic"):
        pot = quartic() if kind == "quartic" else sextic()
        return pot.with_shift(shift) if shift else pot
    if kind == "polynomial":
        if "coeffs" not in spec:
            raise ValueError("polynomial potential spec needs 'coeffs'")
        return polynomial(spec["coeffs"], shift)
    if kind == "perturbed":
        if "base" not in spec:
            raise ValueError("perturbed potential spec needs 'base'")
        pot = perturbed(from_spec(spec["base"]),
                        amplitude=float(spec.get("perturbation_amplitude", 0.1)))
        return pot.with_shift(pot.shift + shift) if shift else pot
    raise ValueError(f"unknown potential kind {kind!r}")


def evaluate(potential, x, order="value"):
    """phi, grad phi or Hess phi at a single point."""
    x = as_point(x, potential.dim)
    if order == "value":
        return float(potential.value(x[None, :])[0])
    if order == "grad":
        g = potential.grad(x[None, :])[0]
        return float(g[0]) if potential.dim == 1 else g
    if order == "hess":
        H = potential.hess(x[None, :])[0]
        return float(H[0, 0]) if potential.dim == 1 else H
    raise ValueError(f"unknown order {order!r}")


# ---------------------------------------------------------------------------
# regularity analysis


@dataclass(frozen=True)
class RegularityProfile:
    lam: float
    is_even: bool
    hess_unbounded: bool
    homogeneity_q: Optional[float]
    growth_A: Optional[float]
    growth_B: Optional[float]
    C_A: Optional[float]
    integrability_flag: Optional[bool]
    osc_U: Optional[float] = None
    hess_monotone: bool = False
    integrability_values: dict = field(default_factory=dict)


def probe_points(dim, radius, count):
    """Tensor probe grid on [-radius, radius]^dim (origin included when count is odd)."""
    t = np.linspace(-radius, radius, count)
    if dim == 1:
        return t[:, None]
    if dim == 2:
        a, b = np.meshgrid(t, t, indexing="ij")
        return np.column_stack([a.ravel(), b.ravel()])
    rng = np.random.default_rng(0)
    return rng.uniform(-radius, radius, size=(count * 8, dim))


def ray_directions(dim):
    eye = np.eye(dim)
    dirs = [eye, -eye]
    if dim == 2:
        s = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2)
        dirs += [s, -s]
    return np.vstack(dirs)


def _min_eig(H):
    if H.shape[1] == 1:
        return H[:, 0, 0]
    return np.linalg.eigvalsh(H)[:, 0]


def check_convex_superlinear(potential, radius=20.0, count=401, r_max=256.0):
    """Strict convexity and superlinearity probes; returns the Hessian floor.

    Raises PreconditionError with a witness point on failure. Perturbed
    potentials are checked through their base.
    """
    pot = potential.base if potential.kind == "perturbed" else potential
    X = np.unique(np.vstack([probe_points(pot.dim, radius, count), np.zeros((1, pot.dim))]), axis=0)
    H = pot.hess(X)
    if not np.all(np.isfinite(H)):
        bad = X[np.argmax(~np.all(np.isfinite(H.reshape(len(X), -1)), axis=1))]
        raise PreconditionError(f"Hessian not finite at {bad.tolist()} (phi not C^2)", bad)
    ev = _min_eig(H)
    scale = 1.0 + np.abs(H).reshape(len(X), -1).max(axis=1)
    neg = ev < -1e-10 * scale
    if np.any(neg):
        w = X[np.argmax(neg)]
        raise PreconditionError(f"strict convexity violated at {w.tolist()}", w)
    flat = ev <= 1e-12 * scale
    if np.count_nonzero(flat) > 1:
        w = X[np.flatnonzero(flat)[1]]
        raise PreconditionError(f"strict convexity violated: flat Hessian at {w.tolist()}", w)
    origin = np.zeros((1, pot.dim))
    f0 = pot.value(origin)[0]
    radii = 2.0 ** np.arange(0, int(np.log2(r_max)) + 1)
    for e in ray_directions(pot.dim):
        pts = radii[:, None] * e[None, :]
        ratio = (pot.value(pts) - f0) / radii
        if not np.all(np.diff(ratio) > 0):
            raise PreconditionError(f"superlinearity probe failed along {e.tolist()}", e)
        # convexity alone makes the ratio increase; the slope must keep growing
        slope = pot.grad(pts[-2:]) @ e
        if not slope[1] > (1.0 + SLOPE_GROWTH) * max(slope[0], 0.0):
            raise PreconditionError(
                f"superlinearity probe failed along {e.tolist()}: slope saturates at {slope[1]:.6g}", e)
    return max(0.0, float(ev.min()))


def oscillation(U, dim, radius, count=2001, doublings=2, rtol=1e-2):
    """sup U - inf U over [-radius, radius]^dim, checked for growth under doubling."""
    vals = []
    for k in range(doublings + 1):
        X = probe_points(dim, radius * 2**k, count if dim == 1 else 201)
        u = U.value(X)
        vals.append(float(u.max() - u.min()))
    if vals[-1] > vals[0] * (1.0 + rtol) + 1e-12:
        raise PreconditionError(
            f"oscillation of U diverges under radius doubling: {vals}")
    return max(vals)


def detect_homogeneity(potential, radius=20.0, count=401, rtol=1e-9):
    """Exponent q with phi0(2x) = 2^q phi0(x), or None; phi0 = phi - phi(0)."""
    pot = potential.centered()
    X = probe_points(pot.dim, radius / 2, count)
    f1 = pot.value(X)
    f2 = pot.value(2 * X)
    ok = f1 > 1e-12
    if np.count_nonzero(ok) < 4 or np.any(f1[~ok] < -1e-12):
        return None
    q = float(np.median(np.log2(f2[ok] / f1[ok])))
    if q <= 0:
        return None
    if np.all(np.abs(f2 - 2**q * f1) <= rtol * np.abs(f2) + 1e-300):
        return q
    return None


def _growth_gap(pot0, X, A):
    xg = np.sum(X * pot0.grad(X), axis=1)
    f = pot0.value(X)
    tol = 1e-12 * (np.abs(xg) + A * np.abs(f))
    return xg - A * f, tol


def growth_constant_A(potential, radius=20.0, count=401, ladder=GROWTH_LADDER):
    """Largest ladder A with A phi0 <= x.grad phi for |x| >= C_A, C_A <= radius/2.

    Returns (A, C_A) or (None, None). In 1-D the crossing radius is refined
    with Brent's method.
    """
    pot0 = potential.centered()
    X = probe_points(pot0.dim, radius, count)
    r = np.linalg.norm(X, axis=1)
    best = (None, None)
    for A in ladder:
        gap, tol = _growth_gap(pot0, X, A)
        fail = gap < -tol
        if not np.any(fail):
            C = float(r[r > 0].min())
        else:
            C = float(r[fail].max())
            if pot0.dim == 1:
                C = _refine_crossing(pot0, A, X[:, 0], fail)
        if C <= radius / 2:
            best = (A, C)
    return best


def _refine_crossing(pot0, A, x, fail):
    """Outermost root of x phi0'(x) - A phi0(x) on each side of the origin."""
    def h(t):
        gap, _ = _growth_gap(pot0, np.array([[t]]), A)
        return gap[0]

    out = 0.0
    n = len(x)
    for sign in (1.0, -1.0):
        idx = np.flatnonzero((sign * x > 0) & fail)
        if idx.size == 0:
            continue
        k = idx[np.argmax(sign * x[idx])]
        j = k + 1 if sign > 0 else k - 1
        if j < 0 or j >= n:
            out = max(out, abs(x[k]))
            continue
        if h(x[j]) < 0:
            out = max(out, abs(x[j]))
            continue
        root = brentq(h, min(x[k], x[j]), max(x[k], x[j]), xtol=1e-15,
                      rtol=4 * np.finfo(float).eps, maxiter=200)
        out = max(out, abs(root))
    return out


def growth_constant_B(potential, radius=20.0, count=401, ladder=GROWTH_LADDER):
    """Smallest ladder B with x.grad phi <= B phi0 on the outer half of the probe box."""
    pot0 = potential.centered()
    X = probe_points(pot0.dim, radius, count)
    X = X[np.linalg.norm(X, axis=1) >= radius / 2]
    for B in ladder:
        gap, tol = _growth_gap(pot0, X, B)
        if np.all(gap <= tol):
            return B
    return None


def _hess_unbounded(pot, lam):
    vals = []
    for r in (10.0, 20.0, 40.0):
        pts = np.vstack([r * ray_directions(pot.dim)])
        vals.append(float(_min_eig(pot.hess(pts)).min()))
    return bool(vals[0] < vals[1] < vals[2] and min(vals) > 10 * lam)


def _hess_monotone(pot, radius, count):
    if pot.dim != 1:
        return False
    t = np.linspace(0, radius, count)[:, None]
    h = pot.hess(t)[:, 0, 0]
    hn = pot.hess(-t)[:, 0, 0]
    tol = 1e-12 * (1 + np.abs(h))
    return bool(np.all(np.diff(h) >= -tol[1:]) and np.all(np.diff(hn) >= -tol[1:]))


def analyze_regularity(potential, probe_radius=20.0, probe_count=401, integrability=True):
    """Extract the constants the theorems consume (lambda, A, B, C_A, q, ...)."""
    if probe_count < 16:
        raise ValueError("probe_count must be at least 16")
    lam = check_convex_superlinear(potential, probe_radius, probe_count)
    pot = potential.base if potential.kind == "perturbed" else potential
    X = probe_points(pot.dim, probe_radius, probe_count)
    f, fm = pot.value(X), pot.value(-X)
    is_even = bool(np.all(np.abs(f - fm) <= 1e-12 * (1 + np.abs(f))))
    A, C_A = growth_constant_A(pot, probe_radius, probe_count)
    osc = None
    if potential.kind == "perturbed":
        osc = oscillation(potential.perturbation, pot.dim, probe_radius)
    flag, ivals = (None, {})
    if integrability:
        flag, ivals = integrability_flag(pot)
    return RegularityProfile(
        lam=lam,
        is_even=is_even,
        hess_unbounded=_hess_unbounded(pot, lam),
        homogeneity_q=detect_homogeneity(pot, probe_radius, probe_count),
        growth_A=A,
        growth_B=growth_constant_B(pot, probe_radius, probe_count),
        C_A=C_A,
        integrability_flag=flag,
        osc_U=osc,
        hess_monotone=_hess_monotone(pot, probe_radius, probe_count),
        integrability_values=ivals,
    )


def integrability_flag(potential, radii=(1.0, 5.0, 10.0)):
    """Heuristic check of the technical moment condition on phi.

    For each R the integrand
    (|z| + |y0| + R)^2 (|grad phi(z)| + sup_ball |Hess phi|)
    is integrated against e^{-phi} on two nested boxes; the flag fails when
    a value is non-finite or the box doubling changes it by more than 1e-3.
    y0 is the admissible point with grad phi(y0) = (|grad phi(z)| + R) u,
    u the direction of grad phi(z).
    """
    from .conjugate import grad_inverse_batch
    from .measure import gauss_legendre_box

    pot = potential
    d = pot.dim
    X0 = np.zeros((1, d))
    fmin = pot.value(X0)[0]
    R_box = 1.0
    while np.any(pot.value(R_box * ray_directions(d)) - fmin < 46) and R_box < 1e4:
        R_box *= 2
    values = {}
    ok = True
    panels = 8 if d == 1 else 2
    for R in radii:
        res = []
        for box in (R_box, 2 * R_box):
            Xn, w = gauss_legendre_box(d, box, panels)
            dens = np.exp(-(pot.value(Xn) - fmin))
            keep = dens > 1e-300
            Xn, w, dens = Xn[keep], w[keep], dens[keep]
            G = pot.grad(Xn)
            gn = np.linalg.norm(G, axis=1)
            u = np.where(gn[:, None] > 0, G / np.where(gn > 0, gn, 1)[:, None], 0.0)
            u[gn == 0, 0] = 1.0
            try:
                y0 = grad_inverse_batch(pot, (gn + R)[:, None] * u)
            except Exception:
                ok = False
                res.append(np.inf)
                continue
            center = Xn - y0
            hs = []
            for off in np.vstack([np.zeros((1, d)), R * np.eye(d), -R * np.eye(d)]):
                Hb = pot.hess(center + off)
                hs.append(np.linalg.norm(Hb, ord=2, axis=(1, 2)))
            hsup = np.max(hs, axis=0)
            integrand = (np.linalg.norm(Xn, axis=1) + np.linalg.norm(y0, axis=1) + R) ** 2 * (gn + hsup)
            res.append(float(np.sum(w * dens * integrand) / np.sum(w * dens)))
        values[R] = res[-1]
        if not (np.all(np.isfinite(res)) and abs(res[1] - res[0]) <= 1e-3 * abs(res[1])):
            ok = False
    return ok, values
