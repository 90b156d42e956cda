"""Verifiers: each evaluates one functional inequality as lhs <= rhs.

Every measure-based verifier runs on the fine and the coarse quadrature rule;
the disagreement of the two is added to the violation tolerance.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import minimize, minimize_scalar

from . import functions
from .conjugate import conjugate_batch, grad_inverse_batch, mlsi_bracket
from .errors import PreconditionError
from .measure import _entropy_rule, _values, _variance_rule, build_measure, lebesgue_rule
from .potential import (analyze_regularity, detect_homogeneity, gaussian,
                        oscillation, perturbed, probe_points)
from .report import make_report


def _tilted(rule, gv, hv):
    """int h e^g over a rule, stabilized by max g."""
    m = float(gv.max())
    return float(np.exp(m) * np.sum(rule.weights * hv * np.exp(gv - m)))


def _rules(measure):
    return measure.fine, measure.coarse


def _on_both(rules, fn):
    f = fn(rules[0])
    c = fn(rules[1])
    err = abs(f[0] - c[0]) + abs(f[1] - c[1])
    return f, err


def _fname(g):
    return getattr(g, "name", "g")


# ---------------------------------------------------------------------------
# main inequality and its special cases


def verify_mlsi(measure, g):
    """Ent(e^g) <= int {x.grad g - phi*(grad phi) + phi*(grad phi - grad g)} e^g dmu."""
    pot = measure.potential

    def side(rule):
        X = rule.nodes
        gv = _values(g, X)
        br = mlsi_bracket(pot, X, g.grad(X))
        return _entropy_rule(rule, gv), _tilted(rule, gv, br), br, X

    (lhs, rhs, br, X), err = _on_both(_rules(measure), side)
    k = int(np.argmin(br))
    witness = X[k] if br[k] < -1e-9 else None
    meta = {"potential": pot.name, "g": _fname(g), "bracket_min": float(br[k]),
            "bracket_nonnegative": bool(br[k] >= -1e-9)}
    return make_report("mlsi", lhs, rhs, err, witness, meta)


def gaussian_bracket_identity(x, v, shift=0.0, atol=1e-12):
    """Bracket x.v - phi*(x) + phi*(x - v) for phi = |x|^2/2 + shift; equals |v|^2/2.

    Scalars are 1-D points, a vector is one point and a 2-D array holds one
    point per row.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    # scalars are 1-D points, vectors one point, 2-D arrays rows of points
    d = 1 if x.ndim == 0 else x.shape[-1]
    X = x.reshape(-1, d)
    V = v.reshape(-1, d)
    val = mlsi_bracket(gaussian(d, shift), X, V)
    expect = 0.5 * np.sum(V * V, axis=1)
    if np.any(np.abs(val - expect) > atol * (1.0 + expect)):
        raise ArithmeticError("Gaussian bracket differs from |v|^2/2")
    return float(val[0]) if val.size == 1 else val


def verify_brascamp_lieb(measure, g):
    """Var(g) <= int grad g . Hess(phi)^{-1} grad g dmu."""
    pot = measure.potential
    H0 = pot.hess(np.zeros((1, pot.dim)))

    def side(rule):
        X = rule.nodes
        H = np.concatenate([pot.hess(X), H0])
        ev = np.linalg.eigvalsh(H)[:, 0] if pot.dim > 1 else H[:, 0, 0]
        scale = 1.0 + np.abs(H).reshape(len(H), -1).max(axis=1)
        if np.any(~np.isfinite(ev)) or np.any(ev <= 1e-12 * scale):
            k = int(np.argmin(ev / scale))
            w = np.vstack([X, np.zeros((1, pot.dim))])[k]
            raise PreconditionError(f"Hessian singular at {w.tolist()}", w)
        G = g.grad(X)
        if pot.dim == 1:
            q = G[:, 0] ** 2 / H[:-1, 0, 0]
        else:
            q = np.sum(G * np.linalg.solve(H[:-1], G[..., None])[..., 0], axis=1)
        return _variance_rule(rule, _values(g, X)), rule.integrate(q)

    (lhs, rhs), err = _on_both(_rules(measure), side)
    return make_report("brascamp_lieb", lhs, rhs, err, None,
                       {"potential": pot.name, "g": _fname(g)})


@dataclass(frozen=True)
class SmallEpsilonLimit:
    eps: np.ndarray
    entropy_ratio: np.ndarray     # Ent(e^{eps g}) / (eps^2/2)
    mlsi_ratio: np.ndarray        # MLSI rhs for eps g, over eps^2/2
    variance: float
    bl_rhs: float                 # int grad g . Hess^{-1} grad g dmu
    entropy_limit: float          # three-point Richardson extrapolation
    mlsi_limit: float
    entropy_order: float
    mlsi_order: float


def _fitted_order(eps, err):
    err = np.abs(err)
    if np.all(err <= 1e-14):
        return np.inf
    return float(np.polyfit(np.log(eps), np.log(np.maximum(err, 1e-300)), 1)[0])


def small_epsilon_limit(measure, g, eps=(0.1, 0.05, 0.025)):
    """Second-order behaviour of the MLSI at eps g; both ratios tend to the BL sides.

    ``eps`` must halve at each step for the Richardson weights (1, -6, 8)/3.
    """
    eps = np.asarray(eps, dtype=float)
    if eps.size != 3 or not np.allclose(eps[1:] / eps[:-1], 0.5):
        raise ValueError("eps must be three halving values")
    pot = measure.potential
    rule = measure.fine
    X = rule.nodes
    gv = _values(g, X)
    G = g.grad(X)
    H = pot.hess(X)
    q = np.sum(G * np.linalg.solve(H, G[..., None])[..., 0], axis=1)
    ent = np.empty(3)
    mlsi = np.empty(3)
    for k, e in enumerate(eps):
        ent[k] = _entropy_rule(rule, e * gv) / (e * e / 2)
        br = mlsi_bracket(pot, X, e * G)
        mlsi[k] = _tilted(rule, e * gv, br) / (e * e / 2)
    var = _variance_rule(rule, gv)
    bl = rule.integrate(q)
    w = np.array([1.0, -6.0, 8.0]) / 3.0
    return SmallEpsilonLimit(eps, ent, mlsi, var, bl, float(w @ ent), float(w @ mlsi),
                             _fitted_order(eps, ent - var), _fitted_order(eps, mlsi - bl))


# ---------------------------------------------------------------------------
# power potentials


def _psibar(r, th, q):
    return np.cos(th) * r ** (q - 1) - r**q / q + (r * r - 2 * r * np.cos(th) + 1) ** (q / 2) / q


def _maximize_psibar(q, dim, cap, rng, starts=32):
    rr = np.linspace(0.0, cap, 801)
    if dim == 1:
        thetas = np.array([0.0, np.pi])
    else:
        thetas = np.linspace(0.0, np.pi, 181)
    R, T = np.meshgrid(rr, thetas, indexing="ij")
    V = _psibar(R, T, q)
    k = int(np.argmax(V))
    best, arg = float(V.ravel()[k]), (float(R.ravel()[k]), float(T.ravel()[k]))
    seeds = [arg] + [(rng.uniform(0, cap), rng.choice(thetas) if dim == 1 else rng.uniform(0, np.pi))
                     for _ in range(starts)]
    for r0, t0 in seeds:
        if dim == 1:
            res = minimize(lambda v: -_psibar(v[0], t0, q), [r0], method="L-BFGS-B",
                           bounds=[(0.0, cap)], options={"ftol": 1e-15, "gtol": 1e-12})
            cand = (float(res.x[0]), float(t0))
        else:
            res = minimize(lambda v: -_psibar(v[0], v[1], q), [r0, t0], method="L-BFGS-B",
                           bounds=[(0.0, cap), (0.0, np.pi)], options={"ftol": 1e-15, "gtol": 1e-12})
            cand = (float(res.x[0]), float(res.x[1]))
        val = float(_psibar(cand[0], cand[1], q))
        if val > best:
            best, arg = val, cand
    return best, arg


@lru_cache(maxsize=None)
def power_constant_info(p, dim=1, z_cap=4.0, seed=0):
    """(c, argmax (r, theta), final cap) for c = sup psibar over z and unit e.

    psibar(z, e) = z.e |z|^{q-2} - |z|^q/q + |z - e|^q/q depends on (|z|, angle)
    only; in 1-D the angle is 0 or pi.
    """
    p = float(p)
    if p < 2:
        raise ValueError("power LSI constant needs p >= 2")
    q = p / (p - 1.0)
    rng = np.random.default_rng(seed)
    cap = float(z_cap)
    while True:
        best, arg = _maximize_psibar(q, dim, cap, rng)
        rs = np.linspace(cap, 2 * cap, 401)
        th = np.array([0.0, np.pi]) if dim == 1 else np.linspace(0, np.pi, 181)
        R, T = np.meshgrid(rs, th, indexing="ij")
        shell = float(_psibar(R, T, q).max())
        # stop once the outer shell is below the best value, or psibar is flat (p = 2)
        if shell < best - 1e-9 or abs(shell - best) <= 1e-12:
            return best, arg, cap
        cap *= 2
        if cap > 2.0**20:
            raise RuntimeError("power constant: psibar does not decay")


def power_lsi_constant(p, dim=1, z_cap=4.0):
    return power_constant_info(float(p), int(dim), float(z_cap))[0]


def verify_power_lsi(measure, g):
    """Ent(e^g) <= c int |grad g|^q e^g dmu for phi = |x|^p/p + shift."""
    pot = measure.potential
    if pot.kind not in ("power", "gaussian"):
        raise PreconditionError(f"power LSI needs a power potential, got {pot.kind}")
    p = float(pot.p)
    if p < 2:
        raise PreconditionError("power LSI needs p >= 2")
    q = p / (p - 1.0)
    c = power_lsi_constant(p, pot.dim)

    def side(rule):
        X = rule.nodes
        gv = _values(g, X)
        G = g.grad(X)
        cost = c * np.linalg.norm(G, axis=1) ** q
        br = mlsi_bracket(pot, X, G)
        return (_entropy_rule(rule, gv), _tilted(rule, gv, cost), _tilted(rule, gv, br),
                cost - br, X)

    (lhs, rhs, mrhs, gap, X), err = _on_both(_rules(measure), side)
    k = int(np.argmin(gap))
    dominates = bool(gap[k] >= -1e-9)
    meta = {"p": p, "q": q, "c": c, "mlsi_rhs": mrhs, "dominates_mlsi": dominates,
            "min_pointwise_gap": float(gap[k]), "potential": pot.name, "g": _fname(g)}
    return make_report("power_lsi", lhs, rhs, err, None if dominates else X[k], meta)


# ---------------------------------------------------------------------------
# H_phi modified LSI


@dataclass(frozen=True, eq=False)
class HPhiProfile:
    """H(y) = y^2/(2 lam) for |y| <= C and coeff phi*(y/2) beyond (phi(0) = 0)."""

    lam: float
    A: float
    C: float
    coeff: float
    tail_factor: float
    potential: object = None
    meta: dict = field(default_factory=dict)

    def __call__(self, y):
        return self.H(y)

    def _tail(self, y):
        return self.coeff * conjugate_batch(self.potential, np.asarray(y, dtype=float) / 2)[0]

    def H(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
        out = y * y / (2 * self.lam)
        big = np.abs(y) > self.C
        if np.any(big):
            out[big] = self._tail(y[big])
        return out

    def H_bar(self, theta):
        """sup of H over [-theta, theta]."""
        t = np.abs(np.atleast_1d(np.asarray(theta, dtype=float)).ravel())
        out = np.minimum(t, self.C) ** 2 / (2 * self.lam)
        big = t > self.C
        if np.any(big):
            tail = np.maximum(self._tail(t[big]), self._tail(-t[big]))
            out[big] = np.maximum(out[big], tail)
        return out


def extract_hphi(potential, tail_factor=2.0, regularity=None):
    """Profile (lam, A, C, coeff) for an even 1-D potential with unbounded phi''.

    coeff = tail_factor A/(A-1); tail_factor=2 is the published constant,
    tail_factor=4 the one the pointwise bound actually supports.
    """
    if potential.dim != 1:
        raise PreconditionError("H_phi profile is one-dimensional")
    pot = potential.base if potential.kind == "perturbed" else potential
    reg = regularity or analyze_regularity(pot, integrability=False)
    pot0 = pot.centered()
    lam = float(pot0.hess(np.zeros((1, 1)))[0, 0, 0])
    checks = [
        ("is_even", reg.is_even),
        ("lambda>0", lam > 0),
        ("hess_monotone", reg.hess_monotone),
        ("hess_unbounded", reg.hess_unbounded),
        ("growth_A", reg.growth_A is not None),
    ]
    for name, ok in checks:
        if not ok:
            reason = f"{name}=false" if name not in ("lambda>0", "growth_A") else (
                "lambda=0" if name == "lambda>0" else "growth_A absent")
            raise PreconditionError(reason)
    A, C = float(reg.growth_A), float(reg.C_A)
    coeff = float(tail_factor) * A / (A - 1.0)
    return HPhiProfile(lam, A, C, coeff, float(tail_factor), pot0,
                       {"C_prime": 2 * A / (A - 1.0), "C_equals_C_A": True,
                        "growth_B": reg.growth_B})


def check_pointwise_bound(profile, potential, x_grid, y_grid, tol=1e-9):
    """Max over grid pairs of bracket(x, y) - H(y); witness at the worst pair.

    Also checks the intermediate bound bracket <= 2 y (phi')^{-1}(y/2) for |y| >= C.
    """
    pot0 = potential.centered()
    x = np.asarray(x_grid, dtype=float).ravel()
    y = np.asarray(y_grid, dtype=float).ravel()
    XX, YY = np.meshgrid(x, y, indexing="ij")
    Xf, Yf = XX.ravel()[:, None], YY.ravel()[:, None]
    br = mlsi_bracket(pot0, Xf, Yf)
    Hy = profile.H(y)
    excess = br - np.tile(Hy, x.size)
    k = int(np.argmax(excess))
    inter = 2 * y * grad_inverse_batch(pot0, y / 2)[:, 0]
    inter_ex = br - np.tile(inter, x.size)
    mask = np.abs(Yf[:, 0]) >= profile.C
    inter_max = float(inter_ex[mask].max()) if np.any(mask) else -np.inf
    n_viol = int(np.count_nonzero(excess > tol))
    meta = {"lam": profile.lam, "A": profile.A, "C": profile.C, "coeff": profile.coeff,
            "tail_factor": profile.tail_factor, "violations": n_viol, "pairs": int(excess.size),
            "bracket_at_witness": float(br[k]), "H_at_witness": float(br[k] - excess[k]),
            "intermediate_max_excess": inter_max,
            "intermediate_ok": bool(inter_max <= tol)}
    worst = float(excess[k])
    witness = [float(Xf[k, 0]), float(Yf[k, 0])] if worst > tol else None
    return make_report("hphi_pointwise", worst, 0.0, 0.0, witness, meta, tolerance=tol)


def verify_hphi_mlsi(measure, g, profile=None, tail_factor=2.0):
    """Ent(e^g) <= int H(g') e^g dmu; meta compares with the main-inequality rhs."""
    pot = measure.potential
    prof = profile or extract_hphi(pot, tail_factor)

    def side(rule):
        X = rule.nodes
        gv = _values(g, X)
        G = g.grad(X)
        cost = prof.H(G[:, 0])
        br = mlsi_bracket(pot, X, G)
        return (_entropy_rule(rule, gv), _tilted(rule, gv, cost), _tilted(rule, gv, br),
                cost - br, float(np.abs(G).max()))

    (lhs, rhs, mrhs, gap, gmax), err = _on_both(_rules(measure), side)
    meta = {"lam": prof.lam, "A": prof.A, "C": prof.C, "coeff": prof.coeff,
            "C_prime": prof.meta.get("C_prime"), "mlsi_rhs": mrhs,
            "dominates_mlsi": bool(mrhs <= rhs + 1e-12 * max(1.0, abs(rhs))),
            "min_pointwise_gap": float(gap.min()), "max_abs_gprime": gmax,
            "conjugate_branch": bool(gmax > prof.C),
            "g": _fname(g)}
    return make_report("hphi", lhs, rhs, err, None, meta)


# ---------------------------------------------------------------------------
# perturbations


def verify_perturbed(base, U, g, accuracy=1e-10, radius=20.0):
    """Ent_{mu_Phi}(e^g) <= e^{2 osc U} int {base bracket} e^g dmu_Phi, Phi = phi + U."""
    osc = oscillation(U, base.dim, radius)
    measure = build_measure(perturbed(base, U), accuracy)
    factor = float(np.exp(2 * osc))

    def side(rule):
        X = rule.nodes
        gv = _values(g, X)
        br = mlsi_bracket(base, X, g.grad(X))
        return _entropy_rule(rule, gv), factor * _tilted(rule, gv, br)

    (lhs, rhs), err = _on_both(_rules(measure), side)
    return make_report("perturbed", lhs, rhs, err, None,
                       {"osc_U": osc, "factor": factor, "base": base.name,
                        "U": _fname(U), "g": _fname(g)})


# ---------------------------------------------------------------------------
# Euclidean (Lebesgue-reference) inequalities


def _lebesgue_entropy(rule, gv):
    return _entropy_rule(rule, gv)


def _euclidean_rhs(pot, rule, g, lam):
    X = rule.nodes
    gv = _values(g, X)
    n = pot.dim
    cstar, _ = conjugate_batch(pot, -lam * g.grad(X))
    M = _tilted(rule, gv, np.ones_like(gv))
    return -n * np.log(lam * np.e) * M + _tilted(rule, gv, cstar)


def _normalized_potential(potential, accuracy):
    m = build_measure(potential, accuracy)
    if abs(m.log_Z) > 1e-8:
        raise PreconditionError(f"potential is not normalized (log Z = {m.log_Z:.3e})")
    return potential


def verify_euclidean_lsi(potential, g, lambda_scale=1.0, accuracy=1e-10):
    """Ent_dx(e^g) <= -n log(lam e) int e^g dx + int phi*(-lam grad g) e^g dx."""
    if hasattr(potential, "fine"):
        potential = potential.potential
    pot = _normalized_potential(potential, accuracy)
    lam = float(lambda_scale)
    if not lam > 0:
        raise ValueError("lambda_scale must be positive")
    rules = lebesgue_rule(g, pot.dim, accuracy)

    def side(rule):
        gv = _values(g, rule.nodes)
        return _lebesgue_entropy(rule, gv), _euclidean_rhs(pot, rule, g, lam)

    (lhs, rhs), err = _on_both((rules.fine, rules.coarse), side)
    return make_report("euclidean", lhs, rhs, err, None,
                       {"lambda": lam, "box_radius": rules.radius, "potential": pot.name,
                        "g": _fname(g)})


def verify_homogeneous_elsi(C_potential, q, g, accuracy=1e-10):
    """Ent_dx(e^g) <= (n/p) M log(p K / (n e^{p-1} L^{p/n} M)), M = int e^g, K = int C*(-grad g) e^g."""
    Cp = C_potential
    if abs(float(Cp.value(np.zeros((1, Cp.dim)))[0])) > 1e-12:
        raise PreconditionError("homogeneous potential must vanish at the origin")
    qd = detect_homogeneity(Cp)
    if qd is None or abs(qd - q) > 1e-6 * q:
        raise PreconditionError(f"potential is not {q}-homogeneous (detected {qd})")
    n = Cp.dim
    p = q / (q - 1.0)
    L = build_measure(Cp, accuracy).Z
    rules = lebesgue_rule(g, n, accuracy)

    def side(rule):
        X = rule.nodes
        gv = _values(g, X)
        M = _tilted(rule, gv, np.ones_like(gv))
        K = _tilted(rule, gv, conjugate_batch(Cp, -g.grad(X))[0])
        rhs = (n / p) * M * np.log(p / (n * np.exp(p - 1) * L ** (p / n)) * K / M)
        return _lebesgue_entropy(rule, gv), rhs, M, K

    (lhs, rhs, M, K), err = _on_both((rules.fine, rules.coarse), side)
    # the closed form must equal the infimum over lambda of the general rhs
    phi = Cp.with_shift(np.log(L))
    lam0 = (n * M / (p * K)) ** (1.0 / p)
    res = minimize_scalar(lambda t: _euclidean_rhs(phi, rules.fine, g, t),
                          bracket=(0.5 * lam0, lam0, 2.0 * lam0), method="golden",
                          options={"xtol": 1e-10})
    inf_val = float(res.fun)
    agree = abs(inf_val - rhs) / max(1e-300, abs(rhs) if abs(rhs) > 0 else 1.0)
    meta = {"q": q, "p": p, "L": L, "M": M, "K": K, "lambda_opt": float(res.x), "lambda0": lam0,
            "lambda_inf_rhs": inf_val, "lambda_inf_rel_gap": agree,
            "lambda_inf_agrees": bool(agree <= 1e-6), "g": _fname(g)}
    return make_report("homogeneous", lhs, rhs, err, None, meta)


# ---------------------------------------------------------------------------
# non-tight inequality


NONTIGHT_A_LADDER = (0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 7.0, 9.0, 11.0, 15.0)


@dataclass(frozen=True)
class NontightConstants:
    alpha: float
    lam: float
    A: float
    C1: float
    C2: float
    C3: float
    psi_alpha: float
    meta: dict = field(default_factory=dict)


def _raw_potential(measure):
    pot = measure.potential.with_shift(measure.raw_shift)
    if abs(float(pot.value(np.zeros((1, pot.dim)))[0])) > 1e-12:
        raise PreconditionError("non-tight inequality needs Phi(0) = 0")
    return pot


def nontight_A(Phi, radius=20.0, count=401, ladder=NONTIGHT_A_LADDER):
    """Smallest ladder A with x.grad Phi <= (A + 1) Phi on the probe grid."""
    X = probe_points(Phi.dim, radius, count)
    xg = np.sum(X * Phi.grad(X), axis=1)
    f = Phi.value(X)
    for A in ladder:
        if np.all(xg <= (A + 1) * f + 1e-12 * (1 + np.abs(xg))):
            return A
    return None


def _psi_probe(dim):
    r = np.geomspace(0.05, 50.0, 200)
    if dim == 1:
        return np.concatenate([r, -r])[:, None]
    ang = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    return (r[:, None, None] * dirs[None, :, :]).reshape(-1, 2)


def psi_alpha(Phi, alpha):
    """sup over the probe grid of (1-alpha) Phi*(x/(1-alpha)) / Phi*(x)."""
    Y = _psi_probe(Phi.dim)
    num, _ = conjugate_batch(Phi, Y / (1 - alpha))
    den, _ = conjugate_batch(Phi, Y)
    return float(np.max((1 - alpha) * num / den))


def log_exp_moment(Phi, Z, lam, accuracy=1e-10):
    """log int e^{Phi/lam} dmu_Phi via Lebesgue quadrature of e^{-(1 - 1/lam) Phi}."""
    a = 1.0 - 1.0 / lam
    h = functions.SmoothFunction(Phi.dim, lambda X: -a * Phi.value(X), lambda X: -a * Phi.grad(X))
    rules = lebesgue_rule(h, Phi.dim, accuracy)
    val = rules.fine.integrate(np.exp(h.value(rules.fine.nodes)))
    return float(np.log(val / Z))


def nontight_constants(measure, A=None, lam_step=1e-5, alpha_step=0.01, lam_cap=100.0):
    """(alpha, lambda, C1 = 4 alpha, C2 = 1/alpha, C3 = 1/2) for the non-tight inequality."""
    Phi = _raw_potential(measure)
    X = probe_points(Phi.dim, 20.0, 401 if Phi.dim == 1 else 81)
    if np.any(Phi.value(X) < -1e-12):
        raise PreconditionError("non-tight inequality needs Phi >= 0")
    psis = {a: psi_alpha(Phi, a) for a in (0.2, 0.1, 0.05)}
    dev = [abs(psis[a] - 1) for a in (0.2, 0.1, 0.05)]
    if not (dev[0] > dev[1] > dev[2] and dev[2] <= 0.25):
        raise PreconditionError(f"psi(alpha) does not tend to 1: {psis}")
    if A is None:
        A = nontight_A(Phi)
        if A is None:
            raise PreconditionError("no A with x.grad Phi <= (A+1) Phi on the ladder")
    Z = measure.Z
    kmax = int(round((lam_cap - 1.0) / lam_step))
    if log_exp_moment(Phi, Z, 1.0 + kmax * lam_step) > 1.0:
        raise PreconditionError(f"no feasible lambda below {lam_cap}")
    lo, hi = 1, kmax
    while lo < hi:
        mid = (lo + hi) // 2
        try:
            ok = log_exp_moment(Phi, Z, 1.0 + mid * lam_step) <= 1.0
        except PreconditionError:
            ok = False
        if ok:
            hi = mid
        else:
            lo = mid + 1
    lam = 1.0 + lo * lam_step
    alpha = None
    psi_val = None
    for k in range(1, int(round(1.0 / alpha_step))):
        a = k * alpha_step
        pa = psi_alpha(Phi, a)
        if (a + A * abs(pa - 1.0)) * lam <= 0.5:
            alpha, psi_val = a, pa
        else:
            break
    if alpha is None:
        raise PreconditionError("no feasible alpha on the ladder")
    return NontightConstants(alpha, lam, float(A), 4 * alpha, 1.0 / alpha, 0.5, psi_val,
                             {"psi_limit_probe": psis, "lambda_step": lam_step,
                              "alpha_step": alpha_step})


def verify_nontight(measure, g, constants=None):
    """Ent(e^g) <= C1 int Phi*(C2 grad g) e^g dmu + C3 after shifting g to int e^g dmu = 1."""
    Phi = _raw_potential(measure)
    cst = constants or nontight_constants(measure)
    shift = -np.log(measure.fine.integrate(np.exp(_values(g, measure.fine.nodes))))

    def side(rule):
        X = rule.nodes
        gv = _values(g, X) + shift
        cost, _ = conjugate_batch(Phi, cst.C2 * g.grad(X))
        return _entropy_rule(rule, gv), cst.C1 * _tilted(rule, gv, cost) + cst.C3

    (lhs, rhs), err = _on_both(_rules(measure), side)
    return make_report("nontight", lhs, rhs, err, None,
                       {"alpha": cst.alpha, "lambda": cst.lam, "A": cst.A, "C1": cst.C1,
                        "C2": cst.C2, "C3": cst.C3, "g_shift": float(shift), "g": _fname(g)})


# ---------------------------------------------------------------------------
# Prekopa-Leindler on grids


def check_prekopa_leindler(u, v, w, a, tol=1e-9):
    """Hypothesis u(x)^a v(y)^b <= w(ax + by) on node pairs, then (int u)^a (int v)^b <= int w."""
    if not 0.0 < a < 1.0:
        raise ValueError("a must lie in (0, 1)")
    for f in (v, w):
        if (f.lo, f.hi, f.count) != (u.lo, u.hi, u.count):
            raise ValueError("Prekopa-Leindler triple must share one grid")
    for f in (u, v, w):
        if np.any(~np.isfinite(f.values)) or np.any(f.values < 0):
            raise ValueError("Prekopa-Leindler functions must be finite and nonnegative")
    b = 1.0 - a
    x = u.x
    XX, YY = np.meshgrid(x, x, indexing="ij")
    with np.errstate(divide="ignore"):
        lhs_pt = np.exp(a * np.log(u.values)[:, None] + b * np.log(v.values)[None, :])
    wv = np.interp(a * XX + b * YY, x, w.values, left=0.0, right=0.0)
    excess = lhs_pt - wv
    k = np.unravel_index(int(np.argmax(excess)), excess.shape)
    worst = float(excess[k])
    hyp_ok = worst <= tol
    Iu, Iv, Iw = (float(trapezoid(f.values, x)) for f in (u, v, w))
    lhs = Iu**a * Iv**b
    meta = {"a": a, "int_u": Iu, "int_v": Iv, "int_w": Iw, "hypothesis_holds": bool(hyp_ok),
            "hypothesis_max_excess": worst,
            "hypothesis_violations": int(np.count_nonzero(excess > tol))}
    witness = None if hyp_ok else [float(x[k[0]]), float(x[k[1]])]
    return make_report("prekopa_leindler", lhs, Iw, 0.0, witness, meta, hypothesis_ok=hyp_ok)
