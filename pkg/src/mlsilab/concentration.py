"""Monte Carlo check of product-measure concentration bounds.

The bound is 2 exp(-n C1 Phi(C2 lam / n)) above lam = n C3 and
2 exp(-C1 lam^2 / n) below. The constants come from a Herbst argument on the
H_phi inequality; see ``calibrate_constants``.
"""
import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq
from scipy.special import logsumexp

from .conjugate import _lower_hull
from .errors import PreconditionError
from .measure import sample_1d

WILSON_Z = 1.959963984540054
EXP_CUTOFF = 745.0


@dataclass(frozen=True, eq=False)
class ConcentrationBound:
    C1: float
    C2: float
    C3: float
    Phi: object
    meta: dict = field(default_factory=dict)

    def regime(self, lam, n):
        lam = np.asarray(lam, dtype=float)
        return np.where(lam > n * self.C3, "potential", "quadratic")

    def __call__(self, lam, n):
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        out = 2.0 * np.exp(-self.C1 * lam**2 / n)
        hi = lam > n * self.C3
        if np.any(hi):
            u = self.C2 * lam[hi] / n
            out[hi] = 2.0 * np.exp(-n * self.C1 * self.Phi.value(u))
        return np.minimum(out, 2.0)


def gross_bound(lam, Phi=None):
    """Herbst bound from the Gross inequality with constant 1/(2 lam): C1 = lam/2, C3 = inf."""
    return ConcentrationBound(lam / 2.0, 1.0, np.inf, Phi,
                              {"recipe": "gross", "lambda": lam, "implementation_defined": True})


class HerbstTransform:
    """kappa(theta) = theta int_0^theta Hbar(v)/v^2 dv and its Legendre transform.

    Tensorizing the H_phi inequality over coordinates with |d_i F| <= 1 gives
    log E e^{theta (F - EF)} <= n kappa(theta), hence tails below
    exp(-n kappa*(lam/n)). theta runs over a geometric grid so that kappa* is
    resolved at small and large arguments alike.
    """

    def __init__(self, profile, count=20001):
        self.profile = profile
        self.count = count
        self.theta_max = 4.0
        self._build()

    def _build(self):
        th = np.concatenate([[0.0], np.geomspace(1e-6, self.theta_max, self.count - 1)])
        h = np.empty_like(th)
        h[0] = 1.0 / (2 * self.profile.lam)
        h[1:] = self.profile.H_bar(th[1:]) / th[1:] ** 2
        self.theta = th
        self.kappa = th * cumulative_trapezoid(h, th, initial=0.0)
        self._hx, self._hv = _lower_hull(th, self.kappa)
        self._slopes = np.diff(self._hv) / np.diff(self._hx)

    def slope_max(self):
        return self._slopes[-1]

    def kappa_star(self, u_max, count=4001):
        """kappa* = sup_theta (theta u - kappa) on [0, u_max]; a lower bound (discrete sup)."""
        while self.slope_max() < u_max:
            self.theta_max *= 4
            self._build()
        u = np.linspace(0.0, u_max, count)
        k = np.searchsorted(self._slopes, u, side="left")
        return u, u * self._hx[k] - self._hv[k]


def _crossing(Phi, C2):
    """Positive root of Phi(C2 u) = u^2, or 0 when Phi(C2 u) >= u^2 near 0."""
    def h(u):
        return np.log(Phi.value(np.array([C2 * u]))[0]) - 2 * np.log(u)

    lo = 1e-6
    if h(lo) >= 0:
        return 0.0
    hi = 1.0
    while h(hi) < 0:
        hi *= 2
        if hi > 1e12:
            return np.inf
    return brentq(h, lo, hi, xtol=1e-14, rtol=1e-13)


def calibrate_constants(profile, B, max_halvings=60):
    """(C1, C2, C3) from an H_phi profile.

    C1 = lam/8 (the Herbst quadratic coefficient lam/2 deflated by 4). C2 is
    the largest of (1/coeff) 2^-k for which C1 Phi(C2 u) <= kappa*(u) on
    u >= C3 up to the underflow point, with C3 the crossing Phi(C2 u) = u^2
    (so the bound is continuous at lam = n C3). The quadratic branch
    C1 u^2 <= kappa*(u) is checked on [0, C3].
    """
    if B is None:
        raise PreconditionError("growth_B absent")
    Phi = profile.potential
    lam = profile.lam
    C1 = lam / 8.0
    herbst = HerbstTransform(profile)
    for k in range(max_halvings + 1):
        C2 = 2.0**-k / profile.coeff
        C3 = _crossing(Phi, C2)
        if not np.isfinite(C3):
            continue
        # u beyond which C1 Phi(C2 u) exceeds the exp underflow threshold
        u_top = max(1.0, C3)
        while C1 * Phi.value(np.array([C2 * u_top]))[0] < EXP_CUTOFF:
            u_top *= 2
        u, ks = herbst.kappa_star(u_top)
        quad = u <= C3
        need = np.where(quad, C1 * u**2, C1 * Phi.value(C2 * u))
        slack = ks - need
        if np.all(slack >= -1e-12 * (1 + np.abs(ks))):
            meta = {"recipe": "herbst-hphi", "implementation_defined": True,
                    "lambda": lam, "A": profile.A, "C": profile.C, "coeff": profile.coeff,
                    "B": B, "halvings": k, "u_checked": float(u_top),
                    "min_slack": float(slack.min())}
            return ConcentrationBound(C1, C2, C3, Phi, meta)
    raise PreconditionError("no C2 on the ladder dominates the Herbst bound")


def wilson_upper(k, N, z=WILSON_Z):
    k = np.asarray(k, dtype=float)
    p = k / N
    z2 = z * z
    centre = p + z2 / (2 * N)
    spread = z * np.sqrt(p * (1 - p) / N + z2 / (4 * N * N))
    return np.minimum(1.0, (centre + spread) / (1 + z2 / N))


def check_coordinate_lipschitz(F, n, seed=0, probes=64):
    """|F(x + h e_i) - F(x)| <= (1 + 1e-9)|h| on random probes."""
    rng = np.random.default_rng(seed)
    X = rng.normal(0.0, 2.0, size=(probes, n))
    base = F(X)
    for h in (1e-3, -1e-3, 0.5, -0.5, 2.0, -2.0):
        for i in range(n):
            Xh = X.copy()
            Xh[:, i] += h
            d = np.abs(F(Xh) - base)
            if np.any(d > (1 + 1e-9) * abs(h)):
                k = int(np.argmax(d))
                raise PreconditionError(
                    f"coordinate {i} increment {d[k]:.6g} exceeds |h| = {abs(h)}", X[k])


def sum_statistic(X):
    return X.sum(axis=1)


def smooth_max(tau=0.5):
    def F(X):
        return tau * logsumexp(X / tau, axis=1)
    F.name = f"smoothmax({tau:g})"
    return F


def default_lambda_grid(bound, n, count=25, floor=1e-3):
    """Uniform grid on [0, lam_max] with bound(lam_max) = floor."""
    hi = 1.0
    while bound(hi, n)[0] > floor:
        hi *= 2
    lo = 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if bound(mid, n)[0] > floor:
            lo = mid
        else:
            hi = mid
    return np.linspace(0.0, lo, count)


@dataclass(frozen=True, eq=False)
class ConcentrationResult:
    lambda_grid: np.ndarray
    counts: np.ndarray
    empirical: np.ndarray
    wilson_upper: np.ndarray
    bound: np.ndarray
    regime: np.ndarray
    samples: int
    n: int
    seed: int
    pilot_mean: float
    meta: dict = field(default_factory=dict)

    @property
    def holds(self):
        return bool(np.all(self.wilson_upper <= self.bound))

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "empirical", "wilson_upper", "bound", "regime"])
        for row in zip(self.lambda_grid, self.empirical, self.wilson_upper, self.bound, self.regime):
            w.writerow([repr(float(row[0])), repr(float(row[1])), repr(float(row[2])),
                        repr(float(row[3])), str(row[4])])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _draw(measure, ss, count, n):
    X = np.empty((count, n))
    for i, cs in enumerate(ss.spawn(n)):
        X[:, i] = sample_1d(measure, count, np.random.default_rng(cs))
    return X


def run_concentration(measure, F, n, bound, lambda_grid=None, samples=100_000, seed=0,
                      partitions=4):
    """Empirical two-sided tails of F - E F under mu^{n} against ``bound``.

    The sample budget is split across ``partitions`` independent streams,
    each with one stream per coordinate; E F is estimated on a separate pilot
    sample of the same size.
    """
    if samples < 10_000:
        raise ValueError("concentration runs need at least 10^4 samples")
    check_coordinate_lipschitz(F, n, seed)
    grid = default_lambda_grid(bound, n) if lambda_grid is None else np.asarray(lambda_grid, float)
    pilot_ss, main_ss = np.random.SeedSequence(seed).spawn(2)
    sizes = [samples // partitions + (1 if k < samples % partitions else 0) for k in range(partitions)]
    pilot = sum(F(_draw(measure, s, m, n)).sum() for s, m in zip(pilot_ss.spawn(partitions), sizes))
    mean = pilot / samples
    counts = np.zeros(grid.size, dtype=np.int64)
    for s, m in zip(main_ss.spawn(partitions), sizes):
        dev = np.abs(F(_draw(measure, s, m, n)) - mean)
        counts += np.count_nonzero(dev[:, None] >= grid[None, :], axis=0)
    emp = counts / samples
    return ConcentrationResult(grid, counts, emp, wilson_upper(counts, samples), bound(grid, n),
                               bound.regime(grid, n), samples, n, seed, float(mean),
                               {"partitions": partitions, "bound_meta": bound.meta,
                                "C1": bound.C1, "C2": bound.C2, "C3": bound.C3})
