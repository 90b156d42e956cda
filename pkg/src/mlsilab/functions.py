"""Smooth test functions g with value, gradient and Hessian oracles.

All oracles act on point arrays of shape (N, d) and return shapes (N,),
(N, d) and (N, d, d).
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._util import as_points


@dataclass(frozen=True, eq=False)
class SmoothFunction:
    dim: int
    value_fn: Callable
    grad_fn: Callable
    hess_fn: Optional[Callable] = None
    name: str = "g"
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.value(x)

    def value(self, x):
        return self.value_fn(as_points(x, self.dim))

    def grad(self, x):
        return self.grad_fn(as_points(x, self.dim))

    def hess(self, x):
        X = as_points(x, self.dim)
        if self.hess_fn is None:
            return _fd_hess(self.grad_fn, X)
        return self.hess_fn(X)

    def __add__(self, other):
        if not isinstance(other, SmoothFunction):
            return self + constant(float(other), self.dim)
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return SmoothFunction(
            self.dim,
            lambda X: self.value_fn(X) + other.value_fn(X),
            lambda X: self.grad_fn(X) + other.grad_fn(X),
            lambda X: self.hess(X) + other.hess(X),
            name=f"({self.name}+{other.name})",
        )

    __radd__ = __add__

    def __mul__(self, c):
        c = float(c)
        return SmoothFunction(
            self.dim,
            lambda X: c * self.value_fn(X),
            lambda X: c * self.grad_fn(X),
            lambda X: c * self.hess(X),
            name=f"{c:g}*{self.name}",
        )

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other if isinstance(other, SmoothFunction) else -float(other))


def _fd_hess(grad_fn, X, h=1e-5):
    n, d = X.shape
    H = np.empty((n, d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        H[:, :, i] = (grad_fn(X + e) - grad_fn(X - e)) / (2 * h)
    return 0.5 * (H + np.swapaxes(H, 1, 2))


def constant(c, dim=1):
    c = float(c)
    return SmoothFunction(
        dim,
        lambda X: np.full(len(X), c),
        lambda X: np.zeros_like(X),
        lambda X: np.zeros((len(X), dim, dim)),
        name=f"const({c:g})",
        params={"family": "constant", "c": c},
    )


def linear(theta, offset=0.0):
    """g(x) = theta . x + offset."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    d = theta.size
    return SmoothFunction(
        d,
        lambda X: X @ theta + offset,
        lambda X: np.broadcast_to(theta, X.shape).copy(),
        lambda X: np.zeros((len(X), d, d)),
        name=f"linear({theta.tolist()})",
        params={"family": "linear", "theta": theta.tolist(), "offset": float(offset)},
    )


def bump(amplitude, center, width):
    """Gaussian bump amplitude * exp(-|x - center|^2 / (2 width^2))."""
    c = np.atleast_1d(np.asarray(center, dtype=float))
    d = c.size
    a, w = float(amplitude), float(width)

    def val(X):
        return a * np.exp(-np.sum((X - c) ** 2, axis=1) / (2 * w * w))

    def grad(X):
        return -(X - c) / (w * w) * val(X)[:, None]

    def hess(X):
        u = X - c
        v = val(X)[:, None, None]
        return v * (u[:, :, None] * u[:, None, :] / w**4 - np.eye(d) / (w * w))

    return SmoothFunction(d, val, grad, hess, name=f"bump({a:.3g},{c.tolist()},{w:.3g})",
                          params={"family": "bump", "amplitude": a,
                                  "center": c.tolist(), "width": w})


def poly_bump(coeffs, amplitude, center, width):
    """1-D polynomial in the scaled variable times a Gaussian bump."""
    coeffs = np.asarray(coeffs, dtype=float)
    c, w = float(center), float(width)
    b = bump(amplitude, c, w)
    P = np.polynomial.Polynomial(coeffs)
    dP, d2P = P.deriv(), P.deriv(2)

    def val(X):
        t = (X[:, 0] - c) / w
        return P(t) * b.value_fn(X)

    def grad(X):
        t = (X[:, 0] - c) / w
        bv = b.value_fn(X)
        return ((dP(t) / w) * bv + P(t) * b.grad_fn(X)[:, 0])[:, None]

    def hess(X):
        t = (X[:, 0] - c) / w
        bv = b.value_fn(X)
        bg = b.grad_fn(X)[:, 0]
        bh = b.hess_fn(X)[:, 0, 0]
        return (d2P(t) / w**2 * bv + 2 * dP(t) / w * bg + P(t) * bh)[:, None, None]

    return SmoothFunction(1, val, grad, hess, name="polybump",
                          params={"family": "poly_bump", "coeffs": coeffs.tolist(),
                                  "amplitude": float(amplitude), "center": c, "width": w})


def sine(amplitude, dim=1):
    """amplitude * sum_i sin(x_i); bounded with oscillation 2*|amplitude|*dim."""
    a = float(amplitude)
    return SmoothFunction(
        dim,
        lambda X: a * np.sum(np.sin(X), axis=1),
        lambda X: a * np.cos(X),
        lambda X: np.einsum("ni,ij->nij", -a * np.sin(X), np.eye(dim)),
        name=f"{a:g}*sin",
        params={"family": "sine", "amplitude": a},
    )


def negative_potential(potential, scale=1.0, center=None, offset=0.0):
    """g(x) = -scale * phi(x - center) + offset, the Euclidean-LSI extremals."""
    d = potential.dim
    xb = np.zeros(d) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
    b = float(scale)
    return SmoothFunction(
        d,
        lambda X: -b * potential.value(X - xb) + offset,
        lambda X: -b * potential.grad(X - xb),
        lambda X: -b * potential.hess(X - xb),
        name=f"-{b:g}*phi(x-{xb.tolist()})",
        params={"family": "negative_potential", "scale": b,
                "center": xb.tolist(), "offset": float(offset)},
    )


def random_bumps(count, seed=0, amplitude=(-0.5, 0.5), width=(0.3, 2.0),
                 center=(-2.0, 2.0), dim=1):
    """Deterministic family of random bumps used by the randomized suites."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        a = rng.uniform(*amplitude)
        w = rng.uniform(*width)
        c = rng.uniform(*center, size=dim)
        out.append(bump(a, c, w))
    return out
