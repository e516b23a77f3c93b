"""Test functions with declared smoothness and closed-form partial derivatives.

Each target carries its smoothness degree beta, a working-region radius, and
a declared Hoelder-norm certificate: the analytic construction bounds every
partial derivative up to floor(beta) and the top-order difference quotient,
and the amplitude is rescaled so the declared norm stays below 1.  The
certificate is conservative (numeric suprema use safety margins); tests
back it with sampled quotient checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np
from numpy.polynomial import hermite_e
from numpy.polynomial import polynomial as npoly

__all__ = [
    "HolderTarget",
    "make_target",
    "embed_target",
    "taylor_coefficients",
    "taylor_polynomial",
    "all_multi_indices",
    "LIBRARY",
]


@dataclass(frozen=True)
class HolderTarget:
    """A smooth test function with vectorized evaluation and exact partials."""

    name: str
    dim: int
    beta: float
    region_radius: float
    declared_norm: float
    _evaluate: Callable[[np.ndarray], np.ndarray]
    _partial: Callable[[Tuple[int, ...], np.ndarray], np.ndarray]

    def evaluate(self, xs) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        if xs.shape[1] != self.dim:
            raise ValueError(f"target expects dimension {self.dim}")
        return self._evaluate(xs)

    def partial(self, alpha: Tuple[int, ...], xs) -> np.ndarray:
        """Evaluate the mixed partial d^alpha f."""
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        if len(alpha) != self.dim or any(a < 0 for a in alpha):
            raise ValueError(f"bad multi-index {alpha}")
        if sum(alpha) == 0:
            return self._evaluate(xs)
        return self._partial(tuple(alpha), xs)

    @property
    def degree(self) -> int:
        return int(math.floor(self.beta))


def all_multi_indices(d: int, max_degree: int):
    """Multi-indices with 0 <= |alpha| <= max_degree, graded lex order."""
    out = []

    def rec(prefix, remaining):
        if len(prefix) == d:
            out.append(tuple(prefix))
            return
        for a in range(remaining + 1):
            rec(prefix + [a], remaining - a)

    rec([], max_degree)
    out.sort(key=lambda a: (sum(a), a))
    return out


def taylor_coefficients(target: HolderTarget, xbar) -> Dict[Tuple[int, ...], float]:
    """Coefficients d^alpha f(xbar) / alpha! for |alpha| <= floor(beta)."""
    xbar = np.asarray(xbar, dtype=np.float64).reshape(1, -1)
    coeffs = {}
    for alpha in all_multi_indices(target.dim, target.degree):
        fact = 1.0
        for a in alpha:
            fact *= math.factorial(a)
        coeffs[alpha] = float(target.partial(alpha, xbar)[0]) / fact
    return coeffs


def taylor_polynomial(target: HolderTarget, xbar, xs) -> np.ndarray:
    """Degree-floor(beta) Taylor polynomial of the target around xbar."""
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    xbar = np.asarray(xbar, dtype=np.float64).reshape(-1)
    out = np.zeros(xs.shape[0])
    for alpha, c in taylor_coefficients(target, xbar).items():
        term = np.full(xs.shape[0], c)
        for i, a in enumerate(alpha):
            if a:
                term = term * (xs[:, i] - xbar[i]) ** a
        out += term
    return out


# ---------------------------------------------------------------------------
# Norm certificates.
# ---------------------------------------------------------------------------

def _holder_norm_bound(sup_bound, d: int, beta: float) -> float:
    """Conservative Hoelder-norm bound from per-order sup bounds.

    ``sup_bound(alpha)`` bounds sup |d^alpha f| over the region.  The
    difference quotient of a top-order partial is bounded through its
    Lipschitz constant L and magnitude C via L^gamma (2C)^(1-gamma) with
    gamma = beta - floor(beta) (plain 2C when beta is an integer).
    """
    q = int(math.floor(beta))
    gamma = beta - q
    sup_part = 0.0
    for alpha in all_multi_indices(d, q):
        sup_part = max(sup_part, sup_bound(alpha))
    quot_part = 0.0
    for alpha in all_multi_indices(d, q):
        if sum(alpha) != q:
            continue
        c = sup_bound(alpha)
        lip = sum(
            sup_bound(tuple(a + (1 if i == j else 0) for j, a in enumerate(alpha)))
            for i in range(d)
        )
        if gamma == 0.0:
            quot_part = max(quot_part, 2.0 * c)
        elif lip == 0.0:
            quot_part = max(quot_part, 0.0)
        else:
            quot_part = max(quot_part, lip ** gamma * (2.0 * c) ** (1.0 - gamma))
    return sup_part + quot_part


def _hermite_gauss_sup(order: int) -> float:
    """sup_u |He_order(u) exp(-u^2/2)| via a dense grid with safety margin."""
    u = np.linspace(-12.0, 12.0, 48001)
    coeffs = np.zeros(order + 1)
    coeffs[order] = 1.0
    vals = np.abs(hermite_e.hermeval(u, coeffs)) * np.exp(-0.5 * u * u)
    return float(vals.max()) * 1.001


# ---------------------------------------------------------------------------
# Families.
# ---------------------------------------------------------------------------

def _constant(d: int, beta: float, radius: float, value: float) -> HolderTarget:
    def ev(xs):
        return np.full(xs.shape[0], value)

    def par(alpha, xs):
        return np.zeros(xs.shape[0])

    return HolderTarget("constant", d, beta, radius, abs(value), ev, par)


def _linear(d: int, beta: float, radius: float) -> HolderTarget:
    weights = np.array([1.0 / (i + 2.0) for i in range(d)])

    def sup_bound(alpha, w=weights, radius=radius):
        total = sum(alpha)
        if total == 0:
            return float(np.abs(w).sum() * radius)
        if total == 1:
            i = alpha.index(1)
            return float(abs(w[i]))
        return 0.0

    raw = _holder_norm_bound(sup_bound, d, beta)
    amp = 0.95 / raw

    def ev(xs, w=weights * amp):
        return xs @ w

    def par(alpha, xs, w=weights * amp):
        if sum(alpha) == 1:
            return np.full(xs.shape[0], w[alpha.index(1)])
        return np.zeros(xs.shape[0])

    return HolderTarget("linear", d, beta, radius, 0.95, ev, par)


def _sine(d: int, beta: float, radius: float) -> HolderTarget:
    freq = np.array([1.0 + 0.5 * i for i in range(d)])
    phase = 0.3

    def sup_bound(alpha, k=freq):
        return float(np.prod(k ** np.array(alpha)))

    raw = _holder_norm_bound(sup_bound, d, beta)
    amp = 0.95 / raw

    def ev(xs, k=freq, a=amp):
        return a * np.sin(xs @ k + phase)

    def par(alpha, xs, k=freq, a=amp):
        order = sum(alpha)
        scale = a * float(np.prod(k ** np.array(alpha)))
        return scale * np.sin(xs @ k + phase + order * math.pi / 2.0)

    return HolderTarget("sine", d, beta, radius, 0.95, ev, par)


def _bump(d: int, beta: float, radius: float) -> HolderTarget:
    center = np.array([0.1 * ((i % 3) - 1) for i in range(d)])
    width = 0.6

    sup_cache = {}

    def sup_bound(alpha, s=width):
        total = 1.0
        for a in alpha:
            if a not in sup_cache:
                sup_cache[a] = _hermite_gauss_sup(a)
            total *= sup_cache[a] / s ** a
        return total

    raw = _holder_norm_bound(sup_bound, d, beta)
    amp = 0.95 / raw

    def ev(xs, c=center, s=width, a=amp):
        u = (xs - c) / s
        return a * np.exp(-0.5 * (u * u).sum(axis=1))

    def par(alpha, xs, c=center, s=width, a=amp):
        u = (xs - c) / s
        out = a * np.exp(-0.5 * (u * u).sum(axis=1))
        for i, k in enumerate(alpha):
            if k:
                coeffs = np.zeros(k + 1)
                coeffs[k] = 1.0
                out = out * ((-1.0) ** k) * hermite_e.hermeval(u[:, i], coeffs) / s ** k
        return out

    return HolderTarget("bump", d, beta, radius, 0.95, ev, par)


def _poly(d: int, beta: float, radius: float) -> HolderTarget:
    # per-coordinate cubics with distinct shapes
    per_coord = [np.array([0.1, 0.4, -0.3, 0.2 / (i + 1.0)]) for i in range(d)]
    grid = np.linspace(-radius, radius, 4001)

    def sup_bound(alpha, polys=per_coord):
        total = 1.0
        for i, a in enumerate(alpha):
            der = npoly.polyder(polys[i], a) if a else polys[i]
            if len(der) == 0:
                return 0.0
            total *= float(np.abs(npoly.polyval(grid, der)).max())
        return total

    raw = _holder_norm_bound(sup_bound, d, beta)
    amp = 0.95 / raw

    def ev(xs, polys=per_coord, a=amp):
        out = np.full(xs.shape[0], a)
        for i in range(d):
            out = out * npoly.polyval(xs[:, i], polys[i])
        return out

    def par(alpha, xs, polys=per_coord, a=amp):
        out = np.full(xs.shape[0], a)
        for i, k in enumerate(alpha):
            der = npoly.polyder(polys[i], k) if k else polys[i]
            out = out * (npoly.polyval(xs[:, i], der) if len(der) else 0.0)
        return out

    return HolderTarget("poly", d, beta, radius, 0.95, ev, par)


_FAMILIES = {
    "constant": _constant,
    "linear": _linear,
    "sine": _sine,
    "bump": _bump,
    "poly": _poly,
}

LIBRARY = ("sine", "bump", "poly")


def make_target(kind: str, d: int, beta: float, region_radius: float = 1.0,
                **kwargs) -> HolderTarget:
    """Instantiate a library target rescaled to Hoelder norm <= 0.95."""
    if kind not in _FAMILIES:
        raise ValueError(f"unknown target family {kind!r}; choose from {sorted(_FAMILIES)}")
    if kind == "constant":
        return _constant(d, beta, region_radius, kwargs.get("value", 0.3))
    return _FAMILIES[kind](d, beta, region_radius)


def embed_target(target: HolderTarget, ambient_d: int) -> HolderTarget:
    """Lift a target to a higher ambient dimension (depends on leading coords)."""
    if ambient_d < target.dim:
        raise ValueError("ambient dimension must not shrink")
    if ambient_d == target.dim:
        return target
    inner = target.dim

    def ev(xs):
        return target.evaluate(xs[:, :inner])

    def par(alpha, xs):
        if any(alpha[i] for i in range(inner, ambient_d)):
            return np.zeros(xs.shape[0])
        return target.partial(tuple(alpha[:inner]), xs[:, :inner])

    return HolderTarget(
        f"{target.name}@{ambient_d}d",
        ambient_d,
        target.beta,
        target.region_radius,
        target.declared_norm,
        ev,
        par,
    )
