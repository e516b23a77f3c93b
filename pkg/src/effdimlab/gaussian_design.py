"""Anisotropic Gaussian designs: sampling, thick-ellipsoid sets, tail bounds,
and the sample-size-dependent parameter schedules.

The design is N(0, Sigma) with Sigma = Q diag(lambda_i^2) Q^T.  Eigenvalue
profiles follow an exponential law lambda_i = mu exp(-theta i), a polynomial
law lambda_i = rho i^-omega, or an explicit list.  Sampling uses the
counter-based Philox generator so fixed seeds reproduce across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "EigenProfile",
    "EllipsoidSet",
    "Schedule",
    "sample",
    "membership",
    "prob_outside_bound",
    "tail_bound_chisq",
    "tail_bound_scalar",
    "schedule",
    "profile_from_config",
]


@dataclass(frozen=True)
class EigenProfile:
    """Eigenvalue sequence lambda_1 >= ... >= lambda_d > 0 with a decay tag."""

    d: int
    lambdas: np.ndarray
    law: str  # "exponential" | "polynomial" | "explicit"
    mu: Optional[float] = None
    theta: Optional[float] = None
    rho: Optional[float] = None
    omega: Optional[float] = None
    rotation: Optional[np.ndarray] = None

    def __post_init__(self):
        lambdas = np.asarray(self.lambdas, dtype=np.float64).reshape(-1)
        if lambdas.shape[0] != self.d:
            raise ValueError("lambda sequence must have length d")
        if np.any(lambdas <= 0.0):
            raise ValueError("eigenvalues must be positive")
        if np.any(np.diff(lambdas) > 1e-12):
            raise ValueError("eigenvalues must be nonincreasing")
        lambdas.setflags(write=False)
        object.__setattr__(self, "lambdas", lambdas)
        if self.law not in ("exponential", "polynomial", "explicit"):
            raise ValueError(f"unknown decay law {self.law!r}")
        if self.rotation is not None:
            q = np.asarray(self.rotation, dtype=np.float64)
            if q.shape != (self.d, self.d):
                raise ValueError("rotation must be d x d")
            if not np.allclose(q @ q.T, np.eye(self.d), atol=1e-10):
                raise ValueError("rotation must be orthogonal")
            q.setflags(write=False)
            object.__setattr__(self, "rotation", q)

    @classmethod
    def exponential(cls, d: int, mu: float, theta: float, rotation=None) -> "EigenProfile":
        lambdas = mu * np.exp(-theta * np.arange(1, d + 1))
        return cls(d=d, lambdas=lambdas, law="exponential", mu=mu, theta=theta,
                   rotation=rotation)

    @classmethod
    def polynomial(cls, d: int, rho: float, omega: float, rotation=None) -> "EigenProfile":
        if not omega > 1.0:
            raise ValueError("polynomial decay needs omega > 1")
        lambdas = rho * np.arange(1, d + 1, dtype=np.float64) ** (-omega)
        return cls(d=d, lambdas=lambdas, law="polynomial", rho=rho, omega=omega,
                   rotation=rotation)

    @classmethod
    def explicit(cls, lambdas, rotation=None) -> "EigenProfile":
        lambdas = np.asarray(lambdas, dtype=np.float64)
        return cls(d=lambdas.shape[0], lambdas=lambdas, law="explicit",
                   rotation=rotation)


@dataclass(frozen=True)
class EllipsoidSet:
    """Thick hyper-ellipsoid: ellipsoid of scale R in the leading p
    eigen-directions crossed with an r/2 slab in the remaining ones."""

    profile: EigenProfile
    R: float
    r: float
    p: int

    def __post_init__(self):
        if not (self.R > 0.0 and self.r > 0.0):
            raise ValueError("R and r must be positive")
        if not 1 <= self.p <= self.profile.d:
            raise ValueError(f"p={self.p} out of range 1..{self.profile.d}")

    @classmethod
    def from_radii(cls, profile: EigenProfile, R: float, r: float) -> "EllipsoidSet":
        """Choose p as the largest integer with lambda_p >= r / (2R)."""
        threshold = r / (2.0 * R)
        mask = profile.lambdas >= threshold
        if not mask[0]:
            raise ValueError("even the leading eigen-direction is thinner than a cell")
        p = int(np.max(np.nonzero(mask)[0]) + 1)
        return cls(profile=profile, R=R, r=r, p=p)


@dataclass(frozen=True)
class Schedule:
    """Sample-size-driven tuning of (r, R, p) and the class size (L, B, K)."""

    n: float
    beta: float
    eta: float
    law: str
    r: float
    R: float
    p_raw: float
    p: float
    p_truncated: bool
    exponent: float
    depth_L: float
    weight_B: float
    nonzeros_K: float


def sample(profile: EigenProfile, n: int, seed: int) -> np.ndarray:
    """n i.i.d. draws of x = Q diag(lambda) z with z standard normal.

    Philox (counter-based) keyed by the seed: fixed seeds give bit-identical
    output across runs and platforms.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    gen = np.random.Generator(np.random.Philox(key=seed))
    z = gen.standard_normal((n, profile.d))
    x = z * profile.lambdas
    if profile.rotation is not None:
        x = x @ profile.rotation.T
    return x


def membership(es: EllipsoidSet, xs) -> np.ndarray:
    """Boolean membership of each row of xs in the thick ellipsoid."""
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    prof = es.profile
    z = xs @ prof.rotation if prof.rotation is not None else xs
    lam = prof.lambdas
    quad = (z[:, : es.p] ** 2 / lam[: es.p] ** 2).sum(axis=1)
    ok = quad <= es.R ** 2
    if es.p < prof.d:
        ok &= np.all(np.abs(z[:, es.p:]) <= es.r / 2.0, axis=1)
    return ok


def tail_bound_chisq(p: int, t: float) -> float:
    """Tail bound ((2t^2+p)/p)^{p/2} exp(-t^4/(2t^2+p)) for ||N(0, I_p)|| > t."""
    if p < 1:
        raise ValueError("p must be a positive integer")
    if not t > 0.0:
        raise ValueError("t must be positive")
    t2 = t * t
    return ((2.0 * t2 + p) / p) ** (p / 2.0) * math.exp(-(t2 * t2) / (2.0 * t2 + p))


def tail_bound_scalar(t: float) -> float:
    """Tail bound exp(-t^2/2) for |N(0,1)| > t."""
    if not t > 0.0:
        raise ValueError("t must be positive")
    return math.exp(-0.5 * t * t)


def prob_outside_bound(es: EllipsoidSet) -> float:
    """Explicit union bound on P(X outside the thick ellipsoid).

    Sum of the chi-square term at radius R over the leading p directions and
    one scalar tail term exp(-r^2 / (8 lambda_j^2)) per slab direction.
    Valid (and required) only when R^2 > p.
    """
    if not es.R ** 2 > es.p:
        raise ValueError("bound invalid: requires R^2 > p")
    total = tail_bound_chisq(es.p, es.R)
    lam = es.profile.lambdas
    for j in range(es.p, es.profile.d):
        total += math.exp(-es.r ** 2 / (8.0 * lam[j] ** 2))
    return total


def schedule(profile: EigenProfile, n: float, beta: float, eta: float = 0.0) -> Schedule:
    """Tuning of (r, R, p) and the reported class size for sample size n.

    Exponential law:  r = n^{-(1-eta)/(2 beta + sqrt(log n / theta))},
    R = log n, theta p = log(2 mu R / r), risk exponent
    2 beta (1-eta) / (2 beta + sqrt(log n / theta)).

    Polynomial law: with kappa = (1 + 1/omega)/omega,
    r = n^{-1/(2 beta + n^kappa)}, R = n^{1/(2 omega beta + omega n^kappa)},
    p = (2 rho R / r)^{1/omega}, exponent 2 beta / (2 beta + n^kappa).

    The reported (L, B, K) evaluate the displayed class-size formulas with
    unit constants and shape exponent s = 1; p is truncated at d with a flag.
    """
    if n < 3:
        raise ValueError("schedules need n >= 3")
    if not beta > 0.0:
        raise ValueError("beta must be positive")
    logn = math.log(n)
    if profile.law == "exponential":
        theta = profile.theta
        mu = profile.mu
        root = math.sqrt(logn / theta)
        denom = 2.0 * beta + root
        r = n ** (-(1.0 - eta) / denom)
        R = logn
        p_raw = math.log(2.0 * mu * R / r) / theta
        exponent = 2.0 * beta * (1.0 - eta) / denom
        weight_B = n ** (beta / denom) * logn ** beta
        nonzeros_K = n ** (root / denom)
    elif profile.law == "polynomial":
        omega = profile.omega
        rho = profile.rho
        kappa = (1.0 + 1.0 / omega) / omega
        nk = n ** kappa
        r = n ** (-1.0 / (2.0 * beta + nk))
        R = n ** (1.0 / (2.0 * omega * beta + omega * nk))
        p_raw = (2.0 * rho * R / r) ** (1.0 / omega)
        exponent = 2.0 * beta / (2.0 * beta + nk)
        weight_B = n ** ((1.0 + 1.0 / omega) * beta / (2.0 * beta + nk))
        nonzeros_K = n ** ((1.0 + 1.0 / omega) * n ** (kappa / (2.0 * beta + nk))
                           / (4.0 * beta + 2.0 * nk))
    else:
        raise ValueError("schedules need an exponential or polynomial decay law")
    truncated = p_raw > profile.d
    return Schedule(
        n=n,
        beta=beta,
        eta=eta,
        law=profile.law,
        r=r,
        R=R,
        p_raw=p_raw,
        p=min(p_raw, float(profile.d)),
        p_truncated=truncated,
        exponent=exponent,
        depth_L=float(profile.d),
        weight_B=weight_B,
        nonzeros_K=nonzeros_K,
    )


def profile_from_config(doc: dict) -> EigenProfile:
    """Build a profile from its JSON description.

    {"decay": "exp", "mu": .., "theta": .., "d": ..} or
    {"decay": "poly", "rho": .., "omega": .., "d": ..} or
    {"decay": "explicit", "lambdas": [..]}.
    """
    decay = doc.get("decay")
    if decay == "exp":
        return EigenProfile.exponential(d=int(doc["d"]), mu=float(doc["mu"]),
                                        theta=float(doc["theta"]))
    if decay == "poly":
        return EigenProfile.polynomial(d=int(doc["d"]), rho=float(doc["rho"]),
                                       omega=float(doc["omega"]))
    if decay == "explicit":
        return EigenProfile.explicit(np.asarray(doc["lambdas"], dtype=np.float64))
    raise ValueError(f"unknown decay kind {decay!r}")
