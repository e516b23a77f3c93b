"""End-to-end construction of the cube-gated Taylor approximator.

Pipeline, per target f* with smoothness beta and a grouped cover of the
high-mass region S at cell side r = epsilon^(1/beta) / (2 d):

1. shift to f0 = f* + 2 (so local values live in [1, 3]),
2. a multi-output Taylor evaluator anchored at the cell centers,
3. per-cell gates that window each estimate to its own (fattened) cell,
4. within-group sums (groups have nonoverlapping gate supports),
5. a max over groups, and a final clamp into [-1, 1] that also undoes
   the +2 shift.

The gates saturate their value slot to [0, 4], which keeps every
intermediate in [0, 4] even where a far-away Taylor polynomial blows up;
inside the fattened cell the polynomial estimate is within epsilon of
f0 in [1, 3], so the saturation is inactive exactly where accuracy matters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np
from scipy.stats import qmc

from .covering import GroupedCover, LatticeCover
from .gaussian_design import EigenProfile, EllipsoidSet, membership, sample
from .net_blocks import (
    CubeSpec,
    TaylorSpec,
    build_clamp,
    build_filter,
    build_gate,
    build_group_sum,
    build_max,
    build_poly,
)
from .relu_net import NetworkSize, ReluNetwork, compose, identity_network, parallel, size_of
from .targets import HolderTarget, taylor_coefficients, taylor_polynomial

__all__ = [
    "ApproxCertificate",
    "BudgetExceeded",
    "tuned_cell_side",
    "build_approximator",
    "taylor_remainder_check",
    "measure_errors",
    "size_scaling_probe",
    "SizeScalingResult",
    "CoverRegion",
    "EllipsoidRegion",
    "region_sweep",
]


class BudgetExceeded(RuntimeError):
    """Raised when a cover is too large to assemble at desk scale."""


@dataclass(frozen=True)
class ApproxCertificate:
    """Measured approximation record for one built network."""

    epsilon: float
    tau: float
    measured_sup_on_S: float
    measured_l2: float
    l2_stderr: float
    size: NetworkSize
    cover_cells: int
    build_seconds: float

    def csv_row(self):
        return [
            self.epsilon,
            self.tau,
            self.measured_sup_on_S,
            self.measured_l2,
            self.l2_stderr,
            self.size.depth_L,
            self.size.max_weight_B,
            self.size.nonzeros_K,
            self.cover_cells,
            self.build_seconds,
        ]

    CSV_HEADER = [
        "epsilon",
        "tau",
        "sup_err",
        "l2_err",
        "l2_stderr",
        "L",
        "B",
        "K",
        "cells",
        "build_seconds",
    ]


def tuned_cell_side(d: int, beta: float, epsilon: float) -> float:
    """The cover side the construction is tuned for: epsilon^(1/beta) / (2 d)."""
    return epsilon ** (1.0 / beta) / (2.0 * d)


def build_approximator(
    target: HolderTarget,
    cover: GroupedCover,
    epsilon: float,
    max_cells: int = 20000,
) -> ReluNetwork:
    """Assemble the gated-Taylor network for the target over the given cover.

    Requires the cover side to match :func:`tuned_cell_side` (the tuning that
    makes the local Taylor remainder and the evaluator budget add up to at
    most epsilon on S) and the target's partial derivatives at every cell
    center.  Output range is contained in [-1, 1].
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    lattice = cover.cover
    d = lattice.dim
    if target.dim != d:
        raise ValueError("target dimension does not match the cover")
    expected = tuned_cell_side(d, target.beta, epsilon)
    if abs(lattice.side - expected) > 1e-9 * expected:
        raise ValueError(
            f"cover side {lattice.side} is not the tuned value {expected} "
            f"for epsilon={epsilon}, beta={target.beta}, d={d}"
        )
    m = lattice.n_cells
    if m == 0:
        raise ValueError("empty cover")
    if m > max_cells:
        raise BudgetExceeded(
            f"cover has {m} cells, exceeding the configured budget {max_cells}; "
            "increase epsilon or shrink the region"
        )
    centers = lattice.centers()
    tables: List[Dict] = []
    for k in range(m):
        coeffs = taylor_coefficients(target, centers[k])
        zero = (0,) * d
        coeffs[zero] = coeffs.get(zero, 0.0) + 2.0
        for alpha, c in coeffs.items():
            if sum(alpha) >= 1 and abs(c) > 1.0:
                if abs(c) > 1.0 + 1e-9:
                    raise ValueError(
                        f"Taylor coefficient {c} at cell {k} exceeds the unit bound; "
                        "target is not scaled to Hoelder norm <= 1"
                    )
                coeffs[alpha] = math.copysign(1.0, c)
        tables.append(coeffs)
    corners = np.abs(centers).max() + lattice.side / 2.0
    spec = TaylorSpec(
        anchors=centers,
        coefficients=tables,
        beta=target.beta,
        target_sup_error=epsilon / 2.0,
        radius=float(max(corners, 1e-6)),
    )
    poly = build_poly(spec)
    stage = parallel([identity_network(d, poly.depth), poly])
    cell_nets = [
        compose(build_gate(CubeSpec(centers[k], lattice.side)), build_filter(k + 1, d, m))
        for k in range(m)
    ]
    simul = compose(parallel(cell_nets), stage)
    groups = [[int(pos) + 1 for pos in g] for g in cover.groups]
    summed = compose(build_group_sum(groups, m), simul)
    maxed = compose(build_max(len(groups)), summed)
    return compose(build_clamp(), maxed)


def taylor_remainder_check(target: HolderTarget, xbar, x):
    """Remainder of the anchored Taylor polynomial and its smoothness bound.

    Returns (|f(x) - Taylor_xbar f(x)|, d^beta * ||x - xbar||_inf^beta); the
    remainder must not exceed the bound for targets with Hoelder norm <= 1.
    """
    xbar = np.asarray(xbar, dtype=np.float64).reshape(-1)
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    remainder = abs(float(target.evaluate(x)[0] - taylor_polynomial(target, xbar, x)[0]))
    gap = float(np.max(np.abs(x[0] - xbar)))
    bound = target.dim ** target.beta * gap ** target.beta
    return remainder, bound


# ---------------------------------------------------------------------------
# Regions for sup-error sweeps.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoverRegion:
    """The union of a cover's cells, used as the sup-error region."""

    lattice: LatticeCover

    def bounding_box(self):
        lo = self.lattice.origin + self.lattice.side * self.lattice.cells.min(axis=0)
        hi = self.lattice.origin + self.lattice.side * (self.lattice.cells.max(axis=0) + 1)
        return lo, hi

    def contains(self, xs) -> np.ndarray:
        return self.lattice.contains(xs)

    def anchor_points(self) -> np.ndarray:
        return self.lattice.centers()


@dataclass(frozen=True)
class EllipsoidRegion:
    """Thick-ellipsoid membership region in eigen-coordinates."""

    es: EllipsoidSet

    def bounding_box(self):
        lam = self.es.profile.lambdas
        hi = np.full(self.es.profile.d, self.es.r / 2.0)
        hi[: self.es.p] = lam[: self.es.p] * self.es.R
        return -hi, hi

    def contains(self, xs) -> np.ndarray:
        return membership(self.es, xs)

    def anchor_points(self) -> np.ndarray:
        return np.zeros((1, self.es.profile.d))


def region_sweep(region, n_points: int, seed: int) -> np.ndarray:
    """Low-discrepancy points inside the region (plus its anchor points).

    Sobol points in the bounding box filtered by membership; draws batches
    until enough points are accepted.
    """
    lo, hi = region.bounding_box()
    d = lo.shape[0]
    engine = qmc.Sobol(d=d, scramble=True, seed=seed)
    accepted = [region.anchor_points()]
    got = accepted[0].shape[0]
    attempts = 0
    while got < n_points and attempts < 16:
        raw = engine.random_base2(m=int(math.ceil(math.log2(max(n_points, 2)))) + 1)
        pts = lo + raw * (hi - lo)
        mask = region.contains(pts)
        pts = pts[mask]
        accepted.append(pts)
        got += pts.shape[0]
        attempts += 1
    out = np.concatenate(accepted, axis=0)
    if out.shape[0] < max(2, n_points // 8):
        raise RuntimeError("region too thin for the requested sweep density")
    return out[:n_points] if out.shape[0] > n_points else out


def measure_errors(
    net: ReluNetwork,
    target: HolderTarget,
    design,
    region,
    n_mc: int,
    sweep: int = 2048,
    *,
    tau: float = float("nan"),
    epsilon: float = float("nan"),
    cover_cells: int = 0,
    build_seconds: float = 0.0,
    seed: int = 0,
) -> ApproxCertificate:
    """Measured sup error on the region and Monte Carlo L2 error on the design.

    ``design`` is either an EigenProfile (sampled with the package sampler)
    or a callable (n, seed) -> points.  The sup error sweeps low-discrepancy
    points restricted to the region.
    """
    if n_mc < 10_000:
        raise ValueError("Monte Carlo size must be at least 10^4")
    pts = region_sweep(region, sweep, seed)
    sup = float(np.max(np.abs(net.evaluate_batch(pts)[:, 0] - target.evaluate(pts))))
    if isinstance(design, EigenProfile):
        xs = sample(design, n_mc, seed + 1)
    else:
        xs = design(n_mc, seed + 1)
    sq = (net.evaluate_batch(xs)[:, 0] - target.evaluate(xs)) ** 2
    l2 = float(sq.mean())
    stderr = float(sq.std(ddof=1) / math.sqrt(n_mc))
    return ApproxCertificate(
        epsilon=epsilon,
        tau=tau,
        measured_sup_on_S=sup,
        measured_l2=l2,
        l2_stderr=stderr,
        size=size_of(net),
        cover_cells=cover_cells,
        build_seconds=build_seconds,
    )


@dataclass(frozen=True)
class SizeScalingResult:
    """Least-squares fit of log K against log(1/epsilon)."""

    slope: float
    residual: float
    epsilons: tuple
    nonzeros: tuple
    cells: tuple


def size_scaling_probe(
    target: HolderTarget,
    points: np.ndarray,
    epsilons: Sequence[float],
    max_cells: int = 20000,
) -> SizeScalingResult:
    """Build the approximator at several accuracies over a point-cloud cover
    and fit the growth exponent of the nonzero count.

    The expected slope is p/beta where p is the effective dimension of the
    point cloud.  Requires at least four epsilons spanning a factor of 4.
    """
    eps = sorted(float(e) for e in epsilons)
    if len(eps) < 4 or eps[-1] / eps[0] < 4.0 - 1e-9:
        raise ValueError("need >= 4 epsilon values spanning at least 4x")
    from .covering import cover_points, group_cells

    ks, cells = [], []
    for e in eps:
        side = tuned_cell_side(target.dim, target.beta, e)
        grouped = group_cells(cover_points(points, side))
        net = build_approximator(target, grouped, e, max_cells=max_cells)
        ks.append(size_of(net).nonzeros_K)
        cells.append(grouped.cover.n_cells)
    xs = np.log(1.0 / np.array(eps))
    ys = np.log(np.array(ks, dtype=np.float64))
    coeffs = np.polyfit(xs, ys, 1)
    fit = np.polyval(coeffs, xs)
    residual = float(np.sqrt(np.mean((ys - fit) ** 2)))
    return SizeScalingResult(
        slope=float(coeffs[0]),
        residual=residual,
        epsilons=tuple(eps),
        nonzeros=tuple(ks),
        cells=tuple(cells),
    )
