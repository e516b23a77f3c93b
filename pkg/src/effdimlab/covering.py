"""Hypercube lattice covers, disjoint grouping, and box-counting dimension.

Cells live on the fixed lattice ``origin + side * [v, v+1)`` indexed by
integer vectors v.  Restricting to a fixed lattice keeps covering numbers
exactly computable and makes the greedy mass-retention rule optimal among
unions of lattice cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

__all__ = [
    "LatticeCover",
    "GroupedCover",
    "EffDimEstimate",
    "cover_points",
    "cover_ellipsoid_set",
    "group_cells",
    "estimate_effective_dim",
    "ellipsoid_cover_bound",
    "cover_rows",
]


@dataclass(frozen=True)
class LatticeCover:
    """A set of occupied lattice cells of side ``side`` anchored at ``origin``.

    ``cells`` is an (n, d) int array of unique lattice indices in
    lexicographic order; ``masses`` optionally carries the empirical point
    mass per cell (same order).
    """

    side: float
    origin: np.ndarray
    cells: np.ndarray
    masses: Optional[np.ndarray] = None

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=np.float64).reshape(-1)
        cells = np.asarray(self.cells, dtype=np.int64)
        if cells.ndim != 2 or cells.shape[1] != origin.shape[0]:
            raise ValueError("cells must be an (n, d) index array matching origin")
        if not self.side > 0.0:
            raise ValueError("cell side must be positive")
        origin.setflags(write=False)
        cells.setflags(write=False)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "cells", cells)
        if self.masses is not None:
            masses = np.asarray(self.masses, dtype=np.float64)
            if masses.shape != (cells.shape[0],):
                raise ValueError("masses must align with cells")
            masses.setflags(write=False)
            object.__setattr__(self, "masses", masses)

    @property
    def dim(self) -> int:
        return self.origin.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    def centers(self) -> np.ndarray:
        return self.origin + self.side * (self.cells + 0.5)

    def contains(self, xs) -> np.ndarray:
        """Boolean mask: which rows of xs fall in an occupied cell."""
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        idx = np.floor((xs - self.origin) / self.side).astype(np.int64)
        occupied = {tuple(v) for v in self.cells}
        return np.array([tuple(v) in occupied for v in idx])


@dataclass(frozen=True)
class GroupedCover:
    """A lattice cover with its cells partitioned into far-apart classes.

    Within each class any two distinct cells have lattice indices differing
    by at least 2 in some coordinate, hence set distance >= side.
    ``groups`` lists positions into ``cover.cells``.
    """

    cover: LatticeCover
    groups: List[np.ndarray]


@dataclass(frozen=True)
class EffDimEstimate:
    """Box-counting effective dimension at scale r after discarding mass tau."""

    r: float
    tau: float
    n_cells: int
    p_hat: float
    retained_mass: float


def _lattice_bin(points: np.ndarray, side: float, origin) -> np.ndarray:
    return np.floor((points - origin) / side).astype(np.int64)


def _robust_ceil(x: float) -> int:
    # snap values within 1e-9 relative of an integer downward so exact
    # tilings don't grow a spurious one-ulp sliver cell
    return max(1, int(math.ceil(x - 1e-9 * abs(x) - 1e-12)))


def cover_points(points, r: float) -> LatticeCover:
    """Occupied lattice cells (origin 0) of the given point set, with masses."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("need a nonempty (n, d) point array")
    if not r > 0.0:
        raise ValueError("cell side must be positive")
    origin = np.zeros(points.shape[1])
    idx = _lattice_bin(points, r, origin)
    cells, counts = np.unique(idx, axis=0, return_counts=True)
    masses = counts / points.shape[0]
    return LatticeCover(side=r, origin=origin, cells=cells, masses=masses)


def ellipsoid_cover_bound(lambdas, R: float, r: float, p: int) -> float:
    """Product bound (2R/r)^p * prod_{i<=p} lambda_i on the cell count."""
    lambdas = np.asarray(lambdas, dtype=np.float64)
    return float((2.0 * R / r) ** p * np.prod(lambdas[:p]))


def cover_ellipsoid_set(profile, R: float, r: float, p: int) -> LatticeCover:
    """Enumerate the lattice cells covering the thick ellipsoid set.

    The set lives in eigen-coordinates (the profile's rotation must be the
    identity): an ellipsoid sum_{i<=p} z_i^2 / lambda_i^2 <= R^2 over the
    leading p axes crossed with the slab |z_j| <= r/2 elsewhere.  Ellipsoid
    axes use a lattice anchored at -lambda_i R (tight packing); each slab
    axis is anchored at -r/2 so a single cell layer suffices.  A candidate
    cell is kept iff its closest point to the origin in the Lambda^{-1}
    metric lies inside the ellipsoid (exact for boxes, coordinatewise).
    """
    lambdas = np.asarray(profile.lambdas, dtype=np.float64)
    d = lambdas.shape[0]
    if getattr(profile, "rotation", None) is not None:
        q = np.asarray(profile.rotation)
        if not np.allclose(q, np.eye(d)):
            raise ValueError("ellipsoid covering requires an identity rotation; "
                             "rotate samples into eigen-coordinates upstream")
    if not 0 <= p <= d:
        raise ValueError(f"p={p} out of range 0..{d}")
    if not (R > 0.0 and r > 0.0):
        raise ValueError("R and r must be positive")
    if np.any(lambdas <= 0.0):
        raise ValueError("degenerate eigenvalue profile")
    if p > 0 and 2.0 * lambdas[p - 1] * R < r:
        raise ValueError("each effective side must span at least one cell "
                         f"(2*lambda_p*R = {2*lambdas[p-1]*R:.3g} < r = {r:.3g})")
    origin = np.full(d, -r / 2.0)
    origin[:p] = -lambdas[:p] * R
    if p == 0:
        cells = np.zeros((1, d), dtype=np.int64)
        return LatticeCover(side=r, origin=origin, cells=cells)
    counts = [_robust_ceil(2.0 * lambdas[i] * R / r) for i in range(p)]
    grids = np.meshgrid(*[np.arange(c, dtype=np.int64) for c in counts], indexing="ij")
    cand = np.column_stack([g.ravel() for g in grids])
    lo = origin[:p] + r * cand
    hi = lo + r
    nearest = np.clip(0.0, lo, hi)
    inside = (nearest ** 2 / lambdas[:p] ** 2).sum(axis=1) <= R * R
    kept = cand[inside]
    cells = np.zeros((kept.shape[0], d), dtype=np.int64)
    cells[:, :p] = kept
    order = np.lexsort(cells.T[::-1])
    return LatticeCover(side=r, origin=origin, cells=cells[order])


def group_cells(cover: LatticeCover) -> GroupedCover:
    """Partition cells by lattice-index parity (at most 2^d classes).

    Distinct cells sharing a parity vector differ by >= 2 in some coordinate,
    so their set distance is at least the cell side, which is what the
    aggregation stage needs for nonoverlapping gated supports.
    """
    parity = np.mod(cover.cells, 2)
    keys = [tuple(row) for row in parity]
    buckets = {}
    for pos, key in enumerate(keys):
        buckets.setdefault(key, []).append(pos)
    groups = [np.array(buckets[key], dtype=np.int64) for key in sorted(buckets)]
    return GroupedCover(cover=cover, groups=groups)


def estimate_effective_dim(points, r: float, tau: float) -> EffDimEstimate:
    """Box-counting dimension estimate after greedily discarding mass tau.

    Bins points into lattice cells and keeps cells by descending empirical
    mass until the retained mass reaches 1 - tau; greedy selection is optimal
    among unions of fixed-lattice cells.  Returns
    p_hat = log(n_kept) / (-log r), which requires r < 1.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("need a nonempty (n, d) point array")
    if not 0.0 < r < 1.0:
        raise ValueError("p_hat needs a scale r in (0, 1)")
    if not 0.0 <= tau < 1.0:
        raise ValueError("tau must lie in [0, 1)")
    cover = cover_points(points, r)
    masses = cover.masses
    # deterministic tie-break: heavier first, then lexicographic cell index
    order = np.lexsort(tuple(cover.cells.T[::-1]) + (-masses,))
    sorted_masses = masses[order]
    cum = np.cumsum(sorted_masses)
    need = 1.0 - tau
    n_keep = int(np.searchsorted(cum, need - 1e-12) + 1)
    n_keep = min(n_keep, len(cum))
    return EffDimEstimate(
        r=r,
        tau=tau,
        n_cells=n_keep,
        p_hat=math.log(n_keep) / (-math.log(r)),
        retained_mass=float(cum[n_keep - 1]),
    )


def cover_rows(cover: LatticeCover):
    """CSV-ready rows: one per cell, d integer indices then empirical mass."""
    masses = cover.masses if cover.masses is not None else np.zeros(cover.n_cells)
    header = [f"i{axis}" for axis in range(cover.dim)] + ["mass"]
    rows = [list(map(int, cell)) + [float(mass)] for cell, mass in zip(cover.cells, masses)]
    return header, rows
