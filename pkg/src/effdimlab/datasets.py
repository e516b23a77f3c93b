"""Synthetic point-cloud generators for the dimension and rate experiments.

All generators are deterministic per seed (Philox, counter-based) and embed a
low-dimensional uniform set into a larger ambient space; an optional
thickness smears the flat with isotropic Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["FlatDesign", "flat_points", "dataset_from_config"]


def flat_points(n: int, flat_dim: int, ambient_dim: int, seed: int,
                side: float = 1.0, thickness: float = 0.0) -> np.ndarray:
    """n points uniform on a flat [0, side]^m x {0}^(d-m), optionally smeared."""
    if not 0 <= flat_dim <= ambient_dim:
        raise ValueError("flat dimension out of range")
    if n < 1:
        raise ValueError("need at least one point")
    gen = np.random.Generator(np.random.Philox(key=seed))
    pts = np.zeros((n, ambient_dim))
    if flat_dim:
        pts[:, :flat_dim] = gen.uniform(0.0, side, size=(n, flat_dim))
    if thickness > 0.0:
        pts += thickness * gen.standard_normal((n, ambient_dim))
    return pts


@dataclass(frozen=True)
class FlatDesign:
    """Sampler for an m-flat embedded in R^d; usable as a regression design."""

    flat_dim: int
    ambient_dim: int
    side: float = 1.0
    thickness: float = 0.0

    def sample(self, n: int, seed: int) -> np.ndarray:
        return flat_points(n, self.flat_dim, self.ambient_dim, seed,
                           side=self.side, thickness=self.thickness)

    def __call__(self, n: int, seed: int) -> np.ndarray:
        return self.sample(n, seed)


def dataset_from_config(doc: dict, n: int, seed: int) -> np.ndarray:
    """Point cloud from a JSON description.

    {"kind": "flat", "flat_dim": m, "ambient_dim": d, "side": s, "thickness": t}
    or {"kind": "gaussian", "profile": {...}} (anisotropic Gaussian design).
    """
    kind = doc.get("kind")
    if kind == "flat":
        return flat_points(
            n,
            int(doc["flat_dim"]),
            int(doc["ambient_dim"]),
            seed,
            side=float(doc.get("side", 1.0)),
            thickness=float(doc.get("thickness", 0.0)),
        )
    if kind == "gaussian":
        from .gaussian_design import profile_from_config, sample

        return sample(profile_from_config(doc["profile"]), n, seed)
    raise ValueError(f"unknown dataset kind {kind!r}")
