"""Numerical laboratory for constructive ReLU approximation on data whose
mass concentrates on a low effective-dimension region: explicit network
builders with exact size accounting, lattice coverings of thick ellipsoids,
Gaussian tail bounds, intrinsic-dimension estimators, and a regression-rate
harness, all driven by a reproducible CLI."""

__version__ = "0.1.0"

from .relu_net import (  # noqa: F401
    ClassBoundInput,
    NetworkSize,
    ReluNetwork,
    class_covering_bound,
    compose,
    parallel,
    size_of,
)
