"""Explicit ReLU networks with exact size accounting.

A network is an ordered list of affine layers ``(W_l, b_l)``.  Evaluation
applies ReLU between layers and *no* activation after the last one:

    f(x) = W_L relu(W_{L-1} ... relu(W_1 x + b_1) ... + b_{L-1}) + b_L

Weight matrices are stored as CSR sparse matrices.  The constructions in
this package produce exact zeros (never near-zeros), and the sparsity
count `K` is the number of exactly nonzero stored entries.  Networks are
immutable after construction; evaluation is pure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "ReluNetwork",
    "NetworkSize",
    "ClassBoundInput",
    "compose",
    "parallel",
    "size_of",
    "class_covering_bound",
]


@dataclass(frozen=True)
class NetworkSize:
    """Size metrics of a ReLU network: depth, max weight magnitude, nonzeros."""

    depth_L: int
    max_weight_B: float
    nonzeros_K: int


@dataclass(frozen=True)
class ClassBoundInput:
    """Inputs for the metric-entropy bound of the network class.

    `delta` is the covering resolution, `tau` the mass allowed outside the
    approximation region, `r_s` the coordinate bound of that region, `size`
    the class parameters (L, B, K) and `ambient_d` the input dimension.
    """

    delta: float
    tau: float
    r_s: float
    size: NetworkSize
    ambient_d: int


def _as_csr(w) -> sp.csr_matrix:
    if sp.issparse(w):
        m = w.tocsr().astype(np.float64)
    else:
        m = sp.csr_matrix(np.asarray(w, dtype=np.float64))
    return m


class ReluNetwork:
    """Immutable feed-forward ReLU network with affine output layer."""

    __slots__ = ("layers", "input_dim", "output_dim")

    def __init__(self, layers):
        if not layers:
            raise ValueError("a network needs at least one affine layer")
        prepared = []
        prev_cols = None
        for w, b in layers:
            w = _as_csr(w)
            b = np.asarray(b, dtype=np.float64).reshape(-1)
            if b.shape[0] != w.shape[0]:
                raise ValueError(
                    f"bias length {b.shape[0]} does not match rows {w.shape[0]}"
                )
            if prev_cols is not None and w.shape[1] != prev_cols:
                raise ValueError(
                    f"layer expects {w.shape[1]} inputs, previous layer emits {prev_cols}"
                )
            b.setflags(write=False)
            prev_cols = w.shape[0]
            prepared.append((w, b))
        object.__setattr__(self, "layers", tuple(prepared))
        object.__setattr__(self, "input_dim", prepared[0][0].shape[1])
        object.__setattr__(self, "output_dim", prepared[-1][0].shape[0])

    def __setattr__(self, name, value):  # pragma: no cover - guard
        raise AttributeError("ReluNetwork is immutable")

    @property
    def depth(self) -> int:
        return len(self.layers)

    def evaluate(self, x) -> np.ndarray:
        """Evaluate on a single input vector; returns the output vector."""
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.shape[0] != self.input_dim:
            raise ValueError(
                f"input has length {x.shape[0]}, network expects {self.input_dim}"
            )
        return self.evaluate_batch(x[None, :])[0]

    def evaluate_batch(self, xs, chunk_bytes: int = 256 * 1024 * 1024) -> np.ndarray:
        """Evaluate on an (n, input_dim) batch, chunked to bound memory."""
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[1] != self.input_dim:
            raise ValueError(
                f"batch shape {xs.shape} does not match input dim {self.input_dim}"
            )
        width = max(w.shape[0] for w, _ in self.layers)
        rows_per_chunk = max(1, int(chunk_bytes // (8 * max(width, 1))))
        outs = []
        for start in range(0, xs.shape[0], rows_per_chunk):
            outs.append(self._forward(xs[start : start + rows_per_chunk]))
        return np.concatenate(outs, axis=0) if len(outs) > 1 else outs[0]

    def _forward(self, xs: np.ndarray) -> np.ndarray:
        h = xs.T
        last = len(self.layers) - 1
        for idx, (w, b) in enumerate(self.layers):
            h = w @ h
            h += b[:, None]
            if idx != last:
                np.maximum(h, 0.0, out=h)
        return h.T

    def size(self) -> NetworkSize:
        nnz = 0
        biggest = 0.0
        for w, b in self.layers:
            if w.nnz:
                nnz += int(np.count_nonzero(w.data))
                biggest = max(biggest, float(np.max(np.abs(w.data))))
            nnz += int(np.count_nonzero(b))
            if b.size:
                biggest = max(biggest, float(np.max(np.abs(b))))
        return NetworkSize(depth_L=len(self.layers), max_weight_B=biggest, nonzeros_K=nnz)

    def to_json(self) -> str:
        """Serialize to a JSON document with dense per-layer matrices.

        Floats round-trip bit-exactly through the shortest-repr encoding.
        """
        doc = {
            "layers": [
                {"w": w.toarray().tolist(), "b": b.tolist()} for w, b in self.layers
            ]
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "ReluNetwork":
        doc = json.loads(text)
        return cls([(layer["w"], layer["b"]) for layer in doc["layers"]])


def identity_network(dim: int, depth: int) -> ReluNetwork:
    """Exact identity on R^dim with the requested number of affine layers.

    Depth 1 is a plain identity map.  Deeper variants carry the value through
    hidden layers as the (positive part, negative part) pair so that
    relu never loses sign information:  x = relu(x) - relu(-x).
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    eye = sp.identity(dim, dtype=np.float64, format="csr")
    if depth == 1:
        return ReluNetwork([(eye, np.zeros(dim))])
    split = sp.vstack([eye, -eye], format="csr")
    merge = sp.hstack([eye, -eye], format="csr")
    swap = sp.vstack([merge, -merge], format="csr")
    layers = [(split, np.zeros(2 * dim))]
    for _ in range(depth - 2):
        layers.append((swap, np.zeros(2 * dim)))
    layers.append((merge, np.zeros(dim)))
    return ReluNetwork(layers)


def compose(outer: ReluNetwork, inner: ReluNetwork) -> ReluNetwork:
    """Network computing outer(inner(x)); depth adds exactly.

    The junction value v (inner's affine output) is carried through the
    boundary ReLU as the pair (relu(v), relu(-v)) and recombined by outer's
    first affine map, so no sign information is lost and
    evaluate(compose(o, i), x) == evaluate(o, evaluate(i, x)) for all reals.
    """
    if outer.input_dim != inner.output_dim:
        raise ValueError(
            f"outer expects {outer.input_dim} inputs, inner emits {inner.output_dim}"
        )
    wi, bi = inner.layers[-1]
    wo, bo = outer.layers[0]
    junction_pre = (sp.vstack([wi, -wi], format="csr"), np.concatenate([bi, -bi]))
    junction_post = (sp.hstack([wo, -wo], format="csr"), bo)
    layers = list(inner.layers[:-1]) + [junction_pre, junction_post] + list(outer.layers[1:])
    return ReluNetwork(layers)


def parallel(nets) -> ReluNetwork:
    """Stack networks side by side over a shared input.

    All networks must share input_dim; shallower ones are padded with exact
    identity stages so depths match.  The first affine layers are stacked
    vertically (shared input) and deeper layers are assembled block
    diagonally; outputs are concatenated in argument order.
    """
    nets = list(nets)
    if not nets:
        raise ValueError("parallel() needs at least one network")
    dim = nets[0].input_dim
    if any(n.input_dim != dim for n in nets):
        raise ValueError("all networks must share the same input dimension")
    target = max(n.depth for n in nets)
    padded = [
        n if n.depth == target else compose(identity_network(n.output_dim, target - n.depth), n)
        for n in nets
    ]
    layers = []
    first_w = sp.vstack([n.layers[0][0] for n in padded], format="csr")
    first_b = np.concatenate([n.layers[0][1] for n in padded])
    layers.append((first_w, first_b))
    for level in range(1, target):
        w = sp.block_diag([n.layers[level][0] for n in padded], format="csr")
        b = np.concatenate([n.layers[level][1] for n in padded])
        layers.append((w, b))
    return ReluNetwork(layers)


def size_of(net: ReluNetwork) -> NetworkSize:
    """Exact (L, B, K) of the stored parameters."""
    return net.size()


def class_covering_bound(inp: ClassBoundInput) -> float:
    """Log covering-number bound of the network class with size (L, B, K).

    Evaluates K * log(2^L * sqrt(d L) * K^{L/2} * B^L * R_S / sqrt(delta^2 - 4 tau))
    in log space, clipped at zero (a log cardinality cannot be negative).
    Requires delta^2 > 4 tau, otherwise the bound is undefined.
    """
    k = inp.size.nonzeros_K
    if k == 0:
        return 0.0
    gap = inp.delta ** 2 - 4.0 * inp.tau
    if gap <= 0.0:
        raise ValueError("bound undefined: requires delta^2 > 4*tau")
    length = inp.size.depth_L
    b = inp.size.max_weight_B
    if length < 1 or b <= 0.0 or inp.r_s <= 0.0 or inp.ambient_d < 1:
        raise ValueError("all size fields must be positive")
    log_term = (
        length * math.log(2.0)
        + 0.5 * math.log(inp.ambient_d * length)
        + 0.5 * length * math.log(k)
        + length * math.log(b)
        + math.log(inp.r_s)
        - 0.5 * math.log(gap)
    )
    return max(0.0, k * log_term)
