"""Exact constructions of the sub-networks used by the approximation pipeline.

Every builder returns a plain :class:`~effdimlab.relu_net.ReluNetwork` whose
stored parameters are exact (rationals with power-of-two denominators at desk
scale), so size metrics are reproducible integers and the advertised
evaluation identities hold to floating-point exactness.

The catalogue:

* cube indicator ``(x, y) -> y * 1{x in cube}`` (with ramp margins),
* its saturating variant used inside the full approximator,
* coordinate filters, exact m-input max trees, the range clamp,
* exact identities, a squaring/multiplication gadget with an error
  certificate, and a multi-output Taylor-polynomial evaluator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Mapping, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .relu_net import ReluNetwork, compose, identity_network, parallel

__all__ = [
    "CubeSpec",
    "TaylorSpec",
    "MultCertificate",
    "build_indicator",
    "build_gate",
    "build_filter",
    "build_max",
    "build_clamp",
    "build_identity",
    "build_mult",
    "build_square",
    "build_poly",
    "build_group_sum",
    "poly_gadget_plan",
    "multi_indices",
]


@dataclass(frozen=True)
class CubeSpec:
    """Axis-aligned cube {x : |x_i - center_i| <= side/2 for all i}."""

    center: np.ndarray
    side: float

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64).reshape(-1)
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        if not self.side > 0.0:
            raise ValueError("cube side must be positive")

    @property
    def dim(self) -> int:
        return self.center.shape[0]


@dataclass(frozen=True)
class TaylorSpec:
    """Anchored polynomial data for the multi-output Taylor evaluator.

    ``coefficients[k]`` maps a multi-index tuple alpha (sum <= floor(beta))
    to the coefficient of (x - anchors[k])^alpha.  Non-constant coefficients
    must lie in [-1, 1]; the constant term may lie in [-3, 3] to accommodate
    shifted positive targets.  ``radius`` bounds the sup-norm of the working
    region, ``target_sup_error`` the allowed uniform error on it.
    """

    anchors: np.ndarray
    coefficients: Sequence[Mapping[Tuple[int, ...], float]]
    beta: float
    target_sup_error: float
    radius: float

    def __post_init__(self):
        anchors = np.asarray(self.anchors, dtype=np.float64)
        if anchors.ndim != 2:
            raise ValueError("anchors must be an (m, d) array")
        anchors.setflags(write=False)
        object.__setattr__(self, "anchors", anchors)
        if len(self.coefficients) != anchors.shape[0]:
            raise ValueError("one coefficient table per anchor required")
        if not self.beta > 0.0:
            raise ValueError("beta must be positive")
        if not self.target_sup_error > 0.0:
            raise ValueError("target sup error must be positive")
        if not self.radius > 0.0:
            raise ValueError("region radius must be positive")
        degree = int(math.floor(self.beta))
        for table in self.coefficients:
            for alpha, c in table.items():
                if len(alpha) != anchors.shape[1] or any(a < 0 for a in alpha):
                    raise ValueError(f"bad multi-index {alpha}")
                total = sum(alpha)
                if total > degree:
                    raise ValueError(f"multi-index {alpha} exceeds degree {degree}")
                limit = 3.0 if total == 0 else 1.0
                if abs(c) > limit + 1e-12:
                    raise ValueError(
                        f"coefficient {c} for {alpha} outside allowed range"
                    )

    @property
    def degree(self) -> int:
        return int(math.floor(self.beta))


@dataclass(frozen=True)
class MultCertificate:
    """Guaranteed sup error of the multiplication gadget on its input box."""

    levels: int
    input_bound: float
    sup_error: float


def multi_indices(d: int, max_degree: int):
    """All multi-indices alpha in N^d with 1 <= |alpha| <= max_degree, lex order."""
    out = []

    def rec(prefix, remaining):
        if len(prefix) == d:
            if sum(prefix) >= 1:
                out.append(tuple(prefix))
            return
        for a in range(remaining + 1):
            rec(prefix + [a], remaining - a)

    rec([], max_degree)
    out.sort(key=lambda alpha: (sum(alpha), alpha))
    return out


def _indicator_core(cube: CubeSpec, y_rows, y_coeffs, y_biases) -> ReluNetwork:
    """Shared assembly for the indicator and its saturating variant.

    First layer: for each coordinate, eight ramp units relu(+-(x_i - t)) at
    the four knots t in {c - r, c - r/2, c + r/2, c + r}, plus the y units
    passed in.  The two exact realizations of the trapezoid ramp (one from the
    positive parts, the mirrored one from the negative parts, whose linear
    remainders cancel because the knots are symmetric about the center) are
    averaged, so every second-layer entry is a nonzero +-1/r.
    """
    d = cube.dim
    r = cube.side
    rows, cols, vals = [], [], []
    biases = []
    w2_vals = []
    row = 0
    for i in range(d):
        knots = (
            cube.center[i] - r,
            cube.center[i] - r / 2.0,
            cube.center[i] + r / 2.0,
            cube.center[i] + r,
        )
        signs2 = (1.0, -1.0, -1.0, 1.0)
        for t, s2 in zip(knots, signs2):
            rows.append(row)
            cols.append(i)
            vals.append(1.0)
            biases.append(-t)
            w2_vals.append(s2 / r)
            row += 1
        for t, s2 in zip(knots, signs2):
            rows.append(row)
            cols.append(i)
            vals.append(-1.0)
            biases.append(t)
            w2_vals.append(s2 / r)
            row += 1
    for coeff, bias, col_sign in zip(y_coeffs, y_biases, y_rows):
        rows.append(row)
        cols.append(d)
        vals.append(col_sign)
        biases.append(bias)
        w2_vals.append(coeff)
        row += 1
    w1 = sp.csr_matrix((vals, (rows, cols)), shape=(row, d + 1))
    b1 = np.array(biases)
    w2 = sp.csr_matrix(np.array(w2_vals)[None, :])
    b2 = np.array([-float(d)])
    w3 = sp.csr_matrix(np.array([[4.0]]))
    b3 = np.array([0.0])
    return ReluNetwork([(w1, b1), (w2, b2), (w3, b3)])


def build_indicator(cube: CubeSpec) -> ReluNetwork:
    """Cube indicator network g(x, y) = 4 relu(sum_i ramp_i(x_i) + y/4 - d).

    For y in [0, 4] the output equals y when x lies in the cube, is at most y
    on the cube fattened by side/2, and is exactly 0 further out.  Sizes are
    exact: L = 3 and K = 24 d + 6 provided no ramp knot falls on zero
    (the generic case; a knot at 0 stores a structural zero bias).
    B never exceeds max(4, d, 1 + side, 2 / side) for centers in [-1, 1]^d.
    """
    # y passes through the hidden layer as relu(y) - relu(-y), exact for all y.
    return _indicator_core(
        cube, y_rows=(1.0, -1.0), y_coeffs=(0.25, -0.25), y_biases=(0.0, 0.0)
    )


def build_gate(cube: CubeSpec) -> ReluNetwork:
    """Indicator variant whose y slot saturates outside [0, 4].

    Identical to :func:`build_indicator` for y in [0, 4]; for y outside that
    window the gated value is clipped, so the output stays in [0, 4] and
    vanishes outside the fattened cube for *all* real y.  This realizes the
    boundedness the aggregation stage needs when the gated values are
    polynomial estimates that grow far away from their anchor cube.
    One extra nonzero (the clip bias), so K = 24 d + 7.
    """
    # y slot: (relu(y) - relu(y - 4)) / 4 = clip(y, 0, 4) / 4.
    return _indicator_core(
        cube, y_rows=(1.0, 1.0), y_coeffs=(0.25, -0.25), y_biases=(0.0, -4.0)
    )


def build_filter(k: int, d: int, m: int) -> ReluNetwork:
    """Affine selector z in R^{d+m} -> (z_1..z_d, z_{d+k}); k is 1-based."""
    if not 1 <= k <= m:
        raise ValueError(f"filter index {k} out of range 1..{m}")
    rows = list(range(d + 1))
    cols = list(range(d)) + [d + k - 1]
    vals = [1.0] * (d + 1)
    w = sp.csr_matrix((vals, (rows, cols)), shape=(d + 1, d + m))
    return ReluNetwork([(w, np.zeros(d + 1))])


def build_max(m: int) -> ReluNetwork:
    """Exact maximum of m inputs via a binary tree of pairwise maxima.

    Each tree level realizes max(a, b) = relu(a - b) + relu(b) - relu(-b),
    which is exact for all reals (including ties and negatives); odd
    survivors ride along as (relu(v), relu(-v)) pairs.  Depth is
    ceil(log2 m) + 1 affine layers; m = 1 returns the one-layer identity.
    """
    if m < 1:
        raise ValueError("max needs at least one input")
    if m == 1:
        return identity_network(1, 1)
    # (coeff_matrix, bias) expresses the current values affinely in the
    # previous hidden layer; start from the input itself.
    coeff = sp.identity(m, dtype=np.float64, format="csr")
    bias = np.zeros(m)
    layers = []
    count = m
    while count > 1:
        unit_rows = []
        unit_bias = []
        next_coeff_rows = []
        n_pairs = count // 2
        for p in range(n_pairs):
            a = coeff[2 * p]
            b = coeff[2 * p + 1]
            ba = bias[2 * p]
            bb = bias[2 * p + 1]
            base = len(unit_rows)
            unit_rows.extend([a - b, b, -b])
            unit_bias.extend([ba - bb, bb, -bb])
            next_coeff_rows.append((base, (1.0, 1.0, -1.0)))
        if count % 2:
            v = coeff[count - 1]
            bv = bias[count - 1]
            base = len(unit_rows)
            unit_rows.extend([v, -v])
            unit_bias.extend([bv, -bv])
            next_coeff_rows.append((base, (1.0, -1.0)))
        w = sp.vstack(unit_rows, format="csr")
        layers.append((w, np.array(unit_bias)))
        n_units = w.shape[0]
        rows, cols, vals = [], [], []
        for out_idx, (base, pattern) in enumerate(next_coeff_rows):
            for off, v in enumerate(pattern):
                rows.append(out_idx)
                cols.append(base + off)
                vals.append(v)
        coeff = sp.csr_matrix((vals, (rows, cols)), shape=(len(next_coeff_rows), n_units))
        bias = np.zeros(len(next_coeff_rows))
        count = len(next_coeff_rows)
    layers.append((coeff, bias))
    return ReluNetwork(layers)


def build_clamp() -> ReluNetwork:
    """Range clamp z -> min(max(1, z), 3) - 2, exact for all real z.

    Realized as relu(z - 1) - relu(z - 3) - 1 with the first junction carried
    as a positive/negative pair, giving the exact sizes L = 3, K = 12 and
    B <= 2.  Maps any real input into [-1, 1].
    """
    w1 = sp.csr_matrix(np.array([[1.0], [-1.0]]))
    b1 = np.array([-1.0, 1.0])
    # u1 - u2 == z - 1 identically, so the hidden units are relu(z - 1)
    # and relu(z - 3).
    w2 = sp.csr_matrix(np.array([[1.0, -1.0], [1.0, -1.0]]))
    b2 = np.array([0.0, -2.0])
    w3 = sp.csr_matrix(np.array([[1.0, -1.0]]))
    b3 = np.array([-1.0])
    return ReluNetwork([(w1, b1), (w2, b2), (w3, b3)])


def build_identity(d: int, depth: int) -> ReluNetwork:
    """Exact identity on R^d with the requested depth.

    K is d for depth 1 and 4 d (depth - 1) otherwise: the value enters as the
    pair (relu(x), relu(-x)) (2d nonzeros), each intermediate stage refreshes
    the pair (4d), and the last layer recombines (2d).
    """
    return identity_network(d, depth)


def build_group_sum(groups: Sequence[Sequence[int]], m: int) -> ReluNetwork:
    """Single affine layer summing inputs within each group (1-based indices).

    ``groups`` must partition {1, .., m}; output j is the sum over group j.
    """
    seen = set()
    for g in groups:
        for k in g:
            if not 1 <= k <= m or k in seen:
                raise ValueError("groups must partition 1..m without repeats")
            seen.add(k)
    if len(seen) != m:
        raise ValueError("groups must cover every index 1..m")
    rows, cols = [], []
    for j, g in enumerate(groups):
        for k in g:
            rows.append(j)
            cols.append(k - 1)
    w = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(groups), m))
    return ReluNetwork([(w, np.zeros(len(groups)))])


# ---------------------------------------------------------------------------
# Multiplication gadget: sawtooth-composed squaring.
# ---------------------------------------------------------------------------

def _square_chain_layers(T: int):
    """Per-stage unit recipes for the piecewise-linear squaring chain.

    The chain keeps the state (h_s, S_s) with h_0 = z, S_0 = z and
    h_s = hat(h_{s-1}), S_s = S_{s-1} - h_s / 4^s, where hat is the tent map
    hat(h) = 2 relu(h) - 4 relu(h - 1/2) on [0, 1].  After T stages S_T is
    the piecewise-linear interpolation of z^2 on the dyadic grid 2^-T, with
    sup error exactly 2^(-2T-2) on [0, 1].
    """
    # stage 0 units from the scalar input z: A = relu(z), B = relu(z - 1/2)
    # subsequent stages read (A', B', C') with h = 2A' - 4B', S = C'.
    recipes = []
    for s in range(1, T):
        recipes.append(
            [
                # A_s = relu(2A - 4B)
                ((2.0, -4.0, 0.0), 0.0),
                # B_s = relu(2A - 4B - 1/2)
                ((2.0, -4.0, 0.0), -0.5),
                # C_s = relu(C - (2A - 4B) / 4^s)
                ((-2.0 / 4.0 ** s, 4.0 / 4.0 ** s, 1.0), 0.0),
            ]
        )
    return recipes


def build_square(T: int, M: float):
    """Network approximating z -> z^2 on [-M, M] plus its error certificate.

    Uses |z| = relu(z) + relu(-z), rescales to [0, 1] and runs the sawtooth
    chain; the sup error on [-M, M] is exactly M^2 2^(-2T-2).
    """
    if T < 1:
        raise ValueError("need at least one sawtooth level")
    if not M > 0.0:
        raise ValueError("input range must be positive")
    layers = []
    # |z| / M via positive and negative parts.
    w = sp.csr_matrix(np.array([[1.0 / M], [-1.0 / M]]))
    layers.append((w, np.zeros(2)))
    # stage 0: A = relu(u), B = relu(u - 1/2) with u = p + q.
    w = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    layers.append((w, np.array([0.0, -0.5])))
    state_dim = 2  # (A, B); S_0 aliases A
    for s in range(1, T):
        if state_dim == 2:
            rows = [
                ([2.0, -4.0], 0.0),
                ([2.0, -4.0], -0.5),
                ([1.0 - 2.0 / 4.0 ** s, 4.0 / 4.0 ** s], 0.0),
            ]
        else:
            rows = [
                ([2.0, -4.0, 0.0], 0.0),
                ([2.0, -4.0, 0.0], -0.5),
                ([-2.0 / 4.0 ** s, 4.0 / 4.0 ** s, 1.0], 0.0),
            ]
        w = sp.csr_matrix(np.array([r[0] for r in rows]))
        layers.append((w, np.array([r[1] for r in rows])))
        state_dim = 3
    # final stage T: C_T = relu(S_{T-1} - h_T / 4^T)
    if state_dim == 2:
        w = sp.csr_matrix(np.array([[1.0 - 2.0 / 4.0 ** T, 4.0 / 4.0 ** T]]))
    else:
        w = sp.csr_matrix(np.array([[-2.0 / 4.0 ** T, 4.0 / 4.0 ** T, 1.0]]))
    layers.append((w, np.zeros(1)))
    # rescale: z^2 = M^2 (|z| / M)^2
    layers.append((sp.csr_matrix(np.array([[M * M]])), np.zeros(1)))
    cert = MultCertificate(levels=T, input_bound=M, sup_error=M * M * 0.25 ** (T + 1))
    return ReluNetwork(layers), cert


def build_mult(T: int, M: float):
    """Network approximating (a, b) -> a b on [-M, M]^2 with certificate.

    Polarization a b = ((a + b)^2 - a^2 - b^2) / 2 over three squaring
    chains; the certificate bounds the sup error by 3 M^2 2^(-2T-2)
    (constant c_mult = 3) and the error shrinks by exactly 16x per T -> T+2.
    """
    if T < 1:
        raise ValueError("need at least one sawtooth level")
    if not M > 0.0:
        raise ValueError("input range must be positive")
    layers = []
    # chains on u = |a+b| / 2M, v = |a| / M, w = |b| / M, all in [0, 1].
    s = 1.0 / (2.0 * M)
    t = 1.0 / M
    w1 = sp.csr_matrix(
        np.array(
            [
                [s, s],
                [-s, -s],
                [t, 0.0],
                [-t, 0.0],
                [0.0, t],
                [0.0, -t],
            ]
        )
    )
    layers.append((w1, np.zeros(6)))

    def block(rows_per_chain, n_prev_per_chain):
        mats = []
        biases = []
        for c in range(3):
            for coeffs, bias in rows_per_chain:
                row = np.zeros(3 * n_prev_per_chain)
                row[c * n_prev_per_chain : c * n_prev_per_chain + len(coeffs)] = coeffs
                mats.append(row)
                biases.append(bias)
        return sp.csr_matrix(np.array(mats)), np.array(biases)

    # stage 0: A = relu(p + q), B = relu(p + q - 1/2)
    w, b = block([([1.0, 1.0], 0.0), ([1.0, 1.0], -0.5)], 2)
    layers.append((w, b))
    state = 2
    for stage in range(1, T):
        if state == 2:
            rows = [
                ([2.0, -4.0], 0.0),
                ([2.0, -4.0], -0.5),
                ([1.0 - 2.0 / 4.0 ** stage, 4.0 / 4.0 ** stage], 0.0),
            ]
        else:
            rows = [
                ([2.0, -4.0, 0.0], 0.0),
                ([2.0, -4.0, 0.0], -0.5),
                ([-2.0 / 4.0 ** stage, 4.0 / 4.0 ** stage, 1.0], 0.0),
            ]
        w, b = block(rows, state)
        layers.append((w, b))
        state = 3
    if state == 2:
        rows = [([1.0 - 2.0 / 4.0 ** T, 4.0 / 4.0 ** T], 0.0)]
    else:
        rows = [([-2.0 / 4.0 ** T, 4.0 / 4.0 ** T, 1.0], 0.0)]
    w, b = block(rows, state)
    layers.append((w, b))
    # combine: ab = (4 M^2 sq(u) - M^2 sq(v) - M^2 sq(w)) / 2
    m2 = M * M
    w = sp.csr_matrix(np.array([[2.0 * m2, -0.5 * m2, -0.5 * m2]]))
    layers.append((w, np.zeros(1)))
    cert = MultCertificate(levels=T, input_bound=M, sup_error=3.0 * m2 * 0.25 ** (T + 1))
    return ReluNetwork(layers), cert


# ---------------------------------------------------------------------------
# Taylor polynomial evaluator.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolyGadgetPlan:
    """Chosen gadget depth and the certified per-anchor error budget."""

    levels: int
    worst_error: float
    tolerance: float
    factor_bound: float


def _anchor_shift_bound(spec: TaylorSpec, k: int) -> float:
    """Bound on |x_i - anchor_i| over the working region for anchor k."""
    return float(spec.radius + np.max(np.abs(spec.anchors[k])))


def _quadratic_error(table, M: float, T: int) -> float:
    """Certified error of the shared-chain quadratic bank for one anchor.

    Squares cost M^2 4^{-(T+1)} each; cross terms, reconstructed from the
    polarization identity over three chains, cost three times that.
    """
    e = 0.25 ** (T + 1) * M * M
    total = 0.0
    for alpha, c in table.items():
        if sum(alpha) != 2:
            continue
        if max(alpha) == 2:
            total += abs(c) * e
        else:
            total += abs(c) * 3.0 * e
    return total


def _tower_error_table(D: float, T: int, max_degree: int):
    """Certified error of the degree-j product tower, j = 1..max_degree.

    E_1 = 0 (affine shift is exact); multiplying a certified degree-j value
    by an exact shifted coordinate obeys
    E_{j+1} <= 3 M_g^2 4^{-(T+1)} + D E_j with gadget range
    M_g = max(D^{j} + E_j, D, 1).
    """
    errors = [0.0, 0.0]  # index by degree, degree 1 exact
    base = max(D, 1.0)
    for j in range(1, max_degree):
        prev = errors[j]
        m_g = max(base ** j + prev, D, 1.0)
        errors.append(3.0 * m_g * m_g * 0.25 ** (T + 1) + D * prev)
    return errors


def _max_degree_present(spec: TaylorSpec) -> int:
    present = 0
    for table in spec.coefficients:
        for alpha, c in table.items():
            if c != 0.0:
                present = max(present, sum(alpha))
    return present


def poly_gadget_plan(spec: TaylorSpec) -> PolyGadgetPlan:
    """Pick the smallest gadget depth meeting the sup-error budget.

    The budget charges each anchor the sum over its monomials of |c_alpha|
    times the certified gadget error for that degree; constant and linear
    terms are exact wiring and cost nothing.  Degree-2 polynomials use the
    tighter shared-chain certificates; higher degrees use the product-tower
    recursion.
    """
    degree = _max_degree_present(spec)
    bounds = spec.radius + np.max(np.abs(spec.anchors), axis=1) if len(spec.anchors) else np.array([])
    D = float(np.max(bounds)) if bounds.size else 1.0
    if degree < 2:
        return PolyGadgetPlan(levels=0, worst_error=0.0, tolerance=spec.target_sup_error, factor_bound=D)
    for T in range(1, 64):
        worst = 0.0
        if degree == 2:
            for k, mapping in enumerate(spec.coefficients):
                worst = max(worst, _quadratic_error(mapping, _anchor_shift_bound(spec, k), T))
        else:
            table = _tower_error_table(D, T, degree)
            for mapping in spec.coefficients:
                total = sum(
                    abs(c) * table[sum(alpha)]
                    for alpha, c in mapping.items()
                    if sum(alpha) >= 2
                )
                worst = max(worst, total)
        if worst <= spec.target_sup_error:
            return PolyGadgetPlan(
                levels=T, worst_error=worst, tolerance=spec.target_sup_error, factor_bound=D
            )
    raise ValueError("no gadget depth within 64 levels meets the error budget")


def _coordinate_shift(d: int, i: int, anchor_i: float) -> ReluNetwork:
    w = sp.csr_matrix(([1.0], ([0], [i])), shape=(1, d))
    return ReluNetwork([(w, np.array([-anchor_i]))])


def _affine_poly_bank(spec: TaylorSpec) -> ReluNetwork:
    """Exact single-layer bank for polynomials of degree at most one."""
    m, d = spec.anchors.shape
    rows, cols, vals = [], [], []
    biases = np.zeros(m)
    for k, table in enumerate(spec.coefficients):
        bias = float(table.get((0,) * d, 0.0))
        for alpha, c in table.items():
            if sum(alpha) != 1 or c == 0.0:
                continue
            i = alpha.index(1)
            rows.append(k)
            cols.append(i)
            vals.append(float(c))
            bias -= float(c) * spec.anchors[k, i]
        biases[k] = bias
    w = sp.csr_matrix((vals, (rows, cols)), shape=(m, d))
    return ReluNetwork([(w, biases)])


def _quadratic_anchor_net(d: int, anchor: np.ndarray, table, M: float, T: int) -> ReluNetwork:
    """Per-anchor evaluator for degree <= 2 polynomials via shared chains.

    One squaring chain per needed coordinate |s_i| / M and per needed pair
    |s_i + s_j| / 2M; cross terms come from the polarization identity, so
    three chains serve a full quadratic in two variables.  Linear terms ride
    along as (relu(s), relu(-s)) carry pairs.
    """
    const = float(table.get((0,) * d, 0.0))
    linear = {}
    squares = {}
    pairs = {}
    for alpha, c in table.items():
        if c == 0.0 or sum(alpha) == 0:
            continue
        if sum(alpha) == 1:
            linear[alpha.index(1)] = float(c)
        elif max(alpha) == 2:
            squares[alpha.index(2)] = float(c)
        else:
            i, j = [idx for idx, a in enumerate(alpha) if a == 1]
            pairs[(i, j)] = float(c)
    need_sq = set(squares)
    for i, j in pairs:
        need_sq.update((i, j))
    chain_defs = [("sq", i) for i in sorted(need_sq)] + [("pair", ij) for ij in sorted(pairs)]
    carries = sorted(linear)
    n_chain = len(chain_defs)
    n_carry = len(carries)
    if n_chain == 0:
        # linear only; callers normally dispatch this to the affine bank
        rows = np.zeros((1, d))
        bias = const
        for i, c in linear.items():
            rows[0, i] = c
            bias -= c * anchor[i]
        return ReluNetwork([(sp.csr_matrix(rows), np.array([bias]))])

    # layer 1: +-(scaled shifted sums) for chains, +-(x_i - a_i) for carries
    rows, cols, vals, biases = [], [], [], []
    row = 0
    for kind, key in chain_defs:
        if kind == "sq":
            coords, scale = (key,), M
        else:
            coords, scale = key, 2.0 * M
        shift = sum(anchor[i] for i in coords) / scale
        for sign in (1.0, -1.0):
            for i in coords:
                rows.append(row)
                cols.append(i)
                vals.append(sign / scale)
            biases.append(-sign * shift)
            row += 1
    for i in carries:
        for sign in (1.0, -1.0):
            rows.append(row)
            cols.append(i)
            vals.append(sign)
            biases.append(-sign * anchor[i])
            row += 1
    layers = [(sp.csr_matrix((vals, (rows, cols)), shape=(row, d)), np.array(biases))]

    def chain_stage(stage_rows, prev_per_chain, carry_refresh=True):
        mats, bias = [], []
        offset = 0
        for _ in range(n_chain):
            for coeffs, b in stage_rows:
                r = np.zeros(prev_width)
                r[offset : offset + len(coeffs)] = coeffs
                mats.append(r)
                bias.append(b)
            offset += prev_per_chain
        if carry_refresh:
            for c_idx in range(n_carry):
                base = n_chain * prev_per_chain + 2 * c_idx
                plus = np.zeros(prev_width)
                plus[base] = 1.0
                plus[base + 1] = -1.0
                mats.append(plus)
                bias.append(0.0)
                mats.append(-plus)
                bias.append(0.0)
        return sp.csr_matrix(np.array(mats)), np.array(bias)

    # stage 0: A = relu(p + q), B = relu(p + q - 1/2)
    prev_width = 2 * n_chain + 2 * n_carry
    w, b = chain_stage([([1.0, 1.0], 0.0), ([1.0, 1.0], -0.5)], 2)
    layers.append((w, b))
    per_chain = 2
    for stage in range(1, T):
        prev_width = per_chain * n_chain + 2 * n_carry
        if per_chain == 2:
            stage_rows = [
                ([2.0, -4.0], 0.0),
                ([2.0, -4.0], -0.5),
                ([1.0 - 2.0 / 4.0 ** stage, 4.0 / 4.0 ** stage], 0.0),
            ]
        else:
            stage_rows = [
                ([2.0, -4.0, 0.0], 0.0),
                ([2.0, -4.0, 0.0], -0.5),
                ([-2.0 / 4.0 ** stage, 4.0 / 4.0 ** stage, 1.0], 0.0),
            ]
        w, b = chain_stage(stage_rows, per_chain)
        layers.append((w, b))
        per_chain = 3
    prev_width = per_chain * n_chain + 2 * n_carry
    if per_chain == 2:
        final_rows = [([1.0 - 2.0 / 4.0 ** T, 4.0 / 4.0 ** T], 0.0)]
    else:
        final_rows = [([-2.0 / 4.0 ** T, 4.0 / 4.0 ** T, 1.0], 0.0)]
    w, b = chain_stage(final_rows, per_chain)
    layers.append((w, b))

    # head: constant + linear carries + quadratic reconstruction
    m2 = M * M
    chain_coef = {}
    for i, c in squares.items():
        chain_coef[("sq", i)] = chain_coef.get(("sq", i), 0.0) + c * m2
    for (i, j), c in pairs.items():
        chain_coef[("pair", (i, j))] = chain_coef.get(("pair", (i, j)), 0.0) + 2.0 * c * m2
        chain_coef[("sq", i)] = chain_coef.get(("sq", i), 0.0) - 0.5 * c * m2
        chain_coef[("sq", j)] = chain_coef.get(("sq", j), 0.0) - 0.5 * c * m2
    head = np.zeros(n_chain + 2 * n_carry)
    for idx, key in enumerate(chain_defs):
        head[idx] = chain_coef.get(key, 0.0)
    for c_idx, i in enumerate(carries):
        head[n_chain + 2 * c_idx] = linear[i]
        head[n_chain + 2 * c_idx + 1] = -linear[i]
    layers.append((sp.csr_matrix(head[None, :]), np.array([const])))
    return ReluNetwork(layers)


def _tower_anchor_net(spec: TaylorSpec, k: int, plan: PolyGadgetPlan) -> ReluNetwork:
    """Generic per-anchor evaluator: chained multiplication towers."""
    d = spec.anchors.shape[1]
    table = spec.coefficients[k]
    anchor = spec.anchors[k]
    D_k = max(_anchor_shift_bound(spec, k), 1.0)
    const = float(table.get((0,) * d, 0.0))
    towers: Dict[Tuple[int, ...], ReluNetwork] = {}
    ordered = [a for a in sorted(table, key=lambda a: (sum(a), a)) if sum(a) >= 1 and table[a] != 0.0]
    for alpha in ordered:
        factors = tuple(i for i in range(d) for _ in range(alpha[i]))
        for j in range(1, len(factors) + 1):
            prefix = factors[:j]
            if prefix in towers:
                continue
            if j == 1:
                towers[prefix] = _coordinate_shift(d, prefix[0], anchor[prefix[0]])
            else:
                level = j - 1
                err = _tower_error_table(D_k, plan.levels, j)[level]
                m_g = max(D_k ** level + err, D_k, 1.0)
                gadget, _ = build_mult(plan.levels, m_g)
                pair = parallel(
                    [towers[prefix[:-1]], _coordinate_shift(d, prefix[-1], anchor[prefix[-1]])]
                )
                towers[prefix] = compose(gadget, pair)
    if not ordered:
        w = sp.csr_matrix(np.zeros((1, d)))
        return ReluNetwork([(w, np.array([const]))])
    monomial_nets = []
    coeffs = []
    for alpha in ordered:
        factors = tuple(i for i in range(d) for _ in range(alpha[i]))
        monomial_nets.append(towers[factors])
        coeffs.append(float(table[alpha]))
    bank = parallel(monomial_nets)
    head = ReluNetwork([(sp.csr_matrix(np.array(coeffs)[None, :]), np.array([const]))])
    return compose(head, bank)


def build_poly(spec: TaylorSpec) -> ReluNetwork:
    """Multi-output network; output k approximates the anchored polynomial

        sum_{|alpha| <= floor(beta)} c_{k,alpha} (x - x_k)^alpha

    with sup error over the working region at most ``spec.target_sup_error``
    for every k.  Constant and linear terms are wired exactly.  Quadratics
    use per-anchor squaring chains with polarization for cross terms; higher
    degrees fall back to chained multiplication towers.  The gadget depth is
    chosen by :func:`poly_gadget_plan` so the summed certificates stay within
    budget.
    """
    plan = poly_gadget_plan(spec)
    m, d = spec.anchors.shape
    degree = _max_degree_present(spec)
    if degree <= 1:
        return _affine_poly_bank(spec)
    if degree == 2:
        nets = [
            _quadratic_anchor_net(d, spec.anchors[k], spec.coefficients[k],
                                  _anchor_shift_bound(spec, k), plan.levels)
            for k in range(m)
        ]
        return parallel(nets)
    nets = [_tower_anchor_net(spec, k, plan) for k in range(m)]
    return parallel(nets)
