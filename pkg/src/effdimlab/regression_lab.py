"""Desk-scale regression experiments: noisy data, a trained ReLU surrogate
for the empirical risk minimizer, Monte Carlo risk, and rate fitting.

The exact minimizer over the constructive network class is computationally
out of reach; the surrogate is a dense ReLU net of comparable depth and
parameter count trained by plain mini-batch gradient descent (fixed step,
early stop on plateau, no adaptive optimizer) so that runs are reproducible
bit for bit given a seed.  The trained net is clamped into [-1, 1] through
the exact range clamp, matching the sup-norm constraint of the class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .gaussian_design import EigenProfile, sample
from .net_blocks import build_clamp
from .relu_net import ReluNetwork, compose
from .targets import HolderTarget

__all__ = [
    "RegressionTask",
    "TrainConfig",
    "FitResult",
    "RatePoint",
    "RateFit",
    "generate",
    "fit_surrogate",
    "risk",
    "rate_experiment",
    "surrogate_width",
]


@dataclass(frozen=True)
class RegressionTask:
    """One draw of the regression model y = f*(x) + noise."""

    target: HolderTarget
    design: object  # EigenProfile or any (n, seed) -> points sampler
    noise_sigma: float
    n: int
    seed: int


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.05
    batch_size: int = 64
    max_epochs: int = 400
    patience: int = 25
    rel_tol: float = 1e-4
    seed: int = 0


@dataclass(frozen=True)
class FitResult:
    network: ReluNetwork
    train_loss: float
    epochs: int
    n_params: int


def _draw(design, n: int, seed: int) -> np.ndarray:
    if isinstance(design, EigenProfile):
        return sample(design, n, seed)
    return design(n, seed)


def generate(task: RegressionTask) -> Tuple[np.ndarray, np.ndarray]:
    """Design points and noisy responses, deterministic per task seed."""
    xs = _draw(task.design, task.n, task.seed)
    noise_gen = np.random.Generator(np.random.Philox(key=(task.seed << 8) + 7))
    noise = noise_gen.standard_normal(task.n) * task.noise_sigma
    ys = task.target.evaluate(xs) + noise
    return xs, ys


def surrogate_width(n_params: int, d: int, hidden_layers: int = 3) -> int:
    """Width whose dense MLP parameter count is closest to n_params."""
    # params(w) = w(d+1) + (hidden_layers-1) w(w+1) + w + 1
    a = hidden_layers - 1
    b = d + 3 + (hidden_layers - 1)
    best = 8
    for w in range(8, 512):
        count = a * w * w + b * w + 1
        if count >= n_params:
            best = w
            break
        best = w
    return max(8, best)


def _init_params(widths, seed: int):
    gen = np.random.Generator(np.random.Philox(key=(seed << 8) + 17))
    params = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        w = gen.standard_normal((fan_out, fan_in)) * math.sqrt(2.0 / fan_in)
        params.append([w, np.zeros(fan_out)])
    return params


def _forward(params, xs):
    h = xs
    acts = [h]
    for w, b in params[:-1]:
        h = np.maximum(h @ w.T + b, 0.0)
        acts.append(h)
    w, b = params[-1]
    out = h @ w.T + b
    return out[:, 0], acts


def fit_surrogate(dataset: Tuple[np.ndarray, np.ndarray],
                  arch: Tuple[int, int],
                  cfg: TrainConfig = TrainConfig()) -> FitResult:
    """Train a dense ReLU net on the quadratic loss by mini-batch GD.

    ``arch`` is (width, hidden_layers).  Fixed step size, deterministic
    shuffling, early stop when the epoch loss stops improving by rel_tol for
    ``patience`` epochs.  The returned network is the trained net composed
    with the exact clamp, so its outputs lie in [-1, 1].
    """
    xs, ys = dataset
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64).reshape(-1)
    if xs.shape[0] == 0:
        raise ValueError("empty dataset")
    width, hidden_layers = arch
    widths = [xs.shape[1]] + [width] * hidden_layers + [1]
    params = _init_params(widths, cfg.seed)
    n = xs.shape[0]
    batch = min(cfg.batch_size, n)
    shuffle_gen = np.random.Generator(np.random.Philox(key=(cfg.seed << 8) + 29))
    best = math.inf
    since_best = 0
    epochs_run = 0
    for epoch in range(cfg.max_epochs):
        order = shuffle_gen.permutation(n)
        for start in range(0, n, batch):
            sel = order[start : start + batch]
            xb, yb = xs[sel], ys[sel]
            pred, acts = _forward(params, xb)
            err = (pred - yb) / xb.shape[0]
            # backprop through the affine stack
            grad_out = err[:, None]
            grads = []
            for layer in range(len(params) - 1, -1, -1):
                w, b = params[layer]
                a_in = acts[layer]
                gw = grad_out.T @ a_in
                gb = grad_out.sum(axis=0)
                grads.append((gw, gb))
                if layer:
                    grad_out = (grad_out @ w) * (acts[layer] > 0.0)
            for layer, (gw, gb) in zip(range(len(params) - 1, -1, -1), grads):
                params[layer][0] -= cfg.lr * gw
                params[layer][1] -= cfg.lr * gb
        pred, _ = _forward(params, xs)
        loss = 0.5 * float(np.mean((pred - ys) ** 2))
        epochs_run = epoch + 1
        if not math.isfinite(loss):
            raise RuntimeError(
                f"training diverged at epoch {epoch}: loss={loss}, lr={cfg.lr}"
            )
        if loss < best * (1.0 - cfg.rel_tol):
            best = loss
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    shifted = [(w.copy(), b.copy()) for w, b in params]
    shifted[-1] = (shifted[-1][0], shifted[-1][1] + 2.0)
    net = compose(build_clamp(), ReluNetwork(shifted))
    n_params = sum(w.size + b.size for w, b in params)
    return FitResult(network=net, train_loss=best, epochs=epochs_run, n_params=n_params)


def risk(net: ReluNetwork, target: HolderTarget, design, n_mc: int,
         seed: int = 0) -> Tuple[float, float]:
    """Monte Carlo estimate of E (net(X) - f*(X))^2 with its standard error."""
    if n_mc < 10_000:
        raise ValueError("Monte Carlo size must be at least 10^4")
    xs = _draw(design, n_mc, seed)
    sq = (net.evaluate_batch(xs)[:, 0] - target.evaluate(xs)) ** 2
    return float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(n_mc))


@dataclass(frozen=True)
class RatePoint:
    n: int
    seed: int
    risk: float
    stderr: float
    train_loss: float
    n_params: int


@dataclass(frozen=True)
class RateFit:
    points: List[RatePoint]
    medians: List[Tuple[int, float]]
    slope: float
    slope_ci: Tuple[float, float]
    predicted_exponents: Dict[str, float]


def rate_experiment(
    target: HolderTarget,
    design,
    ns: Sequence[int],
    sigma: float,
    replications: int,
    *,
    p_eff: float,
    arch_for=None,
    train_cfg: TrainConfig = TrainConfig(),
    n_mc: int = 20_000,
    base_seed: int = 0,
    bootstrap: int = 200,
) -> RateFit:
    """Sweep the sample size, fit surrogates, and fit the risk decay exponent.

    Requires the n grid to span at least 8x and >= 3 replications.  The
    log-log slope of the median risk is reported with a bootstrap CI and
    compared against the intrinsic and ambient exponent hypotheses
    -2 beta / (2 beta + p_eff) and -2 beta / (2 beta + d).
    """
    ns = sorted(int(n) for n in ns)
    if ns[-1] < 8 * ns[0]:
        raise ValueError("sample sizes must span at least a factor of 8")
    if replications < 3:
        raise ValueError("need at least 3 replications")
    if arch_for is None:
        arch_for = lambda n: (32, 3)
    points: List[RatePoint] = []
    risks = np.zeros((len(ns), replications))
    for i, n in enumerate(ns):
        for rep in range(replications):
            seed = base_seed + 7919 * i + rep
            task = RegressionTask(target=target, design=design, noise_sigma=sigma,
                                  n=n, seed=seed)
            data = generate(task)
            cfg = TrainConfig(lr=train_cfg.lr, batch_size=train_cfg.batch_size,
                              max_epochs=train_cfg.max_epochs,
                              patience=train_cfg.patience,
                              rel_tol=train_cfg.rel_tol, seed=seed)
            fit = fit_surrogate(data, arch_for(n), cfg)
            r, se = risk(fit.network, target, design, n_mc, seed=seed + 5000)
            risks[i, rep] = r
            points.append(RatePoint(n=n, seed=seed, risk=r, stderr=se,
                                    train_loss=fit.train_loss, n_params=fit.n_params))
    medians = np.median(risks, axis=1)
    logn = np.log(np.array(ns, dtype=np.float64))

    def fit_slope(values):
        return float(np.polyfit(logn, np.log(values), 1)[0])

    slope = fit_slope(medians)
    boot_gen = np.random.Generator(np.random.Philox(key=(base_seed << 8) + 99))
    boot_slopes = []
    for _ in range(bootstrap):
        idx = boot_gen.integers(0, replications, size=replications)
        boot_slopes.append(fit_slope(np.median(risks[:, idx], axis=1)))
    lo, hi = np.percentile(boot_slopes, [2.5, 97.5])
    d = target.dim
    beta = target.beta
    predicted = {
        "intrinsic": -2.0 * beta / (2.0 * beta + p_eff),
        "ambient": -2.0 * beta / (2.0 * beta + d),
    }
    return RateFit(
        points=points,
        medians=[(n, float(m)) for n, m in zip(ns, medians)],
        slope=slope,
        slope_ci=(float(lo), float(hi)),
        predicted_exponents=predicted,
    )
