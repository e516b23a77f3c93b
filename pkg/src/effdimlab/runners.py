"""Config-driven experiment pipelines backing the command-line interface.

Each runner consumes a validated config dict plus an effective seed and
returns ``(header, rows)`` (plus optional auxiliary files).  All randomness
derives from the seed through fixed offsets, so reruns are byte-identical.
"""

from __future__ import annotations

import math
import numpy as np

from . import covering as cov
from . import gaussian_design as gd
from .approximator import (
    ApproxCertificate,
    EllipsoidRegion,
    build_approximator,
    measure_errors,
    tuned_cell_side,
)
from .covering import cover_ellipsoid_set, cover_points, cover_rows, group_cells
from .datasets import FlatDesign, dataset_from_config
from .dim_estimators import MleConfig, growth_curve, mle_dimension
from .regression_lab import TrainConfig, rate_experiment
from .targets import make_target

__all__ = ["RUNNERS"]


def run_schedule(cfg: dict, seed: int):
    profile = gd.profile_from_config(cfg["profile"])
    beta = float(cfg["beta"])
    eta = float(cfg.get("eta", 0.0))
    header = ["n", "law", "beta", "eta", "r", "R", "p_raw", "p", "p_truncated",
              "exponent", "L", "B", "K"]
    rows = []
    for n in cfg["n_values"]:
        s = gd.schedule(profile, float(n), beta, eta)
        rows.append([
            n, s.law, beta, eta, s.r, s.R, s.p_raw, s.p, int(s.p_truncated),
            s.exponent, s.depth_L, s.weight_B, s.nonzeros_K,
        ])
    return header, {"": (header, rows)}


def run_tails(cfg: dict, seed: int):
    n_mc = int(cfg["n_mc"])
    header = ["kind", "p", "t", "bound", "mc", "mc_stderr"]
    rows = []
    counter = 0
    for t in cfg["t_grid"]:
        t = float(t)
        gen = np.random.Generator(np.random.Philox(key=(seed << 16) + counter))
        counter += 1
        z = np.abs(gen.standard_normal(n_mc))
        hit = (z > t).astype(np.float64)
        rows.append(["scalar", 0, t, gd.tail_bound_scalar(t),
                     float(hit.mean()), float(hit.std(ddof=1) / math.sqrt(n_mc))])
    for p in cfg["p_values"]:
        p = int(p)
        for t in cfg["t_grid"]:
            t = float(t)
            gen = np.random.Generator(np.random.Philox(key=(seed << 16) + counter))
            counter += 1
            z = gen.standard_normal((n_mc, p))
            hit = (np.linalg.norm(z, axis=1) > t).astype(np.float64)
            rows.append(["chisq", p, t, gd.tail_bound_chisq(p, t),
                         float(hit.mean()), float(hit.std(ddof=1) / math.sqrt(n_mc))])
    return header, {"": (header, rows)}


def run_gaussian_check(cfg: dict, seed: int):
    profile = gd.profile_from_config(cfg["profile"])
    n_mc = int(cfg["n_mc"])
    enumerate_cover = bool(cfg.get("enumerate_cover", True))
    header = ["R", "r", "p", "bound", "mc", "mc_stderr", "dominated",
              "n_cells", "count_bound"]
    rows = []
    for idx, spec in enumerate(cfg["sets"]):
        es = gd.EllipsoidSet.from_radii(profile, float(spec["R"]), float(spec["r"]))
        bound = gd.prob_outside_bound(es)
        xs = gd.sample(profile, n_mc, seed + 31 * idx)
        outside = (~gd.membership(es, xs)).astype(np.float64)
        mc = float(outside.mean())
        stderr = float(outside.std(ddof=1) / math.sqrt(n_mc))
        n_cells, count_bound = -1, float("nan")
        if enumerate_cover and es.p <= 3 and profile.d <= 6:
            cover = cover_ellipsoid_set(profile, es.R, es.r, es.p)
            n_cells = cover.n_cells
            count_bound = cov.ellipsoid_cover_bound(profile.lambdas, es.R, es.r, es.p)
        rows.append([es.R, es.r, es.p, bound, mc, stderr,
                     int(mc + 3.0 * stderr <= bound), n_cells, count_bound])
    return header, {"": (header, rows)}


def run_effdim(cfg: dict, seed: int):
    points = dataset_from_config(cfg["dataset"], int(cfg["n_points"]), seed)
    est = cov.estimate_effective_dim(points, float(cfg["r"]), float(cfg["tau"]))
    header = ["r", "tau", "n_cells", "p_hat", "retained_mass"]
    rows = [[est.r, est.tau, est.n_cells, est.p_hat, est.retained_mass]]
    return header, {"": (header, rows)}


def run_mle(cfg: dict, seed: int):
    mle_cfg = MleConfig(k=int(cfg.get("k", 20)),
                        aggregation=cfg.get("aggregation", "inverse-of-mean"),
                        max_queries=cfg.get("max_queries"))
    if cfg["mode"] == "single":
        header = ["n", "seed", "k", "estimate"]
        rows = []
        for n in cfg["ns"]:
            for s in range(int(cfg.get("seeds", 1))):
                pts = dataset_from_config(cfg["dataset"], int(n), seed + 101 * s)
                rows.append([int(n), seed + 101 * s, mle_cfg.k,
                             mle_dimension(pts, mle_cfg)])
        return header, {"": (header, rows)}
    profile = gd.profile_from_config(cfg["profile"])
    curve = growth_curve(profile, [int(n) for n in cfg["ns"]], mle_cfg,
                         seeds=int(cfg.get("seeds", 5)), base_seed=seed)
    header = ["n", "median", "q25", "q75"]
    rows = [[p.n, p.median, p.q25, p.q75] for p in curve.points]
    return header, {"": (header, rows)}


def run_cover(cfg: dict, seed: int):
    if cfg["mode"] == "points":
        points = dataset_from_config(cfg["dataset"], int(cfg["n_points"]), seed)
        cover = cover_points(points, float(cfg["r"]))
    else:
        profile = gd.profile_from_config(cfg["profile"])
        cover = cover_ellipsoid_set(profile, float(cfg["R"]), float(cfg["r"]),
                                    int(cfg["p"]))
    header, rows = cover_rows(cover)
    return header, {"": (header, rows)}


def run_approx(cfg: dict, seed: int):
    profile = gd.profile_from_config(cfg["design"]["profile"])
    big_r = float(cfg["design"]["R"])
    d = profile.d
    n_mc = int(cfg.get("n_mc", 20000))
    sweep = int(cfg.get("sweep", 2048))
    header = ["target", "beta", "d"] + ApproxCertificate.CSV_HEADER
    rows = []
    # norm certificates must cover the region the cover cells can reach
    region_radius = max(1.0, float(profile.lambdas[0]) * big_r + 0.3)
    for tname in cfg["targets"]:
        for beta in cfg["betas"]:
            beta = float(beta)
            target = make_target(tname, d, beta, region_radius=region_radius)
            for eps in cfg["epsilons"]:
                eps = float(eps)
                side = tuned_cell_side(d, beta, eps)
                es = gd.EllipsoidSet.from_radii(profile, big_r, side)
                cover = cover_ellipsoid_set(profile, big_r, side, es.p)
                grouped = group_cells(cover)
                net = build_approximator(target, grouped, eps)
                cert = measure_errors(
                    net, target, profile, EllipsoidRegion(es), n_mc, sweep,
                    tau=gd.prob_outside_bound(es), epsilon=eps,
                    cover_cells=cover.n_cells, build_seconds=0.0, seed=seed,
                )
                rows.append([tname, beta, d] + cert.csv_row())
    return header, {"": (header, rows)}


def run_rates(cfg: dict, seed: int):
    design_doc = cfg["design"]
    if design_doc.get("kind") == "flat":
        design = FlatDesign(
            flat_dim=int(design_doc["flat_dim"]),
            ambient_dim=int(design_doc["ambient_dim"]),
            side=float(design_doc.get("side", 1.0)),
            thickness=float(design_doc.get("thickness", 0.0)),
        )
        d = design.ambient_dim
    else:
        design = gd.profile_from_config(design_doc["profile"])
        d = design.d
    beta = float(cfg["beta"])
    target = make_target(cfg["target"], d, beta)
    train_doc = cfg.get("train", {})
    train_cfg = TrainConfig(
        lr=float(train_doc.get("lr", 0.05)),
        batch_size=int(train_doc.get("batch_size", 64)),
        max_epochs=int(train_doc.get("max_epochs", 400)),
        patience=int(train_doc.get("patience", 25)),
        rel_tol=float(train_doc.get("rel_tol", 1e-4)),
    )
    width = int(cfg.get("width", 32))
    hidden = int(cfg.get("hidden_layers", 3))
    fit = rate_experiment(
        target,
        design,
        [int(n) for n in cfg["ns"]],
        float(cfg["sigma"]),
        int(cfg["replications"]),
        p_eff=float(cfg["p_eff"]),
        arch_for=lambda n: (width, hidden),
        train_cfg=train_cfg,
        n_mc=int(cfg.get("n_mc", 20000)),
        base_seed=seed,
    )
    header = ["n", "seed", "beta", "sigma", "p_eff_hypothesis", "risk", "stderr",
              "train_loss", "params"]
    rows = [
        [p.n, p.seed, beta, float(cfg["sigma"]), float(cfg["p_eff"]), p.risk,
         p.stderr, p.train_loss, p.n_params]
        for p in fit.points
    ]
    summary_header = ["slope", "slope_lo", "slope_hi", "exponent_intrinsic",
                      "exponent_ambient"]
    summary_rows = [[
        fit.slope, fit.slope_ci[0], fit.slope_ci[1],
        fit.predicted_exponents["intrinsic"], fit.predicted_exponents["ambient"],
    ]]
    return header, {"": (header, rows), "_summary": (summary_header, summary_rows)}


RUNNERS = {
    "schedule": run_schedule,
    "tails": run_tails,
    "gaussian-check": run_gaussian_check,
    "effdim": run_effdim,
    "mle": run_mle,
    "cover": run_cover,
    "approx": run_approx,
    "rates": run_rates,
}
