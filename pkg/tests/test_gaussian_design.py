import math

import numpy as np
import pytest

from effdimlab import gaussian_design as gd


def exp_profile(d=4, mu=1.0, theta=1.0, rotation=None):
    return gd.EigenProfile.exponential(d, mu, theta, rotation=rotation)


def random_rotation(d, seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    return q


# ---------------------------------------------------------------------------
# profiles and sampling
# ---------------------------------------------------------------------------

def test_profile_validates_ordering():
    with pytest.raises(ValueError):
        gd.EigenProfile.explicit([0.1, 0.5])


def test_profile_decay_laws():
    p = gd.EigenProfile.exponential(3, mu=2.0, theta=0.5)
    assert np.allclose(p.lambdas, 2.0 * np.exp(-0.5 * np.arange(1, 4)))
    q = gd.EigenProfile.polynomial(3, rho=1.5, omega=2.0)
    assert np.allclose(q.lambdas, 1.5 * np.arange(1, 4, dtype=float) ** -2.0)
    with pytest.raises(ValueError):
        gd.EigenProfile.polynomial(3, rho=1.0, omega=0.9)


def test_sample_moments():
    prof = exp_profile()
    xs = gd.sample(prof, 10 ** 5, seed=3)
    assert np.all(np.abs(xs.mean(axis=0)) <= 4.0 * prof.lambdas / math.sqrt(10 ** 5))
    assert np.allclose(xs.var(axis=0), prof.lambdas ** 2, rtol=0.05)


def test_sample_deterministic_per_seed():
    prof = exp_profile()
    a = gd.sample(prof, 1000, seed=7)
    b = gd.sample(prof, 1000, seed=7)
    c = gd.sample(prof, 1000, seed=8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sample_rotation_preserves_covariance_spectrum():
    q = random_rotation(3, 1)
    prof = gd.EigenProfile.exponential(3, 1.0, 0.7, rotation=q)
    xs = gd.sample(prof, 2 * 10 ** 5, seed=5)
    cov = np.cov(xs.T)
    eig = np.sort(np.linalg.eigvalsh(cov))[::-1]
    assert np.allclose(eig, prof.lambdas ** 2, rtol=0.08)


# ---------------------------------------------------------------------------
# membership and bounds
# ---------------------------------------------------------------------------

def test_membership_center_and_boundary():
    prof = exp_profile()
    es = gd.EllipsoidSet(profile=prof, R=3.0, r=0.4, p=2)
    assert gd.membership(es, np.zeros((1, 4)))[0]
    z = np.zeros((1, 4))
    z[0, 0] = prof.lambdas[0] * 3.0 * (1 + 1e-9)
    assert not gd.membership(es, z)[0]


def test_from_radii_picks_largest_feasible_p():
    prof = exp_profile(theta=1.0)
    es = gd.EllipsoidSet.from_radii(prof, R=3.0, r=0.5)
    thr = 0.5 / 6.0
    assert prof.lambdas[es.p - 1] >= thr
    assert es.p == prof.d or prof.lambdas[es.p] < thr


def test_prob_outside_bound_components():
    prof = exp_profile(d=3)
    es = gd.EllipsoidSet(profile=prof, R=3.0, r=0.3, p=1)
    expected = math.sqrt((2 * 9 + 1) / 1) * math.exp(-81.0 / 19.0)
    for lam in prof.lambdas[1:]:
        expected += math.exp(-0.09 / (8.0 * lam ** 2))
    assert math.isclose(gd.prob_outside_bound(es), expected, rel_tol=1e-12)


def test_prob_outside_bound_requires_R2_above_p():
    prof = exp_profile()
    es = gd.EllipsoidSet(profile=prof, R=1.0, r=0.4, p=2)
    with pytest.raises(ValueError):
        gd.prob_outside_bound(es)


def test_prob_outside_bound_vanishes_for_huge_sets():
    prof = exp_profile(d=3)
    es = gd.EllipsoidSet(profile=prof, R=40.0, r=8.0, p=1)
    assert gd.prob_outside_bound(es) < 1e-100


def test_bound_dominates_monte_carlo():
    prof = exp_profile(d=4, theta=0.8)
    es = gd.EllipsoidSet.from_radii(prof, R=3.0, r=0.6)
    bound = gd.prob_outside_bound(es)
    xs = gd.sample(prof, 10 ** 6, seed=11)
    outside = (~gd.membership(es, xs)).astype(float)
    mc = outside.mean()
    stderr = outside.std(ddof=1) / 1000.0
    assert mc + 3 * stderr <= bound


def test_membership_rotation_equivariance():
    # rotating the profile leaves the in-set probability invariant
    base = gd.EigenProfile.exponential(3, 1.0, 0.6)
    rotated = gd.EigenProfile.exponential(3, 1.0, 0.6, rotation=random_rotation(3, 2))
    es_base = gd.EllipsoidSet(profile=base, R=2.5, r=0.5, p=2)
    es_rot = gd.EllipsoidSet(profile=rotated, R=2.5, r=0.5, p=2)
    frac_base = gd.membership(es_base, gd.sample(base, 10 ** 5, seed=4)).mean()
    frac_rot = gd.membership(es_rot, gd.sample(rotated, 10 ** 5, seed=4)).mean()
    assert abs(frac_base - frac_rot) < 0.01


# ---------------------------------------------------------------------------
# tail bounds
# ---------------------------------------------------------------------------

def test_tail_bound_scalar_value_and_mc():
    assert math.isclose(gd.tail_bound_scalar(2.0), math.exp(-2.0), rel_tol=1e-12)
    gen = np.random.Generator(np.random.Philox(key=1))
    z = np.abs(gen.standard_normal(10 ** 6))
    assert (z > 2.0).mean() <= gd.tail_bound_scalar(2.0)


def test_tail_bound_scalar_approaches_one():
    assert gd.tail_bound_scalar(1e-9) <= 1.0
    assert gd.tail_bound_scalar(1e-9) > 0.999


def test_tail_bound_chisq_dominates_mc():
    gen = np.random.Generator(np.random.Philox(key=2))
    z = gen.standard_normal((10 ** 6, 2))
    frac = (np.linalg.norm(z, axis=1) > 3.0).mean()
    assert frac <= gd.tail_bound_chisq(2, 3.0)


def test_tail_bounds_monotone_in_t():
    ts = np.linspace(0.5, 4.0, 15)
    scalar = [gd.tail_bound_scalar(t) for t in ts]
    assert all(a > b for a, b in zip(scalar, scalar[1:]))
    # the chi-square bound peaks near t^2 = p/sqrt(2); it is monotone in the
    # regime t^2 > p where it is used (matching the R^2 > p precondition)
    for p in (1, 2, 5):
        ts_valid = np.linspace(math.sqrt(p) + 1e-6, math.sqrt(p) + 4.0, 15)
        chis = [gd.tail_bound_chisq(p, t) for t in ts_valid]
        assert all(a > b for a, b in zip(chis, chis[1:]))


def test_chisq_bound_at_p1_dominates_scalar_probability():
    gen = np.random.Generator(np.random.Philox(key=3))
    z = np.abs(gen.standard_normal(10 ** 6))
    for t in (1.0, 2.0, 3.0):
        assert (z > t).mean() <= gd.tail_bound_chisq(1, t)


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------

def test_schedule_exponential_doc_example():
    prof = exp_profile(d=8, mu=1.0, theta=1.0)
    s = gd.schedule(prof, math.e ** 4, beta=1.0, eta=0.1)
    assert math.isclose(s.r, math.e ** -0.9, rel_tol=1e-12)
    assert math.isclose(s.R, 4.0, rel_tol=1e-12)
    assert math.isclose(s.exponent, 0.45, rel_tol=1e-12)


def test_schedule_exponent_shrinks_with_n():
    prof = exp_profile(d=8)
    exps = [gd.schedule(prof, float(n), 1.0, 0.05).exponent
            for n in (10 ** 2, 10 ** 4, 10 ** 6, 10 ** 8)]
    assert all(a > b for a, b in zip(exps, exps[1:]))


def test_schedule_p_nondecreasing_in_n():
    prof = exp_profile(d=50)
    ps = [gd.schedule(prof, float(n), 1.5, 0.05).p_raw
          for n in (10 ** 2, 10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6)]
    assert all(a <= b for a, b in zip(ps, ps[1:]))


def test_schedule_truncates_p_at_d():
    prof = exp_profile(d=2)
    s = gd.schedule(prof, 10 ** 6, beta=0.5)
    assert s.p_truncated
    assert s.p == 2.0


def test_schedule_polynomial_formulas():
    prof = gd.EigenProfile.polynomial(10, rho=1.0, omega=2.0)
    n = 10 ** 4.0
    s = gd.schedule(prof, n, beta=1.0)
    kappa = (1 + 0.5) / 2.0
    nk = n ** kappa
    assert math.isclose(s.r, n ** (-1.0 / (2.0 + nk)), rel_tol=1e-12)
    assert math.isclose(s.R, n ** (1.0 / (4.0 + 2.0 * nk)), rel_tol=1e-12)
    assert math.isclose(s.p_raw, (2.0 * s.R / s.r) ** 0.5, rel_tol=1e-12)
    assert math.isclose(s.exponent, 2.0 / (2.0 + nk), rel_tol=1e-12)


def test_schedule_rejects_explicit_profiles():
    prof = gd.EigenProfile.explicit([1.0, 0.5])
    with pytest.raises(ValueError):
        gd.schedule(prof, 100.0, 1.0)


def test_profile_from_config_round_trip():
    p = gd.profile_from_config({"decay": "exp", "mu": 1.0, "theta": 0.5, "d": 3})
    assert p.law == "exponential" and p.d == 3
    q = gd.profile_from_config({"decay": "poly", "rho": 2.0, "omega": 1.5, "d": 4})
    assert q.law == "polynomial"
    e = gd.profile_from_config({"decay": "explicit", "lambdas": [1.0, 0.1]})
    assert e.law == "explicit"
    with pytest.raises(ValueError):
        gd.profile_from_config({"decay": "nope"})
