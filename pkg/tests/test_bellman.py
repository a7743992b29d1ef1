import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bumpcert.bellman import (balanced_signs, b_value, check_dB_dM, check_drop,
                              check_multi_point, check_two_point,
                              directional_derivs, u_of_MN, u_of_N)
from bumpcert.dyadic import DistFn, mix, n_psi
from bumpcert.generate import (random_dist, random_dist_pair,
                               random_multi_instance, trial_rng)

ONE_BLOCK = DistFn(np.array([1.0]), np.array([1.0]))
HALF_BLOCK = DistFn(np.array([1.0]), np.array([0.5]))


# --------------------------------------------------------------------------
# the two-variable functional u
# --------------------------------------------------------------------------

def test_u_zero_dist(gauge2):
    assert u_of_N(DistFn(np.empty(0), np.empty(0)), gauge2) == 0.0


def test_u_constant_weight_golden(gauge2):
    # u = 2 - m(1) for the unit-height block; m(1) = 0.7226572337764453 by
    # independent quadrature of the closed-form m'
    assert u_of_N(ONE_BLOCK, gauge2) == pytest.approx(1.2773427662235548, rel=1e-14)


def test_u_sandwich(gauges, rng):
    for _ in range(10_000):
        d = random_dist(rng)
        w = d.integral()
        for g in gauges.values():
            u = u_of_N(d, g)
            assert w * (1 - 1e-12) <= u <= 2 * w * (1 + 1e-12)


# --------------------------------------------------------------------------
# directional derivatives
# --------------------------------------------------------------------------

def test_derivs_zero_direction(gauge2):
    rep = directional_derivs(ONE_BLOCK, ONE_BLOCK, gauge2)
    assert rep.u_prime == rep.u_second == rep.w_delta == rep.kappa == 0.0


def test_derivs_match_finite_differences(gauges, rng):
    # heights >= 0.1 keep the fourth-derivative truncation of the step-1e-4
    # central difference below the 1e-6 comparison level
    for trial in range(300):
        na, nb = random_dist_pair(rng, v_min=0.1, common_end=True)
        center = mix([0.5, 0.5], [na, nb])
        for g in gauges.values():
            rep = directional_derivs(center, na, g)
            if rep.w_delta < 0.05:
                continue
            assert rep.fd_first == pytest.approx(rep.u_prime, rel=1e-6, abs=1e-10)
            assert rep.fd_second == pytest.approx(rep.u_second, rel=1e-6, abs=1e-10)


def test_derivs_kappa_and_second_bound(gauges, rng):
    for trial in range(2000):
        na, nb = random_dist_pair(rng)
        center = mix([0.5, 0.5], [na, nb])
        for g in gauges.values():
            rep = directional_derivs(center, na, g, with_fd=False)
            assert abs(rep.kappa) <= 2.0 + 1e-12
            nn = n_psi(center, g)
            if nn > 0:
                assert -rep.u_second >= rep.w_delta ** 2 / nn * (1 - 1e-12)


def test_derivs_reject_invalid_perturbation(gauge2):
    # mirror 2*center - toward would exceed height 1
    center = DistFn(np.array([1.0]), np.array([0.9]))
    toward = DistFn(np.array([1.0]), np.array([0.5]))
    with pytest.raises(ValueError):
        directional_derivs(center, toward, gauge2)


def test_derivs_reject_support_violation(gauge2):
    # direction living where the center vanishes
    center = DistFn(np.array([1.0]), np.array([0.5]))
    toward = DistFn(np.array([2.0]), np.array([0.5]))
    with pytest.raises(ValueError):
        directional_derivs(center, toward, gauge2)


# --------------------------------------------------------------------------
# two-point inequality
# --------------------------------------------------------------------------

def test_two_point_identical_is_zero(gauge2):
    rep = check_two_point(0.7, ONE_BLOCK, 0.7, ONE_BLOCK, gauge2)
    assert rep.slack == 0.0 and rep.lhs == 0.0 and rep.rhs == 0.0


def test_two_point_golden_regression(gauge2):
    # all values established by direct independent evaluation of the
    # functionals (incomplete-gamma m, quadrature cross-checked)
    rep = check_two_point(1.0, ONE_BLOCK, 0.0, HALF_BLOCK, gauge2)
    assert rep.b1 == pytest.approx(0.78287522068683674, rel=1e-12)
    assert rep.b2 == 0.0
    assert rep.b_mid == pytest.approx(0.247115618975987, rel=1e-12)
    assert rep.n_mid == pytest.approx(1.9625584742314783, rel=1e-12)
    assert rep.lhs == pytest.approx(0.14432199136743137, rel=1e-12)
    assert rep.rhs == pytest.approx(0.0070769299724063831, rel=1e-12)
    assert rep.slack == pytest.approx(0.13724506139502499, rel=1e-12)


def test_two_point_zero_weights(gauge2):
    zero = DistFn(np.empty(0), np.empty(0))
    rep = check_two_point(0.0, zero, 0.0, zero, gauge2)
    assert rep.slack == 0.0
    with pytest.raises(ValueError):
        check_two_point(1.0, zero, 1.0, zero, gauge2)


def test_two_point_monte_carlo(gauges):
    rng = trial_rng(11, 0)
    for _ in range(3000):
        n1, n2 = random_dist_pair(rng)
        f1, f2 = rng.normal(scale=2.0, size=2)
        for g in gauges.values():
            rep = check_two_point(float(f1), n1, float(f2), n2, g)
            assert rep.slack >= -1e-9 * (1.0 + abs(rep.rhs))


# --------------------------------------------------------------------------
# multi-point inequality and balanced signs
# --------------------------------------------------------------------------

def test_multi_point_identical_zero(gauge2):
    rep = check_multi_point([0.25, 0.75], [1.0, 1.0], [ONE_BLOCK, ONE_BLOCK], gauge2)
    assert rep.slack == pytest.approx(0.0, abs=1e-15)


def test_multi_point_two_children_reduction(gauge2):
    # at n = 2 with equal weights the right side is dominated by the
    # two-point right side (same spread, constant c/16 <= c/4)
    two = check_two_point(1.0, ONE_BLOCK, 0.0, HALF_BLOCK, gauge2)
    multi = check_multi_point([0.5, 0.5], [1.0, 0.0], [ONE_BLOCK, HALF_BLOCK], gauge2)
    assert multi.lhs == pytest.approx(two.lhs, rel=1e-14)
    assert multi.rhs <= two.rhs * (1 + 1e-14)


def test_multi_point_monte_carlo(gauges):
    rng = trial_rng(13, 0)
    for _ in range(1500):
        alphas, fs, dists = random_multi_instance(rng)
        for g in gauges.values():
            rep = check_multi_point(alphas, fs, dists, g)
            assert rep.slack >= -1e-9 * (1.0 + abs(rep.rhs))


def test_multi_point_validation(gauge2):
    with pytest.raises(ValueError):
        check_multi_point([0.5, 0.6], [1.0, 2.0], [ONE_BLOCK, ONE_BLOCK], gauge2)


def test_balanced_signs_examples():
    beta = balanced_signs([0.5, 0.5], [1.0, -1.0])
    assert np.allclose(beta, [1.0, -1.0])
    alphas = np.array([0.5, 0.25, 0.25])
    x = np.array([1.0, -1.0, -1.0])
    beta = balanced_signs(alphas, x)
    assert float(alphas @ (beta * x)) >= 0.5 * float(alphas @ np.abs(x)) - 1e-12
    assert abs(float(alphas @ beta)) <= 1e-12


def test_balanced_signs_zero_vector():
    assert np.all(balanced_signs([0.5, 0.5], [0.0, 0.0]) == 0.0)


def _sign_oracle(alphas, x):
    # exhaustive vertex enumeration, independent of the implementation
    n = len(x)
    best = -np.inf
    for j in range(n):
        for bits in range(2 ** (n - 1)):
            beta = np.empty(n)
            others = [k for k in range(n) if k != j]
            for pos, k in enumerate(others):
                beta[k] = 1.0 if (bits >> pos) & 1 else -1.0
            bj = -float(np.dot(alphas[others], beta[others])) / alphas[j]
            if abs(bj) > 1 + 1e-12:
                continue
            beta[j] = np.clip(bj, -1, 1)
            best = max(best, float(np.dot(alphas, beta * x)))
    return best


def test_balanced_signs_against_vertex_oracle(rng):
    for _ in range(200):
        n = int(rng.integers(2, 9))
        alphas = rng.uniform(0.05, 1.0, size=n)
        alphas /= alphas.sum()
        x = rng.normal(size=n)
        x -= float(alphas @ x)
        if np.max(np.abs(x)) < 1e-12:
            continue
        beta = balanced_signs(alphas, x)
        achieved = float(alphas @ (beta * x))
        oracle = _sign_oracle(alphas, x)
        assert achieved == pytest.approx(oracle, rel=1e-10, abs=1e-12)
        assert abs(float(alphas @ beta)) <= 1e-12
        assert np.all(np.abs(beta) <= 1 + 1e-12)


def test_balanced_signs_median_path_matches_enumeration(rng):
    # force both code paths on the same instances (n <= 8 uses vertices)
    from bumpcert.bellman import _signs_by_median
    for _ in range(300):
        n = int(rng.integers(2, 9))
        alphas = rng.uniform(0.05, 1.0, size=n)
        alphas /= alphas.sum()
        x = rng.normal(size=n)
        x -= float(alphas @ x)
        if np.max(np.abs(x)) < 1e-12:
            continue
        med = _signs_by_median(alphas, x)
        assert float(alphas @ (med * x)) == pytest.approx(_sign_oracle(alphas, x),
                                                          rel=1e-10, abs=1e-12)


def test_balanced_signs_large_n(rng):
    for _ in range(300):
        n = int(rng.integers(9, 17))
        alphas = rng.uniform(0.05, 1.0, size=n)
        alphas /= alphas.sum()
        x = rng.normal(size=n)
        x -= float(alphas @ x)
        beta = balanced_signs(alphas, x)
        l1 = float(alphas @ np.abs(x))
        assert float(alphas @ (beta * x)) >= 0.5 * l1 * (1 - 1e-12)
        assert abs(float(alphas @ beta)) <= 1e-12
        assert np.all(np.abs(beta) <= 1 + 1e-12)


# --------------------------------------------------------------------------
# the three-variable functional
# --------------------------------------------------------------------------

def test_u_mn_sandwich_and_bounds(gauges, rng):
    for _ in range(2000):
        d = random_dist(rng)
        M = float(rng.uniform(0, 1))
        w = d.integral()
        for g in gauges.values():
            u = u_of_MN(M, d, g)
            assert w * (1 - 1e-12) <= u <= 2 * w * (1 + 1e-12)


def test_u_mn_validation(gauge2):
    with pytest.raises(ValueError):
        u_of_MN(1.5, ONE_BLOCK, gauge2)
    assert u_of_MN(0.3, DistFn(np.empty(0), np.empty(0)), gauge2) == 0.0


def test_dB_dM_skip_zero_weight(gauge2):
    rep = check_dB_dM(1.0, DistFn(np.empty(0), np.empty(0)), 0.5, gauge2)
    assert rep.skipped and rep.slack == 0.0


def test_dB_dM_analytic_vs_fd_and_bound(gauges, rng):
    for _ in range(400):
        d = random_dist(rng, v_min=0.02)
        M = float(rng.uniform(0.05, 0.95))
        f = float(rng.normal(scale=2.0))
        for g in gauges.values():
            rep = check_dB_dM(f, d, M, g, with_fd=True)
            assert rep.slack >= -1e-9 * (1.0 + abs(rep.rhs))
            if abs(rep.lhs) > 1e-12:
                assert rep.fd == pytest.approx(rep.lhs, rel=1e-6)


def test_drop_degenerate(gauge2):
    rep = check_drop([0.5, 0.5], 0.0, [1.0, 1.0], [ONE_BLOCK, ONE_BLOCK],
                     [0.5, 0.5], gauge2)
    assert rep.slack == pytest.approx(0.0, abs=1e-15)


def test_drop_monte_carlo(gauges):
    rng = trial_rng(17, 0)
    for _ in range(1000):
        alphas, fs, dists = random_multi_instance(rng, n_max=8)
        Ms = rng.uniform(0, 1, size=len(alphas))
        a = float(rng.uniform(0, 1.0 - float(alphas @ Ms)))
        for g in gauges.values():
            rep = check_drop(alphas, a, fs, dists, Ms, g)
            assert rep.slack >= -1e-9 * (1.0 + abs(rep.rhs))


def test_drop_validation(gauge2):
    with pytest.raises(ValueError):
        check_drop([1.0], 0.9, [1.0], [ONE_BLOCK], [0.5], gauge2)  # M > 1
    with pytest.raises(ValueError):
        check_drop([1.0], -0.1, [1.0], [ONE_BLOCK], [0.5], gauge2)


# --------------------------------------------------------------------------
# structural properties of the Bellman surface
# --------------------------------------------------------------------------

def test_hessian_form_psd(rng):
    # 2 df^2/u - 4 f df du/u^2 + 2 f^2 du^2/u^3 = (2/u)(df - f du/u)^2 >= 0
    for _ in range(2000):
        f, df, du = rng.normal(size=3)
        u = float(rng.uniform(0.05, 3.0))
        q = 2 * df ** 2 / u - 4 * f * df * du / u ** 2 + 2 * f ** 2 * du ** 2 / u ** 3
        assert q >= -1e-12 * (1 + abs(f) + abs(du)) ** 2


def test_second_difference_gap(gauges, rng):
    # the second difference of tau -> B(f + tau df, N + tau dN) dominates
    # c_gap * df^2 / n(N); with dN = na - center, the perturbed step
    # functions are the convex mixes (1-h) center + h na and
    # (1-h) center + h nb (the mirror, since na + nb = 2 center)
    h = 1e-3
    for _ in range(400):
        na, nb = random_dist_pair(rng, v_min=0.05, common_end=True)
        center = mix([0.5, 0.5], [na, nb])
        f, df = rng.normal(size=2)
        for g in gauges.values():
            nn = n_psi(center, g)
            if nn <= 0:
                continue
            b_up = b_value(f + h * df, u_of_N(mix([1 - h, h], [center, na]), g))
            b_dn = b_value(f - h * df, u_of_N(mix([1 - h, h], [center, nb]), g))
            b0 = b_value(f, u_of_N(center, g))
            second = (b_up - 2 * b0 + b_dn) / h ** 2
            assert second >= g.c_gap * df ** 2 / nn * (1 - 1e-4) - 1e-9


def test_midpoint_gauge_bound(gauges, rng):
    # n((N1+N2)/2) >= n(N1)/2
    for _ in range(1500):
        n1, n2 = random_dist_pair(rng)
        mid = mix([0.5, 0.5], [n1, n2])
        for g in gauges.values():
            assert n_psi(mid, g) >= 0.5 * n_psi(n1, g) * (1 - 1e-12)


def test_three_var_convexity(gauges, rng):
    for _ in range(600):
        n1, n2 = random_dist_pair(rng)
        f1, f2 = rng.normal(size=2)
        M1, M2 = rng.uniform(0, 1, size=2)
        lam = float(rng.uniform(0.05, 0.95))
        for g in gauges.values():
            mid = mix([lam, 1 - lam], [n1, n2])
            fm = lam * f1 + (1 - lam) * f2
            Mm = lam * M1 + (1 - lam) * M2
            bm = b_value(fm, u_of_MN(Mm, mid, g))
            b1 = b_value(f1, u_of_MN(M1, n1, g))
            b2 = b_value(f2, u_of_MN(M2, n2, g))
            assert bm <= lam * b1 + (1 - lam) * b2 + 1e-9 * (1 + b1 + b2)
