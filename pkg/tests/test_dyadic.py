import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bumpcert.dyadic import (CarlesonSeq, DistFn, Lattice, Weight, a2_constant,
                             align, all_dist_fns, apply_Delta, apply_Delta_n,
                             apply_E, average, bump_constant, carleson_load,
                             compute_loads, dist_fn, mix, n_psi,
                             orlicz_bump_constant)
from bumpcert.gauge import YoungFunction, orlicz_norm
from bumpcert.generate import random_carleson, random_lattice

from conftest import make_weight


# --------------------------------------------------------------------------
# lattices
# --------------------------------------------------------------------------

def test_binary_lattice_layout():
    lat = Lattice.binary(3)
    assert lat.n_cells == 15 and lat.n_leaves == 8
    assert lat.mass[0] == 1.0
    # children masses add to the parent, leaves partition the root
    for i in range(7):
        kids = lat.children(i)
        assert lat.mass[kids].sum() == pytest.approx(lat.mass[i], rel=1e-15)
    assert lat.leaf_mass.sum() == pytest.approx(1.0, rel=1e-15)


def test_lattice_paths_roundtrip():
    lat = Lattice.uniform(3, 3)
    for i in (0, 5, 17, lat.n_cells - 1):
        assert lat.cell_at(lat.path(i)) == i
    with pytest.raises(ValueError):
        lat.cell_at("9")


def test_nested_lattice_uneven_masses():
    nested = (2.0, [(1.2, [0.7, 0.5]), (0.8, [(0.3, None), (0.5, None)])])
    lat = Lattice.from_nested(nested)
    assert lat.depth == 2 and lat.n_leaves == 4
    assert lat.mass[0] == 2.0
    assert list(lat.mass[lat.cells_at_depth(2)]) == [0.7, 0.5, 0.3, 0.5]


def test_nested_lattice_rejects_uneven_depth():
    with pytest.raises(ValueError):
        Lattice.from_nested((1.0, [(0.5, [0.25, 0.25]), (0.5, None)]))


def test_lattice_rejects_bad_masses():
    with pytest.raises(ValueError):
        Lattice.from_nested((1.0, [0.5, 0.6]))


def test_descendants_and_depth():
    lat = Lattice.binary(4)
    assert list(lat.descendants(0, 1)) == [1, 2]
    assert len(lat.descendants(0, 4)) == 16
    assert lat.depth_of(0) == 0 and lat.depth_of(3) == 2
    with pytest.raises(ValueError):
        lat.descendants(0, 5)


def test_random_lattice_valid(rng):
    lat = random_lattice(4, rng, max_branching=4)
    assert lat.depth == 4
    assert lat.leaf_mass.sum() == pytest.approx(lat.mass[0], rel=1e-12)


# --------------------------------------------------------------------------
# averaging and difference operators
# --------------------------------------------------------------------------

def test_average_and_E(lat4, rng):
    w = make_weight(lat4, rng)
    f = rng.normal(size=lat4.n_leaves)
    e0 = apply_E(lat4, f, 0)
    assert np.allclose(e0, np.dot(f, lat4.leaf_mass))
    assert average(w, 0) == pytest.approx(float(np.dot(w.values, lat4.leaf_mass)))


def test_delta_kills_constants(lat4):
    for i in (0, 1, 4):
        assert np.allclose(apply_Delta(lat4, np.ones(lat4.n_leaves), i), 0.0)


def test_delta_binary_example():
    lat = Lattice.binary(1)
    out = apply_Delta(lat, np.array([1.0, 3.0]), 0)
    assert np.allclose(out, [-1.0, 1.0])


def test_delta_n_telescoping(rng):
    lat = Lattice.binary(4)
    n = 3
    L = lat.n_leaves
    # sum over k < n of per-level differences equals the order-n difference
    lhs = np.zeros((L, L))
    rhs = np.zeros((L, L))
    for j in range(L):
        e = np.zeros(L)
        e[j] = 1.0
        acc = np.zeros(L)
        for k in range(n):
            for i in lat.cells_at_depth(k):
                acc += apply_Delta(lat, e, i)
        lhs[:, j] = acc
        rhs[:, j] = apply_Delta_n(lat, e, 0, n)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_delta_n_depth_overflow():
    lat = Lattice.binary(2)
    with pytest.raises(ValueError):
        apply_Delta_n(lat, np.ones(4), 0, 3)


def test_delta_mean_zero_supported(lat4, rng):
    f = rng.normal(size=lat4.n_leaves)
    d = apply_Delta_n(lat4, f, 1, 2)
    lo, hi = lat4.leaf_lo[1], lat4.leaf_hi[1]
    assert np.dot(d, lat4.leaf_mass) == pytest.approx(0.0, abs=1e-14)
    outside = np.ones(lat4.n_leaves, dtype=bool)
    outside[lo:hi] = False
    assert np.all(d[outside] == 0.0)


# --------------------------------------------------------------------------
# distribution functions
# --------------------------------------------------------------------------

def test_dist_constant_weight(lat4):
    w = Weight(lat4, np.full(lat4.n_leaves, 2.5))
    d = dist_fn(w, 0)
    assert list(d.ts) == [2.5] and list(d.vs) == [1.0]
    assert d.integral() == pytest.approx(2.5)
    assert d.eval([0.0, 2.4999, 2.5, 99.0]).tolist() == [1.0, 1.0, 0.0, 0.0]


def test_dist_two_leaves_example():
    lat = Lattice.binary(1)
    d = dist_fn(Weight(lat, np.array([1.0, 3.0])), 0)
    assert list(d.ts) == [1.0, 3.0]
    assert list(d.vs) == [1.0, 0.5]


def test_dist_zero_weight(lat4):
    d = dist_fn(Weight(lat4, np.zeros(lat4.n_leaves)), 0)
    assert d.is_zero and d.integral() == 0.0


def test_dist_additivity_exact(lat4, rng):
    w = make_weight(lat4, rng, zeros=0.2)
    d0 = dist_fn(w, 0)
    kids = lat4.children(0)
    alphas = lat4.mass[kids] / lat4.mass[0]
    mixed = mix(alphas, [dist_fn(w, int(k)) for k in kids])
    ts, V = align([d0, mixed])
    assert np.max(np.abs(V[0] - V[1]), initial=0.0) < 1e-14


def test_dist_integral_matches_average(lat6, rng):
    w = make_weight(lat6, rng)
    for i in (0, 3, 17, 40):
        assert dist_fn(w, i).integral() == pytest.approx(average(w, i), rel=1e-12)


def test_all_dist_fns_match_per_cell(rng):
    lat = random_lattice(3, rng, max_branching=3)
    vals = np.round(rng.uniform(0, 3, size=lat.n_leaves), 1)  # force ties
    vals[rng.random(lat.n_leaves) < 0.2] = 0.0
    w = Weight(lat, vals)
    cd = all_dist_fns(w)
    for i in range(lat.n_cells):
        one = dist_fn(w, i)
        flat = cd.dist(i)
        assert np.array_equal(one.ts, flat.ts)
        assert np.allclose(one.vs, flat.vs, rtol=1e-14)
    assert np.allclose(cd.integrals(), lat.cell_averages(w.values), rtol=1e-12)


def test_dist_validation():
    with pytest.raises(ValueError):
        DistFn(np.array([1.0, 0.5]), np.array([1.0, 0.5]))  # breaks not increasing
    with pytest.raises(ValueError):
        DistFn(np.array([0.5, 1.0]), np.array([0.5, 0.5]))  # heights not strict
    with pytest.raises(ValueError):
        DistFn(np.array([-0.5]), np.array([0.5]))


# --------------------------------------------------------------------------
# the n functional
# --------------------------------------------------------------------------

def test_n_psi_basics(gauge2, lat4):
    assert n_psi(dist_fn(Weight(lat4, np.zeros(lat4.n_leaves)), 0), gauge2) == 0.0
    d = dist_fn(Weight(lat4, np.ones(lat4.n_leaves)), 0)
    assert n_psi(d, gauge2) == pytest.approx(2.0, rel=1e-14)


@settings(max_examples=60, deadline=None)
@given(lam=st.floats(min_value=1e-6, max_value=1e6),
       seed=st.integers(min_value=0, max_value=2 ** 31))
def test_n_psi_weight_homogeneity(gauge2, lam, seed):
    rng = np.random.default_rng(seed)
    lat = Lattice.binary(3)
    w = Weight(lat, np.exp(rng.normal(size=8)))
    base = n_psi(dist_fn(w, 0), gauge2)
    scaled = n_psi(dist_fn(w.scaled(lam), 0), gauge2)
    assert scaled == pytest.approx(lam * base, rel=1e-12)


def test_mean_bounded_by_n_psi(gauges, lat6, rng):
    # <w>_I <= w_over_n_bound * n_Psi(N_I^w) <= c_psi * n_Psi at every cell
    for _ in range(5):
        w = make_weight(lat6, rng, zeros=0.1)
        cd = all_dist_fns(w)
        means = cd.integrals()
        for g in gauges.values():
            ns = cd.n_psi_all(g)
            assert np.all(means <= g.w_over_n_bound * ns * (1 + 1e-12))
            assert np.all(means <= g.c_psi * ns * (1 + 1e-12))


def test_martingale_average_identity(lat6, rng):
    w = make_weight(lat6, rng)
    f = rng.normal(size=lat6.n_leaves)
    F = f * np.sqrt(w.values)
    avg = lat6.cell_averages(F)
    for i in range(lat6.level_off[lat6.depth]):
        kids = lat6.children(i)
        alphas = lat6.mass[kids] / lat6.mass[i]
        assert avg[i] == pytest.approx(float(alphas @ avg[kids]), rel=1e-12, abs=1e-14)


# --------------------------------------------------------------------------
# bump and A2 constants
# --------------------------------------------------------------------------

def test_bump_constant_zero_and_constant(gauge2, lat4):
    z = Weight(lat4, np.zeros(lat4.n_leaves))
    assert bump_constant(z, z, gauge2, gauge2)[0] == 0.0
    ones = Weight(lat4, np.ones(lat4.n_leaves))
    val, cell, rho = bump_constant(ones, ones, gauge2, gauge2)
    assert val == pytest.approx(4.0, rel=1e-13)  # Psi(1)^2, every cell equal


def test_bump_constant_rescaling(gauge2, lat4, rng):
    v = make_weight(lat4, rng)
    w = make_weight(lat4, rng)
    val, _, rho = bump_constant(v, w, gauge2, gauge2)
    val2, _, _ = bump_constant(v.scaled(1.0 / rho), w, gauge2, gauge2)
    assert val2 <= 1.0 + 1e-12


def test_a2_constant_basics(lat4, rng):
    ones = Weight(lat4, np.ones(lat4.n_leaves))
    assert a2_constant(ones, ones)[0] == pytest.approx(1.0)
    # squared A2 never exceeds the Orlicz bump for Phi(t) >= t
    phi = YoungFunction.log_power(2.0)
    lat = Lattice.binary(3)
    rng = np.random.default_rng(5)
    for _ in range(25):
        v = make_weight(lat, rng)
        w = make_weight(lat, rng)
        a2 = a2_constant(v, w)[0]
        ob = orlicz_bump_constant(v, w, phi, phi)[0]
        assert a2 ** 2 <= ob * (1 + 1e-12)


def test_orlicz_bump_against_plain_norms(lat4, rng):
    phi = YoungFunction.log_power(2.0)
    v = make_weight(lat4, rng)
    w = make_weight(lat4, rng)
    val, cell = orlicz_bump_constant(v, w, phi, phi)
    lo, hi = lat4.leaf_lo[cell], lat4.leaf_hi[cell]
    direct = (orlicz_norm(list(zip(lat4.leaf_mass[lo:hi], v.values[lo:hi])), phi)
              * orlicz_norm(list(zip(lat4.leaf_mass[lo:hi], w.values[lo:hi])), phi))
    assert val == pytest.approx(direct, rel=1e-12)


# --------------------------------------------------------------------------
# Carleson sequences
# --------------------------------------------------------------------------

def test_carleson_trivial(lat4):
    zero = CarlesonSeq(lat4, np.zeros(lat4.n_cells))
    assert np.all(zero.loads == 0.0)
    a = np.zeros(lat4.n_cells)
    a[0] = 1.0
    seq = CarlesonSeq(lat4, a)
    assert carleson_load(seq, 0) == 1.0
    assert np.all(seq.loads[1:] == 0.0)


def test_carleson_recursion_against_double_sum(rng):
    lat = random_lattice(4, rng, max_branching=3)
    seq = random_carleson(lat, rng)
    # oracle: direct double sum over the subtree of every cell
    for i in range(lat.n_cells):
        sub = lat.subtree(i)
        direct = float(np.dot(seq.a[sub], lat.mass[sub])) / lat.mass[i]
        assert carleson_load(seq, i) == pytest.approx(direct, rel=1e-12, abs=1e-15)
    assert seq.loads.max() == pytest.approx(1.0, abs=1e-12)


def test_carleson_recursion_identity(rng):
    lat = Lattice.binary(5)
    seq = random_carleson(lat, rng)
    for i in range(lat.level_off[lat.depth]):
        kids = lat.children(i)
        alphas = lat.mass[kids] / lat.mass[i]
        want = seq.a[i] + float(alphas @ seq.loads[kids])
        assert seq.loads[i] == pytest.approx(want, rel=1e-12, abs=1e-15)


def test_carleson_rejects_violations(lat4):
    a = np.zeros(lat4.n_cells)
    a[0] = 1.5
    with pytest.raises(ValueError):
        CarlesonSeq(lat4, a)
    with pytest.raises(ValueError):
        CarlesonSeq(lat4, np.full(lat4.n_cells, -0.1))


def test_weight_validation(lat4):
    with pytest.raises(ValueError):
        Weight(lat4, -np.ones(lat4.n_leaves))
    with pytest.raises(ValueError):
        Weight(lat4, np.ones(3))
