import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import path_graph
from geosurf import errors
from geosurf.generators import euclidean_grid, map_suite, tree
from geosurf.measures import (
    AtomicMeasure,
    ball_family,
    ball_measure_bounds,
    curve_nullity,
    existence_step_check,
    growth_exponents,
    haar_like,
    measure_from_json,
    measure_to_json,
    net_measure,
    pushforward,
    quasi_equivalence,
    quasi_invariance_check,
    read_measure,
    uniform_measure,
    uniqueness_chain,
    write_measure,
)
from geosurf.nets import Net, maximal_net
from geosurf.space import RegionSpec
from oracles import adjacency, dijkstra_dict


def test_net_measure_unit_ball_is_one(grid33):
    unit = RegionSpec(grid33.origin, 8)
    for eps in (1, 2, 3, 4):
        for seed in (0, 1, 2):
            mu = net_measure(grid33, maximal_net(grid33, eps, seed=seed), unit)
            assert mu(unit.validate(grid33)) == 1


def test_net_measure_singleton(grid5):
    net = Net(3.0, frozenset({12}), (12,))
    mu = net_measure(grid5, net, {12})
    assert mu.weights == {12: 1}


def test_net_measure_p5():
    p5 = path_graph(5)
    net = maximal_net(p5, 2, order=range(5))
    mu = net_measure(p5, net, p5.ball(2, 2))
    assert mu.weights == {0: Fraction(1, 3), 2: Fraction(1, 3), 4: Fraction(1, 3)}


def test_empty_normalizer(grid5):
    with pytest.raises(errors.EmptyNormalizer):
        net_measure(grid5, Net(3.0, frozenset({0}), (0,)), {12})


def test_measure_validation():
    with pytest.raises(errors.ZeroMeasure):
        AtomicMeasure({0: 0})
    with pytest.raises(errors.InputError):
        AtomicMeasure({0: -1, 1: 2})
    mu = AtomicMeasure({0: Fraction(1, 2), 1: Fraction(1, 2), 2: 0})
    assert mu.mass == 1 and mu.support == {0, 1}


def test_pushforward_examples(grid5):
    mu = uniform_measure([6, 7, 8])
    assert pushforward(mu, {v: v for v in range(25)}) == mu
    moved = pushforward(mu, {6: 11, 7: 12, 8: 13})
    assert moved == uniform_measure([11, 12, 13])
    with pytest.raises(errors.NotInjective):
        pushforward(mu, {6: 0, 7: 0, 8: 1})
    with pytest.raises(errors.SupportOutsideDomain):
        pushforward(mu, {6: 0, 7: 1})


def test_quasi_equivalence_examples():
    mu = AtomicMeasure({0: Fraction(1, 3), 1: Fraction(2, 3)})
    assert quasi_equivalence(mu, mu).alpha == 1.0
    assert quasi_equivalence(mu, mu.scaled(3)).alpha == 3.0
    assert quasi_equivalence(uniform_measure([0]), uniform_measure([1])).alpha == math.inf


@settings(max_examples=50, deadline=None)
@given(
    st.dictionaries(st.integers(0, 9), st.integers(1, 20), min_size=1),
    st.dictionaries(st.integers(0, 9), st.integers(1, 20), min_size=1),
    st.fractions(Fraction(1, 10), 10),
)
def test_quasi_equivalence_properties(a, b, c):
    mu, nu = AtomicMeasure(a), AtomicMeasure(b)
    # symmetric
    assert quasi_equivalence(mu, nu).alpha == quasi_equivalence(nu, mu).alpha
    # scalar case
    assert quasi_equivalence(mu, mu.scaled(c)).alpha == pytest.approx(float(max(c, 1 / c)))
    # the per-atom alpha bounds every set: check all subsets of the joint support
    alpha = quasi_equivalence(mu, nu).alpha
    if math.isfinite(alpha):
        sup = sorted(mu.support | nu.support)
        for mask in range(1, 1 << len(sup)):
            A = [v for i, v in enumerate(sup) if mask >> i & 1]
            assert mu(A) <= alpha * nu(A) * (1 + 1e-12)
            assert nu(A) <= alpha * mu(A) * (1 + 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.dictionaries(st.integers(0, 24), st.integers(1, 9), min_size=1), st.integers(0, 24))
def test_pushforward_preserves_mass(w, shift):
    mu = AtomicMeasure(w)
    perm = {v: (v + shift) % 25 for v in range(25)}
    assert pushforward(mu, perm).mass == mu.mass


def test_haar_like_grid_close_to_counting(grid33):
    unit = RegionSpec(grid33.origin, 8)
    mu, rep = haar_like(grid33, [4, 2, 1], [0, 1], unit)
    members = unit.validate(grid33)
    counting = uniform_measure(range(grid33.n)).scaled(Fraction(1, len(members)))
    balls = ball_family(grid33, sorted(members), [4], inside=members)
    assert quasi_equivalence(mu, counting, balls).alpha <= 4
    assert mu(members) == 1
    assert rep.epsilons == [4.0, 2.0, 1.0] and len(rep.ratios) == 2
    assert rep.converged


def test_haar_like_scales(grid33):
    unit = RegionSpec(grid33.origin, 8)
    with pytest.raises(errors.InsufficientScales):
        haar_like(grid33, [2], [0, 1], unit)
    with pytest.raises(errors.InsufficientScales):
        haar_like(grid33, [1.5, 1.2, 1], [0, 1], unit)
    with pytest.raises(errors.InsufficientScales):
        haar_like(grid33, [4, 2, 1], [0], unit)


def test_haar_like_tree_subtree_masses():
    t = tree(2, 6)
    unit = RegionSpec(0, 3)
    mu, _ = haar_like(t, [4, 2, 1], [0, 1], unit)
    # at eps = 1 every vertex is a net point, so each subtree's mass is its size over |unit|
    members = unit.validate(t)
    assert len(members) == 15
    for root, size in ((1, 63), (2, 63), (3, 31), (7, 15)):
        sub = [v for v in range(t.n) if _descends(v, root)]
        assert len(sub) == size
        assert mu(sub) == Fraction(size, 15)


def _descends(v, root):
    while v > root:
        v = (v - 1) // 2
    return v == root


def test_quasi_invariance_isometries(grid33):
    mu = uniform_measure(range(grid33.n))
    dom = RegionSpec(grid33.origin, 4)
    suite = map_suite(grid33, "translations", dom, RegionSpec(grid33.origin, 2))
    suite += map_suite(grid33, "rotations", dom, RegionSpec(grid33.origin, 1))
    rep = quasi_invariance_check(grid33, mu, suite, restrict=True)
    assert rep.alpha_star == 1.0 and rep.balls_tested > 0


def test_quasi_invariance_net_measure_bounded(grid33):
    unit = RegionSpec(grid33.origin, 8)
    mu = net_measure(grid33, maximal_net(grid33, 2), unit)
    suite = map_suite(grid33, "translations", RegionSpec(grid33.origin, 6), RegionSpec(grid33.origin, 2))
    rep = quasi_invariance_check(grid33, mu, suite, restrict=True, C=4.0, D=2.0)
    assert math.isfinite(rep.alpha_star) and rep.alpha_star <= rep.bound == 4.0


def test_quasi_invariance_support_outside(grid33):
    mu = uniform_measure(range(grid33.n))
    suite = map_suite(grid33, "translations", RegionSpec(grid33.origin, 2))
    with pytest.raises(errors.SupportOutsideDomain):
        quasi_invariance_check(grid33, mu, suite)
    with pytest.raises(errors.InputError):
        quasi_invariance_check(grid33, mu, [])


def test_ball_measure_bounds_uniform():
    g = euclidean_grid(17)
    unit = RegionSpec(g.origin, 8)
    suite = map_suite(g, "translations", RegionSpec(g.origin, 2), RegionSpec(g.origin, 1))
    rep = ball_measure_bounds(g, uniform_measure(range(g.n)), suite, 2, unit)
    # oracle: ball counts by independent shortest paths
    adj = adjacency(g)
    members = unit.validate(g)
    sizes2, sizes1 = [], []
    for p in members:
        d = dijkstra_dict(adj, {p: 0.0})
        sizes2.append(sum(1 for x in d.values() if x <= 2))
        sizes1.append(sum(1 for x in d.values() if x <= 1))
    c_eps = len(maximal_net(g, 2).members & members)
    assert (rep.c_eps, rep.L, rep.alpha) == (c_eps, 1.0, 1.0)
    assert rep.k == min(sizes2) * c_eps == 729.0
    assert rep.h == max(sizes1) * c_eps == 405.0
    assert rep.passed
    # predicted k with alpha = 1 is the measure of the half-radius ball
    assert rep.k_pred == len(g.ball(g.origin, 4)) == 41


def test_ball_measure_bounds_single_atom():
    g = euclidean_grid(17)
    unit = RegionSpec(g.origin, 8)
    suite = map_suite(g, "translations", RegionSpec(g.origin, 2), RegionSpec(g.origin, 1))
    atom = uniform_measure([g.origin])
    rep = ball_measure_bounds(g, atom, suite, 2, unit)
    assert rep.k == 0 and not rep.passed
    with pytest.raises(errors.RegionTooSmall):
        ball_measure_bounds(g, atom, suite, 4, unit)


def test_growth_grid65(grid65):
    mu = uniform_measure(range(grid65.n))
    rep = growth_exponents(grid65, mu, [grid65.origin], [2, 4, 8, 16])
    # oracle: l1 ball counts 2r^2 + 2r + 1, least-squares in log-log
    counts = [2 * r * r + 2 * r + 1 for r in (2, 4, 8, 16)]
    slope = np.polyfit(np.log([2, 4, 8, 16]), np.log(counts), 1)[0]
    assert rep.lower == pytest.approx(slope) == pytest.approx(1.7991375, abs=1e-6)
    # lower-order terms pull the slope just below 1.8 at these radii; it tends to 2
    big = growth_exponents(grid65, mu, [grid65.origin], [4, 8, 16, 32])
    assert 1.8 <= big.lower <= 2.2


def test_growth_single_atom(grid33):
    rep = growth_exponents(grid33, uniform_measure([grid33.origin]), [grid33.origin], [2, 4, 8, 16], assouad=2, hausdorff=2, t=0.3)
    assert rep.lower == rep.upper == 0.0 and rep.sandwich is False


def test_growth_tree():
    t = tree(2, 8)
    rep = growth_exponents(t, uniform_measure(range(t.n)), [0], [1, 2, 4, 8])
    counts = [2 ** (r + 1) - 1 for r in (1, 2, 4, 8)]
    slope = np.polyfit(np.log([1, 2, 4, 8]), np.log(counts), 1)[0]
    assert rep.lower == pytest.approx(slope)


def test_growth_needs_radii(grid33):
    with pytest.raises(errors.InsufficientRadii):
        growth_exponents(grid33, uniform_measure([0]), [0], [2, 4, 8])
    with pytest.raises(errors.InsufficientRadii):
        growth_exponents(grid33, uniform_measure([0]), [0], [2, 3, 4, 5])


def test_existence_step(grid33):
    net = maximal_net(grid33, 2)
    suite = map_suite(grid33, "shears", RegionSpec(grid33.origin, 6), RegionSpec(grid33.origin, 1))
    rep = existence_step_check(grid33, net, suite, C=4.0, D=2.0, radius_pairs=[(2, 4), (4, 6)])
    assert rep.holds and rep.pairs_tested > 0
    with pytest.raises(errors.BadRadii):
        existence_step_check(grid33, net, suite, 4.0, 2.0, [(2, 3)])


def test_measure_file_round_trip(tmp_path, grid5):
    mu = AtomicMeasure({0: Fraction(1, 3), 7: Fraction(2, 3), 9: 0.25})
    path = tmp_path / "m.json"
    write_measure(path, grid5, mu)
    back = read_measure(path, grid5)
    assert back.weights == {0: Fraction(1, 3), 7: Fraction(2, 3), 9: Fraction(1, 4)}
    assert json.loads(path.read_text())["weights"]["7"] == "2/3"
    with pytest.raises(errors.UnknownVertex):
        measure_from_json(grid5, {"weights": {"99": "1/2"}})
    assert measure_from_json(grid5, measure_to_json(grid5, mu)) == back


def test_uniqueness_chain(grid33):
    c = grid33.origin
    unit = RegionSpec(c, 8)
    shears = map_suite(grid33, "shears", RegionSpec(c, 2), RegionSpec(c, 1))
    trans = map_suite(grid33, "translations", RegionSpec(c, 2), RegionSpec(c, 1))
    m1 = net_measure(grid33, maximal_net(grid33, 2, seed=0), unit)
    m2 = net_measure(grid33, maximal_net(grid33, 2, seed=1), unit)
    rep = uniqueness_chain(grid33, m1, m2, trans + shears, 2, unit)
    b1 = ball_measure_bounds(grid33, m1, trans + shears, 2, unit)
    b2 = ball_measure_bounds(grid33, m2, trans + shears, 2, unit)
    assert rep.s == max(b1.h / b2.k, b2.h / b1.k)
    assert rep.L == 2.0 and rep.m == 25
    assert rep.beta_chain == pytest.approx(max(1.0, rep.m * rep.alpha * rep.s))
    assert 1 <= rep.beta_emp <= rep.beta_chain
    # isometries only: B(p, eps) is its own cover
    iso = uniqueness_chain(grid33, m1, m2, trans, 2, unit)
    assert iso.m == 1 and iso.beta_emp == rep.beta_emp <= iso.beta_chain


def test_uniqueness_chain_identical_measures(grid33):
    unit = RegionSpec(grid33.origin, 8)
    mu = net_measure(grid33, maximal_net(grid33, 1), unit)
    trans = map_suite(grid33, "translations", RegionSpec(grid33.origin, 2), RegionSpec(grid33.origin, 1))
    rep = uniqueness_chain(grid33, mu, mu, trans, 1, unit)
    assert rep.beta_emp == 1.0 and rep.beta_chain >= 1.0


def test_curve_nullity_column(grid33):
    gi = grid33.grid_index
    sigma = grid33.geodesic(gi(16, 0), gi(16, 32))
    unit = RegionSpec(grid33.origin, 8)
    rep = curve_nullity(grid33, sigma, [4, 2, 1, 0.5], unit, 4)
    # at and below the mesh every vertex carries the same weight: 33 column vertices among 33 * 9
    assert rep.fractions[-1] == rep.fractions[-2] == 33 / 297
    assert rep.decreasing and rep.fractions[0] > 0.2


def test_curve_nullity_guards(grid33):
    unit = RegionSpec(grid33.origin, 8)
    with pytest.raises(errors.InsufficientScales):
        curve_nullity(grid33, [grid33.origin], [2, 1], unit, 2)
    with pytest.raises(errors.BadRadii):
        curve_nullity(grid33, [grid33.origin], [4, 2, 1], unit, 0)
    with pytest.raises(errors.InputError):
        curve_nullity(grid33, [], [4, 2, 1], unit, 2)
