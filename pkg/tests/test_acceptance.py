"""End-to-end acceptance criteria; each test prints one PASS/FAIL line."""
import math
import random
import time

import pytest

from geosurf import errors
from geosurf.dimension import assouad_estimate, coarea_check, doubling_constant, quadratic_lower_bound_check
from geosurf.generators import conformal_grid, euclidean_grid, map_suite, snowflake_grid, tree
from geosurf.hyperbolicity import (
    FAT,
    THIN,
    all_quadruples,
    dichotomy_scan,
    fat_triangle_scan,
    four_point_delta,
    make_triangle,
    surrounded_ball_from_fat_triangle,
)
from geosurf.measures import (
    existence_step_check,
    growth_exponents,
    haar_like,
    net_measure,
    quasi_invariance_check,
    uniform_measure,
)
from geosurf.nets import maximal_net
from geosurf.poincare import CONSISTENT, build_pack, dimension_bound_diagnostic, upper_gradient_report
from geosurf.space import RegionSpec
from geosurf.surrounding import layered_cover, sur, sur_quasi_invariance
from oracles import adjacency, dijkstra_dict, min_enclosing_cycle, point_in_polygon, random_planar_space


@pytest.fixture
def verdict(capsys):
    """verdict(n, label, ok, detail) prints the PASS/FAIL line to the terminal, then asserts."""

    def emit(n, label, ok, detail=""):
        with capsys.disabled():
            print(f"\n[criterion {n}] {label}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
        assert ok, f"criterion {n} failed: {detail}"

    return emit


def samples(pts, radii, deltas, ratio=1.0):
    return [(p, r, d) for p in pts for r in radii for d in deltas if d * ratio < r]


# 1 ---------------------------------------------------------------------------

def test_sur_exact_against_enumeration(verdict):
    t0 = time.time()
    checked, mismatches = 0, []
    for seed in range(10):
        sp = random_planar_space(seed, side=[12, 14, 16, 18, 20][seed % 5])
        assert sp.n <= 400
        adj = adjacency(sp)
        interior = sorted(set(range(sp.n)) - sp.outer_vertices)
        for p in random.Random(seed).sample(interior, 8):
            dp = dijkstra_dict(adj, {p: 0.0})
            for r in (0, 1, 2.5, 4):
                if any(dp[v] <= r + 1e-9 for v in sp.outer_vertices):
                    continue  # not well posed: the ball meets the outer face
                for R in (None, r + 3):
                    try:
                        res = sur(sp, p, r, R)
                        value = res.value
                    except errors.NoSurroundingLoop:
                        res, value = None, None
                    oracle, cycle = min_enclosing_cycle(sp, p, r, R, bound=value if value is not None else math.inf)
                    checked += 1
                    same = (oracle is None) if value is None else (oracle is not None and abs(oracle - value) <= 1e-9 * max(1, value))
                    if same and cycle is not None:
                        same = point_in_polygon(sp.coords[p], [sp.coords[v] for v in res.witness.waypoints])
                    if not same:
                        mismatches.append((seed, p, r, R, value, oracle))
    elapsed = time.time() - t0
    verdict(1, "Sur exact vs enclosing-cycle enumeration", not mismatches and checked > 200 and elapsed < 120,
            f"({checked} queries, {len(mismatches)} mismatches, {elapsed:.1f}s)")


# 2 ---------------------------------------------------------------------------

def test_sur_quasi_invariance(verdict, grid33):
    g, c = grid33, grid33.origin
    rng = random.Random(2)
    iso = map_suite(g, "translations", RegionSpec(c, 4), RegionSpec(c, 3))
    iso += map_suite(g, "rotations", RegionSpec(c, 4), RegionSpec(c, 2))
    iso_ok = 0
    for f in iso:
        p = rng.choice(sorted(f.domain))
        r = rng.choice([0, 1, 2, 3])
        res = sur_quasi_invariance(g, f, p, f(p), r, 2 * r + 2 + rng.choice([0, 2, 4]))
        iso_ok += res.lhs_ok and res.rhs_ok and res.ratios == (1.0, 1.0)
    shears = map_suite(g, "shears", RegionSpec(c, 4), RegionSpec(c, 3))
    L = max(f.constant for f in shears)
    shear_ok = 0
    for _ in range(200):
        f = rng.choice(shears)
        p = rng.choice(sorted(f.domain))
        r = rng.choice([0.5, 1, 1.5, 2])
        # the small loop around B(p', L r) needs R / L >= L r + 2 mesh
        R = L * (L * r + 2) + rng.choice([0, 1, 2, 4])
        res = sur_quasi_invariance(g, f, p, f(p), r, R)
        shear_ok += res.lhs_ok and res.rhs_ok
    verdict(2, "Sur quasi-invariance (isometries exact, shears 200/200)",
            iso_ok == len(iso) and shear_ok == 200 and L <= 3,
            f"(isometries {iso_ok}/{len(iso)}, shears {shear_ok}/200, L={L})")


# 3 ---------------------------------------------------------------------------

def test_locally_doubling(verdict, grid65):
    spaces = {"euclidean": grid65, "conformal": conformal_grid(65, 1.0, "linear")}
    failures, Ns = [], {}
    for name, g in spaces.items():
        m = g.mesh
        for r in (2, 4):
            for k in range(1, 5):
                if not layered_cover(g, g.origin, r * m, k).verified:
                    failures.append((name, r, k))
        Ns[name] = doubling_constant(g, RegionSpec(g.origin, 16 * m), [2 * m, 4 * m, 8 * m])
    ok = not failures and all(N <= 25 for N in Ns.values())
    verdict(3, "layered covers verified and doubling N <= 25", ok, f"(unverified {failures}, N {Ns})")


# 4 ---------------------------------------------------------------------------

def test_quadratic_lower_bound(verdict, grid33):
    q = quadratic_lower_bound_check(grid33, RegionSpec(grid33.origin, 8), [4, 8])
    co = coarea_check(grid33, grid33.origin, 8, 1)
    ok = q.c >= 0.5 and co.passed and co.lhs >= 0.85 * co.rhs
    verdict(4, "H2 lower bound and coarea", ok, f"(c={q.c:.4g}, coarea lhs={co.lhs:.4g} rhs={co.rhs:.4g})")


# 5 ---------------------------------------------------------------------------

def test_haar_like_existence(verdict, grid33):
    g, c = grid33, grid33.origin
    unit = RegionSpec(c, 8)
    eps = [4, 2, 1]
    haar_like(g, eps, [0, 1], unit)
    dom = RegionSpec(c, 6)
    suite = map_suite(g, "translations", dom, RegionSpec(c, 2))
    suite += map_suite(g, "rotations", dom, RegionSpec(c, 1))
    suite += map_suite(g, "shears", dom, RegionSpec(c, 1))
    A = assouad_estimate(g, samples([c], [4, 8, 16], [1, 2, 4], ratio=1.5))
    alphas, steps = {}, {}
    for e in eps:
        net = maximal_net(g, e)
        mu = net_measure(g, net, unit.validate(g))
        alphas[e] = quasi_invariance_check(g, mu, suite, restrict=True, C=A.C, D=A.D).alpha_star
        steps[e] = existence_step_check(g, net, suite, A.C, A.D, [(2, 2 + e), (4, 4 + e)])
    ok = all(a <= 4 for a in alphas.values()) and all(s.holds and s.pairs_tested > 0 for s in steps.values())
    verdict(5, "Haar-like existence", ok,
            f"(alpha* {alphas}, C={A.C:.4g} D={A.D:.4g}, step worst {max(s.worst_ratio for s in steps.values()):.3g})")


# 6 ---------------------------------------------------------------------------

def test_haar_like_quasi_uniqueness(verdict, grid33):
    g, c = grid33, grid33.origin
    unit = RegionSpec(c, 8)
    _, rep = haar_like(g, [8, 4, 2, 1], [0, 1, 2, 3, 4], unit)
    alpha = [rep.seed_alpha[e] for e in rep.epsilons]
    drift = [max(a / b, b / a) for a, b in zip(alpha, alpha[1:])]
    ok = alpha[-1] <= 8 and max(alpha) <= 8 and max(drift) <= 2
    verdict(6, "Haar-like quasi-uniqueness across 5 seeds", ok,
            f"(alpha per eps {dict(zip(rep.epsilons, [round(a, 4) for a in alpha]))}, drift {max(drift):.3g})")


# 7 ---------------------------------------------------------------------------

def test_dimension_sandwich(verdict, grid65):
    g, c = grid65, grid65.origin
    unit = RegionSpec(c, 8)
    mu, _ = haar_like(g, [4, 2, 1], [0, 1], unit)
    pts = sorted(g.ball(c, 4))[::4]
    grow = growth_exponents(g, mu, pts, [2, 4, 8, 16])
    sf = snowflake_grid(32, 1.0, 0.5)
    D = assouad_estimate(sf, samples([sf.origin], [2, 2.5, 3, 3.5, 4], [0.5, 1, 2])).D
    ok = 1.6 <= grow.lower and grow.upper <= 2.4 and 3.5 <= D <= 4.5
    verdict(7, "growth exponents in [1.6, 2.4], snowflake Assouad in [3.5, 4.5]", ok,
            f"(growth [{grow.lower:.4g}, {grow.upper:.4g}], snowflake D={D:.4g})")


# 8 ---------------------------------------------------------------------------

def test_fat_thin_dichotomy(verdict, grid65):
    tree_rows = []
    for t in (tree(2, 4), tree(3, 3)):
        rep = dichotomy_scan(t, 0, [2, 3, 4], M=10, budget=10**6)
        tree_rows += rep.rows
    tree_ok = all(row.classification == THIN and row.certificate == "exhaustive" and row.delta == 0 for row in tree_rows)

    g = grid65
    grid_rep = dichotomy_scan(g, g.origin, [8, 16], M=10, budget=2000)
    grid_ok = grid_rep.classes() == [FAT, FAT]

    # fat triangles coarse enough for the surrounded-ball statement, mesh <= delta / 20
    found = [make_triangle(g, *row.witness) for row in grid_rep.rows]
    for seed in range(3):
        res = fat_triangle_scan(g, g.origin, 30, 1.5, budget=2000, seed=seed)
        if res.triangle is not None:
            found.append(res.triangle)
    coarse = [tri for tri in found if g.mesh <= tri.delta / 20]
    balls = []
    for tri in coarse:
        ball = surrounded_ball_from_fat_triangle(g, tri, tri.delta * (1 - 1e-6))
        balls.append(ball.surrounded and ball.radius >= tri.delta / 10)
    ok = tree_ok and grid_ok and coarse and all(balls)
    verdict(8, "fat/thin dichotomy and surrounded balls", bool(ok),
            f"(tree thin exhaustive {tree_ok} over {len(tree_rows)} radii, grid {grid_rep.classes()}, surrounded {sum(balls)}/{len(coarse)})")


# 9 ---------------------------------------------------------------------------

def test_poincare_diagnostic(verdict, grid33):
    g = grid33
    gi = g.grid_index
    mu = uniform_measure(range(g.n))
    sigma = g.geodesic(gi(16, 0), gi(16, 32))
    B = sorted(g.ball(g.origin, 12))
    rep = dimension_bound_diagnostic(g, mu, 1, [4, 2, 1], sigma, ball_b=B)
    close = abs(rep.lhs[-1] - rep.limit) <= 0.2 * rep.limit
    region = [gi(x, y) for x in range(10, 23) for y in range(10, 23)]
    sub_sigma = g.geodesic(gi(16, 10), gi(16, 22))
    grads = [upper_gradient_report(g, build_pack(g, sub_sigma, e, region=region)) for e in (0.5, 1, 2, 3.5)]
    exhaustive = all(r.passed and r.paths_checked == 169 * 168 // 2 for r in grads)
    ok = close and rep.verdict == CONSISTENT and exhaustive
    verdict(9, "Poincare diagnostic", ok,
            f"(lhs {rep.lhs[-1]:.4g} vs limit {rep.limit:.4g}, verdict {rep.verdict}, gradient paths {sum(r.paths_checked for r in grads)})")


# 10 --------------------------------------------------------------------------

def test_negative_controls(verdict):
    t = tree(2, 4)
    refused = []
    for p in (0, 1, 3):
        try:
            sur(t, p, 0.5)
            refused.append(False)
        except errors.NoSurroundingLoop:
            refused.append(True)
    delta = four_point_delta(t, all_quadruples(range(t.n)))
    sf = snowflake_grid(9, 1.0, 0.5)
    guards = []
    mu = uniform_measure(range(sf.n))
    sigma_like = None  # the guard fires before sigma is read
    for call in (
        lambda: sur(sf, sf.origin, 1),
        lambda: coarea_check(sf, sf.origin, 2, 1),
        lambda: build_pack(sf, sigma_like, 1),
        lambda: dimension_bound_diagnostic(sf, mu, 1, [4, 2, 1], sigma_like),
    ):
        try:
            call()
            guards.append(False)
        except errors.NonGeodesicSpace:
            guards.append(True)
    ok = all(refused) and delta == 0 and all(guards)
    verdict(10, "negative controls", ok, f"(tree sur refused {sum(refused)}/3, four-point delta {delta}, snowflake guards {sum(guards)}/4)")
