import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lacircle import (
    ActionSet,
    BetaCache,
    CandidateCircle,
    EdgeMap,
    EmptyPerimeter,
    LearningConfig,
    NoFeasibleActions,
    ProbabilityVector,
    SampledPoints,
    build_action_set,
    lri_step,
    lri_update,
    rasterize_circle,
    reinforcement,
    run_learning,
    select_action,
)
from lacircle.geometry import circle_offsets, round_half_away


def ring_map(circles, w=300, h=300):
    bits = np.zeros((h, w), dtype=bool)
    for c in circles:
        per = rasterize_circle(c, w, h)
        bits[per.points[:, 1], per.points[:, 0]] = True
    return EdgeMap(bits)


def circle_points(x0, y0, r, angles_deg):
    a = np.radians(angles_deg)
    return np.stack([np.rint(x0 + r * np.cos(a)), np.rint(y0 + r * np.sin(a))], axis=1).astype(int)


@pytest.fixture
def simplex():
    def make(n, seed):
        p = np.random.default_rng(seed).random(n) + 1e-3
        return ProbabilityVector(p / p.sum())
    return make


class TestBuildActionSet:
    def test_single_triplet(self):
        pts = SampledPoints(circle_points(150, 150, 50, [0, 120, 240]))
        acts = build_action_set(pts, 40, 150, (300, 300))
        assert len(acts) == 1 and acts.n_all == 1
        assert acts[0].r == pytest.approx(50, abs=1)

    def test_collinear(self):
        pts = SampledPoints([(0, 0), (5, 5), (9, 9)])
        with pytest.raises(NoFeasibleActions):
            build_action_set(pts, 1, 150, (300, 300))

    def test_concyclic_points_deduplicated(self):
        # exact Pythagorean points on a radius-60 circle centred at (150, 150)
        pts = np.array([(210, 150), (150, 210), (90, 150), (186, 198)])
        assert all(np.hypot(*(p - 150)) == 60 for p in pts)
        # brute-force oracle: every triplet rounds to the same parameters
        keys = set()
        for tri in itertools.combinations(range(4), 3):
            from lacircle import circle_from_triplet
            c = circle_from_triplet(*pts[list(tri)])
            keys.add(tuple(round_half_away(v) for v in c.params))
        assert keys == {(150, 150, 60)}
        acts = build_action_set(SampledPoints(pts), 40, 150, (300, 300))
        assert len(acts) == 1 and acts.n_all == 4

    def test_radius_limits(self):
        pts = SampledPoints(circle_points(150, 150, 30, [0, 120, 240]))
        with pytest.raises(NoFeasibleActions):
            build_action_set(pts, 40, 150, (300, 300))

    def test_over_clipped_rejected(self):
        # centre sits in the corner: three quarters of the perimeter is outside
        pts = SampledPoints(circle_points(0, 0, 50, [10, 45, 80]))
        with pytest.raises(NoFeasibleActions):
            build_action_set(pts, 40, 150, (300, 300))
        acts = build_action_set(pts, 40, 150, (300, 300), max_clip_fraction=0.8)
        assert len(acts) == 1

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(3, 40), st.integers(1, 300))
    def test_invariants(self, seed, n, cap):
        rng = np.random.default_rng(seed)
        pts = SampledPoints(rng.integers(0, 200, size=(n, 2)))
        try:
            acts = build_action_set(pts, 10, 90, (200, 200), cap=cap, rng=rng)
        except NoFeasibleActions:
            return
        assert 1 <= len(acts) <= cap
        keys = [tuple(round_half_away(v) for v in a.params) for a in acts]
        assert len(keys) == len(set(keys))
        for a in acts:
            assert 10 <= a.r <= 90
            assert len({a.i, a.j, a.k}) == 3
            per = rasterize_circle(a, 200, 200)
            assert per.clipped / (per.count + per.clipped) <= 0.5
            for idx in (a.i, a.j, a.k):
                assert abs(np.hypot(*(pts.points[idx] - (a.x0, a.y0))) - a.r) < 1e-6 * a.r + a.r_spread + 1e-9

    def test_sampling_path_deterministic(self):
        pts = SampledPoints(np.random.default_rng(1).integers(0, 200, size=(60, 2)))
        a = build_action_set(pts, 10, 90, (200, 200), cap=100, rng=np.random.default_rng(9))
        b = build_action_set(pts, 10, 90, (200, 200), cap=100, rng=np.random.default_rng(9))
        assert len(a) == 100
        assert [x.params for x in a] == [x.params for x in b]


class TestReinforcement:
    def test_perfect_match(self):
        c = (120.0, 130.0, 45.0)
        assert reinforcement(c, ring_map([c])) == 1.0

    def test_empty_map(self):
        assert reinforcement((120, 130, 45), EdgeMap(np.zeros((300, 300), dtype=bool))) == 0.0

    def test_every_second_pixel(self):
        c = (150, 150, 40)
        per = rasterize_circle(c, 300, 300)
        bits = np.zeros((300, 300), dtype=bool)
        kept = per.points[::2]
        bits[kept[:, 1], kept[:, 0]] = True
        beta = reinforcement(c, EdgeMap(bits))
        assert beta == len(kept) / per.count
        assert abs(beta - 0.5) <= 1 / per.count

    def test_only_in_bounds_pixels_count(self):
        c = (0, 150, 40)  # left half clipped
        m = ring_map([c])
        assert reinforcement(c, m) == 1.0
        assert rasterize_circle(c, 300, 300).clipped > 0

    def test_empty_perimeter(self):
        with pytest.raises(EmptyPerimeter):
            reinforcement((-100, -100, 20), EdgeMap(np.ones((50, 50), dtype=bool)))

    def test_cache_matches_fresh(self):
        circles = [CandidateCircle(0, 1, 2, 100 + 7 * i, 120, 30 + i) for i in range(6)]
        acts = ActionSet(tuple(circles), 300, 300, 10, 100)
        edges = ring_map([(107, 120, 31), (135, 120, 35)])
        cache = BetaCache(acts, edges)
        cache.precompute(workers=3)
        serial = BetaCache(acts, edges)
        serial.precompute()
        assert np.array_equal(cache.values(), serial.values())
        for i, c in enumerate(circles):
            assert cache[i] == reinforcement(c, edges)


class TestLriUpdate:
    def test_null_reward(self, simplex):
        pv = simplex(7, 0)
        out = lri_update(pv, 3, 0.0, 0.3)
        assert np.array_equal(out.p, pv.p)

    def test_hand_values(self):
        out = lri_update(ProbabilityVector.uniform(4), 0, 1.0, 0.1)
        np.testing.assert_allclose(out.p, [0.325, 0.225, 0.225, 0.225], rtol=0, atol=1e-15)
        assert out.iteration == 1

    @settings(max_examples=300)
    @given(st.integers(2, 50), st.integers(0, 2**32 - 1), st.floats(0, 1), st.floats(1e-6, 1 - 1e-6))
    def test_simplex_preserved(self, n, seed, beta, theta):
        p = np.random.default_rng(seed).dirichlet(np.ones(n))
        i = seed % n
        out = lri_step(p, i, beta, theta)
        assert abs(out.sum() - 1) <= 1e-12
        assert np.all((out >= 0) & (out <= 1))
        # rewarded action never loses, others never gain
        assert out[i] >= p[i] - 1e-15
        assert np.all(np.delete(out, i) <= np.delete(p, i) + 1e-15)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(3)
        p = rng.dirichlet(np.ones(6), size=5)
        sel = rng.integers(0, 6, 5)
        beta = rng.random(5)
        batch = lri_step(p, sel, beta, 0.2)
        for row in range(5):
            np.testing.assert_array_equal(batch[row], lri_step(p[row], sel[row], beta[row], 0.2))

    def test_bad_arguments(self, simplex):
        pv = simplex(3, 1)
        with pytest.raises(ValueError):
            lri_update(pv, 0, 1.5, 0.1)
        with pytest.raises(ValueError):
            lri_update(pv, 0, 0.5, 1.0)
        with pytest.raises(IndexError):
            lri_update(pv, 3, 0.5, 0.1)

    def test_long_sequential_run(self):
        rng = np.random.default_rng(11)
        p = rng.dirichlet(np.ones(10))
        for _ in range(100_000):
            p = lri_step(p, rng.integers(10), rng.random(), 0.05)
        assert abs(p.sum() - 1) <= 1e-9 and p.min() >= 0 and p.max() <= 1


class TestSelectAction:
    def test_degenerate(self):
        pv = ProbabilityVector([1.0, 0.0, 0.0])
        assert all(select_action(pv, z) == 0 for z in (0.0, 0.3, 0.999999))

    def test_hand_value(self):
        assert select_action(ProbabilityVector([0.2, 0.3, 0.5]), 0.25) == 1

    def test_boundaries(self):
        pv = ProbabilityVector([0.25, 0.25, 0.5])
        assert select_action(pv, 0.0) == 0
        assert select_action(pv, 0.25) == 1  # cumulative must strictly exceed z
        assert select_action(pv, 0.75) == 2

    def test_zero_mass_never_chosen(self):
        pv = ProbabilityVector([0.5, 0.0, 0.5, 0.0])
        picks = {select_action(pv, z) for z in np.linspace(0, 0.999999, 1001)}
        assert picks == {0, 2}

    def test_monte_carlo_frequencies(self):
        pv = ProbabilityVector([0.2, 0.3, 0.5])
        z = np.random.default_rng(0).random(100_000)
        picks = np.array([select_action(pv, v) for v in z])
        freq = np.bincount(picks, minlength=3) / len(picks)
        np.testing.assert_allclose(freq, pv.p, atol=0.01)

    def test_rejects_z_out_of_range(self):
        with pytest.raises(ValueError):
            select_action(ProbabilityVector([1.0]), 1.0)


class TestRunLearning:
    def test_single_action(self):
        acts = ActionSet((CandidateCircle(0, 1, 2, 50, 50, 20),), 100, 100, 10, 40)
        pv, betas = run_learning(acts, ring_map([(50, 50, 20)], 100, 100), LearningConfig(seed=0))
        assert pv.p.tolist() == [1.0]
        assert pv.iteration == 0 and pv.stop_reason == "p_stop"
        assert betas.evaluated == 0

    def test_true_circle_wins(self):
        true = (150, 150, 60)
        decoys = [(150 + dx, 150 + dy, 60 + dr) for dx, dy, dr in
                  [(20, 0, 0), (0, -25, 5), (-30, 10, -10), (10, 10, 20), (-15, -15, 8), (40, 5, -20)]]
        circles = [CandidateCircle(0, 1, 2, *c) for c in decoys[:3] + [true] + decoys[3:]]
        acts = ActionSet(tuple(circles), 300, 300, 20, 120)
        edges = ring_map([true])
        cfg = LearningConfig(theta=0.1, k_max=500, p_stop=0.95, seed=4)
        pv, betas = run_learning(acts, edges, cfg)
        assert int(np.argmax(pv.p)) == 3
        assert betas[3] == 1.0

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        circles = [CandidateCircle(0, 1, 2, *rng.uniform(80, 220, 2), rng.uniform(20, 60)) for _ in range(40)]
        acts = ActionSet(tuple(circles), 300, 300, 10, 100)
        edges = ring_map([(150, 150, 40), (100, 200, 30)])
        cfg = LearningConfig(theta=0.05, seed=17)
        a, _ = run_learning(acts, edges, cfg)
        b, _ = run_learning(acts, edges, cfg)
        assert a.p.tobytes() == b.p.tobytes() and a.iteration == b.iteration

    def test_budget_and_stop_rules(self):
        circles = [CandidateCircle(0, 1, 2, 100 + i, 100, 30) for i in range(0, 60, 3)]
        acts = ActionSet(tuple(circles), 300, 300, 10, 100)
        edges = ring_map([(100, 100, 30)])
        pv, _ = run_learning(acts, edges, LearningConfig(theta=0.001, seed=1))
        assert pv.iteration == 10 and pv.stop_reason == "k_max"  # ceil(20 / 2)
        pv, _ = run_learning(acts, edges, LearningConfig(theta=0.001, k_max=50, k_cap=7, seed=1))
        assert pv.iteration == 7
        pv, betas = run_learning(acts, edges, LearningConfig(theta=0.001, k_max=10_000,
                                                             beta_min_solution=0.99, seed=1))
        assert pv.stop_reason == "solution" and betas[0] == 1.0
        pv, _ = run_learning(acts, edges, LearningConfig(theta=0.5, k_max=10_000, p_stop=0.6, seed=1))
        assert pv.stop_reason == "p_stop" and pv.p.max() >= 0.6

    def test_does_not_mutate_inputs(self):
        circles = [CandidateCircle(0, 1, 2, 100 + 5 * i, 100, 30) for i in range(8)]
        acts = ActionSet(tuple(circles), 300, 300, 10, 100)
        edges = ring_map([(100, 100, 30)])
        bits_before = edges.bits.copy()
        params_before = acts.params.copy()
        run_learning(acts, edges, LearningConfig(theta=0.2, k_max=300, seed=3))
        assert np.array_equal(edges.bits, bits_before)
        assert np.array_equal(acts.params, params_before)

    def test_two_action_dominance(self):
        # beta_A = 1 > beta_B = 0.5 are fixed through the edge map
        a = (60, 60, 25)
        b = (200, 200, 25)
        per_b = rasterize_circle(b, 300, 300).points
        bits = ring_map([a]).bits.copy()
        half = per_b[::2]
        bits[half[:, 1], half[:, 0]] = True
        edges = EdgeMap(bits)
        acts = ActionSet((CandidateCircle(0, 1, 2, *a), CandidateCircle(0, 1, 2, *b)), 300, 300, 10, 100)
        wins = 0
        for seed in range(100):
            pv, betas = run_learning(acts, edges, LearningConfig(theta=0.01, k_max=1000, p_stop=1.0, seed=seed))
            wins += pv.p[0] > pv.p[1]
        assert betas[0] == 1.0 and abs(betas[1] - 0.5) <= 1 / len(circle_offsets(25))
        assert wins >= 99

    def test_config_validation(self):
        with pytest.raises(ValueError):
            LearningConfig(theta=0)
        with pytest.raises(ValueError):
            LearningConfig(theta=1)
        with pytest.raises(ValueError):
            LearningConfig(p_stop=0)
