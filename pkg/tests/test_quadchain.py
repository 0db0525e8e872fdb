import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subdivlab.core import Quadrilateral, RandomSource, Vec2
from subdivlab.quadchain import (
    KITE_EXAMPLE,
    SQUARE,
    PairState,
    child_index,
    defect_envelope_scale,
    limit_parameters,
    pair_step,
    pair_trajectory,
    parallelogram_defect,
    quad_child,
    quad_children,
    rate_check,
    segment_parameter,
    side_pairs,
    simulate_pair_limit,
    trajectory_rows,
    vertex_trajectory,
)
from subdivlab.stats import ks_test, uniform_cdf


def _vec_set(s: PairState):
    return {tuple(s.u), tuple(s.v)}


def test_pair_step_examples():
    s = PairState.from_vectors((1, 0), (0, 1))
    assert _vec_set(pair_step(s, 0)) == {(1.0, 0.0), (0.5, 0.5)}
    assert _vec_set(pair_step(s, 1)) == {(0.0, 1.0), (0.5, 0.5)}
    assert pair_step(s, 1).step == 1
    fixed = PairState.from_vectors((1, 1), (1, 1))
    for c in (0, 1):
        assert _vec_set(pair_step(fixed, c)) == {(1.0, 1.0)}
    with pytest.raises(ValueError):
        pair_step(s, 2)


def test_unit_square_child_is_unit_square():
    for k in range(4):
        c = quad_child(SQUARE, k)
        u, v, w, z = side_pairs(c)
        assert np.allclose(u, (1, 0)) and np.allclose(v, (1, 0))
        assert np.allclose(w, (0, 1)) and np.allclose(z, (0, 1))


def test_parallelogram_children_are_similar():
    p = Quadrilateral(Vec2(0, 0), Vec2(3, 0), Vec2(4, 2), Vec2(1, 2))
    for k in range(4):
        c = quad_child(p, k)
        assert parallelogram_defect(c) < 1e-15
        assert np.allclose(side_pairs(c), side_pairs(p))


def test_kite_child_zero():
    # midpoints E=(2,0), F=(4.5,1.5), G=(3,3.5), H=(0.5,2); EG and FH meet at (2.5,1.75)
    raw = quad_children(KITE_EXAMPLE)[0]
    assert np.allclose(raw, [(0, 0), (2, 0), (2.5, 1.75), (0.5, 2)])
    c = quad_child(KITE_EXAMPLE, 0)
    assert np.allclose(c.vertices(), [(-1.25, -0.9375), (2.75, -0.9375), (3.75, 2.5625), (-0.25, 3.0625)])
    u, v, _, _ = side_pairs(c)
    s = pair_step(PairState.from_vectors((4, 0), (4, -1)), 0)
    assert np.allclose(u, s.u) and np.allclose(v, s.v)


def test_defect_examples():
    assert parallelogram_defect(SQUARE) == 0.0
    assert parallelogram_defect(KITE_EXAMPLE) == pytest.approx(2 / KITE_EXAMPLE.perimeter())


def test_degenerate_quad_raises():
    flat = Quadrilateral(Vec2(0, 0), Vec2(1, 0), Vec2(2, 0), Vec2(3, 0))
    with pytest.raises(ValueError):
        quad_child(flat, 0)
    with pytest.raises(ValueError):
        quad_child(SQUARE, 4)


def _random_convex(rng):
    # four sorted angles on an ellipse give a convex quadrilateral
    t = np.sort(rng.uniform(0, 2 * np.pi, 4))
    a, b = rng.uniform(0.5, 2, 2)
    pts = np.stack([a * np.cos(t), b * np.sin(t)], axis=1) + rng.normal(size=2)
    return Quadrilateral.from_array(pts)


def test_vertex_chain_matches_pair_recursion():
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(10**4):
        q = _random_convex(rng)
        if abs(q.signed_area()) < 1e-3 or not q.is_convex():
            continue
        u, v, w, z = side_pairs(q)
        hp = PairState.from_vectors(u, v)
        vp = PairState.from_vectors(w, z)
        for h in (0, 1):
            for vc in (0, 1):
                c = quad_child(q, child_index(h, vc))
                assert c.is_convex()
                cu, cv, cw, cz = side_pairs(c)
                a, b = pair_step(hp, h), pair_step(vp, vc)
                scale = max(np.hypot(*u), np.hypot(*w))
                worst = max(worst, *(np.hypot(*(p - r)) / scale for p, r in ((cu, a.u), (cv, a.v), (cw, b.u), (cz, b.v))))
    assert worst < 1e-10


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.lists(st.integers(0, 1), min_size=1, max_size=40))
def test_exact_halving(vals, coins):
    u, v = vals[:2], vals[2:]
    if u == v:
        return
    traj = pair_trajectory(PairState.from_vectors(u, v), coins)
    sep0 = traj[0].separation
    for n, s in enumerate(traj):
        assert abs(s.separation - sep0 * 2.0**-n) <= 1e-12 * sep0 * 2.0**-n
        assert s.step == n


def test_limit_point_first_steps():
    s0 = PairState.from_vectors((1, 0), (0, 1))
    for k in range(5):
        assert simulate_pair_limit(s0, RandomSource(1).child(k), 1) == (0.5, 0.5)
    seen = {tuple(simulate_pair_limit(s0, RandomSource(2).child(k), 2)) for k in range(40)}
    assert seen == {(0.75, 0.25), (0.25, 0.75)}
    with pytest.raises(ValueError):
        simulate_pair_limit(s0, RandomSource(1), 0)


def test_limit_points_on_segment():
    s0 = PairState.from_vectors((2, 1), (-1, 3))
    for k in range(200):
        x = np.array(simulate_pair_limit(s0, RandomSource(3).child(k), 30))
        t = segment_parameter(x, (2, 1), (-1, 3))
        assert 0 <= t <= 1
        d = x - (np.array([2, 1]) + t * np.array([-3, 2]))
        assert np.hypot(*d) <= 1e-10 * np.hypot(3, 2)


def test_vectorized_limit_matches_scalar():
    src = RandomSource(4)
    t = limit_parameters(30, 5, src)
    # block 0 draws a (steps, replicas) coin matrix; replay replica 2 by hand
    coins = src.child(0).integers(2, size=(30, 5))[:, 2]
    s = PairState.from_vectors((1, 0), (0, 1))
    for c in coins[:-1]:
        s = pair_step(s, int(c))
    x = s.u + s.offset * 0.5
    assert t[2] == pytest.approx(segment_parameter(x, (1, 0), (0, 1)), abs=1e-15)


def test_limit_law_is_uniform():
    t = limit_parameters(30, 10**5, RandomSource(5))
    r = ks_test(t, uniform_cdf(0, 1))
    assert r.d_statistic < 0.006
    assert r.p_value > 0.001


def test_rate_check_envelope():
    res = rate_check(KITE_EXAMPLE, 40, RandomSource(6))
    assert res["max_halving_rel_error"] <= 1e-12
    assert res["max_defect_over_envelope"] <= 1.0
    assert res["max_vertex_pair_mismatch"] < 1e-9
    d = res["defects"]
    assert d[-1] < 2.0**-38 * defect_envelope_scale(KITE_EXAMPLE)


def test_trajectory_rows_columns():
    quads, coins = vertex_trajectory(KITE_EXAMPLE, 3, RandomSource(7))
    rows = list(trajectory_rows(quads))
    assert len(rows) == 4 and coins.shape == (3, 2)
    assert rows[0][:5] == (0, 4.0, 0.0, 4.0, -1.0)
