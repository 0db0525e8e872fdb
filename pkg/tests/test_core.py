import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subdivlab.core import (
    EQUILATERAL,
    SQRT3_2,
    AngleTriple,
    Quadrilateral,
    RandomSource,
    ShapeCoord,
    UniformTriple,
    Vec2,
    map_replica_blocks,
    replica_blocks,
    resolve_threads,
    shape_from_vertices,
    shape_from_vertices_many,
    simplex_distance,
)

coord = st.floats(-10, 10, allow_nan=False)


def test_vec2_arithmetic():
    v = Vec2(1.0, 2.0) + Vec2(0.5, -1.0)
    assert v == Vec2(1.5, 1.0)
    assert Vec2(3.0, 4.0) - (1.0, 1.0) == Vec2(2.0, 3.0)
    assert 2 * Vec2(1.0, -1.0) == Vec2(2.0, -2.0)
    assert Vec2(3.0, 4.0).norm() == 5.0


def test_angle_triple_validation():
    AngleTriple(0.5, 0.25, 0.25)
    with pytest.raises(ValueError):
        AngleTriple(0.6, 0.6, -0.2)
    with pytest.raises(ValueError):
        AngleTriple(0.5, 0.5, 0.5)
    t = AngleTriple.of(1.0, 1.0, -1e-17)
    assert t.c == 0.0 and t.a == 0.5


def test_simplex_distance():
    u = AngleTriple(1.0, 0.0, 0.0)
    v = AngleTriple(0.0, 1.0, 0.0)
    assert simplex_distance(u, v) == pytest.approx(math.sqrt(2))
    assert simplex_distance(u, u) == 0.0


def test_shape_coord_validation():
    with pytest.raises(ValueError):
        ShapeCoord(0.4, 0.1)
    with pytest.raises(ValueError):
        ShapeCoord(0.7, 0.9)
    s = ShapeCoord(0.5 - 1e-13, -1e-13)
    assert s.x == 0.5 and s.y == 0.0


def test_uniform_triple_bounds():
    UniformTriple(0.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        UniformTriple(1.1, 0.0, 0.0)


def test_shape_of_equilateral_and_right_triangles():
    s = shape_from_vertices((0, 0), (2, 0), (1, math.sqrt(3)))
    assert s.x == pytest.approx(0.5) and s.y == pytest.approx(SQRT3_2)
    # hypotenuse 5 becomes the base, apex height 12/25
    s = shape_from_vertices((0, 0), (4, 0), (0, 3))
    assert s.x == pytest.approx(16 / 25) and s.y == pytest.approx(12 / 25)


def test_shape_of_null_triangle_raises():
    with pytest.raises(ValueError, match="null"):
        shape_from_vertices((1, 1), (1, 1), (1, 1))


@settings(max_examples=300, deadline=None)
@given(st.lists(coord, min_size=6, max_size=6), st.floats(0.1, 5), st.floats(-math.pi, math.pi), coord, coord)
def test_shape_is_similarity_invariant(p, scale, angle, dx, dy):
    pts = np.array(p).reshape(3, 2)
    d1, d2 = pts[1] - pts[0], pts[2] - pts[0]
    if abs(d1[0] * d2[1] - d1[1] * d2[0]) < 1e-3:
        return
    rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    moved = scale * pts @ rot.T + np.array([dx, dy])
    a = shape_from_vertices(*pts)
    b = shape_from_vertices(*moved[::-1])
    assert 0.5 <= a.x <= 1.0 and 0.0 <= a.y <= SQRT3_2
    assert a.x**2 + a.y**2 <= 1 + 1e-9
    assert abs(a.x - b.x) < 1e-8 and abs(a.y - b.y) < 1e-8


def test_shape_many_matches_scalar():
    rng = np.random.default_rng(3)
    P = rng.normal(size=(50, 3, 2))
    x, y = shape_from_vertices_many(P[:, 0], P[:, 1], P[:, 2])
    for k in range(50):
        s = shape_from_vertices(*P[k])
        assert (s.x, s.y) == (x[k], y[k])


def test_quadrilateral_geometry():
    q = Quadrilateral(Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1))
    assert q.signed_area() == 1.0
    assert q.is_convex()
    assert q.perimeter() == 4.0
    dart = Quadrilateral(Vec2(0, 0), Vec2(2, 0), Vec2(0.5, 0.5), Vec2(0, 2))
    assert not dart.is_convex()


def test_random_source_is_reproducible_and_streams_differ():
    a = RandomSource(7, 0).uniform(5)
    b = RandomSource(7, 0).uniform(5)
    c = RandomSource(7, 1).uniform(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(RandomSource(7).child(0).uniform(5), RandomSource(7).child(1).uniform(5))
    with pytest.raises(ValueError):
        RandomSource(-1)


def test_child_stream_independent_of_parent_usage():
    src = RandomSource(11, 3)
    first = src.child(4).uniform(3)
    src.uniform(1000)
    assert np.array_equal(first, src.child(4).uniform(3))


def test_replica_blocks_partition():
    blocks = replica_blocks(10, 4)
    assert blocks == [(0, 0, 4), (1, 4, 4), (2, 8, 2)]
    with pytest.raises(ValueError):
        replica_blocks(0)


def test_block_map_is_thread_count_independent(monkeypatch):
    def fn(src, count):
        return src.uniform(count)

    src = RandomSource(5)
    one = np.concatenate(map_replica_blocks(fn, 1000, src, threads=1, block_size=64))
    four = np.concatenate(map_replica_blocks(fn, 1000, src, threads=4, block_size=64))
    assert np.array_equal(one, four)
    monkeypatch.setenv("SUBDIVLAB_THREADS", "3")
    assert resolve_threads() == 3
    assert resolve_threads(2) == 2


def test_equilateral_constant():
    assert EQUILATERAL.x == 0.5 and EQUILATERAL.y == SQRT3_2
