"""Midpoint subdivision of a convex quadrilateral and its side-vector recursion.

A quadrilateral ABCD is cut by the segments joining midpoints of opposite
sides; one of the four pieces AEMH, EBFM, MFCG, HMGD is kept and blown up by
a factor 2. The "horizontal" side vectors u = B - A and v = C - D then follow
a two-case recursion: the new pair is {u, (u+v)/2} or {(u+v)/2, v}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Quadrilateral, RandomSource, Vec2, map_replica_blocks

# child index for (horizontal coin, vertical coin)
_CHILD_OF_COINS = np.array([[0, 1], [3, 2]])
CHILD_NAMES = ("AEMH", "EBFM", "MFCG", "HMGD")


@dataclass(frozen=True)
class PairState:
    """Ordered side-vector pair ``(u, v)`` after ``step`` subdivisions.

    The pair is stored as ``u`` and ``offset = v - u``. Each step halves the
    offset exactly (a power-of-two scaling), which keeps
    ``|v_n - u_n| = 2**-n |v_0 - u_0|`` free of rounding.
    """

    u: Vec2
    offset: Vec2
    step: int = 0

    @classmethod
    def from_vectors(cls, u, v, step: int = 0) -> "PairState":
        u = Vec2(float(u[0]), float(u[1]))
        return cls(u, Vec2(float(v[0]) - u.x, float(v[1]) - u.y), step)

    @property
    def v(self) -> Vec2:
        return self.u + self.offset

    @property
    def separation(self) -> float:
        return self.offset.norm()


def pair_step(s: PairState, coin: int) -> PairState:
    half = Vec2(s.offset.x / 2, s.offset.y / 2)
    if coin == 0:
        return PairState(s.u, half, s.step + 1)
    if coin == 1:
        return PairState(s.u + half, half, s.step + 1)
    raise ValueError("coin must be 0 or 1")


def _check_quad(q: Quadrilateral) -> None:
    if q.signed_area() == 0.0:
        raise ValueError("degenerate quadrilateral (zero area)")
    if not q.is_convex():
        raise ValueError("quadrilateral is not convex")


def _line_intersection(p1, p2, q1, q2) -> np.ndarray:
    d1 = p2 - p1
    d2 = q2 - q1
    den = d1[0] * d2[1] - d1[1] * d2[0]
    if den == 0:
        raise ValueError("bimedians are parallel")
    w = q1 - p1
    s = (w[0] * d2[1] - w[1] * d2[0]) / den
    return p1 + s * d1


def quad_children(q: Quadrilateral) -> list[np.ndarray]:
    """The four pieces AEMH, EBFM, MFCG, HMGD as ``(4, 2)`` vertex arrays, unscaled."""
    _check_quad(q)
    A, B, C, D = q.vertices()
    E, F, G, H = (A + B) / 2, (B + C) / 2, (C + D) / 2, (D + A) / 2
    M = _line_intersection(E, G, F, H)
    return [np.array(p) for p in ([A, E, M, H], [E, B, F, M], [M, F, C, G], [H, M, G, D])]


def rescale_about_centroid(verts: np.ndarray, factor: float = 2.0) -> np.ndarray:
    c = verts.mean(axis=0)
    return c + factor * (verts - c)


def quad_child(q: Quadrilateral, index: int) -> Quadrilateral:
    if index not in (0, 1, 2, 3):
        raise ValueError("index must be in 0..3")
    return Quadrilateral.from_array(rescale_about_centroid(quad_children(q)[index]))


def child_index(h_coin: int, v_coin: int) -> int:
    """Child whose horizontal pair takes branch ``h_coin`` and vertical pair ``v_coin``."""
    return int(_CHILD_OF_COINS[h_coin, v_coin])


def side_pairs(q: Quadrilateral) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``(B - A, C - D, D - A, C - B)``."""
    A, B, C, D = q.vertices()
    return B - A, C - D, D - A, C - B


def parallelogram_defect(q: Quadrilateral) -> float:
    u, v, w, z = side_pairs(q)
    return float((np.hypot(*(u - v)) + np.hypot(*(w - z))) / q.perimeter())


def _segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    d = b - a
    t = float(np.clip(np.dot(p - a, d) / np.dot(d, d), 0.0, 1.0)) if np.dot(d, d) else 0.0
    return float(np.hypot(*(p - (a + t * d))))


def defect_envelope_scale(q: Quadrilateral) -> float:
    """Bound ``K`` with ``parallelogram_defect(child_n) <= K * 2**-n`` along every path.

    Side mismatches halve each step while every side vector stays on the
    segment spanned by its initial pair, so each perimeter is at least twice
    the origin's distance to those two segments.
    """
    u, v, w, z = side_pairs(q)
    origin = np.zeros(2)
    floor = 2.0 * (_segment_distance(origin, u, v) + _segment_distance(origin, w, z))
    if floor <= 0:
        raise ValueError("side segment passes through the origin")
    return float((np.hypot(*(u - v)) + np.hypot(*(w - z))) / floor)


def vertex_trajectory(q0: Quadrilateral, n: int, src: RandomSource) -> tuple[list[Quadrilateral], np.ndarray]:
    """Full vertex-level chain of ``n`` children, each picked by two fair coins.

    Returns the quadrilaterals and the ``(n, 2)`` array of (horizontal,
    vertical) coins that selected them.
    """
    coins = src.integers(2, size=(n, 2))
    out = [q0]
    q = q0
    for h, v in coins:
        q = quad_child(q, child_index(int(h), int(v)))
        out.append(q)
    return out, coins


def pair_trajectory(s0: PairState, coins) -> list[PairState]:
    out = [s0]
    for c in coins:
        out.append(pair_step(out[-1], int(c)))
    return out


def simulate_pair_limit(s0: PairState, src: RandomSource, n: int) -> Vec2:
    """Endpoint created at step ``n`` (the midpoint inserted by the last split)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    s = s0
    coins = src.integers(2, size=n)
    for c in coins[:-1]:
        s = pair_step(s, int(c))
    return s.u + Vec2(s.offset.x / 2, s.offset.y / 2)


def segment_parameter(p, u0, v0) -> np.ndarray:
    """Orthogonal projection parameter of ``p`` on segment ``u0 -> v0``."""
    p = np.asarray(p, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    d = np.asarray(v0, dtype=float) - u0
    return ((p - u0) @ d) / float(d @ d)


def limit_parameters(n: int, replicas: int, src: RandomSource, threads: int | None = None) -> np.ndarray:
    """Segment parameter ``t`` of ``X_n`` for each replica, from ``u0 = (1, 0)``, ``v0 = (0, 1)``.

    Vectorized over replicas; replica blocks draw from independent streams.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    u0 = np.array([1.0, 0.0])
    off0 = np.array([-1.0, 1.0])

    def block(bsrc: RandomSource, count: int) -> np.ndarray:
        coins = bsrc.integers(2, size=(n, count))
        u = np.tile(u0, (count, 1))
        off = off0.copy()
        for c in coins[:-1]:
            off = off / 2
            u = u + c[:, None] * off[None, :]
        x = u + off[None, :] / 2
        return segment_parameter(x, u0, u0 + off0)

    return np.concatenate(map_replica_blocks(block, replicas, src, threads))


def rate_check(q0: Quadrilateral, n: int, src: RandomSource) -> dict:
    """Exact-halving and defect-envelope diagnostics along one ``n``-step path."""
    quads, coins = vertex_trajectory(q0, n, src)
    u0, v0, _, _ = side_pairs(q0)
    pairs = pair_trajectory(PairState.from_vectors(u0, v0), coins[:, 0])
    sep0 = pairs[0].separation
    halving = max(abs(p.separation - sep0 * 2.0**-k) / (sep0 * 2.0**-k) for k, p in enumerate(pairs))
    scale = defect_envelope_scale(q0)
    defects = [parallelogram_defect(q) for q in quads]
    ratio = max(d / (scale * 2.0 ** (-k + 1)) for k, d in enumerate(defects))
    mismatch = max(
        max(np.hypot(*(side_pairs(q)[0] - p.u)), np.hypot(*(side_pairs(q)[1] - p.v)))
        for q, p in zip(quads, pairs)
    )
    return {
        "steps": n,
        "max_vertex_pair_mismatch": float(mismatch),
        "max_halving_rel_error": halving,
        "envelope_scale": scale,
        "max_defect_over_envelope": ratio,
        "defects": defects,
        "pairs": pairs,
        "quads": quads,
    }


def trajectory_rows(quads: list[Quadrilateral]):
    """Rows ``step, ux, uy, vx, vy, defect`` for the vertex chain."""
    for k, q in enumerate(quads):
        u, v, _, _ = side_pairs(q)
        yield k, u[0], u[1], v[0], v[1], parallelogram_defect(q)


SQUARE = Quadrilateral(Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1))
KITE_EXAMPLE = Quadrilateral(Vec2(0, 0), Vec2(4, 0), Vec2(5, 3), Vec2(1, 4))
