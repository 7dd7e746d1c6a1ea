"""2D/3D geometric primitives used by the scene model and relation engine.

Everything here is pure and deterministic. Angles are radians; the world
frame is right-handed with +z up, headings measured CCW from +x in the XY
plane.
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle into [0, 2*pi)."""
    a = math.fmod(theta, TWO_PI)
    if a < 0:
        a += TWO_PI
    return a if a < TWO_PI else 0.0


def signed_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.fmod(theta, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    elif a > math.pi:
        a -= TWO_PI
    return a


def heading_of(vec_xy) -> float:
    """Heading of a 2D vector in [0, 2*pi)."""
    return normalize_angle(math.atan2(float(vec_xy[1]), float(vec_xy[0])))


def rot2d(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=float)


def polygon_area(polygon: np.ndarray) -> float:
    """Signed area (positive for CCW vertex order)."""
    x = polygon[:, 0]
    y = polygon[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _segments_intersect(p1, p2, p3, p4) -> bool:
    # Proper intersection only; shared endpoints between adjacent edges are fine.
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if v > 1e-12:
            return 1
        if v < -1e-12:
            return -1
        return 0

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


def polygon_is_simple(polygon: np.ndarray) -> bool:
    """True when no two non-adjacent edges properly intersect."""
    n = len(polygon)
    for i in range(n):
        a1, a2 = polygon[i], polygon[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_intersect(a1, a2, polygon[j], polygon[(j + 1) % n]):
                return False
    return True


def points_in_polygon(points: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    """Vectorized even-odd (ray casting) test; boundary points count as inside.

    points: (N, 2), polygon: (M, 2). Returns a bool array of shape (N,).
    """
    px = points[:, 0][:, None]
    py = points[:, 1][:, None]
    x1 = polygon[:, 0][None, :]
    y1 = polygon[:, 1][None, :]
    x2 = np.roll(polygon[:, 0], -1)[None, :]
    y2 = np.roll(polygon[:, 1], -1)[None, :]

    crosses = ((y1 > py) != (y2 > py)) & (
        px < (x2 - x1) * (py - y1) / np.where(y2 - y1 == 0, 1e-300, y2 - y1) + x1
    )
    inside = np.count_nonzero(crosses, axis=1) % 2 == 1

    # Edge-on points: within 1e-9 of any boundary segment.
    ex = x2 - x1
    ey = y2 - y1
    seg_len2 = np.where(ex * ex + ey * ey == 0, 1e-300, ex * ex + ey * ey)
    t = np.clip(((px - x1) * ex + (py - y1) * ey) / seg_len2, 0.0, 1.0)
    dist2 = (px - (x1 + t * ex)) ** 2 + (py - (y1 + t * ey)) ** 2
    on_edge = np.any(dist2 <= 1e-18, axis=1)
    return inside | on_edge


def point_in_polygon(point, polygon: np.ndarray) -> bool:
    return bool(points_in_polygon(np.asarray([point], dtype=float), polygon)[0])


def rect_distance_xy(points: np.ndarray, center_xy, half_extents_xy, yaw: float = 0.0) -> np.ndarray:
    """Euclidean distance from each point to a (possibly rotated) rectangle.

    Zero for points inside the footprint. points: (N, 2).
    """
    rel = np.asarray(points, dtype=float) - np.asarray(center_xy, dtype=float)
    if abs(yaw) > 1e-6:
        rel = rel @ rot2d(yaw)  # world -> local is R(-yaw) applied on the left; row vectors use R(yaw) on the right
    dx = np.maximum(np.abs(rel[:, 0]) - half_extents_xy[0], 0.0)
    dy = np.maximum(np.abs(rel[:, 1]) - half_extents_xy[1], 0.0)
    return np.hypot(dx, dy)


def rect_contains_xy(points: np.ndarray, center_xy, half_extents_xy, yaw: float = 0.0) -> np.ndarray:
    """True for points strictly inside a (possibly rotated) rectangle."""
    rel = np.asarray(points, dtype=float) - np.asarray(center_xy, dtype=float)
    if abs(yaw) > 1e-6:
        rel = rel @ rot2d(yaw)
    return (np.abs(rel[:, 0]) < half_extents_xy[0]) & (np.abs(rel[:, 1]) < half_extents_xy[1])


def xy_overlap_area(c1, s1, c2, s2) -> float:
    """Overlap area of two axis-aligned XY footprints given centers and full extents."""
    ox = min(c1[0] + s1[0] / 2, c2[0] + s2[0] / 2) - max(c1[0] - s1[0] / 2, c2[0] - s2[0] / 2)
    oy = min(c1[1] + s1[1] / 2, c2[1] + s2[1] / 2) - max(c1[1] - s1[1] / 2, c2[1] - s2[1] / 2)
    if ox <= 0 or oy <= 0:
        return 0.0
    return ox * oy


def point_segment_distance_xy(p, a, b) -> float:
    """Distance from point p to segment a-b, all in XY."""
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    px, py = float(p[0]), float(p[1])
    ex, ey = bx - ax, by - ay
    len2 = ex * ex + ey * ey
    if len2 == 0:
        return math.hypot(px - ax, py - ay)
    t = max(0.0, min(1.0, ((px - ax) * ex + (py - ay) * ey) / len2))
    return math.hypot(px - (ax + t * ex), py - (ay + t * ey))


def point_line_distance_xy(p, a, b) -> float:
    """Distance from point p to the infinite line through a and b (a != b)."""
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    px, py = float(p[0]), float(p[1])
    num = abs((bx - ax) * (ay - py) - (ax - px) * (by - ay))
    den = math.hypot(bx - ax, by - ay)
    return num / den
