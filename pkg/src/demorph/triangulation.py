"""Delaunay triangulation and supporting planar geometry.

Incremental Bowyer-Watson construction. Chosen over library wrappers
because the morph point set places many exactly-collinear points on the
image border; those must survive as mesh vertices, which convex-hull based
triangulators drop or merge. Cocircular ties (square corners, mirrored
border points) resolve deterministically by insertion order.
"""

import numpy as np

from .errors import DegenerateGeometryError

# |signed area| below this is treated as a zero-area triangle.
DEGENERATE_AREA = 1e-9


def triangle_area(a, b, c):
    """Signed area of triangle abc (positive when counterclockwise in x-right/y-down)."""
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))


def circumcircle(a, b, c):
    """Circumcenter and squared radius of triangle abc."""
    d = 2.0 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    if d == 0.0:
        raise DegenerateGeometryError("collinear points have no circumcircle")
    la = a[0] * a[0] + a[1] * a[1]
    lb = b[0] * b[0] + b[1] * b[1]
    lc = c[0] * c[0] + c[1] * c[1]
    ux = (la * (b[1] - c[1]) + lb * (c[1] - a[1]) + lc * (a[1] - b[1])) / d
    uy = (la * (c[0] - b[0]) + lb * (a[0] - c[0]) + lc * (b[0] - a[0])) / d
    r2 = (a[0] - ux) ** 2 + (a[1] - uy) ** 2
    return (ux, uy), r2


def _strictly_in_circumcircle(p, a, b, c, rel_tol=1e-11):
    """Incircle determinant predicate: True when p is strictly inside the
    circumcircle of abc. Far more stable than comparing distances to a
    computed circumcenter, which cancels catastrophically for thin
    triangles. Cocircular ties count as outside."""
    adx = a[0] - p[0]
    ady = a[1] - p[1]
    bdx = b[0] - p[0]
    bdy = b[1] - p[1]
    cdx = c[0] - p[0]
    cdy = c[1] - p[1]
    ad2 = adx * adx + ady * ady
    bd2 = bdx * bdx + bdy * bdy
    cd2 = cdx * cdx + cdy * cdy
    det = (
        adx * (bdy * cd2 - cdy * bd2)
        - ady * (bdx * cd2 - cdx * bd2)
        + ad2 * (bdx * cdy - cdx * bdy)
    )
    orient = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
    if orient < 0:
        det = -det
    tol = rel_tol * max(ad2, bd2, cd2) ** 2
    return det > tol


# Ideal directions of the three bounding vertices "at infinity"
# (90, 210 and 330 degrees). Keeping them symbolic avoids the classic
# failure of finite super-triangles: their huge circumcircles bulge past
# hull edges and swallow points, notching the final boundary.
_SUPER_DIRS = np.array(
    [[0.0, 1.0], [-0.8660254037844387, -0.5], [0.8660254037844386, -0.5]]
)


def _cavity_test(t, pts, p, n, tol):
    """Is p inside the (limit) circumdisk of triangle t?

    Triangles with bounding at-infinity vertices degenerate to half-plane
    tests; ties there count as inside so points landing exactly on a hull
    edge split it correctly. Real-triangle cocircular ties count as
    outside, which keeps the construction deterministic.
    """
    sup = [v for v in t if v >= n]
    real = [v for v in t if v < n]
    if len(sup) == 0:
        return _strictly_in_circumcircle(p, pts[t[0]], pts[t[1]], pts[t[2]])
    if len(sup) == 1:
        u = pts[real[0]]
        v = pts[real[1]]
        e = _SUPER_DIRS[sup[0] - n]
        ex = v[0] - u[0]
        ey = v[1] - u[1]
        s_side = ex * e[1] - ey * e[0]
        p_side = ex * (p[1] - u[1]) - ey * (p[0] - u[0])
        line_tol = tol * np.hypot(ex, ey)
        signed = p_side * np.sign(s_side)
        if signed > line_tol:
            return True
        if signed < -line_tol:
            return False
        # p on the hull line: split the edge only when p lies strictly
        # between u and v, not on the line's extension
        t = ((p[0] - u[0]) * ex + (p[1] - u[1]) * ey) / (ex * ex + ey * ey)
        return 1e-12 < t < 1.0 - 1e-12
    if len(sup) == 2:
        u = pts[real[0]]
        b = _SUPER_DIRS[sup[0] - n] + _SUPER_DIRS[sup[1] - n]
        return (p[0] - u[0]) * b[0] + (p[1] - u[1]) * b[1] >= -tol
    return True


def triangulate(points):
    """Delaunay triangulation of an (n, 2) point set.

    Incremental insertion against three bounding vertices at infinity.
    Returns an (m, 3) int array of vertex indices. Every input point
    appears as a vertex. Raises DegenerateGeometryError for fewer than 3
    points, an all-collinear set, or duplicate points.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DegenerateGeometryError(f"points must be (n, 2), got shape {pts.shape}")
    n = pts.shape[0]
    if n < 3:
        raise DegenerateGeometryError(f"need at least 3 points, got {n}")

    span = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]), 1.0)
    if _all_collinear(pts):
        raise DegenerateGeometryError("all points are collinear")
    if _has_duplicates(pts, span * 1e-12):
        raise DegenerateGeometryError("duplicate points")

    tol = 1e-9 * span
    tris = [(n, n + 1, n + 2)]

    for i in range(n):
        p = pts[i]
        bad = set()
        home = None
        for t_idx, t in enumerate(tris):
            if _cavity_test(t, pts, p, n, tol):
                bad.add(t_idx)
                if home is None and max(t) < n and _contains_point(p, pts[t[0]], pts[t[1]], pts[t[2]]):
                    home = t_idx
        if not bad:
            raise DegenerateGeometryError("insertion point escaped the triangulation")
        if home is None:
            home = min(bad)
        bad = _edge_connected_component(tris, bad, home)
        # Boundary of the cavity: edges belonging to exactly one bad triangle.
        edge_count = {}
        for t_idx in bad:
            t = tris[t_idx]
            for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                key = (min(e), max(e))
                edge_count[key] = edge_count.get(key, 0) + 1
        boundary = [e for e, cnt in edge_count.items() if cnt == 1]
        for t_idx in sorted(bad, reverse=True):
            del tris[t_idx]
        for (u, v) in sorted(boundary):
            tris.append((u, v, i))

    out = []
    for t in tris:
        if any(v >= n for v in t):
            continue
        a, b, c = t
        if triangle_area(pts[a], pts[b], pts[c]) < 0:
            a, b = b, a
        # canonical rotation: smallest index first, orientation preserved
        order = (a, b, c)
        k = int(np.argmin(order))
        out.append(order[k:] + order[:k])
    if not out:
        raise DegenerateGeometryError("triangulation is empty")
    out.sort()
    return np.array(out, dtype=np.intp)


def _contains_point(p, a, b, c, eps=1e-9):
    """Barycentric containment with a tolerance scaled to the triangle."""
    area = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
    if area == 0.0:
        return False
    l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / area
    l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / area
    return l1 >= -eps and l2 >= -eps and l1 + l2 <= 1.0 + eps


def _edge_connected_component(tris, bad, home):
    """Restrict the cavity to the triangles edge-connected to `home`.

    An inconsistent incircle verdict on a distant triangle would otherwise
    punch a hole in the repaired triangulation."""
    by_edge = {}
    for t_idx in bad:
        t = tris[t_idx]
        for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            by_edge.setdefault((min(e), max(e)), []).append(t_idx)
    keep = {home}
    frontier = [home]
    while frontier:
        cur = frontier.pop()
        t = tris[cur]
        for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            for nb in by_edge.get((min(e), max(e)), ()):
                if nb not in keep:
                    keep.add(nb)
                    frontier.append(nb)
    return keep


def _all_collinear(pts, tol=None):
    n = pts.shape[0]
    if n < 3:
        return True
    if tol is None:
        span = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]), 1.0)
        tol = DEGENERATE_AREA * span
    a = pts[0]
    for k in range(1, n):
        if np.hypot(*(pts[k] - a)) > tol:
            b = pts[k]
            break
    else:
        return True
    for p in pts:
        if abs(triangle_area(a, b, p)) > tol:
            return False
    return True


def _has_duplicates(pts, tol):
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    s = pts[order]
    d = np.abs(np.diff(s, axis=0)).sum(axis=1)
    return bool((d <= tol).any())


def convex_hull_vertex_count(points, tol=1e-9):
    """Number of input points lying on the convex hull boundary.

    Counts points interior to hull edges as well; this is the h in the
    triangle-count identity m = 2n - h - 2.
    """
    pts = np.asarray(points, dtype=np.float64)
    hull = convex_hull(pts)
    count = 0
    scale = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]), 1.0)
    for p in pts:
        if _on_polygon_boundary(p, hull, tol * scale):
            count += 1
    return count


def convex_hull(points):
    """Strict convex hull (Andrew monotone chain), collinear points dropped."""
    pts = np.asarray(points, dtype=np.float64)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    s = [tuple(p) for p in pts[order]]
    uniq = []
    for p in s:
        if not uniq or p != uniq[-1]:
            uniq.append(p)
    if len(uniq) < 3:
        raise DegenerateGeometryError("hull needs at least 3 distinct points")

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in uniq:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(uniq):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1], dtype=np.float64)


def _on_polygon_boundary(p, poly, tol):
    k = poly.shape[0]
    for i in range(k):
        a = poly[i]
        b = poly[(i + 1) % k]
        ab = b - a
        ap = p - a
        denom = ab @ ab
        t = 0.0 if denom == 0.0 else np.clip((ap @ ab) / denom, 0.0, 1.0)
        if np.hypot(*(ap - t * ab)) <= tol:
            return True
    return False


def polygon_area(poly):
    """Absolute area by the shoelace formula."""
    x = poly[:, 0]
    y = poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def mesh_is_valid(points, tris):
    """Cheap structural checks: index range and no zero-area triangles."""
    pts = np.asarray(points, dtype=np.float64)
    for t in np.asarray(tris):
        if t.min() < 0 or t.max() >= pts.shape[0]:
            return False
        if abs(triangle_area(pts[t[0]], pts[t[1]], pts[t[2]])) < DEGENERATE_AREA:
            return False
    return True
