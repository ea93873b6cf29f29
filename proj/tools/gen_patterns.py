#!/usr/bin/env python3
"""Generate the bundled pattern meshes under data/patterns/.

Each domain is convex, so a Delaunay triangulation of a fixed boundary ring
plus a relaxed interior point set covers it exactly. Node counts are chosen
so that (nodes, edges, triangles) land on these target statistics:

    A  circle, diameter 100 mm        (970, 2800, 1831)
    B  rectangle 156 x 100 mm         (1215, 3505, 2291)
    C  square 100 x 100 mm            (388, 1087, 700)

For a disc-topology triangulation with nb boundary and ni interior nodes,
triangles = 2 ni + nb - 2 and edges = 3 ni + 2 nb - 3, which fixes nb and ni.

Triangles whose centroid lies inside the kirigami (PLA) layout are flagged 1.

Usage: python3 tools/gen_patterns.py [outdir]
"""

import math
import sys
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay


# ---------------------------------------------------------------- domains


class Circle:
    def __init__(self, radius):
        self.r = radius

    def sdf(self, p):
        return np.hypot(p[:, 0], p[:, 1]) - self.r

    def boundary(self, n):
        t = 2.0 * math.pi * np.arange(n) / n + math.pi / 2.0
        return np.column_stack([self.r * np.cos(t), self.r * np.sin(t)])

    def project(self, p):
        rr = np.hypot(p[:, 0], p[:, 1])
        return p * (self.r / rr)[:, None]

    def area(self):
        return math.pi * self.r**2


class Rect:
    def __init__(self, lx, ly):
        self.hx = lx / 2.0
        self.hy = ly / 2.0

    def sdf(self, p):
        dx = np.abs(p[:, 0]) - self.hx
        dy = np.abs(p[:, 1]) - self.hy
        outside = np.hypot(np.maximum(dx, 0), np.maximum(dy, 0))
        inside = np.minimum(np.maximum(dx, dy), 0)
        return outside + inside

    def boundary(self, n):
        # Distribute n points along the perimeter, corners always included.
        lx, ly = 2 * self.hx, 2 * self.hy
        per = 2 * (lx + ly)
        nx = max(1, round(n * lx / per))
        ny = n // 2 - nx
        counts = [nx, ny, nx, n - 2 * nx - ny]
        corners = [(-self.hx, -self.hy), (self.hx, -self.hy), (self.hx, self.hy), (-self.hx, self.hy)]
        pts = []
        for k in range(4):
            a = np.array(corners[k])
            b = np.array(corners[(k + 1) % 4])
            m = counts[k]
            for s in range(m):
                pts.append(a + (b - a) * s / m)
        return np.array(pts)

    def project(self, p):
        q = p.copy()
        dx = np.abs(q[:, 0]) - self.hx
        dy = np.abs(q[:, 1]) - self.hy
        snap_x = dx > dy
        q[snap_x, 0] = np.sign(q[snap_x, 0]) * self.hx
        q[~snap_x, 1] = np.sign(q[~snap_x, 1]) * self.hy
        return q

    def area(self):
        return 4 * self.hx * self.hy


# --------------------------------------------------------------- patterns


def bar(center, angle_deg, half_len, width):
    """Oriented rectangle given by centre, direction, half length, width."""
    a = math.radians(angle_deg)
    return (np.array(center, float), np.array([math.cos(a), math.sin(a)]), half_len, width / 2.0)


def inside_bars(p, bars):
    hit = np.zeros(len(p), dtype=bool)
    for c, u, hl, hw in bars:
        d = p - c
        along = d @ u
        perp = d @ np.array([-u[1], u[0]])
        hit |= (np.abs(along) <= hl) & (np.abs(perp) <= hw)
    return hit


def star(center, width):
    # Three 90 mm bars through the centroid at 60 degree increments.
    return [bar(center, ang, 45.0, width) for ang in (0.0, 60.0, 120.0)]


PATTERNS = {
    "a": dict(
        domain=Circle(50.0),
        nb=107,
        ni=863,
        bars=star((0.0, 0.0), 8.0),
        note="six-arm star (three 90 mm bars at 60 deg), 8 mm wide, on a 100 mm diameter disc",
    ),
    "b": dict(
        domain=Rect(156.0, 100.0),
        nb=137,
        ni=1078,
        bars=star((-28.365, 0.0), 8.0) + star((28.365, 0.0), 8.0) + [bar((0.0, 0.0), 0.0, 28.365, 8.0)],
        note="two coaxial six-arm stars joined by a 56.73 mm spine, 8 mm wide, on a 156 x 100 mm rectangle",
    ),
    "c": dict(
        domain=Rect(100.0, 100.0),
        nb=74,
        ni=314,
        bars=[bar((0.0, 0.0), 45.0, 49.995, 12.0), bar((0.0, 0.0), 135.0, 49.995, 12.0)],
        note="X-cross along the diagonals, 99.99 mm tip to tip, 12 mm wide, on a 100 x 100 mm square",
    ),
}


# ------------------------------------------------------------ generation


def hex_lattice(domain, spacing, margin):
    ny = int(200 / (spacing * math.sqrt(3) / 2)) + 2
    nx = int(200 / spacing) + 2
    pts = []
    for j in range(-ny, ny + 1):
        y = j * spacing * math.sqrt(3) / 2
        off = 0.5 * spacing if j % 2 else 0.0
        for i in range(-nx, nx + 1):
            pts.append((i * spacing + off, y))
    pts = np.array(pts)
    return pts[domain.sdf(pts) < -margin]


def interior_points(domain, ni, h):
    # Pick a lattice spacing that yields at least ni points, then trim the
    # points nearest the boundary until the count is exact.
    spacing = h
    while True:
        pts = hex_lattice(domain, spacing, 0.45 * h)
        if len(pts) >= ni:
            break
        spacing *= 0.99
    while len(pts) > ni:
        d = domain.sdf(pts)
        # remove in symmetric-ish batches: drop the closest-to-boundary point
        k = int(np.argmax(d))
        pts = np.delete(pts, k, axis=0)
    return pts


def triangulate(fixed, free):
    pts = np.vstack([fixed, free])
    tri = Delaunay(pts)
    return pts, tri.simplices.copy()


def relax(domain, fixed, free, h, iters=200):
    """distmesh-style spring relaxation of the interior points."""
    nf = len(fixed)
    for _ in range(iters):
        pts, tris = triangulate(fixed, free)
        edges = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        edges = np.unique(np.sort(edges, axis=1), axis=0)
        vec = pts[edges[:, 0]] - pts[edges[:, 1]]
        length = np.hypot(vec[:, 0], vec[:, 1])
        target = 1.2 * math.sqrt(np.sum(length**2) / len(length))
        force = np.maximum(target - length, 0.0)
        fvec = (force / length)[:, None] * vec
        acc = np.zeros_like(pts)
        np.add.at(acc, edges[:, 0], fvec)
        np.add.at(acc, edges[:, 1], -fvec)
        free = free + 0.2 * acc[nf:]
        # keep interior nodes strictly inside, away from the boundary ring
        d = domain.sdf(free)
        bad = d > -0.3 * h
        if np.any(bad):
            q = domain.project(free[bad])
            inward = -q / np.maximum(np.hypot(q[:, 0], q[:, 1]), 1e-12)[:, None]
            free[bad] = q + 0.3 * h * inward
    return free


def orient_ccw(pts, tris):
    a, b, c = pts[tris[:, 0]], pts[tris[:, 1]], pts[tris[:, 2]]
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    flip = cross < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris, np.abs(cross) / 2


def min_angle_deg(pts, tris):
    worst = 180.0
    for t in tris:
        p = pts[t]
        for k in range(3):
            u = p[(k + 1) % 3] - p[k]
            v = p[(k + 2) % 3] - p[k]
            cosang = np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))
            worst = min(worst, math.degrees(math.acos(np.clip(cosang, -1, 1))))
    return worst


def generate(name, spec, outdir):
    dom = spec["domain"]
    nb, ni = spec["nb"], spec["ni"]
    ntri = 2 * ni + nb - 2
    h = math.sqrt(4.0 * dom.area() / (math.sqrt(3.0) * ntri))
    fixed = dom.boundary(nb)
    free = interior_points(dom, ni, h)
    free = relax(dom, fixed, free, h)
    pts, tris = triangulate(fixed, free)
    tris, areas = orient_ccw(pts, tris)
    # Sort triangles by centroid for a stable, readable file.
    cen = pts[tris].mean(axis=1)
    order = np.lexsort((cen[:, 0], cen[:, 1]))
    tris, areas, cen = tris[order], areas[order], cen[order]
    flags = inside_bars(cen, spec["bars"]).astype(int)

    edges = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    edges = np.unique(np.sort(edges, axis=1), axis=0)
    lengths = np.linalg.norm(pts[edges[:, 0]] - pts[edges[:, 1]], axis=1)
    stats = (len(pts), len(edges), len(tris))
    print(
        f"pattern {name}: (N_n, N_e, N_t) = {stats}, mean edge {lengths.mean():.3f} mm, "
        f"min area {areas.min():.3f} mm^2, min angle {min_angle_deg(pts, tris):.1f} deg, "
        f"bilayer triangles {flags.sum()}"
    )

    path = Path(outdir) / f"pattern_{name}.mesh"
    with open(path, "w") as f:
        f.write(f"# pattern {name.upper()}: {spec['note']}\n")
        f.write("# generated by tools/gen_patterns.py; units mm; region flag 1 = bilayer\n")
        f.write(f"nodes {len(pts)}\n")
        for i, p in enumerate(pts):
            f.write(f"{i} {p[0]:.6f} {p[1]:.6f} 0\n")
        f.write(f"triangles {len(tris)}\n")
        for i, (t, fl) in enumerate(zip(tris, flags)):
            f.write(f"{i} {t[0]} {t[1]} {t[2]} {fl}\n")
    return stats


def main():
    outdir = sys.argv[1] if len(sys.argv) > 1 else str(Path(__file__).resolve().parent.parent / "data" / "patterns")
    Path(outdir).mkdir(parents=True, exist_ok=True)
    for name, spec in PATTERNS.items():
        generate(name, spec, outdir)


if __name__ == "__main__":
    main()
