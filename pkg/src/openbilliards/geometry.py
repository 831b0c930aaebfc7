"""Boundary geometry for planar billiard tables.

A table boundary is a union of straight segments and circular arcs traversed
with the playing domain on the left, so the inward normal is the +90 degree
rotation of the traversal tangent.  Arc length runs over the components in
listed order.  Signed curvature follows the scattering convention: +1/rho on
dispersing walls (domain outside the circle), -1/rho on focusing walls
(domain inside the circle), 0 on flats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * math.pi

# Junction window as a fraction of the perimeter: impacts closer than this to
# a component junction are flagged as corner hits and the orbit is censored.
CORNER_TOL_FACTOR = 1e-12

# A full-circle component is a closed loop; its parametrization seam is not a
# junction.  Spans are compared against 2*pi with this slack.
_LOOP_TOL = 1e-9


class GeometryError(ValueError):
    """Raised for unbuildable or ill-posed table parameters."""


def _unit(vx, vy):
    n = math.hypot(vx, vy)
    if n == 0.0:
        raise GeometryError("zero-length direction")
    return vx / n, vy / n


@dataclass(frozen=True)
class FlatSegment:
    """Straight boundary piece from p0 to p1 (traversal direction)."""

    p0: tuple
    p1: tuple

    @cached_property
    def length(self):
        return math.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1])

    @cached_property
    def tangent(self):
        return _unit(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1])

    @cached_property
    def normal(self):
        # inward = tangent rotated +90 deg (domain on the left)
        tx, ty = self.tangent
        return (-ty, tx)

    curvature = 0.0
    kind = "flat"
    dispersing = False

    def start(self):
        return self.p0

    def end(self):
        return self.p1

    def point_at(self, u):
        tx, ty = self.tangent
        return (self.p0[0] + u * tx, self.p0[1] + u * ty)

    def normal_at(self, u):
        return self.normal


@dataclass(frozen=True)
class CircularArc:
    """Circular boundary piece with angular span [theta0, theta1].

    dispersing=True means the playing domain lies outside the circle (inward
    normal radially out, traversal clockwise); dispersing=False is a focusing
    arc (domain inside, traversal counterclockwise).  A span of 2*pi is a
    closed scatterer loop whose parametrization seam is smooth.
    """

    center: tuple
    radius: float
    theta0: float
    theta1: float
    dispersing: bool

    def __post_init__(self):
        if self.radius <= 0.0:
            raise GeometryError(f"arc radius must be positive, got {self.radius}")
        span = self.theta1 - self.theta0
        if not (0.0 < span <= TWO_PI + _LOOP_TOL):
            raise GeometryError(f"arc span must lie in (0, 2*pi], got {span}")

    kind = "arc"

    @cached_property
    def span(self):
        return min(self.theta1 - self.theta0, TWO_PI)

    @cached_property
    def loop(self):
        return self.span >= TWO_PI - _LOOP_TOL

    @cached_property
    def length(self):
        return self.radius * self.span

    @cached_property
    def curvature(self):
        return (1.0 if self.dispersing else -1.0) / self.radius

    @cached_property
    def _theta_ref(self):
        # traversal start angle: focusing runs CCW from theta0, dispersing
        # runs CW from theta1 (both keep the domain on the left)
        return self.theta1 if self.dispersing else self.theta0

    @cached_property
    def _dir(self):
        return -1.0 if self.dispersing else 1.0

    def theta_at(self, u):
        return self._theta_ref + self._dir * u / self.radius

    def point_at(self, u):
        th = self.theta_at(u)
        return (self.center[0] + self.radius * math.cos(th),
                self.center[1] + self.radius * math.sin(th))

    def normal_at(self, u):
        th = self.theta_at(u)
        sg = 1.0 if self.dispersing else -1.0
        return (sg * math.cos(th), sg * math.sin(th))

    def start(self):
        return self.point_at(0.0)

    def end(self):
        return self.point_at(self.length)

    def angles(self):
        """Angular interval as (theta0, theta1) with theta1 > theta0."""
        return (self.theta0, self.theta0 + self.span)


@dataclass(frozen=True)
class Violation:
    """One geometric defect found by validate_table."""

    kind: str
    components: tuple
    detail: str

    def __str__(self):
        ids = ",".join(str(i) for i in self.components)
        return f"[{self.kind}] components ({ids}): {self.detail}"


@dataclass(frozen=True)
class Table:
    """Closed billiard boundary plus class metadata.

    lattice=True marks a unit-torus table: the listed scatterer loops repeat
    on the integer lattice and free flights unfold through periodic images.
    """

    components: tuple
    class_tag: str
    lattice: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.components:
            raise GeometryError("table needs at least one component")
        self._check_chains()

    @cached_property
    def offsets(self):
        lens = [c.length for c in self.components]
        return np.concatenate(([0.0], np.cumsum(lens)))

    @cached_property
    def perimeter(self):
        return float(self.offsets[-1])

    @cached_property
    def corner_tol(self):
        return CORNER_TOL_FACTOR * self.perimeter

    @cached_property
    def diameter(self):
        pts = []
        for c in self.components:
            if c.kind == "flat":
                pts.append(c.p0)
                pts.append(c.p1)
            else:
                pts.append((c.center[0] - c.radius, c.center[1] - c.radius))
                pts.append((c.center[0] + c.radius, c.center[1] + c.radius))
        pts = np.asarray(pts)
        ext = pts.max(axis=0) - pts.min(axis=0)
        return float(math.hypot(ext[0], ext[1]))

    def _check_chains(self):
        """Group components into closed chains and verify head-to-tail closure."""
        tol = 1e-9 * max(c.length for c in self.components)
        chains = []
        start_idx = 0
        comps = self.components
        for i, c in enumerate(comps):
            loop = getattr(c, "loop", False)
            if loop:
                if i != start_idx:
                    raise GeometryError(
                        f"component {i}: closed loop may not sit inside an open chain")
                chains.append((i, i))
                start_idx = i + 1
                continue
            nxt = comps[i + 1] if i + 1 < len(comps) else None
            ex, ey = c.end()
            if nxt is not None and not getattr(nxt, "loop", False):
                sx, sy = nxt.start()
                if math.hypot(ex - sx, ey - sy) <= tol:
                    continue  # chain continues
            # chain must close back to its start
            sx, sy = comps[start_idx].start()
            if math.hypot(ex - sx, ey - sy) > tol:
                raise GeometryError(
                    f"boundary chain starting at component {start_idx} does not "
                    f"close (gap at component {i})")
            chains.append((start_idx, i))
            start_idx = i + 1
        if start_idx != len(comps):
            raise GeometryError("trailing components do not form a closed chain")
        object.__setattr__(self, "_chains", tuple(chains))
        return chains

    @property
    def chains(self):
        return self._chains

    @cached_property
    def junction_s(self):
        """Sorted arclength values of component junctions (loop seams excluded)."""
        js = []
        for a, b in self.chains:
            if a == b and getattr(self.components[a], "loop", False):
                continue
            for i in range(a, b + 1):
                js.append(float(self.offsets[i]))
        return np.asarray(sorted(js))

    @cached_property
    def component_kinds(self):
        return tuple(c.kind for c in self.components)

    @cached_property
    def _bg(self):
        return _BatchGeometry(self)

    def component_of(self, s):
        s = float(s) % self.perimeter
        idx = int(np.searchsorted(self.offsets, s, side="right")) - 1
        return min(max(idx, 0), len(self.components) - 1)


class _BatchGeometry:
    """Flat numpy view of a table's components for vectorized kernels."""

    def __init__(self, table):
        comps = table.components
        n = len(comps)
        self.n = n
        self.perimeter = table.perimeter
        self.s_off = np.asarray(table.offsets[:-1])
        self.s_end = np.asarray(table.offsets[1:])
        self.length = self.s_end - self.s_off
        self.is_arc = np.array([c.kind == "arc" for c in comps])
        self.K = np.array([c.curvature for c in comps])
        self.p0 = np.zeros((n, 2))
        self.tang = np.zeros((n, 2))
        self.norm = np.zeros((n, 2))
        self.center = np.zeros((n, 2))
        self.rho = np.ones(n)
        self.theta_ref = np.zeros(n)
        self.tdir = np.zeros(n)
        self.span = np.zeros(n)
        self.sigma = np.zeros(n)
        self.loop = np.zeros(n, dtype=bool)
        for i, c in enumerate(comps):
            if c.kind == "flat":
                self.p0[i] = c.p0
                self.tang[i] = c.tangent
                self.norm[i] = c.normal
            else:
                self.center[i] = c.center
                self.rho[i] = c.radius
                self.theta_ref[i] = c._theta_ref
                self.tdir[i] = c._dir
                self.span[i] = c.span
                self.sigma[i] = 1.0 if c.dispersing else -1.0
                self.loop[i] = c.loop
        self.junction_s = table.junction_s
        self.corner_tol = table.corner_tol


def locate_batch(table, s):
    """Vectorized boundary lookup.

    Returns a dict with component index, within-component parameter u,
    position, inward normal, traversal tangent, curvature and corner flag.
    """
    bg = table._bg
    s = np.asarray(s, dtype=float) % bg.perimeter
    idx = np.searchsorted(bg.s_end, s, side="right")
    idx = np.clip(idx, 0, bg.n - 1)
    u = np.clip(s - bg.s_off[idx], 0.0, bg.length[idx])

    x = np.empty_like(s)
    y = np.empty_like(s)
    nx = np.empty_like(s)
    ny = np.empty_like(s)

    arc = bg.is_arc[idx]
    fl = ~arc
    if np.any(fl):
        i = idx[fl]
        x[fl] = bg.p0[i, 0] + u[fl] * bg.tang[i, 0]
        y[fl] = bg.p0[i, 1] + u[fl] * bg.tang[i, 1]
        nx[fl] = bg.norm[i, 0]
        ny[fl] = bg.norm[i, 1]
    if np.any(arc):
        i = idx[arc]
        th = bg.theta_ref[i] + bg.tdir[i] * u[arc] / bg.rho[i]
        ct, st = np.cos(th), np.sin(th)
        x[arc] = bg.center[i, 0] + bg.rho[i] * ct
        y[arc] = bg.center[i, 1] + bg.rho[i] * st
        nx[arc] = bg.sigma[i] * ct
        ny[arc] = bg.sigma[i] * st
    tx, ty = ny, -nx  # tangent = inward normal rotated -90 deg

    corner = np.zeros(s.shape, dtype=bool)
    js = bg.junction_s
    if js.size:
        j = np.searchsorted(js, s)
        d_lo = s - js[np.maximum(j - 1, 0)]
        d_hi = js[np.minimum(j, js.size - 1)] - s
        d = np.minimum(np.abs(d_lo), np.abs(d_hi))
        # wrap-around distance to the first/last junction
        d = np.minimum(d, np.abs(s - js[0] - bg.perimeter))
        d = np.minimum(d, np.abs(js[-1] + bg.perimeter - s))
        corner = d <= bg.corner_tol

    return {"component": idx, "u": u, "x": x, "y": y, "nx": nx, "ny": ny,
            "tx": tx, "ty": ty, "K": bg.K[idx], "corner": corner}


@dataclass(frozen=True)
class BoundaryPoint:
    """locate() result: boundary data at arclength s."""

    s: float
    position: tuple
    normal: tuple
    tangent: tuple
    curvature: float
    component: int
    corner: bool


def locate(table, s):
    """Boundary point at arclength s (s taken modulo the perimeter)."""
    out = locate_batch(table, np.asarray([s], dtype=float))
    return BoundaryPoint(
        s=float(np.asarray(s) % table.perimeter),
        position=(float(out["x"][0]), float(out["y"][0])),
        normal=(float(out["nx"][0]), float(out["ny"][0])),
        tangent=(float(out["tx"][0]), float(out["ty"][0])),
        curvature=float(out["K"][0]),
        component=int(out["component"][0]),
        corner=bool(out["corner"][0]),
    )


# ---------------------------------------------------------------------------
# constructors


def _sinai_like(centers, radii, bounds=None):
    if len(centers) != len(radii):
        raise GeometryError("centers and radii length mismatch")
    if not centers:
        raise GeometryError("need at least one scatterer")
    for k, ((cx, cy), r) in enumerate(zip(centers, radii)):
        if r <= 0:
            raise GeometryError(f"scatterer {k}: radius must be positive")
        if bounds is not None:
            w, h = bounds
            if not (0 < cx - r and cx + r < w and 0 < cy - r and cy + r < h):
                raise GeometryError(
                    f"scatterer {k} not strictly inside the domain")
    for a in range(len(centers)):
        for b in range(a + 1, len(centers)):
            d = math.hypot(centers[a][0] - centers[b][0],
                           centers[a][1] - centers[b][1])
            if d <= radii[a] + radii[b]:
                raise GeometryError(f"overlapping scatterers {a} and {b}")
    return [CircularArc(tuple(c), float(r), 0.0, TWO_PI, dispersing=True)
            for c, r in zip(centers, radii)]


def _build_sinai_torus(centers, radii):
    comps = _sinai_like([tuple(c) for c in centers], list(radii),
                        bounds=(1.0, 1.0))
    return Table(tuple(comps), "sinai_torus", lattice=True,
                 params={"centers": [list(c) for c in centers],
                         "radii": list(radii)})


def _build_stadium(flat_length):
    l = float(flat_length)
    if l <= 0:
        raise GeometryError("flat_length must be positive")
    h = l / 2.0
    comps = (
        FlatSegment((-h, -1.0), (h, -1.0)),
        CircularArc((h, 0.0), 1.0, -math.pi / 2, math.pi / 2, dispersing=False),
        FlatSegment((h, 1.0), (-h, 1.0)),
        CircularArc((-h, 0.0), 1.0, math.pi / 2, 3 * math.pi / 2, dispersing=False),
    )
    return Table(comps, "stadium", params={"flat_length": l})


def _build_squash(r1, r2, center_distance):
    r1, r2, d = float(r1), float(r2), float(center_distance)
    if not (0 < r1 <= r2):
        raise GeometryError("need 0 < r1 <= r2")
    if d <= r2 - r1:
        raise GeometryError(
            "tangent construction infeasible: center_distance must exceed r2 - r1")
    # common external tangents share the unit normal n with n_x = -(r2-r1)/d
    nx = -(r2 - r1) / d
    ny = math.sqrt(1.0 - nx * nx)
    th = math.atan2(ny, nx)  # tangent-point angle on either circle, in (pi/2, pi]
    c1, c2 = (0.0, 0.0), (d, 0.0)
    b1 = (c1[0] + r1 * nx, c1[1] - r1 * ny)   # small circle, bottom
    b2 = (c2[0] + r2 * nx, c2[1] - r2 * ny)   # big circle, bottom
    a2 = (c2[0] + r2 * nx, c2[1] + r2 * ny)   # big circle, top
    a1 = (c1[0] + r1 * nx, c1[1] + r1 * ny)   # small circle, top
    comps = (
        FlatSegment(b1, b2),
        CircularArc(c2, r2, -th, th, dispersing=False),       # > half circle
        FlatSegment(a2, a1),
        CircularArc(c1, r1, th, TWO_PI - th, dispersing=False),  # < half circle
    )
    return Table(comps, "squash",
                 params={"r1": r1, "r2": r2, "center_distance": d})


def _build_diamond(square_side, corner_radius):
    a, r = float(square_side), float(corner_radius)
    if a <= 0 or r <= 0:
        raise GeometryError("square_side and corner_radius must be positive")
    if r >= a:
        raise GeometryError("corner_radius must be smaller than the side")
    # four dispersing quarter arcs centered at the square corners joined by
    # flats along the edges; valid tables need r < side/2 (validate_table
    # reports the arc overlap otherwise)
    pi = math.pi
    comps = (
        FlatSegment((r, 0.0), (a - r, 0.0)),
        CircularArc((a, 0.0), r, pi / 2, pi, dispersing=True),
        FlatSegment((a, r), (a, a - r)),
        CircularArc((a, a), r, pi, 3 * pi / 2, dispersing=True),
        FlatSegment((a - r, a), (r, a)),
        CircularArc((0.0, a), r, 3 * pi / 2, TWO_PI, dispersing=True),
        FlatSegment((0.0, a - r), (0.0, r)),
        CircularArc((0.0, 0.0), r, 0.0, pi / 2, dispersing=True),
    )
    return Table(comps, "diamond",
                 params={"square_side": a, "corner_radius": r})


def _parse_component(spec):
    if isinstance(spec, (FlatSegment, CircularArc)):
        return spec
    kind = spec.get("kind")
    if kind == "flat":
        return FlatSegment(tuple(spec["p0"]), tuple(spec["p1"]))
    if kind == "arc":
        return CircularArc(tuple(spec["center"]), float(spec["radius"]),
                           float(spec["theta0"]), float(spec["theta1"]),
                           dispersing=bool(spec.get("dispersing", False)))
    raise GeometryError(f"unknown component kind {kind!r}")


def _build_flower(components):
    comps = tuple(_parse_component(c) for c in components)
    for i, c in enumerate(comps):
        if c.kind == "arc" and not c.dispersing and c.span > math.pi + 1e-9:
            raise GeometryError(
                f"component {i}: focusing arc longer than half its circle")
    return Table(comps, "flower", params={"n_components": len(comps)})


def _build_semi_dispersing(width, height, centers, radii):
    w, h = float(width), float(height)
    if w <= 0 or h <= 0:
        raise GeometryError("rectangle sides must be positive")
    walls = [
        FlatSegment((0.0, 0.0), (w, 0.0)),
        FlatSegment((w, 0.0), (w, h)),
        FlatSegment((w, h), (0.0, h)),
        FlatSegment((0.0, h), (0.0, 0.0)),
    ]
    # wall/scatterer conflicts are left for validate_table to report
    scat = _sinai_like([tuple(c) for c in centers], list(radii), bounds=None)
    return Table(tuple(walls + scat), "semi_dispersing",
                 params={"width": w, "height": h,
                         "centers": [list(c) for c in centers],
                         "radii": list(radii)})


_BUILDERS = {
    "sinai_torus": _build_sinai_torus,
    "stadium": _build_stadium,
    "squash": _build_squash,
    "diamond": _build_diamond,
    "flower": _build_flower,
    "semi_dispersing": _build_semi_dispersing,
}


def build_table(class_tag, **params):
    """Construct a table of the named class from its parameters."""
    try:
        builder = _BUILDERS[class_tag]
    except KeyError:
        raise GeometryError(f"unknown table class {class_tag!r}") from None
    return builder(**params)


def regular_flower_components(n_sides, side_length):
    """Half-circle petals on the sides of a regular polygon (a flower table).

    Each petal's circle passes through two polygon vertices and stays outside
    every other petal except for the shared-vertex tangency, so the separated
    focusing condition holds with equality exactly at the corners.
    """
    if n_sides < 3:
        raise GeometryError("need at least 3 sides")
    L = float(side_length)
    rad = L / (2.0 * math.sin(math.pi / n_sides))  # circumradius
    verts = [(rad * math.cos(TWO_PI * k / n_sides - math.pi / 2),
              rad * math.sin(TWO_PI * k / n_sides - math.pi / 2))
             for k in range(n_sides)]
    comps = []
    for k in range(n_sides):
        v0 = verts[k]
        v1 = verts[(k + 1) % n_sides]
        mx, my = (v0[0] + v1[0]) / 2.0, (v0[1] + v1[1]) / 2.0
        th0 = math.atan2(v0[1] - my, v0[0] - mx)
        comps.append(CircularArc((mx, my), L / 2.0, th0, th0 + math.pi,
                                 dispersing=False))
    return comps


def cut_stadium_components(flat_length, half_gap):
    """Stadium squeezed flat-to-flat: flats at y = +-half_gap, unit-radius caps.

    For half_gap < 1 the cap circles cross the flats, breaking the separated
    focusing condition; used as a negative control for the cone diagnostics.
    """
    l, g = float(flat_length), float(half_gap)
    if not (0 < g <= 1.0):
        raise GeometryError("half_gap must lie in (0, 1]")
    hx = l / 2.0
    alpha = math.asin(g)
    off = math.sqrt(1.0 - g * g)
    comps = [
        FlatSegment((-hx, -g), (hx, -g)),
        CircularArc((hx - off, 0.0), 1.0, -alpha, alpha, dispersing=False),
        FlatSegment((hx, g), (-hx, g)),
        CircularArc((-hx + off, 0.0), 1.0, math.pi - alpha, math.pi + alpha,
                    dispersing=False),
    ]
    return comps


# ---------------------------------------------------------------------------
# validation


def _seg_min_dist(p, seg):
    dx, dy = seg.p1[0] - seg.p0[0], seg.p1[1] - seg.p0[1]
    wx, wy = p[0] - seg.p0[0], p[1] - seg.p0[1]
    t = (wx * dx + wy * dy) / (dx * dx + dy * dy)
    t = min(max(t, 0.0), 1.0)
    return math.hypot(wx - t * dx, wy - t * dy)


def _in_span(arc, theta, margin=0.0):
    t0, t1 = arc.angles()
    a = (theta - t0) % TWO_PI
    return margin <= a <= (t1 - t0) - margin or arc.loop


def _arc_min_dist(p, arc):
    dx, dy = p[0] - arc.center[0], p[1] - arc.center[1]
    d = math.hypot(dx, dy)
    if d == 0.0:
        return arc.radius
    if _in_span(arc, math.atan2(dy, dx)):
        return abs(d - arc.radius)
    e0 = arc.start()
    e1 = arc.end()
    return min(math.hypot(p[0] - e0[0], p[1] - e0[1]),
               math.hypot(p[0] - e1[0], p[1] - e1[1]))


def _component_min_dist(p, comp):
    if comp.kind == "flat":
        return _seg_min_dist(p, comp)
    return _arc_min_dist(p, comp)


def _circle_circle_points(c0, r0, c1, r1):
    dx, dy = c1[0] - c0[0], c1[1] - c0[1]
    d = math.hypot(dx, dy)
    if d == 0.0 or d > r0 + r1 or d < abs(r0 - r1):
        return []
    a = (d * d + r0 * r0 - r1 * r1) / (2.0 * d)
    h2 = r0 * r0 - a * a
    h = math.sqrt(max(h2, 0.0))
    mx, my = c0[0] + a * dx / d, c0[1] + a * dy / d
    if h == 0.0:
        return [(mx, my)]
    ox, oy = -dy / d * h, dx / d * h
    return [(mx + ox, my + oy), (mx - ox, my - oy)]


def _line_circle_points(seg, center, radius):
    tx, ty = seg.tangent
    wx, wy = center[0] - seg.p0[0], center[1] - seg.p0[1]
    along = wx * tx + wy * ty
    perp2 = (wx - along * tx) ** 2 + (wy - along * ty) ** 2
    h2 = radius * radius - perp2
    if h2 < 0.0:
        return []
    h = math.sqrt(h2)
    out = []
    for t in (along - h, along + h):
        out.append((seg.p0[0] + t * tx, seg.p0[1] + t * ty, t))
    return out


def _near_any_endpoint(p, comps, tol):
    for c in comps:
        for e in (c.start(), c.end()):
            if math.hypot(p[0] - e[0], p[1] - e[1]) <= tol:
                return True
    return False


def _pair_crossings(ca, cb, tol):
    """Proper intersection points of two components, junction touches excluded."""
    pts = []
    if ca.kind == "flat" and cb.kind == "flat":
        ax, ay = ca.tangent
        bx, by = cb.tangent
        den = ax * by - ay * bx
        if abs(den) > 1e-14:
            wx, wy = cb.p0[0] - ca.p0[0], cb.p0[1] - ca.p0[1]
            t = (wx * by - wy * bx) / den
            u = (wx * ay - wy * ax) / den
            if -tol <= t <= ca.length + tol and -tol <= u <= cb.length + tol:
                pts.append((ca.p0[0] + t * ax, ca.p0[1] + t * ay))
    elif ca.kind == "arc" and cb.kind == "arc":
        for p in _circle_circle_points(ca.center, ca.radius, cb.center, cb.radius):
            tha = math.atan2(p[1] - ca.center[1], p[0] - ca.center[0])
            thb = math.atan2(p[1] - cb.center[1], p[0] - cb.center[0])
            if _in_span(ca, tha) and _in_span(cb, thb):
                pts.append(p)
    else:
        seg, arc = (ca, cb) if ca.kind == "flat" else (cb, ca)
        for x, y, t in _line_circle_points(seg, arc.center, arc.radius):
            if -tol <= t <= seg.length + tol:
                th = math.atan2(y - arc.center[1], x - arc.center[0])
                if _in_span(arc, th):
                    pts.append((x, y))
    return [p for p in pts if not _near_any_endpoint(p, (ca, cb), tol)]


def validate_table(table):
    """Geometric health report: list of Violations, empty when clean.

    Checks pairwise component crossings, cusps (tangential junctions),
    the separated focusing condition for every focusing arc (its full circle
    must not pass strictly through or contain any other component), and
    class-specific arc-span rules.
    """
    comps = table.components
    out = []
    tol = 1e-9 * table.diameter

    # pairwise proper intersections
    for i in range(len(comps)):
        for j in range(i + 1, len(comps)):
            pts = _pair_crossings(comps[i], comps[j], tol)
            if pts:
                px, py = pts[0]
                out.append(Violation("components_intersect", (i, j),
                                     f"cross near ({px:.6g}, {py:.6g})"))

    # cusps at junctions: traversal tangent reverses
    for a, b in table.chains:
        if a == b and getattr(comps[a], "loop", False):
            continue
        idxs = list(range(a, b + 1))
        for k, i in enumerate(idxs):
            jn = idxs[(k + 1) % len(idxs)]
            ci, cj = comps[i], comps[jn]
            e = ci.length
            ti = (ci.tangent if ci.kind == "flat"
                  else _arc_tangent(ci, e))
            tj = (cj.tangent if cj.kind == "flat"
                  else _arc_tangent(cj, 0.0))
            if ti[0] * tj[0] + ti[1] * tj[1] < -1.0 + 1e-9:
                out.append(Violation("cusp", (i, jn),
                                     "tangential junction (zero interior angle)"))

    # separated focusing condition
    for i, c in enumerate(comps):
        if c.kind != "arc" or c.dispersing:
            continue
        for j, other in enumerate(comps):
            if j == i:
                continue
            d = _component_min_dist(c.center, other)
            if d < c.radius - tol:
                out.append(Violation(
                    "sfc", (i, j),
                    f"full circle of focusing arc {i} reaches component {j} "
                    f"(min distance {d:.6g} < radius {c.radius:.6g})"))

    # class-specific span rules
    if table.class_tag == "flower":
        for i, c in enumerate(comps):
            if c.kind == "arc" and not c.dispersing and c.span > math.pi + 1e-9:
                out.append(Violation("arc_span", (i,),
                                     "focusing arc longer than half circle"))
    if table.class_tag == "squash":
        n_long = sum(1 for c in comps
                     if c.kind == "arc" and c.span > math.pi + 1e-9)
        if n_long != 1:
            out.append(Violation("arc_span", tuple(range(len(comps))),
                                 f"expected exactly one arc longer than a half "
                                 f"circle, found {n_long}"))
    return out


def _arc_tangent(arc, u):
    th = arc.theta_at(u)
    sg = 1.0 if arc.dispersing else -1.0
    # tangent = inward normal rotated -90 deg
    return (sg * math.sin(th), -sg * math.cos(th))


# ---------------------------------------------------------------------------
# holes


@dataclass(frozen=True)
class Hole:
    """Arclength interval [center_s - r, center_s + r] on one smooth component."""

    center_s: float
    radius: float
    component: int
    s_lo: float          # may be negative (wrap below 0)
    s_hi: float
    perimeter: float

    @property
    def measure(self):
        """Invariant measure of hole x all angles: 2r / perimeter."""
        return 2.0 * self.radius / self.perimeter

    def contains(self, s):
        s = np.asarray(s, dtype=float)
        d = (s - self.center_s) % self.perimeter
        d = np.minimum(d, self.perimeter - d)
        return d <= self.radius

    def interval(self):
        return (self.s_lo % self.perimeter, self.s_hi % self.perimeter)


def make_hole(table, center_s, r):
    """Open a hole of arclength half-width r centered at center_s.

    The interval must sit inside a single smooth component: crossing a
    junction is rejected with a relocation hint.  On a closed scatterer loop
    the interval may wrap the parametrization seam.
    """
    if r <= 0:
        raise GeometryError("hole radius must be positive")
    per = table.perimeter
    center_s = float(center_s) % per
    idx = table.component_of(center_s)
    comp = table.components[idx]
    lo = float(table.offsets[idx])
    hi = float(table.offsets[idx + 1])
    if getattr(comp, "loop", False):
        if 2.0 * r >= comp.length:
            raise GeometryError(
                f"hole diameter {2 * r:.6g} exceeds the loop length "
                f"{comp.length:.6g}")
    else:
        d_lo = center_s - lo
        d_hi = hi - center_s
        if d_lo < r or d_hi < r:
            max_r = max(min(d_lo, d_hi), 0.0)
            mid = 0.5 * (lo + hi)
            raise GeometryError(
                f"hole [{center_s - r:.6g}, {center_s + r:.6g}] crosses a "
                f"component junction; at this center the radius can be at "
                f"most {max_r:.6g}, or move the center toward s = {mid:.6g}")
    return Hole(center_s=center_s, radius=float(r), component=idx,
                s_lo=center_s - r, s_hi=center_s + r, perimeter=per)


def hole_measure(table, hole):
    """Invariant measure of the hole cylinder (all impact angles)."""
    return hole.measure
