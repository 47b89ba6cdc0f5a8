"""Shape geometry for validation: Wulff shapes, zero level sets and shape distances.

Points are (x, y) pairs in domain units.  Closed curves are traversed
counterclockwise so that the phase phi > 0 lies on the left.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from skimage import measure

from .anisotropy import AnisotropyModel
from .constraints import ConstraintSet
from .errors import ConfigurationError, EmptyContourError, StructuralError
from .grid import GridSpec, as_field

log = logging.getLogger(__name__)


def _shoelace(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _centroid(pts: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    return np.array([np.sum((x + xn) * cross), np.sum((y + yn) * cross)]) / (6.0 * a)


def _open_ring(pts: np.ndarray) -> np.ndarray:
    """Drop the repeated closing point, if present."""
    if len(pts) > 1 and np.array_equal(pts[0], pts[-1]):
        return pts[:-1]
    return pts


@dataclass(frozen=True)
class WulffShape:
    """Counterclockwise polygon without a repeated closing vertex."""

    vertices: np.ndarray
    area: float
    corner_flags: np.ndarray

    @property
    def n_corners(self) -> int:
        return int(np.count_nonzero(self.corner_flags))

    @property
    def corners(self) -> np.ndarray:
        return self.vertices[self.corner_flags]

    def ring(self) -> np.ndarray:
        return self.vertices


@dataclass(frozen=True)
class Contour:
    """Ordered polyline of a level set.

    ``points`` repeats its first point at the end when ``closed``.
    ``h`` is the mesh width of the source grid (NaN if unknown).
    """

    points: np.ndarray
    closed: bool = True
    h: float = float("nan")
    arclength: np.ndarray = field(init=False, repr=False)
    orientation: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise StructuralError(f"contour points must have shape (N>=2, 2), got {pts.shape}")
        seg = np.diff(pts, axis=0)
        lengths = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(lengths <= 0):
            raise StructuralError("contour has repeated consecutive points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "arclength", np.concatenate([[0.0], np.cumsum(lengths)]))
        # counterclockwise angle from the +y axis to the segment tangent
        object.__setattr__(self, "orientation", np.arctan2(-seg[:, 0], seg[:, 1]))

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    @property
    def segment_midpoints(self) -> np.ndarray:
        """Arclength at the middle of each segment."""
        return 0.5 * (self.arclength[1:] + self.arclength[:-1])

    def unwrapped_orientation(self) -> np.ndarray:
        return np.unwrap(self.orientation)

    def ring(self) -> np.ndarray:
        if not self.closed:
            raise StructuralError("operation needs a closed curve")
        return self.points[:-1]

    @property
    def area(self) -> float:
        return abs(_shoelace(self.ring()))

    @property
    def centroid(self) -> np.ndarray:
        return _centroid(self.ring())


# ---------------------------------------------------------------- Wulff shape

def _segment_hits(a0, a1, b0, b1):
    """All crossings between segment sets A and B; returns (ia, ib, point)."""
    da = (a1 - a0)[:, None, :]
    db = (b1 - b0)[None, :, :]
    diff = b0[None, :, :] - a0[:, None, :]
    den = da[..., 0] * db[..., 1] - da[..., 1] * db[..., 0]
    ok = np.abs(den) > 1e-300
    den = np.where(ok, den, 1.0)
    t = (diff[..., 0] * db[..., 1] - diff[..., 1] * db[..., 0]) / den
    u = (diff[..., 0] * da[..., 1] - diff[..., 1] * da[..., 0]) / den
    hit = ok & (t >= 0) & (t < 1) & (u >= 0) & (u < 1)
    ia, ib = np.nonzero(hit)
    pts = a0[ia] + t[ia, ib][:, None] * (a1[ia] - a0[ia])
    return ia, ib, pts


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Inclusive (start, end) index pairs of True runs in a non-circular mask."""
    edges = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    starts = np.nonzero(edges == 1)[0]
    ends = np.nonzero(edges == -1)[0] - 1
    return list(zip(starts.tolist(), ends.tolist()))


def _trim_ear(P: np.ndarray, s: int, e: int, lo: int) -> tuple[int, int, np.ndarray]:
    """Crossing of the arm entering nonconvex window [s, e] with the arm leaving it.

    Returns (i, j, X): segment i = (P[i], P[i+1]), lo <= i < s, crosses
    segment j >= e at X.  The search window widens until a crossing is found.
    """
    n = len(P)
    reach = 2 * (e - s + 1) + 8
    while True:
        i_idx = np.arange(max(s - reach, lo), s)
        j_idx = np.arange(e, min(e + reach, n - 1))
        if len(i_idx) and len(j_idx):
            ia, ib, X = _segment_hits(P[i_idx], P[i_idx + 1], P[j_idx], P[j_idx + 1])
            if len(ia):
                # earliest crossing along the arm: removes the whole loop
                k = np.lexsort((-j_idx[ib], i_idx[ia]))[0]
                return int(i_idx[ia[k]]), int(j_idx[ib[k]]), X[k]
        if s - reach <= lo and e + reach >= n - 1:
            raise ConfigurationError("could not locate the self-intersection of a Wulff ear")
        reach *= 2


def wulff_2d(model: AnisotropyModel, area: float, samples: int = 8192) -> WulffShape:
    """Equilibrium polygon of ``model`` enclosing ``area``.

    The parametric boundary x = gamma n + gamma' t is sampled densely.  Where
    gamma + gamma'' < 0 it folds into self-intersecting loops; each loop is cut
    at the crossing of its two arms, and that crossing becomes a corner.
    """
    if area <= 0:
        raise ConfigurationError("target area must be positive")
    if samples < 64:
        raise ConfigurationError("need at least 64 samples")
    tf = model.theta_form()
    theta = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    g, g1, g2 = tf.gamma(theta), tf.dgamma(theta), tf.d2gamma(theta)
    if np.any(g <= 0):
        raise ConfigurationError("surface energy must be positive in every direction")
    c, s = np.cos(theta), np.sin(theta)
    P = np.stack([g * c - g1 * s, g * s + g1 * c], axis=1)
    stiff = g + g2

    flags = np.zeros(samples, dtype=bool)
    if np.any(stiff < 0):
        # start the walk in the most convex direction so no window wraps around
        shift = int(np.argmax(stiff))
        P = np.roll(P, -shift, axis=0)
        stiff = np.roll(stiff, -shift)
        # two laps, so the arms of the last loop can run past the starting direction
        P2 = np.vstack([P, P, P[:1]])
        cuts = []
        cursor = 0
        for s_, e_ in _runs(stiff < 0):
            i, j, X = _trim_ear(P2, s_, e_, cursor)
            cuts.append((i, j, X))
            cursor = j + 1
        start = max(cursor - samples, 0)
        if cuts[0][0] < start:
            raise ConfigurationError("overlapping Wulff loops; increase the sample count")
        pieces, corner_list = [], []
        prev = start
        for i, j, X in cuts:
            pieces += [P2[prev:i + 1], X[None, :]]
            corner_list += [np.zeros(i + 1 - prev, dtype=bool), np.ones(1, dtype=bool)]
            prev = j + 1
        if prev < samples:
            pieces.append(P2[prev:samples])
            corner_list.append(np.zeros(samples - prev, dtype=bool))
        P = np.vstack(pieces)
        flags = np.concatenate(corner_list)

    a0 = _shoelace(P)
    if a0 <= 0:
        raise ConfigurationError("Wulff polygon is not counterclockwise")
    P = P * np.sqrt(area / a0)
    return WulffShape(P, float(_shoelace(P)), flags)


# ---------------------------------------------------------------- contours

def _seam(line_has_crossing: np.ndarray) -> int:
    """First r whose cut between lines r-1 and r misses the level set (0 if none does)."""
    free = np.nonzero(~line_has_crossing)[0]
    return int(free[0]) if len(free) else 0


def extract_contour(phi, spec: GridSpec, level: float = 0.0) -> Contour:
    """Largest closed component of {phi = level} by marching squares.

    The periodic field is first rolled so that the array border runs along
    grid lines the level set does not touch; a shape straddling the domain
    boundary therefore comes out closed, with coordinates that may leave
    [0, 1].  If no component closes (a level set wrapping around the torus)
    the longest open one is returned with ``closed=False``.
    """
    if spec.dim != 2:
        raise ConfigurationError("contours are extracted from 2D fields only")
    arr = as_field(phi, spec) - level
    if not (arr.min() < 0 < arr.max()):
        raise EmptyContourError("field does not change sign; no level set to extract")
    pos = arr > 0
    # the cut between lines r-1 and r is free when both lines are single-signed with the same sign
    row_mixed = pos.any(axis=1) & ~pos.all(axis=1)
    col_mixed = pos.any(axis=0) & ~pos.all(axis=0)
    r0 = _seam(row_mixed | np.roll(row_mixed, 1) | (pos[:, 0] != np.roll(pos[:, 0], 1)))
    c0 = _seam(col_mixed | np.roll(col_mixed, 1) | (pos[0] != np.roll(pos[0], 1)))
    rolled = np.roll(arr, (-r0, -c0), axis=(0, 1))

    comps = measure.find_contours(rolled, 0.0)
    if not comps:
        raise EmptyContourError("marching squares found no level-set component")
    h = spec.h
    best, best_key = None, None
    for rc in comps:
        pts = np.column_stack([(rc[:, 1] + c0 + 0.5) * h, (rc[:, 0] + r0 + 0.5) * h])
        keep = np.concatenate([[True], np.any(np.diff(pts, axis=0) != 0, axis=1)])
        pts = pts[keep]
        if len(pts) < 2:
            continue
        closed = len(pts) > 3 and np.array_equal(pts[0], pts[-1])
        key = (closed, abs(_shoelace(pts[:-1])) if closed else len(pts))
        if best_key is None or key > best_key:
            best, best_key = (pts, closed), key
    if best is None:
        raise EmptyContourError("only degenerate level-set components found")
    pts, closed = best
    if closed:
        if _shoelace(pts[:-1]) < 0:
            pts = pts[::-1]
    else:
        log.warning("level set does not close inside the periodic cell; returning an open curve")
        if (pts[-1, 1], pts[-1, 0]) < (pts[0, 1], pts[0, 0]):
            pts = pts[::-1]
    return Contour(np.ascontiguousarray(pts), closed=closed, h=h)


# ---------------------------------------------------------------- orientation

@dataclass(frozen=True)
class OrientationJump:
    arclength: float
    vertex: int
    turn: float


def _turning(contour: Contour):
    """Signed turning angle at each interior vertex and its arclength position."""
    psi = contour.orientation
    if contour.closed:
        d = np.angle(np.exp(1j * (np.roll(psi, -1) - psi)))
        s = contour.arclength[1:]
        s = np.where(np.arange(len(s)) == len(s) - 1, 0.0, s)
        return d, s
    d = np.angle(np.exp(1j * np.diff(psi)))
    return d, contour.arclength[1:-1]


def _window_sum(values, pos, length, half, closed):
    order = np.argsort(pos)
    v, p = values[order], pos[order]
    if closed:
        p = np.concatenate([p - length, p, p + length])
        v = np.concatenate([v, v, v])
    c = np.concatenate([[0.0], np.cumsum(v)])
    lo = np.searchsorted(p, pos - half, side="left")
    hi = np.searchsorted(p, pos + half, side="right")
    return c[hi] - c[lo]


def orientation_jumps(contour: Contour, window: float | None = None,
                      factor: float = 3.0) -> list[OrientationJump]:
    """Concentrated orientation changes (corners) along a contour.

    The absolute turning is summed over a sliding arclength window (default
    4h); its median over the contour is the facet-interior variation.  Each
    connected stretch where the windowed turning exceeds ``factor`` times
    that median is a candidate; it counts as a jump when the net orientation
    change across it also exceeds that level, so a wiggle whose turning
    cancels is not a jump.
    """
    if window is None:
        if not np.isfinite(contour.h):
            raise ConfigurationError("window must be given for contours without a mesh width")
        window = 4.0 * contour.h
    d, s = _turning(contour)
    T = _window_sum(np.abs(d), s, contour.length, window / 2, contour.closed)
    base = float(np.median(T))
    over = T > factor * base
    order = np.argsort(s)
    over_sorted = over[order]
    if over_sorted.all() or not over_sorted.any():
        return []
    runs = _runs(over_sorted)
    if contour.closed and over_sorted[0] and over_sorted[-1] and len(runs) > 1:
        first = runs.pop(0)
        last = runs.pop()
        runs.append((last[0], first[1] + len(s)))
    net_turn = _window_sum(d, s, contour.length, window / 2, contour.closed)
    jumps = []
    for a, b in runs:
        idx = order[np.arange(a, b + 1) % len(s)]
        pos = s[idx]
        if contour.closed:
            pos = np.where(pos < pos[0], pos + contour.length, pos)
        # turning-weighted centre of the stretch; a plateau of T has no unique maximum
        w = np.abs(d[idx])
        centre = float(np.dot(w, pos) / w.sum()) if w.sum() > 0 else float(pos.mean())
        k = idx[int(np.argmin(np.abs(pos - centre)))]
        net = net_turn[k]
        if abs(net) <= factor * base:
            continue
        if contour.closed:
            centre %= contour.length
        jumps.append(OrientationJump(centre, int(k), float(net)))
    return jumps


def corner_transition_width(contour: Contour, at: float, radius: float | None = None,
                            share: float = 0.8) -> float:
    """Length of the shortest arc near ``at`` that carries ``share`` of the corner's turning.

    Within +-radius of the arclength position ``at`` the cumulative turning
    minus its background trend is the corner's excess orientation change;
    the trend shares one slope on both outer quarters and steps by the
    corner's turning in between.  A corner concentrated at a single
    vertex has width 0; a rounded corner spreads the change over its arc.
    """
    if not 0 < share <= 1:
        raise ConfigurationError("share must lie in (0, 1]")
    if radius is None:
        radius = 20.0 * contour.h if np.isfinite(contour.h) else 0.05
    d, s = _turning(contour)
    rel = s - at
    if contour.closed:
        L = contour.length
        rel = (rel + L / 2) % L - L / 2
    sel = np.abs(rel) <= radius
    if np.count_nonzero(sel) < 8:
        raise ConfigurationError("radius too small for the contour resolution")
    order = np.argsort(rel[sel])
    r = rel[sel][order]
    cum = np.concatenate([[0.0], np.cumsum(d[sel][order])])
    mid = np.concatenate([[r[0]], r])
    left, right = mid < -radius / 2, mid > radius / 2
    if np.count_nonzero(left) >= 2 and np.count_nonzero(right) >= 2:
        # common background slope, separate levels before and after the corner
        outer = left | right
        A = np.column_stack([mid[outer], left[outer], right[outer]]).astype(float)
        slope, lvl_left, lvl_right = np.linalg.lstsq(A, cum[outer], rcond=None)[0]
        cum = cum - slope * mid - lvl_left
        total = lvl_right - lvl_left
    else:
        total = cum[-1] - cum[0]
    if total == 0:
        return 0.0
    # cum[b] - cum[a] is the turning at vertices a .. b-1 (0-based in r)
    gain = (cum[None, :] - cum[:, None]) * np.sign(total)
    a_idx, b_idx = np.nonzero(np.triu(gain >= share * abs(total), k=1))
    return float(np.min(r[b_idx - 1] - r[a_idx]))


def leftmost_arclength(contour: Contour) -> float:
    """Arclength position of the point with the smallest x."""
    return float(contour.arclength[int(np.argmin(contour.points[:, 0]))])


# ---------------------------------------------------------------- distances

def _ring_of(shape) -> np.ndarray:
    if isinstance(shape, (Contour, WulffShape)):
        return np.asarray(shape.ring(), dtype=float)
    pts = np.asarray(shape, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise StructuralError("expected a closed curve as an (N, 2) vertex array")
    return _open_ring(pts)


def _row_crossings(ring: np.ndarray, ys: np.ndarray):
    """(row index, x) of every edge crossing of the horizontal lines y = ys."""
    p0 = ring
    p1 = np.roll(ring, -1, axis=0)
    ylo = np.minimum(p0[:, 1], p1[:, 1])
    yhi = np.maximum(p0[:, 1], p1[:, 1])
    # half-open [ylo, yhi) so shared vertices are counted once
    first = np.searchsorted(ys, ylo, side="left")
    last = np.searchsorted(ys, yhi, side="left")
    counts = last - first
    edge = np.repeat(np.arange(len(ring)), counts)
    rows = np.concatenate([np.arange(a, b) for a, b in zip(first, last)]) if len(edge) else \
        np.zeros(0, dtype=int)
    y = ys[rows]
    a, b = p0[edge], p1[edge]
    t = (y - a[:, 1]) / (b[:, 1] - a[:, 1])
    return rows, a[:, 0] + t * (b[:, 0] - a[:, 0])


def manifold_distance(shape_a, shape_b, rows: int = 2048, align: bool = True) -> float:
    """Area of the symmetric difference of the regions enclosed by two closed curves.

    Both curves are translated to a common centroid (``align``), then scanned
    along ``rows`` evenly spaced horizontal lines; on each line the symmetric
    difference is the union of intervals where exactly one curve is inside,
    computed exactly from the edge crossings.
    """
    A, B = _ring_of(shape_a), _ring_of(shape_b)
    if align:
        A = A - _centroid(A)
        B = B - _centroid(B)
    y0 = min(A[:, 1].min(), B[:, 1].min())
    y1 = max(A[:, 1].max(), B[:, 1].max())
    dy = (y1 - y0) / rows
    ys = y0 + (np.arange(rows) + 0.5) * dy
    ra, xa = _row_crossings(A, ys)
    rb, xb = _row_crossings(B, ys)
    r = np.concatenate([ra, rb])
    x = np.concatenate([xa, xb])
    order = np.lexsort((x, r))
    r, x = r[order], x[order]
    if len(x) % 2 or np.any(r[0::2] != r[1::2]):
        raise StructuralError("curve is not closed or crosses a scan line an odd number of times")
    # each crossing toggles exactly one indicator, hence the XOR indicator
    return float(np.sum(x[1::2] - x[0::2]) * dy)


def enclosed_area_from_mass(cset: ConstraintSet, spec: GridSpec) -> float:
    """Area of {phi = +1} implied by the mass when phi is +-1 valued: (V0 h^d + 1) / 2."""
    return 0.5 * (cset.V0 * spec.cell_volume + 1.0)


def axis_lengths(phi, spec: GridSpec, level: float = 0.0) -> np.ndarray:
    """Extent of {phi > level} along the grid lines through its centroid, per direction x, y[, z].

    End points are located by linear interpolation between nodes; the phase
    is assumed not to touch the domain boundary.
    """
    arr = as_field(phi, spec) - level
    inside = arr > 0
    if not inside.any() or inside.all():
        raise EmptyContourError("field does not change sign")
    idx = np.argwhere(inside)
    center = np.rint(idx.mean(axis=0)).astype(int)
    out = np.empty(spec.dim)
    for comp in range(spec.dim):
        ax = spec.axis_of(comp)
        sl = list(center)
        sl[ax] = slice(None)
        line = arr[tuple(sl)]
        c = center[ax]
        if line[c] <= 0:
            raise EmptyContourError("centroid node lies outside the phase")
        right = c
        while right + 1 < spec.m and line[right + 1] > 0:
            right += 1
        left = c
        while left - 1 >= 0 and line[left - 1] > 0:
            left -= 1
        if right + 1 >= spec.m or left - 1 < 0:
            raise EmptyContourError("phase touches the domain boundary")
        xr = right + line[right] / (line[right] - line[right + 1])
        xl = left - line[left] / (line[left] - line[left - 1])
        out[comp] = (xr - xl) * spec.h
    return out
