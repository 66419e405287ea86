"""Low-dimensional polytope computations (ambient dimension <= 4).

Vertex/halfspace conversions are done by brute-force enumeration over
n-subsets with LP-based redundancy and membership filters.  At this scale
(a handful of vertices, n <= 4) the combinatorial cost is negligible and
the code stays auditable.  All predicates use a single absolute tolerance
``TOL_GEOM`` and assume inputs scaled so the polytope diameter is O(1).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import Degenerate, DimensionDeficient, GeometryError, Unbounded
from . import lp

TOL_GEOM = 1e-9

# vertices closer than this collapse to one point during deduplication
_DEDUPE_TOL = 1e-7


def _as_points(points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.ndim != 2:
        raise GeometryError("points must form a 2-D array")
    return pts


def _lex_order(points: np.ndarray) -> np.ndarray:
    """Indices sorting rows lexicographically (rounded to kill float noise)."""
    if len(points) == 0:
        return np.arange(0)
    keys = np.round(points, 9)
    return np.lexsort(keys.T[::-1])


def lex_sorted(points: np.ndarray) -> np.ndarray:
    return points[_lex_order(points)]


def dedupe_points(points: np.ndarray, tol: float = _DEDUPE_TOL) -> np.ndarray:
    pts = _as_points(points)
    keep: list[np.ndarray] = []
    for p in pts:
        if not any(np.linalg.norm(p - q, ord=np.inf) <= tol for q in keep):
            keep.append(p)
    return np.array(keep) if keep else pts[:0]


def affine_dimension(points, tol: float = TOL_GEOM) -> int:
    pts = dedupe_points(_as_points(points))
    if len(pts) == 0:
        return -1
    if len(pts) == 1:
        return 0
    diffs = pts[1:] - pts[0]
    s = np.linalg.svd(diffs, compute_uv=False)
    scale = max(s[0], 1.0)
    return int(np.sum(s > 1e-9 * scale))


def affine_basis(points, tol: float = TOL_GEOM) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis (columns) of the affine hull, plus its origin."""
    pts = dedupe_points(_as_points(points))
    origin = pts[0]
    diffs = pts[1:] - origin
    if len(diffs) == 0:
        return origin, np.zeros((pts.shape[1], 0))
    u, s, vt = np.linalg.svd(diffs, full_matrices=False)
    scale = max(s[0], 1.0) if len(s) else 1.0
    rank = int(np.sum(s > 1e-9 * scale))
    return origin, vt[:rank].T


@dataclass(frozen=True)
class HalfSpace:
    """Closed halfspace {x : normal.x <= offset} with unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        nrm = np.linalg.norm(n)
        if nrm <= TOL_GEOM:
            raise GeometryError("halfspace normal is numerically zero")
        object.__setattr__(self, "normal", n / nrm)
        object.__setattr__(self, "offset", float(self.offset) / nrm)

    def value(self, x) -> float:
        """Signed violation normal.x - offset (<= 0 inside)."""
        return float(np.dot(self.normal, x) - self.offset)

    def contains(self, x, tol: float = TOL_GEOM) -> bool:
        return self.value(x) <= tol

    def flipped(self) -> "HalfSpace":
        return HalfSpace(-self.normal, -self.offset)


@dataclass(frozen=True)
class Hyperplane:
    """{x : normal.x == offset} with unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        nrm = np.linalg.norm(n)
        if nrm <= TOL_GEOM:
            raise GeometryError("hyperplane normal is numerically zero")
        object.__setattr__(self, "normal", n / nrm)
        object.__setattr__(self, "offset", float(self.offset) / nrm)

    def value(self, x) -> float:
        return float(np.dot(self.normal, x) - self.offset)

    def side(self, x, tol: float = TOL_GEOM) -> int:
        v = self.value(x)
        if v > tol:
            return 1
        if v < -tol:
            return -1
        return 0

    def lower(self) -> HalfSpace:
        return HalfSpace(self.normal, self.offset)

    def upper(self) -> HalfSpace:
        return HalfSpace(-self.normal, -self.offset)


@dataclass(frozen=True)
class Face:
    """Face of a polytope: vertex set, optional supporting halfspace, dim."""

    vertices: np.ndarray
    supporting: Optional[HalfSpace]
    dim: int

    @property
    def is_empty(self) -> bool:
        return len(self.vertices) == 0

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def contains(self, x, tol: float = TOL_GEOM) -> bool:
        return point_in_hull(x, self.vertices, tol)

    @staticmethod
    def empty(n: int) -> "Face":
        return Face(np.zeros((0, n)), None, -1)

    @staticmethod
    def from_vertices(points, supporting: Optional[HalfSpace] = None) -> "Face":
        pts = extreme_points(dedupe_points(_as_points(points)))
        pts = lex_sorted(pts)
        return Face(pts, supporting, affine_dimension(pts))


class Polytope:
    """Bounded convex polytope carrying both representations.

    Full-dimensional polytopes have a consistent (minimal) halfspace list.
    Lower-dimensional ones carry vertices only; ``dim`` is the affine-hull
    dimension, -1 for the empty polytope.
    """

    def __init__(self, vertices: np.ndarray, halfspaces: list[HalfSpace], dim: int):
        self.vertices = vertices
        self.halfspaces = halfspaces
        self.dim = dim

    # -- constructors -------------------------------------------------------

    @staticmethod
    def empty(n: int) -> "Polytope":
        return Polytope(np.zeros((0, n)), [], -1)

    @staticmethod
    def from_vertices(points, tol: float = TOL_GEOM, allow_lower: bool = True) -> "Polytope":
        return convex_hull(points, tol=tol, allow_lower=allow_lower)

    @staticmethod
    def from_halfspaces(halfspaces: Iterable[HalfSpace], tol: float = TOL_GEOM) -> "Polytope":
        hs = list(halfspaces)
        verts = hrep_to_vrep(hs, tol=tol)
        return convex_hull(verts, tol=tol, allow_lower=True)

    @staticmethod
    def box(lower, upper) -> "Polytope":
        lo = np.asarray(lower, dtype=float)
        hi = np.asarray(upper, dtype=float)
        corners = np.array(list(itertools.product(*zip(lo, hi))))
        return Polytope.from_vertices(corners)

    # -- basic queries -------------------------------------------------------

    @property
    def n(self) -> int:
        return self.vertices.shape[1]

    @property
    def is_empty(self) -> bool:
        return len(self.vertices) == 0

    @property
    def is_full_dim(self) -> bool:
        return self.dim == self.n

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def contains(self, x, tol: float = TOL_GEOM) -> bool:
        if self.is_empty:
            return False
        x = np.asarray(x, dtype=float)
        if self.is_full_dim and self.halfspaces:
            return all(h.contains(x, tol) for h in self.halfspaces)
        return point_in_hull(x, self.vertices, tol)

    def volume(self) -> float:
        return volume(self)

    def facets(self, tol: float = TOL_GEOM) -> list[Face]:
        """Facets as faces, ordered like ``halfspaces``."""
        out = []
        for h in self.halfspaces:
            tight = self.vertices[np.abs(self.vertices @ h.normal - h.offset) <= max(tol, 1e-8)]
            out.append(Face(lex_sorted(tight), h, affine_dimension(tight)))
        return out

    def interior_point(self) -> np.ndarray:
        return self.centroid()

    def split(self, plane: Hyperplane, tol: float = TOL_GEOM) -> tuple["Polytope", "Polytope"]:
        return split_by_hyperplane(self, plane, tol=tol)

    def __repr__(self) -> str:
        return f"Polytope(n={self.n}, dim={self.dim}, nv={len(self.vertices)}, nh={len(self.halfspaces)})"


# ---------------------------------------------------------------------------
# membership / extremality via LP
# ---------------------------------------------------------------------------

def point_in_hull(point, vertices, tol: float = TOL_GEOM) -> bool:
    """Is ``point`` within ``tol`` (inf-norm) of conv(vertices)?

    Solved as min s  s.t.  |V^T lam - point| <= s, sum lam = 1, lam >= 0.
    """
    V = _as_points(vertices)
    if len(V) == 0:
        return False
    x = np.asarray(point, dtype=float)
    k, n = V.shape
    if np.min(np.max(np.abs(V - x), axis=1)) <= tol:
        return True
    # variables: lam (k), s (1)
    c = np.zeros(k + 1)
    c[-1] = 1.0
    rows = []
    rhs = []
    for i in range(n):
        r = np.zeros(k + 1)
        r[:k] = V[:, i]
        r[-1] = -1.0
        rows.append(r)
        rhs.append(x[i])
        rows.append(-r + np.concatenate([np.zeros(k), [-2.0]]))  # -V lam - s <= -x
        rhs.append(-x[i])
    for j in range(k):
        r = np.zeros(k + 1)
        r[j] = -1.0
        rows.append(r)
        rhs.append(0.0)
    eq = np.zeros((1, k + 1))
    eq[0, :k] = 1.0
    out = lp.solve_lp(c, np.array(rows), np.array(rhs), eq, np.array([1.0]))
    if out.status != lp.OPTIMAL:
        return False
    return out.value <= tol


def extreme_points(points, tol: float = TOL_GEOM) -> np.ndarray:
    """Minimal subset with the same convex hull (LP membership test per point)."""
    pts = dedupe_points(_as_points(points))
    if len(pts) <= 1:
        return pts
    keep = []
    for i in range(len(pts)):
        others = np.delete(pts, i, axis=0)
        if not point_in_hull(pts[i], others, tol=max(tol, 1e-9)):
            keep.append(i)
    return pts[keep] if keep else pts[:1]


# ---------------------------------------------------------------------------
# representation conversion
# ---------------------------------------------------------------------------

def hrep_to_vrep(halfspaces: list[HalfSpace], tol: float = TOL_GEOM) -> np.ndarray:
    """Vertices of the (bounded) intersection of halfspaces.

    Enumerates all n-subsets of constraints; a candidate is kept when it
    satisfies every constraint.  Boundedness is certified by coordinate LPs.
    """
    hs = list(halfspaces)
    if not hs:
        raise GeometryError("no halfspaces given")
    n = len(hs[0].normal)
    A = np.array([h.normal for h in hs])
    b = np.array([h.offset for h in hs])
    m = len(hs)
    if m < n:
        raise Unbounded("fewer constraints than dimensions")

    for i in range(n):
        c = np.zeros(n)
        for sgn in (1.0, -1.0):
            c[i] = sgn
            out = lp.solve_lp(c, A, b)
            if out.status == lp.UNBOUNDED:
                raise Unbounded(f"direction {i} unbounded")
            if out.status == lp.INFEASIBLE:
                return np.zeros((0, n))
        c[i] = 0.0

    cands = []
    feas_tol = max(tol, 1e-8)
    for idx in itertools.combinations(range(m), n):
        M = A[list(idx)]
        if abs(np.linalg.det(M)) <= 1e-12:
            continue
        x = np.linalg.solve(M, b[list(idx)])
        if np.all(A @ x - b <= feas_tol):
            cands.append(x)
    if not cands:
        return np.zeros((0, n))
    return lex_sorted(dedupe_points(np.array(cands)))


def vrep_to_hrep(vertices, tol: float = TOL_GEOM) -> list[HalfSpace]:
    """Minimal halfspace representation of a full-dimensional hull.

    Enumerates n-subsets of vertices; a subset spanning a hyperplane with
    all vertices on one side contributes a facet when the tight vertex set
    is (n-1)-dimensional.
    """
    V = dedupe_points(_as_points(vertices))
    k, n = V.shape
    d = affine_dimension(V, tol)
    if d < n:
        raise Degenerate(f"vertex set spans only dimension {d}")
    if n == 1:
        lo, hi = float(V.min()), float(V.max())
        return [HalfSpace(np.array([-1.0]), -lo), HalfSpace(np.array([1.0]), hi)]
    side_tol = max(tol, 1e-9)
    found: dict[tuple, HalfSpace] = {}
    for idx in itertools.combinations(range(k), n):
        pts = V[list(idx)]
        diffs = pts[1:] - pts[0]
        u, s, vt = np.linalg.svd(diffs)
        if s.min() <= 1e-9 * max(s.max(), 1.0):
            continue  # subset does not span a hyperplane
        normal = vt[-1]
        offset = float(normal @ pts[0])
        vals = V @ normal - offset
        if np.all(vals <= side_tol):
            pass
        elif np.all(vals >= -side_tol):
            normal, offset, vals = -normal, -offset, -vals
        else:
            continue
        tight = V[np.abs(vals) <= side_tol]
        if affine_dimension(tight, tol) != n - 1:
            continue
        h = HalfSpace(normal, offset)
        key = tuple(np.round(np.concatenate([h.normal, [h.offset]]), 8))
        found.setdefault(key, h)
    if not found:
        raise Degenerate("no facets found")
    return [found[k] for k in sorted(found)]


def convex_hull(points, tol: float = TOL_GEOM, allow_lower: bool = True) -> "Polytope":
    """Convex hull with minimal V-rep (and H-rep when full-dimensional).

    Raises DimensionDeficient for degenerate input unless ``allow_lower``,
    in which case a lower-dimensional polytope (vertices only) is returned.
    """
    pts = dedupe_points(_as_points(points))
    if len(pts) == 0:
        return Polytope.empty(_as_points(points).shape[1])
    n = pts.shape[1]
    d = affine_dimension(pts, tol)
    if d < n:
        if not allow_lower:
            raise DimensionDeficient(d)
        if d <= 0:
            return Polytope(lex_sorted(pts[:1]), [], d)
        origin, basis = affine_basis(pts, tol)
        proj = (pts - origin) @ basis
        ext_idx = _extreme_indices_full(proj, tol)
        verts = lex_sorted(pts[ext_idx])
        return Polytope(verts, [], d)
    ext_idx = _extreme_indices_full(pts, tol)
    verts = lex_sorted(pts[ext_idx])
    hs = vrep_to_hrep(verts, tol)
    return Polytope(verts, hs, n)


def _extreme_indices_full(pts: np.ndarray, tol: float) -> list[int]:
    keep = []
    for i in range(len(pts)):
        others = np.delete(pts, i, axis=0)
        if len(others) == 0 or not point_in_hull(pts[i], others, tol=max(tol, 1e-9)):
            keep.append(i)
    return keep or [0]


# ---------------------------------------------------------------------------
# splitting, clipping
# ---------------------------------------------------------------------------

def split_by_hyperplane(p: Polytope, plane: Hyperplane,
                        tol: float = TOL_GEOM) -> tuple[Polytope, Polytope]:
    """Split into (lower, upper) pieces: {normal.x <= offset} and >=.

    When the plane misses the interior, the polytope comes back whole on
    its own side together with an empty polytope.
    """
    if p.is_empty:
        return p, p
    vals = p.vertices @ plane.normal - plane.offset
    if np.all(vals <= tol):
        return p, Polytope.empty(p.n)
    if np.all(vals >= -tol):
        return Polytope.empty(p.n), p
    if p.is_full_dim:
        lower = Polytope.from_halfspaces(p.halfspaces + [plane.lower()], tol)
        upper = Polytope.from_halfspaces(p.halfspaces + [plane.upper()], tol)
        return lower, upper
    return (clip_to_halfspace(p, plane.lower(), tol),
            clip_to_halfspace(p, plane.upper(), tol))


def clip_to_halfspace(p: Polytope, half: HalfSpace, tol: float = TOL_GEOM) -> Polytope:
    """Intersection with a halfspace; works for lower-dimensional polytopes
    by clipping inside the affine hull."""
    if p.is_empty:
        return p
    vals = np.array([half.value(v) for v in p.vertices])
    if np.all(vals <= tol):
        return p
    if np.all(vals >= -tol):
        kept = p.vertices[vals <= tol]
        return convex_hull(kept, tol) if len(kept) else Polytope.empty(p.n)
    if p.is_full_dim:
        return Polytope.from_halfspaces(p.halfspaces + [half], tol)
    origin, basis = affine_basis(p.vertices, tol)
    proj = (p.vertices - origin) @ basis
    nproj = basis.T @ half.normal
    if np.linalg.norm(nproj) <= tol:
        return p  # halfspace parallel to the hull and mixed signs: numeric noise
    o = half.offset - half.normal @ origin
    sub = convex_hull(proj, tol, allow_lower=True)
    if sub.dim == sub.n:
        clipped = Polytope.from_halfspaces(sub.halfspaces + [HalfSpace(nproj, o)], tol)
    else:
        clipped = _clip_lower(sub, HalfSpace(nproj, o), tol)
    verts = clipped.vertices @ basis.T + origin
    return convex_hull(verts, tol) if len(verts) else Polytope.empty(p.n)


def _clip_lower(p: Polytope, half: HalfSpace, tol: float) -> Polytope:
    # segment base case after projections
    vals = np.array([half.value(v) for v in p.vertices])
    inside = [v for v, s in zip(p.vertices, vals) if s <= tol]
    for (i, j) in itertools.combinations(range(len(p.vertices)), 2):
        a, b = vals[i], vals[j]
        if a * b < -tol * tol:
            t = a / (a - b)
            inside.append(p.vertices[i] + t * (p.vertices[j] - p.vertices[i]))
    if not inside:
        return Polytope.empty(p.n)
    return convex_hull(np.array(inside), tol, allow_lower=True)


def intersect(p: Polytope, q: Polytope, tol: float = TOL_GEOM) -> np.ndarray:
    """Vertices of p intersect q (possibly lower-dimensional, possibly empty)."""
    hs = p.halfspaces + q.halfspaces
    if not hs:
        raise GeometryError("intersection requires halfspace data")
    A = np.array([h.normal for h in hs])
    b = np.array([h.offset for h in hs])
    n = p.n
    feas_tol = max(tol, 1e-8)
    cands = []
    for idx in itertools.combinations(range(len(hs)), n):
        M = A[list(idx)]
        if abs(np.linalg.det(M)) <= 1e-12:
            continue
        x = np.linalg.solve(M, b[list(idx)])
        if np.all(A @ x - b <= feas_tol):
            cands.append(x)
    # vertices of either polytope lying inside the other are candidates too
    for v in p.vertices:
        if q.contains(v, feas_tol):
            cands.append(v)
    for v in q.vertices:
        if p.contains(v, feas_tol):
            cands.append(v)
    if not cands:
        return np.zeros((0, n))
    pts = dedupe_points(np.array(cands))
    return lex_sorted(extreme_points(pts, tol))


def common_face(p: Polytope, q: Polytope, tol: float = TOL_GEOM) -> Face:
    """Intersection of two polytopes as a face value (empty allowed);
    the adjacency predicate is dim == n-1."""
    verts = intersect(p, q, tol)
    if len(verts) == 0:
        return Face.empty(p.n)
    return Face(verts, None, affine_dimension(verts, tol))


# ---------------------------------------------------------------------------
# faces and volumes
# ---------------------------------------------------------------------------

def faces_of(p: Polytope, d: int, tol: float = TOL_GEOM) -> list[Face]:
    """Faces of dimension d, found from facet-incidence intersections."""
    if not p.is_full_dim:
        raise Degenerate("faces_of expects a full-dimensional polytope")
    n = p.n
    if d == n:
        return [Face(p.vertices, None, n)]
    side_tol = max(tol, 1e-8)
    tight_sets = []
    for h in p.halfspaces:
        mask = np.abs(p.vertices @ h.normal - h.offset) <= side_tol
        tight_sets.append(frozenset(np.flatnonzero(mask)))
    m = len(tight_sets)
    out: dict[frozenset, Face] = {}
    max_take = min(m, n)
    for size in range(1, max_take + 1):
        for combo in itertools.combinations(range(m), size):
            shared = frozenset.intersection(*[tight_sets[i] for i in combo])
            if not shared or shared in out:
                continue
            verts = p.vertices[sorted(shared)]
            fd = affine_dimension(verts, tol)
            if fd == d:
                sup = p.halfspaces[combo[0]] if size == 1 else None
                out[shared] = Face(lex_sorted(verts), sup, fd)
    return [out[k] for k in sorted(out, key=lambda s: tuple(sorted(s)))]


def simplex_volume(vertices: np.ndarray) -> float:
    V = _as_points(vertices)
    d = V.shape[0] - 1
    if d <= 0:
        return 0.0
    diffs = V[1:] - V[0]
    if V.shape[1] == d:
        return abs(np.linalg.det(diffs)) / math.factorial(d)
    g = diffs @ diffs.T
    return float(np.sqrt(max(np.linalg.det(g), 0.0)) / math.factorial(d))


def volume(p: Polytope) -> float:
    """Volume by fan triangulation from the lexicographically smallest
    vertex; zero for lower-dimensional polytopes."""
    if p.is_empty or p.dim < p.n:
        return 0.0
    total = 0.0
    for s in fan_triangulation_simplices(p):
        total += simplex_volume(s)
    return total


def triangulate_point_set(vertices: np.ndarray, anchor: Optional[np.ndarray] = None,
                          tol: float = TOL_GEOM) -> list[np.ndarray]:
    """Triangulate the convex hull of a d-dimensional point set in R^n.

    Returns vertex arrays of (d+1) rows each.  The fan anchor defaults to
    the lexicographically smallest vertex, making the result deterministic
    for a fixed vertex set.
    """
    V = lex_sorted(extreme_points(dedupe_points(_as_points(vertices)), tol))
    d = affine_dimension(V, tol)
    if d <= 0:
        return [V[:1]]
    if d == 1:
        origin, basis = affine_basis(V, tol)
        t = (V - origin) @ basis[:, 0]
        return [np.array([V[np.argmin(t)], V[np.argmax(t)]])]
    if anchor is None:
        anchor = V[0]
    anchor = np.asarray(anchor, dtype=float)
    origin, basis = affine_basis(V, tol)
    proj = (V - origin) @ basis
    hull = convex_hull(proj, tol, allow_lower=False)
    out = []
    for face in hull.facets():
        orig_face = face.vertices @ basis.T + origin
        if any(np.linalg.norm(fv - anchor, ord=np.inf) <= _DEDUPE_TOL for fv in orig_face):
            continue
        if face.supporting is not None:
            a_proj = basis.T @ (anchor - origin)
            if abs(face.supporting.value(a_proj)) <= max(tol, 1e-9):
                continue  # anchor lies on the facet plane: skip to avoid flat cells
        for sub in triangulate_point_set(orig_face, None, tol):
            out.append(np.vstack([anchor[None, :], sub]))
    return out


def triangulate_face(face: Face, anchor: Optional[np.ndarray] = None,
                     tol: float = TOL_GEOM) -> list[np.ndarray]:
    """Triangulation of an (n-1)-dimensional face into (n-1)-simplices,
    each returned as an array of n vertex rows."""
    return triangulate_point_set(face.vertices, anchor, tol)


def fan_triangulation_simplices(p: Polytope, anchor: Optional[np.ndarray] = None,
                                tol: float = TOL_GEOM) -> list[np.ndarray]:
    """Full-dimensional simplices (vertex arrays) fanning ``p`` from a
    vertex; anchor defaults to the lexicographically smallest vertex."""
    if not p.is_full_dim:
        raise Degenerate("fan triangulation expects a full-dimensional polytope")
    if anchor is None:
        anchor = p.vertices[0]
    anchor = np.asarray(anchor, dtype=float)
    out = []
    for face in p.facets():
        if any(np.linalg.norm(fv - anchor, ord=np.inf) <= _DEDUPE_TOL for fv in face.vertices):
            continue
        if face.supporting is not None and abs(face.supporting.value(anchor)) <= max(tol, 1e-9):
            continue
        for sub in triangulate_face(face, None, tol):
            out.append(np.vstack([anchor[None, :], sub]))
    return out


# ---------------------------------------------------------------------------
# simplices with facet normals
# ---------------------------------------------------------------------------

class Simplex:
    """n+1 affinely independent vertices; facet j is the one omitting
    vertex j, with unit outward normal ``normals[j]`` and offset
    ``offsets[j]`` so that normals[j].v_i == offsets[j] for i != j and
    normals[j].v_j < offsets[j]."""

    def __init__(self, vertices):
        V = _as_points(vertices)
        n = V.shape[1]
        if V.shape[0] != n + 1:
            raise GeometryError(f"simplex in R^{n} needs {n + 1} vertices, got {V.shape[0]}")
        if affine_dimension(V) != n:
            raise GeometryError("simplex vertices are affinely dependent")
        self.vertices = V
        normals = np.zeros((n + 1, n))
        offsets = np.zeros(n + 1)
        for j in range(n + 1):
            others = np.delete(V, j, axis=0)
            diffs = others[1:] - others[0]
            _, _, vt = np.linalg.svd(diffs)
            nrm = vt[-1]
            off = float(nrm @ others[0])
            if nrm @ V[j] > off:
                nrm, off = -nrm, -off
            scale = np.linalg.norm(nrm)
            normals[j] = nrm / scale
            offsets[j] = off / scale
        self.normals = normals
        self.offsets = offsets

    @property
    def n(self) -> int:
        return self.vertices.shape[1]

    def contains(self, x, tol: float = TOL_GEOM) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.normals @ x - self.offsets <= tol))

    def facet(self, j: int) -> Face:
        verts = np.delete(self.vertices, j, axis=0)
        return Face(lex_sorted(verts), HalfSpace(self.normals[j], self.offsets[j]), self.n - 1)

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def volume(self) -> float:
        return simplex_volume(self.vertices)

    def as_polytope(self) -> Polytope:
        hs = [HalfSpace(self.normals[j], self.offsets[j]) for j in range(self.n + 1)]
        return Polytope(lex_sorted(self.vertices), hs, self.n)

    def vertex_key(self) -> tuple:
        return tuple(map(tuple, np.round(lex_sorted(self.vertices), 9)))

    def __repr__(self) -> str:
        return f"Simplex(n={self.n})"


# ---------------------------------------------------------------------------
# cover / subdivision checks
# ---------------------------------------------------------------------------

def uncovered_volume(domain: Polytope, pieces: list[Polytope],
                     cut_planes: list[Hyperplane], tol: float = TOL_GEOM) -> float:
    """Volume of domain not covered by any piece.

    The cut planes must include every hyperplane used to carve the pieces
    out of the domain, so that each arrangement cell is covered either
    fully or not at all; cell membership is then decided at the centroid.
    """
    cells = [domain]
    for plane in cut_planes:
        nxt = []
        for c in cells:
            lo, hi = split_by_hyperplane(c, plane, tol)
            for part in (lo, hi):
                if not part.is_empty and part.is_full_dim:
                    nxt.append(part)
        if nxt:
            cells = nxt
    gap = 0.0
    for c in cells:
        x = c.centroid()
        if not any(piece.contains(x, max(tol, 1e-8)) for piece in pieces if not piece.is_empty):
            gap += c.volume()
    return gap
