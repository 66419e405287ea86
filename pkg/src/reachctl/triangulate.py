"""Partitioning constructions driven by the control problem: anchored fan
triangulations, refinement with respect to a boundary target that is not a
facet, the far-target split, and the cover used when the equilibrium plane
crosses the polytope."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import CoverIncomplete, NoQualifyingVertex, VStarInFbar
from .geometry import (TOL_GEOM, Face, HalfSpace, Hyperplane, Polytope,
                       Simplex, affine_basis, affine_dimension,
                       clip_to_halfspace, common_face, convex_hull,
                       dedupe_points, lex_sorted, point_in_hull,
                       split_by_hyperplane, triangulate_point_set,
                       uncovered_volume)
from .reach import EpsilonCut, ReachAnalysis, analyze, default_eps, epsilon_cut
from .system import AffineSystem, SystemGeometry, compute_geometry


@dataclass
class Triangulation:
    """Simplices of an anchored triangulation, facet adjacency, and the
    indices whose base facet lies inside the target."""

    simplices: list[Simplex]
    vstar: np.ndarray
    target_indices: list[int]
    adjacency: list[tuple[int, int, Face]] = field(default_factory=list)

    def __post_init__(self):
        if not self.adjacency:
            self.adjacency = _facet_adjacency(self.simplices)

    def neighbors(self, i: int):
        for a, b, face in self.adjacency:
            if a == i:
                yield b, face
            elif b == i:
                yield a, face


@dataclass(frozen=True)
class CoverPiece:
    polytope: Polytope
    target: Face
    role: str  # "target" drives to the original target, "feeder" to an interface
    cut: Optional[EpsilonCut] = None


@dataclass(frozen=True)
class Cover:
    pieces: tuple[CoverPiece, ...]
    cut_planes: tuple[Hyperplane, ...] = ()


def _vertex_key(v: np.ndarray) -> tuple:
    return tuple(np.round(v, 9))


def _facet_adjacency(simplices: list[Simplex]) -> list[tuple[int, int, Face]]:
    """Pairs sharing exactly n vertices; the shared set is their common facet."""
    out = []
    keysets = [set(map(_vertex_key, s.vertices)) for s in simplices]
    n = simplices[0].n if simplices else 0
    for i, j in itertools.combinations(range(len(simplices)), 2):
        shared = keysets[i] & keysets[j]
        if len(shared) == n:
            verts = np.array(sorted(shared))
            out.append((i, j, Face(lex_sorted(verts), None, n - 1)))
    return out


def select_vstar(p: Polytope, f: Face, geom: SystemGeometry,
                 tol: float = TOL_GEOM) -> np.ndarray:
    """Anchor vertex on the top drift face: prefer one off the equilibrium
    plane, otherwise one inside the target; lexicographically first among
    qualifiers.  Failing both, the reachability premise is violated."""
    levels = p.vertices @ geom.beta
    top = p.vertices[np.abs(levels - levels.max()) <= max(tol, 1e-9)]
    top = lex_sorted(top)
    off_plane = [v for v in top if not geom.on_equilibrium_plane(v, max(tol, 1e-8))]
    if off_plane:
        return off_plane[0]
    in_target = [v for v in top if point_in_hull(v, f.vertices, max(tol, 1e-8))]
    if in_target:
        return in_target[0]
    raise NoQualifyingVertex("no admissible anchor vertex on the top face")


def _cone(vstar: np.ndarray, base: np.ndarray) -> Simplex:
    return Simplex(np.vstack([vstar[None, :], base]))


def _facet_contains_point(face: Face, x: np.ndarray, tol: float) -> bool:
    if face.supporting is not None:
        return abs(face.supporting.value(x)) <= max(tol, 1e-9)
    return point_in_hull(x, face.vertices, tol)


def basic_triangulation(p: Polytope, vstar: np.ndarray,
                        tol: float = TOL_GEOM) -> Triangulation:
    """Fan over the facet triangulations of every facet whose plane does
    not contain the anchor; every output simplex has the anchor as a
    vertex."""
    vstar = np.asarray(vstar, dtype=float)
    simplices: list[Simplex] = []
    for face in p.facets():
        if _facet_contains_point(face, vstar, tol):
            continue
        for base in triangulate_point_set(face.vertices, None, tol):
            simplices.append(_cone(vstar, base))
    simplices.sort(key=lambda s: s.vertex_key())
    return Triangulation(simplices, vstar, [])


def mark_target(tri: Triangulation, f: Face, tol: float = TOL_GEOM) -> None:
    """Tag simplices having a whole facet inside the target."""
    tri.target_indices = []
    for idx, s in enumerate(tri.simplices):
        for j in range(s.n + 1):
            base = np.delete(s.vertices, j, axis=0)
            if all(point_in_hull(v, f.vertices, max(tol, 1e-8)) for v in base):
                tri.target_indices.append(idx)
                break


def _complement_pieces(region: Polytope, carve: Face,
                       tol: float = TOL_GEOM) -> list[np.ndarray]:
    """Convex pieces of region minus carve, by sequential clipping along
    the carve's supporting planes inside the region's affine hull."""
    origin, basis = affine_basis(region.vertices, tol)
    reg = convex_hull((region.vertices - origin) @ basis, tol, allow_lower=False)
    car = convex_hull((carve.vertices - origin) @ basis, tol, allow_lower=False)
    remainder = reg
    out = []
    for h in car.halfspaces:
        piece = clip_to_halfspace(remainder, h.flipped(), tol)
        if not piece.is_empty and piece.dim == reg.dim:
            out.append(piece.vertices @ basis.T + origin)
        remainder = clip_to_halfspace(remainder, h, tol)
    return out


def triangulation_wrt_F(p: Polytope, f: Face, vstar: np.ndarray,
                        tol: float = TOL_GEOM) -> Triangulation:
    """Anchored triangulation refined so that, on the facet carrying the
    target, every piece lies inside the target or misses its interior."""
    vstar = np.asarray(vstar, dtype=float)
    facets = p.facets()
    fbar_idx = None
    for k, face in enumerate(facets):
        if all(abs(face.supporting.value(v)) <= max(tol, 1e-7) for v in f.vertices):
            fbar_idx = k
            break
    if fbar_idx is None:
        raise ValueError("target does not lie in any facet of the polytope")
    if _facet_contains_point(facets[fbar_idx], vstar, tol):
        raise VStarInFbar("anchor lies on the facet carrying the target")

    simplices: list[Simplex] = []
    targets: list[int] = []
    for k, face in enumerate(facets):
        if _facet_contains_point(face, vstar, tol):
            continue
        if k == fbar_idx:
            for base in triangulate_point_set(f.vertices, None, tol):
                targets.append(len(simplices))
                simplices.append(_cone(vstar, base))
            for piece in _complement_pieces(
                    Polytope(face.vertices, [], p.n - 1), f, tol):
                for base in triangulate_point_set(piece, None, tol):
                    simplices.append(_cone(vstar, base))
        else:
            for base in triangulate_point_set(face.vertices, None, tol):
                simplices.append(_cone(vstar, base))
    order = sorted(range(len(simplices)), key=lambda i: simplices[i].vertex_key())
    simplices = [simplices[i] for i in order]
    targets = sorted(order.index(t) for t in targets)
    return Triangulation(simplices, vstar, targets)


# ---------------------------------------------------------------------------
# covers and splits for a non-facet target
# ---------------------------------------------------------------------------

def qualifying_vertices(p: Polytope, f: Face, geom: SystemGeometry,
                        tol: float = TOL_GEOM) -> np.ndarray:
    """Vertices on the top drift face admissible as fan anchors: off the
    equilibrium plane or inside the target."""
    levels = p.vertices @ geom.beta
    top = p.vertices[np.abs(levels - levels.max()) <= max(tol, 1e-9)]
    quals = [v for v in top
             if not geom.on_equilibrium_plane(v, max(tol, 1e-8))
             or point_in_hull(v, f.vertices, max(tol, 1e-8))]
    return lex_sorted(np.array(quals)) if quals else np.zeros((0, p.n))


def _split_plane_through(p: Polytope, a: np.ndarray, b: np.ndarray,
                         tol: float = TOL_GEOM) -> Hyperplane:
    """Hyperplane through the segment [a, b] splitting p into two
    full-dimensional pieces; extra support points are chosen among the
    vertices to maximize the smaller piece, with coordinate-direction
    fallbacks."""
    n = p.n
    axis = b - a
    candidates: list[Hyperplane] = []
    if n == 2:
        normal = np.array([-axis[1], axis[0]])
        candidates.append(Hyperplane(normal, float(normal @ a)))
    else:
        extra_pool = [v for v in p.vertices
                      if affine_dimension(np.vstack([a, b, v]), tol) == 2]
        for combo in itertools.combinations(range(len(extra_pool)), n - 2):
            pts = np.vstack([a, b] + [extra_pool[i] for i in combo])
            if affine_dimension(pts, tol) != n - 1:
                continue
            origin, basis = affine_basis(pts, tol)
            u, s, vt = np.linalg.svd(basis.T, full_matrices=True)
            normal = vt[-1]
            candidates.append(Hyperplane(normal, float(normal @ a)))
        for k in range(n):
            e = np.zeros(n)
            e[k] = 1.0
            pts = np.vstack([a, b, a + e])
            if affine_dimension(pts, tol) < min(3, n - 1) + 1 - 1:
                continue
            dirs = np.vstack([axis, [e]])
            u, s, vt = np.linalg.svd(dirs, full_matrices=True)
            if s.min() <= 1e-9:
                continue
            normal = vt[-1]
            candidates.append(Hyperplane(normal, float(normal @ a)))

    best = None
    best_score = -1.0
    for plane in candidates:
        lo, hi = split_by_hyperplane(p, plane, tol)
        if lo.is_empty or hi.is_empty or not (lo.is_full_dim and hi.is_full_dim):
            continue
        score = min(lo.volume(), hi.volume())
        if score > best_score + 1e-12:
            best, best_score = plane, score
    if best is None:
        raise NoQualifyingVertex("no hyperplane through the anchor segment splits the polytope")
    return best


def cover_wrt_F(p: Polytope, f: Face, geom: SystemGeometry,
                tol: float = TOL_GEOM) -> Cover:
    """Three-piece cover for a target inside a facet: one piece has the
    target as a facet, the other two drive to the interface slice.

    Degenerate case: when the target already is a facet the polytope comes
    back as a single piece.
    """
    for face in p.facets():
        shared = all(any(np.linalg.norm(v - w, ord=np.inf) <= 1e-7 for w in face.vertices)
                     for v in f.vertices)
        if shared and len(face.vertices) == len(f.vertices):
            return Cover((CoverPiece(p, f, "target"),))

    levels = p.vertices @ geom.beta
    top_level = levels.max()
    f_levels = f.vertices @ geom.beta
    quals = [v for v in f.vertices if abs(float(geom.beta @ v) - top_level) <= max(tol, 1e-8)]
    if not quals:
        raise NoQualifyingVertex("no target vertex on the top drift face")
    vstar = lex_sorted(np.array(quals))[0]
    v_minus = lex_sorted(f.vertices[np.abs(f_levels - f_levels.min()) <= max(tol, 1e-9)])[0]

    plane = _split_plane_through(p, v_minus, vstar, tol)
    p2, p3 = split_by_hyperplane(p, plane, tol)
    interface = common_face(p2, p3, tol)
    p1 = convex_hull(np.vstack([f.vertices, interface.vertices]), tol)
    f23 = Face(interface.vertices, None, interface.dim)
    return Cover((CoverPiece(p1, f, "target"),
                  CoverPiece(p2, f23, "feeder"),
                  CoverPiece(p3, f23, "feeder")),
                 (plane,))


@dataclass(frozen=True)
class FarSplit:
    p1: Polytope
    p2: Polytope
    interface: Face
    split: bool
    plane: Optional[Hyperplane] = None


def split_far_case(p: Polytope, f: Face, geom: SystemGeometry,
                   tol: float = TOL_GEOM) -> FarSplit:
    """Split along the input-plane through the target's top vertex when no
    target vertex reaches the polytope's top face; the piece holding the
    target then has a top-face target vertex, the other feeds the
    interface slice.  When a target vertex already sits on the top face
    the polytope passes through unsplit."""
    levels = p.vertices @ geom.beta
    top_level = float(levels.max())
    f_levels = f.vertices @ geom.beta
    if any(abs(float(lv) - top_level) <= max(tol, 1e-8) for lv in f_levels):
        return FarSplit(p, Polytope.empty(p.n), Face.empty(p.n), False)

    v_plus = lex_sorted(f.vertices[np.abs(f_levels - f_levels.max()) <= max(tol, 1e-9)])[0]
    plane = geom.input_plane_through(v_plus)
    lo, hi = split_by_hyperplane(p, plane, tol)
    # the target sits on the low-drift side of the plane
    p1, p2 = lo, hi
    interface = common_face(p1, p2, tol)
    return FarSplit(p1, p2, Face(interface.vertices, None, interface.dim), True, plane)


# ---------------------------------------------------------------------------
# cover with respect to the equilibrium plane
# ---------------------------------------------------------------------------

def _clip_face(f: Face, half: HalfSpace, tol: float = TOL_GEOM) -> Face:
    poly = Polytope(f.vertices, [], f.dim)
    clipped = clip_to_halfspace(poly, half, tol)
    if clipped.is_empty:
        return Face.empty(f.vertices.shape[1])
    return Face(clipped.vertices, f.supporting, clipped.dim)


def cover_wrt_O(sys: AffineSystem, p: Polytope, f: Face,
                eps: Optional[float] = None,
                tol: float = TOL_GEOM) -> Cover:
    """Cover of a polytope crossed by the equilibrium plane.

    The polytope is split along the plane; each side gets a margin-cut
    reach set toward its share of the target (when that share is a facet)
    and toward the part of the interface covered from the other side.
    Raises CoverIncomplete when the pieces miss a region of positive
    volume, which signals that the margin must shrink or that some states
    are forced through a low-dimensional bottleneck.
    """
    beta0 = np.linalg.svd(sys.B, full_matrices=True)[0][:, -1]
    normal = beta0 @ sys.A
    o_plane = Hyperplane(normal, -float(beta0 @ sys.a))
    side1, side2 = split_by_hyperplane(p, o_plane, tol)
    if side1.is_empty or side2.is_empty:
        return Cover((CoverPiece(p, f, "target"),))

    sides = [side1, side2]
    targets = [_clip_face(f, o_plane.lower(), tol), _clip_face(f, o_plane.upper(), tol)]
    cuts: list[Optional[EpsilonCut]] = [None, None]
    geoms = [compute_geometry(sys, s, tol) for s in sides]
    if eps is None:
        eps = min(default_eps(geoms[0], sides[0]), default_eps(geoms[1], sides[1]))

    from .errors import CutConstructionFailed, EpsTooLarge

    direct: list[Optional[Polytope]] = [None, None]
    for i in (0, 1):
        if targets[i].dim == p.n - 1:
            try:
                cut = epsilon_cut(sys, geoms[i], sides[i], targets[i], eps, tol=tol)
            except (EpsTooLarge, CutConstructionFailed) as exc:
                raise CoverIncomplete(np.inf, f"direct cut on side {i} failed: {exc}")
            if not cut.reach_eps.is_empty:
                direct[i] = cut.reach_eps
                cuts[i] = cut

    pieces: list[CoverPiece] = []
    planes: list[Hyperplane] = [o_plane]
    for i in (0, 1):
        if direct[i] is not None:
            pieces.append(CoverPiece(direct[i], targets[i], "target", cuts[i]))
            planes.extend(cuts[i].cut_planes)

    for i, j in ((0, 1), (1, 0)):
        if direct[j] is None:
            continue
        if direct[i] is not None and \
                abs(direct[i].volume() - sides[i].volume()) <= 1e-12 * max(sides[i].volume(), 1.0):
            continue  # this side is already covered by its direct piece
        iface_poly = clip_to_halfspace(
            clip_to_halfspace(direct[j], o_plane.lower(), tol), o_plane.upper(), tol)
        if iface_poly.is_empty or iface_poly.dim != p.n - 1:
            continue
        iface = Face(iface_poly.vertices, None, iface_poly.dim)
        try:
            cut = epsilon_cut(sys, geoms[i], sides[i], iface, eps, tol=tol)
        except (EpsTooLarge, CutConstructionFailed) as exc:
            raise CoverIncomplete(np.inf, f"interface cut on side {i} failed: {exc}")
        if cut.reach_eps.is_empty:
            continue
        pieces.append(CoverPiece(cut.reach_eps, iface, "feeder", cut))
        planes.extend(cut.cut_planes)

    gap = uncovered_volume(p, [piece.polytope for piece in pieces], planes, tol)
    if gap > 1e-8 * max(p.volume(), 1.0):
        raise CoverIncomplete(gap)
    return Cover(tuple(pieces), tuple(planes))
