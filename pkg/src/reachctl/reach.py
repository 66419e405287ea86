"""Open-loop reachability of a boundary target on a polytope.

The analysis decides whether every state of the polytope can be steered
to the target while remaining inside, exposes the two failure sets (the
sub-level block at the target's low end, and the possible equilibria
pinned on the top face), and cuts the failure sets off with a margin to
produce a closed polytope on which the problem is solvable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import lp
from .errors import CommonHyperplane, CutConstructionFailed, EpsTooLarge
from .geometry import (TOL_GEOM, Face, HalfSpace, Hyperplane, Polytope,
                       affine_basis, affine_dimension, clip_to_halfspace,
                       convex_hull, dedupe_points, faces_of, lex_sorted,
                       point_in_hull, split_by_hyperplane, uncovered_volume)
from .system import AffineSystem, SystemGeometry


@dataclass(frozen=True)
class ReachAnalysis:
    """Verdict and landmark sets for one (polytope, target) instance.

    ``a_minus`` / ``a_plus`` store closures of the failure sets; the true
    failure sets exclude their measure-zero overlap with the target.
    """

    v_minus: np.ndarray
    v_plus: np.ndarray
    h_minus: Polytope
    h_plus: Polytope
    p_plus: Face
    b_minus: Polytope
    b_minus_active: bool
    a_minus: Polytope
    a_plus: Face
    condition_a: bool
    condition_b: bool
    notes: tuple = ()

    @property
    def reachable(self) -> bool:
        return self.condition_a and self.condition_b

    @property
    def has_failure_sets(self) -> bool:
        return (not self.a_minus.is_empty) or (not self.a_plus.is_empty)


@dataclass(frozen=True)
class EpsilonCut:
    """Result of cutting the failure sets off with margin ``eps``."""

    eps: float
    a_eps_minus: Polytope
    a_eps_plus: Polytope
    reach_eps: Polytope
    cut_planes: tuple = ()


def _argopt_vertex(vertices: np.ndarray, beta: np.ndarray, minimize: bool) -> np.ndarray:
    vals = vertices @ beta
    best = vals.min() if minimize else vals.max()
    mask = np.abs(vals - best) <= 1e-12 + 1e-9 * abs(best)
    cands = lex_sorted(vertices[mask])
    return cands[0]


def _hull_meets_planes(vertices: np.ndarray, planes: list[Hyperplane],
                       tol: float = TOL_GEOM) -> bool:
    """Does conv(vertices) intersect all given hyperplanes simultaneously?"""
    V = np.atleast_2d(vertices)
    k = V.shape[0]
    if k == 0:
        return False
    G = -np.eye(k)
    h = np.zeros(k)
    eq_rows = [np.ones(k)]
    eq_rhs = [1.0]
    for pl in planes:
        eq_rows.append(V @ pl.normal)
        eq_rhs.append(pl.offset)
    out = lp.solve_lp(np.zeros(k), G, h, np.array(eq_rows), np.array(eq_rhs))
    return out.status == lp.OPTIMAL


def _level_face(p: Polytope, beta: np.ndarray, level: float,
                tol: float = TOL_GEOM) -> Polytope:
    """P intersected with the plane beta.x == level (lower-dimensional)."""
    plane = Hyperplane(beta, level)
    piece = clip_to_halfspace(p, plane.lower(), tol)
    return clip_to_halfspace(piece, plane.upper(), tol)


def analyze(sys: AffineSystem, geom: SystemGeometry, p: Polytope, f: Face,
            tol: float = TOL_GEOM) -> ReachAnalysis:
    """Exact reachability verdict for steering all of ``p`` to ``f``.

    Condition (a): nothing lies strictly below the target's lowest drift
    level except points covered by the target or by the equilibrium slice
    of that level.  Condition (b): the top face of the polytope is not a
    set of forced equilibria away from the target.
    """
    beta = geom.beta
    v_minus = _argopt_vertex(f.vertices, beta, minimize=True)
    v_plus = _argopt_vertex(f.vertices, beta, minimize=False)
    lvl_minus = float(beta @ v_minus)
    lvl_plus = float(beta @ v_plus)

    p_levels = p.vertices @ beta
    beta_min = float(p_levels.min())
    beta_max = float(p_levels.max())
    notes: list[str] = []

    # sub-level and super-level blocks relative to the target
    if beta_min < lvl_minus - tol:
        h_minus, _ = split_by_hyperplane(p, Hyperplane(beta, lvl_minus), tol)
    else:
        h_minus = _level_face(p, beta, lvl_minus, tol)
    if beta_max > lvl_plus + tol:
        _, h_plus = split_by_hyperplane(p, Hyperplane(beta, lvl_plus), tol)
    else:
        h_plus = _level_face(p, beta, lvl_plus, tol)

    top_verts = p.vertices[np.abs(p_levels - beta_max) <= max(tol, 1e-9)]
    p_plus = Face(lex_sorted(top_verts), None, affine_dimension(top_verts, tol))

    # equilibrium slice at the target's low level, active only when it
    # meets the target
    o_plane = geom.equilibrium_plane
    b_plane = Hyperplane(beta, lvl_minus)
    b_minus_active = _hull_meets_planes(f.vertices, [b_plane, o_plane], tol)
    if b_minus_active:
        slice_b = _level_face(p, beta, lvl_minus, tol)
        b_minus = clip_to_halfspace(
            clip_to_halfspace(slice_b, o_plane.lower(), tol), o_plane.upper(), tol)
    else:
        b_minus = Polytope.empty(p.n)

    # condition (a)
    def covered(x) -> bool:
        if point_in_hull(x, f.vertices, max(tol, 1e-8)):
            return True
        return b_minus_active and (not b_minus.is_empty) and \
            point_in_hull(x, b_minus.vertices, max(tol, 1e-8))

    if beta_min < lvl_minus - max(tol, 1e-9):
        condition_a = False
        a_minus = h_minus
    else:
        probes = [v for v in h_minus.vertices]
        nv = len(h_minus.vertices)
        for i, j in itertools.combinations(range(nv), 2):
            probes.append(0.5 * (h_minus.vertices[i] + h_minus.vertices[j]))
        if nv:
            probes.append(h_minus.vertices.mean(axis=0))
        uncovered = [x for x in probes if not covered(x)]
        condition_a = len(uncovered) == 0
        if condition_a:
            a_minus = Polytope.empty(p.n)
        else:
            bad_verts = [v for v in h_minus.vertices if not covered(v)]
            if not bad_verts:
                # vertices covered but interior probes are not; keep the
                # whole level face as the closure and flag the ambiguity
                bad_verts = list(h_minus.vertices)
                notes.append("sub-level face not convexly covered by target and equilibrium slice")
            a_minus = convex_hull(np.array(bad_verts), tol, allow_lower=True)

    # condition (b)
    in_o = all(geom.on_equilibrium_plane(v, max(tol, 1e-8)) for v in p_plus.vertices)
    strictly_above = beta_max > lvl_plus + max(tol, 1e-9)
    condition_b = (not in_o) or (not strictly_above)
    a_plus = p_plus if not condition_b else Face.empty(p.n)

    return ReachAnalysis(v_minus, v_plus, h_minus, h_plus, p_plus,
                         b_minus, b_minus_active, a_minus, a_plus,
                         condition_a, condition_b, tuple(notes))


def default_eps(geom: SystemGeometry, p: Polytope) -> float:
    levels = p.vertices @ geom.beta
    return 1e-2 * float(levels.max() - levels.min())


# ---------------------------------------------------------------------------
# margin cuts
# ---------------------------------------------------------------------------

def _edge_level_points(p: Polytope, beta: np.ndarray, level: float,
                       tol: float = TOL_GEOM) -> np.ndarray:
    """Boundary points of p at the given drift level, taken on edges."""
    pts = []
    for edge in faces_of(p, 1, tol):
        if len(edge.vertices) < 2:
            continue
        a, b = edge.vertices[0], edge.vertices[-1]
        la, lb = float(beta @ a), float(beta @ b)
        if (la - level) * (lb - level) < 0.0:
            t = (level - la) / (lb - la)
            pts.append(a + t * (b - a))
        else:
            for v, lv in ((a, la), (b, lb)):
                if abs(lv - level) <= tol:
                    pts.append(v)
    if not pts:
        return np.zeros((0, p.n))
    return lex_sorted(dedupe_points(np.array(pts)))


def _fit_hyperplane(points: np.ndarray, tol: float = TOL_GEOM) -> Optional[Hyperplane]:
    pts = dedupe_points(points)
    n = pts.shape[1]
    if affine_dimension(pts, tol) != n - 1:
        return None
    origin, basis = affine_basis(pts, tol)
    # normal orthogonal to the spanned directions
    u, s, vt = np.linalg.svd(basis.T, full_matrices=True)
    normal = vt[-1]
    return Hyperplane(normal, float(normal @ origin))


def _flat_target_pivot(f: Face, offenders: np.ndarray,
                       tol: float = TOL_GEOM) -> np.ndarray:
    """For a target lying entirely at one drift level, pick the face of the
    target whose outer side holds every offending point; the cut pivots on
    that face."""
    d = f.dim
    if d == 1:
        a, b = f.vertices[0], f.vertices[-1]
        direction = b - a
        direction /= np.linalg.norm(direction)
        ta, tb = 0.0, float(direction @ (b - a))
        toff = [float(direction @ (o - a)) for o in offenders]
        if all(t >= tb - tol for t in toff):
            return np.array([b])
        if all(t <= ta + tol for t in toff):
            return np.array([a])
        raise CutConstructionFailed("offending points on both sides of a flat target")
    # polygonal target: test each in-plane edge
    origin, basis = affine_basis(f.vertices, tol)
    proj = (f.vertices - origin) @ basis
    hull = convex_hull(proj, tol, allow_lower=False)
    off_proj = (offenders - origin) @ basis
    for face in hull.facets():
        sup = face.supporting
        if all(sup.value(o) >= -tol for o in off_proj):
            return face.vertices @ basis.T + origin
    raise CutConstructionFailed("no target face separates the offending points")


def _cut_low_failure(p: Polytope, f: Face, geom: SystemGeometry,
                     analysis: ReachAnalysis, eps: float,
                     tol: float = TOL_GEOM) -> tuple[Hyperplane, int]:
    """Cut hyperplane removing the low-end failure set with margin eps.

    Returns the plane and the sign of its failure side (+1 means the
    failure set satisfies normal.x >= offset).
    """
    beta = geom.beta
    lvl = float(beta @ analysis.v_minus)
    n = p.n

    f_levels = f.vertices @ beta
    flat = float(f_levels.max() - f_levels.min()) <= max(tol, 1e-9)

    cov_tol = max(tol, 1e-8)
    offenders = np.array([v for v in analysis.h_minus.vertices
                          if not point_in_hull(v, f.vertices, cov_tol)
                          and not (analysis.b_minus_active and not analysis.b_minus.is_empty
                                   and point_in_hull(v, analysis.b_minus.vertices, cov_tol))])
    if len(offenders) == 0:
        offenders = analysis.a_minus.vertices

    if flat:
        pivots = _flat_target_pivot(f, offenders, tol)
    else:
        pivots = f.vertices[np.abs(f_levels - lvl) <= max(tol, 1e-9)]

    level_hi = lvl + eps
    if level_hi >= float((p.vertices @ beta).max()) - max(tol, 1e-9):
        raise EpsTooLarge("margin exceeds the drift extent of the polytope")
    anchors = _edge_level_points(p, beta, level_hi, tol)
    if len(anchors) == 0:
        raise EpsTooLarge("no boundary points at the shifted level")

    need = n - affine_dimension(pivots, tol) - 1
    if need <= 0:
        cand_sets = [()]
    else:
        cand_sets = list(itertools.combinations(range(len(anchors)), need))

    f_verts = f.vertices
    for combo in cand_sets:
        pts = np.vstack([pivots] + [anchors[list(combo)]]) if combo else pivots
        plane = _fit_hyperplane(pts, tol)
        if plane is None:
            continue
        # orient: failure side is where the offenders live
        off_vals = np.array([plane.value(o) for o in offenders])
        if np.all(off_vals >= -cov_tol):
            sign = 1
        elif np.all(off_vals <= cov_tol):
            sign = -1
        else:
            continue
        # the target must sit entirely on the keep side
        f_vals = np.array([plane.value(v) for v in f_verts]) * sign
        if np.any(f_vals > cov_tol):
            continue
        # margin attained: every point of the plane inside p stays within
        # eps of the pivot level
        lo, hi = split_by_hyperplane(p, plane, tol)
        cut_piece = hi if sign > 0 else lo
        keep_piece = lo if sign > 0 else hi
        if cut_piece.is_empty or keep_piece.is_empty or not keep_piece.is_full_dim:
            continue
        iface = [v for v in keep_piece.vertices
                 if abs(plane.value(v)) <= max(tol, 1e-7)]
        if not iface:
            continue
        dists = [abs(float(beta @ v) - lvl) for v in iface]
        if max(dists) > eps + 1e-7:
            continue
        return plane, sign
    raise CutConstructionFailed("no admissible cut hyperplane at this margin")


def epsilon_cut(sys: AffineSystem, geom: SystemGeometry, p: Polytope, f: Face,
                eps: Optional[float] = None,
                analysis: Optional[ReachAnalysis] = None,
                tol: float = TOL_GEOM) -> EpsilonCut:
    """Remove both failure sets with margin ``eps``.

    The low-end failure is cut along a tilted hyperplane pivoting on the
    target at its lowest drift level; the equilibrium failure on the top
    face is cut along a drift-level plane.  Either cut is skipped when
    its failure set is empty; with no failure sets the polytope comes
    back whole.
    """
    if analysis is None:
        analysis = analyze(sys, geom, p, f, tol)
    if eps is None:
        eps = default_eps(geom, p)
    if eps <= 0:
        raise ValueError("eps must be positive")

    beta = geom.beta
    reach = p
    a_eps_minus = Polytope.empty(p.n)
    a_eps_plus = Polytope.empty(p.n)
    planes: list[Hyperplane] = []

    # total failure: the target sits on the top drift level, so no
    # full-dimensional subset can reach it and nothing remains after
    # removing the failure set
    lvl_minus = float(beta @ analysis.v_minus)
    beta_max = float((p.vertices @ beta).max())
    if not analysis.a_minus.is_empty and lvl_minus >= beta_max - max(tol, 1e-9):
        return EpsilonCut(float(eps), p, Polytope.empty(p.n), Polytope.empty(p.n), ())

    if not analysis.a_minus.is_empty:
        plane, sign = _cut_low_failure(p, f, geom, analysis, eps, tol)
        lo, hi = split_by_hyperplane(reach, plane, tol)
        a_eps_minus, reach = (hi, lo) if sign > 0 else (lo, hi)
        planes.append(plane)

    if not analysis.a_plus.is_empty:
        beta_max = float((p.vertices @ beta).max())
        lvl_plus = float(beta @ analysis.v_plus)
        cut_level = beta_max - eps
        if cut_level <= lvl_plus + max(tol, 1e-9):
            raise EpsTooLarge("margin would cut into the target's top level")
        plane = Hyperplane(beta, cut_level)
        lo, hi = split_by_hyperplane(reach, plane, tol)
        reach, a_eps_plus = lo, hi
        planes.append(plane)

    if reach.is_empty or not reach.is_full_dim:
        raise EpsTooLarge("nothing full-dimensional remains after the cuts")
    for v in f.vertices:
        if not reach.contains(v, max(tol, 1e-7)):
            raise EpsTooLarge("cut removed part of the target")
    return EpsilonCut(float(eps), a_eps_minus, a_eps_plus, reach, tuple(planes))


def reach_eps_pair(sys: AffineSystem, geom: SystemGeometry, p: Polytope,
                   f1: Face, f2: Face, eps: float,
                   tol: float = TOL_GEOM) -> tuple[EpsilonCut, EpsilonCut, bool]:
    """Margin-cut reach sets for two boundary targets, plus a flag telling
    whether the two sets jointly cover the polytope."""
    both = np.vstack([f1.vertices, f2.vertices])
    if affine_dimension(both, tol) < p.n:
        raise CommonHyperplane("targets lie on a common hyperplane")
    cut1 = epsilon_cut(sys, geom, p, f1, eps, tol=tol)
    cut2 = epsilon_cut(sys, geom, p, f2, eps, tol=tol)
    planes = list(cut1.cut_planes) + list(cut2.cut_planes)
    gap = uncovered_volume(p, [cut1.reach_eps, cut2.reach_eps], planes, tol)
    covers = gap <= 1e-8 * max(p.volume(), 1.0)
    if covers:
        covers = all(cut1.reach_eps.contains(v, 1e-7) or cut2.reach_eps.contains(v, 1e-7)
                     for v in p.vertices)
    return cut1, cut2, covers
