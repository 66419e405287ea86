"""Piecewise-affine feedback synthesis.

Vertex controls are found by a max-slack LP over the blocking conditions
at each simplex vertex (with the constructive procedure from the
reachability proof as fallback and cross-check), interpolated into an
affine law per simplex, and assembled over a triangulation ordered by a
greedy pass that always finishes the lowest-drift exit facet first.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import lp
from .errors import (AssumptionViolated, CaseViolation, Infeasible,
                     NotReachable, SingularVertexMatrix, Stuck,
                     SynthesisFailed, VStarInFbar)
from .geometry import (TOL_GEOM, Face, Polytope, Simplex, lex_sorted,
                       point_in_hull)
from .reach import analyze, default_eps, epsilon_cut
from .system import (AffineSystem, SystemGeometry, check_assumptions,
                     compute_geometry)
from .triangulate import (Cover, Triangulation, basic_triangulation,
                          cover_wrt_F, cover_wrt_O, mark_target,
                          qualifying_vertices, select_vstar, split_far_case,
                          triangulation_wrt_F)

TOL_INV = 1e-8      # invariance residual tolerance
SLACK_MIN = 1e-6    # margin standing in for strict inequalities


@dataclass(frozen=True)
class VertexControls:
    u: np.ndarray      # (n+1, m), row i is the control at vertex i
    slack: float       # certified margin of the blocking conditions


@dataclass
class AffinePiece:
    """One affine law u = gain x + offset on a simplex region."""

    region: Simplex
    gain: np.ndarray
    offset: np.ndarray
    exit_facet: int
    path_len: int = 0
    slack: float = 0.0
    exit_margin: float = 0.0
    rank: tuple = ()
    sub_rank: int = 0
    index: int = 0

    def control(self, x) -> np.ndarray:
        return self.gain @ np.asarray(x, dtype=float) + self.offset

    def closed_loop(self, sys: AffineSystem) -> tuple[np.ndarray, np.ndarray]:
        return sys.A + sys.B @ self.gain, sys.a + sys.B @ self.offset


class PWAController:
    """Piecewise-affine feedback over simplex regions.

    On overlaps the lookup prefers pieces closer to the original target:
    lower cover rank first, then shorter path, then fixed index order.
    """

    def __init__(self, pieces: list[AffinePiece], domain: Polytope, notes=()):
        self.pieces = list(pieces)
        self.domain = domain
        self.notes = list(notes)
        for k, piece in enumerate(self.pieces):
            piece.index = k

    def lookup(self, x, tol: float = 1e-7) -> Optional[AffinePiece]:
        x = np.asarray(x, dtype=float)
        best = None
        best_key = None
        for piece in self.pieces:
            if piece.region.contains(x, tol):
                key = (piece.rank, piece.path_len, piece.sub_rank, piece.index)
                if best_key is None or key < best_key:
                    best, best_key = piece, key
        return best

    def control(self, x, tol: float = 1e-7) -> Optional[np.ndarray]:
        piece = self.lookup(x, tol)
        return None if piece is None else piece.control(x)


# ---------------------------------------------------------------------------
# vertex controls
# ---------------------------------------------------------------------------

def _blocking_rows(sys: AffineSystem, s: Simplex, i: int, exit_facet: int):
    """LP rows forcing the field at vertex i inward across every facet
    except the exit and the vertex's own opposite facet."""
    drift = sys.drift(s.vertices[i])
    G, h = [], []
    for j in range(s.n + 1):
        if j == i or j == exit_facet:
            continue
        G.append(s.normals[j] @ sys.B)
        h.append(-float(s.normals[j] @ drift))
    return np.array(G), np.array(h)


def vertex_controls_lp(sys: AffineSystem, s: Simplex, exit_facet: int,
                       outflow: bool = True) -> VertexControls:
    """Per-vertex max-slack controls for the blocking conditions.

    With ``outflow`` the exit facet's vertices are also pushed outward
    across the exit at the same margin when feasible; the plain problem is
    solved otherwise.
    """
    nv = s.n + 1
    us = np.zeros((nv, sys.m))
    slack = np.inf
    for i in range(nv):
        G, h = _blocking_rows(sys, s, i, exit_facet)
        tried = []
        if outflow and i != exit_facet:
            drift = sys.drift(s.vertices[i])
            Ge = np.vstack([G, -(s.normals[exit_facet] @ sys.B)[None, :]])
            he = np.concatenate([h, [float(s.normals[exit_facet] @ drift)]])
            tried.append((Ge, he))
        tried.append((G, h))
        got = None
        for Gi, hi in tried:
            if len(Gi) == 0:
                got = (np.inf, np.zeros(sys.m))
                break
            t, u = lp.max_slack_feasibility(Gi, hi)
            if t >= SLACK_MIN:
                got = (t, u)
                break
            if got is None or t > got[0]:
                got = (t, u)
        t, u = got
        if t < -lp.TOL_LP:
            raise Infeasible(i)
        us[i] = u
        slack = min(slack, t)
    return VertexControls(us, float(slack))


def _solve_direction(sys: AffineSystem, vi: np.ndarray, target_dir: np.ndarray):
    """Solve drift(vi) + B u = lam * target_dir for (u, lam)."""
    M = np.hstack([-sys.B, target_dir[:, None]])
    if abs(np.linalg.det(M)) <= 1e-12:
        raise CaseViolation("aim direction lies in the input span")
    sol = np.linalg.solve(M, sys.drift(vi))
    return sol[:-1], float(sol[-1])


def _input_solve(sys: AffineSystem, rhs: np.ndarray) -> np.ndarray:
    u, res, *_ = np.linalg.lstsq(sys.B, rhs, rcond=None)
    if np.linalg.norm(sys.B @ u - rhs) > 1e-8:
        raise CaseViolation("required field is outside the input span")
    return u


def vertex_controls_constructive(sys: AffineSystem, geom: SystemGeometry,
                                 s: Simplex, exit_facet: int,
                                 tol: float = TOL_GEOM) -> VertexControls:
    """Controls from the constructive case split: vertices off the
    equilibrium plane aim at an interior point (or along the apex
    direction at the lowest drift level); vertices on the plane move
    within the input span toward a same-level point, or along the unique
    direction pushed uniformly inward across all blocked facets."""
    beta = geom.beta
    nv = s.n + 1
    verts = s.vertices
    apex = verts[exit_facet]
    exit_ids = [j for j in range(nv) if j != exit_facet]
    exit_levels = np.array([beta @ verts[j] for j in exit_ids])
    w_minus = verts[exit_ids[int(np.argmin(exit_levels))]]
    w_plus = verts[exit_ids[int(np.argmax(exit_levels))]]
    lvl_minus, lvl_plus = float(exit_levels.min()), float(exit_levels.max())
    lvl_apex = float(beta @ apex)
    centroid = verts.mean(axis=0)

    def aim_below(level: float) -> np.ndarray:
        # interior point with drift level strictly below the bound,
        # walking from the centroid toward the lowest exit vertex
        for t in (0.0, 0.25, 0.5, 0.75, 0.9):
            cand = centroid + t * (w_minus - centroid)
            if float(beta @ cand) < level - max(tol, 1e-9):
                return cand
        raise CaseViolation("no interior aim point below the required level")

    us = np.zeros((nv, sys.m))
    for i in range(nv):
        vi = verts[i]
        on_plane = abs(float(beta @ sys.drift(vi))) <= max(tol, 1e-9)
        lvl_i = float(beta @ vi)
        if not on_plane:
            if lvl_i > lvl_minus + max(tol, 1e-9):
                u, lam = _solve_direction(sys, vi, aim_below(lvl_i) - vi)
            elif lvl_i >= lvl_minus - max(tol, 1e-9):
                if lvl_apex <= lvl_minus + max(tol, 1e-9):
                    raise CaseViolation("apex not above the lowest exit level")
                u, lam = _solve_direction(sys, vi, aim_below(lvl_apex) - apex)
            else:
                raise CaseViolation("vertex below the lowest exit level")
            if lam <= 0:
                raise CaseViolation("aim direction points against the drift")
            us[i] = u
        else:
            if lvl_plus + max(tol, 1e-9) >= lvl_apex >= lvl_minus - max(tol, 1e-9):
                if lvl_plus - lvl_minus <= max(tol, 1e-9):
                    p_prime = w_minus
                else:
                    t = (lvl_apex - lvl_minus) / (lvl_plus - lvl_minus)
                    p_prime = w_minus + np.clip(t, 0.0, 1.0) * (w_plus - w_minus)
                if np.linalg.norm(p_prime - apex) <= tol:
                    raise CaseViolation("no same-level aim point distinct from the apex")
                us[i] = _input_solve(sys, (p_prime - apex) - sys.drift(vi))
            elif lvl_apex > lvl_plus + max(tol, 1e-9):
                rows = [beta]
                rhs = [0.0]
                for j in range(nv):
                    if j in (i, exit_facet):
                        continue
                    rows.append(s.normals[j])
                    rhs.append(-1.0)
                M = np.array(rows)
                if abs(np.linalg.det(M)) <= 1e-12:
                    raise CaseViolation("facet normals degenerate with the drift normal")
                y = np.linalg.solve(M, np.array(rhs))
                us[i] = _input_solve(sys, y - sys.drift(vi))
            else:
                raise CaseViolation("apex below the lowest exit level")

    slack = invariance_margin(sys, s, VertexControls(us, 0.0), exit_facet)
    return VertexControls(us, slack)


def invariance_margin(sys: AffineSystem, s: Simplex, vc: VertexControls,
                      exit_facet: int) -> float:
    """Smallest inward margin over all blocked (vertex, facet) pairs."""
    worst = np.inf
    for i in range(s.n + 1):
        fld = sys.field(s.vertices[i], vc.u[i])
        for j in range(s.n + 1):
            if j == i or j == exit_facet:
                continue
            worst = min(worst, -float(s.normals[j] @ fld))
    return worst


def exit_margin(sys: AffineSystem, s: Simplex, vc: VertexControls,
                exit_facet: int) -> float:
    """Smallest outward component across the exit facet at its vertices."""
    worst = np.inf
    for i in range(s.n + 1):
        if i == exit_facet:
            continue
        fld = sys.field(s.vertices[i], vc.u[i])
        worst = min(worst, float(s.normals[exit_facet] @ fld))
    return worst


def affine_from_vertex_controls(s: Simplex, vc: VertexControls) -> tuple[np.ndarray, np.ndarray]:
    """Unique affine law matching the vertex controls."""
    nv = s.n + 1
    M = np.vstack([s.vertices.T, np.ones((1, nv))])
    if abs(np.linalg.det(M)) <= 1e-14:
        raise SingularVertexMatrix("simplex vertex matrix is singular")
    sol = vc.u.T @ np.linalg.inv(M)
    gain, offset = sol[:, :-1], sol[:, -1]
    resid = max(np.linalg.norm(gain @ v + offset - u) for v, u in zip(s.vertices, vc.u))
    if resid > 1e-9:
        raise SingularVertexMatrix(f"interpolation residual {resid:.2e}")
    return gain, offset


def check_no_equilibrium(sys: AffineSystem, s: Simplex, gain: np.ndarray,
                         offset: np.ndarray, tol: float = TOL_GEOM) -> bool:
    """True when the closed loop has no stationary point in the simplex."""
    A_cl = sys.A + sys.B @ gain
    b_cl = sys.a + sys.B @ offset
    scale = max(np.abs(A_cl).max(), 1.0)
    if abs(np.linalg.det(A_cl)) > 1e-12 * scale ** s.n:
        x_star = np.linalg.solve(A_cl, -b_cl)
        return not s.contains(x_star, tol)
    # singular closed loop: stationary set is an affine subspace
    out = lp.solve_lp(np.zeros(s.n), s.normals, s.offsets, A_cl, -b_cl)
    return out.status != lp.OPTIMAL


# ---------------------------------------------------------------------------
# simplex synthesis
# ---------------------------------------------------------------------------

def _single_affine_piece(sys: AffineSystem, geom: SystemGeometry, s: Simplex,
                         exit_facet: int) -> AffinePiece:
    errors = []
    for maker in (lambda: vertex_controls_lp(sys, s, exit_facet),
                  lambda: vertex_controls_constructive(sys, geom, s, exit_facet)):
        try:
            vc = maker()
        except (Infeasible, CaseViolation) as exc:
            errors.append(str(exc))
            continue
        margin = invariance_margin(sys, s, vc, exit_facet)
        if margin < -TOL_INV:
            errors.append(f"blocking margin {margin:.2e}")
            continue
        gain, offset = affine_from_vertex_controls(s, vc)
        if not check_no_equilibrium(sys, s, gain, offset):
            errors.append("closed-loop stationary point inside the simplex")
            continue
        return AffinePiece(s, gain, offset, exit_facet,
                           slack=float(margin),
                           exit_margin=exit_margin(sys, s, vc, exit_facet))
    raise SynthesisFailed({"simplex": s.vertices.tolist(),
                           "exit_facet": exit_facet, "errors": errors})


def synth_simplex(sys: AffineSystem, geom: SystemGeometry, s: Simplex,
                  exit_facet: int, tol: float = TOL_GEOM) -> list[AffinePiece]:
    """Feedback for one simplex exiting through the given facet.

    Normally a single affine piece; when the apex sits above the whole
    exit facet and that facet lies on the equilibrium plane, the simplex
    is split at an intermediate drift level into two pieces: the upper one
    drains through the fresh interior facet, the lower one exits."""
    beta = geom.beta
    nv = s.n + 1
    apex = s.vertices[exit_facet]
    exit_ids = [j for j in range(nv) if j != exit_facet]
    levels = np.array([beta @ s.vertices[j] for j in exit_ids])
    lvl_minus, lvl_plus = float(levels.min()), float(levels.max())
    lvl_apex = float(beta @ apex)
    exit_on_plane = all(abs(float(beta @ sys.drift(s.vertices[j]))) <= max(tol, 1e-8)
                        for j in exit_ids)

    if lvl_apex > lvl_plus + max(tol, 1e-9) and exit_on_plane:
        # split at the drift midlevel of the exit facet
        w_minus_id = exit_ids[int(np.argmin(levels))]
        w_minus = s.vertices[w_minus_id]
        mid = 0.5 * (lvl_minus + lvl_plus)
        t = (mid - lvl_minus) / (lvl_apex - lvl_minus)
        v_prime = w_minus + t * (apex - w_minus)

        # the upper sub-simplex keeps the apex and exits through the fresh
        # facet (opposite the apex); the lower one keeps the original exit
        up_verts = s.vertices.copy()
        up_verts[w_minus_id] = v_prime
        upper = Simplex(up_verts)
        lo_verts = s.vertices.copy()
        lo_verts[exit_facet] = v_prime
        lower = Simplex(lo_verts)

        lower_piece = _single_affine_piece(sys, geom, lower, exit_facet)
        upper_piece = _single_affine_piece(sys, geom, upper, exit_facet)
        lower_piece.sub_rank = 0
        upper_piece.sub_rank = 1
        return [lower_piece, upper_piece]

    return [_single_affine_piece(sys, geom, s, exit_facet)]


# ---------------------------------------------------------------------------
# greedy path generation
# ---------------------------------------------------------------------------

@dataclass
class GreedyResult:
    order: list[int]
    exit_facet: dict[int, int]
    path_len: dict[int, int]
    successor: dict[int, int]          # -1 stands for the target itself
    w_levels: list[float]


def _facet_index(s: Simplex, face_vertices: np.ndarray) -> int:
    keys = {tuple(np.round(v, 9)) for v in face_vertices}
    for j in range(s.n + 1):
        base = np.delete(s.vertices, j, axis=0)
        if {tuple(np.round(v, 9)) for v in base} == keys:
            return j
    raise ValueError("face is not a facet of the simplex")


def greedy_paths(tri: Triangulation, geom: SystemGeometry, f: Face,
                 tol: float = TOL_GEOM) -> GreedyResult:
    """Order the simplices so each one exits into an already-finished
    neighbor, always picking the pair whose shared facet has the lowest
    drift level (ties: most facet vertices at that level, then index)."""
    beta = geom.beta
    q = len(tri.simplices)
    unfinished = set(range(q))
    finished: set[int] = set()
    result = GreedyResult([], {}, {}, {}, [])

    def facet_stats(face_vertices: np.ndarray) -> tuple[float, int]:
        lv = face_vertices @ beta
        lo = float(lv.min())
        return lo, int(np.sum(np.abs(lv - lo) <= max(tol, 1e-9)))

    while unfinished:
        best = None
        best_key = None
        for i in sorted(unfinished):
            s = tri.simplices[i]
            if i in tri.target_indices:
                for j in range(s.n + 1):
                    base = np.delete(s.vertices, j, axis=0)
                    if all(point_in_hull(v, f.vertices, max(tol, 1e-8)) for v in base):
                        lo, cnt = facet_stats(base)
                        key = (lo, -cnt, i, -1)
                        if best_key is None or key < best_key:
                            best, best_key = (i, -1, j), key
                        break
            for j, face in tri.neighbors(i):
                if j not in finished:
                    continue
                lo, cnt = facet_stats(face.vertices)
                key = (lo, -cnt, i, j)
                if best_key is None or key < best_key:
                    best, best_key = (i, j, _facet_index(tri.simplices[i], face.vertices)), key
        if best is None:
            raise Stuck(sorted(unfinished))
        i, j, facet_id = best
        unfinished.remove(i)
        finished.add(i)
        result.order.append(i)
        result.exit_facet[i] = facet_id
        result.successor[i] = j
        result.path_len[i] = 1 if j == -1 else result.path_len[j] + 1
        result.w_levels.append(best_key[0])
    return result


# ---------------------------------------------------------------------------
# whole-polytope synthesis
# ---------------------------------------------------------------------------

def _is_facet_of(p: Polytope, f: Face, tol: float = TOL_GEOM) -> bool:
    fkeys = {tuple(np.round(v, 7)) for v in f.vertices}
    for face in p.facets():
        keys = {tuple(np.round(v, 7)) for v in face.vertices}
        if keys == fkeys:
            return True
    return False


def _rerank(pieces: list[AffinePiece], base: int) -> list[AffinePiece]:
    return [replace_rank(piece, (base,) + piece.rank) for piece in pieces]


def replace_rank(piece: AffinePiece, rank: tuple) -> AffinePiece:
    piece.rank = rank
    return piece


def synth_polytope(sys: AffineSystem, p: Polytope, f: Face,
                   eps: Optional[float] = None,
                   tol: float = TOL_GEOM) -> PWAController:
    """End-to-end synthesis: handle an equilibrium plane crossing the
    interior by covering, cut failure sets off with a margin, dispatch on
    whether the target is a facet, triangulate, order greedily, and emit
    one affine law per simplex (two where a split is needed)."""
    rep = check_assumptions(sys, p, f, tol)
    if not (rep.a1_input_rank and rep.a2_controllable and rep.a4_target_valid):
        raise AssumptionViolated(rep)

    if not rep.a3_interior_clear:
        cover = cover_wrt_O(sys, p, f, eps, tol)
        pieces: list[AffinePiece] = []
        notes = ["covered along the equilibrium plane"]
        for k, cp in enumerate(cover.pieces):
            sub = synth_polytope(sys, cp.polytope, cp.target, eps, tol)
            base = 0 if cp.role == "target" else 1
            pieces.extend(_rerank(sub.pieces, base))
            notes.extend(sub.notes)
        return PWAController(pieces, p, notes)

    geom = compute_geometry(sys, p, tol)
    ra = analyze(sys, geom, p, f, tol)
    if not ra.reachable:
        cut = epsilon_cut(sys, geom, p, f, eps, analysis=ra, tol=tol)
        if cut.reach_eps.is_empty or not cut.reach_eps.is_full_dim:
            raise NotReachable(ra)
        sub = synth_polytope(sys, cut.reach_eps, f, eps, tol)
        sub.notes.insert(0, f"failure sets cut off with margin {cut.eps:g}")
        return sub

    if _is_facet_of(p, f, tol):
        vstar = select_vstar(p, f, geom, tol)
        tri = basic_triangulation(p, vstar, tol)
        mark_target(tri, f, tol)
    else:
        # non-facet target: prefer an anchor clear of the carrying facet,
        # then a cover pivoting on a top-face target vertex, and finally
        # the far split
        fbar = None
        for face in p.facets():
            if all(abs(face.supporting.value(v)) <= max(tol, 1e-7) for v in f.vertices):
                fbar = face
                break
        if fbar is None:
            raise AssumptionViolated(rep, "target does not lie in a facet")
        quals = qualifying_vertices(p, f, geom, tol)
        off_fbar = [v for v in quals if abs(fbar.supporting.value(v)) > max(tol, 1e-8)]
        if off_fbar:
            tri = triangulation_wrt_F(p, f, off_fbar[0], tol)
        else:
            levels = p.vertices @ geom.beta
            top_level = float(levels.max())
            touching = any(abs(float(geom.beta @ v) - top_level) <= max(tol, 1e-8)
                           for v in f.vertices)
            if touching:
                cover = cover_wrt_F(p, f, geom, tol)
                pieces = []
                notes = ["covered around the non-facet target"]
                for cp in cover.pieces:
                    sub = synth_polytope(sys, cp.polytope, cp.target, eps, tol)
                    base = 0 if cp.role == "target" else 1
                    pieces.extend(_rerank(sub.pieces, base))
                    notes.extend(sub.notes)
                return PWAController(pieces, p, notes)
            fs = split_far_case(p, f, geom, tol)
            sub1 = synth_polytope(sys, fs.p1, f, eps, tol)
            sub2 = synth_polytope(sys, fs.p2, fs.interface, eps, tol)
            pieces = _rerank(sub1.pieces, 0) + _rerank(sub2.pieces, 1)
            return PWAController(pieces, p, ["split away from the far target"]
                                 + sub1.notes + sub2.notes)

    greedy = greedy_paths(tri, geom, f, tol)
    pieces = []
    for i in greedy.order:
        for piece in synth_simplex(sys, geom, tri.simplices[i], greedy.exit_facet[i], tol):
            piece.path_len = greedy.path_len[i]
            pieces.append(piece)
    return PWAController(pieces, p)
