"""Shared fixtures and independent oracles for the test suite."""

import itertools

import numpy as np
from scipy.linalg import expm

from reachctl import geometry as geo
from reachctl.system import AffineSystem, compute_geometry

VIOL_TOL = 1e-6


def double_integrator():
    return AffineSystem(A=[[0.0, 1.0], [0.0, 0.0]], a=[0.0, 0.0], B=[[0.0], [1.0]])


def face_from(points):
    return geo.Face.from_vertices(np.asarray(points, dtype=float))


def facet_face(p, normal):
    """Facet of p whose outward normal matches ``normal``."""
    normal = np.asarray(normal, dtype=float)
    normal = normal / np.linalg.norm(normal)
    for face in p.facets():
        if np.allclose(face.supporting.normal, normal, atol=1e-9):
            return face
    raise AssertionError(f"no facet with normal {normal}")


# -- canonical fixtures ------------------------------------------------------

def box_fixture():
    """Upper-half box with the right edge as target: fully solvable."""
    p = geo.convex_hull([(0, 0), (2, 0), (2, 1), (0, 1)])
    return double_integrator(), p, facet_face(p, [1, 0])


def wedge_fixture():
    """Quadrilateral with both failure sets present: a solid block past
    the target's low end and a pinned corner on the equilibrium line."""
    p = geo.convex_hull([(0, 0), (3, 0), (2.5, 1), (1, 1)])
    f = face_from([(1, 1), (2.5, 1)])
    return double_integrator(), p, f


def pinned_corner_fixture():
    """Only the equilibrium corner fails (slanted edge is the target)."""
    p = geo.convex_hull([(0, 0), (3, 0), (2.5, 1), (1, 1)])
    f = face_from([(3, 0), (2.5, 1)])
    return double_integrator(), p, f


def two_target_fixture():
    """Neither target is reachable alone but their union is."""
    p = geo.convex_hull([(0, 0), (3, 0), (2, 1), (0.5, 1)])
    f1 = face_from([(2.5, 0.5), (3, 0)])
    f2 = face_from([(0, 0), (0.8, 0)])
    return double_integrator(), p, f1, f2


# -- exact affine stepping ---------------------------------------------------

def affine_stepper(A, dt):
    """Exact one-step map for dx/dt = A x + c with constant c:
    x(t+dt) = E x(t) + M c."""
    n = A.shape[0]
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = A
    aug[:n, n:] = np.eye(n)
    big = expm(aug * dt)
    return big[:n, :n], big[:n, n:]


# -- sampled open-loop reachability oracle (2-D) -----------------------------

def _segment_membership(f, tol=2e-3):
    a, b = f.vertices[0], f.vertices[-1]
    d = b - a
    L2 = float(d @ d)
    normal = np.array([-d[1], d[0]]) / np.sqrt(L2)

    def inside(pts, tol=tol):
        pts = np.atleast_2d(pts)
        t = (pts - a) @ d / L2
        dist = np.abs((pts - a) @ normal)
        return (t >= -tol) & (t <= 1 + tol) & (dist <= tol)

    return inside


def control_plans(u_values, horizons, switch_fracs=((1 / 3, 2 / 3),)):
    """Piecewise-constant three-segment plans: a value per segment from a
    grid, switch times from a grid of fractions of each horizon."""
    plans = []
    for T in horizons:
        for f1, f2 in switch_fracs:
            durs = (T * f1, T * (f2 - f1), T * (1 - f2))
            for vals in itertools.product(u_values, repeat=3):
                plans.append((durs, vals))
    return plans


def open_loop_reaches(sys, p, f, x0s, plans, dt=5e-3, viol_tol=VIOL_TOL):
    """For each start state, can any plan reach the target segment while
    staying inside the polytope (violation below tolerance)?

    All (plan, point) pairs advance in lockstep with the exact affine
    step; boundary crossings are located by linear interpolation inside a
    step.  Rows whose trajectory dies are compacted away periodically.
    """
    x0s = np.atleast_2d(np.asarray(x0s, dtype=float))
    npts = len(x0s)
    A_hs = np.array([h.normal for h in p.halfspaces])
    b_hs = np.array([h.offset for h in p.halfspaces])
    on_target = _segment_membership(f)
    Bvec = sys.B.ravel()

    reached = np.zeros(npts, dtype=bool)
    reached |= on_target(x0s, tol=1e-9)

    nplans = len(plans)
    # per-plan piecewise-constant control over a global step clock
    nsteps_plan = []
    for durs, _ in plans:
        nsteps_plan.append(int(round(sum(durs) / dt)))
    nsteps = max(nsteps_plan)
    u_of_plan = np.zeros((nplans, nsteps))
    ends = np.zeros(nplans, dtype=int)
    for i, (durs, vals) in enumerate(plans):
        k = 0
        for dur, u in zip(durs, vals):
            kk = int(round(dur / dt))
            u_of_plan[i, k:k + kk] = u
            k += kk
        ends[i] = k

    E, M = affine_stepper(sys.A, dt)
    Ma = M @ sys.a
    MB = M @ Bvec

    row_plan = np.repeat(np.arange(nplans), npts)
    row_pt = np.tile(np.arange(npts), nplans)
    x = x0s[row_pt].copy()
    vals_old = x @ A_hs.T - b_hs
    live = ~reached[row_pt]

    for k in range(nsteps):
        if k % 25 == 0:
            keep = live & ~reached[row_pt] & (k < ends[row_plan])
            if not keep.all():
                idx = np.flatnonzero(keep)
                if len(idx) == 0:
                    break
                row_plan, row_pt = row_plan[idx], row_pt[idx]
                x, vals_old = x[idx], vals_old[idx]
                live = live[idx]
        u = u_of_plan[row_plan, k]
        expired = k >= ends[row_plan]
        xn = x @ E.T + Ma + u[:, None] * MB
        vals_new = xn @ A_hs.T - b_hs
        worst = vals_new.max(axis=1)
        crossing = live & ~expired & (worst > viol_tol)
        if crossing.any():
            idx = np.flatnonzero(crossing)
            vo, vn = vals_old[idx], vals_new[idx]
            delta = vn - vo
            with np.errstate(divide="ignore", invalid="ignore"):
                tt = np.where((vn > viol_tol) & (delta > 1e-15), -vo / delta, np.inf)
            tstar = np.clip(tt.min(axis=1), 0.0, 1.0)
            exit_pts = x[idx] + tstar[:, None] * (xn[idx] - x[idx])
            hit = on_target(exit_pts)
            reached[row_pt[idx[hit]]] = True
            live[idx] = False
        adv = live & ~expired
        x[adv] = xn[adv]
        vals_old[adv] = vals_new[adv]
    return reached


_FULL_FRACS = ((0.05, 0.5), (0.1, 0.55), (1 / 3, 2 / 3), (0.15, 0.8), (0.25, 0.75), (0.5, 0.9))
COARSE_PLANS = control_plans((-50.0, -4.0, -1.0, 0.0, 1.0, 4.0, 50.0), (2.5,))
FULL_PLANS = control_plans((-50.0, -15.0, -4.0, -1.5, -0.5, 0.0, 0.5, 1.5, 4.0, 15.0, 50.0),
                           (2.5, 6.0), _FULL_FRACS)


def oracle_reaches(sys, p, f, x0s, full=False):
    x0s = np.atleast_2d(x0s)
    reached = open_loop_reaches(sys, p, f, x0s, COARSE_PLANS)
    if full and not reached.all():
        rest = np.flatnonzero(~reached)
        reached[rest] = open_loop_reaches(sys, p, f, x0s[rest], FULL_PLANS)
    return reached


def interior_grid(p, k=20, shrink=1e-3):
    """Points of a k-by-k bounding-box grid that lie inside p."""
    lo, hi = p.bounding_box()
    xs = np.linspace(lo[0], hi[0], k)
    ys = np.linspace(lo[1], hi[1], k)
    pts = np.array([(x, y) for x in xs for y in ys])
    c = p.centroid()
    pts = c + (pts - c) * (1.0 - shrink)
    A_hs = np.array([h.normal for h in p.halfspaces])
    b_hs = np.array([h.offset for h in p.halfspaces])
    inside = np.all(pts @ A_hs.T - b_hs <= -1e-9, axis=1)
    return pts[inside]
