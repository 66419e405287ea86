"""Affine control systems with (n-1)-dimensional input span, and the
geometry they induce: the drift-monotone direction, the input subspace,
and the plane of possible equilibria."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateO, SignAmbiguous
from .geometry import TOL_GEOM, Face, Hyperplane, Polytope

_RANK_REL_TOL = 1e-9


@dataclass(frozen=True)
class AffineSystem:
    """dx/dt = A x + a + B u."""

    A: np.ndarray
    a: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        a = np.asarray(self.a, dtype=float).ravel()
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        n = A.shape[0]
        if A.shape != (n, n) or a.shape != (n,) or B.shape[0] != n:
            raise ValueError("inconsistent system dimensions")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def drift(self, x) -> np.ndarray:
        return self.A @ np.asarray(x, dtype=float) + self.a

    def field(self, x, u) -> np.ndarray:
        return self.drift(x) + self.B @ np.asarray(u, dtype=float)

    def input_rank(self) -> int:
        s = np.linalg.svd(self.B, compute_uv=False)
        return int(np.sum(s > _RANK_REL_TOL * max(s[0], 1.0))) if len(s) else 0

    def controllability_rank(self) -> int:
        blocks = [self.B]
        M = self.B
        for _ in range(self.n - 1):
            M = self.A @ M
            blocks.append(M)
        C = np.hstack(blocks)
        s = np.linalg.svd(C, compute_uv=False)
        return int(np.sum(s > _RANK_REL_TOL * max(s[0], 1.0))) if len(s) else 0


@dataclass(frozen=True)
class SystemGeometry:
    """Derived geometry of a system on a polytope.

    ``beta`` is the unit normal to the input span, signed so the drift
    component beta.(A x + a) is <= 0 on the whole polytope.
    ``input_basis`` spans the input subspace (columns, orthonormal).
    ``equilibrium_plane`` is {x : beta.(A x + a) = 0}, the states where
    some input makes the field vanish.
    """

    beta: np.ndarray
    input_basis: np.ndarray
    equilibrium_plane: Hyperplane

    def beta_value(self, x) -> float:
        return float(self.beta @ np.asarray(x, dtype=float))

    def on_equilibrium_plane(self, x, tol: float = TOL_GEOM) -> bool:
        return self.equilibrium_plane.side(x, tol) == 0

    def input_plane_through(self, x) -> Hyperplane:
        """Translate of the input subspace passing through ``x``."""
        return Hyperplane(self.beta, float(self.beta @ np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class AssumptionReport:
    a1_input_rank: bool
    a2_controllable: bool
    a3_interior_clear: bool
    a4_target_valid: bool
    details: dict

    @property
    def ok(self) -> bool:
        return self.a1_input_rank and self.a2_controllable and self.a3_interior_clear and self.a4_target_valid

    def __str__(self) -> str:
        flags = [("A1", self.a1_input_rank), ("A2", self.a2_controllable),
                 ("A3", self.a3_interior_clear), ("A4", self.a4_target_valid)]
        return ", ".join(f"{k}={'pass' if v else 'FAIL'}" for k, v in flags)


def _unit_left_null_vector(B: np.ndarray) -> np.ndarray:
    u, s, vt = np.linalg.svd(B, full_matrices=True)
    return u[:, -1]


def interior_clear_of_equilibria(sys: AffineSystem, p: Polytope,
                                 tol: float = TOL_GEOM) -> bool:
    """True when the equilibrium plane does not cross the interior of p
    (it may touch the boundary)."""
    beta = _unit_left_null_vector(sys.B)
    vals = np.array([beta @ sys.drift(v) for v in p.vertices])
    return not (vals.min() < -tol and vals.max() > tol)


def check_assumptions(sys: AffineSystem, p: Polytope, f: Face,
                      tol: float = TOL_GEOM) -> AssumptionReport:
    """Flag the standing requirements for an instance: input rank n-1,
    controllability, equilibrium plane clear of the interior, and a
    target that is an (n-1)-dimensional polytope on the boundary."""
    n = sys.n
    details: dict = {}

    r = sys.input_rank()
    a1 = r == n - 1
    details["input_rank"] = r

    cr = sys.controllability_rank()
    a2 = cr == n
    details["controllability_rank"] = cr

    a3 = interior_clear_of_equilibria(sys, p, tol)

    a4 = True
    if f.dim != n - 1:
        a4 = False
        details["target_dim"] = f.dim
    else:
        on_boundary = all(p.contains(v, max(tol, 1e-8)) for v in f.vertices)
        if on_boundary and p.is_full_dim:
            # an (n-1)-dimensional convex subset of the boundary lies in a facet
            hit = False
            for h in p.halfspaces:
                if all(abs(h.value(v)) <= max(tol, 1e-7) for v in f.vertices):
                    hit = True
                    details["target_facet_normal"] = h.normal.tolist()
                    break
            on_boundary = hit
        if not on_boundary:
            a4 = False
            details["target_on_boundary"] = False

    return AssumptionReport(a1, a2, a3, a4, details)


def compute_geometry(sys: AffineSystem, p: Polytope,
                     tol: float = TOL_GEOM) -> SystemGeometry:
    """Signed drift normal, input-span basis and equilibrium plane for a
    system restricted to a polytope whose interior avoids the equilibria."""
    beta = _unit_left_null_vector(sys.B)
    vals = np.array([beta @ sys.drift(v) for v in p.vertices])
    if vals.max() > tol:
        if vals.min() < -tol:
            raise SignAmbiguous(
                "drift changes sign across the polytope; split along the equilibrium plane first")
        beta = -beta
    # deterministic orientation for the degenerate all-zero-drift case
    if np.abs(vals).max() <= tol:
        idx = np.argmax(np.abs(beta))
        if beta[idx] < 0:
            beta = -beta

    u, s, _ = np.linalg.svd(sys.B, full_matrices=False)
    rank = int(np.sum(s > _RANK_REL_TOL * max(s[0], 1.0)))
    basis = u[:, :rank]

    normal = beta @ sys.A
    if np.linalg.norm(normal) <= tol:
        raise DegenerateO("equilibrium set is not a hyperplane")
    plane = Hyperplane(normal, -float(beta @ sys.a))
    return SystemGeometry(beta, basis, plane)
