"""Closed-loop integration with boundary-event detection, and sampled
verification of synthesized controllers."""

from __future__ import annotations

import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import Face, Polytope, point_in_hull
from .synth import AffinePiece, PWAController
from .system import AffineSystem

TOL_SIM = 1e-6
_EVENT_TIME_TOL = 1e-10

REACHED = "reached_target"
LEFT = "left_domain"
TIMEOUT = "timeout"
GAP = "controller_gap"


@dataclass(frozen=True)
class Outcome:
    kind: str
    time: float
    facet: Optional[int] = None


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    piece_ids: np.ndarray
    outcome: Outcome
    max_violation: float = 0.0
    chattering: bool = False

    @property
    def success(self) -> bool:
        return self.outcome.kind == REACHED


def _rk4_step(A_cl: np.ndarray, b_cl: np.ndarray, x: np.ndarray, h: float) -> np.ndarray:
    k1 = A_cl @ x + b_cl
    k2 = A_cl @ (x + 0.5 * h * k1) + b_cl
    k3 = A_cl @ (x + 0.5 * h * k2) + b_cl
    k4 = A_cl @ (x + h * k3) + b_cl
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def default_dt(sys: AffineSystem, ctrl: PWAController) -> float:
    """Step scaled to cross the domain in about a thousand steps at the
    fastest vertex speed."""
    lo, hi = ctrl.domain.bounding_box()
    extent = float(np.linalg.norm(hi - lo))
    vmax = 0.0
    for piece in ctrl.pieces:
        for v in piece.region.vertices:
            vmax = max(vmax, float(np.linalg.norm(sys.field(v, piece.control(v)))))
    return 1e-3 * extent / max(vmax, 1e-9)


def integrate(sys: AffineSystem, ctrl: PWAController, x0, dt: Optional[float] = None,
              tmax: Optional[float] = None, f: Optional[Face] = None,
              domain: Optional[Polytope] = None) -> Trajectory:
    """Fixed-step closed-loop run with the active piece re-resolved every
    step; the first boundary crossing is bisected in time and classified
    as reaching the target or leaving the domain.

    A state with no containing piece ends the run with a gap outcome
    rather than extrapolating.
    """
    domain = domain if domain is not None else ctrl.domain
    if dt is None:
        dt = default_dt(sys, ctrl)
    if tmax is None:
        lo, hi = domain.bounding_box()
        tmax = 1e4 * dt * max(1.0, float(np.linalg.norm(hi - lo)))
    x = np.asarray(x0, dtype=float).copy()
    normals = np.array([h.normal for h in domain.halfspaces])
    offs = np.array([h.offset for h in domain.halfspaces])

    def violation(state):
        return float((normals @ state - offs).max())

    def on_target(state):
        return f is not None and point_in_hull(state, f.vertices, 1e-6)

    times, states, controls, ids = [0.0], [x.copy()], [], []
    max_viol = max(violation(x), 0.0)
    switches: list[int] = []
    chattering = False

    if on_target(x):
        piece = ctrl.lookup(x, TOL_SIM)
        controls.append(piece.control(x) if piece else np.zeros(sys.m))
        ids.append(piece.index if piece else -1)
        return Trajectory(np.array(times), np.array(states), np.array(controls),
                          np.array(ids), Outcome(REACHED, 0.0), max_viol)

    t = 0.0
    last_piece = None
    while t < tmax:
        piece = ctrl.lookup(x, TOL_SIM)
        if piece is None:
            controls.append(np.zeros(sys.m))
            ids.append(-1)
            return Trajectory(np.array(times), np.array(states), np.array(controls),
                              np.array(ids), Outcome(GAP, t), max_viol, chattering)
        if last_piece is not None and piece.index != last_piece:
            switches.append(len(times))
            recent = [s for s in switches if s > len(times) - 10]
            if len(recent) > 10:
                chattering = True
        last_piece = piece.index
        A_cl, b_cl = piece.closed_loop(sys)
        controls.append(piece.control(x))
        ids.append(piece.index)

        h = min(dt, tmax - t)
        x_new = _rk4_step(A_cl, b_cl, x, h)
        if violation(x_new) > TOL_SIM:
            # bisect the first crossing time within this step
            lo_t, hi_t = 0.0, h
            while hi_t - lo_t > _EVENT_TIME_TOL:
                mid = 0.5 * (lo_t + hi_t)
                if violation(_rk4_step(A_cl, b_cl, x, mid)) > 0.0:
                    hi_t = mid
                else:
                    lo_t = mid
            x_exit = _rk4_step(A_cl, b_cl, x, hi_t)
            t_exit = t + hi_t
            times.append(t_exit)
            states.append(x_exit.copy())
            controls.append(piece.control(x_exit))
            ids.append(piece.index)
            if on_target(x_exit):
                out = Outcome(REACHED, t_exit)
            else:
                facet = int(np.argmax(normals @ x_exit - offs))
                out = Outcome(LEFT, t_exit, facet)
            return Trajectory(np.array(times), np.array(states), np.array(controls),
                              np.array(ids), out, max_viol, chattering)
        t += h
        x = x_new
        max_viol = max(max_viol, violation(x))
        times.append(t)
        states.append(x.copy())
        if on_target(x):
            return Trajectory(np.array(times), np.array(states),
                              np.array(controls + [piece.control(x)]),
                              np.array(ids + [piece.index]),
                              Outcome(REACHED, t), max_viol, chattering)
    controls.append(np.zeros(sys.m))
    ids.append(-1)
    return Trajectory(np.array(times), np.array(states), np.array(controls),
                      np.array(ids), Outcome(TIMEOUT, t), max_viol, chattering)


@dataclass
class VerifyReport:
    nsamples: int
    successes: int
    outcomes: list[str]
    times: list[float]
    max_violation: float
    failures: list[int]
    seed: int

    @property
    def success_fraction(self) -> float:
        return self.successes / self.nsamples if self.nsamples else 0.0

    @property
    def max_time(self) -> float:
        return max(self.times) if self.times else 0.0

    @property
    def mean_time(self) -> float:
        return float(np.mean(self.times)) if self.times else 0.0

    def to_dict(self) -> dict:
        return {
            "nsamples": self.nsamples,
            "successes": self.successes,
            "success_fraction": self.success_fraction,
            "max_time_to_target": self.max_time,
            "mean_time_to_target": self.mean_time,
            "max_violation_depth": self.max_violation,
            "failure_indices": self.failures,
            "outcomes": self.outcomes,
            "seed": self.seed,
        }


def sample_states(p: Polytope, nsamples: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform rejection sampling inside the polytope's bounding box."""
    lo, hi = p.bounding_box()
    normals = np.array([h.normal for h in p.halfspaces])
    offs = np.array([h.offset for h in p.halfspaces])
    out = []
    while len(out) < nsamples:
        batch = rng.uniform(lo, hi, size=(max(64, 4 * nsamples), p.n))
        inside = np.all(batch @ normals.T - offs <= -1e-9, axis=1)
        out.extend(batch[inside][: nsamples - len(out)])
    return np.array(out)


def verify(sys: AffineSystem, ctrl: PWAController, p: Polytope, f: Face,
           nsamples: int = 100, seed: int = 0, dt: Optional[float] = None,
           tmax: Optional[float] = None) -> VerifyReport:
    """Sampled closed-loop verification over the controller's domain.

    Deterministic for a fixed seed; REACHCTL_THREADS > 1 runs samples on a
    thread pool (results are ordered by sample index either way).
    """
    if nsamples <= 0:
        return VerifyReport(0, 0, [], [], 0.0, [], seed)
    rng = np.random.default_rng(seed)
    starts = sample_states(p, nsamples, rng)

    def run(i: int) -> Trajectory:
        return integrate(sys, ctrl, starts[i], dt, tmax, f, p)

    threads = int(os.environ.get("REACHCTL_THREADS", "1") or "1")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trajs = list(pool.map(run, range(nsamples)))
    else:
        trajs = [run(i) for i in range(nsamples)]

    outcomes = [tr.outcome.kind for tr in trajs]
    successes = sum(tr.success for tr in trajs)
    times = [tr.outcome.time for tr in trajs if tr.success]
    max_viol = max((tr.max_violation for tr in trajs), default=0.0)
    failures = [i for i, tr in enumerate(trajs) if not tr.success]
    return VerifyReport(nsamples, successes, outcomes, times, max_viol, failures, seed)


def trajectory_to_csv(traj: Trajectory, sys: AffineSystem) -> str:
    """Rows of (t, state..., control..., piece id)."""
    n, m = sys.n, sys.m
    buf = io.StringIO()
    cols = ["t"] + [f"x{i+1}" for i in range(n)] + [f"u{i+1}" for i in range(m)] + ["piece"]
    buf.write(",".join(cols) + "\n")
    k = len(traj.times)
    for i in range(k):
        u = traj.controls[i] if i < len(traj.controls) else np.zeros(m)
        pid = traj.piece_ids[i] if i < len(traj.piece_ids) else -1
        row = [f"{traj.times[i]:.17g}"]
        row += [f"{v:.17g}" for v in traj.states[i]]
        row += [f"{v:.17g}" for v in np.atleast_1d(u)]
        row.append(str(int(pid)))
        buf.write(",".join(row) + "\n")
    return buf.getvalue()
