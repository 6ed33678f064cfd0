"""Small projected-gradient engine for concave maximization over the
intersection of a ball, halfspaces, and per-variable lower bounds, with an
optional log-barrier pass for smooth nonlinear constraints.

Every subproblem in this package has a handful of variables, so the engine
favors robustness and verifiability over speed: Dykstra projection onto the
constraint intersection, backtracking line search with a sufficient-increase
test, and a three-decade barrier schedule with warm starts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass
class BarrierTerm:
    """Smooth concave constraint g(x) >= 0 entering through a log barrier.

    `fn` returns (value, gradient).  `tol` is the residual allowed when the
    final point is validated (barriers stop strictly inside, but a caller
    may seed exactly on the boundary)."""

    fn: Callable[[np.ndarray], tuple[float, np.ndarray]]
    tol: float = 1e-9


@dataclass
class FeasibleSet:
    """Convex feasible region: optional ball, halfspaces a.x <= b, and
    per-variable lower bounds.  Nonlinear concave constraints ride along as
    barrier terms and do not participate in projection."""

    ball: tuple[np.ndarray, float] | None = None
    halfspaces: list[tuple[np.ndarray, float]] = field(default_factory=list)
    lower_bounds: np.ndarray | None = None
    barrier_terms: list[BarrierTerm] = field(default_factory=list)

    def _project_ball(self, x: np.ndarray) -> np.ndarray:
        center, radius = self.ball
        d = x - center
        norm = np.linalg.norm(d)
        if norm <= radius:
            return x
        return center + d * (radius / norm)

    def project(self, x: np.ndarray, max_cycles: int = 500, tol: float = 1e-12) -> np.ndarray:
        """Euclidean projection onto the linear part of the set (Dykstra)."""
        pieces: list[Callable[[np.ndarray], np.ndarray]] = []
        if self.ball is not None:
            pieces.append(self._project_ball)
        for a, b in self.halfspaces:
            nrm2 = float(np.dot(a, a))

            def proj_h(x, a=a, b=b, nrm2=nrm2):
                excess = float(np.dot(a, x)) - b
                if excess <= 0.0:
                    return x
                return x - (excess / nrm2) * a

            pieces.append(proj_h)
        if self.lower_bounds is not None:
            pieces.append(lambda x: np.maximum(x, self.lower_bounds))
        if not pieces:
            return np.asarray(x, dtype=float)
        if len(pieces) == 1:
            return pieces[0](np.asarray(x, dtype=float))

        x = np.asarray(x, dtype=float).copy()
        corrections = [np.zeros_like(x) for _ in pieces]
        for _ in range(max_cycles):
            x_prev = x.copy()
            for i, proj in enumerate(pieces):
                y = x + corrections[i]
                x_new = proj(y)
                corrections[i] = y - x_new
                x = x_new
            if np.linalg.norm(x - x_prev) < tol:
                break
        return x

    def linear_violation(self, x: np.ndarray) -> float:
        """Largest residual over ball, halfspaces, and lower bounds."""
        worst = 0.0
        if self.ball is not None:
            center, radius = self.ball
            worst = max(worst, float(np.linalg.norm(x - center)) - radius)
        for a, b in self.halfspaces:
            worst = max(worst, float(np.dot(a, x)) - b)
        if self.lower_bounds is not None:
            worst = max(worst, float(np.max(self.lower_bounds - x)))
        return worst

    def barrier_violation(self, x: np.ndarray) -> float:
        worst = 0.0
        for term in self.barrier_terms:
            val, _ = term.fn(x)
            worst = max(worst, -(val + term.tol))
        return worst

    def n_active(self, x: np.ndarray, tol: float = 1e-7) -> int:
        count = 0
        if self.ball is not None:
            center, radius = self.ball
            if radius - np.linalg.norm(x - center) <= tol:
                count += 1
        for a, b in self.halfspaces:
            if b - float(np.dot(a, x)) <= tol * max(1.0, abs(b)):
                count += 1
        if self.lower_bounds is not None:
            count += int(np.sum(x - self.lower_bounds <= tol))
        return count


@dataclass
class Diagnostics:
    iterations: int = 0
    grad_norm: float = math.inf
    converged: bool = False
    reason: str = ""
    n_active: int = 0


@dataclass
class SolveResult:
    x: np.ndarray
    value: float
    feasible: bool
    diagnostics: Diagnostics


BARRIER_WEIGHTS = (1e-2, 1e-4, 1e-6)
_MAX_STEP = 1e8


def _ascend(objective: Objective, fset: FeasibleSet, x0: np.ndarray,
            max_iters: int, pg_tol: float) -> tuple[np.ndarray, float, Diagnostics]:
    """Spectral projected gradient ascent with a monotone Armijo search
    along the feasible segment toward the projected trial point."""
    x = fset.project(np.asarray(x0, dtype=float))
    val, grad = objective(x)
    diag = Diagnostics()
    if not math.isfinite(val):
        diag.reason = "start outside objective domain"
        return x, val, diag
    step = 1.0
    for it in range(1, max_iters + 1):
        diag.iterations = it
        trial = fset.project(x + step * grad)
        d = trial - x
        # h(t)/min(t,1) upper-bounds the unit-step residual for any t, so
        # stopping on it never stops earlier than the true criterion would
        pg_norm = float(np.linalg.norm(d)) / min(step, 1.0)
        diag.grad_norm = pg_norm
        if pg_norm < pg_tol:
            diag.converged = True
            diag.reason = "projected gradient below tolerance"
            break
        slope = float(np.dot(grad, d))
        lam, accepted = 1.0, False
        cand_val = -math.inf
        while lam > 1e-13:
            cand = x + lam * d
            cand_val, cand_grad = objective(cand)
            if math.isfinite(cand_val) and cand_val >= val + 1e-4 * lam * slope:
                accepted = True
                break
            lam *= 0.5
        if not accepted or cand_val <= val + 1e-14 * (abs(val) + 1.0):
            diag.converged = True
            diag.reason = "line search stalled"
            break
        s = cand - x
        y = grad - cand_grad  # curvature direction for a concave objective
        sy = float(np.dot(s, y))
        step = min(max(float(np.dot(s, s)) / sy, 1e-12), _MAX_STEP) if sy > 1e-300 \
            else min(step * 2.0, _MAX_STEP)
        x, val, grad = cand, cand_val, cand_grad
    else:
        diag.reason = "iteration cap"
    diag.n_active = fset.n_active(x)
    return x, val, diag


def maximize_concave(objective: Objective, fset: FeasibleSet, x0: np.ndarray,
                     max_iters: int = 500, pg_tol: float = 1e-8) -> SolveResult:
    """Maximize a concave objective over the feasible set.

    Nonlinear barrier terms are folded in through a decreasing-weight
    log-barrier, warm-starting each stage.  The reported value is the plain
    objective at the final point."""
    x0 = fset.project(np.asarray(x0, dtype=float))
    if fset.linear_violation(x0) > 1e-9:
        return SolveResult(x0, -math.inf, False,
                           Diagnostics(reason="no feasible start derivable"))

    if not fset.barrier_terms:
        x, val, diag = _ascend(objective, fset, x0, max_iters, pg_tol)
        return SolveResult(x, val, True, diag)

    def barrier_objective(mu: float) -> Objective:
        def f(x: np.ndarray) -> tuple[float, np.ndarray]:
            val, grad = objective(x)
            if not math.isfinite(val):
                return -math.inf, grad
            for term in fset.barrier_terms:
                g_val, g_grad = term.fn(x)
                if g_val <= 0.0:
                    return -math.inf, grad
                val += mu * math.log(g_val)
                grad = grad + (mu / g_val) * g_grad
            return val, grad
        return f

    x = x0
    diag = Diagnostics()
    for mu in BARRIER_WEIGHTS:
        x, _, diag = _ascend(barrier_objective(mu), fset, x, max_iters, pg_tol)
    val, _ = objective(x)
    if not math.isfinite(val) or fset.barrier_violation(x) > 0.0:
        return SolveResult(x, val, False,
                           Diagnostics(reason="barrier stage left constraints violated"))
    return SolveResult(x, val, True, diag)


def grad_check(objective: Objective, point, step: float = 1e-6) -> float:
    """Max relative deviation between the analytic gradient and central
    finite differences, normalized by the larger gradient norm."""
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(point, dtype=float)
    _, analytic = objective(x)
    numeric = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        up, _ = objective(x + e)
        down, _ = objective(x - e)
        numeric[i] = (up - down) / (2.0 * step)
    scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric)) / scale)
