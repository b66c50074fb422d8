"""Stationary LQR design and the terminal-set machinery built on it.

`solve_dare` finds the fixed point of the backward Riccati recursion by value
iteration (dependency-free; fine for the state dimensions here, n <= 13). The
returned value matrix P satisfies

    P = Q + A'PA - A'PB (R + B'PB)^-1 B'PA

to a small relative residual, with gain K = (R + B'PB)^-1 B'PA and a stable
closed loop A - BK.

A `RegulationDesign` embeds the design into a (possibly larger) simulation
state: the regulated coordinates z = x[indices] feed the feedback u = -K z and
the quadratic predicted cost z' P z. `regulation_rollout` applies that law to
the full nonlinear model; `in_terminal_set` compares predicted and rolled-out
cost to decide terminal-set membership.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cost import QuadraticCostSpec, stage_cost
from .dynamics import DiscreteModel, Linearization, jacobians
from .errors import (
    DynamicsDomainError,
    NotAFixedPointError,
    SingularityError,
    StabilizabilityError,
)

FIXED_POINT_RTOL = 1e-9


def linearize_at_goal(
    model: DiscreteModel, x_eq: np.ndarray, u_eq: np.ndarray
) -> Linearization:
    """Jacobians at an equilibrium; rejects points that are not fixed points
    of the discrete map (e.g. a lander held by nonzero hover thrust, whose
    mass-flow keeps the state moving)."""
    x_eq = np.asarray(x_eq, dtype=float)
    u_eq = np.asarray(u_eq, dtype=float)
    residual = float(np.linalg.norm(model.step(x_eq, u_eq) - x_eq))
    bound = FIXED_POINT_RTOL * (1.0 + float(np.linalg.norm(x_eq)))
    if residual > bound:
        raise NotAFixedPointError(
            f"linearization point is not an equilibrium (residual {residual:.3e} "
            f"> {bound:.3e})",
            residual=residual,
            state=x_eq,
        )
    return jacobians(model, x_eq, u_eq)


@dataclass(frozen=True)
class LqrSolution:
    """Stationary Riccati solution: value matrix, gain, and diagnostics."""

    P: np.ndarray
    K: np.ndarray
    spectral_radius: float
    residual: float
    iterations: int


def dare_residual(P: np.ndarray, A: np.ndarray, B: np.ndarray, Q: np.ndarray, R: np.ndarray) -> float:
    """Relative Frobenius residual of the Riccati fixed-point equation."""
    K = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    rhs = Q + A.T @ P @ A - A.T @ P @ B @ K
    return float(np.linalg.norm(P - rhs) / max(np.linalg.norm(P), 1e-300))


def solve_dare(
    A: np.ndarray,
    B: np.ndarray,
    Q: np.ndarray,
    R: np.ndarray,
    tol: float = 1e-12,
    max_iterations: int = 10**6,
) -> LqrSolution:
    """Value iteration from P = Q with relative-change stopping.

    Raises StabilizabilityError on non-convergence (the usual symptom of an
    unstabilizable pair) or an unstable resulting closed loop.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    P = Q.copy()
    iterations = 0
    with np.errstate(over="ignore", invalid="ignore"):  # divergence detected below
        for iterations in range(1, max_iterations + 1):
            BtP = B.T @ P
            K = np.linalg.solve(R + BtP @ B, BtP @ A)
            P_next = Q + A.T @ P @ (A - B @ K)
            P_next = 0.5 * (P_next + P_next.T)
            if not np.all(np.isfinite(P_next)):
                raise StabilizabilityError("Riccati value iteration diverged")
            change = np.linalg.norm(P_next - P) / max(np.linalg.norm(P_next), 1e-300)
            P = P_next
            if change < tol:
                break
        else:
            raise StabilizabilityError(
                f"Riccati value iteration did not converge in {max_iterations} iterations"
            )
    K = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    rho = float(np.max(np.abs(np.linalg.eigvals(A - B @ K))))
    if rho >= 1.0:
        raise StabilizabilityError(f"closed loop not stable (spectral radius {rho:.6f})")
    return LqrSolution(
        P=P,
        K=K,
        spectral_radius=rho,
        residual=dare_residual(P, A, B, Q, R),
        iterations=iterations,
    )


@dataclass(frozen=True)
class RegulationDesign:
    """Stationary design acting on a subset of the simulation state.

    `indices` selects the regulated coordinates (the full state for the
    attitude problem; the relative-error block for rendezvous). `P_full`
    is the value matrix embedded into full-state coordinates for use as a
    terminal cost.
    """

    solution: LqrSolution
    indices: np.ndarray
    state_dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int)
        object.__setattr__(self, "indices", idx)
        assert idx.ndim == 1 and len(idx) == self.solution.P.shape[0]

    @property
    def P_full(self) -> np.ndarray:
        P = np.zeros((self.state_dim, self.state_dim))
        P[np.ix_(self.indices, self.indices)] = self.solution.P
        return P

    def regulated(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[self.indices]

    def feedback(self, x: np.ndarray) -> np.ndarray:
        return -self.solution.K @ self.regulated(x)

    def predicted_cost(self, x: np.ndarray) -> float:
        z = self.regulated(x)
        return float(z @ self.solution.P @ z)


@dataclass(frozen=True)
class TerminalSetSpec:
    """Membership test parameters for the sublevel set {x : z'Pz <= level}.

    `level` may be None, in which case only the predicted-vs-actual cost
    agreement is tested (the level is then reported from the sweep itself).
    """

    level: Optional[float] = None
    tolerance: float = 1e-2
    regulation_cap: int = 20000
    state_tol: float = 1e-6
    cost_cap: float = 1e12
    floor: float = 1e-9

    def __post_init__(self):
        assert self.tolerance > 0.0 and self.regulation_cap > 0
        assert self.level is None or self.level > 0.0


@dataclass(frozen=True)
class RegulationRollout:
    states: np.ndarray
    controls: np.ndarray
    cost: float
    converged: bool
    diverged: bool
    message: str = ""

    @property
    def steps(self) -> int:
        return len(self.controls)


def regulation_rollout(
    model: DiscreteModel,
    x0: np.ndarray,
    design: RegulationDesign,
    spec: QuadraticCostSpec,
    stop: TerminalSetSpec,
) -> RegulationRollout:
    """Simulate the nonlinear model under u = -K z until the regulated state
    norm drops below `state_tol` or the step cap is reached. Divergence
    (cost cap, non-finite state, singular kinematics) is reported in the
    result, not raised."""
    x = np.array(x0, dtype=float)
    states = [x]
    controls = []
    cost = 0.0
    converged = False
    diverged = False
    message = ""
    for _ in range(stop.regulation_cap):
        if np.linalg.norm(design.regulated(x)) < stop.state_tol:
            converged = True
            break
        u = design.feedback(x)
        cost += stage_cost(x, u, spec)
        if not np.isfinite(cost) or cost > stop.cost_cap:
            diverged = True
            message = f"regulation cost exceeded cap ({cost:.3e})"
            break
        try:
            x = model.step(x, u)
        except (SingularityError, DynamicsDomainError) as exc:
            diverged = True
            message = f"regulation rollout left the dynamics domain: {exc}"
            break
        if not np.all(np.isfinite(x)):
            diverged = True
            message = "regulation rollout produced non-finite state"
            break
        controls.append(u)
        states.append(x)
    return RegulationRollout(
        states=np.array(states),
        controls=np.array(controls).reshape(len(controls), model.control_dim),
        cost=float(cost),
        converged=converged,
        diverged=diverged,
        message=message,
    )


@dataclass(frozen=True)
class MembershipResult:
    member: bool
    predicted_cost: float
    actual_cost: float
    within_tolerance: bool
    within_level: bool
    rollout: RegulationRollout

    def __bool__(self) -> bool:
        return self.member


def in_terminal_set(
    model: DiscreteModel,
    x: np.ndarray,
    design: RegulationDesign,
    spec: QuadraticCostSpec,
    stop: TerminalSetSpec,
) -> MembershipResult:
    """True iff the rolled-out regulation cost matches the quadratic
    prediction within the relative tolerance and, when a level is set, the
    prediction lies below it. A divergent rollout is never a member."""
    predicted = design.predicted_cost(x)
    rollout = regulation_rollout(model, x, design, spec, stop)
    actual = rollout.cost
    within_tol = (not rollout.diverged) and abs(actual - predicted) <= stop.tolerance * max(
        predicted, stop.floor
    )
    within_level = stop.level is None or predicted <= stop.level
    return MembershipResult(
        member=bool(within_tol and within_level),
        predicted_cost=predicted,
        actual_cost=actual,
        within_tolerance=bool(within_tol),
        within_level=bool(within_level),
        rollout=rollout,
    )
