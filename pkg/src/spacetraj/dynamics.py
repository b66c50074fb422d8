"""Discrete-time dynamics: explicit Euler maps and their Jacobians.

A `ContinuousModel` supplies the right-hand side ``xdot = deriv(x, u)`` and,
optionally, its analytic partials. `DiscreteModel` wraps it with a fixed step
``step(x, u) = x + dt * deriv(x, u)`` (explicit Euler, order 1), so the
discrete Jacobians are ``A = I + dt * d(deriv)/dx`` and ``B = dt * d(deriv)/du``.

Everything here is immutable and side-effect free; models are safe to share
across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import SingularityError

# Per-coordinate central-difference step: max(FD_STEP, FD_STEP * |coordinate|).
# Balances truncation against roundoff for coordinates ranging from radians to
# 1e4 km positions.
FD_STEP = 1e-6

DerivFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
DerivJacFn = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class ContinuousModel:
    """Continuous-time dynamics ``xdot = deriv(x, u)``.

    `deriv_jacobians`, when provided, returns the continuous partials
    ``(d deriv/dx, d deriv/du)`` at a point; otherwise Jacobians fall back to
    central differences on the discrete map.
    """

    state_dim: int
    control_dim: int
    deriv: DerivFn
    deriv_jacobians: Optional[DerivJacFn] = None
    name: str = ""

    def __post_init__(self):
        assert self.state_dim > 0 and self.control_dim > 0


@dataclass(frozen=True)
class DiscreteModel:
    """Explicit-Euler discretization of a continuous model with step `dt` (s)."""

    inner: ContinuousModel
    dt: float

    def __post_init__(self):
        assert self.dt > 0.0

    @property
    def state_dim(self) -> int:
        return self.inner.state_dim

    @property
    def control_dim(self) -> int:
        return self.inner.control_dim

    @property
    def name(self) -> str:
        return self.inner.name

    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return euler_step(self, x, u)


@dataclass(frozen=True)
class Linearization:
    """Discrete-map Jacobians at a point: ``A = d step/dx``, ``B = d step/du``."""

    A: np.ndarray
    B: np.ndarray


def euler_step(model: DiscreteModel, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """One explicit Euler step ``x + dt * deriv(x, u)``.

    Raises SingularityError if the derivative is non-finite (the scenario
    derivative functions raise it directly at their kinematic guards).
    """
    xdot = model.inner.deriv(x, u)
    if not np.all(np.isfinite(xdot)):
        raise SingularityError("non-finite state derivative", state=x)
    return x + model.dt * xdot


def _fd_steps(v: np.ndarray, h: Optional[float]) -> np.ndarray:
    if h is not None:
        assert h > 0.0
        return np.full(v.shape, h)
    return np.maximum(FD_STEP, FD_STEP * np.abs(v))


def finite_diff_jacobians(
    model: DiscreteModel, x: np.ndarray, u: np.ndarray, h: Optional[float] = None
) -> Linearization:
    """Central-difference Jacobians of the discrete step map.

    Oracle for the analytic Jacobians; exact for linear maps up to roundoff.
    By default the perturbation is per-coordinate, max(FD_STEP, FD_STEP*|v|);
    pass `h` for a uniform explicit scale. A perturbed evaluation that hits a
    singularity propagates the error.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    n, m = model.state_dim, model.control_dim
    A = np.empty((n, n))
    B = np.empty((n, m))
    hx = _fd_steps(x, h)
    for j in range(n):
        e = np.zeros(n)
        e[j] = hx[j]
        A[:, j] = (model.step(x + e, u) - model.step(x - e, u)) / (2.0 * hx[j])
    hu = _fd_steps(u, h)
    for j in range(m):
        e = np.zeros(m)
        e[j] = hu[j]
        B[:, j] = (model.step(x, u + e) - model.step(x, u - e)) / (2.0 * hu[j])
    return Linearization(A=A, B=B)


def jacobians(model: DiscreteModel, x: np.ndarray, u: np.ndarray) -> Linearization:
    """Discrete Jacobians: analytic when the model provides them, else central differences."""
    fn = model.inner.deriv_jacobians
    if fn is None:
        return finite_diff_jacobians(model, x, u)
    dfdx, dfdu = fn(np.asarray(x, dtype=float), np.asarray(u, dtype=float))
    n = model.state_dim
    return Linearization(A=np.eye(n) + model.dt * dfdx, B=model.dt * dfdu)


def lti_model(A: np.ndarray, B: np.ndarray, dt: float = 1.0, name: str = "lti") -> DiscreteModel:
    """Discrete model whose Euler step realizes ``x+ = A x + B u`` exactly.

    The continuous right-hand side is chosen as ``((A - I) x + B u) / dt`` so
    the Euler map and its Jacobians reproduce (A, B) with no discretization
    error. Handy for benchmarks with known closed-form optima.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n, m = B.shape
    assert A.shape == (n, n)
    Ac = (A - np.eye(n)) / dt
    Bc = B / dt

    def deriv(x, u):
        return Ac @ x + Bc @ u

    def deriv_jac(x, u):
        return Ac, Bc

    return DiscreteModel(
        inner=ContinuousModel(n, m, deriv, deriv_jac, name=name), dt=dt
    )


def double_integrator(dt: float = 0.1) -> DiscreteModel:
    """Euler-discretized double integrator: position/velocity state, force control."""

    def deriv(x, u):
        return np.array([x[1], u[0]])

    def deriv_jac(x, u):
        return np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]])

    return DiscreteModel(
        inner=ContinuousModel(2, 1, deriv, deriv_jac, name="double_integrator"),
        dt=dt,
    )
