"""Quadratic stage cost, exponential altitude penalty, and terminal value.

Stage cost: c(x, u) = 0.5 * (x' Q x + u' R u) + penalty, with Q PSD and R PD,
zero at the origin and positive elsewhere when Q is PD and no penalty is
configured. The optional penalty is weight * exp(-rate * altitude) - weight on
a designated state coordinate: strictly decreasing in altitude, bounded below
by -weight, zero at zero altitude, growing exponentially below ground. With a
penalty configured the total cost can be negative.

All derivatives consumed by the solver backward pass are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


def altitude_penalty(altitude: float, weight: float, rate: float) -> float:
    """Soft ground constraint: weight * exp(-rate * altitude) - weight."""
    return weight * np.exp(-rate * altitude) - weight


@dataclass(frozen=True)
class AltitudePenaltySpec:
    """Penalty attached to one state coordinate.

    `coord_scale` converts the state coordinate into the altitude units the
    (weight, rate) pair is expressed in; the chain rule applies it to the
    penalty derivatives.
    """

    weight: float
    rate: float
    index: int
    coord_scale: float = 1.0

    def value(self, x: np.ndarray) -> float:
        return altitude_penalty(self.coord_scale * x[self.index], self.weight, self.rate)

    def gradient_at(self, x: np.ndarray) -> float:
        alt = self.coord_scale * x[self.index]
        return -self.weight * self.rate * self.coord_scale * np.exp(-self.rate * alt)

    def hessian_at(self, x: np.ndarray) -> float:
        alt = self.coord_scale * x[self.index]
        return self.weight * (self.rate * self.coord_scale) ** 2 * np.exp(-self.rate * alt)


@dataclass(frozen=True)
class QuadraticCostSpec:
    Q: np.ndarray
    R: np.ndarray
    penalty: Optional[AltitudePenaltySpec] = None

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        assert np.allclose(Q, Q.T), "Q must be symmetric"
        assert np.allclose(R, R.T), "R must be symmetric"
        assert np.all(np.linalg.eigvalsh(Q) >= -1e-12 * max(1.0, np.abs(Q).max())), "Q must be PSD"
        assert np.all(np.linalg.eigvalsh(R) > 0.0), "R must be PD"
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        if self.penalty is not None:
            assert 0 <= self.penalty.index < Q.shape[0]

    @property
    def state_dim(self) -> int:
        return self.Q.shape[0]

    @property
    def control_dim(self) -> int:
        return self.R.shape[0]


def stage_cost(x: np.ndarray, u: np.ndarray, spec: QuadraticCostSpec) -> float:
    c = 0.5 * (float(x @ spec.Q @ x) + float(u @ spec.R @ u))
    if spec.penalty is not None:
        c += spec.penalty.value(x)
    return c


@dataclass(frozen=True)
class CostDerivatives:
    l_x: np.ndarray
    l_xx: np.ndarray
    l_u: np.ndarray
    l_uu: np.ndarray


def cost_derivatives(x: np.ndarray, u: np.ndarray, spec: QuadraticCostSpec) -> CostDerivatives:
    l_x = spec.Q @ x
    l_xx = spec.Q
    if spec.penalty is not None:
        l_x = l_x.copy()
        l_x[spec.penalty.index] += spec.penalty.gradient_at(x)
        l_xx = l_xx.copy()
        l_xx[spec.penalty.index, spec.penalty.index] += spec.penalty.hessian_at(x)
    return CostDerivatives(l_x=l_x, l_xx=l_xx, l_u=spec.R @ u, l_uu=spec.R)


@dataclass(frozen=True)
class TerminalValue:
    """Terminal cost (x - ref)' P (x - ref) with P PSD.

    P = 0 gives a pure stage-cost problem. The reference defaults to the
    origin; the powered-descent scenario offsets it to command a terminal
    sink rate (touchdown guidance aims slightly below the surface so the
    planned trajectory actually crosses it).
    """

    P: np.ndarray
    reference: Optional[np.ndarray] = None

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        assert np.allclose(P, P.T), "terminal matrix must be symmetric"
        assert np.all(
            np.linalg.eigvalsh(P) >= -1e-9 * max(1.0, np.abs(P).max())
        ), "terminal matrix must be PSD"
        object.__setattr__(self, "P", P)
        if self.reference is not None:
            ref = np.asarray(self.reference, dtype=float)
            assert ref.shape == (P.shape[0],)
            object.__setattr__(self, "reference", ref)

    def _offset(self, x: np.ndarray) -> np.ndarray:
        return x if self.reference is None else x - self.reference

    def value(self, x: np.ndarray) -> float:
        e = self._offset(x)
        return float(e @ self.P @ e)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return 2.0 * (self.P @ self._offset(x))

    def hessian(self) -> np.ndarray:
        return 2.0 * self.P


def terminal_value(x: np.ndarray, P: np.ndarray) -> float:
    return TerminalValue(P).value(np.asarray(x, dtype=float))
