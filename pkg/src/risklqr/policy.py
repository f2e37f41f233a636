"""Affine state-feedback policies u = -Kx + l and the stabilizing-set test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .linalg import as_matrix, as_vector, spectral_radius

__all__ = ["Policy", "closed_loop", "is_stabilizing"]


@dataclass(frozen=True)
class Policy:
    """Gain pair (K, l); immutable value type, freely shareable.

    The optimizers treat a policy as the flat m x (n+1) augmentation [K l]
    under the Frobenius norm; as_matrix/from_matrix round-trip exactly.
    """

    K: np.ndarray
    l: np.ndarray

    def __post_init__(self):
        K = as_matrix(self.K, "K")
        l = as_vector(self.l, dim=K.shape[0], name="l")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "l", l)

    @property
    def m(self) -> int:
        return self.K.shape[0]

    @property
    def n(self) -> int:
        return self.K.shape[1]

    def as_matrix(self) -> np.ndarray:
        return np.hstack([self.K, self.l[:, None]])

    @classmethod
    def from_matrix(cls, X) -> "Policy":
        X = as_matrix(X, "policy matrix")
        if X.shape[1] < 2:
            raise DimensionError("policy matrix must be m x (n+1) with n >= 1")
        return cls(K=X[:, :-1].copy(), l=X[:, -1].copy())

    def apply(self, x) -> np.ndarray:
        """Control input -Kx + l at state x."""
        x = as_vector(x, dim=self.n, name="x")
        return -self.K @ x + self.l


def closed_loop(system, policy: Policy) -> np.ndarray:
    """Closed-loop transition matrix A - BK."""
    if policy.n != system.n or policy.m != system.m:
        raise DimensionError(
            f"policy shaped for ({policy.m}, {policy.n}) does not fit system ({system.m}, {system.n})"
        )
    return system.A - system.B @ policy.K


def is_stabilizing(system, policy: Policy, margin: float = 0.0) -> bool:
    """True iff the closed loop is Schur-stable with the given margin."""
    return spectral_radius(closed_loop(system, policy)) < 1.0 - margin
