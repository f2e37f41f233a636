"""Dense matrix primitives and the two structured solvers everything else rests on.

All functions are pure, operate on float64 numpy arrays, and symmetrize any
result that is symmetric in exact arithmetic, so downstream code never sees
round-off asymmetry drift.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DefinitenessError,
    DimensionError,
    InstabilityError,
    NonConvergenceError,
    NumericalError,
)

__all__ = [
    "as_matrix",
    "as_square",
    "as_vector",
    "symmetrize",
    "require_symmetric",
    "require_psd",
    "require_pd",
    "spectral_radius",
    "solve_discrete_lyapunov",
    "solve_dare",
    "riccati_gain",
]


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-d float array with at least one row and column."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise DimensionError(f"{name} must be 2-d with positive shape, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise DimensionError(f"{name} contains non-finite entries")
    return M


def as_square(M, name: str = "matrix") -> np.ndarray:
    M = as_matrix(M, name)
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {M.shape}")
    return M


def as_vector(v, dim: int | None = None, name: str = "vector") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be 1-d, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DimensionError(f"{name} contains non-finite entries")
    if dim is not None and v.shape[0] != dim:
        raise DimensionError(f"{name} must have length {dim}, got {v.shape[0]}")
    return v


def symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def require_symmetric(M, name: str = "matrix", tol: float = 1e-8) -> np.ndarray:
    M = as_square(M, name)
    scale = max(1.0, float(np.abs(M).max()))
    if float(np.abs(M - M.T).max()) > tol * scale:
        raise DimensionError(f"{name} must be symmetric")
    return symmetrize(M)


def require_psd(M, name: str = "matrix", tol: float = 1e-10) -> np.ndarray:
    M = require_symmetric(M, name)
    eigs = np.linalg.eigvalsh(M)
    scale = max(1.0, float(eigs[-1]))
    if eigs[0] < -tol * scale:
        raise DefinitenessError(f"{name} must be positive semi-definite (min eig {eigs[0]:.3e})")
    return M


def require_pd(M, name: str = "matrix") -> np.ndarray:
    M = require_symmetric(M, name)
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise DefinitenessError(f"{name} must be positive definite") from None
    return M


def spectral_radius(M) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    M = as_square(M, "spectral_radius input")
    try:
        eigs = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        # The LAPACK QR iteration does not expose its iteration count; report size.
        raise NumericalError(
            f"eigenvalue iteration failed to converge on {M.shape[0]}x{M.shape[1]} input: {exc}"
        ) from exc
    return float(np.max(np.abs(eigs)))


def solve_discrete_lyapunov(Acl, Wrhs, tol: float = 1e-14, max_doublings: int = 200) -> np.ndarray:
    """Solve S = Wrhs + Acl S Acl' for Schur-stable Acl.

    Fixed-point iteration with doubling: starting from S = Wrhs, M = Acl,
    the update S <- S + M S M', M <- M M doubles the number of series terms
    sum_k Acl^k Wrhs (Acl')^k held in S, so the iteration count is
    logarithmic in the effective series length. Stops when the increment
    falls below tol relative to ||S||_F.
    """
    Acl = as_square(Acl, "Acl")
    Wrhs = require_symmetric(Wrhs, "Wrhs")
    if Acl.shape != Wrhs.shape:
        raise DimensionError(f"shape mismatch: Acl {Acl.shape} vs Wrhs {Wrhs.shape}")
    rho = spectral_radius(Acl)
    if rho >= 1.0:
        raise InstabilityError(f"spectral radius {rho:.9g} >= 1: Lyapunov series diverges")
    S = Wrhs.copy()
    M = Acl.copy()
    for _ in range(max_doublings):
        incr = M @ S @ M.T
        S = S + incr
        if np.linalg.norm(incr, "fro") <= tol * max(1.0, np.linalg.norm(S, "fro")):
            return symmetrize(S)
        M = M @ M
    raise NonConvergenceError(
        f"Lyapunov doubling stalled after {max_doublings} doublings (rho={rho:.6g})",
        iterations=max_doublings,
    )


def solve_dare(A, B, Qmu, R, tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Stabilizing solution of P = Qmu + A'PA - A'PB (R + B'PB)^-1 B'PA.

    Value iteration on the Riccati recursion initialized at P = Qmu, stopping
    when the successive-iterate Frobenius change drops below tol (relative to
    ||P||_F). Divergence of the iterates signals a non-stabilizable pair.
    """
    A = as_square(A, "A")
    B = as_matrix(B, "B")
    n = A.shape[0]
    if B.shape[0] != n:
        raise DimensionError(f"B must have {n} rows, got {B.shape}")
    Qmu = require_psd(Qmu, "Qmu")
    if Qmu.shape != A.shape:
        raise DimensionError(f"Qmu must be {n}x{n}, got {Qmu.shape}")
    R = require_pd(require_symmetric(np.asarray(R, dtype=float), "R"))
    if R.shape[0] != B.shape[1]:
        raise DimensionError(f"R must be {B.shape[1]}x{B.shape[1]}, got {R.shape}")

    P = Qmu.copy()
    delta = np.inf
    for it in range(1, max_iter + 1):
        BtP = B.T @ P
        gram = R + BtP @ B
        K = np.linalg.solve(gram, BtP @ A)
        AtP = A.T @ P
        P_next = symmetrize(Qmu + AtP @ A - (AtP @ B) @ K)
        delta = np.linalg.norm(P_next - P, "fro")
        P = P_next
        norm_P = np.linalg.norm(P, "fro")
        if delta <= tol * max(1.0, norm_P):
            break
        if not np.isfinite(delta) or norm_P > 1e120:
            raise NonConvergenceError(
                f"Riccati value iteration diverged at iteration {it}; "
                "is (A, B) stabilizable?",
                iterations=it,
                residual=float(delta),
            )
    else:
        raise NonConvergenceError(
            f"Riccati value iteration hit the {max_iter}-iteration cap "
            f"(last change {delta:.3e})",
            iterations=max_iter,
            residual=float(delta),
        )

    K = riccati_gain(A, B, P, R)
    closed = A - B @ K
    residual = np.linalg.norm(P - symmetrize(Qmu + K.T @ R @ K + closed.T @ P @ closed), "fro")
    if residual > 1e-9 * max(1.0, np.linalg.norm(P, "fro")):
        raise NonConvergenceError(
            f"Riccati residual {residual:.3e} exceeds tolerance after convergence",
            iterations=it,
            residual=float(residual),
        )
    if spectral_radius(closed) >= 1.0:
        raise NumericalError("Riccati iteration converged to a non-stabilizing solution")
    return P


def riccati_gain(A, B, P, R) -> np.ndarray:
    """Feedback gain (R + B'PB)^-1 B'PA induced by a Riccati solution P."""
    BtP = B.T @ P
    return np.linalg.solve(R + BtP @ B, BtP @ A)
