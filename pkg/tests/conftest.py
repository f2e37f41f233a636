import numpy as np
import pytest

from risklqr import RiskLagrangian, uav_benchmark


@pytest.fixture(scope="session")
def uav():
    """(system, noise, spec, initial_policy) of the built-in benchmark."""
    return uav_benchmark()


@pytest.fixture(scope="session")
def uav_rl(uav):
    system, noise, spec, _ = uav
    return RiskLagrangian(system, noise, spec, 2.0)


def qr_eigenvalues(M, tol=1e-13, max_sweeps=20_000):
    """Eigenvalues by hand-rolled Hessenberg reduction + Wilkinson-shifted QR.

    Independent of numpy's eigensolver: the only factorization used is
    np.linalg.qr. Shifted QR is backward stable, so repeated eigenvalues of
    diagonalizable matrices come out to full precision (a characteristic-
    polynomial route would lose half the digits there).
    """
    A = np.asarray(M, dtype=complex).copy()
    n = A.shape[0]
    for k in range(n - 2):
        v = A[k + 1:, k].copy()
        nv = np.linalg.norm(v)
        if nv == 0 or np.linalg.norm(v[1:]) == 0:
            continue
        alpha = -np.exp(1j * np.angle(v[0])) * nv if v[0] != 0 else -nv
        u = v.copy()
        u[0] -= alpha
        u /= np.linalg.norm(u)
        A[k + 1:, k:] -= 2.0 * np.outer(u, u.conj() @ A[k + 1:, k:])
        A[:, k + 1:] -= 2.0 * np.outer(A[:, k + 1:] @ u, u.conj())

    eigs = []
    hi = n
    for _ in range(max_sweeps):
        if hi == 0:
            break
        if hi == 1:
            eigs.append(A[0, 0])
            hi = 0
            continue
        for i in range(hi - 1, 0, -1):
            if abs(A[i, i - 1]) <= tol * (abs(A[i - 1, i - 1]) + abs(A[i, i])):
                A[i, i - 1] = 0.0
        if A[hi - 1, hi - 2] == 0.0:
            eigs.append(A[hi - 1, hi - 1])
            hi -= 1
            continue
        lo = hi - 1
        while lo > 0 and A[lo, lo - 1] != 0.0:
            lo -= 1
        a, b = A[hi - 2, hi - 2], A[hi - 2, hi - 1]
        c, d = A[hi - 1, hi - 2], A[hi - 1, hi - 1]
        tr, det = a + d, a * d - b * c
        disc = np.sqrt(tr * tr / 4.0 - det + 0j)
        mu1, mu2 = tr / 2.0 + disc, tr / 2.0 - disc
        shift = mu1 if abs(mu1 - d) <= abs(mu2 - d) else mu2
        block = A[lo:hi, lo:hi]
        Qm, Rm = np.linalg.qr(block - shift * np.eye(hi - lo))
        A[lo:hi, lo:hi] = Rm @ Qm + shift * np.eye(hi - lo)
    else:
        raise AssertionError("QR oracle did not converge")
    return np.array(eigs)


def spectral_radius_oracle(M) -> float:
    M = np.asarray(M, dtype=float)
    if M.shape[0] == 1:
        return abs(float(M[0, 0]))
    return float(np.max(np.abs(qr_eigenvalues(M))))


def lyapunov_series_oracle(Acl, W, tail=1e-12, max_terms=2_000_000):
    """Plain term-by-term sum of Acl^k W (Acl^T)^k until the tail is negligible."""
    S = np.array(W, dtype=float)
    term = np.array(W, dtype=float)
    for _ in range(max_terms):
        term = Acl @ term @ Acl.T
        S += term
        if np.linalg.norm(term, "fro") < tail:
            return S
    raise AssertionError("series oracle did not converge")
