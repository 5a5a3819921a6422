"""Spectral utilities for 0/1 evidence matrices.

Minimal singular value via cyclic Jacobi rotations on the small symmetric
Gram matrix A^T A, injectivity, the left inverse, the optimal aggregation
weights h_star = 1_m^T (A^T A)^-1 A^T, and the kernel search used by the
impossibility construction.  Matrices here are tiny (desk scale), so the
dependency-light Jacobi sweep is adequate.
"""

from dataclasses import dataclass

import numpy as np

INJECTIVITY_TOL = 1e-10
JACOBI_OFFDIAG_TOL = 1e-12
KERNEL_SUM_RATIO = 0.1


class NotInjectiveError(ValueError):
    """Raised when an operation requires an injective evidence matrix."""


def jacobi_eigenvalues(S, tol=JACOBI_OFFDIAG_TOL, max_sweeps=100):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm drops below `tol`.
    Returns the eigenvalues in ascending order.
    """
    S = np.array(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("jacobi_eigenvalues needs a square matrix")
    k = S.shape[0]
    if k == 1:
        return S.ravel().copy()
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(S**2) - np.sum(np.diag(S) ** 2), 0.0))
        if off <= tol:
            break
        for p in range(k - 1):
            for q in range(p + 1, k):
                if abs(S[p, q]) <= tol / (k * k):
                    continue
                # Classic 2x2 rotation annihilating S[p, q].
                theta = (S[q, q] - S[p, p]) / (2.0 * S[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * S[:, p] - s * S[:, q]
                rot_q = s * S[:, p] + c * S[:, q]
                S[:, p], S[:, q] = rot_p, rot_q
                rot_p = c * S[p, :] - s * S[q, :]
                rot_q = s * S[p, :] + c * S[q, :]
                S[p, :], S[q, :] = rot_p, rot_q
                S[p, q] = S[q, p] = 0.0
    return np.sort(np.diag(S))


def min_singular_value(A):
    """Smallest singular value of A over its column space: the square root
    of the minimal eigenvalue of A^T A."""
    A = np.asarray(A, dtype=float)
    gram = A.T @ A
    eigs = jacobi_eigenvalues(gram)
    eig_min = eigs[0]
    # Jacobi resolves eigenvalues to ~1e-12 * ||gram||; the square root
    # would turn that roundoff into ~1e-6, so eigenvalues that are zero
    # up to the relative resolution are reported as exactly zero.
    if eig_min <= 1e-11 * max(eigs[-1], 1.0):
        return 0.0
    return float(np.sqrt(eig_min))


def min_singular_value_power(A, iterations=3000, seed=0):
    """Independent cross-check of min_singular_value via power iteration.

    Power iteration on (A^T A + eps I)^-1 with a small negative shift:
    the dominant eigenvalue of the inverted operator corresponds to the
    smallest eigenvalue of A^T A, and the inverse amplifies the gap far
    more than the additive shift (lam_max I - A^T A) would, so clustered
    spectra still converge.  Accuracy is in eigenvalue (sigma squared)
    space.
    """
    A = np.asarray(A, dtype=float)
    gram = A.T @ A
    k = gram.shape[0]
    eps = 1e-9
    inv = np.linalg.inv(gram + eps * np.eye(k))
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(k)
    v /= np.linalg.norm(v)
    for _ in range(iterations):
        w = inv @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
    eig_min = float(v @ gram @ v)
    return float(np.sqrt(max(eig_min, 0.0)))


def left_inverse(A):
    """(A^T A)^-1 A^T; requires injectivity."""
    A = np.asarray(A, dtype=float)
    if min_singular_value(A) <= INJECTIVITY_TOL:
        raise NotInjectiveError("matrix is not injective; no left inverse")
    try:
        return np.linalg.solve(A.T @ A, A.T)
    except np.linalg.LinAlgError:
        raise NotInjectiveError("gram matrix numerically singular") from None


def optimal_hypothesis(A):
    """h_star = 1_m^T (A^T A)^-1 A^T: the weights that recover the sum of
    all signal log-odds from the observed expert log-odds."""
    inv = left_inverse(A)
    return np.ones(inv.shape[0]) @ inv


def kernel_basis(A, pivot_tol=INJECTIVITY_TOL):
    """Basis of ker(A) from Gaussian elimination with partial pivoting.

    Returns a (m, k) array whose columns span the kernel (k may be 0).
    """
    A = np.array(A, dtype=float)
    n, m = A.shape
    pivots = []
    row = 0
    for col in range(m):
        if row >= n:
            break
        pivot = row + int(np.argmax(np.abs(A[row:, col])))
        if abs(A[pivot, col]) <= pivot_tol:
            continue
        A[[row, pivot]] = A[[pivot, row]]
        A[row] /= A[row, col]
        mask = np.arange(n) != row
        A[mask] -= np.outer(A[mask, col], A[row])
        pivots.append(col)
        row += 1
    free = [c for c in range(m) if c not in pivots]
    basis = np.zeros((m, len(free)))
    for idx, col in enumerate(free):
        basis[col, idx] = 1.0
        for r, pc in enumerate(pivots):
            basis[pc, idx] = -A[r, col]
    return basis


def kernel_vector_nonzero_sum(A):
    """A kernel vector whose coordinate sum is bounded away from zero,
    normalized to unit infinity norm, or None.

    None is returned both when the kernel is trivial and when every
    kernel vector has (numerically) zero coordinate sum -- the regime the
    impossibility construction cannot reach.
    """
    A = np.asarray(A, dtype=float)
    basis = kernel_basis(A)
    if basis.shape[1] == 0:
        return None
    # The coordinate-sum functional is linear, so over unit vectors of the
    # kernel it is maximized by the projection of the all-ones vector.
    ones = np.ones(basis.shape[0])
    gram = basis.T @ basis
    coeffs = np.linalg.solve(gram, basis.T @ ones)
    z = basis @ coeffs
    norm = np.linalg.norm(z)
    if norm <= 1e-12 or abs(z.sum()) < KERNEL_SUM_RATIO * norm:
        return None
    z = z / np.max(np.abs(z))
    if np.linalg.norm(A @ z) > 1e-8:
        raise AssertionError("kernel search produced a non-kernel vector")
    return z


@dataclass(frozen=True)
class SpectralReport:
    """Summary of an evidence matrix's spectral properties."""

    sigma_min: float
    injective: bool
    h_star_norm: float | None

    @classmethod
    def from_matrix(cls, A):
        A = np.asarray(A, dtype=float)
        sigma = min_singular_value(A)
        injective = sigma > INJECTIVITY_TOL
        h_norm = float(np.linalg.norm(optimal_hypothesis(A))) if injective else None
        return cls(sigma_min=sigma, injective=injective, h_star_norm=h_norm)


def random_sigma_min_diagnostic(n_values=(16, 32, 64), samples=200, seed=0):
    """Empirical distribution of sigma_min / sqrt(n) for random Bernoulli(1/2)
    0/1 matrices with m = n/2.  Diagnostic only."""
    rng = np.random.default_rng(seed)
    out = {}
    for n in n_values:
        m = n // 2
        vals = np.empty(samples)
        for i in range(samples):
            A = (rng.random((n, m)) < 0.5).astype(float)
            vals[i] = min_singular_value(A) / np.sqrt(n)
        out[n] = vals
    return out
