"""Dense linear algebra helpers shared by the simulator, the learner and the controller.

All superoperator conventions in this package use column-stacking
vectorization: vec(A) stacks the columns of A, so vec(A @ X @ B) equals
(B.T kron A) @ vec(X) and a unitary conjugation U X U^dag has the matrix
conj(U) kron U.
"""

from __future__ import annotations

import numpy as np

# Central tolerance table. Everything downstream imports from here rather
# than scattering magic numbers.
HERM_TOL = 1e-10        # max |A - A^dag| entry for "Hermitian"
TRACE_TOL = 1e-10       # |tr(rho) - 1| for density matrices
PSD_TOL = 1e-9          # eigenvalue slack below zero for "positive"
EIGVEC_COND_MAX = 1e8   # reject eigenbasis-based matrix functions beyond this
SINGULAR_EIG_TOL = 1e-12


class NumericalError(RuntimeError):
    """A numerical routine left its domain of validity (singular log, lost positivity, ...)."""


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product, first factor's indices outermost."""
    return np.kron(a, b)


def hermitian_part(a: np.ndarray) -> np.ndarray:
    """Project onto the Hermitian part, (A + A^dag) / 2."""
    return 0.5 * (a + a.conj().T)


def is_hermitian(a: np.ndarray, tol: float = HERM_TOL) -> bool:
    return bool(np.abs(a - a.conj().T).max() <= tol)


def partial_trace(rho: np.ndarray, dims: tuple[int, ...], keep) -> np.ndarray:
    """Trace out all tensor factors except ``keep``.

    Parameters
    ----------
    rho : square array on the tensor product of subsystems with dimensions ``dims``.
    dims : subsystem dimensions, outermost factor first.
    keep : index or indices of the factors to retain. Multiple kept factors
        must be given in increasing order; the result lives on their tensor
        product in that order.
    """
    dims = tuple(int(d) for d in dims)
    n = len(dims)
    total = int(np.prod(dims))
    if rho.shape != (total, total):
        raise ValueError(f"state of shape {rho.shape} does not match dims {dims}")
    if np.isscalar(keep):
        keep = (int(keep),)
    keep = tuple(int(k) for k in keep)
    if any(k < 0 or k >= n for k in keep) or list(keep) != sorted(set(keep)):
        raise ValueError(f"keep={keep} invalid for {n} subsystems")
    t = rho.reshape(dims + dims)
    # contract each traced factor: row axis i with column axis i + n
    traced = [i for i in range(n) if i not in keep]
    for offset, i in enumerate(traced):
        # axes shift left as earlier factors are contracted away
        ax_row = i - offset
        ax_col = ax_row + (n - offset)
        t = np.trace(t, axis1=ax_row, axis2=ax_col)
    d_keep = int(np.prod([dims[k] for k in keep]))
    return t.reshape(d_keep, d_keep)


def herm_eig(h: np.ndarray, tol: float = HERM_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Returns (w, v) with h = (v * w) @ v.conj().T. Raises ValueError if the
    input fails the Hermiticity check; callers are expected to symmetrize
    first if they only have Hermitian-up-to-roundoff data.
    """
    if not is_hermitian(h, tol):
        raise ValueError("herm_eig: input is not Hermitian within tolerance")
    w, v = np.linalg.eigh(h)
    return w, v


def expm_unitary(h: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i h dt) for Hermitian h, via eigendecomposition."""
    w, v = herm_eig(h)
    return (v * np.exp(-1j * w * dt)) @ v.conj().T


def logm_principal(m: np.ndarray) -> np.ndarray:
    """Principal matrix logarithm of a diagonalizable matrix.

    Eigendecomposition based: eigenvalue branches are cut along the negative
    real axis (Im log in (-pi, pi]). Raises NumericalError when an eigenvalue
    sits within SINGULAR_EIG_TOL of zero or when the eigenvector matrix has
    2-norm condition number above EIGVEC_COND_MAX, since the result would be
    garbage in either case.
    """
    w, v = np.linalg.eig(m)
    small = np.abs(w) < SINGULAR_EIG_TOL
    if small.any():
        idx = int(np.argmax(small))
        raise NumericalError(
            f"logm_principal: eigenvalue {idx} has magnitude {np.abs(w[idx]):.3e}, log undefined"
        )
    cond = np.linalg.cond(v)
    if not np.isfinite(cond) or cond > EIGVEC_COND_MAX:
        raise NumericalError(
            f"logm_principal: eigenvector condition number {cond:.3e} exceeds {EIGVEC_COND_MAX:.0e}"
        )
    return (v * np.log(w)) @ np.linalg.inv(v)


def vec(a: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization: vec(A)[i + d*j] = A[i, j]."""
    return a.reshape(-1, order="F")


def unvec(v: np.ndarray, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Inverse of vec. Square by default; pass shape for rectangular."""
    if shape is None:
        d = int(round(np.sqrt(v.size)))
        if d * d != v.size:
            raise ValueError(f"unvec: length {v.size} is not a perfect square")
        shape = (d, d)
    return v.reshape(shape, order="F")


def superop_of_channel(apply_fn, d: int) -> np.ndarray:
    """Matrix of a linear map on d x d matrices, in the column-stacking convention.

    Built by applying ``apply_fn`` to all d^2 matrix units; column i + d*j of
    the result is vec(apply_fn(|i><j|)).
    """
    m = np.empty((d * d, d * d), dtype=complex)
    for j in range(d):
        for i in range(d):
            unit = np.zeros((d, d), dtype=complex)
            unit[i, j] = 1.0
            m[:, i + d * j] = vec(apply_fn(unit))
    return m


def assert_density_matrix(rho: np.ndarray, what: str = "state") -> None:
    """Validate Hermiticity, unit trace and positivity within the shared tolerances."""
    if np.abs(rho - rho.conj().T).max() > HERM_TOL:
        raise ValueError(f"{what}: not Hermitian within {HERM_TOL:g}")
    if abs(np.trace(rho).real - 1.0) > TRACE_TOL:
        raise ValueError(f"{what}: trace {np.trace(rho).real!r} is not 1 within {TRACE_TOL:g}")
    w = np.linalg.eigvalsh(hermitian_part(rho))
    if w.min() < -PSD_TOL:
        raise ValueError(f"{what}: negative eigenvalue {w.min():.3e} below -{PSD_TOL:g}")
