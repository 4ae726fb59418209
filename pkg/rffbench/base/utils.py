# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, you can obtain one at http://mozilla.org/MPL/2.0/.

import concurrent.futures

import numpy as np
from encore.concurrent.futures.synchronous import SynchronousExecutor
from scipy import linalg
from scipy.sparse.linalg import eigsh

from rffbench.settings import settings


class NotSymmetric(ValueError):
    """Happens when a matrix that has to be symmetric isn't."""


class RejectedInput(ValueError):
    """Happens when an array has the wrong shape or non-finite values."""


def as_matrix(X, name="X", columns=None):
    """Return X as a 2-d float array with at least one row. A 1-d
    input becomes a single row."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[np.newaxis, :]
    if X.ndim != 2 or X.shape[0] < 1:
        raise RejectedInput(f"{name} must be a nonempty 2-d array, got shape {X.shape}")
    if columns is not None and X.shape[1] != columns:
        raise RejectedInput(f"{name} has {X.shape[1]} columns, expected {columns}")
    if not np.all(np.isfinite(X)):
        raise RejectedInput(f"{name} contains non-finite values")
    return X


def as_vector(x, name="x", length=None):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.ndim != 1:
        raise RejectedInput(f"{name} must be 1-d, got shape {x.shape}")
    if length is not None and x.shape[0] != length:
        raise RejectedInput(f"{name} has length {x.shape[0]}, expected {length}")
    return x


def check_symmetric(K, name="K", tol=1e-10):
    """Return K as a square float array, raising NotSymmetric if it
    isn't symmetric up to `tol` relative to its largest entry."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise NotSymmetric(f"{name} must be square, got shape {K.shape}")
    scale = max(1.0, float(np.max(np.abs(K))) if K.size else 1.0)
    if not np.allclose(K, K.T, rtol=0, atol=tol * scale):
        raise NotSymmetric(f"{name} is not symmetric")
    return K


def clamped_eigh(A):
    """Eigendecomposition of a symmetric PSD matrix with round-off
    negatives clamped to 0. Eigenvalues come back in descending order."""
    w, U = linalg.eigh((A + A.T) / 2)
    w = np.clip(w, 0.0, None)
    return w[::-1], U[:, ::-1]


def clamped_eigvalsh(A):
    w = linalg.eigvalsh((A + A.T) / 2)
    return np.clip(w, 0.0, None)[::-1]


def top_eigenvalue(A):
    """Largest eigenvalue of a symmetric PSD matrix, clamped at 0. Lanczos
    from a fixed start vector, so the answer is the same on every call."""
    A = (A + A.T) / 2
    size = A.shape[0]
    if not np.any(A):
        return 0.0
    if size <= 2:
        return float(max(linalg.eigvalsh(A)[-1], 0.0))
    start = np.linspace(1.0, 2.0, size)
    (top,) = eigsh(A, k=1, which="LA", v0=start, return_eigenvectors=False)
    return float(max(top, 0.0))


def ridge_factor(K, lam):
    """Cholesky factor of (K/n + lam*I), reused for every solve against
    the same ridge operator."""
    n = K.shape[0]
    A = K / n
    A = (A + A.T) / 2
    A[np.diag_indices(n)] += lam
    return linalg.cho_factor(A, lower=True, check_finite=False)


def sign(margins):
    """Elementwise sign with sign(0) = +1."""
    return np.where(np.asarray(margins) >= 0, 1, -1)


def get_executor(workers=None):
    """Return an executor for fanning out independent jobs.

    When settings.SYNCHRONOUS_EXECUTOR is true (it is in the 'Test'
    configuration) everything runs in the calling thread, which makes
    tracebacks and mocking a lot easier.
    """
    if settings.SYNCHRONOUS_EXECUTOR:
        return SynchronousExecutor()
    if workers is None:
        workers = settings.WORKERS
    return concurrent.futures.ThreadPoolExecutor(max_workers=workers or None)


def chunked(count, size):
    """Yield (start, stop) pairs covering range(count) in chunks."""
    size = max(1, int(size))
    for start in range(0, count, size):
        yield start, min(start + size, count)
