"""Complex linear algebra, transforms, Bessel J0 and seeded random streams.

Every routine here is a pure function of its inputs.  Matrix routines accept
stacks of matrices (``(..., n, n)``) so the precoder code can work on all
subcarriers of a block at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DimensionError, FactorizationError, SingularMatrixError

HERMITIAN_TOL = 1e-10
JITTER_SCALE = 1e-12
# Largest condition number accepted by solve_hermitian before reporting singularity.
MAX_CONDITION = 1e13


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------

def naive_dft(x, inverse=False, axis=-1):
    """O(K^2) DFT by direct summation.  Test oracle; works for any K."""
    x = np.moveaxis(np.asarray(x, dtype=complex), axis, -1)
    K = x.shape[-1]
    n = np.arange(K)
    sign = 1.0 if inverse else -1.0
    F = np.exp(sign * 2j * np.pi * np.outer(n, n) / K)
    out = x @ F.T
    if inverse:
        out = out / K
    return np.moveaxis(out, -1, axis)


def dft(x, K=None, inverse=False, axis=-1, naive=False):
    """Forward or inverse DFT along ``axis``.

    Forward: ``X[k] = sum_n x[n] exp(-2j pi k n / K)``.
    Inverse: ``x[n] = (1/K) sum_k X[k] exp(+2j pi n k / K)``.

    Parameters
    ----------
    x : array_like
        Complex input.
    K : int, optional
        Expected transform length.  A mismatch with ``x.shape[axis]`` raises
        :class:`DimensionError`.
    inverse : bool
        Compute the inverse transform.
    naive : bool
        Use the O(K^2) summation instead of the FFT.
    """
    x = np.asarray(x)
    n = x.shape[axis]
    if K is not None and n != K:
        raise DimensionError(f"dft: input length {n} does not match K={K}")
    if n == 0:
        raise DimensionError("dft: empty input")
    if naive:
        return naive_dft(x, inverse=inverse, axis=axis)
    if inverse:
        return np.fft.ifft(x, axis=axis)
    return np.fft.fft(x, axis=axis)


def circular_convolve(a, b, axis=-1):
    """Circular convolution over the full length of ``axis`` by direct summation.

    ``out[l] = sum_j a[j] b[(l - j) mod K]``.  Independent of the FFT; used as
    an oracle and by small-size checks.
    """
    a = np.moveaxis(np.asarray(a, dtype=complex), axis, -1)
    b = np.moveaxis(np.asarray(b, dtype=complex), axis, -1)
    if a.shape[-1] != b.shape[-1]:
        raise DimensionError("circular_convolve: length mismatch")
    K = a.shape[-1]
    idx = (np.arange(K)[:, None] - np.arange(K)[None, :]) % K  # [l, j] -> l - j
    out = np.einsum("...j,...lj->...l", a, b[..., idx])
    return np.moveaxis(out, -1, axis)


# ---------------------------------------------------------------------------
# Hermitian eigensolver (cyclic Jacobi, parallel ordering)
# ---------------------------------------------------------------------------

def _round_robin(n):
    """Rounds of disjoint index pairs covering every pair exactly once."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p >= 0 and q >= 0]
        rounds.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _check_hermitian(A, tol=HERMITIAN_TOL):
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise DimensionError(f"expected square matrices, got shape {A.shape}")
    scale = max(np.max(np.abs(A), initial=0.0), 1.0)
    if np.max(np.abs(A - np.conj(np.swapaxes(A, -1, -2))), initial=0.0) > tol * scale:
        raise ContractViolation("matrix is not Hermitian within tolerance")


def hermitian_eig(A, tol=1e-15, max_sweeps=60):
    """Eigen-decomposition of Hermitian matrices by cyclic Jacobi rotations.

    Rotations for disjoint index pairs are applied simultaneously
    (round-robin ordering), and every matrix in a stack is processed in
    lock-step.

    Parameters
    ----------
    A : array_like, shape (..., n, n)
        Hermitian matrix or stack of matrices.

    Returns
    -------
    eigenvalues : ndarray, shape (..., n)
        Real eigenvalues in ascending order.
    eigenvectors : ndarray, shape (..., n, n)
        Unitary matrix whose columns are the matching eigenvectors.
    """
    A = np.array(A, dtype=complex)
    _check_hermitian(A)
    batch = A.shape[:-2]
    n = A.shape[-1]
    A = A.reshape((-1, n, n))
    A = 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))
    V = np.broadcast_to(np.eye(n, dtype=complex), A.shape).copy()
    rounds = _round_robin(n) if n > 1 else []
    norm = np.sqrt(np.sum(np.abs(A) ** 2, axis=(-1, -2)))
    norm = np.where(norm > 0, norm, 1.0)
    offmask = ~np.eye(n, dtype=bool)

    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.abs(A[:, offmask]) ** 2, axis=-1))
        if np.all(off <= tol * norm):
            break
        for ps, qs in rounds:
            apq = A[:, ps, qs]
            app = A[:, ps, ps].real
            aqq = A[:, qs, qs].real
            mag = np.abs(apq)
            live = mag > 1e-300
            safe = np.where(live, mag, 1.0)
            phase = np.where(live, apq / safe, 1.0)
            theta = (aqq - app) / (2.0 * safe)
            sgn = np.where(theta >= 0, 1.0, -1.0)
            t = sgn / (np.abs(theta) + np.hypot(theta, 1.0))
            t = np.where(live, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            pb = np.conj(phase)
            # columns: A <- A J
            colp = A[:, :, ps].copy()
            colq = A[:, :, qs].copy()
            A[:, :, ps] = c[:, None, :] * colp - (s * pb)[:, None, :] * colq
            A[:, :, qs] = s[:, None, :] * colp + (c * pb)[:, None, :] * colq
            # rows: A <- J^H A
            rowp = A[:, ps, :].copy()
            rowq = A[:, qs, :].copy()
            A[:, ps, :] = c[:, :, None] * rowp - (s * phase)[:, :, None] * rowq
            A[:, qs, :] = s[:, :, None] * rowp + (c * phase)[:, :, None] * rowq
            vp = V[:, :, ps].copy()
            vq = V[:, :, qs].copy()
            V[:, :, ps] = c[:, None, :] * vp - (s * pb)[:, None, :] * vq
            V[:, :, qs] = s[:, None, :] * vp + (c * pb)[:, None, :] * vq

    w = np.real(np.diagonal(A, axis1=-2, axis2=-1))
    order = np.argsort(w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    V = np.take_along_axis(V, order[:, None, :], axis=-1)
    return w.reshape(batch + (n,)), V.reshape(batch + (n, n))


# ---------------------------------------------------------------------------
# Factorizations and solves
# ---------------------------------------------------------------------------

def cholesky(A, jitter=True):
    """Lower-triangular ``L`` with ``L @ L^H = A`` for Hermitian PSD ``A``.

    Semi-definite inputs get ``1e-12 * trace / n`` added to the diagonal when
    the plain factorization fails.  Anything still indefinite raises
    :class:`FactorizationError`.
    """
    A = np.array(A, dtype=complex)
    _check_hermitian(A)
    A = 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        if not jitter:
            raise FactorizationError("matrix is not positive definite") from None
    n = A.shape[-1]
    tr = np.real(np.trace(A, axis1=-2, axis2=-1))
    eps = JITTER_SCALE * np.abs(tr) / n
    eps = np.where(eps > 0, eps, JITTER_SCALE)
    Aj = A + eps[..., None, None] * np.eye(n)
    try:
        return np.linalg.cholesky(Aj)
    except np.linalg.LinAlgError:
        raise FactorizationError(
            "matrix is indefinite beyond the permitted diagonal jitter"
        ) from None


def _locate_bad(A):
    """Return (flat index, condition) of the worst-conditioned matrix in a stack."""
    w = np.linalg.eigvalsh(A)
    lo, hi = w[..., 0], w[..., -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(lo > 0, hi / lo, np.inf)
    flat = int(np.argmax(cond.reshape(-1)))
    return np.unravel_index(flat, cond.shape) if cond.ndim else (), float(cond.reshape(-1)[flat])


def solve_hermitian(A, B):
    """Solve ``A X = B`` for Hermitian positive definite ``A`` (stacked).

    Raises
    ------
    SingularMatrixError
        If any ``A`` is not numerically positive definite.  The exception
        carries a condition estimate and the batch index of the culprit.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    _check_hermitian(A)
    if B.shape[-2] != A.shape[-1]:
        raise DimensionError(f"solve_hermitian: A is {A.shape}, B is {B.shape}")
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        idx, cond = _locate_bad(A)
        raise SingularMatrixError(
            f"matrix at index {idx} is singular or not positive definite "
            f"(condition estimate {cond:.3g})", condition=cond, index=idx) from None
    d = np.abs(np.diagonal(L, axis1=-2, axis2=-1))
    ratio = (np.max(d, axis=-1) / np.min(d, axis=-1)) ** 2
    if np.any(ratio > MAX_CONDITION):
        idx, cond = _locate_bad(A)
        raise SingularMatrixError(
            f"matrix at index {idx} is numerically singular (condition estimate {cond:.3g})",
            condition=cond, index=idx)
    Y = np.linalg.solve(L, B)
    return np.linalg.solve(np.conj(np.swapaxes(L, -1, -2)), Y)


# ---------------------------------------------------------------------------
# Bessel J0
# ---------------------------------------------------------------------------

def _j0_series(x):
    # sum_k (-1)^k (x/2)^{2k} / (k!)^2
    q = -0.25 * x * x
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        term *= q / (k * k)
        total += term
        if abs(term) < 1e-17 * max(abs(total), 1e-300) and k > 2:
            return total


def _j0_miller(x):
    # Backward recurrence J_{k-1} = (2k/x) J_k - J_{k+1}, normalised by
    # 1 = J_0 + 2 sum_{k>=1} J_{2k}.
    start = int(x + 30 + 12 * x ** (1.0 / 3.0))
    start += start % 2
    jp1, j = 0.0, 1e-30
    norm = 0.0
    j0 = 0.0
    for k in range(start, 0, -1):
        jm1 = (2.0 * k / x) * j - jp1
        jp1, j = j, jm1
        if abs(j) > 1e250:
            j *= 1e-250
            jp1 *= 1e-250
            norm *= 1e-250
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * j
    j0 = j
    norm += j0
    return j0 / norm


def _j0_scalar(x):
    x = abs(float(x))
    if not math.isfinite(x):
        raise ContractViolation("bessel_j0 requires a finite argument")
    if x <= 8.0:
        return _j0_series(x)
    return _j0_miller(x)


def bessel_j0(x):
    """Zeroth-order Bessel function of the first kind.

    Power series for ``|x| <= 8``, Miller backward recurrence above.
    Accepts scalars or arrays.
    """
    if np.ndim(x) == 0:
        return _j0_scalar(x)
    arr = np.asarray(x, dtype=float)
    return np.vectorize(_j0_scalar, otypes=[float])(arr)


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream identified by ``(seed, stream_id)``.

    Generators are Philox instances keyed from ``(seed, stream_id, purpose)``,
    so trial ``t`` always sees the same numbers no matter which thread runs it
    or in what order.
    """

    seed: int
    stream_id: int = 0

    def generator(self, purpose=0):
        ss = np.random.SeedSequence([int(self.seed) & 0xFFFFFFFFFFFFFFFF,
                                     int(self.stream_id) & 0xFFFFFFFFFFFFFFFF,
                                     int(purpose)])
        return np.random.Generator(np.random.Philox(ss))

    def child(self, stream_id):
        return RngStream(self.seed, stream_id)


def _as_generator(rng):
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def gaussian_complex(rng, n, variance=1.0):
    """Circularly-symmetric complex normal samples with per-sample ``variance``.

    ``n`` may be an int or a shape tuple.  Real and imaginary parts each carry
    ``variance / 2``.
    """
    if not variance > 0:
        raise ContractViolation(f"gaussian_complex: variance must be > 0, got {variance}")
    gen = _as_generator(rng)
    shape = (n,) if np.ndim(n) == 0 else tuple(n)
    z = gen.standard_normal(shape + (2,))
    return np.sqrt(variance / 2.0) * (z[..., 0] + 1j * z[..., 1])
