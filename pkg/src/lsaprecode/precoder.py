"""Downlink precoders: exact/shared ZF, MF, TPE and the recursive variants.

Conventions used throughout:

* ``H`` has shape ``(..., P, M)`` (users x antennas) and ``U`` has shape
  ``(..., M, P)``; leading axes are blocks and/or subcarriers.
* ``g`` is the vector of large-scale gains ``g_p`` (the diagonal of ``G``).
* Time-domain filters are stored as full-length circular tap arrays of shape
  ``(M, P, K)``; tap ``l`` lives at index ``l mod K`` and taps outside the
  window ``-half_window..half_window`` are zero.
"""
from __future__ import annotations

import contextlib
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, ContractViolation, DivergenceError, SingularMatrixError
from .numerics import dft, hermitian_eig, solve_hermitian

# Flipped by `inject_fault()` so the verification suite can prove it catches a
# broken filter update.
_FAULT = {"flip_sign": False}


@contextlib.contextmanager
def inject_fault():
    """Flip the sign of the filter-update correction while the context is active."""
    _FAULT["flip_sign"] = True
    try:
        yield
    finally:
        _FAULT["flip_sign"] = False


def _h(X):
    return np.conj(np.swapaxes(X, -1, -2))


def _gains(g, P):
    if g is None:
        return np.ones(P)
    g = np.broadcast_to(np.asarray(g, dtype=float), (P,))
    if np.any(g <= 0):
        raise ContractViolation("large-scale gains must be positive")
    return g


# ---------------------------------------------------------------------------
# Frequency-domain precoders
# ---------------------------------------------------------------------------

@dataclass
class FreqPrecoder:
    """Per-subcarrier precoding matrices plus recursion bookkeeping."""

    U: np.ndarray
    mu: float = 1.0
    counter: int = 0

    def apply(self, x):
        """Precode symbols ``x[..., P]`` -> antenna symbols ``[..., M]``."""
        return np.einsum("...mp,...p->...m", self.U, x)


def zf_exact(H, g=None):
    """Zero-forcing precoder ``H^H (H H^H)^-1`` for every matrix in the stack.

    ``g`` is accepted for interface symmetry; ZF does not depend on it.

    Raises
    ------
    SingularMatrixError
        If some ``H H^H`` is singular; ``exc.index`` gives its batch index.
    """
    H = np.asarray(H, dtype=complex)
    P, M = H.shape[-2:]
    if P > M:
        raise ContractViolation(f"zero forcing needs P <= M (got P={P}, M={M})")
    A = H @ _h(H)
    I = np.broadcast_to(np.eye(P, dtype=complex), A.shape)
    try:
        X = solve_hermitian(A, I)
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            f"H H^H is singular at (block, subcarrier) index {exc.index}",
            condition=exc.condition, index=exc.index) from None
    return _h(H) @ X


def zf_shared(H, g=None, B=1, axis=-3):
    """ZF computed on the first subcarrier of each ``B``-wide group and reused.

    ``axis`` is the subcarrier axis of ``H`` (default: the one just before
    the matrix axes).  Groups are ``k // B`` over the absolute subcarrier index.
    """
    if B < 1:
        raise ConfigError("sharing width B must be >= 1")
    H = np.asarray(H, dtype=complex)
    axis = axis % H.ndim
    K = H.shape[axis]
    heads = np.arange(0, K, B)
    U_heads = zf_exact(np.take(H, heads, axis=axis), g)
    owner = np.arange(K) // B
    return np.take(U_heads, owner, axis=axis)


def initial_precoder(H, g=None, mu=1.0):
    """Zeroth-order term ``(mu/M) H^H G^-1``."""
    H = np.asarray(H, dtype=complex)
    P, M = H.shape[-2:]
    ginv = 1.0 / _gains(g, P)
    return (mu / M) * _h(H) * ginv


def mf(H, g=None):
    """Matched filter ``(1/M) H^H G^-1``."""
    return initial_precoder(H, g, 1.0)


def tpe(H, g=None, Q=1, mu=1.0):
    """Truncated polynomial expansion ``(mu/M) H^H G^-1 sum_{q<=Q} Lambda^q``.

    ``Lambda = I - (mu/M) H H^H G^-1``.  The polynomial is evaluated with
    Horner's rule; no guard against divergence.
    """
    if Q < 0:
        raise ConfigError("expansion order Q must be >= 0")
    H = np.asarray(H, dtype=complex)
    P, M = H.shape[-2:]
    ginv = 1.0 / _gains(g, P)
    I = np.eye(P)
    Lam = I - (mu / M) * (H @ _h(H)) * ginv
    Pq = np.broadcast_to(I, Lam.shape).astype(complex)
    for _ in range(Q):
        Pq = I + Lam @ Pq
    return (mu / M) * (_h(H) * ginv) @ Pq


def order_recursion_step(U, H, g=None, mu=1.0):
    """One step ``U + (mu/M) H^H G^-1 (I - H U)`` applied to every matrix."""
    H = np.asarray(H, dtype=complex)
    P, M = H.shape[-2:]
    ginv = 1.0 / _gains(g, P)
    resid = np.eye(P) - H @ U
    return U + (mu / M) * (_h(H) * ginv) @ resid


def time_recursion_step(U_n, H_n, g=None, mu=1.0):
    """Tracking update: the order-recursion formula driven by the block index.

    ``U_n`` is the precoder in use at block ``n`` and ``H_n`` that block's
    channel; the result is the precoder for block ``n + 1``.
    """
    return order_recursion_step(U_n, H_n, g, mu)


class DivergenceGuard:
    """Raise :class:`DivergenceError` when a residual grows >10x over 5 steps.

    Growth is measured against ``max(norm 5 steps ago, reference)`` so that
    residuals rising from ~0 (e.g. tracking after an exact start) do not trip it.
    """

    def __init__(self, reference, window=5, factor=10.0):
        self.reference = float(reference)
        self.window = window
        self.factor = factor
        self.history = []

    def check(self, norm, label="recursion"):
        norm = float(norm)
        if not np.isfinite(norm):
            raise DivergenceError(f"{label}: residual is not finite")
        self.history.append(norm)
        if len(self.history) > self.window:
            past = self.history[-self.window - 1]
            if norm > self.factor * max(past, self.reference):
                raise DivergenceError(
                    f"{label}: residual grew from {past:.3g} to {norm:.3g} over "
                    f"{self.window} recursions; step size is outside the convergence region")
        return norm


def order_recursion(H, g=None, mu=1.0, Q=0, U0=None, guard=True):
    """Run ``Q`` order recursions from ``U0`` (default: the zeroth-order term)."""
    U = initial_precoder(H, g, mu) if U0 is None else np.array(U0, dtype=complex)
    P = np.shape(H)[-2]
    n_mats = int(np.prod(np.shape(H)[:-2], dtype=int))
    g_ = DivergenceGuard(np.sqrt(P * max(n_mats, 1))) if guard else None
    for _ in range(Q):
        U = order_recursion_step(U, H, g, mu)
        if g_ is not None:
            g_.check(np.linalg.norm(np.eye(P) - np.asarray(H) @ U), "order recursion")
    return U


# ---------------------------------------------------------------------------
# Step-size rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepSizeRule:
    """How to pick ``mu``.

    ``mode`` is one of ``independent``, ``correlated``, ``independent_noisy``,
    ``correlated_noisy`` or ``manual``.
    """

    mode: str = "independent"
    R: np.ndarray | None = None
    sigma_h2: float = 0.0
    mu: float | None = None


def step_size(rule):
    """Step size from a :class:`StepSizeRule`.

    independent: 1 + sigma_h2; correlated: 2 / (lmax(R) + lmin(R) + 2 sigma_h2);
    manual: ``rule.mu``.
    """
    mode = rule.mode
    s2 = float(rule.sigma_h2)
    if s2 < 0:
        raise ContractViolation("sigma_h2 must be >= 0")
    if mode == "manual":
        if rule.mu is None or not rule.mu > 0:
            raise ConfigError("manual step size needs mu > 0")
        return float(rule.mu)
    if mode in ("independent", "independent_noisy"):
        return 1.0 + (s2 if mode == "independent_noisy" else 0.0)
    if mode in ("correlated", "correlated_noisy"):
        if rule.R is None:
            raise ConfigError(f"step-size mode {mode!r} needs the correlation matrix R")
        w, _ = hermitian_eig(rule.R)
        if w[0] < -1e-9 * max(abs(w[-1]), 1.0):
            raise ContractViolation("correlation matrix R is indefinite")
        lmin = max(w[0], 0.0)
        extra = 2.0 * s2 if mode == "correlated_noisy" else 0.0
        return 2.0 / (w[-1] + lmin + extra)
    raise ConfigError(f"unknown step-size mode {mode!r}")


# ---------------------------------------------------------------------------
# Time-domain convolutional precoder
# ---------------------------------------------------------------------------

def window_offsets(K, half_window=None):
    """Tap indices (mod ``K``) kept by a window; ``None`` keeps all ``K``."""
    if half_window is None or 2 * half_window + 1 >= K:
        return np.arange(-(K // 2), K - K // 2) % K
    return np.arange(-half_window, half_window + 1) % K


def truncate_taps(taps, half_window=None):
    """Zero every tap outside ``-half_window..half_window`` (mod ``K``)."""
    taps = np.array(taps, dtype=complex)
    if half_window is None:
        return taps
    K = taps.shape[-1]
    keep = np.zeros(K, dtype=bool)
    keep[window_offsets(K, half_window)] = True
    taps[..., ~keep] = 0.0
    return taps


@dataclass
class ConvPrecoder:
    """Per-(antenna, user) FIR precoding filters.

    Attributes
    ----------
    taps : ndarray, shape (M, P, K)
        Circular tap arrays; index ``l mod K`` holds tap ``l``.
    half_window : int or None
        Taps ``-half_window..half_window`` are kept; ``None`` means untruncated.
    mu : float
    gains : ndarray, shape (P,)
    """

    taps: np.ndarray
    half_window: int | None = None
    mu: float = 1.0
    gains: np.ndarray = field(default=None)
    counter: int = 0
    last_error: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.gains is None:
            self.gains = np.ones(self.taps.shape[1])

    @property
    def M(self):
        return self.taps.shape[0]

    @property
    def P(self):
        return self.taps.shape[1]

    @property
    def K(self):
        return self.taps.shape[2]

    def offsets(self):
        return window_offsets(self.K, self.half_window)

    def frequency_response(self):
        """Equivalent per-subcarrier matrices, shape ``(K, M, P)``."""
        return np.moveaxis(dft(self.taps, K=self.K), -1, 0)


def freq_to_filter(U_freq, half_window=None, mu=1.0, gains=None):
    """Filter taps ``w = (1/K) F^H u`` for every (m, p), then windowed.

    Parameters
    ----------
    U_freq : ndarray, shape (K, M, P)
        Precoding matrices for all ``K`` subcarriers of one block.
    """
    U_freq = np.asarray(U_freq, dtype=complex)
    K = U_freq.shape[0]
    taps = dft(np.moveaxis(U_freq, 0, -1), K=K, inverse=True)
    return ConvPrecoder(truncate_taps(taps, half_window), half_window, mu,
                        None if gains is None else np.asarray(gains, dtype=float))


def initial_filter(cir, K, g=None, mu=1.0, half_window=None):
    """Zeroth-order filter ``w[m, p, l] = (mu/M) g_p^-1 conj(c[p, m, -l])``.

    ``cir`` has shape ``(P, M, L)`` (one block).
    """
    cir = np.asarray(cir, dtype=complex)
    P, M, L = cir.shape
    g = _gains(g, P)
    taps = np.zeros((M, P, K), dtype=complex)
    idx = (-np.arange(L)) % K
    taps[:, :, idx] = (mu / M) * np.conj(np.transpose(cir, (1, 0, 2))) / g[None, :, None]
    return ConvPrecoder(truncate_taps(taps, half_window), half_window, mu, g.copy())


def filter_error(taps, cir, offsets=None):
    """Residual ``e[i, p, l] = delta[i-p] delta[l] - sum_m c[i, m, l] (*) w[m, p, l]``.

    Convolutions are circular over ``K``.  Only taps listed in ``offsets``
    are read from ``taps``.
    """
    M, P, K = taps.shape
    L = cir.shape[-1]
    if offsets is None:
        offsets = np.arange(K)
    w_s = taps[:, :, offsets]
    e = np.zeros((P, P, K), dtype=complex)
    e[np.arange(P), np.arange(P), 0] = 1.0
    for t in range(L):
        e[:, :, (offsets + t) % K] -= np.einsum("im,mps->ips", cir[:, :, t], w_s)
    return e


def filter_update(conv, cir, g=None, mu=None, half_window="keep"):
    """One recursive update of the convolutional precoder.

    ``w[m,p,l] += (mu/M) sum_i g_i^-1 conj(c[i,m,-l]) (*) e[i,p,l]`` with every
    convolution circular over ``K``; only taps inside the window are stored.

    Parameters
    ----------
    conv : ConvPrecoder
    cir : ndarray, shape (P, M, L)
        Channel taps of the current block.
    g, mu : optional
        Override the gains / step size stored on ``conv``.
    half_window : int, None or "keep"
        Window for the updated filter (default: keep ``conv.half_window``).

    Returns
    -------
    ConvPrecoder
        Updated filter; its ``last_error`` holds ``e`` of shape ``(P, P, K)``.
    """
    cir = np.asarray(cir, dtype=complex)
    P, M, L = cir.shape
    if conv.taps.shape[:2] != (M, P):
        raise ContractViolation(f"filter is {conv.taps.shape[:2]}, channel is (M={M}, P={P})")
    K = conv.K
    g = conv.gains if g is None else _gains(g, P)
    mu = conv.mu if mu is None else float(mu)
    hw = conv.half_window if half_window == "keep" else half_window

    e = filter_error(conv.taps, cir, window_offsets(K, conv.half_window))
    out = window_offsets(K, hw)
    cg = np.conj(cir) / g[:, None, None]  # (P, M, L)
    delta = np.zeros((M, P, len(out)), dtype=complex)
    for t in range(L):
        delta += np.einsum("im,ips->mps", cg[:, :, t], e[:, :, (out + t) % K])
    delta *= mu / M
    if _FAULT["flip_sign"]:
        delta = -delta
    taps = np.zeros_like(conv.taps)
    taps[:, :, out] = conv.taps[:, :, out] + delta
    return replace(conv, taps=taps, half_window=hw, mu=mu, gains=g,
                   counter=conv.counter + 1, last_error=e)


def filter_recursion(conv, cir, Q, guard=True):
    """Apply ``Q`` filter updates with the same channel (order recursion in time domain)."""
    P = conv.P
    g_ = DivergenceGuard(np.sqrt(P)) if guard else None
    for _ in range(Q):
        conv = filter_update(conv, cir)
        if g_ is not None:
            g_.check(np.linalg.norm(conv.last_error), "filter recursion")
    return conv


# ---------------------------------------------------------------------------
# Binary snapshot of a ConvPrecoder
# ---------------------------------------------------------------------------
#
# Layout (little endian): magic b"LSAW", u32 version 1, u64 M, P, K,
# i64 half_window (-1 = untruncated), f64 mu, P x f64 gains,
# M*P*K x c16 taps in C order over (m, p, l).

_W_HEADER = struct.Struct("<4sI3Qqd")


def dump_filter(conv, path):
    hw = -1 if conv.half_window is None else int(conv.half_window)
    with open(path, "wb") as fh:
        fh.write(_W_HEADER.pack(b"LSAW", 1, conv.M, conv.P, conv.K, hw, conv.mu))
        fh.write(np.asarray(conv.gains, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(conv.taps, dtype="<c16").tobytes())


def load_filter(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, M, P, K, hw, mu = _W_HEADER.unpack_from(raw)
    if magic != b"LSAW" or version != 1:
        raise ContractViolation("not a filter snapshot")
    off = _W_HEADER.size
    gains = np.frombuffer(raw, dtype="<f8", count=P, offset=off).astype(float)
    off += 8 * P
    taps = np.frombuffer(raw, dtype="<c16", count=M * P * K, offset=off).reshape(M, P, K).astype(complex)
    return ConvPrecoder(taps, None if hw < 0 else int(hw), float(mu), gains)
