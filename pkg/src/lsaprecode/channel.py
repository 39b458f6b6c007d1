"""Frequency-selective Rayleigh channels with spatial and temporal correlation.

A frame holds the channel of ``P`` single-antenna users seen from ``M`` base
station antennas over ``N`` consecutive OFDM blocks.  Taps are drawn on the
sample grid (CIR) and turned into per-subcarrier responses (CFR) by a
zero-padded DFT.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractViolation, DimensionError, FactorizationError
from .numerics import RngStream, bessel_j0, cholesky, dft, gaussian_complex

# Extended Typical Urban profile, 3GPP TS 36.104 Annex B.2.
ETU_DELAYS_NS = (0, 50, 120, 200, 230, 500, 1600, 2300, 5000)
ETU_POWERS_DB = (-1.0, -1.0, -1.0, 0.0, 0.0, 0.0, -3.0, -5.0, -7.0)

# LTE 5 MHz numerology: K = 512 at 15 kHz spacing.
DEFAULT_SAMPLE_RATE = 512 * 15e3


@dataclass(frozen=True)
class PowerDelayProfile:
    """Tap delays/powers and their projection onto the sample grid.

    ``grid_powers[l]`` is the (unit-sum) power of sample-spaced tap ``l``;
    ``len(grid_powers)`` is the channel length ``L``.
    """

    name: str
    delays: np.ndarray
    powers: np.ndarray
    sample_rate: float
    grid_powers: np.ndarray

    @property
    def L(self):
        return len(self.grid_powers)

    @property
    def max_delay(self):
        return float(np.max(self.delays))


def _parse_profile(profile_name):
    name = str(profile_name).strip().lower()
    if name.startswith("uniform"):
        inner = name[len("uniform"):].strip("() ")
        try:
            n = int(inner)
        except ValueError:
            raise ConfigError(f"uniform profile needs a tap count, e.g. 'uniform(4)': {profile_name!r}")
        if n < 1:
            raise ConfigError("uniform profile needs at least one tap")
        return "uniform", n
    if name in ("etu", "single_tap"):
        return name, None
    raise ConfigError(f"unknown power delay profile {profile_name!r}")


def build_pdp(profile_name, sample_rate=DEFAULT_SAMPLE_RATE, L=None):
    """Build a power delay profile on a sample grid.

    Parameters
    ----------
    profile_name : str
        ``"etu"``, ``"single_tap"`` or ``"uniform(n)"``.
    sample_rate : float
        Sampling rate in Hz.
    L : int, optional
        Channel length override.  Taps whose nearest sample falls at or beyond
        ``L`` are folded onto the last tap so total power is preserved.

    Notes
    -----
    ETU taps are assigned to the nearest sample and colliding powers summed.
    At 7.68 MHz this spans samples 0..38, i.e. a natural length of 39.
    """
    if not sample_rate > 0:
        raise ConfigError("sample_rate must be positive")
    kind, n = _parse_profile(profile_name)
    Ts = 1.0 / sample_rate
    if kind == "single_tap":
        delays = np.zeros(1)
        powers = np.ones(1)
    elif kind == "uniform":
        delays = np.arange(n) * Ts
        powers = np.full(n, 1.0 / n)
    else:
        delays = np.asarray(ETU_DELAYS_NS, dtype=float) * 1e-9
        powers = 10.0 ** (np.asarray(ETU_POWERS_DB) / 10.0)
    powers = powers / powers.sum()

    idx = np.rint(delays * sample_rate).astype(int)
    natural = int(idx.max()) + 1
    length = natural if L is None else int(L)
    if length < 1:
        raise ConfigError("channel length L must be >= 1")
    idx = np.minimum(idx, length - 1)
    grid = np.zeros(length)
    np.add.at(grid, idx, powers)
    label = profile_name if kind != "uniform" else f"uniform({n})"
    return PowerDelayProfile(label, delays, powers, float(sample_rate), grid)


def spatial_correlation(M, D=None, independent=False):
    """Uniform-linear-array antenna correlation ``R[m, m1] = J0(2 pi (m - m1) D / (M - 1))``.

    ``independent=True`` (or ``D=None``) returns the identity.
    """
    if M < 1:
        raise ConfigError("M must be >= 1")
    if independent or D is None:
        return np.eye(M)
    if D < 0:
        raise ConfigError("array size D must be >= 0")
    if M == 1:
        return np.ones((1, 1))
    lag = np.arange(M)
    rho = bessel_j0(2.0 * np.pi * lag * D / (M - 1))
    return rho[np.abs(np.subtract.outer(lag, lag))]


def temporal_correlation(N, fd, T):
    """Block-to-block correlation ``J0(2 pi fd (i - j) T)`` as an ``N x N`` matrix."""
    lag = np.arange(N)
    rho = bessel_j0(2.0 * np.pi * fd * T * lag)
    return rho[np.abs(np.subtract.outer(lag, lag))]


def cir_to_cfr(cir, K):
    """Per-subcarrier response ``h[k] = sum_l c[l] exp(-2j pi l k / K)`` along the last axis."""
    cir = np.asarray(cir)
    L = cir.shape[-1]
    if L > K:
        raise DimensionError(f"channel length {L} exceeds FFT size {K}")
    padded = np.zeros(cir.shape[:-1] + (K,), dtype=complex)
    padded[..., :L] = cir
    return dft(padded, K=K)


@dataclass(frozen=True)
class ChannelFrame:
    """One frame of channel state.

    Attributes
    ----------
    cir : ndarray, shape (P, M, N, L)
    gains : ndarray, shape (P,)
        Large-scale power gains ``g_p``.
    K : int
        FFT size used for the CFR.
    T : float
        Block duration in seconds.
    fd : float
        Doppler frequency in Hz.
    """

    cir: np.ndarray
    gains: np.ndarray
    K: int
    T: float = 1.0 / 15e3
    fd: float = 0.0
    _cfr: list = field(default_factory=list, repr=False, compare=False)

    @property
    def P(self):
        return self.cir.shape[0]

    @property
    def M(self):
        return self.cir.shape[1]

    @property
    def N(self):
        return self.cir.shape[2]

    @property
    def L(self):
        return self.cir.shape[3]

    @property
    def cfr(self):
        """CFR tensor ``h[p, m, n, k]``, computed once on first access."""
        if not self._cfr:
            self._cfr.append(cir_to_cfr(self.cir, self.K))
        return self._cfr[0]

    def cfr_at(self, ks):
        """CFR on a subset of subcarriers, shape ``(P, M, N, len(ks))``.

        Direct evaluation of the DFT sum; avoids the full ``K``-point tensor.
        """
        ks = np.asarray(ks)
        E = np.exp(-2j * np.pi * np.outer(np.arange(self.L), ks) / self.K)
        return self.cir @ E

    def H(self, n, k=None):
        """Channel matrices ``H[n, k]`` of shape ``(K, P, M)`` (or ``(P, M)`` for one ``k``)."""
        h = self.cfr[:, :, n, :] if k is None else self.cfr[:, :, n, k]
        return np.moveaxis(h, -1, 0) if k is None else h

    def H_all(self):
        """All channel matrices, shape ``(N, K, P, M)``."""
        return np.transpose(self.cfr, (2, 3, 0, 1))


@dataclass(frozen=True)
class NoisyChannelFrame(ChannelFrame):
    """Channel estimate ``hhat = h + htilde`` with error variance ``g_p * sigma_h2``."""

    sigma_h2: float = 0.0


def generate_frame(pdp, M, P, N, fd, T, R, g, rng, K=512):
    """Draw one frame of correlated Rayleigh taps.

    Each tap of each user is an ``M x N`` complex Gaussian matrix coloured
    spatially by ``chol(R)`` and temporally by the Cholesky factor of the
    ``J0`` Toeplitz matrix, then scaled by ``sqrt(g_p * pdp.grid_powers[l])``.

    Parameters
    ----------
    rng : RngStream or numpy.random.Generator
    """
    if N < 1 or M < 1 or P < 1:
        raise ConfigError("M, P and N must all be >= 1")
    R = np.asarray(R)
    if R.shape != (M, M):
        raise DimensionError(f"R has shape {R.shape}, expected ({M}, {M})")
    g = np.broadcast_to(np.asarray(g, dtype=float), (P,)).copy()
    L = pdp.L
    z = gaussian_complex(rng, (P, L, M, N), 1.0)

    if fd == 0:
        z = np.broadcast_to(z[..., :1], z.shape)
    else:
        Tt = temporal_correlation(N, fd, T)
        try:
            Lt = cholesky(Tt)
        except FactorizationError as exc:
            raise FactorizationError(
                f"temporal correlation not factorizable for fd={fd} Hz, T={T} s, N={N}") from exc
        z = z @ Lt.T
    if not np.array_equal(R, np.eye(M)):
        Ls = cholesky(R)
        z = np.einsum("ij,pljn->plin", Ls, z)
    scale = np.sqrt(g[:, None] * pdp.grid_powers[None, :])  # (P, L)
    cir = scale[:, :, None, None] * z
    cir = np.ascontiguousarray(np.transpose(cir, (0, 2, 3, 1)))  # (P, M, N, L)
    return ChannelFrame(cir=cir, gains=g, K=int(K), T=float(T), fd=float(fd))


def inject_estimation_error(frame, sigma_h2, rng):
    """Add tap-domain estimation error so that each subcarrier sees ``CN(0, g_p sigma_h2)``.

    The error has ``L`` i.i.d. taps of variance ``g_p sigma_h2 / L`` per
    ``(p, m, n)``, so the estimate is still an ``L``-tap channel.
    """
    if sigma_h2 < 0:
        raise ContractViolation("sigma_h2 must be >= 0")
    cir = frame.cir
    if sigma_h2 > 0:
        err = gaussian_complex(rng, cir.shape, 1.0)
        scale = np.sqrt(frame.gains * sigma_h2 / frame.L)
        cir = cir + scale[:, None, None, None] * err
    else:
        cir = cir.copy()
    return NoisyChannelFrame(cir=cir, gains=frame.gains.copy(), K=frame.K, T=frame.T,
                             fd=frame.fd, sigma_h2=float(sigma_h2))


# ---------------------------------------------------------------------------
# Binary dump / load
# ---------------------------------------------------------------------------
#
# Layout (little endian):
#   magic   4s   b"LSAC"
#   version u32  1
#   P M N L K    5 x u64
#   T fd sigma_h2  3 x f64
#   gains        P x f64
#   cir          P*M*N*L x (re f64, im f64), C order over (p, m, n, l)

_MAGIC = b"LSAC"
_HEADER = struct.Struct("<4sI5Q3d")


def dump_frame(frame, path):
    P, M, N, L = frame.cir.shape
    sigma = getattr(frame, "sigma_h2", 0.0)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, 1, P, M, N, L, frame.K, frame.T, frame.fd, sigma))
        fh.write(np.asarray(frame.gains, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(frame.cir, dtype="<c16").tobytes())


def load_frame(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise DimensionError("truncated channel dump")
    magic, version, P, M, N, L, K, T, fd, sigma = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != 1:
        raise DimensionError("not a channel dump (bad magic or version)")
    off = _HEADER.size
    gains = np.frombuffer(raw, dtype="<f8", count=P, offset=off).astype(float)
    off += 8 * P
    count = P * M * N * L
    if len(raw) != off + 16 * count:
        raise DimensionError("channel dump size does not match its header")
    cir = np.frombuffer(raw, dtype="<c16", count=count, offset=off).reshape(P, M, N, L).astype(complex)
    if sigma > 0:
        return NoisyChannelFrame(cir=cir, gains=gains, K=int(K), T=T, fd=fd, sigma_h2=sigma)
    return ChannelFrame(cir=cir, gains=gains, K=int(K), T=T, fd=fd)

