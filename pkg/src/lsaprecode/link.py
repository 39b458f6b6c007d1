"""OFDM downlink chain: QPSK, precoding (per subcarrier or FIR), CP, channel, detection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import build_pdp, generate_frame, inject_estimation_error, spatial_correlation
from .errors import ConfigError, DimensionError
from .metrics import (
    MetricsRecord, OpCounter, complexity_counts, init_mse_theory, normalized_gram_eigs,
    precoder_mse, tracking_mse_theory, chanerr_mse_theory,
)
from .numerics import RngStream, dft, gaussian_complex
from .precoder import (
    ConvPrecoder, DivergenceGuard, StepSizeRule, filter_recursion, filter_update,
    freq_to_filter, initial_filter, mf, order_recursion, order_recursion_step, step_size, tpe,
    zf_exact,
)

# Sub-stream purposes inside one trial.
CHANNEL, ESTIMATION, DATA, NOISE = range(4)


@dataclass(frozen=True)
class Numerology:
    """FFT size, data-carrier layout, CP and block timing."""

    K: int = 512
    n_active: int = 300
    cp_len: int = 40
    delta_f: float = 15e3
    N: int = 14

    def __post_init__(self):
        if self.n_active % 2 or not 0 < self.n_active < self.K:
            raise ConfigError("n_active must be even and smaller than K")

    @property
    def T(self):
        return 1.0 / self.delta_f

    @property
    def active(self):
        """Data subcarriers: ``n_active/2`` on each side of an empty DC carrier."""
        half = self.n_active // 2
        return np.concatenate([np.arange(1, half + 1), np.arange(self.K - half, self.K)])

    @classmethod
    def from_config(cls, cfg):
        return cls(cfg.K, cfg.active_subcarriers, cfg.cp_len, cfg.delta_f, cfg.blocks_per_frame)


# ---------------------------------------------------------------------------
# QPSK
# ---------------------------------------------------------------------------

def qpsk_map(bits, Es=1.0):
    """Gray-mapped QPSK: bit pair ``(b0, b1)`` -> ``((1-2 b0) + j (1-2 b1)) sqrt(Es/2)``."""
    bits = np.asarray(bits, dtype=np.int8)
    if bits.shape[-1] % 2:
        raise DimensionError("qpsk_map needs an even number of bits")
    b = bits.reshape(bits.shape[:-1] + (-1, 2))
    a = np.sqrt(Es / 2.0)
    return a * ((1 - 2 * b[..., 0]) + 1j * (1 - 2 * b[..., 1]))


def qpsk_detect(symbols):
    """Quadrant decision; inverse of :func:`qpsk_map` on noiseless input."""
    s = np.asarray(symbols)
    bits = np.stack([(s.real < 0), (s.imag < 0)], axis=-1).astype(np.int8)
    return bits.reshape(s.shape[:-1] + (-1,))


def symbol_errors(tx, rx):
    """Element-wise symbol error indicator (wrong quadrant)."""
    return (np.signbit(tx.real) != np.signbit(rx.real)) | (np.signbit(tx.imag) != np.signbit(rx.imag))


# ---------------------------------------------------------------------------
# Transmitters
# ---------------------------------------------------------------------------

def place_on_grid(x, num):
    """``(P, N, n_active)`` data -> ``(P, N, K)`` grid with zero guards and DC."""
    x = np.asarray(x, dtype=complex)
    if x.shape[-1] != num.n_active:
        raise DimensionError(f"expected {num.n_active} data subcarriers, got {x.shape[-1]}")
    grid = np.zeros(x.shape[:-1] + (num.K,), dtype=complex)
    grid[..., num.active] = x
    return grid


def add_cp(s, cp_len):
    if cp_len == 0:
        return s
    return np.concatenate([s[..., -cp_len:], s], axis=-1)


def remove_cp(r, cp_len):
    return r[..., cp_len:]


def transmit_freq(x, U, num, counter=None):
    """Per-subcarrier precoding followed by one IFFT per antenna.

    Parameters
    ----------
    x : ndarray, shape (P, N, n_active)
    U : ndarray, shape (N, n_active | K, M, P) or (n_active | K, M, P)
        Precoders for the data subcarriers (or for all ``K``).

    Returns
    -------
    ndarray, shape (M, N, K + cp_len)
        Time samples ``s_m[n, l] = (1/sqrt K) sum_k S_m[n, k] exp(2j pi k l / K)``.
    """
    x = np.asarray(x, dtype=complex)
    P, N, A = x.shape
    U = np.asarray(U)
    if U.ndim == 3:
        U = np.broadcast_to(U, (N,) + U.shape)
    if U.shape[1] == num.K:
        U = U[:, num.active]
    if U.shape != (N, A, U.shape[2], P):
        raise DimensionError(f"precoder shape {U.shape} does not match data {x.shape}")
    M = U.shape[2]
    S_act = np.einsum("nkmp,pnk->mnk", U, x)
    S = np.zeros((M, N, num.K), dtype=complex)
    S[:, :, num.active] = S_act
    s = np.sqrt(num.K) * dft(S, K=num.K, inverse=True)
    if counter is not None:
        counter.add_transforms(M * N, num.K)
        counter.precode_cm += P * M * num.K * N
        counter.precode_cm_total += P * M * A * N
        counter.blocks += N
    return add_cp(s, num.cp_len)


def _signed(offsets, K):
    return np.where(offsets < K - K // 2, offsets, offsets - K)


def transmit_conv(x, filters, num, counter=None):
    """One IFFT per user, then FIR precoding per (antenna, user) pair.

    Each user's time signal is circularly extended by the filter's reach on
    both sides, so the linear convolution over the extended block equals a
    circular convolution over ``K``.

    Parameters
    ----------
    x : ndarray, shape (P, N, n_active)
    filters : ConvPrecoder or sequence of N ConvPrecoder
        Filter used in each block.

    Returns
    -------
    ndarray, shape (M, N, K + cp_len)
    """
    x = np.asarray(x, dtype=complex)
    P, N, _ = x.shape
    K = num.K
    if isinstance(filters, ConvPrecoder):
        filters = [filters] * N
    if len(filters) != N:
        raise DimensionError(f"need {N} filters, got {len(filters)}")
    a = np.sqrt(K) * dft(place_on_grid(x, num), K=K, inverse=True)  # (P, N, K)
    M = filters[0].M
    out = np.zeros((M, N, K), dtype=complex)
    for n, f in enumerate(filters):
        if f.P != P or f.K != K:
            raise DimensionError("filter dimensions do not match the signal")
        offs = f.offsets()
        j = _signed(offs, K)
        ext = int(np.max(np.abs(j)))
        if ext > K:
            raise DimensionError("filter window exceeds the circular extension")
        an = a[:, n]
        extended = np.concatenate([an[:, K - ext:], an, an[:, :ext]], axis=-1) if ext else an
        acc = np.zeros((M, K), dtype=complex)
        for tap, jj in zip(offs, j):
            acc += f.taps[:, :, tap] @ extended[:, ext - jj: ext - jj + K]
        out[:, n] = acc
        if counter is not None:
            counter.precode_cm += P * M * len(offs)
            counter.precode_cm_total += P * M * len(offs) * K
    if counter is not None:
        counter.add_transforms(P * N, K)
        counter.blocks += N
    return add_cp(out, num.cp_len)


# ---------------------------------------------------------------------------
# Channel and receiver
# ---------------------------------------------------------------------------

def demodulate(r, num):
    """Strip the CP and return ``(1/sqrt K) FFT`` of each block."""
    return dft(remove_cp(r, num.cp_len), K=num.K) / np.sqrt(num.K)


def _propagate_time(tx, frame, num):
    # Serial stream per antenna, convolved with block n's taps over block n's
    # samples; the CP region picks up the previous block's tail.
    M, N, blk = tx.shape
    P, _, _, L = frame.cir.shape
    stream = np.concatenate([np.zeros((M, L - 1), dtype=complex), tx.reshape(M, N * blk)], axis=1)
    r = np.zeros((P, N, blk), dtype=complex)
    for n in range(N):
        start = L - 1 + n * blk
        for t in range(L):
            seg = stream[:, start - t: start - t + blk]  # (M, blk)
            r[:, n] += frame.cir[:, :, n, t] @ seg
    return r


def propagate(tx, frame, N0=0.0, rng=None, num=None, time_domain=False):
    """Received subcarrier symbols ``y[p, n, k]`` for all ``K`` subcarriers.

    The default path multiplies demodulated antenna symbols by the CFR; with
    ``time_domain=True`` the taps are convolved with the sample stream (CP
    included) instead.  Noise ``CN(0, N0)`` is added per subcarrier.
    """
    if num is None:
        raise ConfigError("propagate needs the numerology")
    if time_domain:
        y = demodulate(_propagate_time(tx, frame, num), num)
    else:
        S = demodulate(tx, num)  # (M, N, K)
        y = np.einsum("pmnk,mnk->pnk", frame.cfr, S)
    if N0 > 0:
        if rng is None:
            raise ConfigError("noise requested without a random stream")
        y = y + gaussian_complex(rng, y.shape, N0)
    return y


# ---------------------------------------------------------------------------
# One frame of the experiment loop
# ---------------------------------------------------------------------------

def resolve_mu(cfg, R=None):
    """Step size for a config: an explicit number, or the rule matching D / sigma_h2."""
    if cfg.mu != "auto":
        return float(cfg.mu)
    noisy = cfg.sigma_h2 > 0
    if cfg.independent:
        rule = StepSizeRule("independent_noisy" if noisy else "independent", sigma_h2=cfg.sigma_h2)
    else:
        if R is None:
            R = spatial_correlation(cfg.M, cfg.D)
        rule = StepSizeRule("correlated_noisy" if noisy else "correlated", R=R, sigma_h2=cfg.sigma_h2)
    return step_size(rule)


def _freq_precoders(cfg, est, n, ks, mu):
    """Precoders of the frequency-domain approaches for block ``n`` on subcarriers ``ks``."""
    name, arg = cfg.approach_name, cfg.approach_arg
    g = est.gains
    if name == "zf":
        B = 1 if arg is None else arg
        heads = (ks // B) * B
        uniq, inv = np.unique(heads, return_inverse=True)
        H = np.moveaxis(est.cfr_at(uniq)[:, :, n, :], -1, 0)
        return zf_exact(H, g)[inv]
    H = np.moveaxis(est.cfr_at(ks)[:, :, n, :], -1, 0)
    if name == "mf":
        return mf(H, g)
    if name == "tpe":
        return tpe(H, g, 2 if arg is None else arg, mu)
    raise ConfigError(f"approach {cfg.approach!r} is not frequency-domain")


def _init_filter(cfg, est, n, mu):
    hw = cfg.half_window
    if cfg.init_mode == "oracle":
        H = np.moveaxis(est.cfr_at(np.arange(cfg.K))[:, :, n, :], -1, 0)
        return freq_to_filter(zf_exact(H), hw, mu, est.gains)
    conv = initial_filter(est.cir[:, :, n, :], cfg.K, est.gains, mu, hw)
    return filter_recursion(conv, est.cir[:, :, n, :], cfg.init_q)


def run_frame(cfg, trial=0, collect_symbols=False):
    """Simulate one frame of ``cfg`` with trial index ``trial``.

    Returns a :class:`MetricsRecord` holding per-block precoder MSE against
    perfect-CSI ZF, the matching closed-form reference, symbol-error counts
    for every Es/N0 point and the instrumented operation counts.  With
    ``collect_symbols`` the record also gets ``tx_symbols`` / ``rx_symbols``.
    """
    rng = RngStream(cfg.seed, trial)
    num = Numerology.from_config(cfg)
    ks = num.active
    N, M, P = cfg.N, cfg.M, cfg.P
    g = (1.0,) * P if cfg.gains is None else cfg.gains

    pdp = build_pdp(cfg.pdp, cfg.sample_rate, L=cfg.L)
    R = spatial_correlation(M, cfg.D)
    frame = generate_frame(pdp, M, P, N, cfg.fd_hz, cfg.T, R, g, rng.generator(CHANNEL), K=cfg.K)
    est = inject_estimation_error(frame, cfg.sigma_h2, rng.generator(ESTIMATION))
    mu = resolve_mu(cfg, R)

    counter = OpCounter()
    mse = np.zeros(N)
    H_true = np.moveaxis(frame.cfr_at(ks), -1, 1)  # (P, A, M, N)
    proposed = cfg.approach_name == "proposed"
    filters = []
    U_blocks = []
    conv = None
    guard = DivergenceGuard(np.sqrt(P))
    for n in range(N):
        Hn = np.transpose(H_true[..., n], (1, 0, 2))  # (A, P, M)
        U_o = zf_exact(Hn)
        if proposed:
            reinit = n == 0 or (cfg.reinit_period is not None and n % cfg.reinit_period == 0)
            if reinit:
                conv = _init_filter(cfg, est, n, mu)
                if cfg.init_mode == "order_recursion":
                    counter.coeff_cm += 2 * P * P * M * cfg.L * (1 + cfg.init_q)
            else:
                conv = filter_update(conv, est.cir[:, :, n - 1, :])
                counter.coeff_cm += 2 * P * P * M * cfg.L
                guard.check(np.linalg.norm(conv.last_error), "filter tracking")
            filters.append(conv)
            U = np.moveaxis(dft(conv.taps, K=cfg.K)[:, :, ks], -1, 0)
        else:
            U = _freq_precoders(cfg, est, n, ks, mu)
            U_blocks.append(U)
        mse[n] = precoder_mse(U, U_o, g)

    theory = _theory_series(cfg, mu, H_true, g)

    bits = rng.generator(DATA).integers(0, 2, size=(P, N, num.n_active * 2), dtype=np.int8)
    x = qpsk_map(bits)
    if proposed:
        tx = transmit_conv(x, filters, num, counter)
    else:
        tx = transmit_freq(x, np.stack(U_blocks), num, counter)
        if cfg.approach_name == "zf":
            B = 1 if cfg.approach_arg is None else cfg.approach_arg
            counter.coeff_cm += N * (-(-cfg.K // B)) * (2 * P * P * M + P ** 3)
    y_clean = propagate(tx, frame, 0.0, num=num)[:, :, ks]
    z = gaussian_complex(rng.generator(NOISE), y_clean.shape, 1.0)

    errors = np.zeros((len(cfg.esn0_db), N), dtype=np.int64)
    rx_all = []
    for i, snr_db in enumerate(cfg.esn0_db):
        N0 = 10.0 ** (-snr_db / 10.0)
        y = y_clean + np.sqrt(N0) * z
        errors[i] = symbol_errors(x, y).sum(axis=(0, 2))
        if collect_symbols:
            rx_all.append(y)
    symbols = np.full(N, P * num.n_active, dtype=np.int64)
    counts = table_counts(cfg)

    rec = MetricsRecord(mse_sum=mse, theory_sum=theory, errors=errors, symbols=symbols,
                        esn0_db=tuple(cfg.esn0_db), counts=counts, audit=counter, frames=1,
                        config=cfg.to_dict(), seed=cfg.seed, mu=mu)
    if collect_symbols:
        rec.tx_symbols = x
        rec.rx_symbols = rx_all
    return rec


def table_counts(cfg):
    """Closed-form per-block CM counts for the approach of ``cfg`` (None if undefined)."""
    name, arg = cfg.approach_name, cfg.approach_arg
    if name == "tpe":
        Q = 2 if arg is None else arg
        if Q < 1:
            return None
        return complexity_counts("tpe", cfg.M, cfg.P, cfg.K, cfg.L, Q=Q)
    # The proposed scheme is counted in steady-state tracking: one filter
    # update per block, initialization excluded.
    return complexity_counts(cfg.approach, cfg.M, cfg.P, cfg.K, cfg.L)


def _theory_series(cfg, mu, H_true, g):
    """Closed-form reference per block (NaN where no formula applies)."""
    N, M, P = cfg.N, cfg.M, cfg.P
    out = np.full(N, np.nan)
    if cfg.sigma_h2 > 0:
        out[:] = chanerr_mse_theory(P, M, cfg.sigma_h2)
        return out
    name = cfg.approach_name
    if name == "zf" and (cfg.approach_arg in (None, 1)):
        out[:] = 0.0
        return out
    if name != "proposed":
        return out
    if cfg.init_mode == "oracle":
        if cfg.fd_hz == 0 and cfg.untruncated:
            out[:] = 0.0
        elif cfg.fd_hz > 0 and cfg.independent:
            out[:] = [tracking_mse_theory(cfg.fd_hz, cfg.T, M, P, n).exact for n in range(N)]
        return out
    if cfg.fd_hz == 0 and cfg.reinit_period is None:
        H0 = np.transpose(H_true[..., 0], (1, 0, 2))
        eigs = normalized_gram_eigs(H0, g)
        for n in range(N):
            out[n] = float(np.mean(init_mse_theory(eigs, mu, cfg.init_q + n, M)))
    return out


# ---------------------------------------------------------------------------
# Flat-channel ensembles (precoder error only, no signal chain)
# ---------------------------------------------------------------------------

def _flat_frames(M, P, N, fd, T, R, seed, trial):
    pdp = build_pdp("single_tap")
    fr = generate_frame(pdp, M, P, N, fd, T, R, 1.0, RngStream(seed, trial).generator(CHANNEL), K=1)
    return fr, np.transpose(fr.cir[..., 0], (2, 0, 1))  # (N, P, M)


def tracking_mse_ensemble(M, P, fd, T, N=14, frames=2000, seed=0, mu=1.0, D=None):
    """Mean tracking error per block over ``frames`` flat-fading frames.

    Block 0 starts from the exact ZF precoder; block ``n`` uses the time
    recursion driven by the channel of block ``n - 1``, and its error is
    measured against exact ZF of block ``n``.  Returns an array of length ``N``.
    """
    R = spatial_correlation(M, D)
    total = np.zeros(N)
    for t in range(frames):
        _, H = _flat_frames(M, P, N, fd, T, R, seed, t)
        U_o = zf_exact(H)
        U = U_o[0]
        for n in range(1, N):
            U = order_recursion_step(U, H[n - 1], None, mu)
            total[n] += precoder_mse(U, U_o[n])
    return total / frames


def chanerr_mse_ensemble(M, P, sigma_h2, trials=1000, seed=0, Q=60, mu=None):
    """Mean error of the converged precoder built from an imperfect channel.

    The precoder is the order recursion run ``Q`` times on ``H + Htilde``
    (``Htilde ~ CN(0, sigma_h2)``) with step ``1 + sigma_h2`` by default,
    compared with exact ZF of the true ``H``.
    """
    mu = 1.0 + sigma_h2 if mu is None else mu
    R = np.eye(M)
    total = 0.0
    for t in range(trials):
        _, H = _flat_frames(M, P, 1, 0.0, 1.0, R, seed, t)
        H = H[0]
        E = gaussian_complex(RngStream(seed, t).generator(ESTIMATION), H.shape, sigma_h2) \
            if sigma_h2 > 0 else 0.0
        U = order_recursion(H + E, None, mu, Q=Q)
        total += precoder_mse(U, zf_exact(H))
    return total / trials
