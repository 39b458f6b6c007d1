"""Measured metrics, closed-form MSE oracles and complex-multiplication counts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractViolation, SingularMatrixError
from .numerics import hermitian_eig

CSV_COLUMNS = (
    "scenario_id", "approach", "M", "P", "K", "L", "B", "Q", "mu", "fd_hz",
    "sigma_h2", "esn0_db", "block_n", "mse_measured", "mse_theory", "ser",
    "ifft_cm", "precode_cm", "coeff_cm", "trials", "seed",
)


# ---------------------------------------------------------------------------
# Measured quantities
# ---------------------------------------------------------------------------

def precoder_mse(U, U_ref, g=None):
    """``||(U_ref - U) G^1/2||_F^2`` averaged over all leading (subcarrier) axes."""
    U = np.asarray(U)
    U_ref = np.asarray(U_ref)
    if U.shape != U_ref.shape:
        raise ContractViolation(f"precoder_mse: shapes {U.shape} and {U_ref.shape} differ")
    P = U.shape[-1]
    g = np.ones(P) if g is None else np.broadcast_to(np.asarray(g, dtype=float), (P,))
    err = np.sum(np.abs(U_ref - U) ** 2 * g, axis=(-1, -2))
    return float(np.mean(err))


def normalized_gram_eigs(H, g=None):
    """Eigenvalues of ``(1/M) G^-1/2 H H^H G^-1/2`` for each ``H`` (ascending)."""
    H = np.asarray(H, dtype=complex)
    P, M = H.shape[-2:]
    g = np.ones(P) if g is None else np.broadcast_to(np.asarray(g, dtype=float), (P,))
    s = 1.0 / np.sqrt(g)
    A = (H @ np.conj(np.swapaxes(H, -1, -2))) / M
    A = A * s[:, None] * s[None, :]
    return hermitian_eig(A)[0]


# ---------------------------------------------------------------------------
# Closed-form oracles
# ---------------------------------------------------------------------------

def init_mse_theory(eigs, mu, Q, M):
    """Initialization error after ``Q`` order recursions.

    ``(1/M) sum_p lambda_p^-1 (1 - mu lambda_p)^(2(Q+1))``.  ``eigs`` may carry
    leading batch axes; the result then has those axes.
    """
    eigs = np.asarray(eigs, dtype=float)
    if np.any(eigs <= 0):
        raise SingularMatrixError("init_mse_theory: eigenvalues must be positive")
    val = np.sum((1.0 - mu * eigs) ** (2 * (Q + 1)) / eigs, axis=-1) / M
    return float(val) if np.ndim(val) == 0 else val


@dataclass(frozen=True)
class TrackingMSE:
    exact: float
    approx: float


def tracking_mse_theory(fd, T, M, P, n):
    """Tracking error at block ``n`` after an exact start, for independent channels.

    exact:  ``(2 pi^2 fd^2 T^2 M / P) [1 - (1 - P/M)^n]^2``
    approx: ``2 pi^2 fd^2 T^2 n^2 P / M`` (valid while ``n P / M`` is small).
    """
    if not 0 < P <= M:
        raise ContractViolation("tracking_mse_theory needs 0 < P <= M")
    if n < 0:
        raise ContractViolation("block index must be >= 0")
    c = 2.0 * math.pi ** 2 * fd ** 2 * T ** 2
    exact = c * (M / P) * (1.0 - (1.0 - P / M) ** n) ** 2
    approx = c * n ** 2 * P / M
    return TrackingMSE(exact, approx)


def chanerr_mse_theory(P, M, sigma_h2, small=False):
    """Error floor from imperfect CSI: ``P s / (M (1 + s))`` (``P s / M`` if ``small``)."""
    if sigma_h2 < 0:
        raise ContractViolation("sigma_h2 must be >= 0")
    if small:
        return P * sigma_h2 / M
    return P * sigma_h2 / (M * (1.0 + sigma_h2))


# ---------------------------------------------------------------------------
# Complexity (complex multiplications)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComplexityCounts:
    """CMs per OFDM block split as IFFT / precoding operation / coefficient calculation."""

    ifft: int
    precode: int
    coeff: int

    @property
    def total(self):
        return self.ifft + self.precode + self.coeff


def _log2(K):
    if K < 2 or K & (K - 1):
        raise ConfigError(f"K must be a power of two >= 2, got {K}")
    return K.bit_length() - 1


def parse_approach(approach):
    """``"zf(12)"`` -> ``("zf", 12)``; ``"tpe(3)"`` -> ``("tpe", 3)``; others -> ``(name, None)``."""
    a = str(approach).strip().lower()
    if "(" in a:
        name, arg = a.split("(", 1)
        return name.strip(), int(arg.rstrip(") "))
    return a, None


def complexity_counts(approach, M, P, K, L, B=None, Q=None, init_orders=0):
    """Per-block CM counts of one approach.

    Parameters
    ----------
    approach : str
        ``"proposed"``, ``"zf"`` / ``"zf(B)"`` or ``"tpe"`` / ``"tpe(Q)"``.
    init_orders : int
        For ``proposed``, extra order recursions spent on initialization; each
        costs one more ``2 P^2 M L`` coefficient update.

    Notes
    -----
    The ``O(P^3) K`` term of shared ZF is taken with constant 1, and the
    ``1/B`` factor as ``ceil(K / B)`` groups, so counts are exact integers and
    match ``(2 P^2 M K + P^3 K) / B`` whenever ``B`` divides ``K``.
    """
    if min(M, P, K, L) < 1:
        raise ConfigError("complexity_counts: parameters must be positive")
    name, arg = parse_approach(approach)
    lg = _log2(K)
    if name == "proposed":
        return ComplexityCounts(P * K * lg // 2, P * M * (2 * L + 1),
                                2 * P * P * M * L * (1 + int(init_orders)))
    if name == "zf":
        B = arg if B is None else B
        B = 1 if B is None else int(B)
        groups = -(-K // B)
        return ComplexityCounts(M * K * lg // 2, P * M * K, groups * (2 * P * P * M + P ** 3))
    if name == "tpe":
        Q = arg if Q is None else Q
        if Q is None or Q < 1:
            raise ConfigError("tpe complexity needs Q >= 1")
        return ComplexityCounts(M * K * lg // 2, P * M * K * (2 * int(Q) - 1), 0)
    if name == "mf":
        return ComplexityCounts(M * K * lg // 2, P * M * K, 0)
    raise ConfigError(f"unknown approach {approach!r}")


def crossover_antennas(P, K, L, M_grid, B=1):
    """Smallest ``M*`` in ``M_grid`` such that the proposed total is below ZF(B) for every ``M >= M*``.

    Returns ``None`` when no such point exists on the grid.
    """
    M_grid = sorted(int(m) for m in M_grid)
    better = [complexity_counts("proposed", M, P, K, L).total
              < complexity_counts("zf", M, P, K, L, B=B).total for M in M_grid]
    best = None
    for M, ok in zip(reversed(M_grid), reversed(better)):
        if not ok:
            break
        best = M
    return best


@dataclass
class OpCounter:
    """Instrumentation filled in by the transmit chain and recursions.

    ``precode_cm`` follows the table convention (CMs per output sample for the
    filter, per block for per-subcarrier precoding); ``precode_cm_total`` is
    the literal number of multiplies performed.
    """

    transforms: int = 0
    transform_cm: int = 0
    precode_cm: int = 0
    precode_cm_total: int = 0
    coeff_cm: int = 0
    blocks: int = 0

    def add_transforms(self, count, K):
        self.transforms += int(count)
        self.transform_cm += int(count) * (K * _log2(K) // 2)

    def merge(self, other):
        return OpCounter(*(getattr(self, f) + getattr(other, f) for f in
                           ("transforms", "transform_cm", "precode_cm",
                            "precode_cm_total", "coeff_cm", "blocks")))


def empirical_ops_audit(counter):
    """Per-block counts measured by an :class:`OpCounter`.

    Returns a :class:`ComplexityCounts` directly comparable with
    :func:`complexity_counts`, plus the number of transforms per block.
    """
    if counter.blocks < 1:
        raise ContractViolation("empirical_ops_audit: counter saw no blocks")
    b = counter.blocks
    counts = ComplexityCounts(counter.transform_cm // b, counter.precode_cm // b,
                              counter.coeff_cm // b)
    return counts, counter.transforms // b


# ---------------------------------------------------------------------------
# Per-run record
# ---------------------------------------------------------------------------

@dataclass
class MetricsRecord:
    """Accumulated results of one or more frames of the same scenario.

    Sums are kept (not means) so records merge by plain addition in a fixed
    order, which keeps multi-threaded runs bit-identical.
    """

    mse_sum: np.ndarray
    theory_sum: np.ndarray
    errors: np.ndarray          # (n_esn0, N) symbol errors
    symbols: np.ndarray         # (N,) detected symbols per block
    esn0_db: tuple
    counts: ComplexityCounts | None = None
    audit: OpCounter = field(default_factory=OpCounter)
    frames: int = 1
    config: dict = field(default_factory=dict)
    seed: int = 0
    mu: float = 1.0

    @property
    def mse(self):
        return self.mse_sum / self.frames

    @property
    def mse_theory(self):
        return self.theory_sum / self.frames

    def ser(self, exclude_first=False):
        """Aggregate SER per Es/N0 point."""
        sl = slice(1, None) if exclude_first else slice(None)
        return self.errors[:, sl].sum(axis=1) / max(self.symbols[sl].sum(), 1)

    def ser_per_block(self):
        return self.errors / np.maximum(self.symbols, 1)[None, :]

    def merge(self, other):
        return MetricsRecord(
            mse_sum=self.mse_sum + other.mse_sum,
            theory_sum=self.theory_sum + other.theory_sum,
            errors=self.errors + other.errors,
            symbols=self.symbols + other.symbols,
            esn0_db=self.esn0_db,
            counts=self.counts,
            audit=self.audit.merge(other.audit),
            frames=self.frames + other.frames,
            config=self.config,
            seed=self.seed,
            mu=self.mu,
        )
