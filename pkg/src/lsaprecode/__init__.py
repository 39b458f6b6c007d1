"""Recursive convolutional ZF precoding for massive-MIMO OFDM downlinks.

Modules
-------
numerics   transforms, Hermitian eigen/solve, Bessel J0, seeded Gaussian streams
channel    ETU/uniform profiles, correlated Rayleigh frames, estimation error
precoder   ZF / shared ZF / MF / TPE, order & time recursion, FIR precoder
link       QPSK OFDM chain and the per-frame experiment loop
metrics    MSE oracles, complexity counts, per-run records
cli        ``lsa-precode`` scenario runner
"""
from .channel import (
    ChannelFrame, NoisyChannelFrame, PowerDelayProfile, build_pdp, dump_frame, generate_frame,
    inject_estimation_error, load_frame, spatial_correlation, temporal_correlation,
)
from .config import ScenarioConfig
from .errors import (
    ConfigError, ContractViolation, DimensionError, DivergenceError, FactorizationError,
    NumericalError, PrecodeError, SingularMatrixError,
)
from .link import Numerology, propagate, qpsk_detect, qpsk_map, run_frame, transmit_conv, transmit_freq
from .metrics import (
    ComplexityCounts, MetricsRecord, chanerr_mse_theory, complexity_counts, empirical_ops_audit,
    init_mse_theory, precoder_mse, tracking_mse_theory,
)
from .numerics import RngStream, bessel_j0, cholesky, dft, gaussian_complex, hermitian_eig, solve_hermitian
from .precoder import (
    ConvPrecoder, FreqPrecoder, StepSizeRule, filter_update, freq_to_filter, initial_filter, mf,
    order_recursion, order_recursion_step, step_size, time_recursion_step, tpe, zf_exact, zf_shared,
)

__version__ = "0.1.0"
