"""Self-check suite run by ``lsa-precode verify``.

Small-size versions of the library's invariants: transform and linear-algebra
oracles, the frequency/time precoder equivalence, the exact initialization
error identity and the ZF fixed point.  Each check returns ``(ok, detail)``.
"""
from __future__ import annotations

import time

import numpy as np

from .channel import build_pdp, generate_frame, spatial_correlation
from .link import Numerology, qpsk_map, transmit_conv, transmit_freq
from .metrics import init_mse_theory, normalized_gram_eigs, precoder_mse
from .numerics import RngStream, bessel_j0, dft, gaussian_complex, hermitian_eig, solve_hermitian
from .precoder import (
    filter_recursion, filter_update, freq_to_filter, initial_filter, inject_fault,
    order_recursion, step_size, StepSizeRule, zf_exact,
)


def _rel(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def _small_frame(seed, M=16, P=3, K=64, L=6):
    pdp = build_pdp(f"uniform({L})", K * 15e3)
    return generate_frame(pdp, M, P, 1, 0.0, 1 / 15e3, spatial_correlation(M), 1.0,
                          RngStream(seed, 0).generator(0), K=K)


def check_dft():
    rng = RngStream(1, 0).generator(0)
    x = gaussian_complex(rng, 16)
    fast = _rel(dft(x), dft(x, naive=True))
    y = gaussian_complex(rng, 512)
    rt = float(np.max(np.abs(dft(dft(y), inverse=True) - y)))
    return fast <= 1e-12 and rt <= 1e-12, f"fast-vs-naive {fast:.1e}, round trip {rt:.1e}"


def check_eig():
    rng = RngStream(2, 0).generator(0)
    X = gaussian_complex(rng, (6, 6))
    A = X @ X.conj().T / 6
    w, V = hermitian_eig(A)
    err = float(np.linalg.norm(V @ np.diag(w) @ V.conj().T - A))
    return err <= 1e-9 and bool(np.all(np.diff(w) >= 0)), f"reconstruction {err:.1e}"


def check_solve():
    rng = RngStream(3, 0).generator(0)
    X = gaussian_complex(rng, (5, 5))
    A = X @ X.conj().T + np.eye(5)
    B = gaussian_complex(rng, (5, 2))
    err = _rel(solve_hermitian(A, B), np.linalg.solve(A, B))
    return err <= 1e-10, f"vs elimination {err:.1e}"


def check_bessel():
    err = abs(bessel_j0(1.0) - 0.7651976865579666)
    zero = abs(bessel_j0(2.404825557695773))
    return err <= 1e-10 and zero <= 1e-9, f"J0(1) error {err:.1e}, J0 at first zero {zero:.1e}"


def check_equivalence():
    """Untruncated filter after Q updates equals frequency-domain order recursion; signals match."""
    worst = 0.0
    for seed in range(3):
        fr = _small_frame(10 + seed, M=8, P=2)
        H = fr.H(0)
        mu = 1.0
        U = order_recursion(H, None, mu, Q=3)
        conv = filter_recursion(initial_filter(fr.cir[:, :, 0, :], fr.K, None, mu), fr.cir[:, :, 0, :], 3,
                                guard=False)
        worst = max(worst, _rel(conv.frequency_response(), U))
        num = Numerology(K=fr.K, n_active=48, cp_len=8, N=1)
        bits = RngStream(20 + seed, 0).generator(0).integers(0, 2, (2, 1, 96))
        x = qpsk_map(bits)
        a = transmit_conv(x, conv, num)
        b = transmit_freq(x, conv.frequency_response(), num)
        worst = max(worst, _rel(a, b))
    return worst <= 1e-9, f"max relative difference {worst:.1e}"


def check_init_identity():
    """Measured initialization error of the filter recursion equals the closed form."""
    worst = 0.0
    for seed in range(5):
        fr = _small_frame(30 + seed)
        H = fr.H(0)
        mu = step_size(StepSizeRule("independent"))
        eigs = normalized_gram_eigs(H)
        U_o = zf_exact(H)
        conv = initial_filter(fr.cir[:, :, 0, :], fr.K, None, mu)
        for Q in range(6):
            if Q:
                conv = filter_update(conv, fr.cir[:, :, 0, :])
            meas = np.array([precoder_mse(U, Uo) for U, Uo in zip(conv.frequency_response(), U_o)])
            theo = init_mse_theory(eigs, mu, Q, fr.M)
            worst = max(worst, float(np.max(np.abs(meas - theo) / theo)))
    return worst <= 1e-9, f"max relative error {worst:.1e}"


def check_fixed_point():
    fr = _small_frame(50)
    H = fr.H(0)
    conv = freq_to_filter(zf_exact(H))
    nxt = filter_update(conv, fr.cir[:, :, 0, :])
    err = _rel(nxt.taps, conv.taps)
    hu = float(np.max(np.abs(H @ conv.frequency_response() - np.eye(fr.P))))
    return err <= 1e-9 and hu <= 1e-9, f"update drift {err:.1e}, |HU - I| {hu:.1e}"


CHECKS = (
    ("dft oracle", check_dft),
    ("eigen reconstruction", check_eig),
    ("hermitian solve", check_solve),
    ("bessel J0", check_bessel),
    ("frequency/time equivalence", check_equivalence),
    ("initialization identity", check_init_identity),
    ("ZF fixed point", check_fixed_point),
)


def run_verify(fault=False, out=None):
    """Run every check; returns ``(all_ok, results)`` with ``results`` as ``(name, ok, detail, seconds)``."""
    results = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            if fault:
                with inject_fault():
                    ok, detail = fn()
            else:
                ok, detail = fn()
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail, time.perf_counter() - t0))
        if out is not None:
            print(f"{'PASS' if ok else 'FAIL'}  {name:<28} {detail}", file=out)
    return all(r[1] for r in results), results
