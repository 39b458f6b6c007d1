# coding: utf-8
# # How fast does the order recursion converge to ZF?
#
# The recursive precoder starts from a scaled matched filter and applies
# U <- U + (mu/M) H^H G^-1 (I - H U) a few times per subcarrier.  The error
# after Q steps has a closed form in the eigenvalues of the normalized Gram
# matrix; here we compare it against measurement and look at what spatial
# correlation does to the speed.

# %%
import numpy as np

from lsaprecode import RngStream, build_pdp, generate_frame, spatial_correlation
from lsaprecode.metrics import init_mse_theory, normalized_gram_eigs, precoder_mse
from lsaprecode.precoder import StepSizeRule, initial_precoder, order_recursion_step, step_size, zf_exact

M, P, T = 64, 8, 1 / 15e3
pdp = build_pdp("single_tap")

# %% [markdown]
# Independent antennas: measured error tracks the eigenvalue formula until it
# reaches the floating-point floor.

# %%
fr = generate_frame(pdp, M, P, 1, 0.0, T, np.eye(M), 1.0, RngStream(1).generator(0), K=1)
H = fr.cir[:, :, 0, 0]
eigs = normalized_gram_eigs(H)
U_o = zf_exact(H)
mu = step_size(StepSizeRule("independent"))
U = initial_precoder(H, None, mu)
print(" Q   measured      closed form")
for Q in range(9):
    print(f"{Q:2d}   {precoder_mse(U, U_o):.4e}   {init_mse_theory(eigs, mu, Q, M):.4e}")
    U = order_recursion_step(U, H, None, mu)

# %% [markdown]
# A compact array (D wavelengths) spreads the Gram eigenvalues, so the same
# error target needs more steps.

# %%
for D in (None, 8.0, 3.0):
    R = spatial_correlation(M, D)
    fr = generate_frame(pdp, M, P, 1, 0.0, T, R, 1.0, RngStream(2).generator(0), K=1)
    H = fr.cir[:, :, 0, 0]
    rule = StepSizeRule("independent") if D is None else StepSizeRule("correlated", R=R)
    mu = step_size(rule)
    U_o, U = zf_exact(H), initial_precoder(H, None, mu)
    q = 0
    while precoder_mse(U, U_o) > 1e-4 and q < 500:
        U = order_recursion_step(U, H, None, mu)
        q += 1
    lam = normalized_gram_eigs(H)
    steps = f">={q}" if q == 500 else str(q)
    print(f"D={D!s:>5}: mu={mu:.3f}, eig spread {lam[-1] / lam[0]:7.1f}, steps to 1e-4: {steps}")
