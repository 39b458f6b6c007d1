# coding: utf-8
# # Where does the convolutional precoder get cheaper than ZF?
#
# Complex multiplications per OFDM block, split into transforms, precoding
# and coefficient computation.  The proposed scheme needs P inverse FFTs
# instead of M, and a filter update that is linear in M.

# %%
from lsaprecode.metrics import complexity_counts, crossover_antennas

P, K, L = 8, 512, 38

# %%
print(f"{'M':>4} {'proposed':>10} {'zf(1)':>10} {'zf(12)':>10} {'tpe(2)':>10}")
for M in (16, 32, 64, 128, 256, 512):
    row = [complexity_counts(a, M, P, K, L).total for a in ("proposed", "zf(1)", "zf(12)", "tpe(2)")]
    print(f"{M:4d} " + " ".join(f"{v:10d}" for v in row))

# %%
for B in (1, 6, 12):
    print(f"proposed below zf(B={B}) for every M >= {crossover_antennas(P, K, L, range(8, 513), B=B)}")
