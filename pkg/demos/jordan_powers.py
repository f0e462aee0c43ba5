# %% [markdown]
# Singular values of matrix powers approach eigenvalue magnitudes, including
# for defective matrices, at a rate of order log(n)/n.

# %%
import numpy as np

from riccati_rank import spectral

ns = [10, 100, 1000, 10_000]
for lam, k in [(0.5, 2), (1.0, 3), (0.3 + 0.4j, 2)]:
    probe = spectral.jordan_probe(lam, k, ns)
    print(f"lambda = {lam}, k = {k}")
    for col, n in enumerate(ns):
        print(f"  n = {n:6d}", np.array2string(probe.measured[:, col], precision=6))

# %% nilpotent block: J^n = 0 once n >= k
print(spectral.jordan_probe(0.0, 4, [1, 2, 3, 4]).measured)

# %% a random matrix with a known spectrum
rng = np.random.default_rng(0)
V = rng.standard_normal((5, 5))
A = V @ np.diag([1.5, -1.2, 0.9, 0.6, 0.1]) @ np.linalg.inv(V)
conv = spectral.ef_eigenvalue_convergence(A, [10, 100, 1000])
print(conv.values)
print("relative error at n = 1000:", conv.final_rel_error)
