# %% [markdown]
# Autonomous systems: the covariance vanishes on the stable eigenvectors of A^T
# (fourth figure)

# %%
import numpy as np

from riccati_rank import spectral
from riccati_rank.config import preset

spec = preset("aut30").system
res = spectral.autonomous_nullspace_check(spec)

# %%
print("d0 =", res.d0)
for j, (m, v) in enumerate(zip(res.eig_mags, res.direction_norms), 1):
    print(f"j = {j:2d}  |lambda| = {m:.3f}  ||Delta v_j|| = {v:.2e}")

# %% the filter settles: step-to-step change at the end of the run
print("converged:", res.converged, " last change:", res.last_change)

# %% the stable backward space and E^1(A^T) coincide
A = spectral.constant_dynamics(spec)
print("largest principal angle:", spectral.eigenspace_equality_check(A, n=2000))
