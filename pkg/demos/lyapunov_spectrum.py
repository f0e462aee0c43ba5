# %% [markdown]
# Lyapunov exponents by the QR method (third figure)
#
# The cumulative estimate converges like 1/N because the initial frame is the
# identity, not the asymptotic one. The estimate over the second half of the
# run drops that transient.

# %%
from pathlib import Path

import numpy as np

from riccati_rank.config import preset
from riccati_rank.lyapunov import qr_exponents
from riccati_rank.svg import line_plot
from riccati_rank.system import autonomous_matrix, operator_stream

spec = preset("aut30").system.with_(horizon=2000)
truth = np.log(np.sort(np.abs(np.linalg.eigvals(autonomous_matrix(spec))))[::-1])
lyap = qr_exponents(operator_stream(spec), 2000)

# %%
print("d0 =", lyap.d0)
print("cumulative error:", np.abs(lyap.exponents - truth).max())
print("tail-half error :", np.abs(lyap.tail_exponents - truth).max())

# %% the error times N levels off: a fixed start-up offset
for N in (250, 500, 1000, 2000):
    err = np.abs(lyap.history[N - 1] - truth).max()
    print(f"N = {N:5d}  error {err:.3e}  N * error {N * err:.3f}")

# %%
out = Path(__file__).with_name("out")
out.mkdir(exist_ok=True)
steps = list(range(1, 2001))
line_plot(out / "lyapunov_running.svg",
          [(f"mu_{j + 1}", steps, lyap.history[:, j]) for j in range(spec.d)],
          title="Running exponents, autonomous d=30", xlabel="N", ylabel="mu_j", logy=False)
