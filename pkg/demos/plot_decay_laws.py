"""
Decay of k without a mean flow
==============================

With zero velocity the k equation reduces to an ODE whose solution depends
on the length scale.  The kinematic scale gives exponential decay, a fixed
mixing length gives ``t^-2``, and the geometric blend ``l = l0^(1-theta)
l_K^theta`` with ``theta = 2/1.3`` gives ``t^-1.3``.
"""
import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from urans1eq import ClosureConfig
from urans1eq.verification import THETA_13, decay_history

out = Path(os.environ.get("URANS_OUTPUT_ROOT", "runs")) / "demo_decay"
out.mkdir(parents=True, exist_ok=True)

cases = {
    "kinematic, tau=1": ClosureConfig(mode="kinematic", tau=1.0),
    "static, l=1": ClosureConfig(mode="static"),
    "geometric, theta=2/1.3": ClosureConfig(mode="geometric", theta=THETA_13, tau=1.0),
}

# the step size grows with t so that five decades take a few thousand steps
fig, ax = plt.subplots(figsize=(6, 4.5))
for label, cl in cases.items():
    t, k = decay_history(cl, t_end=1e4)
    ax.loglog(t[1:], k[1:], label=label)

# %%
# Reference slopes, anchored at t = 100
# -------------------------------------
tt = np.array([1e2, 1e4])
for p, style in ((-2.0, "k--"), (-1.3, "k:")):
    ax.loglog(tt, 1e-3 * (tt / 1e2) ** p, style, label=f"t^{p}")
ax.set_ylim(1e-12, 2)
ax.set_xlabel("t")
ax.set_ylabel("k")
ax.legend()
fig.savefig(out / "decay.png", dpi=120)
print("wrote", out / "decay.png")
