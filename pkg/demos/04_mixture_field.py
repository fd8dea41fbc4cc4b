# %% [markdown]
# # A non-radial field: two Gaussian plumes
#
# Without radial symmetry the integrator no longer cancels the residual,
# but the proportional-only loop still has a computable ultimate bound
# once the field's gradient and curvature are bounded on an annulus.

# %%
import math

import numpy as np

from isotrack import Annulus, ControllerParams, GaussianMixture, RobotState, Scenario, metrics, run, smoothness_bounds
from isotrack import stability as stab

field = GaussianMixture(
    [
        (40.0, (0.0, 0.0), [[120.0, 20.0], [20.0, 80.0]]),
        (12.0, (6.0, -4.0), [[30.0, 0.0], [0.0, 30.0]]),
    ]
)
level = 20.0


def radius_along(angle):
    d = np.array([math.cos(angle), math.sin(angle)])
    lo, hi = 0.0, 40.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if field.value(mid * d) > level else (lo, mid)
    return lo


radii = [radius_along(a) for a in np.linspace(0, 2 * math.pi, 361)]
region = Annulus((0, 0), min(radii) - 2, max(radii) + 2)
fb = smoothness_bounds(field, region, 0.25)
print(fb)

# %%
v, c1, c2 = 0.5, 0.1, 1.0
threshold = stab.prop2_threshold(fb.gamma1, fb.gamma2, fb.gamma3, c1, c2, v, math.pi / 3)
kp = 2 * threshold
res = stab.prop2_analysis(kp, c1, c2, fb.gamma1, fb.gamma2, fb.gamma3, v)
print(f"threshold {threshold:.3f}, using kp = {kp:.3f}, bound {res.error_bound:.4f}")

# %%
traj = run(Scenario(field, level, RobotState(radii[0], 0, -math.pi / 2), v, ControllerParams(kp, 0, c1, c2)))
print(metrics(traj, level).as_text())
