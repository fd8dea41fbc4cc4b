# %% [markdown]
# # What the integral term buys
#
# Proportional action alone leaves a residual that shrinks roughly like
# 1/kp. Adding the integrator removes it on a circular field.

# %%
import math
from dataclasses import replace

from isotrack import Circular, ControllerParams, RobotState, Scenario, sweep

base = Scenario(
    Circular(20.0, 0.1),
    10.0,
    RobotState(0.0, 20.0, -math.pi / 2),
    0.5,
    ControllerParams(kp=10, ki=0, c1=0.2, c2=1, sigma_limit=1.0),
)

# %%
gains = [3, 5, 10, 20]
p_only = sweep(base, "kp", gains, workers=2)
with_i = sweep(replace(base, params=replace(base.params, ki=1.0)), "kp", gains, workers=2)

print(" kp   P-only tail   PI tail")
for a, b in zip(p_only, with_i):
    print(f"{a.value:3.0f}   {a.metrics.steady_state_error_mean:10.4f}   {b.metrics.steady_state_error_mean:9.2e}")
