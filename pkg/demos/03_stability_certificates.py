# %% [markdown]
# # Linearised stability around the circular orbit
#
# Near the isoline the loop reduces to three states (radius error, heading
# error, integrator). We build the Jacobian, the quadratic Lyapunov pair
# and check both.

# %%
import numpy as np

from isotrack import stability as stab

p = stab.CircularLoopParams(kp=10, ki=1, c1=0.2, c2=1, alpha=1.0, v=0.5, r_d=10 * np.log(2))
print(stab.check_gain_conditions(p))
cert = stab.lyapunov_certificate(p)
print("eig(A):", np.round(cert.eig_A, 4))
print("min eig P, Q:", cert.eig_P.min(), cert.eig_Q.min())
print("residual:", cert.residual, "status:", cert.status)

# %%
# A Hurwitz Jacobian does not guarantee this particular Q is positive.
# With a very small c1 the cross term in Q grows like 1/c1.
thin = stab.CircularLoopParams(kp=9, ki=9, c1=1e-3, c2=1, alpha=0.5, v=0.7, r_d=4)
c = stab.lyapunov_certificate(thin)
print("A Hurwitz:", stab.is_hurwitz(c.A), " min eig Q:", c.eig_Q.min())

# %%
# The scalar comparison system behind the proportional-only bound.
t, z = stab.simulate_lemma1(k=1.0, b=0.5, z0=2.0, T=30.0)
print("z(T) =", z[-1], " bound atanh(b/k) =", stab.lemma1_bound(1.0, 0.5))
