"""
Damped and noisy dynamics, two ways
===================================

With friction and thermal noise the encoded state obeys a linear master
equation for its covariance. The same physics can be sampled path by
path with Euler-Maruyama. Running both and comparing is the standard
consistency check; the closed-form route is then essentially free.
"""
import numpy as np

from gnmqsim import dynamics as dyn
from gnmqsim import stateprep as sp
from gnmqsim.network import build_gnm, model_from_matrices
from gnmqsim.structure import synthetic_chain

chain = build_gnm(synthetic_chain(2))
emb = dyn.embed(chain)
params = dyn.LangevinParams(gamma=0.5, kT=0.3)
print(f"sigma = {params.sigma:.4f} from the fluctuation-dissipation rule")

st = sp.encode_initial_conditions(chain, [0.4, -0.4], [0.0, 0.0])
x0 = st.psi * np.sqrt(2 * st.energy)
rho0 = np.outer(x0, x0.conj())

rho = dyn.evolve_langevin_covariance(emb, params, rho0, t=1.0)
mc = dyn.monte_carlo_encoded(emb, params, x0, t=1.0, n_paths=2000, seed=3)
err = np.abs(mc["second_moment"] - rho).max()
print(f"master equation vs 2000 paths: max |diff| = {err:.3e} "
      f"(stderr scale {mc['stderr_real'].max():.3e})")

# long-time check on one bead: Var(sqrt(m) v) approaches kT
m1 = model_from_matrices(np.array([[1.0]]), np.array([1.5]))
res = dyn.monte_carlo_langevin(m1, dyn.LangevinParams(gamma=1.0, kT=0.25),
                               [0.3], [0.0], t=30.0, n_paths=4000, seed=9)
var = (res["velocities"][:, 0] * np.sqrt(1.5)).var(ddof=1)
print(f"equipartition: Var(sqrt(m) v) = {var:.4f}, kT = 0.25")
