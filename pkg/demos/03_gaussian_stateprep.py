"""
Pseudo-random Gaussian state preparation
========================================

A branch-angle circuit turns counter-based random draws into a unit
vector with i.i.d.-normal-looking amplitudes. The whole construction is
keyed: the same seed gives the same circuit and the same state, bit for
bit, with no hidden generator state.
"""
import numpy as np

from gnmqsim import circuits as qc
from gnmqsim import stateprep as sp

n = 8
circ, vec = sp.prepare_gaussian_state(n, seed=2024)
again, vec2 = sp.prepare_gaussian_state(n, seed=2024)
print("deterministic:", np.array_equal(np.asarray(vec), np.asarray(vec2)))
print("resources:", qc.resources(circ))

amps = np.asarray(vec).real * np.sqrt(2.0 ** n)
print(f"scaled amplitudes: mean {amps.mean():+.3f}, var {amps.var():.3f} "
      "(want ~0, ~1)")

# the rejection sampler behind each branch angle keeps an audit trail;
# entry = (counter window base, number of uniform draws consumed)
audit: list = []
sp.prepare_gaussian_state(n, seed=2024, audit=audit)
draws = sum(used for _, used in audit)
print(f"{len(audit)} branch angles from {draws} counter draws "
      f"({draws / len(audit):.2f} per angle)")

# a two-layer circuit whose measured register is exactly maximally mixed
circ2, rho = sp.prepare_ensemble_state(3)
print(f"ensemble prep: depth {circ2.depth}, "
      f"rho == I/8: {np.array_equal(rho, np.eye(8) / 8)}")
