"""
Calibrating the engine on the ideal gas
=======================================

The monatomic ideal gas is the one system where every quantity the library
computes — partition function, conjugate variable, canonical density,
entropy — has a textbook closed form.  Running the generic machinery on a
truncated-box version of the gas and comparing against those forms is the
cheapest full-stack correctness check available.
"""

import numpy as np

from stochequil import (
    GasSpec,
    box_quadrature,
    gas_canonical_pdf,
    gas_cgf_fixture,
    gas_entropy,
    gas_internal_energy,
    gas_partition,
)

for beta in (0.5, 1.0, 2.0):
    spec = GasSpec(1.0, 1, beta)
    closed = gas_partition(spec)
    fix = gas_cgf_fixture(spec, box_quadrature(8.0 / np.sqrt(beta) + 1.0))
    print(f"beta = {beta}")
    print(f"  log lambda   closed {closed:.10f}   quadrature {fix.log_lambda:.10f}")
    print(f"  energy       closed {1.5 / beta:.10f}   tilted mean {fix.grad[0]:.10f}")

# Entropy for a mole-sized... well, a hundred-particle box, both ways:
ent = gas_entropy(GasSpec(1.0, 100, 1.0))
print("\nS from partition function:", ent.from_partition)
print("S closed form:            ", ent.closed_form)
print("internal energy 3n/(2 beta):", gas_internal_energy(GasSpec(1.0, 100, 1.0)))

# The canonical momentum density is the Maxwell-Boltzmann law; its mode at
# the origin is (beta / 2 pi m)^{3/2}.
spec = GasSpec(1.0, 1, 1.0)
peak = gas_canonical_pdf(np.zeros(3), spec)
print("\npdf at the origin:", peak, " closed:", (2 * np.pi) ** -1.5)

# Batch equivalent (no model section needed in the config):
#   stochequil gas --config demos/configs/gas_fixture.json
