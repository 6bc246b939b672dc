"""
Expected and realized equilibrium prices
========================================

A two-good exchange economy with Cobb-Douglas agents has a closed-form
equilibrium price once the individual characteristics are on the table.
This script builds the smallest interesting random economy, solves for the
expected equilibrium, then samples a few economies to show the realized
price scattering around it.
"""

import numpy as np

from stochequil import cd_characteristics, cd_equilibrium, expected_equilibrium
from stochequil.reference import symmetric_two_atom_economy

# Two deterministic agents first: preference shares (0.3, 0.7) and (0.6, 0.4),
# endowments of one unit of a single good each.
thetas = np.vstack(
    [
        cd_characteristics([0.3, 0.7], [1.0, 0.0]),
        cd_characteristics([0.6, 0.4], [0.0, 1.0]),
    ]
)
result = cd_equilibrium(thetas, 1)
print("deterministic 2-agent price:", result.price.coords, "residual", result.residual)

# Now the random version: n agents drawn i.i.d. from two equally likely
# types.  The expected equilibrium solves the *expected* excess demand.
model = symmetric_two_atom_economy(12)
expected = expected_equilibrium(model)
print("expected equilibrium:", expected.coords)

# Realized equilibria move with the sampled composition.  With the symmetric
# reference economy the price of good one equals the fraction of agents
# endowed with good two, so p1 takes values k/12.
rng = np.random.default_rng(7)
for rep in range(5):
    draw = model.micro.sample(rng, model.n)
    realized = cd_equilibrium(draw, 1)
    print(f"  replica {rep}: p1 = {realized.price.coords[0]:.4f}")

# Batch equivalent:
#   stochequil equilibrium --config demos/configs/equilibrium_two_atom.json
