"""
Survival, jointly with the price
================================

A three-type economy where one type's wealth sits below a subsistence floor
at every interior price.  The non-survival proportion is a macro variable
x(theta; p), and the pair (price, proportion) obeys a bivariate entropy
I(p, x): zero exactly at the expected equilibrium and the canonical mean,
positive everywhere else.  Conditioning on a shifted price drags the
proportion to its canonical expectation, not to the prior 0.2.
"""

import numpy as np

from stochequil import (
    bivariate_entropy,
    conditional_macro_mean,
    minimize_entropy_over_price,
    validate_price,
)
from stochequil.canonical import make_canonical
from stochequil.reference import nonsurvival_structure, survival_economy

model, spec = survival_economy(100)
xs = nonsurvival_structure(spec)
p = validate_price([0.55, 0.45])

# Canonical (tilted) non-survival probability at the shifted price — a
# finite sum over the three atoms.
indicator = xs.eval(model.micro.atoms, p.coords)[:, 0]
canon = make_canonical(model, p)
q = float(canon.weights @ indicator)
print("prior non-survival probability:     ", float(model.micro.weights @ indicator))
print("canonical non-survival probability: ", q)

est = conditional_macro_mean(model, p, 0.02, xs, replicas=50_000, seed=21)
print(f"conditional mean by simulation:      {est.value:.4f} +- {est.std_error:.4f}")

# The bivariate entropy surface along x at the observed price:
print(f"\n{'x':>5} {'I(p, x)':>10}")
for x in (0.10, 0.15, q, 0.30, 0.40):
    rep = bivariate_entropy(model, p, np.array([x]), xs)
    print(f"{x:5.2f} {rep.total:10.4f}")

# Minimizing over the price at fixed x recovers the cheapest way to see a
# distressed economy: for x = 0.3 it is the expected equilibrium itself,
# since the composition shift alone carries all the cost.
best = minimize_entropy_over_price(model, np.array([0.3]), np.linspace(0.35, 0.65, 13), xs)
print("\nleast surprising price for x = 0.3:", best.coords)

# Batch equivalent:
#   stochequil survival --config demos/configs/survival_shift.json
