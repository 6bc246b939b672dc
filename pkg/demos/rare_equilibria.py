"""
Estimating the probability of a rare equilibrium
================================================

P(|p* - p| < delta) decays like exp(-n I(p)).  At desk scale the event can
still be enumerated exactly, which makes an honest benchmark for the two
Monte Carlo estimators: the naive frequency and the exponentially tilted
importance sampler that keeps its relative error flat as n grows.
"""

import numpy as np

from stochequil import (
    entropy,
    importance_probability,
    naive_probability,
    oracle_probability,
    validate_price,
)
from stochequil.reference import symmetric_two_atom_economy

p = validate_price([0.66, 0.34])
delta = 0.04

print(f"{'n':>4} {'oracle':>12} {'naive':>12} {'importance':>12} {'rel SE':>8}")
for n in (8, 50, 200):
    model = symmetric_two_atom_economy(n)
    exact = oracle_probability(model, p, delta)
    naive = naive_probability(model, p, delta, replicas=200_000, seed=11)
    imp = importance_probability(model, p, delta, replicas=20_000, seed=11)
    rel = imp.std_error / imp.value
    print(
        f"{n:4d} {exact.value:12.3e} {naive.value:12.3e} {imp.value:12.3e} {rel:8.1%}"
    )

# At n = 200 the naive estimator sees a handful of hits out of 200k draws
# while the tilted sampler still resolves the probability to a few percent.
# The exponential order is the entropy:
rate = entropy(symmetric_two_atom_economy(8), p).per_agent_rate
print("\nper-agent rate at p:", rate)
print("so P at n=200 is about exp(-200 * rate) =", np.exp(-200 * rate))

# Batch equivalent over a grid of n with the rate-gap diagnostic:
#   stochequil tld --config demos/configs/tld_trend.json
