#!/usr/bin/env python3
# Lattice geometry walkthrough: generation matrices, Gram-Schmidt,
# LLL reduction, Babai rounding, and the exact closest-vector oracle.

import numpy as np

from glvq import (babai_error_bound, babai_round, decode, exact_cvp,
                  gram_schmidt, lll_reduce)

rng = np.random.default_rng(0)

# A generation matrix: each column is one basis vector of the lattice.
G = np.array([[1.0, 0.9],
              [0.0, 1.0]])
print("basis columns:\n", G)

# Babai rounding encodes a target by rounding its coordinates in the basis.
target = np.array([0.5, 0.5])
z = babai_round(G, target)
print("target", target, "-> codes", z, "-> lattice point", decode(G, z))
print("residual norm:", np.linalg.norm(target - decode(G, z)))

# The exact oracle enumerates a box around the Babai point.  Here they agree.
z_star = exact_cvp(G, target, search_radius=2)
print("exact CVP codes:", z_star)

# On a skewed basis, Babai is only approximate; the oracle can do better.
skew = np.array([[1.0, 3.7],
                 [0.0, 1.0]])
worse = 0
for _ in range(500):
    t = rng.uniform(-4, 4, size=2)
    rb = np.linalg.norm(t - decode(skew, babai_round(skew, t)))
    rc = np.linalg.norm(t - decode(skew, exact_cvp(skew, t, 3)))
    worse += rb > rc + 1e-12
print(f"\nskewed basis: Babai strictly worse than exact on {worse}/500 targets")

# LLL reduction produces a short, nearly orthogonal basis of the same lattice.
reduced = lll_reduce(skew)
print("LLL-reduced columns:\n", reduced)
gs = gram_schmidt(reduced)
print("max |projection coeff| after reduction:",
      np.abs(np.triu(gs.gs_coeff, 1)).max())

# On the reduced basis, the worst-case Babai residual is bounded.
bound = babai_error_bound(gs)
print("residual bound (reduced-basis form):", bound.lll_form)
worst = 0.0
for _ in range(2000):
    t = rng.uniform(-10, 10, size=2)
    worst = max(worst, np.linalg.norm(t - decode(reduced, babai_round(reduced, t))))
print("worst observed residual over 2000 targets:", worst)
