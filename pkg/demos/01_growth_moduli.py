"""
The iterated-logarithm growth moduli
====================================

A walk through the modulus family IL(x): tower constants, the damped
envelope x / IL(x) that measures sublinear growth in z, and the empirical
comparison constants between depths.
"""

import numpy as np

from bsdelab import IterLogSpec, il, il_damped, tower
from bsdelab._util import log_grid
from bsdelab.iterlog import depth_comparison_constant, holder_domination_constant

# Tower constants: the smallest admissible base shift per depth.
for n in (1, 2, 3):
    print(f"tower({n}) = {tower(n):.9g}")

# The family at a few points: every value is >= 1 and grows extremely slowly.
spec = IterLogSpec(n=2, lam=0.75)
for x in (0.0, 1.0, 100.0, 1e6):
    print(f"IL(2, 3/4)({x:>9g}) = {il(spec, x):.6f}   damped x/IL = {il_damped(spec, x):.6g}")

# Deeper moduli are smaller up to a constant: the ratio IL_{n+1}/IL_n is
# bounded on any grid once the outer exponent exceeds 1/2.
grid = log_grid(1e8, 50000)
for n in (1, 2):
    K = depth_comparison_constant(n, 1.0, grid)
    print(f"sup ratio depth {n + 1} vs {n} (lambda=1) on [0, 1e8]: {K:.6f}")

# Any strict power |x|^alpha is eventually dominated by x / IL(x); the
# constant is a grid sup and blows up as the grid approaches 0.
for xmin in (1.0, 0.01):
    K = holder_domination_constant(0.5, spec, log_grid(1e8, 20000, xmin=xmin))
    print(f"sqrt domination constant on [{xmin}, 1e8]: {K:.4f}")
