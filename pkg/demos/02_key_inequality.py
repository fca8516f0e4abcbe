"""
The two-variable inequality and its threshold shift
===================================================

For p > 1 the inequality  2xy/IL(y) <= p x^2/IL(x)^2 + y^2  holds once the
base shift k is large enough.  This script searches the ladder for the
smallest passing k, shows the sufficient-condition margins, compares with
the closed-form floor, and evaluates the explicit counterexample at p = 1.
"""

import math

from bsdelab import check_key_inequality, counterexample_p_le_1, find_min_k, IterLogSpec
from bsdelab._util import log_grid
from bsdelab.ineq import analytic_k_floor_detail, verify_psi_conditions

grid = log_grid(1e8, 1000)
psi_grid = log_grid(1e8, 10**5)

for n, lam in [(1, 1.0), (2, 0.75), (2, 2 / 3), (3, 0.6)]:
    k = find_min_k(n, lam, 2.0, grid_x=grid, grid_y=grid)
    cond = verify_psi_conditions(IterLogSpec(n, lam, k), 2.0, psi_grid)
    pair = check_key_inequality(IterLogSpec(n, lam, k), 2.0, grid, grid)
    floor = analytic_k_floor_detail(n, lam, 2.0)
    print(f"(n={n}, lambda={lam:.3g})  ladder k = {k:.6g}")
    print(f"   condition margins: growth {cond.cond_growth_margin:.4f}, "
          f"log-derivative {cond.cond_logderiv_margin:.4f}, "
          f"self-map {cond.cond_selfmap_margin:.4f}")
    print(f"   pairwise check on 1000x1000 grid: pass={pair.passed}, "
          f"violations={pair.violations}")
    print(f"   closed-form floor: growth part {floor['floor_growth']:.6g}, "
          f"power-domination part {floor['floor_selfmap']}, delta={floor['delta']:.4f}")

# At p = 1 the inequality genuinely fails: read the fixed-point relation
# backwards to get an explicit violating pair.
x, y, margin = counterexample_p_le_1(IterLogSpec(1, 1.0, math.exp(4)), 1.0, y=10.0)
print(f"\np = 1 counterexample: (x, y) = ({x:.4f}, {y}), margin = {margin:.4f} < 0")
