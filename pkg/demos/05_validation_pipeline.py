"""
A priori bound and comparison validation
========================================

The full pipeline: solve a problem, instrument the bound
|Y_t| + int_0^t f <= C E[|xi| + int_0^T f | F_t] + C with the constant
forced by the test-function envelope, tamper with the solution to prove the
check can fail, and run ordered comparison pairs.
"""

import tempfile

from bsdelab import BsdeProblem, SolverConfig, solve, terminal_from_config
from bsdelab.genmodel import example_26, example_27, zero_model
from bsdelab.validate import (DEFAULT_SUITE, apriori_check, comparison_check,
                              run_experiment, tamper_solution)

pr = BsdeProblem(terminal_from_config("sin_b", 1.0), example_26(), 1.0)
sol = solve(pr, SolverConfig(steps=100))

rep = apriori_check(sol)
print(f"a priori bound: C = {rep.C_used:.4g} (k = {rep.k:.4g}, k1 = {rep.k1:.4f})")
print(f"   min relative margin {rep.min_rel_margin:.4f}, pass={rep.passed}")

bad = apriori_check(tamper_solution(sol, 10.0 * rep.C_used))
print(f"   tampered solution: pass={bad.passed}, min margin {bad.min_margin:.4g}")

# Comparison pairs: a shifted terminal gives gap exactly 1; a shifted
# generator accumulates a positive gap; self-comparison is identically 0.
zp = BsdeProblem(terminal_from_config("b", 1.0), zero_model(), 1.0)
print("\nterminal + 1:", comparison_check(zp, zp.shifted_terminal(1.0)).to_dict()["min_gap"])

sp = BsdeProblem(terminal_from_config("sin_b", 1.0), example_27(), 1.0)
rep = comparison_check(sp, sp.shifted_generator(0.1), config=SolverConfig(steps=60),
                       check_order=False)
print(f"generator + 0.1: min gap {rep.min_gap:.4g} "
      f"(tolerance {rep.tolerance_used:.3g}), pass={rep.passed}")
print("reflexive:", comparison_check(sp, sp, config=SolverConfig(steps=30)).min_gap)

# The whole default suite (including negative controls) in one call.
with tempfile.TemporaryDirectory() as out:
    manifest = run_experiment(DEFAULT_SUITE, out, seed=0)
    print(f"\ndefault suite: {manifest['n_cases']} cases, all_ok={manifest['all_ok']}")
    for case in manifest["cases"]:
        print(f"   {case['kind']:16s} expect={case['expect']:5s} outcome={case['outcome']}")
