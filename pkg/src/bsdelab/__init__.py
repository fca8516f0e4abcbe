"""bsdelab: numerics and verification for scalar BSDEs whose generators have
iterated-logarithmically sublinear growth in z and integrable data.

Layers:

- ``iterlog``: the growth-modulus family and its comparison constants;
- ``ineq``: the two-variable inequality machinery (conditions, k-search,
  analytic floor, p <= 1 counterexample);
- ``testfn``: the explicit supersolution test function and grid checks;
- ``genmodel``: generator models, assumption certificates, sampling checks;
- ``lattice`` / ``solver``: binomial Brownian lattice and backward solver;
- ``validate``: a priori bound, comparison theorem, suite orchestration;
- ``cli``: the ``bsdelab`` command.
"""

from .iterlog import IterLogSpec, il, il_damped, ln_iter, tower
from .ineq import (analytic_k_floor, check_key_inequality, counterexample_p_le_1,
                   find_min_k, verify_psi_conditions)
from .testfn import TestFunctionSpec, default_spec, phi, verify_bounds, verify_supersolution
from .genmodel import (GeneratorModel, SampleBox, builtin_model, check_certificate,
                       example_26, example_27)
from .lattice import BrownianLattice, ProcessOnLattice, conditional_expectation, z_estimate
from .solver import BsdeProblem, SolverConfig, Terminal, solve, solve_tree, terminal_from_config
from .validate import apriori_check, comparison_check, run_case, run_experiment

__version__ = "0.1.0"

__all__ = [
    "IterLogSpec", "il", "il_damped", "ln_iter", "tower",
    "analytic_k_floor", "check_key_inequality", "counterexample_p_le_1",
    "find_min_k", "verify_psi_conditions",
    "TestFunctionSpec", "default_spec", "phi", "verify_bounds", "verify_supersolution",
    "GeneratorModel", "SampleBox", "builtin_model", "check_certificate",
    "example_26", "example_27",
    "BrownianLattice", "ProcessOnLattice", "conditional_expectation", "z_estimate",
    "BsdeProblem", "SolverConfig", "Terminal", "solve", "solve_tree",
    "terminal_from_config",
    "apriori_check", "comparison_check", "run_case", "run_experiment",
    "__version__",
]
