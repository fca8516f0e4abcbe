"""Backward-induction solver on the Brownian lattice.

Scheme: Z comes explicitly from the next layer's martingale slope; the
y-argument of the generator is implicit (inner Picard fixed point) by
default, or the plain conditional expectation under scheme="explicit".
The terminal layer is assigned, never recomputed, so it matches the
terminal functional bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ParameterError, PicardDivergenceError, UnsupportedDimensionError
from .genmodel import GeneratorModel
from .lattice import (ENUMERATION_LIMIT, BrownianLattice, ProcessOnLattice,
                      conditional_expectation, mp_norm, sp_norm, z_estimate)


# ---------------------------------------------------------------------------
# terminal functionals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Terminal:
    """Terminal condition xi: a function of B_T (kind="markov") or of the
    whole path matrix (kind="path", enumeration-sized lattices only)."""

    fn: Callable
    label: str
    kind: str = "markov"
    meta: dict = field(default_factory=dict)

    def __call__(self, arg):
        return np.asarray(self.fn(arg), dtype=float)


def terminal_from_config(spec, horizon: float) -> Terminal:
    """Build a terminal from a name or a {kind=..., ...} table.

    Names: "b", "b_squared", "abs_b", "sin_b", "const", "b_plus",
    "exp_sq" (heavy-tailed exp(B_T^2 / (2T(1+delta))), truncated at a cap
    that is recorded, since lattice terminal values are always finite).
    String forms take an optional value suffix, e.g. "const:2.5".
    """
    if isinstance(spec, str):
        if ":" in spec:
            name, val = spec.split(":", 1)
            spec = {"kind": name, "value": float(val)}
        else:
            spec = {"kind": spec}
    kind = spec.get("kind")
    if kind == "b":
        return Terminal(lambda b: b, "B_T")
    if kind == "b_squared":
        return Terminal(lambda b: b * b, "B_T^2")
    if kind == "abs_b":
        return Terminal(lambda b: np.abs(b), "|B_T|")
    if kind == "sin_b":
        return Terminal(lambda b: np.sin(b), "sin(B_T)")
    if kind == "const":
        c = float(spec.get("value", 1.0))
        return Terminal(lambda b: np.full_like(b, c), f"const({c:g})")
    if kind == "b_plus":
        c = float(spec.get("value", 1.0))
        return Terminal(lambda b: b + c, f"B_T+{c:g}")
    if kind == "exp_sq":
        delta = float(spec.get("delta", 0.5))
        cap = float(spec.get("cap", 1e6))
        if delta <= 0:
            raise ParameterError("exp_sq terminal needs delta > 0 for integrability")

        def fn(b):
            return np.minimum(np.exp(b * b / (2.0 * horizon * (1.0 + delta))), cap)

        return Terminal(fn, f"exp(B^2/(2T(1+{delta:g})))^cap",
                        meta={"cap": cap, "delta": delta})
    raise ParameterError(f"unknown terminal kind {kind!r}")


@dataclass(frozen=True)
class BsdeProblem:
    terminal: Terminal
    model: GeneratorModel
    horizon: float
    dim: int = 1

    def __post_init__(self):
        if self.horizon <= 0:
            raise ParameterError(f"horizon must be > 0, got {self.horizon}")
        if self.dim < 1:
            raise ParameterError(f"dim must be >= 1, got {self.dim}")

    def shifted_terminal(self, c: float) -> "BsdeProblem":
        base = self.terminal
        t2 = Terminal(lambda arg: base(arg) + c, f"{base.label}+{c:g}", base.kind, base.meta)
        return BsdeProblem(t2, self.model, self.horizon, self.dim)

    def shifted_generator(self, c: float) -> "BsdeProblem":
        return BsdeProblem(self.terminal, self.model.shifted(c), self.horizon, self.dim)


@dataclass(frozen=True)
class SolverConfig:
    steps: int = 100
    picard_tol: float = 1e-10
    picard_max_iter: int = 50
    scheme: str = "picard-implicit"
    capture_residuals: bool = False

    def __post_init__(self):
        if self.steps < 1:
            raise ParameterError(f"steps must be >= 1, got {self.steps}")
        if self.picard_tol <= 0 or self.picard_max_iter < 1:
            raise ParameterError("picard tolerances must be positive")
        if self.scheme not in ("picard-implicit", "explicit"):
            raise ParameterError(f"unknown scheme {self.scheme!r}")


@dataclass
class SolutionLattice:
    lattice: BrownianLattice
    Y: ProcessOnLattice
    Z: ProcessOnLattice
    f_integral: ProcessOnLattice
    diagnostics: dict
    problem: BsdeProblem
    config: SolverConfig

    @property
    def root(self) -> float:
        return float(self.Y.layer(0)[0])

    def norms(self, p: float = 0.5, seed: int = 0) -> dict:
        zrep = mp_norm(self.lattice, self.Z, p, seed=seed)
        return {"p": p, "Y_sp_norm": sp_norm(self.lattice, self.Y, p),
                "Z_mp_norm": zrep["value"], "Z_mp_method": zrep["method"]}

    def summary(self, p: float = 0.5) -> dict:
        return {
            "root_Y": self.root,
            "terminal": self.problem.terminal.label,
            "model": self.problem.model.name,
            "horizon": self.problem.horizon,
            "norms": self.norms(p),
            "diagnostics": self.diagnostics,
            "config": {
                "steps": self.config.steps,
                "scheme": self.config.scheme,
                "picard_tol": self.config.picard_tol,
                "picard_max_iter": self.config.picard_max_iter,
            },
        }


def _forward_f_integral(lat: BrownianLattice, model: GeneratorModel) -> list:
    """Nodewise E[int_0^t f ds | B_t], left-endpoint rule.

    The pathwise integral is path-dependent on a recombining lattice; the
    node value is its conditional average over arriving paths, weighted by
    the forward measure of each parent.
    """
    layers = [np.zeros(1)]
    mass = np.array([1.0])
    for i in range(lat.steps):
        fdt = model.driver_f(lat.time(i), lat.node_values(i)) * lat.dt
        inc = layers[i] + fdt
        w_up = np.zeros(i + 2)
        w_dn = np.zeros(i + 2)
        v_up = np.zeros(i + 2)
        v_dn = np.zeros(i + 2)
        w_up[1:] = 0.5 * mass
        v_up[1:] = 0.5 * mass * inc
        w_dn[:-1] = 0.5 * mass
        v_dn[:-1] = 0.5 * mass * inc
        wsum = w_up + w_dn
        layers.append((v_up + v_dn) / wsum)
        mass = wsum
    return layers


def solve(problem: BsdeProblem, config: SolverConfig | None = None) -> SolutionLattice:
    """Backward recursion Y_i = E_i[Y_{i+1}] + g(t_i, b_i, y*, Z_i) dt."""
    config = config or SolverConfig()
    if problem.dim != 1:
        raise UnsupportedDimensionError(
            f"lattice solver supports d=1 only, problem has d={problem.dim}"
        )
    if problem.terminal.kind != "markov":
        raise ParameterError("path terminals go through solve_tree")
    lat = BrownianLattice(problem.horizon, config.steps)
    model = problem.model
    N = config.steps

    Y_layers = [None] * (N + 1)
    Z_layers = [None] * N
    Y_layers[N] = problem.terminal(lat.node_values(N))
    if Y_layers[N].shape != (N + 1,):
        raise ParameterError("terminal functional returned a wrong-shaped layer")
    if not np.all(np.isfinite(Y_layers[N])):
        raise ParameterError("terminal values must be finite at all nodes")

    iterations = np.zeros(N, dtype=int)
    residuals: list = [] if config.capture_residuals else None
    implicit = config.scheme == "picard-implicit"

    for i in range(N - 1, -1, -1):
        nxt = Y_layers[i + 1]
        E = conditional_expectation(lat, nxt)
        Z = z_estimate(lat, nxt)
        t_i, b_i = lat.time(i), lat.node_values(i)
        step_res = []
        if implicit:
            y = E.copy()
            for it in range(1, config.picard_max_iter + 1):
                y_new = E + model.eval(t_i, b_i, y, Z) * lat.dt
                res = float(np.max(np.abs(y_new - y)))
                step_res.append(res)
                y = y_new
                if res < config.picard_tol:
                    break
            else:
                raise PicardDivergenceError(
                    f"step {i}: residual {step_res[-1]:.3e} above tol "
                    f"{config.picard_tol} after {config.picard_max_iter} iterations"
                )
            iterations[i] = len(step_res)
        else:
            y = E + model.eval(t_i, b_i, E, Z) * lat.dt
            iterations[i] = 1
        if residuals is not None:
            residuals.append({"step": i, "residuals": step_res})
        Y_layers[i] = y
        Z_layers[i] = Z

    diagnostics = {
        "scheme": config.scheme,
        "picard_iterations_max": int(iterations.max(initial=0)),
        "picard_iterations_total": int(iterations.sum()),
        "terminal_truncation": problem.terminal.meta or None,
    }
    if residuals is not None:
        residuals.reverse()
        diagnostics["residual_history"] = residuals

    return SolutionLattice(
        lattice=lat,
        Y=ProcessOnLattice(lat, Y_layers, name="Y"),
        Z=ProcessOnLattice(lat, Z_layers, name="Z"),
        f_integral=ProcessOnLattice(lat, _forward_f_integral(lat, model), name="f_integral"),
        diagnostics=diagnostics,
        problem=problem,
        config=config,
    )


def picard_residual_history(problem: BsdeProblem, config: SolverConfig | None = None) -> list:
    """Per-step Picard iteration counts and residual sequences."""
    config = config or SolverConfig()
    config = SolverConfig(steps=config.steps, picard_tol=config.picard_tol,
                          picard_max_iter=config.picard_max_iter,
                          scheme=config.scheme, capture_residuals=True)
    sol = solve(problem, config)
    return sol.diagnostics["residual_history"]


# ---------------------------------------------------------------------------
# non-recombining tree solver for path-dependent terminals (N <= 20)
# ---------------------------------------------------------------------------

@dataclass
class SolutionTree:
    """Per-level value arrays on the full binary tree; level i has 2^i nodes
    indexed by the path bits (bit i-1 is the latest step, 1 = up)."""

    horizon: float
    steps: int
    Y_levels: list
    Z_levels: list

    @property
    def root(self) -> float:
        return float(self.Y_levels[0][0])


def solve_tree(problem: BsdeProblem, config: SolverConfig | None = None) -> SolutionTree:
    """Same scheme as solve(), on the binary tree, so the terminal may be an
    arbitrary functional of the whole path (memory-bound to N <= 20)."""
    config = config or SolverConfig(steps=12)
    if problem.dim != 1:
        raise UnsupportedDimensionError(
            f"tree solver supports d=1 only, problem has d={problem.dim}"
        )
    N = config.steps
    if N > ENUMERATION_LIMIT:
        raise ParameterError(f"tree solver limited to N <= {ENUMERATION_LIMIT}")
    dt = problem.horizon / N
    sq = math.sqrt(dt)
    model = problem.model

    # node index m at level i encodes the path bits; bit i-1 is the latest
    # step (1 = up), so level i+1 stacks [down children; up children]
    pops = np.zeros(1, dtype=np.int64)
    b_levels = [np.zeros(1)]
    for i in range(N):
        pops = np.concatenate([pops, pops + 1])
        b_levels.append((2.0 * pops - (i + 1)) * sq)

    if problem.terminal.kind == "path":
        b_path = np.zeros((1, 1))
        for i in range(N):
            b_path = np.vstack([np.hstack([b_path, b_path[:, -1:]]),
                                np.hstack([b_path, b_path[:, -1:]])])
            b_path[:, -1] = b_levels[i + 1]
        Y = problem.terminal(b_path)
    else:
        Y = problem.terminal(b_levels[N])
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (2**N,):
        raise ParameterError("terminal functional returned a wrong-shaped leaf vector")

    Y_levels = [None] * (N + 1)
    Z_levels = [None] * N
    Y_levels[N] = Y
    implicit = config.scheme == "picard-implicit"
    for i in range(N - 1, -1, -1):
        half = 2**i
        nxt = Y_levels[i + 1]
        down, up = nxt[:half], nxt[half:]
        E = 0.5 * (up + down)
        Z = (up - down) / (2.0 * sq)
        b_i = b_levels[i]
        t_i = i * dt
        if implicit:
            y = E.copy()
            for it in range(1, config.picard_max_iter + 1):
                y_new = E + model.eval(t_i, b_i, y, Z) * dt
                res = float(np.max(np.abs(y_new - y)))
                y = y_new
                if res < config.picard_tol:
                    break
            else:
                raise PicardDivergenceError(f"tree step {i}: Picard did not converge")
        else:
            y = E + model.eval(t_i, b_i, E, Z) * dt
        Y_levels[i] = y
        Z_levels[i] = Z
    return SolutionTree(problem.horizon, N, Y_levels, Z_levels)


__all__ = [
    "Terminal",
    "terminal_from_config",
    "BsdeProblem",
    "SolverConfig",
    "SolutionLattice",
    "SolutionTree",
    "solve",
    "solve_tree",
    "picard_residual_history",
]
