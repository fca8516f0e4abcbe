"""Iterated-logarithm growth moduli.

The family evaluated here is

    IL(x) = prod_{i=1}^{n-1} sqrt(ln^(i)(k + x)) * (ln^(n)(k + x))^lambda,

where ln^(i) is the natural log composed i times and k defaults to the tower
constant of depth n (e, e^e, e^(e^e); depth 4 overflows binary64, so depths
stop at 3).  Everything is vectorized over x and pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._util import REL_TOL, require_grid
from .errors import DepthRangeError, DomainError, GridError, ParameterError

MAX_DEPTH = 3

_TOWERS = (math.e, math.exp(math.e), math.exp(math.exp(math.e)))


def tower(n: int) -> float:
    """Tower constant of depth n: e, e^e, e^(e^e) for n = 1, 2, 3."""
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise DepthRangeError(f"depth must be an integer, got {n!r}")
    if n < 1 or n > MAX_DEPTH:
        raise DepthRangeError(
            f"tower depth {n} outside [1, {MAX_DEPTH}] (depth 4 exceeds binary64 range)"
        )
    return _TOWERS[n - 1]


def ln_chain(n: int, x) -> list[np.ndarray]:
    """[ln^(1)(x), ..., ln^(n)(x)], computed once and reused by callers.

    Raises DomainError if any intermediate argument drops below 1, which
    would make the next log negative or undefined.
    """
    if n < 1 or n > MAX_DEPTH:
        raise DepthRangeError(f"log iteration depth {n} outside [1, {MAX_DEPTH}]")
    v = np.asarray(x, dtype=float)
    chain = []
    for i in range(n):
        if np.any(v < 1.0):
            raise DomainError(
                f"iterated log needs argument >= 1 at depth {i + 1}; min was {np.min(v)}"
            )
        v = np.log(v)
        chain.append(v)
    return chain


def ln_iter(n: int, x):
    """ln applied n times; requires x >= tower(n) so the result is >= 1."""
    return ln_chain(n, x)[-1]


@dataclass(frozen=True)
class IterLogSpec:
    """Parameters (n, lambda, k) of one member of the modulus family."""

    n: int
    lam: float
    k: float | None = None  # None selects the canonical tower(n)

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ParameterError(f"depth n must be a positive integer, got {self.n!r}")
        if self.n > MAX_DEPTH:
            raise DepthRangeError(f"depth n={self.n} beyond numeric cap {MAX_DEPTH}")
        if self.lam < 0:
            raise ParameterError(f"lambda must be >= 0, got {self.lam}")
        if self.k is None:
            object.__setattr__(self, "k", tower(self.n))
        # tiny relative slack: tower(n) itself round-trips through exp/log
        if self.k < tower(self.n) * (1.0 - 1e-12):
            raise ParameterError(
                f"base shift k={self.k} below tower({self.n})={tower(self.n)}"
            )

    def reduced(self) -> "IterLogSpec":
        """Equivalent spec with positive outer exponent.

        Depth m with lambda=0 coincides pointwise with depth m-1 and
        lambda=1/2 at the same shift k, so zero-exponent specs of depth >= 2
        reduce; (n=1, lambda=0) is the constant 1 and has no reduction.
        """
        if self.lam > 0 or self.n == 1:
            return self
        return IterLogSpec(self.n - 1, 0.5, self.k)


def il(spec: IterLogSpec, x):
    """Evaluate the modulus at x >= 0.  Result >= 1 and nondecreasing in x."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise DomainError(f"modulus argument must be >= 0; min was {np.min(xa)}")
    chain = ln_chain(spec.n, spec.k + xa)
    out = np.ones_like(chain[0])
    for i in range(spec.n - 1):
        out = out * np.sqrt(chain[i])
    if spec.lam != 0.0:
        out = out * chain[-1] ** spec.lam
    return out if np.ndim(x) else float(out)


def il_damped(spec: IterLogSpec, x):
    """x / IL(x): the sublinear envelope the generators are measured against."""
    xa = np.asarray(x, dtype=float)
    out = xa / il(spec, xa)
    return out if np.ndim(x) else float(out)


def depth_comparison_constant(n: int, lam: float, grid) -> float:
    """Empirical sup over the grid of IL_{n+1}(x) / IL_n(x), canonical shifts.

    Bounded for lam > 1/2; the sup is a grid estimate, not a proven constant.
    """
    if n not in (1, 2):
        raise DepthRangeError(f"depth comparison needs n in {{1, 2}}, got {n}")
    if lam <= 0.5:
        raise ParameterError(f"depth comparison requires lambda > 1/2, got {lam}")
    g = require_grid(grid)
    if np.any(g < 0):
        raise GridError("grid points must be >= 0")
    hi = il(IterLogSpec(n + 1, lam), g)
    lo = il(IterLogSpec(n, lam), g)
    return float(np.max(hi / lo))


def holder_domination_constant(alpha: float, spec: IterLogSpec, grid) -> float:
    """Empirical smallest K with x^alpha <= K x / IL(x) over the grid.

    Equals sup of x^(alpha-1) IL(x); dominated by the smallest grid point, so
    the grid must stay away from 0 for a meaningful constant.
    """
    if not (0.0 < alpha < 1.0):
        raise ParameterError(f"alpha must lie strictly inside (0,1), got {alpha}")
    g = require_grid(grid)
    if np.any(g <= 0):
        raise GridError("grid points must be > 0 for the Hoelder comparison")
    return float(np.max(g ** (alpha - 1.0) * il(spec, g)))


def shift_ratio(n: int, k_small: float, k_large: float, x):
    """ln^(n)(k'+x) / ln^(n)(k+x) for k' > k; lies in [1, ln^(n)(k')]."""
    if k_large <= k_small:
        raise ParameterError("shift comparison needs k' > k")
    num = ln_iter(n, k_large + np.asarray(x, dtype=float))
    den = ln_iter(n, k_small + np.asarray(x, dtype=float))
    return num / den


__all__ = [
    "MAX_DEPTH",
    "IterLogSpec",
    "tower",
    "ln_chain",
    "ln_iter",
    "il",
    "il_damped",
    "depth_comparison_constant",
    "holder_domination_constant",
    "shift_ratio",
    "REL_TOL",
]
