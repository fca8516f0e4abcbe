"""Generator models, assumption certificates, and sampling-based checks.

A model is a deterministic map (t, b, y, z) -> g where b stands for the
current Brownian value (randomness restricted to functionals of the path,
which is what the lattice solver can represent), plus a nonnegative driver
process f(t, b).  Certificates declare growth/continuity envelopes; the
check_* operations minimize the certified margin over seeded quasi-random
samples drawn from a declared box.  Reports always echo the box: these are
sampling checks, not proofs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ._util import chunk_indices, parallel_map, rng_for
from .errors import CertificateMissingError, ParameterError
from .iterlog import IterLogSpec, il, il_damped

E8 = math.exp(8.0)


def sgn(y):
    """Sign convention with sgn(0) = -1."""
    return np.where(np.asarray(y, dtype=float) > 0, 1.0, -1.0)


def z_norm(z, dim: int = 1):
    za = np.asarray(z, dtype=float)
    if dim == 1:
        return np.abs(za)
    return np.sqrt(np.sum(za * za, axis=-1))


# ---------------------------------------------------------------------------
# moduli
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Modulus:
    """A continuous nondecreasing [0,inf) -> [0,inf) function with metadata.

    linear_growth_A, when set, certifies fn(u) <= A*(1+u) on the probed
    range.  declared_divergent is an attestation that int_0+ du/fn diverges;
    it cannot be machine-checked, only spot-checked.
    """

    name: str
    fn: Callable
    linear_growth_A: float | None = None
    declared_divergent: bool = False

    def __call__(self, u):
        ua = np.atleast_1d(np.asarray(u, dtype=float))
        out = self.fn(ua)
        return out if np.ndim(u) else float(out[0])


def l_modulus(eps: float = 1e-3, continuous_ext: bool = True) -> Modulus:
    """u |ln u| ln|ln u| on [0, eps], linearly extended beyond.

    continuous_ext=True uses l(eps) + l'(eps) (u - eps), which is the C^1
    extension; False uses the variant l'(eps) (u - l(eps)), which jumps
    negative at eps and is kept only for side-by-side inspection.
    """
    if not (0 < eps < 0.106):
        raise ParameterError(
            f"eps={eps} must sit inside (0, 0.106) where u|ln u|ln|ln u| is increasing"
        )
    le = eps * (-math.log(eps)) * math.log(-math.log(eps))
    lp = (-math.log(eps)) * math.log(-math.log(eps)) - math.log(-math.log(eps)) - 1.0

    def fn(u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        core = (u > 0) & (u <= eps)
        uc = u[core]
        out[core] = uc * np.abs(np.log(uc)) * np.log(np.abs(np.log(uc)))
        ext = u > eps
        if continuous_ext:
            out[ext] = le + lp * (u[ext] - eps)
        else:
            out[ext] = lp * (u[ext] - le)
        return out

    tag = "cont" if continuous_ext else "verbatim"
    return Modulus(f"l_modulus(eps={eps:g},{tag})", fn,
                   linear_growth_A=max(lp, le), declared_divergent=True)


def kappa_from_envelope(envelope: Callable, spec: IterLogSpec,
                        name: str = "kappa") -> Modulus:
    """Smallest modulus kappa with envelope(u) <= kappa(u / IL(u)).

    Inverts the strictly increasing map m(u) = u / IL(u) by fixed-point
    iteration u <- v * IL(u) (converges because IL varies on log scales),
    then composes: kappa(v) = envelope(m^{-1}(v)).
    """
    def m_inverse(v):
        v = np.asarray(v, dtype=float)
        u = v.copy()
        for _ in range(80):
            u = v * il(spec, u)
        # round the inversion up: a numerically built certificate must err
        # on the large side so certified margins stay truly nonnegative
        return u * (1.0 + 1e-12)

    def fn(v):
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        pos = v > 0
        out[pos] = envelope(m_inverse(v[pos]))
        return out

    probe = np.geomspace(1e-10, 1e10, 2000)
    A = float(np.max(fn(probe) / (probe + 1.0)))
    return Modulus(name, fn, linear_growth_A=A)


def divergence_spot_check(rho: Modulus, lo: float = 1e-8, hi: float = 1e-2,
                          threshold: float = 10.0, points: int = 4001) -> dict:
    """Heuristic flag for int_0+ du/rho = +inf: log-trapezoid quadrature of
    the integral over [lo, hi] compared against a threshold.  Informational
    only; slow divergences (iterated-log moduli) sit far below any O(1)
    threshold despite genuinely diverging.
    """
    u = np.geomspace(lo, hi, points)
    vals = 1.0 / rho(u)
    integral = float(np.trapezoid(vals, u))
    return {
        "integral": integral,
        "range": [lo, hi],
        "threshold": threshold,
        "flag": bool(integral >= threshold),
        "declared_divergent": rho.declared_divergent,
    }


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class H1Cert:
    kind: str = "H1"


@dataclass(frozen=True)
class H2Cert:
    n: int
    lam: float
    beta: float
    gamma: float
    kind: str = "H2"


@dataclass(frozen=True)
class H3Cert:
    c: float
    h: Modulus
    kind: str = "H3"


@dataclass(frozen=True)
class H4Cert:
    rho: Modulus
    divergence_threshold: float = 10.0
    kind: str = "H4"


@dataclass(frozen=True)
class H5Cert:
    n: int
    lam: float
    kappa: Modulus
    kind: str = "H5"


@dataclass(frozen=True)
class H2SCert:
    alpha: float
    beta: float
    gamma: float
    kind: str = "H2S"


@dataclass(frozen=True)
class H5SCert:
    alpha: float
    kappa_bar: Modulus
    kind: str = "H5S"


@dataclass(frozen=True)
class H5PrimeCert:
    A: float
    kappa_tilde: Modulus
    kind: str = "H5'"


def transform_h5prime_to_h5(cert: H5PrimeCert, n: int, lam: float,
                            grid=None) -> H5Cert:
    """Piecewise kappa realizing the equivalence of the primed variant.

    K1 bounds IL on [0,1]; K2 makes K2*x/IL(x) >= 1 on (1, inf); the branch
    is selected by comparing kappa_tilde(K1) with (1+K2)A.
    """
    if cert.A <= 0:
        raise ParameterError("the primed-variant constant A must be > 0")
    spec = IterLogSpec(n, lam)
    g1 = np.linspace(0.0, 1.0, 2001) if grid is None else np.asarray(grid, dtype=float)
    K1 = float(np.max(il(spec, g1[g1 <= 1.0])))
    g2 = np.geomspace(1.0 + 1e-9, 1e8, 20001)
    K2 = float(np.max(il(spec, g2) / g2))
    kt_K1 = float(cert.kappa_tilde(np.array([K1]))[0])
    if kt_K1 <= 0:
        raise ParameterError("kappa_tilde vanishes at K1; degenerate input")
    if kt_K1 >= (1.0 + K2) * cert.A:
        scale_small, slope = 1.0, kt_K1
    else:
        scale_small = (1.0 + K2) * cert.A / kt_K1
        slope = (1.0 + K2) * cert.A

    kt = cert.kappa_tilde

    def fn(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= 1.0, scale_small * kt(K1 * x), slope * x)

    name = f"kappa_from_{cert.kappa_tilde.name}(K1={K1:.4g},K2={K2:.4g})"
    A = max(slope, scale_small * (cert.kappa_tilde.linear_growth_A or slope) * K1)
    return H5Cert(n=n, lam=lam, kappa=Modulus(name, fn, linear_growth_A=A))


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleBox:
    """Declared sampling region; |z| magnitudes are drawn log-uniformly."""

    t: tuple = (0.0, 1.0)
    b: tuple = (-3.0, 3.0)
    y: tuple = (-3.0, 3.0)
    z_mag: tuple = (0.0, 1e6)

    def to_dict(self) -> dict:
        return {"t": list(self.t), "b": list(self.b),
                "y": list(self.y), "z_mag": list(self.z_mag)}


@dataclass(frozen=True)
class GeneratorModel:
    """Deterministic generator (t, b, y, z) -> g with its driver process."""

    name: str
    fn: Callable
    driver: Callable
    dim: int = 1
    z_dependent: bool = True
    y_nondecreasing: bool = False
    certificates: tuple = ()
    boxes: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def eval(self, t, b, y, z):
        return self.fn(np.asarray(t, dtype=float), np.asarray(b, dtype=float),
                       np.asarray(y, dtype=float), np.asarray(z, dtype=float))

    def driver_f(self, t, b):
        return self.driver(np.asarray(t, dtype=float), np.asarray(b, dtype=float))

    def box_for(self, kind: str) -> SampleBox:
        return self.boxes.get(kind, self.boxes.get("default", SampleBox()))

    def certificate(self, kind: str):
        for cert in self.certificates:
            if cert.kind == kind:
                return cert
        raise CertificateMissingError(f"model {self.name!r} carries no {kind} certificate")

    def shifted(self, c: float) -> "GeneratorModel":
        base = self.fn
        return replace(self, name=f"{self.name}+{c:g}", certificates=(),
                       fn=lambda t, b, y, z: base(t, b, y, z) + c)


def example_26(repaired_driver: bool = True) -> GeneratorModel:
    """Brownian-driven model with exponential y-damping, an iterated-log
    damped oscillatory z-term, and a quadratic z-term gated by sin y.

    The published driver b+1 is not nonnegative; the repaired |b|+1 is the
    default.  The H2/H3 boxes are restricted to the region where the
    certified envelopes actually hold (|y| <= 3 < pi, and |z| <= 10 for H3);
    see the negative-control tests for what fails outside.
    """
    damp34 = IterLogSpec(2, 0.75, E8)

    def fn(t, b, y, z):
        az = z_norm(z)
        return (b - np.exp(y) * np.sin(az) ** 2
                + il_damped(damp34, az) * np.cos(az)
                - az * az * np.sin(y))

    if repaired_driver:
        driver = lambda t, b: np.abs(b) + 1.0
    else:
        driver = lambda t, b: b + 1.0

    h_exp = Modulus("exp_growth", lambda u: np.exp(u))
    return GeneratorModel(
        name="example26" if repaired_driver else "example26_verbatim_f",
        fn=fn, driver=driver,
        certificates=(H1Cert(), H2Cert(2, 0.75, beta=0.0, gamma=1.0),
                      H3Cert(c=1.0, h=h_exp)),
        boxes={
            "default": SampleBox(),
            "H3": SampleBox(z_mag=(0.0, 10.0)),
        },
        meta={"driver": "abs(b)+1" if repaired_driver else "b+1"},
    )


def _z_envelope_27(u):
    u = np.asarray(u, dtype=float)
    damp23 = IterLogSpec(2, 2.0 / 3.0, E8)
    return (np.minimum(u, 2.0) + np.sqrt(u) + u ** (1.0 / 3.0)
            + u / np.log(math.e + u) + il_damped(damp23, u))


def example_27(eps: float = 1e-3, continuous_ext: bool = True) -> GeneratorModel:
    """Model with the slowly-diverging y-modulus l and five z-moduli whose
    increments are each bounded by their own value at the increment.

    Certified margins trace back to those increment bounds: the H5 kappa is
    the summed envelope composed with the inverse of u -> u/IL(u).
    """
    lmod = l_modulus(eps, continuous_ext)
    damp23 = IterLogSpec(2, 2.0 / 3.0, E8)

    def fn(t, b, y, z):
        az = z_norm(z)
        yneg = np.minimum(np.asarray(y, dtype=float), 0.0)
        return (yneg ** 4 + lmod(np.abs(y)) + np.sin(az) + np.sqrt(az)
                + az ** (1.0 / 3.0) + az / np.log(math.e + az)
                + il_damped(damp23, az))

    driver = lambda t, b: np.full_like(np.asarray(b, dtype=float), 3.2)
    beta = (-math.log(eps)) * math.log(-math.log(eps)) - math.log(-math.log(eps)) - 1.0
    kappa = kappa_from_envelope(
        lambda u: _z_envelope_27(u), IterLogSpec(2, 2.0 / 3.0),
        name="sum_of_z_moduli",
    )
    h = Modulus("quartic_plus_l", lambda u: u**4 + lmod(u))
    return GeneratorModel(
        name="example27" if continuous_ext else "example27_verbatim_l",
        fn=fn, driver=driver,
        certificates=(H1Cert(),
                      H2Cert(2, 2.0 / 3.0, beta=beta, gamma=4.0),
                      H3Cert(c=1.0, h=h),
                      H4Cert(rho=lmod),
                      H5Cert(2, 2.0 / 3.0, kappa=kappa)),
        boxes={"default": SampleBox()},
        meta={"eps": eps, "l_extension": "continuous" if continuous_ext else "verbatim"},
    )


def quadratic_z_model() -> GeneratorModel:
    """|z|^2 generator: the canonical H5 negative control."""
    return GeneratorModel(name="quadratic_z",
                          fn=lambda t, b, y, z: z_norm(z) ** 2,
                          driver=lambda t, b: np.zeros_like(b))


def abs_z_model() -> GeneratorModel:
    """|z| generator: linear growth, fails any damped H2 with gamma*|z|/IL."""
    return GeneratorModel(name="abs_z",
                          fn=lambda t, b, y, z: z_norm(z),
                          driver=lambda t, b: np.zeros_like(b))


def holder_sqrt_model() -> GeneratorModel:
    """sqrt(|z|) generator carrying an alpha=1/2 sublinear certificate."""
    return GeneratorModel(name="holder_sqrt_z",
                          fn=lambda t, b, y, z: np.sqrt(z_norm(z)),
                          driver=lambda t, b: np.zeros_like(b),
                          certificates=(H2SCert(alpha=0.5, beta=0.0, gamma=1.0),))


def linear_drift_model(beta: float = 0.5) -> GeneratorModel:
    """g = beta*y: z-free, used by the closed-form solver oracles."""
    return GeneratorModel(name=f"linear_drift({beta:g})",
                          fn=lambda t, b, y, z: beta * np.asarray(y, dtype=float),
                          driver=lambda t, b: np.zeros_like(b),
                          z_dependent=False, y_nondecreasing=beta >= 0)


def zero_model() -> GeneratorModel:
    return GeneratorModel(name="zero",
                          fn=lambda t, b, y, z: np.zeros_like(np.asarray(y, dtype=float)),
                          driver=lambda t, b: np.zeros_like(b),
                          z_dependent=False, y_nondecreasing=True)


BUILTIN_MODELS = {
    "example26": example_26,
    "example26_verbatim_f": lambda: example_26(repaired_driver=False),
    "example27": example_27,
    "example27_verbatim_l": lambda: example_27(continuous_ext=False),
    "quadratic_z": quadratic_z_model,
    "abs_z": abs_z_model,
    "holder_sqrt_z": holder_sqrt_model,
    "linear_drift": linear_drift_model,
    "zero": zero_model,
}


def builtin_model(name: str) -> GeneratorModel:
    try:
        return BUILTIN_MODELS[name]()
    except KeyError:
        raise ParameterError(
            f"unknown model {name!r}; builtins: {sorted(BUILTIN_MODELS)}"
        ) from None


# ---------------------------------------------------------------------------
# structured model configs: sums of factored atoms coeff * fy(y) fz(|z|) fb(b)
# ---------------------------------------------------------------------------

def _factor_y(spec: dict) -> Callable:
    kind = spec.get("kind", "one")
    if kind == "one":
        return lambda y: np.ones_like(y)
    if kind == "identity":
        return lambda y: y
    if kind == "abs":
        return lambda y: np.abs(y)
    if kind == "sin":
        return lambda y: np.sin(y)
    if kind == "cos":
        return lambda y: np.cos(y)
    if kind == "exp":
        return lambda y: np.exp(y)
    if kind == "abs_pow":
        p = float(spec["power"])
        return lambda y: np.abs(y) ** p
    if kind == "neg_part_pow":
        p = float(spec["power"])
        return lambda y: np.minimum(y, 0.0) ** p
    if kind == "l_modulus":
        lm = l_modulus(float(spec.get("eps", 1e-3)))
        return lambda y: lm(np.abs(y))
    raise ParameterError(f"unknown y factor {kind!r}")


def _factor_z(spec: dict) -> Callable:
    kind = spec.get("kind", "one")
    if kind == "one":
        return lambda az: np.ones_like(az)
    if kind == "abs":
        return lambda az: az
    if kind == "abs_pow":
        p = float(spec["power"])
        return lambda az: az ** p
    if kind == "sin_abs":
        return lambda az: np.sin(az)
    if kind == "cos_abs":
        return lambda az: np.cos(az)
    if kind == "sin2_abs":
        return lambda az: np.sin(az) ** 2
    if kind == "iterlog_damped":
        spec_il = IterLogSpec(int(spec.get("n", 2)), float(spec.get("lambda", 0.75)),
                              float(spec.get("k", E8)))
        return lambda az: il_damped(spec_il, az)
    raise ParameterError(f"unknown z factor {kind!r}")


def _factor_b(spec: dict) -> Callable:
    kind = spec.get("kind", "one")
    if kind == "one":
        return lambda b: np.ones_like(b)
    if kind == "identity":
        return lambda b: b
    if kind == "abs":
        return lambda b: np.abs(b)
    raise ParameterError(f"unknown b factor {kind!r}")


def _driver_from_config(spec: dict) -> Callable:
    kind = spec.get("kind", "zero")
    if kind == "zero":
        return lambda t, b: np.zeros_like(b)
    if kind == "constant":
        c = float(spec.get("value", 1.0))
        return lambda t, b: np.full_like(b, c)
    if kind == "abs_brownian_plus":
        c = float(spec.get("value", 1.0))
        return lambda t, b: np.abs(b) + c
    if kind == "brownian_plus":
        c = float(spec.get("value", 1.0))
        return lambda t, b: b + c
    raise ParameterError(f"unknown driver kind {kind!r}")


def model_from_config(cfg: dict) -> GeneratorModel:
    """Build a generator from a table of factored atoms.

    Each atom contributes coeff * fy(y) * fz(|z|) * fb(b); see _factor_y /
    _factor_z / _factor_b for the atom vocabulary.  A bare
    {"builtin": name} table returns the named builtin instead.
    """
    if "builtin" in cfg:
        return builtin_model(cfg["builtin"])
    atoms = cfg.get("atoms")
    if not atoms:
        raise ParameterError("model config needs an [[atoms]] list or a builtin name")
    parts = []
    z_dep = False
    for atom in atoms:
        coeff = float(atom.get("coeff", 1.0))
        fy = _factor_y(atom.get("y", {}))
        fz = _factor_z(atom.get("z", {}))
        fb = _factor_b(atom.get("b", {}))
        z_dep = z_dep or atom.get("z", {}).get("kind", "one") != "one"
        parts.append((coeff, fy, fz, fb))

    def fn(t, b, y, z):
        az = z_norm(z)
        total = np.zeros_like(np.asarray(y, dtype=float) + az + np.asarray(b, dtype=float))
        for coeff, fy, fz, fb in parts:
            total = total + coeff * fy(np.asarray(y, dtype=float)) * fz(az) * fb(np.asarray(b, dtype=float))
        return total

    return GeneratorModel(name=cfg.get("name", "custom"), fn=fn,
                          driver=_driver_from_config(cfg.get("driver", {"kind": "zero"})),
                          z_dependent=z_dep,
                          meta={"atoms": len(parts)})


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _draw_z_mag(rng, lo: float, hi: float, count: int) -> np.ndarray:
    """|z| magnitudes: log-uniform over the positive decades with small
    slices at exactly zero and in the linear low range, so both the z=0
    plane and small-|z| behavior are exercised."""
    u = rng.random(count)
    out = np.empty(count)
    zero = u < 0.02
    linear = (u >= 0.02) & (u < 0.10)
    out[zero] = 0.0
    lin_hi = min(hi, 10.0) if hi > 0 else 0.0
    out[linear] = rng.uniform(max(lo, 0.0), lin_hi, int(linear.sum()))
    rest = ~(zero | linear)
    lo_log = math.log10(max(lo, 1e-8))
    hi_log = math.log10(max(hi, 1e-8))
    out[rest] = 10.0 ** rng.uniform(lo_log, hi_log, int(rest.sum()))
    return np.clip(out, lo, hi)


def draw_samples(box: SampleBox, count: int, seed: int, chunk_index: int = 0,
                 pairs: str = "") -> dict:
    """One chunk of seeded samples; the stream depends only on
    (seed, chunk_index), never on worker scheduling.

    pairs="z" adds a second z column biased toward small increments;
    pairs="y" adds a second y strictly below the first.
    """
    rng = rng_for(seed, chunk_index)
    t = rng.uniform(box.t[0], box.t[1], count)
    b = rng.uniform(box.b[0], box.b[1], count)
    y = rng.uniform(box.y[0], box.y[1], count)
    zmag = _draw_z_mag(rng, box.z_mag[0], box.z_mag[1], count)
    z = zmag * np.where(rng.random(count) < 0.5, 1.0, -1.0)
    out = {"t": t, "b": b, "y": y, "z": z}
    if pairs == "z":
        inc = _draw_z_mag(rng, 0.0, max(box.z_mag[1], 1.0), count)
        sign = np.where(rng.random(count) < 0.5, 1.0, -1.0)
        fresh = rng.random(count) < 0.5
        z2 = np.where(fresh,
                      _draw_z_mag(rng, box.z_mag[0], box.z_mag[1], count)
                      * np.where(rng.random(count) < 0.5, 1.0, -1.0),
                      z + sign * inc)
        out["z2"] = z2
    elif pairs == "y":
        gap = 10.0 ** rng.uniform(-8, math.log10(max(box.y[1] - box.y[0], 1e-6)), count)
        out["y2"] = np.maximum(y - gap, box.y[0] - (box.y[1] - box.y[0]))
    return out


# ---------------------------------------------------------------------------
# margin checks
# ---------------------------------------------------------------------------

@dataclass
class MarginReport:
    model: str
    kind: str
    min_margin: float
    min_rel_margin: float
    argmin: dict
    n_samples: int
    box: SampleBox
    passed: bool
    tolerance: float
    seed: int
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "assumption": self.kind,
            "min_margin": self.min_margin,
            "min_rel_margin": self.min_rel_margin,
            "argmin": self.argmin,
            "pass": self.passed,
            "config": {
                "n_samples": self.n_samples,
                "box": self.box.to_dict(),
                "tolerance": self.tolerance,
                "seed": self.seed,
                **self.extras,
            },
        }


_CHUNK = 20000


def _run_margin_check(model, cert, margin_fn, pairs, count, seed, box, tol, threads,
                      extras=None) -> MarginReport:
    box = box or model.box_for(cert.kind)
    chunks = chunk_indices(count, _CHUNK)

    def work(args):
        ci, (lo, hi) = args
        s = draw_samples(box, hi - lo, seed, chunk_index=ci, pairs=pairs)
        margin, scale = margin_fn(s)
        rel = margin / np.maximum(scale, 1.0)
        i = int(np.argmin(rel))
        arg = {k: float(v[i]) for k, v in s.items()}
        return float(margin[i]), float(rel[i]), arg

    results = parallel_map(work, list(enumerate(chunks)), threads=threads)
    worst = min(results, key=lambda r: r[1])
    passed = worst[1] >= -tol
    return MarginReport(model=model.name, kind=cert.kind,
                        min_margin=worst[0], min_rel_margin=worst[1],
                        argmin=worst[2], n_samples=count, box=box,
                        passed=passed, tolerance=tol, seed=seed,
                        extras=extras or {})


def check_h2(model: GeneratorModel, cert: H2Cert, count: int = 10**5,
             seed: int = 0, box: SampleBox | None = None,
             tol: float = 1e-10, threads: int = 1) -> MarginReport:
    """sgn(y) g <= f + beta|y| + gamma |z| / IL(|z|), canonical shift."""
    spec = IterLogSpec(cert.n, cert.lam)

    def margin_fn(s):
        az = np.abs(s["z"])
        rhs = (model.driver_f(s["t"], s["b"]) + cert.beta * np.abs(s["y"])
               + cert.gamma * il_damped(spec, az))
        lhs = sgn(s["y"]) * model.eval(s["t"], s["b"], s["y"], s["z"])
        return rhs - lhs, np.abs(rhs) + np.abs(lhs)

    return _run_margin_check(model, cert, margin_fn, "", count, seed, box, tol, threads)


def check_h2s(model: GeneratorModel, cert: H2SCert, count: int = 10**5,
              seed: int = 0, box: SampleBox | None = None,
              tol: float = 1e-10, threads: int = 1) -> MarginReport:
    """sgn(y) g <= f + beta|y| + gamma |z|^alpha."""
    def margin_fn(s):
        az = np.abs(s["z"])
        rhs = (model.driver_f(s["t"], s["b"]) + cert.beta * np.abs(s["y"])
               + cert.gamma * az ** cert.alpha)
        lhs = sgn(s["y"]) * model.eval(s["t"], s["b"], s["y"], s["z"])
        return rhs - lhs, np.abs(rhs) + np.abs(lhs)

    return _run_margin_check(model, cert, margin_fn, "", count, seed, box, tol, threads)


def check_h3(model: GeneratorModel, cert: H3Cert, count: int = 10**5,
             seed: int = 0, box: SampleBox | None = None,
             tol: float = 1e-10, threads: int = 1) -> MarginReport:
    """|g| <= f + h(|y|) + c |z|^2."""
    def margin_fn(s):
        az = np.abs(s["z"])
        rhs = (model.driver_f(s["t"], s["b"]) + cert.h(np.abs(s["y"]))
               + cert.c * az * az)
        lhs = np.abs(model.eval(s["t"], s["b"], s["y"], s["z"]))
        return rhs - lhs, np.abs(rhs) + lhs

    return _run_margin_check(model, cert, margin_fn, "", count, seed, box, tol, threads)


def check_h4(model: GeneratorModel, cert: H4Cert, count: int = 10**5,
             seed: int = 0, box: SampleBox | None = None,
             tol: float = 1e-10, threads: int = 1) -> MarginReport:
    """g(y1, z) - g(y2, z) <= rho(y1 - y2) on samples with y1 > y2."""
    def margin_fn(s):
        rhs = cert.rho(s["y"] - s["y2"])
        lhs = (model.eval(s["t"], s["b"], s["y"], s["z"])
               - model.eval(s["t"], s["b"], s["y2"], s["z"]))
        return rhs - lhs, np.abs(rhs) + np.abs(lhs)

    extras = {"divergence_spot_check":
              divergence_spot_check(cert.rho, threshold=cert.divergence_threshold)}
    return _run_margin_check(model, cert, margin_fn, "y", count, seed, box, tol,
                             threads, extras=extras)


def check_h5(model: GeneratorModel, cert: H5Cert, count: int = 10**5,
             seed: int = 0, box: SampleBox | None = None,
             tol: float = 1e-10, threads: int = 1) -> MarginReport:
    """|g(z1) - g(z2)| <= kappa(|z1-z2| / IL(|z1-z2|)), canonical shift."""
    spec = IterLogSpec(cert.n, cert.lam)

    def margin_fn(s):
        gap = np.abs(s["z"] - s["z2"])
        rhs = cert.kappa(il_damped(spec, gap))
        lhs = np.abs(model.eval(s["t"], s["b"], s["y"], s["z"])
                     - model.eval(s["t"], s["b"], s["y"], s["z2"]))
        return rhs - lhs, np.abs(rhs) + lhs

    return _run_margin_check(model, cert, margin_fn, "z", count, seed, box, tol, threads)


def check_h1(model: GeneratorModel, cert: H1Cert | None = None, count: int = 10**4,
             seed: int = 0, box: SampleBox | None = None,
             tol: float = 1e-12, threads: int = 1) -> MarginReport:
    """Continuity smoke test in (y, z): a jump localizer.

    On a short segment through each sample (per axis), bisect toward the
    sub-segment carrying the increment; a continuous map sheds the
    increment as the segment shrinks below float resolution, a jump does
    not.  Only jumps crossed by sampled segments can be seen: this refutes
    gross violations, it verifies nothing.
    """
    cert = cert or H1Cert()

    def margin_fn(s):
        count = int(s["t"].size)
        rng = rng_for(seed, 999, count)
        sy = np.where(rng.random(count) < 0.5, 1.0, -1.0) * (1.0 + np.abs(s["y"])) * 2.0**-8
        sz = np.where(rng.random(count) < 0.5, 1.0, -1.0) * (1.0 + np.abs(s["z"])) * 2.0**-8
        g0 = model.eval(s["t"], s["b"], s["y"], s["z"])
        floor = 1e-6 * (1.0 + np.abs(g0))

        def axis_margin(dy, dz):
            def g_at(lam):
                return model.eval(s["t"], s["b"], s["y"] + lam * dy, s["z"] + lam * dz)

            # bisect toward the location carrying the increment; after ~45
            # halvings the segment is below float resolution, so whatever
            # increment is left across it is a genuine jump, not slope
            lo, hi = np.zeros(count), np.ones(count)
            g_lo, g_hi = g_at(lo), g_at(hi)
            inc_big = np.abs(g_hi - g_lo)
            for _ in range(45):
                mid = 0.5 * (lo + hi)
                g_mid = g_at(mid)
                take_left = np.abs(g_mid - g_lo) >= np.abs(g_hi - g_mid)
                hi = np.where(take_left, mid, hi)
                g_hi = np.where(take_left, g_mid, g_hi)
                lo = np.where(take_left, lo, mid)
                g_lo = np.where(take_left, g_lo, g_mid)
            jump = np.abs(g_hi - g_lo)
            allowance = np.maximum(floor, 0.25 * inc_big)
            return allowance - jump, allowance + jump

        my, scale_y = axis_margin(sy, 0.0)
        mz, scale_z = axis_margin(0.0, sz)
        return np.minimum(my, mz), np.where(my < mz, scale_y, scale_z)

    return _run_margin_check(model, cert, margin_fn, "", count, seed, box, tol, threads)


_CHECKERS = {"H1": check_h1, "H2": check_h2, "H2S": check_h2s, "H3": check_h3,
             "H4": check_h4, "H5": check_h5}


def check_certificate(model: GeneratorModel, kind_or_cert, count: int = 10**5,
                      seed: int = 0, box: SampleBox | None = None,
                      tol: float = 1e-10, threads: int = 1) -> MarginReport:
    """Run the matching margin check for a certificate kind or instance."""
    cert = (model.certificate(kind_or_cert) if isinstance(kind_or_cert, str)
            else kind_or_cert)
    try:
        checker = _CHECKERS[cert.kind]
    except KeyError:
        raise ParameterError(f"no checker for certificate kind {cert.kind!r}") from None
    return checker(model, cert, count=count, seed=seed, box=box, tol=tol, threads=threads)


__all__ = [
    "Modulus", "l_modulus", "kappa_from_envelope", "divergence_spot_check",
    "H1Cert", "H2Cert", "H3Cert", "H4Cert", "H5Cert", "H2SCert", "H5SCert",
    "H5PrimeCert", "transform_h5prime_to_h5",
    "SampleBox", "GeneratorModel", "MarginReport",
    "example_26", "example_27", "quadratic_z_model", "abs_z_model",
    "holder_sqrt_model", "linear_drift_model", "zero_model",
    "BUILTIN_MODELS", "builtin_model", "model_from_config",
    "draw_samples", "check_h1", "check_h2", "check_h2s", "check_h3",
    "check_h4", "check_h5", "check_certificate", "sgn", "z_norm", "E8",
]
