"""Square-torus geometry and distance-dependent attenuation models.

The domain is the square [-Q, Q]^2 with opposite edges identified.  For two
points already inside the square the wraparound metric equals the minimum
over the nine lattice translates, which reduces to the per-coordinate
minimum image.

Attenuation models map distance to a power gain (transmit power normalised
to 1).  The integral a = \\int_S l(|x|) dx over the torus is the single
constant that controls the stability threshold of the link dynamics; it is
computed by adaptive radial quadrature, exact in the corner region through
the circle-square arc-length weight:

    a = \\int_0^Q 2 pi r l(r) dr
      + \\int_Q^{Q sqrt 2} r (2 pi - 8 arccos(Q/r)) l(r) dr.

Divergence of a is decided analytically from the model variant, never
numerically: an unbounded-at-origin power law r^-alpha has a divergent
integral iff alpha >= 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError, NumericsError

# kernel-level codes for the attenuation variants
PL_BOUNDED = 0
PL_TABULATED = 1
PL_POWERLAW = 2

_EMPTY = np.empty(0, dtype=np.float64)


@dataclass(frozen=True)
class TorusDomain:
    """Square torus [-Q, Q]^2 with wraparound metric."""

    half_side: float

    def __post_init__(self):
        if not self.half_side > 0:
            raise ConfigError(f"torus half-side must be > 0, got {self.half_side}")

    @property
    def period(self) -> float:
        return 2.0 * self.half_side

    def area(self) -> float:
        return 4.0 * self.half_side * self.half_side

    def contains(self, p) -> bool:
        x, y = float(p[0]), float(p[1])
        q = self.half_side
        return -q <= x <= q and -q <= y <= q

    def wrap(self, p) -> np.ndarray:
        """Map a point of the plane to its representative in [-Q, Q)^2."""
        q = self.half_side
        return (np.asarray(p, dtype=np.float64) + q) % (2.0 * q) - q

    def distance(self, x, y) -> float:
        return torus_distance(x, y, self)


def torus_distance(x, y, d: TorusDomain) -> float:
    """Wraparound distance, the minimum over the 9 lattice translates."""
    for p in (x, y):
        if not d.contains(p):
            raise ConfigError(f"point {tuple(p)} outside domain [-{d.half_side}, {d.half_side}]^2")
    per = d.period
    dx = abs(float(x[0]) - float(y[0]))
    dy = abs(float(x[1]) - float(y[1]))
    dx = min(dx, per - dx)
    dy = min(dy, per - dy)
    return math.hypot(dx, dy)


@dataclass(frozen=True)
class PathLossModel:
    """Base type: non-increasing power gain versus distance."""

    #: models with a finite value at r=0 may drive the simulator
    unbounded_at_origin = False

    def evaluate(self, r):
        raise NotImplementedError

    def __call__(self, r):
        return self.evaluate(r)

    def kernel_params(self):
        """(kind, k, alpha, table_r, table_v) consumed by the hot kernels."""
        raise NotImplementedError

    def diverges_at_origin(self) -> bool:
        return False


@dataclass(frozen=True)
class PowerLaw(PathLossModel):
    """l(r) = r^-alpha.  Unbounded at the origin; only useful to demonstrate
    that its attenuation integral diverges (alpha >= 2), hence not accepted
    as a simulator attenuation."""

    alpha: float
    unbounded_at_origin = True

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError("power-law exponent must be > 0")

    def evaluate(self, r):
        r = np.asarray(r, dtype=np.float64)
        with np.errstate(divide="ignore"):
            out = r ** (-self.alpha)
        return out if out.ndim else float(out)

    def kernel_params(self):
        return (PL_POWERLAW, 0.0, float(self.alpha), _EMPTY, _EMPTY)

    def diverges_at_origin(self) -> bool:
        return self.alpha >= 2.0


@dataclass(frozen=True)
class Bounded(PathLossModel):
    """l(r) = (r + k)^-alpha with k >= 1 so that l(0) <= 1."""

    k: float
    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError("bounded-model exponent must be > 0")
        if not self.k >= 1.0:
            raise ConfigError("bounded-model offset k must be >= 1 so that l(0) <= 1")

    def evaluate(self, r):
        r = np.asarray(r, dtype=np.float64)
        out = (r + self.k) ** (-self.alpha)
        return out if out.ndim else float(out)

    def kernel_params(self):
        return (PL_BOUNDED, float(self.k), float(self.alpha), _EMPTY, _EMPTY)


@dataclass(frozen=True)
class Tabulated(PathLossModel):
    """Piecewise-linear interpolation of monotone samples (r_i, v_i).

    Extended as a constant on both sides of the sampled range, which
    preserves monotonicity.
    """

    radii: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if r.ndim != 1 or r.shape != v.shape or r.size < 1:
            raise ConfigError("tabulated model needs matching 1-d radius/value samples")
        if np.any(np.diff(r) <= 0):
            raise ConfigError("tabulated radii must be strictly increasing")
        if np.any(np.diff(v) > 0):
            raise ConfigError("tabulated model must be non-increasing")
        if np.any(v < 0):
            raise ConfigError("tabulated gains must be non-negative")
        if not np.isfinite(v[0]) or v[0] > 1.0:
            raise ConfigError("tabulated model requires l(0) <= 1 and finite")
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "values", v)

    def evaluate(self, r):
        r = np.asarray(r, dtype=np.float64)
        out = np.interp(r, self.radii, self.values)
        return out if out.ndim else float(out)

    def kernel_params(self):
        return (PL_TABULATED, 0.0, 0.0, self.radii, self.values)


def constant_pathloss(value: float = 1.0) -> Tabulated:
    """Flat gain l == value, handy for analytic cross-checks."""
    return Tabulated(np.array([0.0, 1.0]), np.array([value, value]))


def torus_radial_integral(f, domain: TorusDomain, tol: float = 1e-10) -> float:
    """\\int_S f(|x|) dx for a radial integrand on the torus.

    Isotropic for r < Q; the corner region carries the exact arc-length
    weight r (2 pi - 8 arccos(Q/r)) which vanishes smoothly at Q sqrt 2.
    """
    q = domain.half_side

    def bulk(r):
        return 2.0 * math.pi * r * f(r)

    def corner(r):
        c = min(1.0, q / r)
        return r * (2.0 * math.pi - 8.0 * math.acos(c)) * f(r)

    kw = dict(epsabs=tol, epsrel=tol, limit=200)
    with np.errstate(all="ignore"):
        v1, e1 = quad(bulk, 0.0, q, **kw)
        v2, e2 = quad(corner, q, q * math.sqrt(2.0), **kw)
    val = v1 + v2
    if not math.isfinite(val):
        raise NumericsError("radial torus quadrature did not converge")
    if abs(val) > 0 and (e1 + e2) / max(abs(val), 1e-300) > 1e3 * tol:
        raise NumericsError(f"radial torus quadrature error estimate {e1 + e2:g} exceeds tolerance")
    return val


@dataclass(frozen=True)
class IntegralResult:
    """Outcome of the attenuation integral: a finite value or divergence."""

    divergent: bool
    value: float | None = None

    def unwrap(self) -> float:
        if self.divergent:
            raise NumericsError("attenuation integral diverges")
        return float(self.value)


def pathloss_integral_a(m: PathLossModel, d: TorusDomain, tol: float = 1e-10) -> IntegralResult:
    """a = \\int_S l(|x|) dx, or Divergent when the radial integral blows up
    at the origin (power law with alpha >= 2)."""
    if not tol > 0:
        raise ConfigError("tolerance must be > 0")
    if m.diverges_at_origin():
        return IntegralResult(divergent=True)
    value = torus_radial_integral(lambda r: float(m.evaluate(r)), d, tol=tol)
    return IntegralResult(divergent=False, value=value)
