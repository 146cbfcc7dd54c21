"""Closed-form and fixed-point steady-state predictions.

* critical rate: lam_c = C l(T) / (ln 2 * L * a), the exact threshold
  between ergodic and unbounded growth; 0 when a diverges.
* complete-spatial-randomness fixed point (the first-order prediction,
  ``beta_f``): the largest root of

      lam L = (C beta / ln 2) * Int_0^inf  e^{-N0 z} / z * (1 - e^{-z l(T)})
              * exp(-beta * Int_S (1 - e^{-z l(|x|)}) dx)  dz,

  obtained from the log-moment identity
  E[ln(1 + X/(Y+a))] = Int_0^inf e^{-az}/z (1 - E e^{-zX}) E[e^{-zY}] dz
  applied with an independently-marked uniform point set of the same
  intensity.  The C factor carries the rate constant through the balance
  (the usual normalisation sets C = 1); it is required for dimensional
  consistency, cf. the lam -> 0 limit beta/lam -> L / (C log2(1 + l(T)/N0)).
* pair-correlation fixed point (the second-order prediction, ``beta_s``):
  typical interference I_s solves

      I_s = lam L Int_S l(|x|) / (C log2(1 + l(T)/(N0 + I_s + l(|x|)))) dx

  (smallest non-negative root) and beta_s = lam L / (C log2(1 + l(T)/(N0 +
  I_s))); the integrand is the cavity form of the second moment density
  implemented in ``second_moment_approx``.
* multi-antenna threshold: C Xr / (L a ln 2), implemented exactly as
  stated (no l(T) factor; the multi-antenna bound absorbs the signal gain
  -- flagged here because the general-T scaling is not settled).

All spatial integrals run over the torus via the radial decomposition; the
z-integral uses composite Gauss-Legendre panels in log z, doubled until the
evaluation is stable to the requested tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError, NumericsError
from .network import ChannelParams
from .torus import IntegralResult, TorusDomain, pathloss_integral_a

LN2 = math.log(2.0)

STATUS_CONVERGED = "converged"
STATUS_DIVERGED = "diverged"
STATUS_NO_SOLUTION = "no-solution"


@dataclass(frozen=True)
class HeuristicSolution:
    beta: float
    residual: float
    solver_status: str
    i_s: float | None = None
    crossings: int = 0


def _as_a_value(a) -> float | None:
    """None signals a divergent attenuation integral."""
    if isinstance(a, IntegralResult):
        return None if a.divergent else float(a.value)
    a = float(a)
    return None if math.isinf(a) else a


def critical_lambda(p: ChannelParams, T: float, a) -> float:
    """Threshold arrival intensity; 0 when the attenuation integral
    diverges (every positive rate is then unstable)."""
    av = _as_a_value(a)
    if av is None:
        return 0.0
    if not av > 0:
        raise ConfigError("attenuation integral must be positive")
    return p.C * float(p.pathloss.evaluate(T)) / (LN2 * p.L * av)


def mimo_critical_lambda(p: ChannelParams, a, Xr: int) -> float:
    """Multi-antenna threshold C Xr / (L a ln 2); scales linearly in the
    receive-antenna count."""
    if Xr < 1:
        raise ConfigError("Xr must be >= 1")
    av = _as_a_value(a)
    if av is None:
        return 0.0
    return p.C * Xr / (p.L * av * LN2)


def light_traffic_beta(lam: float, p: ChannelParams, T: float) -> float:
    """Interaction-free prediction lam L / (C log2(1 + l(T)/N0))."""
    solo = p.C * math.log2(1.0 + float(p.pathloss.evaluate(T)) / p.N0)
    return lam * p.L / solo


def log_moment_integral(signal: float, noise_const: float, interference_laplace,
                      tol: float = 1e-10) -> float:
    """E[ln(1 + signal/(Y + noise_const))] for independent Y with the given
    Laplace transform, via the exponential-integral identity.  The z -> 0
    singularity is removable (integrand -> signal * laplace(0+))."""
    if not tol > 0:
        raise ConfigError("tolerance must be > 0")
    s = float(signal)
    if s == 0.0:
        return 0.0

    def integrand(z):
        if z <= 0.0:
            return s * float(interference_laplace(1e-300))
        zs = z * s
        lead = s * (1.0 - 0.5 * zs) if zs < 1e-8 else -math.expm1(-zs) / z
        return math.exp(-noise_const * z) * lead * float(interference_laplace(z))

    val, err = quad(integrand, 0.0, np.inf, epsabs=tol, epsrel=tol, limit=400)
    if not math.isfinite(val) or err > max(abs(val), 1.0) * 1e3 * tol:
        raise NumericsError(f"log-moment quadrature did not reach tol={tol} (err={err:g})")
    return val


# ---------------------------------------------------------------------------
# radial quadrature grids on the torus
# ---------------------------------------------------------------------------

def _gauss_panels(a: float, b: float, n_panels: int, order: int = 12):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def torus_radial_grid(domain: TorusDomain, n_panels: int = 64):
    """Nodes/weights such that sum w_j f(r_j) ~ Int_S f(|x|) dx.

    Corner region substituted as u = arccos(Q/r) so the arc-length weight
    r (2 pi - 8 u) becomes smooth (the sqrt kink at r = Q would otherwise
    spoil the panel convergence)."""
    q = domain.half_side
    r1, w1 = _gauss_panels(0.0, q, n_panels)
    w1 = w1 * 2.0 * math.pi * r1
    u, wu = _gauss_panels(0.0, math.pi / 4.0, max(n_panels // 2, 8))
    r2 = q / np.cos(u)
    w2 = wu * (2.0 * math.pi - 8.0 * u) * r2 * (q * np.sin(u) / np.cos(u) ** 2)
    return np.concatenate([r1, r2]), np.concatenate([w1, w2])


class _FixedPointProblem:
    """Shared quadrature state for the two fixed-point predictions."""

    def __init__(self, p: ChannelParams, T: float, domain: TorusDomain, tol: float):
        if not tol > 0:
            raise ConfigError("tolerance must be > 0")
        self.p = p
        self.T = float(T)
        self.domain = domain
        self.tol = tol
        self.sig = float(p.pathloss.evaluate(T))
        self.r, self.wr = self._converged_radial_grid()
        self.lr = np.asarray(p.pathloss.evaluate(self.r), dtype=np.float64)
        self.a = float(np.sum(self.wr * self.lr))
        self.lam_c = p.C * self.sig / (LN2 * p.L * self.a)
        self.beta_mminf_per_lam = p.L / (p.C * math.log2(1.0 + self.sig / p.N0))
        self._z = None

    def _converged_radial_grid(self):
        panels = 64
        r, w = torus_radial_grid(self.domain, panels)
        val = float(np.sum(w * self.p.pathloss.evaluate(r)))
        while panels < 2048:
            panels *= 2
            r2, w2 = torus_radial_grid(self.domain, panels)
            val2 = float(np.sum(w2 * self.p.pathloss.evaluate(r2)))
            if abs(val2 - val) <= 0.05 * self.tol * max(abs(val2), 1e-300):
                return r2, w2
            r, w, val = r2, w2, val2
        raise NumericsError("radial grid failed to converge for the attenuation model")

    # -- first-order machinery ---------------------------------------------

    def _build_z_grid(self, n_panels: int):
        z_lo, z_hi = 1e-12, 100.0 / self.p.N0
        u, wu = _gauss_panels(math.log(z_lo), math.log(z_hi), n_panels)
        z = np.exp(u)
        wz = wu * z
        amp = np.exp(-self.p.N0 * z) * (-np.expm1(-z * self.sig)) / z
        # G(z) = Int_S (1 - e^{-z l(|x|)}) dx on the shared radial grid
        g = (-np.expm1(-np.outer(z, self.lr))) @ self.wr
        return z, wz, amp, g

    def _rhs_factory(self, n_panels: int):
        _, wz, amp, g = self._build_z_grid(n_panels)
        coeff = self.p.C / LN2

        def rhs(beta: float) -> float:
            return coeff * beta * float(np.sum(wz * amp * np.exp(-beta * g)))

        return rhs

    def first_order_rhs(self):
        if self._z is None:
            panels = 48
            rhs = self._rhs_factory(panels)
            probe = max(self.beta_mminf_per_lam * self.lam_c * 0.5, 1e-6)
            val = rhs(probe)
            while panels < 1024:
                panels *= 2
                rhs2 = self._rhs_factory(panels)
                val2 = rhs2(probe)
                if abs(val2 - val) <= 0.05 * self.tol * max(abs(val2), 1e-300):
                    self._z = rhs2
                    return rhs2
                rhs, val = rhs2, val2
            raise NumericsError("z-grid failed to converge for the fixed point")
        return self._z

    # -- second-order machinery ----------------------------------------------

    def interference_rhs(self, lam: float, i_val: float) -> float:
        denom = self.p.C * np.log2(1.0 + self.sig / (self.p.N0 + i_val + self.lr))
        return lam * self.p.L * float(np.sum(self.wr * self.lr / denom))


def poisson_heuristic_beta(lam: float, p: ChannelParams, T: float,
                           domain: TorusDomain, tol: float = 1e-8) -> HeuristicSolution:
    """Largest root of the complete-spatial-randomness fixed point.

    The right side rises to the asymptote lam_c L as beta grows, so the scan
    walks a geometric beta grid downward from a large upper bracket and
    bisects the first sign change; every crossing found on the way is
    counted and reported (uniqueness is not guaranteed)."""
    prob = _FixedPointProblem(p, T, domain, tol)
    if lam <= 0:
        return HeuristicSolution(0.0, 0.0, STATUS_CONVERGED)
    if lam >= prob.lam_c:
        return HeuristicSolution(math.inf, math.nan, STATUS_DIVERGED)
    rhs = prob.first_order_rhs()
    target = lam * p.L

    beta_scale = prob.beta_mminf_per_lam * lam
    hi = 1e3 * beta_scale
    lo = 1e-4 * beta_scale
    grid = np.geomspace(hi, lo, 160)
    vals = np.array([rhs(b) - target for b in grid])
    sign_changes = np.nonzero(np.diff(np.signbit(vals)))[0]
    crossings = int(sign_changes.size)
    if crossings == 0:
        return HeuristicSolution(math.nan, math.nan, STATUS_NO_SOLUTION)
    i = int(sign_changes[0])
    b_hi, b_lo = grid[i], grid[i + 1]  # grid descends
    f_hi = vals[i]
    for _ in range(200):
        mid = math.sqrt(b_hi * b_lo)
        fm = rhs(mid) - target
        if (fm > 0) == (f_hi > 0):
            b_hi, f_hi = mid, fm
        else:
            b_lo = mid
        if b_hi - b_lo <= 1e-12 * b_hi:
            break
    beta = 0.5 * (b_hi + b_lo)
    defect = (rhs(beta) - target) / target
    status = STATUS_CONVERGED if abs(defect) < max(tol, 1e-9) * 10 else STATUS_NO_SOLUTION
    return HeuristicSolution(float(beta), float(defect), status, crossings=crossings)


def second_order_beta(lam: float, p: ChannelParams, T: float,
                      domain: TorusDomain, tol: float = 1e-8) -> HeuristicSolution:
    """Smallest non-negative root of the typical-interference fixed point,
    then the rate-balance density at that interference."""
    if lam < 0:
        raise ConfigError("arrival intensity must be >= 0")
    prob = _FixedPointProblem(p, T, domain, tol)
    if lam == 0:
        return HeuristicSolution(0.0, 0.0, STATUS_CONVERGED, i_s=0.0)
    target = lam * p.L

    def g(i_val: float) -> float:
        return prob.interference_rhs(lam, i_val) - i_val

    i_lo = 0.0
    g_lo = g(0.0)  # > 0 always: positive integral at zero interference
    i_probe = max(g_lo, 1e-12)
    found = False
    for _ in range(200):
        if g(i_probe) < 0:
            found = True
            break
        i_lo = i_probe
        i_probe *= 1.5
        if i_probe > 1e15:
            break
    if not found:
        return HeuristicSolution(math.nan, math.nan, STATUS_NO_SOLUTION)
    i_hi = i_probe
    for _ in range(200):
        mid = 0.5 * (i_lo + i_hi)
        if g(mid) > 0:
            i_lo = mid
        else:
            i_hi = mid
        if i_hi - i_lo <= 1e-13 * max(i_hi, 1.0):
            break
    i_s = 0.5 * (i_lo + i_hi)
    beta = target / (p.C * math.log2(1.0 + prob.sig / (p.N0 + i_s)))
    defect = g(i_s) / max(i_s, 1e-300)
    status = STATUS_CONVERGED if abs(defect) < max(tol, 1e-9) * 10 else STATUS_NO_SOLUTION
    return HeuristicSolution(float(beta), float(defect), status, i_s=float(i_s))


def second_moment_approx(x, y, lam: float, beta: float, i_s: float,
                         p: ChannelParams, T: float,
                         domain: TorusDomain | None = None) -> float:
    """Cavity form of the pair density,

        rho2(x, y) = beta lam L / (C log2(1 + l(T)/(N0 + I_s + l(|x-y|)))):

    each point of the pair sees the typical interference plus the other
    point's gain.  Wraparound distance when a domain is given, else
    Euclidean."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if domain is not None:
        from .torus import torus_distance
        d = torus_distance(x, y, domain)
    else:
        d = float(np.hypot(*(x - y)))
    gain = float(p.pathloss.evaluate(d))
    sig = float(p.pathloss.evaluate(T))
    denom = p.C * math.log2(1.0 + sig / (p.N0 + i_s + gain))
    return beta * lam * p.L / denom


def heuristics_sweep(lambdas, p: ChannelParams, T: float, domain: TorusDomain,
                     tol: float = 1e-8):
    """Rows (lambda, beta_f, beta_s, beta_l, lambda_c, status_f, status_s)."""
    a = pathloss_integral_a(p.pathloss, domain, tol=min(tol, 1e-9))
    lam_c = critical_lambda(p, T, a)
    rows = []
    for lam in lambdas:
        f = poisson_heuristic_beta(lam, p, T, domain, tol)
        s = second_order_beta(lam, p, T, domain, tol)
        rows.append({
            "lambda": float(lam),
            "beta_f": f.beta,
            "beta_s": s.beta,
            "beta_l": light_traffic_beta(lam, p, T),
            "lambda_c": lam_c,
            "status_f": f.solver_status,
            "status_s": s.solver_status,
            "defect_f": f.residual,
            "defect_s": s.residual,
        })
    return rows
